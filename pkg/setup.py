#! /usr/bin/env python3
"""Installation script"""

from setuptools import setup

setup(
    name="dagnn",
    use_scm_version=True,
    setup_requires=["setuptools_scm"],
    install_requires=["numpy", "scipy", "PyYAML", "click"],
    extras_require={"test": ["pytest"]},
    packages=["dagnn"],
    entry_points={"console_scripts": ["dagnn = dagnn.cli:main"]},
    python_requires=">=3.9",
    license="GPLv3",
    description="Unrolled primal/dual graph networks mimicking dual ascent on relaxed MIQPs.",
)
