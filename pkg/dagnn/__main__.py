"""Allows running the package via python -m dagnn."""

from dagnn.cli import main


main()
