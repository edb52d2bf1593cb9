"""Debugging tools."""

import sys
from traceback import format_exc


__all__ = ["dump_stacktrace"]


BANNER = "#" * 29


def dump_stacktrace() -> int:
    """Writes the traceback of the exception being handled to stderr
    between cut marks and returns the generic failure exit code.
    """

    sys.stderr.write(
        f"{BANNER} cut here {BANNER}\n{format_exc()}{BANNER} end of traceback {BANNER}\n"
    )
    sys.stderr.flush()
    return 1
