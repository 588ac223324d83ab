# ============================================================================
# debug_log.py
# ============================================================================
"""
Logging setup shared by the library modules and the command line.

Console lines keep the `[Tag] message` shape. A debug trace file is written
only when JACOBI_DEBUG=1 is set, and a failure to write it is never fatal.
"""

import logging
import os
import sys
import time
from pathlib import Path

DEBUG_ENV_VAR = "JACOBI_DEBUG"
DEBUG_FILE_NAME = "jacobi_debug.log"

_CONSOLE_FORMAT = "[%(name)s] %(message)s"


def debug_enabled() -> bool:
    return os.environ.get(DEBUG_ENV_VAR) == "1"


class _DebugFileHandler(logging.Handler):
    """Appends timestamped records to the debug file; swallows I/O errors."""

    def __init__(self, path: Path):
        super().__init__(level=logging.DEBUG)
        self.path = path

    def emit(self, record: logging.LogRecord) -> None:
        try:
            line = f"[{time.strftime('%Y-%m-%d %H:%M:%S')}] [{record.name}] {record.getMessage()}\n"
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line)
        except Exception:
            pass


def setup_logging(verbose: bool = False) -> logging.Logger:
    """Configure the root logger once; later calls only adjust the level."""
    root = logging.getLogger()
    if not getattr(root, "_jacobi_configured", False):
        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(logging.Formatter(_CONSOLE_FORMAT))
        console.setLevel(logging.DEBUG)
        root.addHandler(console)
        if debug_enabled():
            root.addHandler(_DebugFileHandler(Path.cwd() / DEBUG_FILE_NAME))
        root._jacobi_configured = True

    if debug_enabled():
        root.setLevel(logging.DEBUG)
    else:
        root.setLevel(logging.INFO if verbose else logging.WARNING)
    return root
