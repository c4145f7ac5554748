"""python -m src.cli"""
import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _pin_blas_threads(argv) -> None:
    # BLAS reads these once, when numpy is first imported.
    value = None
    for i, arg in enumerate(argv):
        if arg == "--threads" and i + 1 < len(argv):
            value = argv[i + 1]
        elif arg.startswith("--threads="):
            value = arg.split("=", 1)[1]
    for name in _THREAD_VARS:
        if value is not None:
            os.environ[name] = value
        else:
            os.environ.setdefault(name, "1")


_pin_blas_threads(sys.argv[1:])

from .main import main  # noqa: E402

sys.exit(main())
