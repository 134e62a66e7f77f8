"""Kernel backend selection.

Prefers the compiled extension (``mpcsim._kernels``); falls back to the
pure-Python/numpy implementation.  ``MPCSIM_PURE=1`` forces the fallback.
Both backends are bit-identical; the benchmark in ``benchmarks/`` compares
their speed.
"""

import os

if os.environ.get("MPCSIM_PURE", "0") == "1":
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as kernels

BACKEND_NAME = "compiled" if kernels.IS_COMPILED else "pure"
