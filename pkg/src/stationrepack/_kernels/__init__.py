"""Search kernels, compiled when available.

The Cython extension ``_ckernels`` is used if it was built; otherwise the
pure-Python ``_pykernels`` module is loaded. Set ``STATIONREPACK_PURE=1``
to force the fallback.
"""

import os

from . import _pykernels

SAT = _pykernels.SAT
UNSAT = _pykernels.UNSAT
TIMEOUT = _pykernels.TIMEOUT
CANCELLED = _pykernels.CANCELLED

if os.environ.get("STATIONREPACK_PURE", "") not in ("", "0"):
    _backend = _pykernels
else:
    try:
        from . import _ckernels as _backend
    except ImportError:  # extension not built
        _backend = _pykernels

BACKEND = "compiled" if _backend is not _pykernels else "python"

dpll = _backend.dpll
walksat = _backend.walksat


def backends():
    """Available kernel modules keyed by name (for parity tests and benchmarks)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["compiled"] = _ckernels
    except ImportError:
        pass
    return out
