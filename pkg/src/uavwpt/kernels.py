"""Backend selection for the routing kernels.

The compiled Cython module is used when it was built; otherwise, or when the
environment variable ``UAVWPT_PURE_PYTHON`` is set to a non-empty value, the
pure-Python reference implementation is loaded instead.
"""

import os

from . import _pykernels

if os.environ.get("UAVWPT_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

route_cost = _impl.route_cost
split_cost = _impl.split_cost
oracle_search = _impl.oracle_search


def backends() -> dict:
    """All importable kernel modules keyed by name (used by tests and benchmarks)."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
