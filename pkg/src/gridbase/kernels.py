"""Backend selection for the batch evaluation kernels.

The compiled Cython extension is preferred; the numpy implementation is a
drop-in twin used when the extension is unavailable or when the
GRIDBASE_PURE_PYTHON environment variable is set to a truthy value.
Both backends are covered by the same equivalence tests.
"""

import os

from . import _fastpath_py

if os.environ.get("GRIDBASE_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
    _impl = _fastpath_py
else:
    try:
        from . import _fastpath as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _fastpath_py

BACKEND = _impl.BACKEND
objective_batch = _impl.objective_batch
constraints_batch = _impl.constraints_batch
