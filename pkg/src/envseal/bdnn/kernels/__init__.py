"""Hot kernels for the network: im2col/col2im and 2x2 max pooling.

Two interchangeable backends exist: a Cython extension (``_fast``) and a
pure-numpy reference (``reference``). The compiled backend is selected at
import when available; setting ``ENVSEAL_PURE_PYTHON=1`` forces the
reference. Both produce bit-identical float64 results (data movement is
exact and accumulation orders match), so model outputs do not depend on
the backend.
"""

from __future__ import annotations

import os

from . import reference

if os.environ.get("ENVSEAL_PURE_PYTHON"):
    _impl = reference
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = reference

BACKEND = _impl.BACKEND
im2col = _impl.im2col
col2im = _impl.col2im
maxpool2x2 = _impl.maxpool2x2
maxpool2x2_backward = _impl.maxpool2x2_backward


def available_backends() -> dict:
    """Importable backend modules by name (for tests and benchmarks)."""
    backends = {reference.BACKEND: reference}
    try:
        from . import _fast

        backends[_fast.BACKEND] = _fast
    except ImportError:
        pass
    return backends
