"""Backend selection for the candidate-scoring kernel.

The compiled extension is used when it imports; set ``CRNSIM_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("CRNSIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

score_candidates = _impl.score_candidates
python_score_candidates = _pykernels.score_candidates


def compiled_score_candidates():
    """The compiled kernel, or None when the extension is unavailable."""
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels.score_candidates
