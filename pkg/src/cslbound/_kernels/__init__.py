"""Hot numerical kernels with a compiled fast path.

``_ckernels`` (Cython) is used when it has been built, otherwise the numpy
implementations in ``_pykernels``.  Setting ``CSLBOUND_PURE_PYTHON=1`` forces
the fallback; ``BACKEND`` reports which one is active.
"""

import os

from . import _pykernels

if os.environ.get("CSLBOUND_PURE_PYTHON", "0") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

profile_transform = _impl.profile_transform
multilayer_bracket_sq = _impl.multilayer_bracket_sq
fc_acceptance = _impl.fc_acceptance

__all__ = ["BACKEND", "profile_transform", "multilayer_bracket_sq", "fc_acceptance"]
