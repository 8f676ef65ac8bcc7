"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled extension ``opaclab._ckernels`` is used when it imports. Set
``OPACLAB_BACKEND=python`` to force the fallback (useful for comparing the two
or on machines without a C compiler).
"""
from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("OPACLAB_BACKEND", "").lower() not in ("python", "py", "numpy"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

adam_update = _impl.adam_update
polyak = _impl.polyak
tanh_gauss_logp = _impl.tanh_gauss_logp
nav_physics = _impl.nav_physics
nav_observe = _impl.nav_observe

__all__ = [
    "BACKEND",
    "adam_update",
    "polyak",
    "tanh_gauss_logp",
    "nav_physics",
    "nav_observe",
]
