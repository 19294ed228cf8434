"""Hot-kernel backend selection.

The compiled Cython extension is preferred when importable; otherwise the
numpy implementations are used.  ``MICRORUIN_KERNELS=py|cy`` forces a backend
(``cy`` raises if the extension is unavailable).  Both backends implement the
same two functions with identical semantics:

* ``interference_powsum`` -- per-slot interference power reductions;
* ``ruin_step``           -- one survival-recursion step on a capital grid.
"""

from __future__ import annotations

import os

from . import _pykernels

_forced = os.environ.get("MICRORUIN_KERNELS", "auto").lower()

if _forced == "py":
    _impl = _pykernels
elif _forced == "cy":
    from . import _ckernels as _impl
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.BACKEND
interference_powsum = _impl.interference_powsum
ruin_step = _impl.ruin_step

__all__ = ["BACKEND", "interference_powsum", "ruin_step"]
