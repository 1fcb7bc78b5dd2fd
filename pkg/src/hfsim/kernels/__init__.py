"""Hot-kernel backend selection.

The compiled extension (Cython) is used when importable; the NumPy reference
backend is the fallback.  Set HFSIM_FORCE_BACKEND=ref|fast to override.
"""

from __future__ import annotations

import os

from . import _ref

try:
    from . import _fast
    _HAVE_FAST = True
except ImportError:  # pragma: no cover - depends on build environment
    _fast = None
    _HAVE_FAST = False

_forced = os.environ.get("HFSIM_FORCE_BACKEND", "")
if _forced == "ref":
    _impl = _ref
elif _forced == "fast":
    if not _HAVE_FAST:
        raise ImportError("HFSIM_FORCE_BACKEND=fast but compiled kernels are missing")
    _impl = _fast
else:
    _impl = _fast if _HAVE_FAST else _ref

BACKEND = "fast" if _impl is _fast and _fast is not None else "ref"

sample_multilinear = _impl.sample_multilinear
reinit_godunov = _impl.reinit_godunov

__all__ = ["sample_multilinear", "reinit_godunov", "BACKEND"]
