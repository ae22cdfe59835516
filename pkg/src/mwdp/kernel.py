"""Backend selection for the MWUM feasibility loop.

The compiled extension is used when it imports and ``MWDP_PURE_PYTHON`` is
not set to a true value; otherwise the pure-Python twin takes over.
"""

import os

from . import _kernel_py

_FORCE_PY = os.environ.get("MWDP_PURE_PYTHON", "").lower() in ("1", "true", "yes")

try:
    if _FORCE_PY:
        raise ImportError("pure Python forced by MWDP_PURE_PYTHON")
    from . import _kernel as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _kernel_py.run_mwum}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled.run_mwum

DEFAULT_BACKEND = "compiled" if _compiled is not None else "python"
HAVE_COMPILED = _compiled is not None


def get_backend(name: str | None = None):
    name = name or DEFAULT_BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
