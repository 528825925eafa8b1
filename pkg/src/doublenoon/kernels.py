"""Backend selection for the time-dependent stepping kernel.

The compiled extension is used when it was built; otherwise the numpy
implementation is used.  Setting ``DOUBLENOON_KERNEL=python`` forces the
fallback.
"""

from __future__ import annotations

import os

from . import _rk4_py

try:
    from . import _rk4 as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _rk4_py.rk4_advance}
if _compiled is not None:
    BACKENDS["cython"] = _compiled.rk4_advance

_requested = os.environ.get("DOUBLENOON_KERNEL", "").strip().lower()
if _requested and _requested not in BACKENDS:
    raise ImportError(f"kernel backend {_requested!r} is not available; have {sorted(BACKENDS)}")
BACKEND = _requested or ("cython" if "cython" in BACKENDS else "python")
rk4_advance = BACKENDS[BACKEND]


def get_backend(name: str):
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(BACKENDS)}") from None
