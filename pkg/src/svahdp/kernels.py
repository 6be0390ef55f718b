"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``SVAHDP_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os
from types import ModuleType

from . import _kernels_py

_compiled: ModuleType | None
try:
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

if _compiled is not None and os.environ.get("SVAHDP_PURE_PYTHON") != "1":
    BACKEND = "compiled"
else:
    BACKEND = "python"

_impl = BACKENDS[BACKEND]
viterbi = _impl.viterbi
hdp_assignment_sweep = _impl.hdp_assignment_sweep


def get_backend(name: str) -> ModuleType:
    """Return the kernel module called ``name`` (``"python"`` or ``"compiled"``)."""
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} is not available; have {sorted(BACKENDS)}") from None
