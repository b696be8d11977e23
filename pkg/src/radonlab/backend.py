"""Backend selection for the oscillatory inner loops.

The compiled extension is preferred when importable; otherwise the numpy
fallback is used.  RADONLAB_BACKEND=python or =compiled forces the choice
(the latter raises if the extension is missing).  Both implementations share
signatures and are cross-checked in the test suite.
"""

from __future__ import annotations

import os

from . import _slowpath

_choice = os.environ.get("RADONLAB_BACKEND")
if _choice not in (None, "", "compiled", "python"):
    raise RuntimeError(f"RADONLAB_BACKEND must be 'compiled' or 'python', got {_choice!r}")

if _choice == "python":
    _impl = _slowpath
    HAVE_COMPILED = False
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]

        HAVE_COMPILED = True
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = _slowpath
        HAVE_COMPILED = False

osc_apply = _impl.osc_apply
osc_materialize = _impl.osc_materialize


def backend_name() -> str:
    return "compiled" if HAVE_COMPILED else "python"


def implementations() -> dict:
    """All importable implementations, for benchmarks and equivalence tests."""
    impls = {"python": _slowpath}
    try:
        from . import _speedups

        impls["compiled"] = _speedups
    except ImportError:
        pass
    return impls
