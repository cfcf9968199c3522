"""Selects the shooting kernel: compiled extension if available, else the
pure-Python twin.

Set ``CLINESOLVE_BACKEND=python`` (or ``compiled``) to force a choice; the
default ``auto`` prefers the compiled extension.
"""

from __future__ import annotations

import os

from . import _pykernel

__all__ = ["get_kernel", "backend_name", "available_backends",
           "STATUS_OK", "STATUS_UNDERFLOW", "STATUS_NONFINITE", "STATUS_MAXSTEPS"]

STATUS_OK = _pykernel.STATUS_OK
STATUS_UNDERFLOW = _pykernel.STATUS_UNDERFLOW
STATUS_NONFINITE = _pykernel.STATUS_NONFINITE
STATUS_MAXSTEPS = _pykernel.STATUS_MAXSTEPS

try:
    from . import _kernel  # type: ignore[attr-defined]
except ImportError:  # extension not built; fall back silently
    _kernel = None


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _kernel is not None else ("python",)


def get_kernel(name: str = "auto"):
    """Return the kernel module for ``name`` in {auto, compiled, python}."""
    if name == "auto":
        name = os.environ.get("CLINESOLVE_BACKEND", "auto")
    if name in ("auto", ""):
        return _kernel if _kernel is not None else _pykernel
    if name == "python":
        return _pykernel
    if name == "compiled":
        if _kernel is None:
            raise RuntimeError("compiled kernel is not available in this install")
        return _kernel
    raise ValueError(f"unknown backend {name!r}")


def backend_name(kernel=None) -> str:
    kernel = kernel if kernel is not None else get_kernel()
    return "compiled" if getattr(kernel, "COMPILED", False) else "python"
