"""Adaptive integration of the truncated system in first-order form.

The state vector stacks the N component values followed by the N spatial
derivatives.  Steps are controlled by an embedded Dormand-Prince 4(5) pair
and never straddle a profile breakpoint, so the right-hand side stays smooth
within every step; a quartic dense-output polynomial allows evaluation
anywhere in the integrated span.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .model import ProblemSpec
from .packing import PackedProblem, pack
from ._pykernel import dense_eval

__all__ = ["IvpState", "Trajectory", "IntegrationError", "integrate"]

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-10

_STATUS_MSG = {
    backend.STATUS_UNDERFLOW: "step size underflow",
    backend.STATUS_NONFINITE: "non-finite state",
    backend.STATUS_MAXSTEPS: "step budget exhausted",
}


class IntegrationError(RuntimeError):
    """Integration failed; carries the failure position."""

    def __init__(self, status: int, x: float):
        self.status = status
        self.x = float(x)
        super().__init__(f"{_STATUS_MSG.get(status, 'integration failure')} at x = {x!r}")


@dataclass(frozen=True)
class IvpState:
    """Position plus stacked state (values, derivatives)."""

    x: float
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if not np.all(np.isfinite(y)) or not np.isfinite(self.x):
            raise ValueError("state must be finite")
        object.__setattr__(self, "y", y)


class Trajectory:
    """Accepted integration states plus dense-output coefficients.

    ``xs`` is strictly increasing; ``ys[j]`` is the state at ``xs[j]``;
    evaluation anywhere in [xs[0], xs[-1]] goes through the per-step quartic
    interpolant and reproduces the stored states at step endpoints.
    """

    def __init__(self, xs: np.ndarray, ys: np.ndarray, cont: np.ndarray, n: int):
        self.xs = xs
        self.ys = ys
        self.cont = cont
        self.n = n

    @property
    def span(self) -> tuple[float, float]:
        return float(self.xs[0]), float(self.xs[-1])

    def __call__(self, x) -> np.ndarray:
        """Dense state at scalar or array positions; shape (..., 2N)."""
        if len(self.xs) == 1:
            out = np.broadcast_to(self.ys[0], (np.size(x), self.ys.shape[1])).copy()
        else:
            out = dense_eval(self.xs, self.cont, x)
        if np.ndim(x) == 0:
            return out[0]
        return out

    def values(self, x) -> np.ndarray:
        return self(x)[..., : self.n]

    def derivatives(self, x) -> np.ndarray:
        return self(x)[..., self.n:]

    def end_state(self) -> IvpState:
        return IvpState(float(self.xs[-1]), self.ys[-1].copy())


def integrate(spec: ProblemSpec, start: IvpState, x_end: float,
              rel_tol: float = DEFAULT_RTOL, abs_tol: float = DEFAULT_ATOL,
              kernel=None, packed: PackedProblem | None = None,
              lam_eff=None, mu: float = 0.0, v=None,
              max_steps: int = 1_000_000) -> Trajectory:
    """Integrate the truncated system from ``start`` to ``x_end``.

    Args:
        spec: problem definition.
        start: initial state; ``start.x <= x_end`` and both inside the habitat.
        x_end: final position.
        rel_tol, abs_tol: per-step error control tolerances.
        kernel: backend module override (default: selected backend).
        packed: reuse of a packed problem to avoid repacking in hot loops.
        lam_eff: effective intensity vector (defaults to the spec values);
            used by the continuation drivers.
        mu, v: optional constant forcing ``mu * v_i`` added to equation i.

    Returns:
        Trajectory spanning [start.x, x_end].

    Raises:
        IntegrationError: step underflow, non-finite state or step budget.
    """
    lo, hi = spec.interval
    if not (lo <= start.x <= x_end <= hi):
        raise ValueError("integration range must sit inside the habitat interval")
    if not (rel_tol > 0 and abs_tol > 0):
        raise ValueError("tolerances must be positive")
    n = spec.n_equations
    if start.y.size != 2 * n:
        raise ValueError(f"state must have {2 * n} components")
    kernel = kernel if kernel is not None else backend.get_kernel()
    pk = packed if packed is not None else pack(spec)
    lam = np.asarray(spec.lams if lam_eff is None else lam_eff, dtype=float)
    vv = np.zeros(n) if v is None else np.asarray(v, dtype=float)
    status, xs, ys, cont, x_err = kernel.integrate_dense(
        pk, lam, float(mu), vv, start.x, start.y, float(x_end),
        rel_tol, abs_tol, max_steps)
    if status != backend.STATUS_OK:
        raise IntegrationError(status, x_err)
    return Trajectory(xs, ys, cont, n)
