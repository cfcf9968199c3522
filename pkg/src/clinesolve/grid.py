"""Finite-difference Newton solver and parabolic relaxation on uniform grids.

Independent of the shooting path end to end: second-order central
differences with mirrored ghost nodes for the Neumann ends, an analytically
assembled block-tridiagonal Jacobian, and a semi-implicit relaxation flow
(implicit diffusion, explicit reaction) whose steady states are the
solutions.  Serves as the cross-validation oracle for shooting output and as
a robust fallback whose basins of attraction are not distorted by the
shooting map's sensitivity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .model import ProblemSpec
from .solution import SolutionProfile

__all__ = ["Grid", "fd_residual", "fd_newton", "relax", "GridSolveError",
           "grid_profile"]


class GridSolveError(RuntimeError):
    """Grid solve failed; ``reason`` in {singular_jacobian, divergence,
    max_iter, blow_up, timeout}."""

    def __init__(self, reason: str, detail: str = "", state=None):
        self.reason = reason
        self.state = state
        super().__init__(f"{reason}: {detail}" if detail else reason)


@dataclass(frozen=True)
class Grid:
    """M+1 uniform nodes spanning the habitat."""

    interval: tuple[float, float]
    m: int

    def __post_init__(self):
        if self.m < 8:
            raise ValueError("grid needs at least 8 cells")
        lo, hi = self.interval
        if not lo < hi:
            raise ValueError("empty interval")
        object.__setattr__(self, "interval", (float(lo), float(hi)))

    @property
    def dx(self) -> float:
        lo, hi = self.interval
        return (hi - lo) / self.m

    @property
    def nodes(self) -> np.ndarray:
        lo, hi = self.interval
        return np.linspace(lo, hi, self.m + 1)


class _GridTables:
    """Spatial factors and coupling handles precomputed on the grid nodes."""

    def __init__(self, spec: ProblemSpec, grid: Grid, lam_eff=None):
        self.spec = spec
        self.grid = grid
        self.lam = np.asarray(spec.lams if lam_eff is None else lam_eff, dtype=float)
        xs = grid.nodes
        self.spatial = [[prof(xs) for _, prof in eq.weight.terms]
                        for eq in spec.equations]

    def weight_cols(self, i: int, others: np.ndarray) -> np.ndarray:
        """w_i at every node; ``others`` is (M+1, N-1) clamped coupling data."""
        eq = self.spec.equations[i]
        out = np.zeros(others.shape[0])
        for (cpoly, _), sp in zip(eq.weight.terms, self.spatial[i]):
            out += cpoly.evaluate_many(others) * sp
        return out

    def weight_partial_cols(self, i: int, others: np.ndarray, k: int) -> np.ndarray:
        eq = self.spec.equations[i]
        out = np.zeros(others.shape[0])
        for (cpoly, _), sp in zip(eq.weight.terms, self.spatial[i]):
            out += cpoly.partial_many(others, k) * sp
        return out


def _reaction(tables: _GridTables, P: np.ndarray, mu: float = 0.0,
              v=None) -> np.ndarray:
    """Truncated reaction term h_i(x_j, P_j) + mu v_i, all nodes at once."""
    spec = tables.spec
    n = spec.n_equations
    clamped = np.clip(P, 0.0, 1.0)
    out = np.empty_like(P)
    for i, eq in enumerate(spec.equations):
        s = P[:, i]
        others = np.delete(clamped, i, axis=1)
        w = tables.weight_cols(i, others)
        inside = tables.lam[i] * w * eq.nonlinearity(np.clip(s, 0.0, 1.0))
        out[:, i] = np.where(s <= 0.0, -s, np.where(s >= 1.0, 1.0 - s, inside))
    if v is not None and mu != 0.0:
        out += mu * np.asarray(v, dtype=float)[None, :]
    return out


def _reaction_jacobian(tables: _GridTables, P: np.ndarray) -> np.ndarray:
    """dh_i/dP_k per node, shape (M+1, N, N)."""
    spec = tables.spec
    n = spec.n_equations
    clamped = np.clip(P, 0.0, 1.0)
    out = np.zeros((P.shape[0], n, n))
    for i, eq in enumerate(spec.equations):
        s = P[:, i]
        inside = (s > 0.0) & (s < 1.0)
        others = np.delete(clamped, i, axis=1)
        w = tables.weight_cols(i, others)
        fval = eq.nonlinearity(np.clip(s, 0.0, 1.0))
        fprime = eq.nonlinearity.derivative(np.clip(s, 0.0, 1.0))
        out[:, i, i] = np.where(inside, tables.lam[i] * w * fprime, -1.0)
        for m in range(n - 1):
            k = m if m < i else m + 1
            live = inside & (P[:, k] > 0.0) & (P[:, k] < 1.0)
            dw = tables.weight_partial_cols(i, others, m)
            out[:, i, k] = np.where(live, tables.lam[i] * dw * fval, 0.0)
    return out


def _laplacian(P: np.ndarray, dx: float) -> np.ndarray:
    """Central second difference with mirrored ghost nodes (Neumann ends)."""
    out = np.empty_like(P)
    out[1:-1] = (P[:-2] - 2.0 * P[1:-1] + P[2:]) / dx**2
    out[0] = 2.0 * (P[1] - P[0]) / dx**2
    out[-1] = 2.0 * (P[-2] - P[-1]) / dx**2
    return out


def fd_residual(spec: ProblemSpec, grid: Grid, P: np.ndarray, *,
                lam_eff=None, mu: float = 0.0, v=None,
                tables: _GridTables | None = None) -> np.ndarray:
    """Discrete residual of the truncated system on the grid, (M+1, N)."""
    P = np.asarray(P, dtype=float)
    if P.shape != (grid.m + 1, spec.n_equations):
        raise ValueError("P must be (M+1, N)")
    t = tables if tables is not None else _GridTables(spec, grid, lam_eff)
    return _laplacian(P, grid.dx) + _reaction(t, P, mu, v)


def _banded_from_blocks(diag_blocks: np.ndarray, off: float, n: int) -> np.ndarray:
    """Assemble the banded matrix for node-major unknowns.

    ``diag_blocks`` is (M+1, N, N) per-node coupling; neighbor coupling is
    ``off`` times the identity, doubled in the first and last block rows
    (mirrored ghosts).
    """
    mp1 = diag_blocks.shape[0]
    size = mp1 * n
    bw = n  # worst offset: same-node coupling (N-1) vs neighbor node (N)
    ab = np.zeros((2 * bw + 1, size))
    # fill node-diagonal blocks
    for i in range(n):
        for k in range(n):
            offset = k - i
            rows = np.arange(mp1) * n + i
            cols = rows + offset
            ab[bw - offset, cols] = diag_blocks[:, i, k]
    # neighbor identity couplings
    for i in range(n):
        rows = np.arange(1, mp1) * n + i          # coupling to node j-1
        ab[bw + n, rows - n] = off
        rows = np.arange(0, mp1 - 1) * n + i      # coupling to node j+1
        ab[bw - n, rows + n] = off
    # mirrored ends double the single neighbor
    for i in range(n):
        ab[bw - n, n + i] = 2.0 * off
        ab[bw + n, (mp1 - 2) * n + i] = 2.0 * off
    return ab


def fd_newton(spec: ProblemSpec, grid: Grid, P0: np.ndarray, tol: float = 1e-10,
              max_iter: int = 50, *, lam_eff=None, mu: float = 0.0, v=None,
              damping: bool = True) -> np.ndarray:
    """Damped Newton on the discrete system; returns the converged grid values.

    The Jacobian couples each node's components through the reaction
    derivatives and neighboring nodes through the diffusion stencil; it is
    solved as a banded system.  Raises GridSolveError on singular Jacobians
    (the pure-diffusion problem has the constants in its null space),
    divergence, or iteration exhaustion.
    """
    n = spec.n_equations
    P = np.array(P0, dtype=float)
    if P.shape != (grid.m + 1, n):
        raise ValueError("P0 must be (M+1, N)")
    tables = _GridTables(spec, grid, lam_eff)
    dx2 = grid.dx**2
    mp1 = grid.m + 1
    for _ in range(max_iter):
        res = _laplacian(P, grid.dx) + _reaction(tables, P, mu, v)
        rnorm = float(np.abs(res).max())
        if rnorm <= tol:
            return P
        blocks = _reaction_jacobian(tables, P)
        for i in range(n):
            blocks[:, i, i] += -2.0 / dx2
        ab = _banded_from_blocks(blocks, 1.0 / dx2, n)
        try:
            delta = solve_banded((n, n), ab, -res.reshape(-1))
        except np.linalg.LinAlgError as exc:
            raise GridSolveError("singular_jacobian", str(exc)) from exc
        if not np.all(np.isfinite(delta)):
            raise GridSolveError("singular_jacobian", "non-finite correction")
        delta = delta.reshape(mp1, n)
        if np.abs(delta).max() > 1e6:
            raise GridSolveError("singular_jacobian",
                                 f"correction blow-up {np.abs(delta).max():.2e}")
        step = 1.0
        if damping:
            for _ in range(21):
                P_try = P + step * delta
                r_try = _laplacian(P_try, grid.dx) + _reaction(tables, P_try, mu, v)
                if float(np.abs(r_try).max()) <= (1.0 - 1e-4 * step) * rnorm:
                    break
                step *= 0.5
            else:
                raise GridSolveError("divergence", "line search stalled")
            P = P_try
        else:
            P = P + delta
        if np.abs(P).max() > 10.0:
            raise GridSolveError("divergence", "values left [-10, 10]")
    raise GridSolveError("max_iter", f"no convergence in {max_iter} iterations")


def relax(spec: ProblemSpec, grid: Grid, P0: np.ndarray, dt: float,
          t_end: float, steady_tol: float = 1e-9, *, lam_eff=None,
          mu: float = 0.0, v=None) -> np.ndarray:
    """Semi-implicit relaxation to a steady state.

    Diffusion is treated implicitly (one tridiagonal solve per component and
    step), the truncated reaction explicitly.  Stops when the per-step update
    rate drops below ``steady_tol``; raises on blow-up or when ``t_end``
    passes without reaching steadiness.
    """
    n = spec.n_equations
    P = np.array(P0, dtype=float)
    if P.shape != (grid.m + 1, n):
        raise ValueError("P0 must be (M+1, N)")
    if dt <= 0:
        raise ValueError("dt must be positive")
    tables = _GridTables(spec, grid, lam_eff)
    dx2 = grid.dx**2
    mp1 = grid.m + 1
    r = dt / dx2
    # (I - dt*L) as a tridiagonal banded matrix, shared by all components
    ab = np.zeros((3, mp1))
    ab[0, 1:] = -r
    ab[0, 1] = -2.0 * r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :-1] = -r
    ab[2, -2] = -2.0 * r
    t = 0.0
    while t < t_end:
        rhs = P + dt * _reaction(tables, P, mu, v)
        P_new = np.stack([solve_banded((1, 1), ab, rhs[:, i])
                          for i in range(n)], axis=1)
        rate = float(np.abs(P_new - P).max()) / dt
        P = P_new
        t += dt
        if P.min() < -1.0 or P.max() > 2.0:
            raise GridSolveError("blow_up", f"values left [-1, 2] at t = {t:.3g}",
                                 state=P)
        if rate <= steady_tol:
            return P
    raise GridSolveError("timeout", f"no steady state by t = {t_end:g}", state=P)


def grid_profile(spec: ProblemSpec, grid: Grid, P: np.ndarray, *,
                 lam_eff=None, mu: float = 0.0, v=None,
                 method: str = "fd_newton") -> SolutionProfile:
    """Wrap converged grid values as a SolutionProfile.

    Derivatives use the mirrored-ghost central difference (exactly zero at
    the ends); second derivatives restate the reaction term so the stored
    triple satisfies the equation at the nodes.
    """
    n = spec.n_equations
    lam = np.asarray(spec.lams if lam_eff is None else lam_eff, dtype=float)
    tables = _GridTables(spec, grid, lam_eff)
    dx = grid.dx
    deriv = np.empty_like(P)
    deriv[1:-1] = (P[2:] - P[:-2]) / (2.0 * dx)
    deriv[0] = 0.0
    deriv[-1] = 0.0
    reaction = _reaction(tables, P, mu, v)
    res = fd_residual(spec, grid, P, lam_eff=lam_eff, mu=mu, v=v, tables=tables)
    vv = None if v is None else np.asarray(v, dtype=float)
    return SolutionProfile(
        mesh=grid.nodes, values=np.array(P, dtype=float), derivatives=deriv,
        second_derivatives=-reaction, lambda_snapshot=lam,
        initial_value=np.array(P[0], dtype=float),
        residual_sup=float(np.abs(res).max()),
        neumann_residual=np.stack([np.abs(deriv[0]), np.abs(deriv[-1])], axis=1),
        mu=mu, forcing=(vv if mu != 0.0 else None), method=method)
