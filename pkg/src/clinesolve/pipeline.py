"""Solution enumeration portfolio: grid multistart, relaxation seeding,
recombination.

The shooting map develops extreme sensitivity around large-amplitude
solutions (trajectories graze the unit box, where the truncation kink sits),
which shrinks their Newton basins below any practical start grid.  The
parabolic relaxation flow has order-one basins for the stable states, so a
pattern sweep of relaxed initial data, polished first on the grid and then
by shooting, recovers exactly the solutions the multistart tends to miss.
A final recombination pass pairs the component values found so far.
"""

from __future__ import annotations

import itertools

import numpy as np

from .grid import Grid, GridSolveError, fd_newton, relax
from .model import ProblemSpec, weight_envelopes
from .shooting import (MultistartResult, SolveFailure, _product_refine,
                       _ShootContext, DEFAULT_MESH_POINTS, multistart,
                       newton_shoot)

__all__ = ["find_solutions", "relax_pattern_seeds"]

PATTERN_LEVELS = (0.0, 0.5, 1.0)


def _stable_dt(spec: ProblemSpec, lam_eff=None) -> float:
    """Explicit-reaction stability bound for the relaxation flow."""
    lam = np.asarray(spec.lams if lam_eff is None else lam_eff, dtype=float)
    rate = 1.0
    for i, eq in enumerate(spec.equations):
        alpha, beta = weight_envelopes(eq.weight, 3)
        wmax = max(np.abs(alpha.values).max(), np.abs(beta.values).max())
        fp = np.abs(eq.nonlinearity.derivative(np.linspace(0.0, 1.0, 64))).max()
        rate = max(rate, lam[i] * wmax * fp)
    return 0.5 / rate


def relax_pattern_seeds(spec: ProblemSpec, *, grid_m: int = 512,
                        lam_eff=None, mu: float = 0.0, v=None,
                        steady_tol: float = 1e-7, t_end: float = 200.0,
                        patterns=None) -> list[np.ndarray]:
    """Steady states reached by relaxation from constant patterns.

    Returns left-end value vectors suitable as shooting seeds, one per
    pattern that relaxed to a steady state (deduplicated).  Patterns default
    to all constant vectors over {0, 1/2, 1} except the trivial corners.
    """
    n = spec.n_equations
    g = Grid(spec.interval, grid_m)
    dt = _stable_dt(spec, lam_eff)
    if patterns is None:
        patterns = [p for p in itertools.product(PATTERN_LEVELS, repeat=n)
                    if any(x not in (0.0, 1.0) for x in p)]
    seeds: list[np.ndarray] = []
    for pat in patterns:
        P0 = np.tile(np.asarray(pat, dtype=float), (grid_m + 1, 1))
        try:
            P = relax(spec, g, P0, dt=dt, t_end=t_end, steady_tol=steady_tol,
                      lam_eff=lam_eff, mu=mu, v=v)
            P = fd_newton(spec, g, P, tol=1e-9, lam_eff=lam_eff, mu=mu, v=v)
        except GridSolveError:
            continue
        c = np.array(P[0], dtype=float)
        if not any(np.max(np.abs(c - s)) <= 1e-7 for s in seeds):
            seeds.append(c)
    return seeds


def find_solutions(spec: ProblemSpec, grid_per_axis: int, tol: float = 1e-9,
                   dedup_tol: float = 1e-5, *, max_iter: int = 25,
                   jobs: int = 1, kernel=None, lam_eff=None, mu: float = 0.0,
                   v=None, rel_tol: float = 1e-10, abs_tol: float = 1e-10,
                   mesh_points: int = DEFAULT_MESH_POINTS,
                   relax_seeding: bool = True,
                   relax_grid_m: int = 512) -> MultistartResult:
    """Full enumeration portfolio; returns the deduplicated solution archive."""
    result = multistart(spec, grid_per_axis, tol, dedup_tol, max_iter=max_iter,
                        kernel=kernel, lam_eff=lam_eff, mu=mu, v=v,
                        rel_tol=rel_tol, abs_tol=abs_tol,
                        mesh_points=mesh_points, jobs=jobs, recombine=True)
    if result.degenerate or not relax_seeding:
        return result

    ctx = _ShootContext(spec, kernel=kernel, lam_eff=lam_eff, mu=mu, v=v,
                        rel_tol=rel_tol, abs_tol=abs_tol)
    found = result.solutions
    for c0 in relax_pattern_seeds(spec, grid_m=relax_grid_m, lam_eff=lam_eff,
                                  mu=mu, v=v):
        if any(np.max(np.abs(c0 - s.initial_value)) <= dedup_tol for s in found):
            continue
        try:
            prof = newton_shoot(spec, c0, tol=tol, max_iter=max_iter,
                                mesh_points=mesh_points, _ctx=ctx)
        except SolveFailure as f:
            result.failures[f.reason] = result.failures.get(f.reason, 0) + 1
            continue
        if any(np.max(np.abs(prof.initial_value - s.initial_value)) <= dedup_tol
               for s in found):
            continue
        found.append(prof)
    _product_refine(spec, found, tol, dedup_tol, max_iter, ctx, mesh_points,
                    result.failures)
    return result
