"""Discretized solutions and the measurements taken on them.

A solution profile stores mesh values, first and second derivatives, and the
solve-time metadata (intensities, initial value, residuals).  Measurements
(component maxima, the integrated-reaction identity) interpolate the stored
data with cubic Hermite pieces, which keeps them accurate to roughly the
solver tolerance instead of the mesh spacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ProblemSpec

__all__ = ["SolutionProfile", "component_max_abs", "hermite_eval",
           "reaction_integral"]

# 5-point Gauss-Legendre rule on [0, 1]
_GAUSS_T = 0.5 * (1.0 + np.array([
    -0.9061798459386640, -0.5384693101056831, 0.0,
    0.5384693101056831, 0.9061798459386640]))
_GAUSS_W = 0.5 * np.array([
    0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
    0.4786286704993665, 0.2369268850561891])


@dataclass(frozen=True)
class SolutionProfile:
    """One solution of the Neumann system, sampled on a mesh.

    ``values``/``derivatives``/``second_derivatives`` have one column per
    component.  ``neumann_residual`` holds |p_i'| at the two habitat ends.
    ``mu``/``forcing`` record a constant forcing ``mu * v_i`` active at solve
    time (zero for the plain problem).
    """

    mesh: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    second_derivatives: np.ndarray
    lambda_snapshot: np.ndarray
    initial_value: np.ndarray
    residual_sup: float
    neumann_residual: np.ndarray
    mu: float = 0.0
    forcing: np.ndarray | None = None
    method: str = "shooting"

    @property
    def n_components(self) -> int:
        return self.values.shape[1]

    def sup_norm(self, i: int) -> float:
        return component_max_abs(self, i)

    def max_on(self, i: int, lo: float, hi: float) -> float:
        return component_max_abs(self, i, lo, hi)

    def box_excess(self) -> float:
        """How far the values stray outside [0, 1] (0 when inside)."""
        return float(max(0.0, -self.values.min(), self.values.max() - 1.0))


def _hermite_cell_eval(p0, p1, m0, m1, h, t):
    t2 = t * t
    t3 = t2 * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return p0 * h00 + h * m0 * h10 + p1 * h01 + h * m1 * h11


def hermite_eval(mesh: np.ndarray, values: np.ndarray, derivs: np.ndarray, xq):
    """Cubic Hermite interpolation of (values, derivatives) data at ``xq``.

    ``values``/``derivs`` may be 1-d or (len(mesh), N); the result matches.
    """
    xq_arr = np.atleast_1d(np.asarray(xq, dtype=float))
    idx = np.clip(np.searchsorted(mesh, xq_arr, side="right") - 1, 0, len(mesh) - 2)
    h = mesh[idx + 1] - mesh[idx]
    t = (xq_arr - mesh[idx]) / h
    v = np.atleast_2d(values.T).T
    d = np.atleast_2d(derivs.T).T
    out = _hermite_cell_eval(v[idx], v[idx + 1], d[idx], d[idx + 1],
                             h[:, None], t[:, None])
    if values.ndim == 1:
        out = out[:, 0]
    return out[0] if np.ndim(xq) == 0 else out


def component_max_abs(profile: SolutionProfile, i: int,
                      lo: float | None = None, hi: float | None = None) -> float:
    """Max of |p_i| over [lo, hi] (defaults: whole habitat).

    Exact for the cubic Hermite interpolant of the stored data: interior
    extrema are located by solving the per-cell derivative quadratic.
    """
    mesh = profile.mesh
    lo = float(mesh[0]) if lo is None else float(lo)
    hi = float(mesh[-1]) if hi is None else float(hi)
    if not (mesh[0] <= lo <= hi <= mesh[-1]):
        raise ValueError("measurement window outside the mesh")
    p = profile.values[:, i]
    m = profile.derivatives[:, i]

    j0 = int(np.clip(np.searchsorted(mesh, lo, side="right") - 1, 0, len(mesh) - 2))
    j1 = int(np.clip(np.searchsorted(mesh, hi, side="left") - 1, 0, len(mesh) - 2))
    best = max(abs(float(hermite_eval(mesh, p, m, lo))),
               abs(float(hermite_eval(mesh, p, m, hi))))
    for j in range(j0, j1 + 1):
        a, b = mesh[j], mesh[j + 1]
        h = b - a
        tlo = max(0.0, (lo - a) / h)
        thi = min(1.0, (hi - a) / h)
        if thi <= tlo:
            continue
        p0, p1, m0, m1 = p[j], p[j + 1], m[j], m[j + 1]
        if tlo == 0.0:
            best = max(best, abs(p0))
        if thi == 1.0:
            best = max(best, abs(p1))
        # dH/dt is quadratic: find interior critical points
        qa = 6 * p0 - 6 * p1 + 3 * h * m0 + 3 * h * m1
        qb = -6 * p0 + 6 * p1 - 4 * h * m0 - 2 * h * m1
        qc = h * m0
        roots = []
        if qa == 0.0:
            if qb != 0.0:
                roots = [-qc / qb]
        else:
            disc = qb * qb - 4 * qa * qc
            if disc >= 0.0:
                sq = np.sqrt(disc)
                roots = [(-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)]
        for t in roots:
            if tlo < t < thi:
                best = max(best, abs(float(_hermite_cell_eval(p0, p1, m0, m1, h, t))))
    return float(best)


def reaction_integral(profile: SolutionProfile, spec: ProblemSpec, i: int,
                      lam_eff=None) -> float:
    """Integral over the habitat of w_i(x, p_other) * f_i(p_i).

    Integrating equation i with Neumann ends gives
    ``lam_i * integral + mu * v_i * |habitat| = 0``, so for an exact solution
    this returns ``-mu * v_i * |habitat| / lam_i``.  The solution is
    interpolated with cubic Hermite pieces and the quadrature is per-cell
    Gauss with cells split at the weight breakpoints, so the quadrature error
    is negligible against the check tolerances.
    """
    eq = spec.equations[i]
    mesh = profile.mesh
    edges = np.unique(np.concatenate([mesh, spec.breakpoints()]))
    edges = edges[(edges >= mesh[0]) & (edges <= mesh[-1])]
    h = np.diff(edges)
    xq = (edges[:-1, None] + h[:, None] * _GAUSS_T[None, :]).reshape(-1)
    wq = (h[:, None] * _GAUSS_W[None, :]).reshape(-1)

    vals = hermite_eval(mesh, profile.values, profile.derivatives, xq)
    vals = np.clip(vals, 0.0, 1.0)
    p_i = vals[:, i]
    others = np.delete(vals, i, axis=1)
    w = np.zeros(xq.size)
    for c, prof in eq.weight.terms:
        w += c.evaluate_many(others) * prof(xq)
    g = w * eq.nonlinearity(p_i)
    return float(np.dot(wq, g))
