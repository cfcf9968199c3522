"""Shooting solver: deflated damped Newton over initial values, plus a
grid multistart that enumerates distinct solutions.

The Neumann structure makes the left-end derivative zero, so the unknown is
only the vector of initial values c; the residual is the derivative vector
at the right end.  Uniqueness of the initial value problem makes c a perfect
key for a solution, which the deduplication and the deflation both rely on.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .integrate import IntegrationError, IvpState, Trajectory, integrate
from .model import ProblemSpec, extended_rhs
from .packing import PackedProblem, pack
from .solution import SolutionProfile

__all__ = ["SolveFailure", "shoot", "newton_shoot", "multistart", "MultistartResult",
           "build_profile", "DEFAULT_MESH_POINTS"]

DEFAULT_MESH_POINTS = 513
FD_STEP = 1e-7
ARMIJO = 1e-4
MAX_HALVINGS = 20
COND_LIMIT = 1e14
STEP_CAP = 0.5


class SolveFailure(RuntimeError):
    """A solve attempt failed; ``reason`` is a short machine-readable tag."""

    def __init__(self, reason: str, detail: str = "", c=None):
        self.reason = reason
        self.c = None if c is None else np.asarray(c, dtype=float)
        super().__init__(f"{reason}: {detail}" if detail else reason)


class _ShootContext:
    """Packed problem plus solver parameters shared by one batch of shoots."""

    def __init__(self, spec, kernel=None, lam_eff=None, mu=0.0, v=None,
                 rel_tol=1e-10, abs_tol=1e-10, packed=None):
        self.spec = spec
        self.kernel = kernel if kernel is not None else backend.get_kernel()
        self.packed = packed if packed is not None else pack(spec)
        n = spec.n_equations
        self.lam = np.asarray(spec.lams if lam_eff is None else lam_eff, dtype=float)
        self.mu = float(mu)
        self.v = np.zeros(n) if v is None else np.asarray(v, dtype=float)
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol

    def residual(self, c: np.ndarray) -> np.ndarray:
        n = self.spec.n_equations
        y0 = np.concatenate([c, np.zeros(n)])
        status, y_end, x_err = self.kernel.shoot_terminal(
            self.packed, self.lam, self.mu, self.v, y0,
            self.rel_tol, self.abs_tol)
        if status != backend.STATUS_OK:
            raise SolveFailure("integrator_error",
                               f"status {status} at x = {x_err!r}", c=c)
        return y_end[n:]

    def trajectory(self, c: np.ndarray) -> Trajectory:
        n = self.spec.n_equations
        start = IvpState(self.packed.lo, np.concatenate([c, np.zeros(n)]))
        return integrate(self.spec, start, self.packed.hi,
                         rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                         kernel=self.kernel, packed=self.packed,
                         lam_eff=self.lam, mu=self.mu, v=self.v)


def shoot(spec: ProblemSpec, c, tol: float = 1e-10, *, kernel=None,
          lam_eff=None, mu: float = 0.0, v=None) -> tuple[Trajectory, np.ndarray]:
    """Integrate from the left end with values c and zero slope.

    Returns the trajectory and the residual vector (the right-end slopes).
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    ctx = _ShootContext(spec, kernel=kernel, lam_eff=lam_eff, mu=mu, v=v,
                        rel_tol=tol, abs_tol=tol)
    traj = ctx.trajectory(c)
    n = spec.n_equations
    return traj, traj.ys[-1][n:].copy()


def build_profile(spec: ProblemSpec, traj: Trajectory, c: np.ndarray, *,
                  lam_eff=None, mu: float = 0.0, v=None,
                  mesh_points: int = DEFAULT_MESH_POINTS,
                  method: str = "shooting", kernel=None,
                  packed: PackedProblem | None = None) -> SolutionProfile:
    """Sample a trajectory onto a uniform mesh and take the solve-time measurements.

    Second derivatives are the reaction term evaluated on the sampled values,
    so ``residual_sup`` (recomputed through the object-level model code)
    cross-checks the kernel arithmetic and later detects corrupted data.
    """
    n = spec.n_equations
    lam = np.asarray(spec.lams if lam_eff is None else lam_eff, dtype=float)
    vv = np.zeros(n) if v is None else np.asarray(v, dtype=float)
    lo, hi = spec.interval
    mesh = np.linspace(lo, hi, mesh_points)
    states = traj(mesh)
    values = states[:, :n]
    derivs = states[:, n:]

    kern = kernel if kernel is not None else backend.get_kernel()
    pk = packed if packed is not None else pack(spec)
    second = np.empty_like(values)
    res = 0.0
    for j, x in enumerate(mesh):
        dy = kern.rhs(pk, lam, mu, vv, float(x), states[j])
        second[j] = dy[n:]
        model_rhs = extended_rhs(spec, float(x), values[j], lam_eff=lam)
        res = max(res, float(np.max(np.abs(second[j] + model_rhs + mu * vv))))

    neumann = np.stack([np.abs(derivs[0]), np.abs(derivs[-1])], axis=1)
    return SolutionProfile(
        mesh=mesh, values=values, derivatives=derivs, second_derivatives=second,
        lambda_snapshot=lam, initial_value=np.asarray(c, dtype=float).copy(),
        residual_sup=res, neumann_residual=neumann,
        mu=mu, forcing=(vv if mu != 0.0 else None), method=method)


def _deflation_factor(c: np.ndarray, deflation_set) -> float:
    fac = 1.0
    for ck in deflation_set:
        d2 = float(np.sum((c - ck) ** 2))
        if d2 == 0.0:
            return np.inf
        fac *= 1.0 / d2 + 1.0
    return fac


def newton_shoot(spec: ProblemSpec, c0, tol: float = 1e-9, max_iter: int = 25,
                 deflation_set=(), *, kernel=None, lam_eff=None, mu: float = 0.0,
                 v=None, rel_tol: float = 1e-10, abs_tol: float = 1e-10,
                 mesh_points: int = DEFAULT_MESH_POINTS,
                 _ctx: _ShootContext | None = None) -> SolutionProfile:
    """Damped deflated Newton on the shooting residual.

    The correction solves the forward-difference Jacobian of the deflated
    residual; convergence is judged on the undeflated residual, and the known
    roots in ``deflation_set`` repel the iteration.  Raises SolveFailure with
    reason in {integrator_error, deflation_singular, singular_jacobian,
    line_search, divergence, max_iter, box_violation, residual_check}.
    """
    ctx = _ctx if _ctx is not None else _ShootContext(
        spec, kernel=kernel, lam_eff=lam_eff, mu=mu, v=v,
        rel_tol=rel_tol, abs_tol=abs_tol)
    n = spec.n_equations
    c = np.asarray(c0, dtype=float).reshape(-1).copy()
    if c.size != n:
        raise ValueError(f"initial value must have {n} components")
    deflation = [np.asarray(d, dtype=float) for d in deflation_set]

    def deflated(cv, rv):
        with np.errstate(invalid="ignore"):
            return rv * _deflation_factor(cv, deflation)

    r = ctx.residual(c)
    for it in range(max_iter + 1):
        if np.max(np.abs(r)) <= tol:
            if not np.all(np.isfinite(deflated(c, r))):
                raise SolveFailure("deflation_singular",
                                   "converged onto a deflated root", c=c)
            return _finish(ctx, c, mesh_points, tol)
        if it == max_iter:
            break
        g = deflated(c, r)
        if not np.all(np.isfinite(g)):
            raise SolveFailure("deflation_singular",
                               "deflated residual not finite", c=c)
        jac = np.empty((n, n))
        for j in range(n):
            cp = c.copy()
            cp[j] += FD_STEP
            jac[:, j] = (deflated(cp, ctx.residual(cp)) - g) / FD_STEP
        try:
            step = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            raise SolveFailure("singular_jacobian", "exact singular Jacobian", c=c)
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) > 1e3:
            cond = np.linalg.cond(jac)
            if not np.isfinite(cond) or cond > COND_LIMIT:
                raise SolveFailure("singular_jacobian",
                                   f"condition estimate {cond:.2e}", c=c)
        snorm = float(np.max(np.abs(step)))
        if snorm > STEP_CAP:
            step *= STEP_CAP / snorm
        merit = float(np.dot(g, g))
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            c_try = c + t * step
            r_try = ctx.residual(c_try)
            g_try = deflated(c_try, r_try)
            m_try = float(np.dot(g_try, g_try))
            if np.isfinite(m_try) and m_try <= (1.0 - ARMIJO * t) * merit:
                break
            t *= 0.5
        else:
            raise SolveFailure("line_search", "no decrease after 20 halvings", c=c)
        c, r = c_try, r_try
        if np.any(c < -1.0) or np.any(c > 2.0):
            raise SolveFailure("divergence", "iterate left [-1, 2]^N", c=c)
    raise SolveFailure("max_iter", f"no convergence in {max_iter} iterations", c=c)


def _finish(ctx: _ShootContext, c: np.ndarray, mesh_points: int,
            tol: float) -> SolutionProfile:
    traj = ctx.trajectory(c)
    prof = build_profile(ctx.spec, traj, c, lam_eff=ctx.lam, mu=ctx.mu,
                         v=ctx.v, mesh_points=mesh_points,
                         kernel=ctx.kernel, packed=ctx.packed)
    box = 10.0 * tol
    if prof.values.min() < -box or prof.values.max() > 1.0 + box:
        raise SolveFailure("box_violation",
                           f"values stray {prof.box_excess():.2e} outside [0,1]", c=c)
    if prof.residual_sup > 10.0 * tol:
        raise SolveFailure("residual_check",
                           f"recomputed residual {prof.residual_sup:.2e}", c=c)
    return prof


@dataclass
class MultistartResult:
    solutions: list[SolutionProfile]
    degenerate: bool
    n_starts: int
    failures: dict[str, int] = field(default_factory=dict)

    def initial_values(self) -> np.ndarray:
        return np.array([s.initial_value for s in self.solutions])


def _grid_starts(n: int, grid_per_axis: int) -> np.ndarray:
    axis = np.linspace(0.0, 1.0, grid_per_axis)
    return np.array(list(itertools.product(*([axis] * n))))


def _scan(spec, starts, tol, dedup_tol, max_iter, ctx, mesh_points,
          seed_deflation=()):
    found: list[SolutionProfile] = []
    deflation = [np.asarray(d, float) for d in seed_deflation]
    failures: dict[str, int] = {}
    for c0 in starts:
        try:
            prof = newton_shoot(spec, c0, tol=tol, max_iter=max_iter,
                                deflation_set=deflation, mesh_points=mesh_points,
                                _ctx=ctx)
        except SolveFailure as f:
            failures[f.reason] = failures.get(f.reason, 0) + 1
            if f.reason in ("box_violation", "residual_check") and f.c is not None:
                deflation.append(f.c)
            continue
        c = prof.initial_value
        if any(np.max(np.abs(c - s.initial_value)) <= dedup_tol for s in found):
            continue
        found.append(prof)
        deflation.append(c)
    return found, failures


def _cluster_axis_values(found: list[SolutionProfile], i: int, tol: float) -> list[float]:
    vals = sorted(float(s.initial_value[i]) for s in found)
    out: list[float] = []
    for val in vals:
        if not out or val - out[-1] > tol:
            out.append(val)
    return out


def _product_refine(spec, found, tol, dedup_tol, max_iter, ctx, mesh_points,
                    failures, max_rounds=3, max_combos=4096):
    """Seed Newton at recombinations of per-component initial values.

    Coupled systems pair every per-component pattern with every other one
    (the decoupled limit makes the solution set an exact Cartesian product),
    so combinations of already-found component values sit in or near the
    basins of the solutions the grid scan tends to miss once deflation has
    reshaped it.  Rounds repeat while new solutions keep arriving.
    """
    n = spec.n_equations
    for _ in range(max_rounds):
        axis_vals = [_cluster_axis_values(found, i, dedup_tol) for i in range(n)]
        combos = itertools.islice(itertools.product(*axis_vals), max_combos)
        new: list[SolutionProfile] = []
        for combo in combos:
            c0 = np.asarray(combo)
            if any(np.max(np.abs(c0 - s.initial_value)) <= dedup_tol for s in found):
                continue
            try:
                prof = newton_shoot(spec, c0, tol=tol, max_iter=max_iter,
                                    mesh_points=mesh_points, _ctx=ctx)
            except SolveFailure as f:
                failures[f.reason] = failures.get(f.reason, 0) + 1
                continue
            c = prof.initial_value
            if any(np.max(np.abs(c - s.initial_value)) <= dedup_tol
                   for s in found + new):
                continue
            new.append(prof)
        if not new:
            break
        found.extend(new)
    return found


def _scan_chunk(args):
    (spec, starts, tol, dedup_tol, max_iter, lam_eff, mu, v, rel_tol, abs_tol,
     mesh_points, kernel_name) = args
    ctx = _ShootContext(spec, kernel=backend.get_kernel(kernel_name),
                        lam_eff=lam_eff, mu=mu, v=v,
                        rel_tol=rel_tol, abs_tol=abs_tol)
    return _scan(spec, starts, tol, dedup_tol, max_iter, ctx, mesh_points)


def _weights_vanish(spec: ProblemSpec) -> bool:
    from .model import weight_envelopes

    for eq in spec.equations:
        alpha, beta = weight_envelopes(eq.weight, 3)
        if max(np.abs(alpha.values).max(), np.abs(beta.values).max()) > 1e-14:
            return False
    return True


def multistart(spec: ProblemSpec, grid_per_axis: int, tol: float = 1e-9,
               dedup_tol: float = 1e-5, *, max_iter: int = 25, kernel=None,
               lam_eff=None, mu: float = 0.0, v=None, rel_tol: float = 1e-10,
               abs_tol: float = 1e-10, mesh_points: int = DEFAULT_MESH_POINTS,
               jobs: int = 1, recombine: bool = True) -> MultistartResult:
    """Newton from every point of a uniform grid over the unit box.

    The deflation set grows as roots are found; output is deduplicated by the
    max-norm distance of initial values.  With ``recombine`` (default) a
    recombination pass reruns Newton from Cartesian combinations of the
    component values found so far, which recovers solutions whose basins the
    deflation reshaped.  With ``jobs > 1`` the grid is split into contiguous
    chunks scanned independently (each with its own deflation set) and merged
    deterministically.
    """
    if grid_per_axis < 2:
        raise ValueError("grid_per_axis must be >= 2")
    n = spec.n_equations
    starts = _grid_starts(n, grid_per_axis)

    if _weights_vanish(spec):
        # every constant solves the degenerate problem: report the corners only
        ctx = _ShootContext(spec, kernel=kernel, lam_eff=lam_eff, mu=mu, v=v,
                            rel_tol=rel_tol, abs_tol=abs_tol)
        corners = []
        for bits in itertools.product((0.0, 1.0), repeat=n):
            c = np.array(bits)
            corners.append(build_profile(spec, ctx.trajectory(c), c,
                                         lam_eff=ctx.lam, mu=mu, v=ctx.v,
                                         mesh_points=mesh_points,
                                         kernel=ctx.kernel, packed=ctx.packed))
        return MultistartResult(corners, True, len(starts))

    ctx = _ShootContext(spec, kernel=kernel, lam_eff=lam_eff, mu=mu, v=v,
                        rel_tol=rel_tol, abs_tol=abs_tol)
    if jobs <= 1:
        found, failures = _scan(spec, starts, tol, dedup_tol, max_iter, ctx,
                                mesh_points)
    else:
        chunks = np.array_split(starts, jobs)
        kernel_name = backend.backend_name(kernel)
        args = [(spec, ch, tol, dedup_tol, max_iter, lam_eff, mu, v,
                 rel_tol, abs_tol, mesh_points, kernel_name) for ch in chunks]
        found = []
        failures = {}
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for part, fails in ex.map(_scan_chunk, args):
                for reason, cnt in fails.items():
                    failures[reason] = failures.get(reason, 0) + cnt
                for prof in part:
                    c = prof.initial_value
                    if any(np.max(np.abs(c - s.initial_value)) <= dedup_tol
                           for s in found):
                        continue
                    found.append(prof)
    if recombine and found:
        found = _product_refine(spec, found, tol, dedup_tol, max_iter, ctx,
                                mesh_points, failures)
    return MultistartResult(found, False, len(starts), failures)
