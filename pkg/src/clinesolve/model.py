"""Coupled indefinite-weight Neumann problems on an interval.

A problem consists of N equations

    u_i'' + lam_i * w_i(x, u_other) * f_i(u_i) = 0,   u_i' = 0 at both ends,

where each coupling weight ``w_i`` is a finite sum of coupling polynomials
(in the other components) times piecewise-linear spatial profiles, and each
``f_i(s) = scale * s**a * (1-s)**b`` vanishes at 0 and 1.  The module also
provides the truncated right-hand side used by every solver (linear
extension outside the unit box, which makes the box attracting) and an
admissibility checker for the sign structure the multiplicity theory needs:
``w_i`` nonnegative and not identically zero on a patch ``I_i``, dominated
by an upper envelope with negative mean, and ``f_i`` superlinear at zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .profiles import SpatialProfile, combine_pointwise, union_nodes

__all__ = [
    "CouplingPolynomial",
    "WeightFunction",
    "Nonlinearity",
    "Equation",
    "ProblemSpec",
    "AdmissibilityReport",
    "EquationReport",
    "evaluate_weight",
    "weight_envelopes",
    "check_admissibility",
    "extended_rhs",
    "restrict_spec",
]

# "alpha not identically zero" is decided by this integral threshold
ALPHA_INTEGRAL_FLOOR = 1e-12


@dataclass(frozen=True)
class CouplingPolynomial:
    """Polynomial in the other components, sum of coefficient * monomial terms.

    ``exponents`` has one nonnegative integer column per other component
    (arity columns).  Arity zero (single equation) is allowed: the value is
    then the sum of the coefficients.
    """

    coefficients: np.ndarray
    exponents: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        e = np.asarray(self.exponents, dtype=np.int32)
        if e.ndim == 1:
            e = e.reshape(len(c), -1) if c.size else e.reshape(0, 0)
        if e.shape[0] != c.shape[0]:
            raise ValueError("one exponent row per coefficient required")
        if np.any(e < 0):
            raise ValueError("exponents must be nonnegative")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "exponents", e)

    @property
    def arity(self) -> int:
        return int(self.exponents.shape[1])

    def __call__(self, xi_hat) -> float:
        xi = np.asarray(xi_hat, dtype=float).reshape(-1)
        if xi.size != self.arity:
            raise ValueError(f"expected {self.arity} coupling arguments, got {xi.size}")
        total = 0.0
        for coef, exps in zip(self.coefficients, self.exponents):
            term = coef
            for v, e in zip(xi, exps):
                if e:
                    term *= v ** int(e)
            total += term
        return float(total)

    def evaluate_many(self, xi_hat: np.ndarray) -> np.ndarray:
        """Vectorized evaluation; ``xi_hat`` has shape (m, arity)."""
        xi = np.asarray(xi_hat, dtype=float)
        out = np.zeros(xi.shape[0])
        for coef, exps in zip(self.coefficients, self.exponents):
            term = np.full(xi.shape[0], coef)
            for k, e in enumerate(exps):
                if e:
                    term = term * xi[:, k] ** int(e)
            out += term
        return out

    def partial_many(self, xi_hat: np.ndarray, k: int) -> np.ndarray:
        """Vectorized partial derivative with respect to coupling argument k."""
        xi = np.asarray(xi_hat, dtype=float)
        out = np.zeros(xi.shape[0])
        for coef, exps in zip(self.coefficients, self.exponents):
            e_k = int(exps[k])
            if e_k == 0:
                continue
            term = np.full(xi.shape[0], coef * e_k)
            for m, e in enumerate(exps):
                p = int(e) - (1 if m == k else 0)
                if p:
                    term = term * xi[:, m] ** p
            out += term
        return out

    def max_degree(self) -> int:
        return int(self.exponents.max()) if self.exponents.size else 0


def constant_coupling(arity: int, value: float = 1.0) -> CouplingPolynomial:
    """Degree-zero coupling polynomial (weight independent of the other components)."""
    return CouplingPolynomial(np.array([value]), np.zeros((1, arity), dtype=np.int32))


@dataclass(frozen=True)
class WeightFunction:
    """Separable weight w(x, xi_hat) = sum_j c_j(xi_hat) * a_j(x)."""

    terms: tuple[tuple[CouplingPolynomial, SpatialProfile], ...]

    def __post_init__(self):
        terms = tuple((c, p) for c, p in self.terms)
        if not terms:
            raise ValueError("weight needs at least one term")
        arity = terms[0][0].arity
        interval = terms[0][1].interval
        for c, p in terms:
            if c.arity != arity:
                raise ValueError("all coupling polynomials must share the arity")
            if p.interval != interval:
                raise ValueError("all spatial profiles must share the interval")
        object.__setattr__(self, "terms", terms)

    @property
    def arity(self) -> int:
        return self.terms[0][0].arity

    @property
    def interval(self) -> tuple[float, float]:
        return self.terms[0][1].interval

    def __call__(self, x: float, xi_hat) -> float:
        return evaluate_weight(self, x, xi_hat)

    def spatial_values(self, xs: np.ndarray) -> list[np.ndarray]:
        """Per-term spatial factors sampled at the given positions."""
        return [p(np.asarray(xs, dtype=float)) for _, p in self.terms]


def evaluate_weight(w: WeightFunction, x: float, xi_hat) -> float:
    """Evaluate w(x, xi_hat); x must lie in the interval, xi_hat in [0,1]^arity."""
    xi = np.asarray(xi_hat, dtype=float).reshape(-1)
    if xi.size != w.arity:
        raise ValueError(f"expected {w.arity} coupling arguments, got {xi.size}")
    if np.any(xi < 0.0) or np.any(xi > 1.0):
        raise ValueError("coupling arguments must lie in [0, 1]")
    total = 0.0
    for c, p in w.terms:
        total += c(xi) * p(x)
    return float(total)


@dataclass(frozen=True)
class Nonlinearity:
    """f(s) = scale * s**a * (1-s)**b on [0, 1], with f(0) = f(1) = 0.

    ``a >= 2`` gives the superlinear-at-zero regime (f'(0) = 0) in which the
    multiplicity results hold; smaller ``a`` is representable but flagged by
    the admissibility checker.
    """

    scale: float
    a: float
    b: float

    def __post_init__(self):
        if not (self.scale > 0):
            raise ValueError("scale must be positive")
        if self.a < 1 or self.b < 1:
            raise ValueError("exponents must be >= 1 so that f is C^1 on [0,1]")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = self.scale * s ** self.a * (1.0 - s) ** self.b
        return float(out) if out.ndim == 0 else out

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        a, b = self.a, self.b
        out = self.scale * (a * s ** (a - 1) * (1 - s) ** b
                            - b * s ** a * (1 - s) ** (b - 1))
        return float(out) if out.ndim == 0 else out

    def max_value(self) -> float:
        """Maximum of f over [0, 1] (attained at s = a/(a+b))."""
        s = self.a / (self.a + self.b)
        return float(self(s))

    def min_on(self, lo: float, hi: float) -> float:
        """Minimum of f over [lo, hi] in [0, 1]; f is unimodal so endpoints decide."""
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError("interval must sit inside [0, 1]")
        return min(float(self(lo)), float(self(hi)))


@dataclass(frozen=True)
class Equation:
    weight: WeightFunction
    nonlinearity: Nonlinearity
    lam: float
    positivity_interval: tuple[float, float]

    def __post_init__(self):
        if not (self.lam > 0):
            raise ValueError("lam must be positive")
        sigma, tau = self.positivity_interval
        lo, hi = self.weight.interval
        if not (lo <= sigma < tau <= hi):
            raise ValueError("positivity interval must sit inside the habitat")
        object.__setattr__(self, "positivity_interval", (float(sigma), float(tau)))


@dataclass(frozen=True)
class ProblemSpec:
    """Full description of an N-equation Neumann system."""

    interval: tuple[float, float]
    equations: tuple[Equation, ...]

    def __post_init__(self):
        lo, hi = float(self.interval[0]), float(self.interval[1])
        if not lo < hi:
            raise ValueError("empty habitat interval")
        eqs = tuple(self.equations)
        if not eqs:
            raise ValueError("at least one equation required")
        n = len(eqs)
        for eq in eqs:
            if eq.weight.interval != (lo, hi):
                raise ValueError("equation weight interval differs from the habitat")
            if eq.weight.arity != n - 1:
                raise ValueError(f"weight arity must be {n - 1} for {n} equations")
        object.__setattr__(self, "interval", (lo, hi))
        object.__setattr__(self, "equations", eqs)

    @property
    def n_equations(self) -> int:
        return len(self.equations)

    @property
    def lams(self) -> np.ndarray:
        return np.array([eq.lam for eq in self.equations])

    def breakpoints(self) -> np.ndarray:
        """Union of all spatial profile nodes (positions where the rhs can kink)."""
        profs = [p for eq in self.equations for _, p in eq.weight.terms]
        return union_nodes(profs)


# ---------------------------------------------------------------------------
# envelopes and admissibility


def _coupling_samples(arity: int, resolution: int) -> np.ndarray:
    """Tensor grid over [0,1]^arity with `resolution` points per axis.

    The grid includes all corners of the cube (linspace endpoints), which
    makes the envelopes exact for couplings monotone in each variable.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if arity == 0:
        return np.zeros((1, 0))
    axes = [np.linspace(0.0, 1.0, resolution)] * arity
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def weight_envelopes(w: WeightFunction, resolution: int = 9) -> tuple[SpatialProfile, SpatialProfile]:
    """Lower/upper envelopes of w over the coupling box, as spatial profiles.

    At every spatial node the weight is minimized/maximized over a tensor
    sample of the coupling box (corners always included); the envelope node
    set is refined where the minimizing sample switches, so the returned
    profiles bound the sampled family pointwise everywhere, not just at the
    original nodes.  Exact when every term is monotone in each coupling
    variable; otherwise a sampling approximation controlled by
    ``resolution``.
    """
    samples = _coupling_samples(w.arity, resolution)
    coeffs = np.stack([c.evaluate_many(samples) for c, _ in w.terms], axis=1)  # (S, T)
    nodes = union_nodes([p for _, p in w.terms])
    spatial = np.stack([p(nodes) for _, p in w.terms], axis=1)  # (K, T)
    vals = coeffs @ spatial.T  # (S, K)
    family = [SpatialProfile(nodes, row) for row in vals]
    return (combine_pointwise(family, np.minimum),
            combine_pointwise(family, np.maximum))


@dataclass(frozen=True)
class EquationReport:
    alpha: SpatialProfile
    beta: SpatialProfile
    integral_beta: float
    integral_alpha_on_patch: float
    alpha_nonneg_on_patch: bool
    alpha_nonzero_on_patch: bool
    beta_mean_negative: bool
    f_superlinear: bool

    @property
    def ok(self) -> bool:
        return (self.alpha_nonneg_on_patch and self.alpha_nonzero_on_patch
                and self.beta_mean_negative and self.f_superlinear)


@dataclass(frozen=True)
class AdmissibilityReport:
    equations: tuple[EquationReport, ...]

    @property
    def admissible(self) -> bool:
        return all(r.ok for r in self.equations)

    def violations(self) -> list[str]:
        out = []
        for i, r in enumerate(self.equations):
            if not r.alpha_nonneg_on_patch:
                out.append(f"equation {i}: lower envelope negative on the positivity interval")
            if not r.alpha_nonzero_on_patch:
                out.append(f"equation {i}: lower envelope vanishes on the positivity interval "
                           f"(integral {r.integral_alpha_on_patch:.3e})")
            if not r.beta_mean_negative:
                out.append(f"equation {i}: upper envelope has nonnegative mean "
                           f"(integral {r.integral_beta:.6g})")
            if not r.f_superlinear:
                out.append(f"equation {i}: nonlinearity is not superlinear at zero (a < 2)")
        return out


def check_admissibility(spec: ProblemSpec, resolution: int = 9) -> AdmissibilityReport:
    """Check the sign structure required for multiplicity, equation by equation.

    Violations are reported, never raised.
    """
    reports = []
    for eq in spec.equations:
        alpha, beta = weight_envelopes(eq.weight, resolution)
        sigma, tau = eq.positivity_interval
        amin, _ = alpha.min_max(sigma, tau)
        scale = max(1.0, float(np.abs(alpha.values).max()))
        int_alpha = alpha.integral(sigma, tau)
        int_beta = beta.integral()
        reports.append(EquationReport(
            alpha=alpha,
            beta=beta,
            integral_beta=int_beta,
            integral_alpha_on_patch=int_alpha,
            alpha_nonneg_on_patch=bool(amin >= -1e-12 * scale),
            alpha_nonzero_on_patch=bool(int_alpha > ALPHA_INTEGRAL_FLOOR),
            beta_mean_negative=bool(int_beta < 0.0),
            f_superlinear=bool(eq.nonlinearity.a >= 2.0),
        ))
    return AdmissibilityReport(tuple(reports))


# ---------------------------------------------------------------------------
# truncated right-hand side


def extended_rhs(spec: ProblemSpec, x: float, xi, lam_eff=None) -> np.ndarray:
    """Reaction term of the box-truncated system at position x and state xi.

    Component i equals ``-xi_i`` below the box, ``lam_i w_i(x, .) f_i(xi_i)``
    inside, and ``1 - xi_i`` above.  Coupling arguments are always clamped
    into [0, 1] componentwise, so the weight is only ever evaluated where it
    is defined.  ``lam_eff`` overrides the spec intensities (used by the
    continuation drivers).
    """
    lo, hi = spec.interval
    if not (lo <= x <= hi):
        raise ValueError("position outside the habitat interval")
    xi = np.asarray(xi, dtype=float).reshape(-1)
    n = spec.n_equations
    if xi.size != n:
        raise ValueError(f"state must have {n} components")
    lam = spec.lams if lam_eff is None else np.asarray(lam_eff, dtype=float)
    clamped = np.clip(xi, 0.0, 1.0)
    out = np.empty(n)
    for i, eq in enumerate(spec.equations):
        s = xi[i]
        if s <= 0.0:
            out[i] = -s
        elif s >= 1.0:
            out[i] = 1.0 - s
        else:
            others = np.delete(clamped, i)
            out[i] = lam[i] * evaluate_weight(eq.weight, x, others) * eq.nonlinearity(s)
    return out
