"""Flat-array problem representation shared by the compiled and Python kernels."""

from __future__ import annotations

import numpy as np

from .model import ProblemSpec

__all__ = ["PackedProblem", "pack"]


class PackedProblem:
    """ProblemSpec flattened into contiguous arrays.

    Layout (N equations, T weight terms total, P polynomial terms, K profile
    nodes):

    * ``eq_term_start``   (N+1,)  weight-term slice per equation
    * ``term_poly_start`` (T+1,)  polynomial-term slice per weight term
    * ``poly_coef``       (P,)    monomial coefficients
    * ``poly_exp``        (P, max(N-1, 1)) int32 exponents per other component
    * ``term_prof_start`` (T+1,)  profile-node slice per weight term
    * ``prof_x, prof_v``  (K,)    profile nodes / values
    * ``breakpoints``     sorted union of profile nodes incl. the interval ends
    """

    __slots__ = (
        "n", "lo", "hi", "lam", "f_scale", "f_a", "f_b", "f_a_int", "f_b_int",
        "eq_term_start", "term_poly_start", "poly_coef", "poly_exp",
        "term_prof_start", "prof_x", "prof_v", "breakpoints",
    )

    def __init__(self, **kw):
        for k in self.__slots__:
            setattr(self, k, kw[k])


def _as_int_or_minus1(x: float) -> int:
    xi = int(round(x))
    return xi if (xi == x and 0 <= xi <= 8) else -1


def pack(spec: ProblemSpec) -> PackedProblem:
    n = spec.n_equations
    arity = max(n - 1, 1)  # keep a 2-d exponent array even for N = 1

    eq_term_start = [0]
    term_poly_start = [0]
    term_prof_start = [0]
    poly_coef, poly_exp = [], []
    prof_x, prof_v = [], []

    for eq in spec.equations:
        for c, p in eq.weight.terms:
            for coef, exps in zip(c.coefficients, c.exponents):
                poly_coef.append(float(coef))
                row = np.zeros(arity, dtype=np.int32)
                row[: c.arity] = exps
                poly_exp.append(row)
            term_poly_start.append(len(poly_coef))
            prof_x.extend(p.nodes.tolist())
            prof_v.extend(p.values.tolist())
            term_prof_start.append(len(prof_x))
        eq_term_start.append(len(term_poly_start) - 1)

    bps = np.unique(np.concatenate([np.asarray(prof_x),
                                    np.asarray(spec.interval, dtype=float)]))
    lo, hi = spec.interval
    bps = bps[(bps >= lo) & (bps <= hi)]

    f_a = np.array([eq.nonlinearity.a for eq in spec.equations])
    f_b = np.array([eq.nonlinearity.b for eq in spec.equations])
    return PackedProblem(
        n=n,
        lo=float(lo),
        hi=float(hi),
        lam=np.ascontiguousarray(spec.lams),
        f_scale=np.array([eq.nonlinearity.scale for eq in spec.equations]),
        f_a=f_a,
        f_b=f_b,
        f_a_int=np.array([_as_int_or_minus1(a) for a in f_a], dtype=np.int32),
        f_b_int=np.array([_as_int_or_minus1(b) for b in f_b], dtype=np.int32),
        eq_term_start=np.asarray(eq_term_start, dtype=np.int32),
        term_poly_start=np.asarray(term_poly_start, dtype=np.int32),
        poly_coef=np.asarray(poly_coef, dtype=float),
        poly_exp=np.ascontiguousarray(np.vstack(poly_exp).astype(np.int32)),
        term_prof_start=np.asarray(term_prof_start, dtype=np.int32),
        prof_x=np.asarray(prof_x, dtype=float),
        prof_v=np.asarray(prof_v, dtype=float),
        breakpoints=np.ascontiguousarray(bps),
    )
