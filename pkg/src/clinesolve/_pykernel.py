"""Pure-Python shooting kernel: truncated-system RHS plus an embedded 4(5)
Runge-Kutta integrator with breakpoint-aware adaptive steps and dense output.

This module is the fallback twin of the compiled extension ``_kernel``; both
implement the same arithmetic in the same order, so their results agree to
rounding.  Keep any change here mirrored in ``_kernel.pyx``.
"""

from __future__ import annotations

import math

import numpy as np

COMPILED = False

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_NONFINITE = 2
STATUS_MAXSTEPS = 3

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5, C6 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
# dense-output weights
D1 = -12715105075.0 / 11282082432.0
D3 = 87487479700.0 / 32700410799.0
D4 = -10690763975.0 / 1880347072.0
D5 = 701980252875.0 / 199316789632.0
D6 = -1453857185.0 / 822651844.0
D7 = 69997945.0 / 29380423.0

FAC_MIN = 0.2
FAC_MAX = 5.0
SAFETY = 0.9


def _pow_i(base: float, e: int) -> float:
    out = 1.0
    for _ in range(e):
        out *= base
    return out


def _f_eval(scale: float, a: float, b: float, ai: int, bi: int, s: float) -> float:
    if ai >= 0:
        fa = _pow_i(s, ai)
    else:
        fa = s ** a
    if bi >= 0:
        fb = _pow_i(1.0 - s, bi)
    else:
        fb = (1.0 - s) ** b
    return scale * fa * fb


def _profile_interp(xs, vs, lo: int, hi: int, x: float) -> float:
    # binary search for the piece containing x within [lo, hi)
    a, b = lo, hi - 1
    while b - a > 1:
        mid = (a + b) // 2
        if xs[mid] <= x:
            a = mid
        else:
            b = mid
    x0, x1 = xs[a], xs[a + 1]
    t = (x - x0) / (x1 - x0)
    return vs[a] + t * (vs[a + 1] - vs[a])


def rhs(pk, lam_eff, mu: float, v, x: float, y, out=None):
    """Truncated-system right-hand side in first-order form.

    ``y`` has 2N components (values then derivatives); writes the derivative
    of ``y`` into ``out`` (allocated when omitted) and returns it.
    """
    n = pk.n
    if out is None:
        out = [0.0] * (2 * n)
    cl = [0.0] * n
    for i in range(n):
        s = y[i]
        cl[i] = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
    ets = pk.eq_term_start
    tps = pk.term_poly_start
    tprs = pk.term_prof_start
    pc, pe = pk.poly_coef, pk.poly_exp
    px, pv = pk.prof_x, pk.prof_v
    arity = n - 1
    for i in range(n):
        s = y[i]
        if s <= 0.0:
            h = -s
        elif s >= 1.0:
            h = 1.0 - s
        else:
            w = 0.0
            for t in range(ets[i], ets[i + 1]):
                c = 0.0
                for k in range(tps[t], tps[t + 1]):
                    term = pc[k]
                    for m in range(arity):
                        e = pe[k, m]
                        if e:
                            idx = m if m < i else m + 1
                            term *= _pow_i(cl[idx], e)
                    c += term
                if c != 0.0:
                    w += c * _profile_interp(px, pv, tprs[t], tprs[t + 1], x)
            h = lam_eff[i] * w * _f_eval(pk.f_scale[i], pk.f_a[i], pk.f_b[i],
                                         pk.f_a_int[i], pk.f_b_int[i], s)
        out[i] = y[n + i]
        out[n + i] = -(h + mu * v[i])
    return out


def _initial_step(fun, x0, y0, f0, span, rtol, atol, m):
    d0 = 0.0
    d1 = 0.0
    sc = [0.0] * m
    for i in range(m):
        sc[i] = atol + rtol * abs(y0[i])
        d0 += (y0[i] / sc[i]) ** 2
        d1 += (f0[i] / sc[i]) ** 2
    d0 = math.sqrt(d0 / m)
    d1 = math.sqrt(d1 / m)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * (d0 / d1)
    if h0 > span:
        h0 = span
    y1 = [y0[i] + h0 * f0[i] for i in range(m)]
    f1 = fun(x0 + h0, y1)
    d2 = 0.0
    for i in range(m):
        d2 += ((f1[i] - f0[i]) / sc[i]) ** 2
    d2 = math.sqrt(d2 / m) / h0
    dm = max(d1, d2)
    if dm <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / dm) ** 0.2
    h = min(100.0 * h0, h1)
    if h > span:
        h = span
    return h


def _drive(fun, x0, y0, x1, rtol, atol, bps, max_steps, want_dense):
    """Adaptive DP45 march from x0 to x1; steps never straddle a breakpoint.

    Returns (status, xs, ys, cont, x_err) where xs/ys hold the accepted-step
    states (always including the start) and cont the per-step dense
    coefficients, shape (steps, 5, m); cont is None unless want_dense.
    """
    m = len(y0)
    y = [float(c) for c in y0]
    x = float(x0)
    xs = [x]
    ys = [list(y)]
    cont = [] if want_dense else None
    if x >= x1:
        return (STATUS_OK, np.asarray(xs), np.asarray(ys),
                np.zeros((0, 5, m)) if want_dense else None, x)

    nbp = len(bps)
    ib = 0
    while ib < nbp and bps[ib] <= x:
        ib += 1

    k1 = fun(x, y)
    first_target = x1 if (ib >= nbp or bps[ib] >= x1) else bps[ib]
    h = _initial_step(fun, x, y, k1, first_target - x, rtol, atol, m)

    y2 = [0.0] * m
    ynew = [0.0] * m
    status = STATUS_OK
    x_err = x
    nsteps = 0
    rejected = False
    while x < x1:
        nsteps += 1
        if nsteps > max_steps:
            status = STATUS_MAXSTEPS
            x_err = x
            break
        target = x1
        if ib < nbp and bps[ib] < target:
            target = bps[ib]
        hmin = 16.0 * 2.220446049250313e-16 * max(abs(x), 1.0)
        clamped = x + h >= target
        h_use = target - x if clamped else h
        if h_use < hmin and not clamped:
            status = STATUS_UNDERFLOW
            x_err = x
            break

        for i in range(m):
            y2[i] = y[i] + h_use * (A21 * k1[i])
        k2 = fun(x + C2 * h_use, y2)
        for i in range(m):
            y2[i] = y[i] + h_use * (A31 * k1[i] + A32 * k2[i])
        k3 = fun(x + C3 * h_use, y2)
        for i in range(m):
            y2[i] = y[i] + h_use * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        k4 = fun(x + C4 * h_use, y2)
        for i in range(m):
            y2[i] = y[i] + h_use * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        k5 = fun(x + C5 * h_use, y2)
        for i in range(m):
            y2[i] = y[i] + h_use * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                    + A64 * k4[i] + A65 * k5[i])
        k6 = fun(x + h_use, y2)
        for i in range(m):
            ynew[i] = y[i] + h_use * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i]
                                      + B5 * k5[i] + B6 * k6[i])
        k7 = fun(x + h_use, ynew)

        err = 0.0
        finite = True
        for i in range(m):
            e = h_use * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i]
                         + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            ay = abs(y[i])
            an = abs(ynew[i])
            sc = atol + rtol * (ay if ay > an else an)
            q = e / sc
            err += q * q
            if not math.isfinite(ynew[i]):
                finite = False
        err = math.sqrt(err / m)

        if not finite or not math.isfinite(err):
            if h_use <= hmin:
                status = STATUS_NONFINITE
                x_err = x
                break
            h = 0.25 * h_use
            rejected = True
            continue

        if err <= 1.0:
            if want_dense:
                row = np.empty((5, m))
                for i in range(m):
                    ydiff = ynew[i] - y[i]
                    bspl = h_use * k1[i] - ydiff
                    row[0, i] = y[i]
                    row[1, i] = ydiff
                    row[2, i] = bspl
                    row[3, i] = ydiff - h_use * k7[i] - bspl
                    row[4, i] = h_use * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i]
                                         + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                cont.append(row)
            x = target if clamped else x + h_use
            if ib < nbp and clamped and target == bps[ib]:
                ib += 1
            y, ynew = ynew, y
            k1 = k7
            xs.append(x)
            ys.append(list(y))
            if err == 0.0:
                fac = FAC_MAX
            else:
                fac = SAFETY * err ** -0.2
                if fac > FAC_MAX:
                    fac = FAC_MAX
                elif fac < FAC_MIN:
                    fac = FAC_MIN
            if rejected and fac > 1.0:
                fac = 1.0
            h = h_use * fac
            rejected = False
        else:
            fac = SAFETY * err ** -0.2
            if fac < FAC_MIN:
                fac = FAC_MIN
            h = h_use * fac
            rejected = True
            if h_use <= hmin:
                status = STATUS_UNDERFLOW
                x_err = x
                break

    xs_arr = np.asarray(xs)
    ys_arr = np.asarray(ys)
    cont_arr = (np.stack(cont) if (want_dense and cont) else
                (np.zeros((0, 5, m)) if want_dense else None))
    return status, xs_arr, ys_arr, cont_arr, x_err


def _packed_fun(pk, lam_eff, mu, v):
    lam_eff = [float(c) for c in lam_eff]
    v = [float(c) for c in v]

    def fun(x, y):
        return rhs(pk, lam_eff, mu, v, x, y)

    return fun


def integrate_dense(pk, lam_eff, mu, v, x0, y0, x1, rtol, atol, max_steps=1000000):
    """Integrate the packed problem with dense output."""
    fun = _packed_fun(pk, lam_eff, mu, v)
    return _drive(fun, x0, y0, x1, rtol, atol, pk.breakpoints, max_steps, True)


def shoot_terminal(pk, lam_eff, mu, v, y0, rtol, atol, max_steps=1000000):
    """Integrate from the left habitat end to the right one; return the end state."""
    fun = _packed_fun(pk, lam_eff, mu, v)
    status, _, ys, _, x_err = _drive(fun, pk.lo, y0, pk.hi, rtol, atol,
                                     pk.breakpoints, max_steps, False)
    return status, np.asarray(ys[-1]), x_err


def integrate_callable(fun, x0, y0, x1, rtol, atol, breakpoints=(), max_steps=1000000):
    """Generic-RHS integration used for validating the stepper against closed forms."""

    def wrapped(x, y):
        return [float(c) for c in fun(x, np.asarray(y))]

    bps = np.asarray(breakpoints, dtype=float)
    return _drive(wrapped, x0, y0, x1, rtol, atol, bps, max_steps, True)


def dense_eval(xs: np.ndarray, cont: np.ndarray, xq) -> np.ndarray:
    """Evaluate the dense output at query positions inside [xs[0], xs[-1]].

    Vectorized; exact at accepted-step endpoints.
    """
    xq_arr = np.atleast_1d(np.asarray(xq, dtype=float))
    if xq_arr.size and (xq_arr.min() < xs[0] - 1e-12 or xq_arr.max() > xs[-1] + 1e-12):
        raise ValueError("query outside the integrated span")
    if len(xs) == 1:
        return np.repeat(cont[:0].reshape(0, -1), xq_arr.size, axis=0)
    idx = np.clip(np.searchsorted(xs, xq_arr, side="right") - 1, 0, len(xs) - 2)
    h = xs[idx + 1] - xs[idx]
    th = (xq_arr - xs[idx]) / h
    th1 = 1.0 - th
    c = cont[idx]  # (q, 5, m)
    th_b = th[:, None]
    th1_b = th1[:, None]
    out = c[:, 0] + th_b * (c[:, 1] + th1_b * (c[:, 2] + th_b * (c[:, 3] + th1_b * c[:, 4])))
    return out
