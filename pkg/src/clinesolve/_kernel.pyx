# cython: language_level=3
"""Compiled shooting kernel: truncated-system RHS plus an embedded 4(5)
Runge-Kutta integrator with breakpoint-aware adaptive steps and dense output.

Twin of ``_pykernel``; the arithmetic is kept in the same order so results
agree with the pure-Python path to rounding.  Keep both in sync.
"""

from libc.math cimport fabs, sqrt, pow, isfinite

import numpy as np

COMPILED = True

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_NONFINITE = 2
STATUS_MAXSTEPS = 3

cdef double C2 = 1.0 / 5.0
cdef double C3 = 3.0 / 10.0
cdef double C4 = 4.0 / 5.0
cdef double C5 = 8.0 / 9.0
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0
cdef double D1 = -12715105075.0 / 11282082432.0
cdef double D3 = 87487479700.0 / 32700410799.0
cdef double D4 = -10690763975.0 / 1880347072.0
cdef double D5 = 701980252875.0 / 199316789632.0
cdef double D6 = -1453857185.0 / 822651844.0
cdef double D7 = 69997945.0 / 29380423.0

cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 5.0
cdef double SAFETY = 0.9
cdef double EPS16 = 16.0 * 2.220446049250313e-16


cdef inline double _pow_i(double base, int e):
    cdef double out = 1.0
    cdef int k
    for k in range(e):
        out *= base
    return out


cdef inline double _f_eval(double scale, double a, double b, int ai, int bi, double s):
    cdef double fa, fb
    if ai >= 0:
        fa = _pow_i(s, ai)
    else:
        fa = pow(s, a)
    if bi >= 0:
        fb = _pow_i(1.0 - s, bi)
    else:
        fb = pow(1.0 - s, b)
    return scale * fa * fb


cdef inline double _profile_interp(const double[::1] xs, const double[::1] vs,
                                   int lo, int hi, double x):
    cdef int a = lo, b = hi - 1, mid
    cdef double x0, x1, t
    while b - a > 1:
        mid = (a + b) // 2
        if xs[mid] <= x:
            a = mid
        else:
            b = mid
    x0 = xs[a]
    x1 = xs[a + 1]
    t = (x - x0) / (x1 - x0)
    return vs[a] + t * (vs[a + 1] - vs[a])


cdef inline void _rhs_c(int n,
                        const double[::1] lam_eff, double mu, const double[::1] v,
                        const double[::1] f_scale, const double[::1] f_a,
                        const double[::1] f_b, const int[::1] f_a_int,
                        const int[::1] f_b_int,
                        const int[::1] ets, const int[::1] tps, const int[::1] tprs,
                        const double[::1] pc, const int[:, ::1] pe,
                        const double[::1] px, const double[::1] pv,
                        double x, const double* y, double* cl, double* out):
    cdef int i, t, k, m, e, idx, arity
    cdef double s, h, w, c, term
    arity = n - 1
    for i in range(n):
        s = y[i]
        cl[i] = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
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
            h = lam_eff[i] * w * _f_eval(f_scale[i], f_a[i], f_b[i],
                                         f_a_int[i], f_b_int[i], s)
        out[i] = y[n + i]
        out[n + i] = -(h + mu * v[i])


def rhs(pk, lam_eff, double mu, v, double x, y, out=None):
    """Truncated-system right-hand side in first-order form (python signature
    mirrors the fallback kernel)."""
    cdef int n = pk.n
    cdef int m2 = 2 * n
    lam_arr = np.ascontiguousarray(lam_eff, dtype=np.float64)
    v_arr = np.ascontiguousarray(v, dtype=np.float64)
    y_arr = np.ascontiguousarray(y, dtype=np.float64)
    out_arr = np.empty(m2)
    cl_arr = np.empty(n)
    cdef double[::1] yv = y_arr
    cdef double[::1] ov = out_arr
    cdef double[::1] clv = cl_arr
    _rhs_c(n, lam_arr, mu, v_arr,
           pk.f_scale, pk.f_a, pk.f_b, pk.f_a_int, pk.f_b_int,
           pk.eq_term_start, pk.term_poly_start, pk.term_prof_start,
           pk.poly_coef, pk.poly_exp, pk.prof_x, pk.prof_v,
           x, &yv[0], &clv[0], &ov[0])
    if out is not None:
        for i in range(m2):
            out[i] = out_arr[i]
        return out
    return out_arr.tolist()


cdef _drive_c(pk, const double[::1] lam_eff, double mu, const double[::1] v,
              double x0, const double[::1] y0, double x1,
              double rtol, double atol, long max_steps, bint want_dense):
    cdef int n = pk.n
    cdef int m = 2 * n
    cdef const double[::1] f_scale = pk.f_scale
    cdef const double[::1] f_a = pk.f_a
    cdef const double[::1] f_b = pk.f_b
    cdef const int[::1] f_a_int = pk.f_a_int
    cdef const int[::1] f_b_int = pk.f_b_int
    cdef const int[::1] ets = pk.eq_term_start
    cdef const int[::1] tps = pk.term_poly_start
    cdef const int[::1] tprs = pk.term_prof_start
    cdef const double[::1] pc = pk.poly_coef
    cdef const int[:, ::1] pe = pk.poly_exp
    cdef const double[::1] px = pk.prof_x
    cdef const double[::1] pv = pk.prof_v
    cdef const double[::1] bps = pk.breakpoints

    scratch = np.empty((11, m))
    cdef double[:, ::1] sv = scratch
    cdef double* y = &sv[0, 0]
    cdef double* y2 = &sv[1, 0]
    cdef double* ynew = &sv[2, 0]
    cdef double* k1 = &sv[3, 0]
    cdef double* k2 = &sv[4, 0]
    cdef double* k3 = &sv[5, 0]
    cdef double* k4 = &sv[6, 0]
    cdef double* k5 = &sv[7, 0]
    cdef double* k6 = &sv[8, 0]
    cdef double* k7 = &sv[9, 0]
    cdef double* cl = &sv[10, 0]
    cdef double* tmp

    cdef int i
    cdef double x = x0
    for i in range(m):
        y[i] = y0[i]

    # growable output buffers
    cdef long cap = 512
    xs_buf = np.empty(cap)
    ys_buf = np.empty((cap, m))
    cont_buf = np.empty((cap, 5, m)) if want_dense else None
    cdef double[::1] xs_v = xs_buf
    cdef double[:, ::1] ys_v = ys_buf
    cdef double[:, :, ::1] cont_v = cont_buf if want_dense else np.empty((1, 5, m))
    cdef long nacc = 0
    xs_v[0] = x
    for i in range(m):
        ys_v[0, i] = y[i]
    nacc = 1

    if x >= x1:
        if want_dense:
            return (STATUS_OK, xs_buf[:1].copy(), ys_buf[:1].copy(),
                    np.zeros((0, 5, m)), x)
        return (STATUS_OK, xs_buf[:1].copy(), ys_buf[:1].copy(), None, x)

    cdef long nbp = bps.shape[0]
    cdef long ib = 0
    while ib < nbp and bps[ib] <= x:
        ib += 1

    _rhs_c(n, lam_eff, mu, v, f_scale, f_a, f_b, f_a_int, f_b_int,
           ets, tps, tprs, pc, pe, px, pv, x, y, cl, k1)

    # initial step size (same formula as the fallback kernel)
    cdef double first_target = x1
    if ib < nbp and bps[ib] < x1:
        first_target = bps[ib]
    cdef double span = first_target - x
    cdef double d0 = 0.0, d1 = 0.0, d2 = 0.0, sci, h0, h1, dm, h
    for i in range(m):
        sci = atol + rtol * fabs(y[i])
        d0 += (y[i] / sci) * (y[i] / sci)
        d1 += (k1[i] / sci) * (k1[i] / sci)
    d0 = sqrt(d0 / m)
    d1 = sqrt(d1 / m)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * (d0 / d1)
    if h0 > span:
        h0 = span
    for i in range(m):
        y2[i] = y[i] + h0 * k1[i]
    _rhs_c(n, lam_eff, mu, v, f_scale, f_a, f_b, f_a_int, f_b_int,
           ets, tps, tprs, pc, pe, px, pv, x + h0, y2, cl, k2)
    for i in range(m):
        sci = atol + rtol * fabs(y[i])
        d2 += ((k2[i] - k1[i]) / sci) * ((k2[i] - k1[i]) / sci)
    d2 = sqrt(d2 / m) / h0
    dm = d1 if d1 > d2 else d2
    if dm <= 1e-15:
        h1 = 1e-6 if 1e-6 > h0 * 1e-3 else h0 * 1e-3
    else:
        h1 = pow(0.01 / dm, 0.2)
    h = 100.0 * h0
    if h1 < h:
        h = h1
    if h > span:
        h = span

    cdef int status = STATUS_OK
    cdef double x_err = x
    cdef long nsteps = 0
    cdef bint rejected = False
    cdef bint clamped, finite
    cdef double target, hmin, h_use, err, e, ay, an, sc, q, fac
    cdef double ydiff, bspl

    while x < x1:
        nsteps += 1
        if nsteps > max_steps:
            status = STATUS_MAXSTEPS
            x_err = x
            break
        target = x1
        if ib < nbp and bps[ib] < target:
            target = bps[ib]
        hmin = EPS16 * (fabs(x) if fabs(x) > 1.0 else 1.0)
        clamped = x + h >= target
        h_use = target - x if clamped else h
        if h_use < hmin and not clamped:
            status = STATUS_UNDERFLOW
            x_err = x
            break

        for i in range(m):
            y2[i] = y[i] + h_use * (A21 * k1[i])
        _rhs_c(n, lam_eff, mu, v, f_scale, f_a, f_b, f_a_int, f_b_int,
               ets, tps, tprs, pc, pe, px, pv, x + C2 * h_use, y2, cl, k2)
        for i in range(m):
            y2[i] = y[i] + h_use * (A31 * k1[i] + A32 * k2[i])
        _rhs_c(n, lam_eff, mu, v, f_scale, f_a, f_b, f_a_int, f_b_int,
               ets, tps, tprs, pc, pe, px, pv, x + C3 * h_use, y2, cl, k3)
        for i in range(m):
            y2[i] = y[i] + h_use * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        _rhs_c(n, lam_eff, mu, v, f_scale, f_a, f_b, f_a_int, f_b_int,
               ets, tps, tprs, pc, pe, px, pv, x + C4 * h_use, y2, cl, k4)
        for i in range(m):
            y2[i] = y[i] + h_use * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i]
                                    + A54 * k4[i])
        _rhs_c(n, lam_eff, mu, v, f_scale, f_a, f_b, f_a_int, f_b_int,
               ets, tps, tprs, pc, pe, px, pv, x + C5 * h_use, y2, cl, k5)
        for i in range(m):
            y2[i] = y[i] + h_use * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                    + A64 * k4[i] + A65 * k5[i])
        _rhs_c(n, lam_eff, mu, v, f_scale, f_a, f_b, f_a_int, f_b_int,
               ets, tps, tprs, pc, pe, px, pv, x + h_use, y2, cl, k6)
        for i in range(m):
            ynew[i] = y[i] + h_use * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i]
                                      + B5 * k5[i] + B6 * k6[i])
        _rhs_c(n, lam_eff, mu, v, f_scale, f_a, f_b, f_a_int, f_b_int,
               ets, tps, tprs, pc, pe, px, pv, x + h_use, ynew, cl, k7)

        err = 0.0
        finite = True
        for i in range(m):
            e = h_use * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i]
                         + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            ay = fabs(y[i])
            an = fabs(ynew[i])
            sc = atol + rtol * (ay if ay > an else an)
            q = e / sc
            err += q * q
            if not isfinite(ynew[i]):
                finite = False
        err = sqrt(err / m)

        if (not finite) or (not isfinite(err)):
            if h_use <= hmin:
                status = STATUS_NONFINITE
                x_err = x
                break
            h = 0.25 * h_use
            rejected = True
            continue

        if err <= 1.0:
            if nacc >= cap:
                cap *= 2
                xs_new = np.empty(cap)
                xs_new[:nacc] = xs_buf[:nacc]
                xs_buf = xs_new
                xs_v = xs_buf
                ys_new = np.empty((cap, m))
                ys_new[:nacc] = ys_buf[:nacc]
                ys_buf = ys_new
                ys_v = ys_buf
                if want_dense:
                    cont_new = np.empty((cap, 5, m))
                    cont_new[:nacc - 1] = cont_buf[:nacc - 1]
                    cont_buf = cont_new
                    cont_v = cont_buf
            if want_dense:
                for i in range(m):
                    ydiff = ynew[i] - y[i]
                    bspl = h_use * k1[i] - ydiff
                    cont_v[nacc - 1, 0, i] = y[i]
                    cont_v[nacc - 1, 1, i] = ydiff
                    cont_v[nacc - 1, 2, i] = bspl
                    cont_v[nacc - 1, 3, i] = ydiff - h_use * k7[i] - bspl
                    cont_v[nacc - 1, 4, i] = h_use * (D1 * k1[i] + D3 * k3[i]
                                                      + D4 * k4[i] + D5 * k5[i]
                                                      + D6 * k6[i] + D7 * k7[i])
            x = target if clamped else x + h_use
            if ib < nbp and clamped and target == bps[ib]:
                ib += 1
            tmp = y
            y = ynew
            ynew = tmp
            tmp = k1
            k1 = k7
            k7 = tmp
            xs_v[nacc] = x
            for i in range(m):
                ys_v[nacc, i] = y[i]
            nacc += 1
            if err == 0.0:
                fac = FAC_MAX
            else:
                fac = SAFETY * pow(err, -0.2)
                if fac > FAC_MAX:
                    fac = FAC_MAX
                elif fac < FAC_MIN:
                    fac = FAC_MIN
            if rejected and fac > 1.0:
                fac = 1.0
            h = h_use * fac
            rejected = False
        else:
            fac = SAFETY * pow(err, -0.2)
            if fac < FAC_MIN:
                fac = FAC_MIN
            h = h_use * fac
            rejected = True
            if h_use <= hmin:
                status = STATUS_UNDERFLOW
                x_err = x
                break

    xs_out = xs_buf[:nacc].copy()
    ys_out = ys_buf[:nacc].copy()
    if want_dense:
        return status, xs_out, ys_out, cont_buf[:nacc - 1].copy(), x_err
    return status, xs_out, ys_out, None, x_err


def integrate_dense(pk, lam_eff, double mu, v, double x0, y0, double x1,
                    double rtol, double atol, long max_steps=1000000):
    """Integrate the packed problem with dense output."""
    lam_arr = np.ascontiguousarray(lam_eff, dtype=np.float64)
    v_arr = np.ascontiguousarray(v, dtype=np.float64)
    y0_arr = np.ascontiguousarray(y0, dtype=np.float64)
    return _drive_c(pk, lam_arr, mu, v_arr, x0, y0_arr, x1, rtol, atol,
                    max_steps, True)


def shoot_terminal(pk, lam_eff, double mu, v, y0, double rtol, double atol,
                   long max_steps=1000000):
    """Integrate from the left habitat end to the right one; return the end state."""
    lam_arr = np.ascontiguousarray(lam_eff, dtype=np.float64)
    v_arr = np.ascontiguousarray(v, dtype=np.float64)
    y0_arr = np.ascontiguousarray(y0, dtype=np.float64)
    status, xs, ys, _, x_err = _drive_c(pk, lam_arr, mu, v_arr, pk.lo, y0_arr,
                                        pk.hi, rtol, atol, max_steps, False)
    return status, ys[-1], x_err
