"""Compiled inner loops: compensated Horner, factored vector fields,
turning-point roots, the DOP853 return-time integrator and the
Chebyshev-weighted period quadratures.

Everything here works on plain float64 arrays so it can be jitted with
``nogil=True`` and mapped over an energy grid from worker threads.
"""
import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

_NS = _dop.N_STAGES
A = np.ascontiguousarray(_dop.A[:_NS, :_NS])
B = np.ascontiguousarray(_dop.B)
C = np.ascontiguousarray(_dop.C[:_NS])
E3 = np.ascontiguousarray(_dop.E3)
E5 = np.ascontiguousarray(_dop.E5)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERR_EXP = -1.0 / 8.0

# status codes shared with orbit.py
OK = 0
STEP_UNDERFLOW = 1
BUDGET = 2
NO_BRACKET = 3

_SPLIT = 134217729.0  # 2**27 + 1, Dekker split


@njit(cache=True, nogil=True)
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(cache=True, nogil=True)
def _two_prod(a, b):
    p = a * b
    t = _SPLIT * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLIT * b
    bh = t - (t - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True, nogil=True)
def comp_horner(coeffs, x):
    """Compensated Horner on ascending coefficients."""
    n = coeffs.shape[0]
    if n == 0:
        return 0.0
    s = coeffs[n - 1]
    c = 0.0
    for i in range(n - 2, -1, -1):
        p, pe = _two_prod(s, x)
        s, se = _two_sum(p, coeffs[i])
        c = c * x + (pe + se)
    return s + c


@njit(cache=True, nogil=True)
def comp_horner_many(coeffs, xs):
    out = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        out[i] = comp_horner(coeffs, xs[i])
    return out


@njit(cache=True, nogil=True)
def factored(z, roots, eps, saddle):
    """z * prod((z - r)^2 + eps) * (saddle - z) when saddle is not nan."""
    v = z
    for i in range(roots.shape[0]):
        d = z - roots[i]
        v *= d * d + eps
    if not math.isnan(saddle):
        v *= saddle - z
    return v


@njit(cache=True, nogil=True)
def factored_many(zs, roots, eps, saddle):
    out = np.empty(zs.shape[0])
    for i in range(zs.shape[0]):
        out[i] = factored(zs[i], roots, eps, saddle)
    return out


# -- turning points ---------------------------------------------------------

@njit(cache=True, nogil=True)
def turning_point(coeffs, roots, eps, saddle, level, side):
    """Root of P(z) = level on the half-line selected by ``side`` (+1/-1).

    P has ascending ``coeffs`` and derivative given by the factored form.
    P is monotone on each half-line up to the saddle, so the root is unique.
    Returns (root, status).
    """
    if level <= 0.0:
        return 0.0, OK if level == 0.0 else NO_BRACKET
    lo = 0.0
    limit = math.inf
    if not math.isnan(saddle) and saddle * side > 0.0:
        limit = abs(saddle)
        if comp_horner(coeffs, saddle) <= level:
            return math.nan, NO_BRACKET
    hi = 1.0 if limit > 1.0 else 0.5 * limit
    for _ in range(2000):
        if comp_horner(coeffs, side * hi) > level:
            break
        lo = hi
        if limit < math.inf:
            hi = 0.5 * (hi + limit)
        else:
            hi *= 2.0
    else:
        return math.nan, NO_BRACKET
    if lo == 0.0:
        # shrink the bracket from above so tiny energies keep full precision
        for _ in range(2000):
            mid = 0.5 * hi
            if mid == 0.0 or comp_horner(coeffs, side * mid) <= level:
                lo = mid
                break
            hi = mid
    # bisection to a safe bracket
    for _ in range(60):
        if hi - lo <= 1e-3 * hi:
            break
        mid = 0.5 * (lo + hi)
        if comp_horner(coeffs, side * mid) > level:
            hi = mid
        else:
            lo = mid
    # guarded Newton
    r = 0.5 * (lo + hi)
    for _ in range(200):
        val = comp_horner(coeffs, side * r) - level
        if val > 0.0:
            hi = r
        else:
            lo = r
        der = side * factored(side * r, roots, eps, saddle)
        step = val / der if der != 0.0 else math.inf
        rn = r - step
        if not (lo < rn < hi) or not math.isfinite(rn):
            rn = 0.5 * (lo + hi)
        if abs(rn - r) <= 1e-15 * abs(rn) or hi - lo <= 4e-16 * hi:
            r = rn
            break
        r = rn
    return side * r, OK


@njit(cache=True, nogil=True)
def turning_points_many(coeffs, roots, eps, saddle, levels, side):
    out = np.empty(levels.shape[0])
    status = OK
    for i in range(levels.shape[0]):
        out[i], st = turning_point(coeffs, roots, eps, saddle, levels[i], side)
        if st != OK:
            status = st
    return out, status


# -- integration ------------------------------------------------------------

@njit(cache=True, nogil=True)
def _rhs(mode, s, u0, u1, groots, gsad, froots, fsad, eps):
    # mode 0: time flow of (x, y); s is time (unused)
    # mode 1: y is the independent variable, state (x, t)
    if mode == 0:
        return (factored(u1, froots, eps, fsad),
                -factored(u0, groots, eps, gsad))
    gx = -factored(u0, groots, eps, gsad)
    return factored(s, froots, eps, fsad) / gx, 1.0 / gx


@njit(cache=True, nogil=True)
def _dop853_step(mode, s, u0, u1, k0a, k0b, hstep, rtol, atol,
                 groots, gsad, froots, fsad, eps, K):
    """One DOP853 trial step. Returns (n0, n1, f0, f1, err_norm)."""
    K[0, 0] = k0a
    K[0, 1] = k0b
    for st in range(1, _NS):
        d0 = 0.0
        d1 = 0.0
        for j in range(st):
            a = A[st, j]
            if a != 0.0:
                d0 += a * K[j, 0]
                d1 += a * K[j, 1]
        K[st, 0], K[st, 1] = _rhs(mode, s + C[st] * hstep,
                                  u0 + hstep * d0, u1 + hstep * d1,
                                  groots, gsad, froots, fsad, eps)
    n0 = 0.0
    n1 = 0.0
    for j in range(_NS):
        n0 += B[j] * K[j, 0]
        n1 += B[j] * K[j, 1]
    n0 = u0 + hstep * n0
    n1 = u1 + hstep * n1
    K[_NS, 0], K[_NS, 1] = _rhs(mode, s + hstep, n0, n1,
                                groots, gsad, froots, fsad, eps)
    sc0 = atol + rtol * max(abs(u0), abs(n0))
    sc1 = atol + rtol * max(abs(u1), abs(n1))
    e5a = 0.0
    e5b = 0.0
    e3a = 0.0
    e3b = 0.0
    for j in range(_NS + 1):
        e5a += E5[j] * K[j, 0]
        e5b += E5[j] * K[j, 1]
        e3a += E3[j] * K[j, 0]
        e3b += E3[j] * K[j, 1]
    e5a /= sc0
    e5b /= sc1
    e3a /= sc0
    e3b /= sc1
    e5 = e5a * e5a + e5b * e5b
    e3 = e3a * e3a + e3b * e3b
    if e5 == 0.0 and e3 == 0.0:
        err = 0.0
    else:
        err = abs(hstep) * e5 / math.sqrt((e5 + 0.01 * e3) * 2.0)
    return n0, n1, K[_NS, 0], K[_NS, 1], err


@njit(cache=True, nogil=True)
def _next_factor(err):
    if err == 0.0:
        return MAX_FACTOR
    return min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** ERR_EXP))


@njit(cache=True, nogil=True)
def _land_on_section(x, y, t, rtol, atol, groots, gsad, froots, fsad, eps,
                     K, max_steps):
    """Integrate dx/dy, dt/dy from y down to exactly y = 0.

    Returns (x, t, sum_err, status).
    """
    s = y
    u0 = x
    u1 = t
    hstep = -y
    err_sum = 0.0
    k0a, k0b = _rhs(1, s, u0, u1, groots, gsad, froots, fsad, eps)
    for _ in range(max_steps):
        if s == 0.0:
            return u0, u1, err_sum, OK
        if abs(hstep) >= abs(s):
            hstep = -s
        n0, n1, f0, f1, err = _dop853_step(1, s, u0, u1, k0a, k0b, hstep,
                                           rtol, atol, groots, gsad,
                                           froots, fsad, eps, K)
        if err <= 1.0 and math.isfinite(n0) and math.isfinite(n1):
            last = hstep == -s
            s = 0.0 if last else s + hstep
            u0 = n0
            u1 = n1
            k0a = f0
            k0b = f1
            err_sum += err
            hstep *= _next_factor(err)
        else:
            if not math.isfinite(err):
                err = 1e10
            hstep *= max(MIN_FACTOR, SAFETY * err ** ERR_EXP)
            if abs(hstep) < 1e-15 * abs(y):
                return u0, u1, err_sum, STEP_UNDERFLOW
    return u0, u1, err_sum, BUDGET


@njit(cache=True, nogil=True)
def return_time(x0, level, gcoef, fcoef, groots, gsad, froots, fsad, eps,
                rtol, atol, max_steps, first_step, record, half):
    """Time for the flow x' = f(y), y' = -g(x) started at (x0, 0), x0 > 0,
    to come back to the half-line {y = 0, x > 0}; with ``half`` set, time to
    the first crossing of {y = 0, x < 0} instead.

    Returns (T, max_drift, err_sum, n_steps, status, trace) where trace
    holds (t, x, y) rows of accepted steps when ``record`` is set.
    """
    K = np.empty((_NS + 1, 2))
    x = x0
    y = 0.0
    t = 0.0
    hstep = first_step
    drift = 0.0
    err_sum = 0.0
    upper = False
    cap = 1024 if record else 1
    trace = np.empty((cap, 3))
    nrec = 0
    if record:
        trace[0, 0] = 0.0
        trace[0, 1] = x
        trace[0, 2] = y
        nrec = 1
    k0a, k0b = _rhs(0, t, x, y, groots, gsad, froots, fsad, eps)
    scale = max(1.0, abs(level))
    for n in range(max_steps):
        xn, yn, f0, f1, err = _dop853_step(0, t, x, y, k0a, k0b, hstep,
                                           rtol, atol, groots, gsad,
                                           froots, fsad, eps, K)
        if err <= 1.0 and math.isfinite(xn) and math.isfinite(yn):
            if (upper and y > 0.0 and yn <= 0.0) or (half and y < 0.0 and yn >= 0.0):
                xe, te, e2, st = _land_on_section(
                    x, y, t, rtol, atol, groots, gsad, froots, fsad, eps,
                    K, max_steps)
                err_sum += e2
                d = abs(comp_horner(gcoef, xe) - level) / scale
                drift = max(drift, d)
                if record:
                    if nrec == cap:
                        new = np.empty((2 * cap, 3))
                        new[:cap] = trace
                        trace = new
                        cap *= 2
                    trace[nrec, 0] = te
                    trace[nrec, 1] = xe
                    trace[nrec, 2] = 0.0
                    nrec += 1
                return te, drift, err_sum, n + 1, st, trace[:nrec]
            t += hstep
            x = xn
            y = yn
            k0a = f0
            k0b = f1
            err_sum += err
            if y > 0.0:
                upper = True
            d = abs(comp_horner(gcoef, x) + comp_horner(fcoef, y) - level)
            drift = max(drift, d / scale)
            if record:
                if nrec == cap:
                    new = np.empty((2 * cap, 3))
                    new[:cap] = trace
                    trace = new
                    cap *= 2
                trace[nrec, 0] = t
                trace[nrec, 1] = x
                trace[nrec, 2] = y
                nrec += 1
            hstep *= _next_factor(err)
        else:
            if not math.isfinite(err):
                err = 1e10
            hstep *= max(MIN_FACTOR, SAFETY * err ** ERR_EXP)
            if hstep < 1e-14 * max(1.0, t) or hstep == 0.0:
                return t, drift, err_sum, n + 1, STEP_UNDERFLOW, trace[:nrec]
    return t, drift, err_sum, max_steps, BUDGET, trace[:nrec]


# -- quadratures ------------------------------------------------------------

@njit(cache=True, nogil=True)
def cheb_nodes(n):
    out = np.empty(n)
    for j in range(n):
        out[j] = math.cos((2.0 * j + 1.0) * math.pi / (2.0 * n))
    return out


@njit(cache=True, nogil=True)
def quad_smap(level, n, gcoef, groots, gsad, eps):
    """Gauss-Chebyshev sum for the period with G(x) = level * s^2.

    Valid only when g has no zero strictly between the turning points and
    the origin. Returns (T, status).
    """
    nodes = cheb_nodes(n)
    total = 0.0
    pref = 2.0 * math.sqrt(2.0 * level)
    for j in range(n):
        s = nodes[j]
        side = 1.0 if s > 0.0 else -1.0
        x, st = turning_point(gcoef, groots, eps, gsad, level * s * s, side)
        if st != OK:
            return math.nan, st
        total += pref * s / factored(x, groots, eps, gsad)
    return math.pi * total / n, OK


@njit(cache=True, nogil=True)
def _divided_difference(coeffs, a, b):
    """(P(a) - P(b)) / (a - b) via synthetic division by (z - b)."""
    n = coeffs.shape[0] - 1
    if n < 1:
        return 0.0
    q = np.empty(n)
    acc = coeffs[n]
    q[n - 1] = acc
    for i in range(n - 1, 0, -1):
        acc = coeffs[i] + b * acc
        q[i - 1] = acc
    return comp_horner(q, a)


@njit(cache=True, nogil=True)
def quad_chord(x_minus, x_plus, n, gcoef):
    """Gauss-Chebyshev sum in x over [x_minus, x_plus] for potential systems.

    sqrt(2) * int dx / sqrt(h - G(x)) with the endpoint factor
    sqrt((x_plus - x)(x - x_minus)) divided out; h - G(x) is formed from
    divided differences anchored at the nearer turning point.
    """
    nodes = cheb_nodes(n)
    c = 0.5 * (x_plus + x_minus)
    r = 0.5 * (x_plus - x_minus)
    total = 0.0
    for j in range(n):
        u = nodes[j]
        x = c + r * u
        if u >= 0.0:
            dd = _divided_difference(gcoef, x_plus, x)
            phi2 = (x - x_minus) / dd
        else:
            dd = -_divided_difference(gcoef, x_minus, x)
            phi2 = (x_plus - x) / dd
        if not phi2 > 0.0:
            return math.nan
        total += math.sqrt(phi2)
    return math.sqrt(2.0) * math.pi * total / n


@njit(cache=True, nogil=True)
def advance(x, y, duration, groots, gsad, froots, fsad, eps, rtol, atol,
            max_steps, first_step):
    """Flow (x, y) forward by exactly ``duration``. Returns (x, y, status)."""
    K = np.empty((_NS + 1, 2))
    t = 0.0
    hstep = min(first_step, duration)
    k0a, k0b = _rhs(0, t, x, y, groots, gsad, froots, fsad, eps)
    for _ in range(max_steps):
        if t >= duration:
            return x, y, OK
        last = t + hstep >= duration
        if last:
            hstep = duration - t
        xn, yn, f0, f1, err = _dop853_step(0, t, x, y, k0a, k0b, hstep,
                                           rtol, atol, groots, gsad,
                                           froots, fsad, eps, K)
        if err <= 1.0 and math.isfinite(xn) and math.isfinite(yn):
            t = duration if last else t + hstep
            x = xn
            y = yn
            k0a = f0
            k0b = f1
            hstep *= _next_factor(err)
        else:
            if not math.isfinite(err):
                err = 1e10
            hstep *= max(MIN_FACTOR, SAFETY * err ** ERR_EXP)
            if hstep < 1e-14 * max(1.0, t):
                return x, y, STEP_UNDERFLOW
    return x, y, BUDGET
