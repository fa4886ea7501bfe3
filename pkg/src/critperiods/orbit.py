"""Turning points, closed orbits and the period function.

Two independent routes to T(h):

* return time of the flow to the half-line {y = 0, x > 0}, integrated with
  an embedded 8(5,3) Runge-Kutta pair and landed exactly on the section by
  switching to y as the independent variable for the last stretch;
* for potential systems, quadrature of sqrt(2) * int dx / sqrt(h - G(x)).
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from . import _kernels
from .energy import EnergyLedger, critical_energy_ledger
from .poly import Factor, HamiltonianPair, SystemSpec, hamiltonian_for

RTOL = 1e-11
ATOL = 1e-13
MAX_STEPS = 2_000_000
DRIFT_TOL = 1e-9
SEPARATRIX_GUARD = 1e-12
QUAD_START = 64
QUAD_MAX = 4096
QUAD_TOL = 1e-9


class OrbitError(RuntimeError):
    """Base class for failures while evaluating a closed orbit."""

    def __init__(self, message, h=None):
        super().__init__(message)
        self.h = h


class TurningPointRangeError(OrbitError):
    pass


class NearSeparatrixError(OrbitError):
    pass


class IntegrationBudgetError(OrbitError):
    pass


class EnergyDriftError(OrbitError):
    pass


@dataclass(frozen=True)
class TurningPoints:
    x_minus: float
    x_plus: float
    y_minus: float
    y_plus: float


@dataclass(frozen=True)
class PeriodSample:
    h: float
    T: float
    method: str
    err_estimate: float
    energy_drift: float = 0.0

    def as_row(self):
        return (self.h, self.T, self.method, self.err_estimate, self.energy_drift)


@dataclass(frozen=True)
class OrbitTrace:
    points: np.ndarray  # (n + 1, 2); last row closes onto the first
    h: float
    period: float

    def max_energy_error(self, pair: HamiltonianPair) -> float:
        x, y = self.points[:, 0], self.points[:, 1]
        return float(np.max(np.abs(pair.G.Q(x) + pair.F.Q(y) - self.h)))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y"])
            for x, y in self.points:
                w.writerow([f"{x:.17g}", f"{y:.17g}"])


def write_samples_csv(samples, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "T", "method", "err", "drift"])
        for s in samples:
            w.writerow([f"{s.h:.17g}", f"{s.T:.17g}", s.method,
                        f"{s.err_estimate:.17g}", f"{s.energy_drift:.17g}"])


def turning_point(potential: Factor, h: float, side: str | int = "positive") -> float:
    """Solve Q(z) = h on one half-line of a monotone potential.

    ``side`` is "positive"/"negative" (or +1/-1). Refined to about 1e-15
    relative after a bisection phase.
    """
    sgn = _side(side)
    if not h > 0:
        raise TurningPointRangeError(f"energy must be positive, got {h!r}", h)
    z, status = _kernels.turning_point(potential.Q.shadow, potential.roots_array,
                                       potential.eps, potential.saddle_value,
                                       float(h), float(sgn))
    if status != _kernels.OK:
        raise TurningPointRangeError(
            f"energy {h!r} is not attained on the {'positive' if sgn > 0 else 'negative'} "
            "side below the saddle", h)
    return float(z)


def _side(side):
    if side in ("positive", "+", 1, 1.0):
        return 1
    if side in ("negative", "-", -1, -1.0):
        return -1
    raise ValueError(f"side must be 'positive' or 'negative', got {side!r}")


def turning_points(pair: HamiltonianPair, h: float) -> TurningPoints:
    return TurningPoints(turning_point(pair.G, h, -1), turning_point(pair.G, h, 1),
                         turning_point(pair.F, h, -1), turning_point(pair.F, h, 1))


def linearized_period(spec: SystemSpec) -> float:
    """Period of the linearization at the origin, 2 pi / sqrt(f'(0) g'(0))."""
    pair = hamiltonian_for(spec)
    return 2.0 * math.pi / math.sqrt(pair.F.slope_at_origin() * pair.G.slope_at_origin())


def annulus_upper(spec: SystemSpec, pair: HamiltonianPair | None = None) -> float:
    """Upper end of the admissible energies: the saddle-loop level or inf."""
    if not spec.even:
        return math.inf
    pair = pair or hamiltonian_for(spec)
    return float(pair.G.Q(spec.saddle_value))


class _Context:
    """Everything the kernels need for one spec, computed once."""

    def __init__(self, spec: SystemSpec, ledger: EnergyLedger | None = None):
        self.spec = spec
        self.pair = hamiltonian_for(spec)
        self.gcoef = self.pair.G.Q.shadow
        self.fcoef = self.pair.F.Q.shadow
        self.groots = self.pair.G.roots_array
        self.froots = self.pair.F.roots_array
        self.gsad = self.pair.G.saddle_value
        self.fsad = self.pair.F.saddle_value
        self.eps = float(spec.epsilon)
        self.upper = annulus_upper(spec, self.pair)
        self.T0 = linearized_period(spec)
        self._ledger = ledger

    @property
    def ledger(self):
        if self._ledger is None:
            self._ledger = critical_energy_ledger(self.spec, strict=False)
        return self._ledger

    def check_energy(self, h):
        if not (h > 0 and math.isfinite(h)):
            raise TurningPointRangeError(f"energy must be positive and finite, got {h!r}", h)
        if h >= self.upper:
            raise TurningPointRangeError(
                f"energy {h!r} is at or above the saddle-loop level {self.upper!r}", h)
        if self.eps == 0.0:
            for hs in self.ledger.interior:
                if abs(h - hs) <= SEPARATRIX_GUARD * abs(hs):
                    raise NearSeparatrixError(
                        f"energy {h!r} is within {SEPARATRIX_GUARD:g} of the "
                        f"critical level {hs!r}", h)


_CONTEXTS: dict = {}


def context_for(spec: SystemSpec) -> _Context:
    ctx = _CONTEXTS.get(spec)
    if ctx is None:
        if len(_CONTEXTS) > 64:
            _CONTEXTS.clear()
        ctx = _CONTEXTS[spec] = _Context(spec)
    return ctx


def _integrate(ctx: _Context, h: float, rtol: float, atol: float, max_steps: int,
               record: bool = False, half: bool = False):
    x0 = turning_point(ctx.pair.G, h, 1)
    gx = abs(ctx.pair.G.rate(x0))
    first = 1e-2 * min(ctx.T0, x0 / gx if gx > 0 else math.inf)
    return x0, _kernels.return_time(x0, float(h), ctx.gcoef, ctx.fcoef, ctx.groots,
                                    ctx.gsad, ctx.froots, ctx.fsad, ctx.eps,
                                    rtol, atol, max_steps, first, record, half)


def period_return_time(spec: SystemSpec, h: float, *, rtol: float = RTOL,
                       atol: float = ATOL, max_steps: int = MAX_STEPS,
                       half: bool = False) -> PeriodSample:
    """Period as the first return time to {y = 0, x > 0} from (x_plus(h), 0).

    If the energy drift exceeds 1e-9 max(1, |h|) the orbit is integrated again
    with tolerances tightened tenfold (twice at most) before giving up.
    ``half`` returns the time to reach {y = 0, x < 0} instead.
    """
    ctx = context_for(spec)
    h = float(h)
    ctx.check_energy(h)
    for _ in range(3):
        _, (T, drift, err_sum, _n, status, _tr) = _integrate(ctx, h, rtol, atol,
                                                             max_steps, half=half)
        if status == _kernels.STEP_UNDERFLOW:
            raise NearSeparatrixError(f"step size underflow at h={h!r} "
                                      "(orbit too close to a separatrix)", h)
        if status == _kernels.BUDGET:
            raise IntegrationBudgetError(f"orbit at h={h!r} did not close within "
                                         f"{max_steps} steps", h)
        if drift <= DRIFT_TOL:
            return PeriodSample(h, float(T), "return-time", float(rtol * err_sum * T),
                                float(drift * max(1.0, abs(h))))
        rtol, atol = rtol / 10, atol / 10
    raise EnergyDriftError(f"energy drift {drift:.3g} at h={h!r} exceeds "
                           f"{DRIFT_TOL:g} relative", h)


def _enclosed_roots(ctx: _Context, xm: float, xp: float) -> list[float]:
    # a root sitting on a turning point is left to the end piece
    gap = 1e-6 * (xp - xm)
    return sorted(r for r in ctx.pair.G.roots if xm + gap < r < xp - gap)


def _composite(ctx: _Context, h: float, xm: float, xp: float, cuts: list[float]):
    """sqrt(2) int dx / sqrt(h - G) split at the enclosed roots of g.

    The two end pieces carry the inverse square root of the turning point as
    an algebraic weight (QUADPACK QAWS) with the rest of h - G formed by a
    divided difference; inner pieces use adaptive Gauss-Kronrod, which copes
    with the tall narrow peaks near a (nearly) degenerate root.
    """
    coef = ctx.gcoef

    def left(x):
        return 1.0 / math.sqrt(-_kernels._divided_difference(coef, xm, x))

    def right(x):
        return 1.0 / math.sqrt(_kernels._divided_difference(coef, xp, x))

    def inner(x):
        return 1.0 / math.sqrt(h - float(_kernels.comp_horner(coef, x)))

    kw = dict(epsabs=0.0, epsrel=1e-12, limit=500)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        total, err = quad(left, xm, cuts[0], weight="alg", wvar=(-0.5, 0.0), **kw)
        for a, b in zip(cuts, cuts[1:]):
            v, e = quad(inner, a, b, **kw)
            total, err = total + v, err + e
        v, e = quad(right, cuts[-1], xp, weight="alg", wvar=(0.0, -0.5), **kw)
    return math.sqrt(2.0) * (total + v), math.sqrt(2.0) * (err + e)


def period_quadrature_potential(spec: SystemSpec, h: float) -> PeriodSample:
    """Period of a potential system as sqrt(2) int dx / sqrt(h - G(x)).

    When no root of g lies between the turning points, a Chebyshev-weighted
    Gauss sum is used: in the variable s with G(x) = h s^2 (x(s) found per
    node) for eps > 0, in x with sqrt((x+ - x)(x - x-)) divided out for
    eps = 0. Nodes double from 64 until successive sums agree to 1e-9
    relative. Orbits that enclose a (near-)cusp are integrated piecewise
    between the enclosed roots instead, since the integrand develops spikes
    there that no fixed node set resolves; the same adaptive scheme, split
    at the midpoint, takes over when 4096 nodes do not converge.
    """
    if spec.kind != "potential":
        raise ValueError("quadrature is only implemented for potential systems")
    ctx = context_for(spec)
    h = float(h)
    ctx.check_energy(h)
    xm = turning_point(ctx.pair.G, h, -1)
    xp = turning_point(ctx.pair.G, h, 1)
    cuts = _enclosed_roots(ctx, xm, xp)
    if cuts:
        T, err = _composite(ctx, h, xm, xp, cuts)
        if not math.isfinite(T):
            raise OrbitError(f"quadrature produced {T!r} at h={h!r}", h)
        return PeriodSample(h, float(T), "quadrature", float(err))

    def total(n):
        if ctx.eps > 0:
            T, status = _kernels.quad_smap(h, n, ctx.gcoef, ctx.groots, ctx.gsad, ctx.eps)
            if status != _kernels.OK:
                raise TurningPointRangeError(f"node inversion failed at h={h!r}", h)
            return T
        return _kernels.quad_chord(xm, xp, n, ctx.gcoef)

    n = QUAD_START
    prev = total(n)
    while 2 * n <= QUAD_MAX:
        cur = total(2 * n)
        err = abs(cur - prev)
        if math.isfinite(cur) and err <= QUAD_TOL * abs(cur):
            return PeriodSample(h, float(cur), "quadrature", float(err))
        n *= 2
        prev = cur
    # a turning point on a nearly degenerate zero of g defeats the fixed nodes
    T, err = _composite(ctx, h, xm, xp, [0.5 * (xm + xp)])
    if not math.isfinite(T):
        raise OrbitError(f"quadrature produced {T!r} at h={h!r}", h)
    return PeriodSample(h, float(T), "quadrature", float(err))


def trace_orbit(spec: SystemSpec, h: float, n_points: int = 256, *,
                rtol: float = RTOL, atol: float = ATOL) -> OrbitTrace:
    """n_points samples equally spaced in time along one revolution,
    starting at (x_plus(h), 0), plus the closing point."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    ctx = context_for(spec)
    h = float(h)
    sample = period_return_time(spec, h, rtol=rtol, atol=atol)
    T = sample.T
    x = turning_point(ctx.pair.G, h, 1)
    y = 0.0
    pts = [(x, y)]
    dt = T / n_points
    for _ in range(n_points):
        x, y, status = _kernels.advance(x, y, dt, ctx.groots, ctx.gsad, ctx.froots,
                                        ctx.fsad, ctx.eps, rtol, atol, MAX_STEPS,
                                        1e-2 * dt)
        if status != _kernels.OK:
            raise NearSeparatrixError(f"tracing failed at h={h!r}", h)
        pts.append((x, y))
    return OrbitTrace(np.array(pts), h, T)
