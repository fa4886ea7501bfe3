"""Period curves on adaptive energy grids, critical periods and bound checks."""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyLedger, HypothesisViolation, check_hypothesis_numeric, \
    critical_energy_ledger
from .orbit import OrbitError, PeriodSample, annulus_upper, period_return_time
from .poly import SystemSpec, hamiltonian_for

log = logging.getLogger(__name__)

GLOBAL_POINTS = 256
CLUSTER_POINTS = 64
CLUSTER_DECADES = 8
CLUSTER_FLOOR = 1e-10
MERGE_RADIUS = 1e-4
REFINE_TOL = 1e-6
SIGNIFICANCE = 1e-9
EPS_START = 1e-2
MAX_HALVINGS = 12
MAX_FAILED_FRACTION = 0.10


class CurveQualityError(RuntimeError):
    pass


@dataclass
class PeriodCurve:
    samples: list
    grid_meta: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def h(self) -> np.ndarray:
        return np.array([s.h for s in self.samples])

    @property
    def T(self) -> np.ndarray:
        return np.array([s.T for s in self.samples])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h", "T", "method", "err", "drift"])
            for s in self.samples:
                w.writerow([f"{s.h:.17g}", f"{s.T:.17g}", s.method,
                            f"{s.err_estimate:.17g}", f"{s.energy_drift:.17g}"])


@dataclass(frozen=True)
class CriticalPoint:
    h_star: float
    T_star: float
    kind: str  # minimum | maximum
    bracket: tuple
    refined_width: float

    def to_dict(self):
        return {"h_star": self.h_star, "T_star": self.T_star, "kind": self.kind,
                "bracket": list(self.bracket), "refined_width": self.refined_width}


@dataclass
class BoundReport:
    family_tag: str
    k: int
    epsilon_used: float
    required: int
    found: int
    passed: bool
    critical_points: list
    epsilon_schedule_log: list
    spec: SystemSpec | None = None

    @property
    def pass_(self) -> bool:
        return self.passed

    def to_dict(self):
        return {
            "family_tag": self.family_tag,
            "k": self.k,
            "epsilon_used": self.epsilon_used,
            "required": self.required,
            "found": self.found,
            "pass": self.passed,
            "critical_points": [c.to_dict() for c in self.critical_points],
            "epsilon_schedule_log": self.epsilon_schedule_log,
            "spec": None if self.spec is None else self.spec.to_dict(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def required_count(spec: SystemSpec) -> int:
    """Lower bound on the number of critical periods for the family."""
    k = spec.k
    n = {
        "potential-odd": 2 * k - 1,
        "potential-even": 2 * k - 2,
        "separable-odd": 2 * k * k + 4 * k - 1,
        "separable-even": 2 * k * k - 2,
    }[spec.family]
    return max(n, 0)


def perturbed_centers(spec: SystemSpec) -> list[float]:
    """H(beta_i, alpha_j, eps) over the root grid, origin excluded."""
    pair = hamiltonian_for(spec)
    xs = (0.0,) + spec.beta_values
    ys = (0.0,) + spec.alpha_values
    out = []
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            if i or j:
                out.append(float(pair.G.Q(x) + pair.F.Q(y)))
    return out


def build_h_grid(ledger: EnergyLedger, global_points: int = GLOBAL_POINTS,
                 cluster_points: int = CLUSTER_POINTS,
                 cluster_decades: int = CLUSTER_DECADES, *,
                 extra_centers=(), upper: float | None = None) -> np.ndarray:
    """Log-uniform global grid, two-sided geometric clusters around every
    interior ledger entry (and ``extra_centers``), and annulus midpoints.

    ``upper`` overrides the ledger's annulus bound (the perturbed saddle
    level for even families); samples stay below 0.999 of it.
    """
    interior = [h for h in ledger.interior if h > 0]
    h1 = min(interior) if interior else 1.0
    h_last = max(interior) if interior else 1.0
    upper = ledger.upper if upper is None else upper
    floor = 1e-6 * h1
    roof = 0.999 * upper if math.isfinite(upper) else 1e3 * h_last
    parts = [np.geomspace(floor, roof, global_points)]
    offsets = CLUSTER_FLOOR * np.logspace(0, cluster_decades, cluster_points)
    for c in list(interior) + [c for c in extra_centers if c > 0]:
        parts.append(c * (1.0 - offsets))
        parts.append(c * (1.0 + offsets))
    bounds = [h for h in ledger.energies] + ([upper] if math.isfinite(upper) else [])
    parts.append(np.array([0.5 * (a + b) for a, b in zip(bounds, bounds[1:])]))
    grid = np.unique(np.concatenate(parts))
    return grid[(grid >= floor) & (grid <= roof)]


def _evaluate(spec, h, rtol):
    try:
        return period_return_time(spec, h, rtol=rtol)
    except OrbitError as exc:
        return exc


def sample_curve(spec: SystemSpec, grid, *, n_jobs: int = 1,
                 rtol: float = 1e-11, grid_meta: dict | None = None) -> PeriodCurve:
    """Return-time periods over ``grid``; failed points are dropped and logged."""
    grid = np.asarray(grid, dtype=float)
    if n_jobs == 1:
        results = [_evaluate(spec, h, rtol) for h in grid]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(lambda h: _evaluate(spec, h, rtol), grid))
    samples, failures = [], []
    for h, r in zip(grid, results):
        if isinstance(r, PeriodSample):
            samples.append(r)
        else:
            log.info("dropped h=%r: %s", float(h), r)
            failures.append({"h": float(h), "error": str(r)})
    if grid.size and len(failures) > MAX_FAILED_FRACTION * grid.size:
        raise CurveQualityError(f"{len(failures)} of {grid.size} samples failed")
    return PeriodCurve(samples, dict(grid_meta or {}), failures)


def _segments(curve: PeriodCurve, spec: SystemSpec):
    """Split at the critical levels when eps = 0 (T is infinite there)."""
    samples = curve.samples
    if spec.epsilon > 0:
        return [samples]
    cuts = critical_energy_ledger(spec, strict=False).interior
    segs, cur, idx = [], [], 0
    cuts = sorted(cuts)
    for s in samples:
        while idx < len(cuts) and s.h > cuts[idx]:
            idx += 1
            if cur:
                segs.append(cur)
            cur = []
        cur.append(s)
    if cur:
        segs.append(cur)
    return segs


def _zigzag(T, err, significance):
    """Indices of significant interior extrema as (index, kind) pairs.

    A maximum is reported only once the curve has risen to it and then
    fallen from it by more than the threshold (and symmetrically for
    minima), so flat stretches and sample noise never seed a bracket.
    """
    def thr(i, j):
        return significance * max(abs(T[i]), abs(T[j])) + err[i] + err[j]

    out = []
    state = 0
    imax = imin = 0
    for i in range(1, len(T)):
        if state == 1:
            if T[i] > T[imax]:
                imax = i
            elif T[imax] - T[i] > thr(imax, i):
                out.append((imax, "maximum"))
                state, imin = -1, i
        elif state == -1:
            if T[i] < T[imin]:
                imin = i
            elif T[i] - T[imin] > thr(imin, i):
                out.append((imin, "minimum"))
                state, imax = 1, i
        else:
            if T[i] > T[imax]:
                imax = i
            if T[i] < T[imin]:
                imin = i
            if T[imax] - T[imin] > thr(imax, imin):
                state = 1 if imin < imax else -1
    return out


def golden_refine(fun, a, b, c, fa, fb, fc, rel_tol=REFINE_TOL, max_iter=200):
    """Shrink a bracketing triple (fb <= fa, fb <= fc) around a minimum of fun.

    Returns (a, b, c, fb, converged).
    """
    gold = 0.3819660112501051
    for _ in range(max_iter):
        if c - a <= rel_tol * abs(b):
            return a, b, c, fb, True
        if c - b > b - a:
            x = b + gold * (c - b)
            fx = fun(x)
            if fx < fb:
                a, fa, b, fb = b, fb, x, fx
            else:
                c, fc = x, fx
        else:
            x = b - gold * (b - a)
            fx = fun(x)
            if fx < fb:
                c, fc, b, fb = b, fb, x, fx
            else:
                a, fa = x, fx
    return a, b, c, fb, False


def detect_critical_points(curve: PeriodCurve, spec: SystemSpec, *,
                           significance: float = SIGNIFICANCE,
                           merge_radius: float = MERGE_RADIUS,
                           refine_tol: float = REFINE_TOL,
                           rtol: float = 1e-11, window=None) -> list[CriticalPoint]:
    """Seed brackets at significant sampled extrema and refine each by
    golden-section search on fresh period evaluations.

    ``window`` = (lo, hi) keeps only extrema with lo < h_star < hi.
    """
    found = []
    for seg in _segments(curve, spec):
        if len(seg) < 3:
            continue
        T = np.array([s.T for s in seg])
        err = np.array([s.err_estimate for s in seg])
        hs = np.array([s.h for s in seg])
        for i, kind in _zigzag(T, err, significance):
            if i == 0 or i == len(seg) - 1:
                continue
            sign = -1.0 if kind == "maximum" else 1.0

            def fun(h, sign=sign):
                return sign * period_return_time(spec, h, rtol=rtol).T

            try:
                a, b, c, fb, ok = golden_refine(fun, hs[i - 1], hs[i], hs[i + 1],
                                                sign * T[i - 1], sign * T[i],
                                                sign * T[i + 1], refine_tol)
            except OrbitError as exc:
                log.warning("refinement near h=%r failed: %s", hs[i], exc)
                continue
            if not ok:
                log.warning("refinement near h=%r did not converge", hs[i])
                continue
            found.append(CriticalPoint(float(b), float(sign * fb), kind,
                                       (float(a), float(c)), float(c - a)))
    found.sort(key=lambda p: p.h_star)
    merged = []
    for p in found:
        if merged and merged[-1].kind == p.kind and \
                abs(p.h_star - merged[-1].h_star) <= merge_radius * p.h_star:
            q = merged[-1]
            better = p.T_star > q.T_star if p.kind == "maximum" else p.T_star < q.T_star
            if better:
                merged[-1] = p
            continue
        merged.append(p)
    if window is not None:
        lo, hi = window
        merged = [p for p in merged if lo < p.h_star < hi]
    return merged


def curve_for(spec: SystemSpec, ledger: EnergyLedger | None = None, *,
              global_points=GLOBAL_POINTS, cluster_points=CLUSTER_POINTS,
              cluster_decades=CLUSTER_DECADES, n_jobs=1, rtol=1e-11) -> PeriodCurve:
    """Grid construction plus sampling for one spec."""
    ledger = ledger or critical_energy_ledger(spec, strict=False)
    extra = perturbed_centers(spec) if spec.epsilon > 0 else ()
    upper = annulus_upper(spec)
    grid = build_h_grid(ledger, global_points, cluster_points, cluster_decades,
                        extra_centers=extra, upper=upper)
    meta = {"centers": ledger.interior, "perturbed_centers": list(extra),
            "global_points": global_points, "cluster_points": cluster_points,
            "cluster_decades": cluster_decades, "upper": None if math.isinf(upper) else upper}
    return sample_curve(spec, grid, n_jobs=n_jobs, rtol=rtol, grid_meta=meta)


def verify_bound(spec: SystemSpec, *, epsilon_start: float = EPS_START,
                 max_halvings: int = MAX_HALVINGS, global_points=GLOBAL_POINTS,
                 cluster_points=CLUSTER_POINTS, cluster_decades=CLUSTER_DECADES,
                 n_jobs: int = 1, hypothesis_tol: float = 1e-9) -> BoundReport:
    """Count critical periods of the perturbed system, halving eps until the
    family's lower bound is met or the schedule is exhausted."""
    ledger = critical_energy_ledger(spec, tol=hypothesis_tol)
    verdict = check_hypothesis_numeric(ledger, hypothesis_tol)
    if not verdict.distinct:
        raise HypothesisViolation("critical energies are not distinct", verdict.witness)
    if verdict.dominance_ok is False:
        raise HypothesisViolation("saddle level does not dominate the critical energies")
    required = required_count(spec)
    schedule = []
    eps = epsilon_start
    points: list = []
    for m in range(max_halvings + 1):
        eps = epsilon_start / 2 ** m
        s = spec.with_epsilon(eps)
        curve = curve_for(s, ledger, global_points=global_points,
                          cluster_points=cluster_points,
                          cluster_decades=cluster_decades, n_jobs=n_jobs)
        points = detect_critical_points(curve, s)
        schedule.append({"epsilon": eps, "samples": len(curve.samples),
                         "dropped": len(curve.failures), "found": len(points)})
        log.info("eps=%g: %d critical points (need %d)", eps, len(points), required)
        if len(points) >= required:
            break
    found = len(points)
    return BoundReport(spec.family, spec.k, eps, required, found, found >= required,
                       points, schedule, spec.with_epsilon(eps))


def tail_exponent(spec: SystemSpec, decades: int = 3, per_decade: int = 8) -> float:
    """Least-squares slope of log T against log h over ``decades`` decades
    starting at 100 times the last critical level."""
    if decades <= 0 or per_decade < 1:
        raise ValueError("need a positive number of decades and samples")
    ledger = critical_energy_ledger(spec, strict=False)
    h_last = ledger.h_last if ledger.h_last > 0 else 1.0
    start = 100.0 * h_last
    if math.isfinite(ledger.upper):
        raise ValueError("tail exponent needs an unbounded period annulus")
    hs = np.geomspace(start, start * 10.0 ** decades, decades * per_decade + 1)
    Ts = np.array([period_return_time(spec, h).T for h in hs])
    if len(hs) < 3:
        raise ValueError("insufficient samples for a slope fit")
    slope, _ = np.polyfit(np.log(hs), np.log(Ts), 1)
    return float(slope)


def peak_growth_probe(spec: SystemSpec, eps_list, *, cluster_points=CLUSTER_POINTS,
                      cluster_decades=CLUSTER_DECADES) -> list[tuple[float, list[float]]]:
    """Tallest period near each interior critical level, for each eps.

    The window around a level reaches at most halfway to its neighbours;
    the sampled maximum is polished by golden-section search.
    """
    eps_list = list(eps_list)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    ledger = critical_energy_ledger(spec)
    levels = ledger.energies
    out = []
    offsets = CLUSTER_FLOOR * np.logspace(0, cluster_decades, cluster_points)
    for eps in eps_list:
        s = spec.with_epsilon(eps)
        centers = perturbed_centers(s)
        upper = annulus_upper(s)
        peaks = []
        for idx in range(1, len(levels)):
            hc = levels[idx]
            lo = 0.5 * (levels[idx - 1] + hc)
            hi = 0.5 * (hc + levels[idx + 1]) if idx + 1 < len(levels) else \
                min(2.0 * hc, 0.5 * (hc + upper))
            near = [c for c in centers if lo < c < hi]
            pts = [hc * (1 - offsets), hc * (1 + offsets)]
            for c in near:
                pts += [c * (1 - offsets), c * (1 + offsets)]
            grid = np.unique(np.concatenate(pts))
            grid = grid[(grid > lo) & (grid < hi)]
            curve = sample_curve(s, grid)
            T = curve.T
            i = int(np.argmax(T))
            best = float(T[i])
            if 0 < i < len(T) - 1:
                hs = curve.h

                def fun(h):
                    return -period_return_time(s, h).T

                try:
                    *_, fb, _ok = golden_refine(fun, hs[i - 1], hs[i], hs[i + 1],
                                                -T[i - 1], -T[i], -T[i + 1])
                    best = max(best, -fb)
                except OrbitError:
                    pass
            peaks.append(best)
        out.append((eps, peaks))
    return out
