"""Acceptance criteria, each at its stated tolerance.

Every criterion records one PASS/FAIL line; the lines are printed in the
pytest terminal summary and by ``python3 tests/test_acceptance.py``.
"""
import math
import time
from fractions import Fraction as Fr

import numpy as np
import pytest

from critperiods.critical import (curve_for, peak_growth_probe, sample_curve,
                                  tail_exponent, verify_bound)
from critperiods.energy import certify_example_family, critical_energy_ledger
from critperiods.orbit import period_quadrature_potential, period_return_time
from critperiods.poly import SystemSpec

RESULTS: dict[str, tuple[bool, str]] = {}

BETA1 = SystemSpec("potential-odd", (1.0,))
BETA12 = SystemSpec("potential-odd", (1.0, 2.0))
BETA123 = SystemSpec("potential-odd", (1.0, 2.0, 3.0))
FIG4 = SystemSpec("separable-odd", (2.0,), (4.0,))
EVEN2 = SystemSpec("potential-even", (1.0,), saddle_beta=4.0)
EXAMPLE1 = SystemSpec("separable-odd", (1,), (1,), e_scaled=True)
EXAMPLE2 = SystemSpec("separable-even", (1,), (1,), saddle_beta=4, e_scaled=True)
POTENTIAL_SPECS = (BETA1, BETA12, BETA123, EVEN2)

_reports: dict = {}


def record(key, ok, detail):
    RESULTS[key] = (bool(ok), detail)
    assert ok, detail


def report_for(spec):
    if spec not in _reports:
        t = time.perf_counter()
        rep = verify_bound(spec)
        _reports[spec] = (rep, time.perf_counter() - t)
    return _reports[spec]


def _extrapolate_to_zero(spec):
    h1 = critical_energy_ledger(spec).interior[0]
    hs = h1 * np.array([1e-8, 2e-8, 4e-8])
    Ts = [period_return_time(spec, h).T for h in hs]
    slope, intercept = np.polyfit(hs, Ts, 1)
    return intercept


@pytest.mark.parametrize("spec,expect,label", [
    (BETA123, math.pi / 3, "potential betas=(1,2,3) -> pi/3"),
    (FIG4, math.pi / 4, "separable alpha=4 beta=2 -> pi/4"),
])
def test_c1_linearized_period(spec, expect, label):
    t = time.perf_counter()
    T0 = _extrapolate_to_zero(spec)
    dt = time.perf_counter() - t
    rel = abs(T0 - expect) / expect
    record(f"1 linearized period, {label}", rel <= 1e-6 and dt < 10,
           f"rel err {rel:.2e} (tol 1e-6), {dt:.2f} s (limit 10 s)")


def test_c2_ledger_exactness():
    t = time.perf_counter()
    fig4 = [e.h_exact for e in critical_energy_ledger(FIG4).entries]
    ok = fig4 == [0, Fr(4, 3), Fr(64, 3), Fr(68, 3)]
    certs = []
    for k in (1, 2, 3):
        v = certify_example_family(k, "odd")
        certs.append(v.distinct)
        v = certify_example_family(k, "even")
        certs.append(v.distinct and v.dominance_ok)
    dt = time.perf_counter() - t
    record("2 ledger exactness", ok and all(certs) and dt < 5,
           f"Fig-4 ledger {[str(x) for x in fig4]}, certificates {certs}, {dt:.2f} s")


def _bound(label, spec, minimum, limit):
    rep, dt = report_for(spec)
    ok = rep.found >= minimum and dt < limit
    record(label, ok, f"found {rep.found} >= {minimum} at eps {rep.epsilon_used:g}, "
                      f"{dt:.1f} s (limit {limit:.0f} s)")


@pytest.mark.parametrize("spec,minimum", [(BETA1, 1), (BETA12, 3), (BETA123, 5)])
def test_c3_potential_odd(spec, minimum):
    _bound(f"3 potential-odd k={spec.k}", spec, minimum, 15 * 60)


@pytest.mark.parametrize("spec,minimum,label", [
    (FIG4, 5, "alpha=4 beta=2"), (EXAMPLE1, 5, "Example 1 k=1")])
def test_c4_separable_odd(spec, minimum, label):
    _bound(f"4 separable-odd {label}", spec, minimum, 15 * 60)


@pytest.mark.parametrize("spec,minimum,label", [
    (EVEN2, 2, "potential-even k=2"), (EXAMPLE2, 6, "separable-even Example 2 k=2")])
def test_c5_even(spec, minimum, label):
    _bound(f"5 {label}", spec, minimum, 30 * 60)


def _annulus_grids(spec, n=50, gap=1e-3):
    ledger = critical_energy_ledger(spec)
    levels = ledger.energies
    upper = ledger.upper if math.isfinite(ledger.upper) else 1e3 * ledger.h_last
    bounds = [1e-6 * levels[1]] + levels[1:] + [upper]
    return [np.geomspace(a * (1 + gap), b * (1 - gap), n)
            for a, b in zip(bounds, bounds[1:])]


@pytest.mark.parametrize("spec", POTENTIAL_SPECS, ids=lambda s: f"{s.family}-{s.betas}")
def test_c6_oracle_equivalence(spec):
    worst = 0.0
    count = 0
    grids = [(spec, g) for g in _annulus_grids(spec)]
    s = spec.with_epsilon(1e-3)
    ledger = critical_energy_ledger(spec)
    top = 0.999 * ledger.upper if math.isfinite(ledger.upper) else 1e3 * ledger.h_last
    grids.append((s, np.geomspace(1e-6 * ledger.interior[0], top, 50)))
    for sp, grid in grids:
        for h in grid:
            a = period_return_time(sp, h).T
            b = period_quadrature_potential(sp, h).T
            worst = max(worst, abs(a - b) / a)
            count += 1
    record(f"6 oracle equivalence {spec.family} betas={spec.betas}", worst <= 1e-6,
           f"max rel diff {worst:.2e} over {count} energies (tol 1e-6)")


@pytest.mark.parametrize("spec", (BETA1, BETA12, BETA123), ids=lambda s: f"k{s.k}")
def test_c7_monotone_ends(spec):
    ledger = critical_energy_ledger(spec)
    h1, hk = ledger.interior[0], ledger.interior[-1]
    inner = np.geomspace(1e-6 * h1, h1 * (1 - 1e-4), 64)
    outer = np.geomspace(hk * (1 + 1e-4), 100 * hk, 64)
    Ti = np.array([period_return_time(spec, h).T for h in inner])
    To = np.array([period_return_time(spec, h).T for h in outer])
    up = bool(np.all(np.diff(Ti) > 0))
    down = bool(np.all(np.diff(To) < 0))
    record(f"7 end monotonicity k={spec.k}", up and down,
           f"increasing on (0,h1): {up}, decreasing on (hk,100hk): {down}")


@pytest.mark.parametrize("spec", (BETA1, BETA12, BETA123, FIG4),
                         ids=lambda s: f"{s.family}-{s.betas}")
def test_c8_divergence(spec):
    ok = True
    for hs in critical_energy_ledger(spec).interior:
        Ts = [period_return_time(spec, hs * (1 - 10.0 ** -j)).T for j in range(3, 7)]
        ok &= all(a < b for a, b in zip(Ts, Ts[1:]))
    record(f"8 near-cusp divergence {spec.family} betas={spec.betas}", ok,
           "T strictly increasing along h_s(1 - 10^-j), j=3..6")


@pytest.mark.parametrize("spec,label", [(BETA1, "betas=(1)"), (FIG4, "alpha=4 beta=2")])
def test_c8_peak_growth(spec, label):
    out = peak_growth_probe(spec, [1e-2, 1e-3, 1e-4])
    first = [peaks[0] for _, peaks in out]
    ok = first[0] < first[1] < first[2]
    record(f"8 peak growth {label}", ok,
           "peaks " + ", ".join(f"{p:.6g}" for p in first) + " across eps 1e-2, 1e-3, 1e-4")


@pytest.mark.parametrize("spec,label", [(BETA1, "potential k=1"), (BETA12, "potential k=2"),
                                        (FIG4, "separable k=1")])
def test_c9_tail_exponent(spec, label):
    k = spec.k
    target = -k / (k + 1)
    slope = tail_exponent(spec, 3)
    rel = abs(slope - target) / abs(target)
    record(f"9 tail exponent {label}", rel <= 0.05,
           f"slope {slope:.5f} vs {target:.5f} (rel {rel:.3f}, tol 0.05)")


def test_c10_structural():
    details = []
    # energy drift on every accepted sample of the curves behind the reports
    worst = 0.0
    for spec in (BETA12, FIG4, EXAMPLE2):
        rep, _ = report_for(spec)
        curve = curve_for(rep.spec)
        worst = max(worst, max(s.energy_drift / max(1.0, s.h) for s in curve.samples))
    drift_ok = worst <= 1e-9
    details.append(f"max drift {worst:.1e}")
    # scaling law, lambda = 2
    lam, scale_err = 2.0, 0.0
    for betas in ((1.0,), (1.0, 2.0)):
        k = len(betas)
        for eps in (0.0, 1e-3):
            a = SystemSpec("potential-odd", betas, epsilon=eps)
            b = SystemSpec("potential-odd", tuple(lam * x for x in betas), epsilon=lam ** 2 * eps)
            for h in np.geomspace(1e-3, 10, 7):
                if eps == 0 and any(abs(h / c - 1) < 1e-6
                                    for c in critical_energy_ledger(a).interior):
                    continue
                t1 = period_return_time(a, h).T
                t2 = period_return_time(b, lam ** (2 * k + 2) * h).T
                scale_err = max(scale_err, abs(t2 - lam ** -k * t1) / t1 * lam ** k)
    scale_ok = scale_err <= 1e-8
    details.append(f"scaling rel err {scale_err:.1e}")
    # alternation in passing odd-potential reports
    alt_ok = True
    for spec in (BETA1, BETA12, BETA123):
        rep, _ = report_for(spec)
        kinds = [p.kind for p in rep.critical_points]
        alt_ok &= rep.passed and all(x != y for x, y in zip(kinds, kinds[1:]))
    details.append(f"alternation {alt_ok}")
    # determinism
    det_ok = verify_bound(BETA12).to_json() == report_for(BETA12)[0].to_json()
    grid = np.geomspace(1e-3, 1.0, 30)
    det_ok &= sample_curve(FIG4, grid).samples == sample_curve(FIG4, grid, n_jobs=2).samples
    details.append(f"deterministic {det_ok}")
    record("10 structural invariants", drift_ok and scale_ok and alt_ok and det_ok,
           ", ".join(details))


def summary_lines():
    return [f"criterion {key}: {'PASS' if ok else 'FAIL'} ({detail})"
            for key, (ok, detail) in sorted(RESULTS.items(),
                                            key=lambda kv: (int(kv[0].split()[0]), kv[0]))]


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
