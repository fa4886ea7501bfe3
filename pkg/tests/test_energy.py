import math
from fractions import Fraction as Fr

import pytest

from critperiods.energy import (HypothesisViolation, PerturbedSystemError, certify,
                                certify_example_family, check_hypothesis_numeric,
                                critical_energy_ledger, e_bounds, generalized_condition,
                                predicted_order, singular_points)
from critperiods.poly import SpecError, SystemSpec


def _pts(spec):
    return {(p.x, p.y): p.kind for p in singular_points(spec)}


def test_singular_points_potential():
    pts = _pts(SystemSpec("potential-odd", (1, 2, 3)))
    assert pts == {(0, 0): "center", (1, 0): "cusp", (2, 0): "cusp", (3, 0): "cusp"}


def test_singular_points_fig4(fig4):
    assert _pts(fig4) == {(0, 0): "center", (2, 0): "cusp", (0, 4): "cusp",
                          (2, 4): "degenerate"}


def test_singular_points_even_k1():
    pts = _pts(SystemSpec("potential-even", (), saddle_beta=4))
    assert pts == {(0, 0): "center", (4, 0): "saddle"}


def test_singular_points_need_skeleton():
    with pytest.raises(PerturbedSystemError):
        singular_points(SystemSpec("potential-odd", (1,), epsilon=1e-3))


def test_fig4_ledger_exact(fig4):
    ledger = critical_energy_ledger(fig4)
    assert [e.h_exact for e in ledger.entries] == [0, Fr(4, 3), Fr(64, 3), Fr(68, 3)]
    assert ledger.entries[0].source.kind == "center"
    v = check_hypothesis_numeric(ledger)
    assert v.distinct and v.min_gap == pytest.approx(4 / 3)


def test_beta1_ledger(beta1):
    assert [e.h_exact for e in critical_energy_ledger(beta1).entries] == [0, Fr(1, 12)]


def test_example1_k1_ledger():
    spec = SystemSpec("separable-odd", (1,), (1,), e_scaled=True)
    e4 = math.e ** 4
    expect = [0, 1 / 12, e4 / 12, (1 + e4) / 12]
    assert critical_energy_ledger(spec).energies == pytest.approx(expect, rel=1e-13)


def test_collision_detected():
    spec = SystemSpec("potential-odd", (1, -1))
    with pytest.raises(HypothesisViolation) as info:
        critical_energy_ledger(spec)
    assert info.value.witness is not None
    ledger = critical_energy_ledger(spec, strict=False)
    v = check_hypothesis_numeric(ledger)
    assert not v.distinct and v.witness is not None
    assert not generalized_condition(ledger)


def test_single_entry_vacuous(harmonic):
    ledger = critical_energy_ledger(harmonic)
    assert ledger.energies == [0.0]
    assert check_hypothesis_numeric(ledger).distinct


@pytest.mark.parametrize("spec,count", [
    (SystemSpec("potential-odd", (1, 2)), 3),
    (SystemSpec("potential-even", (1,), saddle_beta=4), 2),
    (SystemSpec("separable-odd", (1, 2), (1, 2), e_scaled=True), 9),
    (SystemSpec("separable-even", (1,), (1,), saddle_beta=4, e_scaled=True), 4),
])
def test_ledger_sizes(spec, count):
    ledger = critical_energy_ledger(spec)
    assert len(ledger.entries) == count
    assert ledger.entries[0].h == 0.0
    assert math.isfinite(ledger.upper) == spec.even
    assert ledger.upper > ledger.h_last


def test_certify_small():
    v = certify_example_family(1, "odd")
    assert v.distinct and v.details["F"] == ["0", "1/12"]
    v = certify_example_family(2, "odd")
    f = [Fr(s) for s in v.details["F"]]
    assert f[0] < f[1] < f[2]
    v = certify_example_family(2, "even")
    assert v.distinct and v.dominance_ok


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("parity", ["odd", "even"])
def test_predicted_order_matches_numeric(k, parity):
    m = k if parity == "odd" else k - 1
    grid = tuple(range(1, m + 1))
    saddle = k * k if parity == "even" else None
    spec = SystemSpec(f"separable-{parity}", grid, grid, 0.0, saddle, True)
    assert certify(spec).distinct
    ledger = critical_energy_ledger(spec)
    numeric = [(round(e.source.x / math.e), round(e.source.y)) for e in ledger.entries]
    assert numeric == predicted_order(k, parity)


def test_e_bounds():
    lo, hi = e_bounds()
    # the double nearest e lies below e, so compare widths and values
    assert lo < hi and hi - lo < Fr(1, 10 ** 20)
    assert float(lo) == float(hi) == math.e


def test_certify_rejects_other_specs(fig4):
    with pytest.raises(SpecError):
        certify(fig4)
