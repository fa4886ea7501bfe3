"""Singularities, the critical-energy ledger and the distinctness checks."""
from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction

from .poly import (HamiltonianPair, RationalPoly, SpecError, SystemSpec,
                   antiderivative, as_fraction, hamiltonian_for)

DEFAULT_TOL = 1e-9


class HypothesisViolation(SpecError):
    """Two critical energies coincide; carries the colliding pair."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class PerturbedSystemError(SpecError):
    pass


@dataclass(frozen=True)
class Singularity:
    x: float
    y: float
    kind: str  # center | cusp | saddle | degenerate
    energy: float
    energy_exact: Fraction | None = None

    def to_dict(self):
        return {"x": self.x, "y": self.y, "kind": self.kind}


@dataclass(frozen=True)
class LedgerEntry:
    h: float
    h_exact: Fraction | None
    source: Singularity

    def to_dict(self):
        exact = None
        if self.h_exact is not None:
            exact = f"{self.h_exact.numerator}/{self.h_exact.denominator}"
        return {"h": self.h, "h_exact": exact, "source": self.source.to_dict()}


@dataclass(frozen=True)
class EnergyLedger:
    """Critical energies of the eps = 0 skeleton, ascending.

    ``upper`` is the saddle-loop energy bounding the annulus for even
    families and ``inf`` otherwise.
    """

    entries: tuple
    upper: float
    upper_exact: Fraction | None
    min_gap: float
    spec: SystemSpec

    @property
    def energies(self) -> list[float]:
        return [e.h for e in self.entries]

    @property
    def interior(self) -> list[float]:
        """Entries other than the center energy."""
        return [e.h for e in self.entries[1:]]

    @property
    def intervals(self) -> list[tuple[float, float]]:
        hs = self.energies + [self.upper]
        return list(zip(hs[:-1], hs[1:]))

    @property
    def h_last(self) -> float:
        return self.entries[-1].h

    def to_json(self) -> str:
        return json.dumps([e.to_dict() for e in self.entries])

    def to_dict(self):
        return {
            "entries": [e.to_dict() for e in self.entries],
            "upper": None if math.isinf(self.upper) else self.upper,
            "min_gap": self.min_gap,
        }


@dataclass(frozen=True)
class HypothesisVerdict:
    distinct: bool
    method: str  # numeric-gap | exact-rational-pairs
    min_gap: float
    witness: tuple | None = None
    dominance_ok: bool | None = None
    details: dict | None = None

    def to_dict(self):
        return {
            "distinct": self.distinct,
            "method": self.method,
            "min_gap": self.min_gap,
            "witness": None if self.witness is None else
            [w.to_dict() for w in self.witness],
            "dominance_ok": self.dominance_ok,
        }


def _energy(pair: HamiltonianPair, spec: SystemSpec, i: int, j: int):
    """H at grid point (beta_i, alpha_j) with index 0 meaning the axis."""
    bx = (Fraction(0),) + _exact(spec.betas)
    ay = (Fraction(0),) + _exact(spec.alphas)
    if pair.exactness_flag:
        h = pair.F.Q(ay[j]) + pair.G.Q(bx[i])
        return float(h), h
    fj = pair.F.Q(ay[j])
    if pair.e_power is not None and spec.epsilon == 0.0:
        # e^p R(i) + F(j) with R and F exact
        return float(fj) + math.e ** pair.e_power * float(pair.scaled_G(bx[i])), None
    xs = (0.0,) + spec.beta_values
    return float(fj) + pair.G.Q(xs[i]), None


def _exact(values):
    return tuple(as_fraction(v) for v in values)


def singular_points(spec: SystemSpec) -> list[Singularity]:
    """Equilibria of the eps = 0 system with pattern-based kinds."""
    if spec.epsilon > 0:
        raise PerturbedSystemError(
            "perturbed system has a unique equilibrium (a global center); "
            "singular points are defined for epsilon = 0")
    pair = hamiltonian_for(spec)
    xs = (0.0,) + spec.beta_values
    ys = (0.0,) + spec.alpha_values
    out = []
    for i, j in itertools.product(range(len(xs)), range(len(ys))):
        if i == 0 and j == 0:
            kind = "center"
        elif i == 0 or j == 0:
            kind = "cusp"
        else:
            kind = "degenerate"
        h, he = _energy(pair, spec, i, j)
        out.append(Singularity(xs[i], ys[j], kind, h, he))
    if spec.even:
        s = spec.saddle_value
        hs, hse = _saddle_energy(pair, spec)
        out.append(Singularity(s, 0.0, "saddle", hs, hse))
        for j in range(1, len(ys)):
            fj = pair.F.Q(_exact((0,) + spec.alphas)[j])
            he = None if hse is None else hse + fj
            out.append(Singularity(s, ys[j], "degenerate", hs + float(fj), he))
    return out


def _saddle_energy(pair: HamiltonianPair, spec: SystemSpec):
    if pair.G.exact:
        v = pair.G.Q(as_fraction(spec.saddle_beta))
        return float(v), v
    if pair.e_power is not None:
        return math.e ** pair.e_power * float(
            pair.scaled_G(as_fraction(spec.saddle_beta))), None
    return float(pair.G.Q(spec.saddle_value)), None


def critical_energy_ledger(spec: SystemSpec, *, strict: bool = True,
                           tol: float = DEFAULT_TOL) -> EnergyLedger:
    """Sorted energies of the skeleton's center, cusps and degenerate points.

    With ``strict`` a collision raises :class:`HypothesisViolation` unless the
    exact energies are provably distinct.
    """
    skeleton = spec.with_epsilon(0.0)
    points = [p for p in singular_points(skeleton)
              if p.kind != "saddle" and not (spec.even and p.x == skeleton.saddle_value)]
    points.sort(key=lambda p: (p.energy_exact if p.energy_exact is not None else p.energy,
                               p.energy))
    entries = tuple(LedgerEntry(p.energy, p.energy_exact, p) for p in points)
    gap, pair = _min_gap(entries)
    if spec.even:
        upper, upper_exact = _saddle_energy(hamiltonian_for(skeleton), skeleton)
    else:
        upper, upper_exact = math.inf, None
    ledger = EnergyLedger(entries, upper, upper_exact, gap, spec)
    if strict and pair is not None:
        a, b = pair
        if a.h_exact is not None and b.h_exact is not None:
            collided = a.h_exact == b.h_exact
        else:
            collided = gap <= tol * max(1.0, abs(entries[-1].h))
        if collided:
            raise HypothesisViolation(
                f"critical energies collide: H{(a.source.x, a.source.y)} = "
                f"H{(b.source.x, b.source.y)} = {a.h!r}",
                witness=(a.source, b.source))
    return ledger


def _min_gap(entries):
    if len(entries) < 2:
        return math.inf, None
    best = math.inf
    pair = None
    for a, b in zip(entries, entries[1:]):
        if a.h_exact is not None and b.h_exact is not None:
            g = float(b.h_exact - a.h_exact)
        else:
            g = b.h - a.h
        if g < best:
            best = g
            pair = (a, b)
    return best, pair


def check_hypothesis_numeric(ledger: EnergyLedger,
                             tol: float = DEFAULT_TOL) -> HypothesisVerdict:
    """Gap test on the ledger; for even families also the dominance test."""
    gap, pair = _min_gap(ledger.entries)
    scale = max(1.0, max(abs(e.h) for e in ledger.entries))
    distinct = gap > tol * scale
    witness = None if distinct or pair is None else (pair[0].source, pair[1].source)
    dominance = None
    if ledger.spec.even:
        dominance = abs(ledger.upper) > max(abs(e.h) for e in ledger.entries)
    return HypothesisVerdict(distinct, "numeric-gap", gap, witness, dominance)


def generalized_condition(ledger: EnergyLedger, tol: float = DEFAULT_TOL) -> bool:
    """Weaker sufficient condition: nonzero, mutually distinct cusp energies
    (plus saddle dominance for even families). Equivalent to the gap test
    at ledger level.
    """
    scale = max(1.0, max(abs(e.h) for e in ledger.entries))
    cusp = [e.h for e in ledger.entries[1:]]
    if any(abs(h) <= tol * scale for h in cusp):
        return False
    verdict = check_hypothesis_numeric(ledger, tol)
    if not verdict.distinct:
        return False
    return verdict.dominance_ok is not False


# -- exact certification for the e-scaled examples ---------------------------

def _grid_poly(k_roots: int, saddle: int | None = None) -> RationalPoly:
    lin = () if saddle is None else (saddle,)
    scale = 1 if saddle is None else -1
    return antiderivative(RationalPoly.from_factors(lin, range(1, k_roots + 1), 0, scale))


def e_bounds(terms: int = 25) -> tuple[Fraction, Fraction]:
    """Rational enclosure of e from the exponential series."""
    low = Fraction(0)
    fact = 1
    for n in range(terms + 1):
        if n:
            fact *= n
        low += Fraction(1, fact)
    return low, low + Fraction(1, fact * terms)


def certify_example_family(k: int, parity: str) -> HypothesisVerdict:
    """Exact certificate that the e-grid energies are mutually distinct.

    Energies are F(j) + e^p R(i) with rational F, R. Strict monotonicity of
    the rational sequences F(0..m), R(0..m) plus irrationality of e rules
    out every coincidence. For even parity the saddle-dominance inequality
    is checked through the rational chain A > B > D > C with
    A = R(k^2) - R(k-1), B = int_k^{2k-1} R', D = int_0^{k-1} s prod (s+k-i)^2,
    C = F(k-1), which gives e^p A > A > C.
    """
    if parity not in ("odd", "even"):
        raise ValueError("parity must be 'odd' or 'even'")
    if k < 1:
        raise SpecError("k must be >= 1")
    m = k if parity == "odd" else k - 1
    F = _grid_poly(m)
    R = F if parity == "odd" else _grid_poly(m, saddle=k * k)
    p = 2 * k + 2 if parity == "odd" else 2 * k + 1
    fseq = [F(Fraction(j)) for j in range(m + 1)]
    rseq = [R(Fraction(i)) for i in range(m + 1)]
    increasing = all(a < b for a, b in zip(fseq, fseq[1:])) and \
        all(a < b for a, b in zip(rseq, rseq[1:]))
    details = {"F": [str(v) for v in fseq], "R": [str(v) for v in rseq],
               "e_power": p}

    dominance = None
    if parity == "even":
        A = R(Fraction(k * k)) - R(Fraction(k - 1))
        C = F(Fraction(k - 1))
        chain = [A]
        if k >= 2:
            Rp = RationalPoly.from_factors((k * k,), range(1, m + 1), 0, -1)
            B = antiderivative(Rp)
            B = B(Fraction(2 * k - 1)) - B(Fraction(k))
            shifted = RationalPoly((1,))
            for i in range(1, k):
                shifted = shifted * RationalPoly((k - i, 1)) * RationalPoly((k - i, 1))
            D = antiderivative(shifted * RationalPoly((0, 1)))(Fraction(k - 1))
            chain += [B, D]
        chain.append(C)
        dominance = all(a > b for a, b in zip(chain, chain[1:])) and A > 0
        details["dominance_chain"] = [str(v) for v in chain]

    energies = sorted(float(fseq[j]) + math.e ** p * float(rseq[i])
                      for i in range(m + 1) for j in range(m + 1))
    gap = min((b - a for a, b in zip(energies, energies[1:])), default=math.inf)
    return HypothesisVerdict(increasing, "exact-rational-pairs", gap, None,
                             dominance, details)


def predicted_order(k: int, parity: str, terms: int = 25) -> list[tuple[int, int]]:
    """Order of the grid points (i, j) by energy, decided with a rational
    enclosure of e so no floating approximation of e enters.
    """
    m = k if parity == "odd" else k - 1
    F = _grid_poly(m)
    R = F if parity == "odd" else _grid_poly(m, saddle=k * k)
    p = 2 * k + 2 if parity == "odd" else 2 * k + 1
    lo, hi = e_bounds(terms)
    lo, hi = lo ** p, hi ** p
    boxes = {}
    for i in range(m + 1):
        for j in range(m + 1):
            r, f = R(Fraction(i)), F(Fraction(j))
            boxes[(i, j)] = (f + lo * r, f + hi * r)

    def before(a, b):
        if boxes[a][1] < boxes[b][0]:
            return -1
        if boxes[b][1] < boxes[a][0]:
            return 1
        raise ArithmeticError(f"enclosure of e too wide to order {a} and {b}")

    return sorted(boxes, key=functools.cmp_to_key(before))


def certify(spec: SystemSpec) -> HypothesisVerdict:
    """Dispatch exact certification for a spec shaped like the e-grid examples."""
    if not spec.e_scaled or spec.kind != "separable":
        raise SpecError("exact certification needs an e-scaled separable spec; "
                        "use check_hypothesis_numeric for other systems")
    m = len(spec.betas)
    grid = tuple(range(1, m + 1))
    if tuple(spec.betas) != grid or tuple(spec.alphas) != grid:
        raise SpecError("e-scaled spec does not follow the example grid "
                        "(alphas = betas = 1..m); use check_hypothesis_numeric")
    if spec.even:
        if spec.saddle_beta != spec.k ** 2:
            raise SpecError("even example grid needs saddle_beta = k^2")
        return certify_example_family(spec.k, "even")
    return certify_example_family(spec.k, "odd")
