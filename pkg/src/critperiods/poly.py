"""Polynomial families and their Hamiltonians.

Two coefficient tracks are kept side by side: exact ``Fraction``
coefficients whenever every parameter is rational, and a float shadow used
by the compiled kernels. Systems whose roots sit on the grid ``e * i`` have
no exact track for ``G``; their rational structure ``G(x) = e^p R(x / e)``
is recorded instead so that energy distinctness can be certified without
approximating ``e``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np

from . import _kernels

FAMILIES = ("potential-odd", "potential-even", "separable-odd", "separable-even")
MAX_K = {"potential": 6, "separable": 4}


class SpecError(ValueError):
    """Raised for parameter sets that violate a family's invariants."""


def as_fraction(value) -> Fraction:
    """Exact rational for ints, Fractions and decimal-looking floats.

    Floats go through their shortest repr so ``0.001`` becomes ``1/1000``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    value = float(value)
    if not math.isfinite(value):
        raise SpecError(f"non-finite parameter {value!r}")
    return Fraction(repr(value))


def _trim(coeffs):
    coeffs = list(coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


@dataclass(frozen=True)
class RationalPoly:
    """Dense polynomial with exact rational coefficients, lowest degree first."""

    coeffs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs",
                           _trim(as_fraction(c) for c in self.coeffs))

    @classmethod
    def from_factors(cls, linear=(), quadratic=(), eps=0, scale=1):
        """scale * z * prod(z - r for r in linear) * prod((z - q)^2 + eps)."""
        p = cls((0, scale))
        for r in linear:
            p = p * cls((-as_fraction(r), 1))
        eps = as_fraction(eps)
        for q in quadratic:
            q = as_fraction(q)
            p = p * cls((q * q + eps, -2 * q, 1))
        return p

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def shadow(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs], dtype=float)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, x):
        if isinstance(x, (Rational, Fraction)):
            acc = Fraction(0)
            for c in reversed(self.coeffs):
                acc = acc * x + c
            return acc
        if np.ndim(x):
            return _kernels.comp_horner_many(self.shadow,
                                             np.asarray(x, dtype=float))
        return float(_kernels.comp_horner(self.shadow, float(x)))

    def derivative(self) -> RationalPoly:
        return RationalPoly(i * c for i, c in enumerate(self.coeffs) if i)

    def antiderivative(self) -> RationalPoly:
        return antiderivative(self)

    def __add__(self, other):
        a, b = self.coeffs, other.coeffs
        n = max(len(a), len(b))
        a = a + (Fraction(0),) * (n - len(a))
        b = b + (Fraction(0),) * (n - len(b))
        return RationalPoly(x + y for x, y in zip(a, b))

    def __neg__(self):
        return RationalPoly(-c for c in self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, RationalPoly):
            other = RationalPoly((other,))
        if self.is_zero() or other.is_zero():
            return RationalPoly()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return RationalPoly(out)

    __rmul__ = __mul__

    def __str__(self):
        if self.is_zero():
            return "0"
        terms = []
        for i, c in enumerate(self.coeffs):
            if c:
                terms.append(f"{c}" + ("" if i == 0 else f"*x^{i}"))
        return " + ".join(reversed(terms))


def antiderivative(p: RationalPoly) -> RationalPoly:
    """Antiderivative vanishing at zero, term by term in exact arithmetic."""
    return RationalPoly((0,) + tuple(c / (i + 1) for i, c in enumerate(p.coeffs)))


@dataclass(frozen=True)
class FloatPoly:
    """Float-only polynomial used when coefficients are irrational."""

    coeffs: tuple = ()

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def shadow(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=float)

    def __call__(self, x):
        if np.ndim(x):
            return _kernels.comp_horner_many(self.shadow,
                                             np.asarray(x, dtype=float))
        return float(_kernels.comp_horner(self.shadow, float(x)))


@dataclass(frozen=True)
class Factor:
    """One side of the Hamiltonian: q(z) = z prod((z - r)^2 + eps) (saddle - z).

    ``Q`` is its antiderivative with Q(0) = 0. Roots are the actual real
    values (already multiplied by e for e-scaled systems).
    """

    roots: tuple
    eps: float
    saddle: float | None
    Q: RationalPoly | FloatPoly
    q: RationalPoly | FloatPoly
    exact: bool

    @property
    def roots_array(self) -> np.ndarray:
        return np.array(self.roots, dtype=float)

    @property
    def saddle_value(self) -> float:
        return math.nan if self.saddle is None else float(self.saddle)

    def rate(self, z):
        """q evaluated in factored form (accurate near its zeros)."""
        if np.ndim(z):
            return _kernels.factored_many(np.asarray(z, dtype=float),
                                          self.roots_array, self.eps,
                                          self.saddle_value)
        return float(_kernels.factored(float(z), self.roots_array, self.eps,
                                       self.saddle_value))

    def slope_at_origin(self) -> float:
        v = 1.0
        for r in self.roots:
            v *= r * r + self.eps
        if self.saddle is not None:
            v *= self.saddle
        return v


@dataclass(frozen=True)
class SystemSpec:
    """Parameters of one member of the four families.

    With ``e_scaled`` set, ``betas`` and ``saddle_beta`` are integer grid
    multipliers of e (the x-roots are ``e * i``); ``alphas`` stay as given.
    """

    family: str
    betas: tuple = ()
    alphas: tuple = ()
    epsilon: float = 0.0
    saddle_beta: float | None = None
    e_scaled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(self.betas))
        object.__setattr__(self, "alphas", tuple(self.alphas))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        if self.family not in FAMILIES:
            raise SpecError(f"unknown family {self.family!r}; "
                            f"expected one of {', '.join(FAMILIES)}")
        if not self.epsilon >= 0.0 or not math.isfinite(self.epsilon):
            raise SpecError("epsilon must be finite and >= 0")
        _check_roots("betas", self.betas)
        _check_roots("alphas", self.alphas)
        if self.kind == "potential" and self.alphas:
            raise SpecError("potential systems take no alphas")
        if self.even:
            if self.saddle_beta is None:
                raise SpecError("even-degree families need saddle_beta")
            s = float(self.saddle_beta)
            if not s > 0:
                raise SpecError("saddle_beta must be positive (origin must be a center)")
            if any(abs(float(b)) >= s for b in self.betas):
                raise SpecError("saddle_beta must exceed every |beta| in magnitude")
        elif self.saddle_beta is not None:
            raise SpecError("saddle_beta only applies to even-degree families")
        if self.kind == "separable":
            if len(self.alphas) != len(self.betas):
                raise SpecError("separable systems need as many alphas as betas")
            if not self.even and not self.alphas:
                raise SpecError("separable family requires k >= 1 alphas")
        if self.k > MAX_K[self.kind]:
            raise SpecError(f"k={self.k} exceeds the supported range "
                            f"k <= {MAX_K[self.kind]} for {self.kind} systems")

    @property
    def kind(self) -> str:
        return self.family.split("-")[0]

    @property
    def even(self) -> bool:
        return self.family.endswith("even")

    @property
    def k(self) -> int:
        return len(self.betas) + (1 if self.even else 0)

    @property
    def beta_values(self) -> tuple:
        if self.e_scaled:
            return tuple(math.e * float(b) for b in self.betas)
        return tuple(float(b) for b in self.betas)

    @property
    def saddle_value(self) -> float | None:
        if self.saddle_beta is None:
            return None
        return math.e * float(self.saddle_beta) if self.e_scaled else float(self.saddle_beta)

    @property
    def alpha_values(self) -> tuple:
        return tuple(float(a) for a in self.alphas)

    def with_epsilon(self, epsilon: float) -> SystemSpec:
        return SystemSpec(self.family, self.betas, self.alphas, epsilon,
                          self.saddle_beta, self.e_scaled)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "alphas": [_jsonable(a) for a in self.alphas],
            "betas": [_jsonable(b) for b in self.betas],
            "epsilon": self.epsilon,
            "saddle_beta": None if self.saddle_beta is None else _jsonable(self.saddle_beta),
            "e_scaled": self.e_scaled,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> SystemSpec:
        known = {"family", "alphas", "betas", "epsilon", "saddle_beta", "e_scaled"}
        extra = set(doc) - known
        if extra:
            raise SpecError(f"unknown keys in system spec: {sorted(extra)}")
        return cls(doc["family"], doc.get("betas", ()), doc.get("alphas", ()),
                   doc.get("epsilon", 0.0), doc.get("saddle_beta"),
                   bool(doc.get("e_scaled", False)))

    @classmethod
    def from_json(cls, text: str) -> SystemSpec:
        return cls.from_dict(json.loads(text))


def _jsonable(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else float(v)
    return v


def _check_roots(name, values):
    vals = [as_fraction(v) for v in values]
    if any(v == 0 for v in vals):
        raise SpecError(f"{name} must be nonzero")
    if len(set(vals)) != len(vals):
        raise SpecError(f"{name} must be pairwise distinct")


@dataclass(frozen=True)
class HamiltonianPair:
    """H(x, y) = F(y) + G(x) with G' = g and F' = f."""

    G: Factor
    F: Factor
    exactness_flag: bool
    e_power: int | None = None
    scaled_G: RationalPoly | None = field(default=None, compare=False)

    def value(self, x, y):
        return hamiltonian_value(self, x, y)


def _make_factor(roots, eps, saddle, exact_roots=None, exact_saddle=None):
    """Build a Factor; exact track when ``exact_roots`` is given."""
    saddle_f = None if saddle is None else float(saddle)
    if exact_roots is not None:
        linear = () if exact_saddle is None else (exact_saddle,)
        scale = 1 if exact_saddle is None else -1
        q = RationalPoly.from_factors(linear, exact_roots, eps, scale)
        return Factor(tuple(float(r) for r in roots), float(eps), saddle_f,
                      antiderivative(q), q, True)
    # expand the float-rounded roots exactly, then round the coefficients
    linear = () if saddle is None else (Fraction(float(saddle)),)
    scale = 1 if saddle is None else -1
    q = RationalPoly.from_factors(linear, [Fraction(float(r)) for r in roots],
                                  Fraction(float(eps)), scale)
    Q = antiderivative(q)
    return Factor(tuple(float(r) for r in roots), float(eps), saddle_f,
                  FloatPoly(tuple(float(c) for c in Q.coeffs)),
                  FloatPoly(tuple(float(c) for c in q.coeffs)), False)


def _x_factor(spec: SystemSpec) -> tuple[Factor, int | None, RationalPoly | None]:
    eps = as_fraction(spec.epsilon)
    if spec.e_scaled:
        G = _make_factor(spec.beta_values, spec.epsilon, spec.saddle_value)
        # G(x) = e^p R(x / e) at eps = 0
        lin = () if spec.saddle_beta is None else (as_fraction(spec.saddle_beta),)
        scale = 1 if spec.saddle_beta is None else -1
        r = RationalPoly.from_factors(lin, [as_fraction(b) for b in spec.betas], 0, scale)
        power = r.degree + 1
        return G, power, antiderivative(r)
    sad = None if spec.saddle_beta is None else as_fraction(spec.saddle_beta)
    G = _make_factor(spec.beta_values, eps, spec.saddle_value,
                     [as_fraction(b) for b in spec.betas], sad)
    return G, None, None


def build_potential(betas: Sequence = (), epsilon=0.0, saddle_beta=None,
                    e_scaled: bool = False) -> tuple[SystemSpec, HamiltonianPair]:
    """x' = y, y' = -g(x, eps); F(y) = y^2 / 2."""
    family = "potential-odd" if saddle_beta is None else "potential-even"
    spec = SystemSpec(family, tuple(betas), (), epsilon, saddle_beta, e_scaled)
    return spec, hamiltonian_for(spec)


def build_separable(alphas: Sequence, betas: Sequence, epsilon=0.0,
                    saddle_beta=None, e_scaled: bool = False
                    ) -> tuple[SystemSpec, HamiltonianPair]:
    """x' = f(y, eps), y' = -g(x, eps) with H = F(y) + G(x)."""
    family = "separable-odd" if saddle_beta is None else "separable-even"
    spec = SystemSpec(family, tuple(betas), tuple(alphas), epsilon, saddle_beta,
                      e_scaled)
    return spec, hamiltonian_for(spec)


def hamiltonian_for(spec: SystemSpec) -> HamiltonianPair:
    G, power, scaled = _x_factor(spec)
    eps = as_fraction(spec.epsilon)
    F = _make_factor(spec.alpha_values, eps, None,
                     [as_fraction(a) for a in spec.alphas])
    return HamiltonianPair(G, F, G.exact and F.exact, power, scaled)


def hamiltonian_value(pair: HamiltonianPair, x, y):
    """F(y) + G(x); exact when the pair is exact and both inputs are rational."""
    exact_in = isinstance(x, (Rational, Fraction)) and isinstance(y, (Rational, Fraction))
    if pair.exactness_flag and exact_in:
        return pair.F.Q(Fraction(y)) + pair.G.Q(Fraction(x))
    return pair.F.Q(float(y)) + pair.G.Q(float(x))
