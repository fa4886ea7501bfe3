"""Estimator-style wrappers: configure with parameters, ``fit`` to build the
system, then evaluate periods with ``predict``."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .critical import (CLUSTER_DECADES, CLUSTER_POINTS, EPS_START, GLOBAL_POINTS,
                       MAX_HALVINGS, verify_bound)
from .energy import critical_energy_ledger
from .orbit import linearized_period, period_quadrature_potential, period_return_time
from .poly import SystemSpec


def _spec_from_params(est, epsilon) -> SystemSpec:
    return SystemSpec(est.family, tuple(float(b) for b in est.betas),
                      tuple(float(a) for a in est.alphas), float(epsilon),
                      None if est.saddle_beta is None else float(est.saddle_beta),
                      bool(est.e_scaled))


def _energies(h) -> np.ndarray:
    arr = check_array(np.atleast_1d(np.asarray(h, dtype=float)).reshape(-1, 1),
                      ensure_all_finite=True)
    if np.any(arr <= 0):
        raise ValueError("energies must be positive")
    return arr.ravel()


class PeriodFunction(BaseEstimator):
    """The period function h -> T(h) of one system.

    ``method`` is "return-time" (any family) or "quadrature" (potential only).
    """

    def __init__(self, family="potential-odd", betas=(), alphas=(), epsilon=0.0,
                 saddle_beta=None, e_scaled=False, method="return-time", rtol=1e-11):
        self.family = family
        self.betas = betas
        self.alphas = alphas
        self.epsilon = epsilon
        self.saddle_beta = saddle_beta
        self.e_scaled = e_scaled
        self.method = method
        self.rtol = rtol

    def fit(self, X=None, y=None):
        if self.method not in ("return-time", "quadrature"):
            raise ValueError(f"unknown method {self.method!r}")
        self.spec_ = _spec_from_params(self, self.epsilon)
        if self.method == "quadrature" and self.spec_.kind != "potential":
            raise ValueError("quadrature needs a potential family")
        self.ledger_ = critical_energy_ledger(self.spec_, strict=False)
        self.linearized_period_ = linearized_period(self.spec_)
        return self

    def predict(self, X):
        check_is_fitted(self, "spec_")
        hs = _energies(X)
        if self.method == "quadrature":
            return np.array([period_quadrature_potential(self.spec_, h).T for h in hs])
        return np.array([period_return_time(self.spec_, h, rtol=self.rtol).T for h in hs])


class CriticalPeriodFinder(BaseEstimator):
    """Locates critical periods of the perturbed system and compares the
    count with the family's lower bound."""

    def __init__(self, family="potential-odd", betas=(), alphas=(), saddle_beta=None,
                 e_scaled=False, epsilon_start=EPS_START, max_halvings=MAX_HALVINGS,
                 global_points=GLOBAL_POINTS, cluster_points=CLUSTER_POINTS,
                 cluster_decades=CLUSTER_DECADES, n_jobs=1):
        self.family = family
        self.betas = betas
        self.alphas = alphas
        self.saddle_beta = saddle_beta
        self.e_scaled = e_scaled
        self.epsilon_start = epsilon_start
        self.max_halvings = max_halvings
        self.global_points = global_points
        self.cluster_points = cluster_points
        self.cluster_decades = cluster_decades
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        if not self.epsilon_start > 0:
            raise ValueError("epsilon_start must be positive")
        spec = _spec_from_params(self, 0.0)
        self.report_ = verify_bound(spec, epsilon_start=self.epsilon_start,
                                    max_halvings=self.max_halvings,
                                    global_points=self.global_points,
                                    cluster_points=self.cluster_points,
                                    cluster_decades=self.cluster_decades,
                                    n_jobs=self.n_jobs)
        self.spec_ = self.report_.spec
        self.critical_points_ = self.report_.critical_points
        return self

    def predict(self, X):
        """Periods of the perturbed system at the epsilon that was used."""
        check_is_fitted(self, "report_")
        return np.array([period_return_time(self.spec_, h).T for h in _energies(X)])

    def score(self, X=None, y=None):
        """Found over required (inf when the bound is vacuous)."""
        check_is_fitted(self, "report_")
        r = self.report_
        return float(r.found) / r.required if r.required else float("inf")
