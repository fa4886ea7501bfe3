"""Critical periods of planar polynomial Hamiltonian centers."""
from .critical import (BoundReport, CriticalPoint, PeriodCurve, build_h_grid,
                       detect_critical_points, peak_growth_probe, sample_curve,
                       tail_exponent, verify_bound)
from .energy import (EnergyLedger, HypothesisViolation, certify, certify_example_family,
                     check_hypothesis_numeric, critical_energy_ledger, singular_points)
from .estimators import CriticalPeriodFinder, PeriodFunction
from .orbit import (linearized_period, period_quadrature_potential, period_return_time,
                    trace_orbit, turning_point)
from .poly import (HamiltonianPair, RationalPoly, SpecError, SystemSpec, antiderivative,
                   build_potential, build_separable, hamiltonian_for)

__version__ = "0.1.0"
