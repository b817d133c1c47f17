"""Measure-valued jump-process simulation and deterministic limit solvers.

The package has three layers.  ``measures``, ``flows`` and ``engine``
implement a generic piecewise deterministic process on atomic measures:
deterministic flow between jumps, exact or thinned jump clocks, and a
generator probe for martingale statistics.  ``models`` ships four concrete
population models on top of that engine.  ``limits``, ``audit`` and
``harness`` solve the corresponding large-population equations, check model
assumptions, and run reproducible Monte Carlo ensembles that compare the
two sides.
"""

from .measures import (AtomicMeasure, Individual, TestFunction,
                       NegativeMassError, pair, total_mass, panel_distance,
                       indicator, constant, trait_moment, gaussian_bump)
from .flows import (Frozen, Translate, VectorField, StepControl, DomainExit,
                    advance_measure, generator_apply)
from .engine import (ChannelSpec, CompartmentSpec, ModelSpec, RecordSpec,
                     Trajectory, BoundViolation, ExplosionGuard,
                     simulate, martingale_probe, sample_jump_time,
                     total_rate)
from .models import (build_sir, build_sir_unscaled, build_age_sir,
                     build_host_pathogen,
                     build_bell_anderson, default_bell_anderson,
                     default_age_profiles, LogNormalJitter,
                     pathogen_first_integral, initial_measure,
                     model_from_config, InvalidParam)
from .limits import (LimitSolution, GridError, CFLViolation,
                     solve_sir_ode, solve_age_sir_pde,
                     solve_bell_anderson_pde, solve_host_pathogen_particles,
                     residual_check)
from .audit import AuditReport, audit_assumptions
from .harness import (ExperimentConfig, ConvergenceReport, EnsembleResult,
                      InsufficientLevels, run_ensemble, lln_report,
                      moment_report, martingale_report)

__version__ = "1.0.0"
