"""Analytic solutions of noncommutative coboundary equations over the integrable twist map."""
from .cohomology import residual_commutative, solve_commutative, solve_commutative_series
from .conditions import (cpoc_defect, cpoc_report, enumerate_periodic_actions, fc_defect, fc_report,
                         poc_defect, poc_report)
from .errors import (CoboundaryError, DomainError, FCViolation, LogDomainError, NoConvergence,
                     NonSolvable, PreconditionViolation, SingularMatrixError, SpecMismatch)
from .field import AngleActionField, DomainSpec, EpsSeriesField, compose_f, conjugate, load, save
from .nashmoser import (Schedule, choose_rescaling, conjugacy_defect, find_gamma0, gamma_schedule,
                        iterate_step, rescale_eps, run)

__version__ = "0.1.0"
