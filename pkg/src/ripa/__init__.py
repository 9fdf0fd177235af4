"""Yosida-regularized inertial dynamics and the regularized inertial proximal algorithm."""

from .operators import (AffineOperator, MonotoneOperator, OperatorError, ProxOperator,
                        QuadraticData, Rotation2D, YosidaView, ZeroOperator,
                        build_saddle_operator, resolvent, solve_kkt, yosida,
                        yosida_view_resolvent)
from .schedules import Constant, CustomSource, NoSource, PowerDecay, PowerLaw, QuadraticTime
from .trajectory import Trajectory
from .dynamics import (ContinuousConfig, IntegrationError, reduce_to_first_order,
                       simulate_first_order, simulate_second_order)
from .solver import DiscreteConfig, IterationState, classical_step, ripa_step, run
from .spectral import classify_rate, rotation_eigenvalues

__version__ = "0.1.0"
