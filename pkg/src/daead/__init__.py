"""Structural analysis, dummy derivatives and Lagrangian modelling for DAEs."""
from .adjoint import AdjointScalar, Tape, backprop, record
from .dae import DaeSystem
from .dummy import (AugmentedSystem, DDScheme, ReducedOde, augment, dd_switch, reduced_ode_eval,
                    select_state_vector, validate_dd_spec)
from .errors import (ChartFailure, ConvergenceError, DaeError, InconsistentInitialConditionError,
                     InsufficientOrderError, IntegrationError, NotSAFriendlyError, OffsetIterationError,
                     SingularEvaluationError, StructurallySingularError, StructureError, TapeUsageError)
from .integrate import (IvpConfig, Trajectory, consistent_initialize, dense_output, reduce_and_integrate,
                        rk_integrate, taylor_integrate)
from .lagrangian import LagrangianSpec, init_q_qp, second_kind_reference, setup_equations, to_dae
from .problems import REGISTRY, get_problem
from .structural import (analyze, canonical_offsets, highest_value_transversal, index_and_dof,
                         sa_friendly_check, signature_matrix, system_jacobian)
from .taylor import TaylorScalar, coeff_deriv_convert

__version__ = "0.1.0"
