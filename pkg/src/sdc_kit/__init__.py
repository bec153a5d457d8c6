"""Fast-wave slow-wave spectral deferred correction with model problems and convergence studies."""
from .collocation import (CollocationTable, NodeFamily, PreconditionerKind, PreconditionerMatrix,
                          QDeltaType, Role, build_final_weights, build_preconditioner, build_q_matrix,
                          collocation_table, generate_nodes)
from .errors import (DegenerateFit, DegenerateNodes, DimensionMismatch, InvalidFinalUpdate,
                     NoConvergence, NonFiniteState, RoleMismatch, SingularSystem, UnsupportedNodeCount)
from .imex import ImexSystem, SolverTolerances, SolveStats, default_solve_implicit, residual_norm
from .problems import AcousticAdvection1D, Advection1D, DahlquistTwoRate, GravityWave2D
from .reference import ssprk3_integrate, ssprk3_step
from .sdc import (FinalUpdate, InitialGuess, NodeStates, SdcConfig, StepReport, finalize,
                  initial_guess, integrate, solve_collocation_direct, step, sweep)

__version__ = "0.1.0"
