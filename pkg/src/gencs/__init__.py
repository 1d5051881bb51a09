"""Compressed sensing with ReLU generative priors and coherence-adapted sampling."""
from ._accel import HAVE_NUMBA, backend
from .coherence import (CoherenceError, CoherenceVector, coherence_exact_pieces, coherence_exact_subspace,
                        coherence_heuristic, load_coherence, orthonormal_basis,
                        piecewise_expansion_properties_check, save_coherence)
from .generative import (ActivationPiece, GenerativeNetwork, NetworkError, activation_pattern,
                         effective_map, enumerate_pieces, forward, latent_gradient, load_net,
                         low_frequency_net, piece_count_bound, random_gaussian_init, save_net)
from .recovery import (SUCCESS_RRE, MeasurementSet, RecoveryConfig, RecoveryError, RecoveryResult,
                       error_bound_rhs, measure, objective, objective_gradient, recover, rre)
from .sampling import (Preconditioner, ProbabilityVector, SamplingError, SamplingPlan, build_preconditioner,
                       draw_blocked_plan, draw_plan, mu, optimal_probabilities, sample_complexity, uniform,
                       verify_p_star_optimality)
from .transforms import (TransformError, UnitaryOperator, adjoint_apply, apply, dense, dft1d, dft2d,
                         hadamard, identity, parse_transform, row, rows)
from .verification import (RIP_THRESHOLD, VerificationError, isotropy_check, rip_deviation_cone,
                           rip_deviation_subspace, theorem1_end_to_end, wilson_interval)

__version__ = "0.1.0"
