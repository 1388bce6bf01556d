"""Swarm-learned adaptive feedback policies for interferometric phase estimation."""

from .channel import ChannelDraw, NoiseKind, NoiseModel, RngStream, rotation_matrix, visibility
from .evaluate import (ScalingFit, SharpnessEstimate, TrialRecord, exact_sharpness,
                       fit_scaling, holevo_variance, merge_sharpness, run_trial,
                       sample_sharpness)
from .gls import (ControllerState, GlsPolicy, PhaseEstimate, export_decision_tree,
                  final_estimate, initial_state, ls_policy, on_loss, on_measurement)
from .pso import PsoConfig, bootstrap_init, optimize_policy, ring_neighborhood, sweep
from .symstate import (ExtractionResult, SymmetricState, WignerDArgs, collapse,
                       extract_one_qubit, make_optimal_input_state,
                       make_product_zero_state, wigner_d)

__version__ = "0.1.0"
