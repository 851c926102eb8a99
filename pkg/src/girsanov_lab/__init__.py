"""girsanov-lab: Monte Carlo checks of Girsanov densities and path-space relative entropy."""

__version__ = "0.1.0"

from .entropy_core import (
    DiscreteDist,
    SearchConfig,
    dv_objective,
    dv_supremum,
    entropy_integrand,
    fenchel_gap,
    kl_divergence,
    optimal_potential,
    theta,
    theta_star,
)
from .estimates import EntropyEstimate
from .laws import Gaussian, PointMass
from .path_model import CadlagPath, JumpMark, TimeGrid, realized_qv, refine_with_jumps, stieltjes_integral
from .diffusion import (
    DiffusionSpec,
    DriftPerturbation,
    entropy_decomposition,
    entropy_plugin,
    exp_supermartingale_check,
    importance_sample,
    log_density,
    simulate_reference,
    simulate_tilted,
)
from .jumps import (
    DiscreteKernel,
    JumpSpec,
    TiltField,
    TruncatedPowerKernel,
    UniformKernel,
    alt_product_density,
    compensated_integral,
    entropy_decomposition_jump,
    entropy_plugin_jump,
    exp_martingale_jump_check,
    log_density_jump,
    simulate_reference_jumps,
    simulate_tilted_jumps,
    tau_minus_census,
)
from .orlicz import WeightedSample, energy_estimate, hpr_membership, luxemburg_norm, orlicz_holder_check
