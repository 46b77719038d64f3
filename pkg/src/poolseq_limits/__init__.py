"""Pooled-DNA sequencing: simulation, assembly, denoising, and error bounds."""

from .core import (AlleleLaw, CapacityError, Empirical, EtaValue,
                   FixedBiallelic, FixedEta, ModelConfig, RandomStream,
                   UnsupportedModelError, ValidationError, eta_from_law,
                   sample_poisson_positions)
from .simulate import (Population, ReadSet, apply_noise,
                       discriminating_positions, generate_population,
                       generate_reads)
from .assemble import (ConditionReport, Contig, check_bridging,
                       check_conditions, check_coverage, greedy_assemble,
                       score_assembly, unique_and_correct)
from .noiseless_bounds import (BoundReport, assembly_bounds, bridging_bounds,
                               coverage_bounds, coverage_single, delta_m,
                               lambda_lower, p_m)
from .denoise import (DenoiseBlock, HypothesisSet, build_correlation_graph,
                      majority_vote, ml_denoise, observation_likelihood,
                      spectral_denoise)
from .noisy_bounds import (ExponentTable, SegmentationPlan,
                           SpectralBoundParams, disc_upper, exponent_closed,
                           exponent_numeric, exponent_table, den_ml_upper,
                           noisy_upper_ml, noisy_upper_spectral,
                           spectral_noise_ceiling, spectral_quantities)
from .exact_bridging import (BridgingEstimate, ChainState, Terminated,
                             estimate_bridging, p_fail_step, sample_transition)

__version__ = "0.1.0"
