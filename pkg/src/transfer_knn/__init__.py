"""Nonparametric transfer learning under covariate shift with k-NN classifiers."""
from .adaptive import (
    AdaptiveConfig,
    LepskiTrace,
    check_envelope,
    cover_based_classifier,
    lepski_batch,
    lepski_classify,
)
from .classifier import (
    BatchPartition,
    PooledModel,
    RateSpec,
    check_bias_lemma,
    eta_hat,
    fit_pooled,
    make_batch_partition,
    optimal_k,
    predict,
    rate_exponent,
)
from .core import MetricSpace, NnIndex, TransferSample, ball_count, knn_indices, linf_distance
from .cover import CoverIndex, build_cover, is_k2k_cover, requested_labels
from .diagnostics import GammaEstimate, RateFit, estimate_gamma, fit_rate
from .harness import ExperimentConfig, RateRecord, emit_plot_script, read_records, run_sweep, write_records
from .synth import (
    FamilyParams,
    LowerBoundSpec,
    TransferFamily,
    excess_error_mc,
    make_dimension_gap_family,
    make_disjoint_support_family,
    make_family,
    make_lowerbound_family,
    make_margin_singularity_family,
)

__version__ = "0.1.0"
