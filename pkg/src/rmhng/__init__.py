"""Recursive Metropolis-Hastings naming game for N agents with Gaussian-mixture
perceptual models."""

from .data import Dataset, generate_clustered_fixture, generate_synthetic, load_feature_file, save_feature_file
from .errors import (
    ConfigError,
    DegenerateDistributionError,
    FeatureFileError,
    InconsistentCountError,
    NotPositiveDefiniteError,
)
from .game import (
    ExchangeCounter,
    GameConfig,
    GameTrace,
    Method,
    mh_communicate,
    mh_receive,
    play,
    rmh_communicate,
    run_game,
    run_gibbs_topline,
    run_no_communication,
)
from .harness import ExperimentConfig, emit_outputs, load_config, run_experiment, run_timing_sweep
from .kernels import GaussianParams, RngStream, log_gaussian_density, sample_categorical, sample_gaussian, sample_wishart
from .metrics import adjusted_rand_index, collect_sign_counts, kappa_coefficient, posterior_agreement
from .model import (
    AgentState,
    ComponentParams,
    Hyperparams,
    init_agents,
    log_joint_sign_likelihood,
    sample_sign_proposal,
    sample_theta_posterior,
)

__version__ = "0.1.0"
