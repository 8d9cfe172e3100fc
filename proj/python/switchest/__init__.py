"""Joint mode, unknown-input and state estimation for switched linear systems."""

from ._switchest import (
    ConfigError,
    ContinuousModeModel,
    DecomposedModeModel,
    DegenerateInnovation,
    DegenerateUpdate,
    DiscreteModeModel,
    Error,
    FilterState,
    InvalidModel,
    NoConvergence,
    NoSteadyState,
    NumericalBreakdown,
    RankDeficient,
    SteadyGains,
    Unstable,
    WellPosedness,
    decompose,
    diagnose,
    discretize_zoh,
    expand_config,
    filter_init,
    filter_step,
    kl_divergence,
    kl_report,
    log_likelihood,
    lyapunov_limit,
    simulate_and_estimate,
    steady_state_gains,
    update_probabilities,
)

__version__ = "0.1.0"
