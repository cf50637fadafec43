"""fedlsa: simulation and bootstrap-inference toolkit for federated linear
stochastic approximation."""

from .engine import (
    BootstrapEnsemble,
    FiniteOutcomeModel,
    SyntheticUniformModel,
    Trajectory,
    ZeroNoiseModel,
    run_bootstrap_ensemble,
    run_fedlsa,
)
from .environments import (
    GarnetSpec,
    Mdp,
    TdLsaModel,
    ToyProcess1d,
    garnet_td_federation,
    generate_garnet,
    perturb_mdp,
    stationary_distribution,
    synthetic_system,
    td_lsa_model,
    toy_variance,
)
from .covariance import (
    CovarianceSet,
    covariance_set,
    plugin_sigma_infinity,
    sigma_hat_t,
    sigma_infinity,
    sigma_t_full,
    solve_lyapunov,
)
from .inference import (
    ConfidenceInterval,
    CoverageResult,
    SimultaneousRegion,
    coverage,
    empirical_quantile,
    eq_interval,
    normal_quantile,
    pe_interval,
    sdb_interval,
    sim_region,
)
from .model import (
    AgentSystem,
    FederatedSystem,
    HeterogeneityReport,
    NoiseMoments,
    build_federated_system,
    heterogeneity,
    load_system,
    noise_moments,
    save_system,
)
from .schedule import Schedule, schedule_from_config
from .streams import NoiseStreamKey, derive_seed, sample_weight

__version__ = "0.1.0"
