"""Localized two-hidden-layer neural network regression for lattice spatial data."""

from .bessel import bessel_k
from .grf import (
    CovarianceMatrix, FieldRealization, MaternParams, SimulatedDataset, build_cov_matrix,
    cholesky_with_jitter, matern_cov, sample_grf, simulate_dataset,
)
from .inference import (
    CIResult, ECDF, KLResult, SubsampleLadder, ci_from_estimates, ecdf, kl_divergence, kl_ladder,
    subsample_ci,
)
from .net import (
    AdamState, Batch, NetworkParams, NetworkShape, adam_step, backward, forward, init_params,
    lipschitz_bound, loss, predict, project_constraints,
)
from .regress import (
    FitResult, LocalDataset, ScenarioConfig, SplitSpec, TrainConfig, assemble_local, fit_local,
    mspe, run_scenario, split,
)
from .sampling import (
    Neighborhood, PrototypeRegion, RegimeParams, SamplingDesign, SiteSet, build_sites,
    growth_ratio, neighborhood, refine, validate_regime,
)

__version__ = "0.1.0"
