"""Distributed estimation of shared invariant subspaces.

Joint subspace estimation for multi-graph collections with shared
singular structure, chi-square two-/multi-sample score tests, distributed
PCA under spiked covariances, common/individual low-rank decomposition,
and a seeded Monte Carlo harness that checks the limit theory at desk
scale.
"""

from .linalg import (
    ConvergenceError,
    SpectralPair,
    duplication,
    eig_sym_top,
    elimination,
    kron,
    procrustes_align,
    sin_theta,
    svd_top,
    two_to_inf_norm,
    unvec,
    vec,
    vech,
)
from .models import (
    CosieModel,
    GraphSample,
    MultinessModel,
    SbmSpec,
    SpikedModel,
    random_memberships,
    sample_cosie,
    sample_multiness,
    sample_spiked,
    sbm_to_cosie,
)
from .estimation import (
    SharedIndividualEstimate,
    SubspaceEstimate,
    estimate_cosie,
    estimate_shared_individual,
    misclassification_rate,
    recover_communities,
    select_block_dims,
)
from .inference import (
    BiasVector,
    RowCovariance,
    ScoreCovariance,
    TestReport,
    changepoint_scan,
    chi2_cdf,
    chi2_quantile,
    mu_bias,
    multi_sample_test,
    noncentral_chi2_cdf,
    noncentrality_two_sample,
    sigma_score,
    sigma_score_plugin,
    two_sample_test,
    undirected_score_quantities,
    upsilon_row,
    upsilon_row_shared,
)
from .dpca import (
    DpcaEstimate,
    DpcaRowCov,
    aggregate_pca,
    dpca_errors,
    dpca_row_covariance,
    dpca_row_covariance_hetero,
    local_pca,
)
from .multiness import MultinessEstimate, estimate_multiness, multiness_errors
from .harness import CalibrationReport, ExperimentConfig, run_study
from .streams import stream

__version__ = "0.1.0"
