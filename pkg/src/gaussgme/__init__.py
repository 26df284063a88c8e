"""Genuine multipartite entanglement tests for three-mode Gaussian states."""

from .cm_separability import (
    CmBisepCertificate,
    CmStatus,
    cm_bisep_feasibility,
    coherent_npt_alpha_max,
    is_fully_inseparable,
    noisy_ghz_partition_separable,
    partial_transpose_cm,
    ppt_check,
)
from .config import DEFAULT_TOLERANCES, Tolerances
from .exceptions import BracketError, DomainError, GaussGMEError, InvalidArgumentError, SolverError
from .fock import (
    DensityBlock,
    FockIndex,
    Method,
    element_by_derivatives,
    element_by_hermite,
    hermite_params,
    husimi_params,
    project_to_qudits,
    to_ladder,
)
from .moments import Bipartition, Family, GaussianMoments, Ordering, family_moments, mix_gaussian_moments
from .scan import Detector, DetectorSpec, ScanRecord, ThresholdResult, bisect_threshold, scan_1d, scan_2d
from .witness import (
    InequalityMargin,
    WitnessOutcome,
    bisep_inequality_margin,
    fully_decomposable_witness,
    ghh_product_criterion,
    partial_transpose_dm,
)

__version__ = "0.1.0"
