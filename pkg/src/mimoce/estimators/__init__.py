"""Channel estimators: classical baselines and attention-aided networks."""

from .classical import (CcmBank, estimate_ccm, fit_ccm_bank, load_ccm_bank, mmse_regional, mmse_single,
                        save_ccm_bank, separate_ls, separate_ls_rounds)
from .interface import (Estimator, LSEstimator, MMSERegionalEstimator, MMSESingleEstimator, NeuralEstimator,
                        SeparateLSEstimator)
from .networks import EstimatorKind, build_cnn, build_fnn, build_had_cnn
from .processing import Normalizer, angular_targets, merge_complex, postprocess, preprocess, raw_features, split_complex

__all__ = [
    "CcmBank", "estimate_ccm", "fit_ccm_bank", "load_ccm_bank", "save_ccm_bank", "mmse_single", "mmse_regional",
    "separate_ls", "separate_ls_rounds",
    "Estimator", "LSEstimator", "MMSESingleEstimator", "MMSERegionalEstimator", "SeparateLSEstimator",
    "NeuralEstimator", "EstimatorKind", "build_cnn", "build_fnn", "build_had_cnn",
    "Normalizer", "angular_targets", "merge_complex", "postprocess", "preprocess", "raw_features", "split_complex",
]
