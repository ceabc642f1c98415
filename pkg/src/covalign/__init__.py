"""covalign: covariance-based alignment for cross-subject transfer in
multichannel EEG decoding, with the full pipeline around it.

Core surface: data types (:mod:`covalign.data`), the dataset container
(:mod:`covalign.container`), signal conditioning
(:mod:`covalign.preprocess`), SPD kernels (:mod:`covalign.spd`),
alignment transforms (:mod:`covalign.alignment`), spatial filtering and
classification (:mod:`covalign.decoding`), stage-ordered pipelines with
the leave-one-subject-out harness (:mod:`covalign.pipeline`), and the
synthetic multi-subject generator (:mod:`covalign.synth`). A FastAPI
service (:mod:`covalign.service`) wraps the batch operations; the
``covalign`` CLI is a thin client of it.
"""

__version__ = "0.1.0"

from .data import ClassPairing, DomainSet, Trial, pair_classes, validate_domain
from .container import load_domains, save_domains
from .spd import SPDMatrix, invsqrt_spd, mean_covariance, sqrt_spd, trial_covariance
from .preprocess import BandpassSpec, EpochSpec, bandpass, car, downsample, epoch
from .alignment import (
    CoralTransform,
    EAState,
    EATransform,
    LATransform,
    align_ea,
    apply_coral,
    apply_ea,
    apply_ea_domain,
    apply_la,
    apply_la_domain,
    diag_dominance,
    ea_residual,
    finalize_ea,
    fit_coral,
    fit_ea,
    fit_la,
    update_ea,
)
from .decoding import (
    LinearClassifier,
    SpatialFilterBank,
    decision_value,
    fit_csp,
    fit_lda,
    log_variance_features,
    predict,
)
from .pipeline import (
    EvalReport,
    PipelineConfig,
    StageSpec,
    build_pipeline,
    compare_configs,
    get_preset,
    loso_evaluate,
    select_calibration_block,
)
from .synth import GeneratorSpec, discrepancy, generate

__all__ = [
    "__version__",
    "Trial", "DomainSet", "ClassPairing", "pair_classes", "validate_domain",
    "load_domains", "save_domains",
    "SPDMatrix", "trial_covariance", "mean_covariance", "sqrt_spd", "invsqrt_spd",
    "BandpassSpec", "EpochSpec", "bandpass", "car", "epoch", "downsample",
    "EATransform", "EAState", "LATransform", "CoralTransform",
    "fit_ea", "apply_ea", "apply_ea_domain", "align_ea", "ea_residual",
    "update_ea", "finalize_ea", "fit_la", "apply_la", "apply_la_domain",
    "fit_coral", "apply_coral", "diag_dominance",
    "SpatialFilterBank", "LinearClassifier", "fit_csp", "log_variance_features",
    "fit_lda", "predict", "decision_value",
    "PipelineConfig", "StageSpec", "build_pipeline", "get_preset",
    "select_calibration_block", "loso_evaluate", "compare_configs", "EvalReport",
    "GeneratorSpec", "generate", "discrepancy",
]
