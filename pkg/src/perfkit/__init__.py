"""Semi-quantitative DCE-MRI perfusion maps with lesion-level evaluation.

Core pipeline: read a 4D dynamic series, derive per-voxel kinetic features
(time of peak, wash-in and wash-out slopes, percentage of enhancement) plus
the maximum-slope frame, preprocess volumes for model input, and score
lesion predictions with FROC, quadratic weighted kappa and Dice. A gamma-
variate phantom generator provides exams with analytically known answers.
"""

from .evaluation import (
    ConfusionMatrix,
    FrocCurve,
    LesionCandidate,
    annotations_from_labels,
    dice,
    extract_candidates,
    froc,
    lesion_grading_confusion,
    match,
    quadratic_weighted_kappa,
    sensitivity_at_fp,
)
from .kinetics import (
    CurveFeatures,
    PerfusionMapSet,
    compute_perfusion_maps,
    curve_features,
    detect_onset,
    max_slope_frame,
    percent_enhancement,
    tmax,
    wash_in_slope,
    wash_out_slope,
)
from .phantom import (
    KineticParams,
    PhantomResult,
    PhantomSpec,
    RegionSpec,
    RegionTruth,
    gamma_variate,
    load_phantom_spec,
    synth_dce,
)
from .preprocess import (
    PreprocessConfig,
    assemble_channels,
    center_crop,
    normalize_minmax,
    preprocess_volume,
    resample_trilinear,
)
from .volume import (
    ChannelStack,
    DceSeries,
    Grid3,
    GsGroup,
    LabelVolume,
    LesionAnnotation,
    ProbabilityMap,
    TimeIntensityCurve,
    Volume3,
    extract_curve,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelStack",
    "ConfusionMatrix",
    "CurveFeatures",
    "DceSeries",
    "FrocCurve",
    "Grid3",
    "GsGroup",
    "KineticParams",
    "LabelVolume",
    "LesionAnnotation",
    "LesionCandidate",
    "PerfusionMapSet",
    "PhantomResult",
    "PhantomSpec",
    "PreprocessConfig",
    "ProbabilityMap",
    "RegionSpec",
    "RegionTruth",
    "TimeIntensityCurve",
    "Volume3",
    "annotations_from_labels",
    "assemble_channels",
    "center_crop",
    "compute_perfusion_maps",
    "curve_features",
    "detect_onset",
    "dice",
    "extract_candidates",
    "extract_curve",
    "froc",
    "gamma_variate",
    "lesion_grading_confusion",
    "load_phantom_spec",
    "match",
    "max_slope_frame",
    "normalize_minmax",
    "percent_enhancement",
    "preprocess_volume",
    "quadratic_weighted_kappa",
    "resample_trilinear",
    "sensitivity_at_fp",
    "synth_dce",
    "tmax",
    "wash_in_slope",
    "wash_out_slope",
]
