"""tackscan: synthetic GPR surveys over tack-coated pavements and
SVM/SVR estimation of the emulsion proportioning."""

__version__ = "0.1.0"

from .scene import (
    BINARY_SCHEME,
    FOUR_CLASS_SCHEME,
    ClassScheme,
    Layer,
    PavementScene,
    SceneSpec,
    Section,
    TackCoatRule,
    ThicknessFieldSpec,
    ValidationError,
    build_scene,
    quantity_label_scheme,
    quantity_to_class,
    quantity_to_layer,
    sample_thickness_map,
)
from .forward import (
    AcquisitionSpec,
    AScan,
    BScan,
    Profile,
    PulseSpec,
    Survey,
    fresnel_reflection,
    layered_reflection_response,
    simulate_survey,
    synthesize_ascan,
)
from .features import (
    FeatureConfig,
    Normalizer,
    apply_normalizer,
    extract_features,
    fit_normalizer,
    gate_trace,
)
from .metrics import ConfusionMatrix, EvalReport, confusion_matrix, dice_scores, rmse
from .maps import ClassMap, assemble_map

__all__ = [
    "__version__",
    "BINARY_SCHEME",
    "FOUR_CLASS_SCHEME",
    "ClassScheme",
    "Layer",
    "PavementScene",
    "SceneSpec",
    "Section",
    "TackCoatRule",
    "ThicknessFieldSpec",
    "ValidationError",
    "build_scene",
    "quantity_label_scheme",
    "quantity_to_class",
    "quantity_to_layer",
    "sample_thickness_map",
    "AcquisitionSpec",
    "AScan",
    "BScan",
    "Profile",
    "PulseSpec",
    "Survey",
    "fresnel_reflection",
    "layered_reflection_response",
    "simulate_survey",
    "synthesize_ascan",
    "FeatureConfig",
    "Normalizer",
    "apply_normalizer",
    "extract_features",
    "fit_normalizer",
    "gate_trace",
    "ConfusionMatrix",
    "EvalReport",
    "confusion_matrix",
    "dice_scores",
    "rmse",
    "ClassMap",
    "assemble_map",
]
