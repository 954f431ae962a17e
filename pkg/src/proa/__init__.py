"""Probabilistic robustness assessment of black-box classifiers.

The package certifies whether a classifier keeps its prediction stable
under a parametric family of image perturbations: it samples parameters
adaptively, maintains an anytime-valid confidence bound on the stability
probability, and stops with a certified / violated / undetermined
verdict carrying a 1 - delta statistical guarantee.  Fixed-budget and
empirical (grid / random search) evaluators are included for comparison.
"""

from proa.baselines import ac_certify, grid_accuracy, random_accuracy
from proa.classifier import (
    BuiltinClassifier,
    ModelDescriptor,
    RemoteClassifier,
    load_builtin,
    predict_batch,
    save_builtin,
)
from proa.perturb import (
    DEFAULT_BOXES,
    Family,
    ImageTensor,
    PerturbationSpec,
    affine_transform,
    apply,
    brightness_contrast,
    gaussian_blur,
    hue_shift,
    params_to_affine,
    sample_theta,
    saturation_shift,
)
from proa.stats import (
    BoundValue,
    ConfidenceParams,
    TestVerdict,
    adaptive_epsilon,
    agresti_coull_interval,
    hoeffding_epsilon,
    hypothesis_decision,
    normal_quantile,
)
from proa.verifier import (
    Verdict,
    VerifyConfig,
    VerifyOutcome,
    certify,
    certify_dataset,
    margin,
    stability_indicator,
)

__version__ = "0.1.0"

__all__ = [
    "ac_certify",
    "adaptive_epsilon",
    "affine_transform",
    "agresti_coull_interval",
    "apply",
    "BoundValue",
    "brightness_contrast",
    "BuiltinClassifier",
    "certify",
    "certify_dataset",
    "ConfidenceParams",
    "DEFAULT_BOXES",
    "Family",
    "gaussian_blur",
    "grid_accuracy",
    "hoeffding_epsilon",
    "hue_shift",
    "hypothesis_decision",
    "ImageTensor",
    "load_builtin",
    "margin",
    "ModelDescriptor",
    "normal_quantile",
    "params_to_affine",
    "PerturbationSpec",
    "predict_batch",
    "random_accuracy",
    "RemoteClassifier",
    "sample_theta",
    "saturation_shift",
    "save_builtin",
    "stability_indicator",
    "TestVerdict",
    "Verdict",
    "VerifyConfig",
    "VerifyOutcome",
]
