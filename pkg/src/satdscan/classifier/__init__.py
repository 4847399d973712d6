from satdscan.classifier.base import (
    BackendFailure,
    Classification,
    Classifier,
    MajorityBackend,
    argmax_label,
    classify,
    one_hot,
)
from satdscan.classifier.kernels import KERNELS_ENV, available_backends, get_backend
from satdscan.classifier.ngram import (
    DegenerateData,
    GradientCheckReport,
    GradientMismatch,
    MissingLabelInTrain,
    NgramModel,
    TrainConfig,
    evaluate_gradient,
    train_ngram,
)
from satdscan.classifier.patterns import DEFAULT_RULES, PatternRuleSet

__all__ = [
    "BackendFailure",
    "Classification",
    "Classifier",
    "MajorityBackend",
    "argmax_label",
    "classify",
    "one_hot",
    "KERNELS_ENV",
    "available_backends",
    "get_backend",
    "DegenerateData",
    "GradientCheckReport",
    "GradientMismatch",
    "MissingLabelInTrain",
    "NgramModel",
    "TrainConfig",
    "evaluate_gradient",
    "train_ngram",
    "DEFAULT_RULES",
    "PatternRuleSet",
]
