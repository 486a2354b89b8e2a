"""Transfer learning for classification and treatment rules under parametric
decision-rule drift."""
from .dataset_io import Dataset, ItrDataset, load_classification_csv, load_itr_csv, split_half
from .erm import ErmConfig, calibrate, weighted_zero_one_risk
from .itr import estimate_value, fit_transfer_itr, itr_weight
from .kernel_svm import SvmConfig, SvmModel, train_weighted_svm
from .pipeline import TheorySchedule, TransferConfig, fit_transfer_classifier, rate_beta
from .rules import (
    CompositeTransform,
    CoordinateRotation,
    DecisionRule,
    FunctionOffset,
    ParameterBox,
    SpatialTranslation,
)

__version__ = "0.1.0"

__all__ = [
    "CompositeTransform", "CoordinateRotation", "Dataset", "DecisionRule", "ErmConfig", "FunctionOffset",
    "ItrDataset", "ParameterBox", "SpatialTranslation", "SvmConfig", "SvmModel", "TheorySchedule",
    "TransferConfig", "calibrate", "estimate_value", "fit_transfer_classifier", "fit_transfer_itr",
    "itr_weight", "load_classification_csv", "load_itr_csv", "rate_beta", "split_half",
    "train_weighted_svm", "weighted_zero_one_risk",
]
