"""Storm classifiers, cross-validation and evaluation."""
from .classifier import (
    DEFAULT_HYPERPARAMS,
    KINDS,
    Dataset,
    TrainedClassifier,
    load_model,
    model_from_dict,
    model_to_dict,
    predict,
    predict_labels,
    predict_scores,
    save_model,
    train_classifier,
)
from .validation import (
    CvReport,
    MetricsReport,
    cross_station_evaluate,
    evaluate,
    format_confusion_csv,
    format_cv_csv,
    format_metrics_csv,
    format_roc_csv,
    kfold_cross_validate,
    metrics_from_predictions,
    roc_curve_auc,
    stratified_folds,
    stratified_split,
)

__all__ = [
    "DEFAULT_HYPERPARAMS",
    "KINDS",
    "Dataset",
    "TrainedClassifier",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "predict",
    "predict_labels",
    "predict_scores",
    "save_model",
    "train_classifier",
    "CvReport",
    "MetricsReport",
    "cross_station_evaluate",
    "evaluate",
    "format_confusion_csv",
    "format_cv_csv",
    "format_metrics_csv",
    "format_roc_csv",
    "kfold_cross_validate",
    "metrics_from_predictions",
    "roc_curve_auc",
    "stratified_folds",
    "stratified_split",
]
