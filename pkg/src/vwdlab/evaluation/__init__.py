from .experiment import ExperimentConfig, MetricsReport, SweepReport, ablation_sweep, run_experiment
from .metrics import confusion_metrics, patient_score, roc_auc
from .splits import SplitPlan, SplitScheme, bootstrap_split, holdout_split, oversample_instances, stratified_kfold

__all__ = [
    "ExperimentConfig",
    "MetricsReport",
    "SplitPlan",
    "SplitScheme",
    "SweepReport",
    "ablation_sweep",
    "bootstrap_split",
    "confusion_metrics",
    "holdout_split",
    "oversample_instances",
    "patient_score",
    "roc_auc",
    "run_experiment",
    "stratified_kfold",
]
