"""Semi-supervised anomaly detection by direct anomaly-score learning.

A small ReLU network maps feature rows to scalar anomaly scores, trained so
that unlabeled rows score near a Gaussian prior's mean while the few labeled
anomalies score several prior deviations above it. Scores therefore read as
Z-values of that prior, which makes them directly interpretable.
"""

from .data import (
    Dataset,
    Encoder,
    ExperimentSpec,
    FeatureScaler,
    PreparedData,
    Table,
    adjust_contamination,
    draw_labeled_anomalies,
    fit_encoder,
    load_csv,
    prepare_training_data,
    preprocess,
    split_train_test,
    standardize_fit_apply,
    synth_gaussian,
)
from .deviation import (
    LossConfig,
    PriorConfig,
    ReferenceStats,
    deviation,
    deviation_loss,
    loss_gradient_wrt_score,
    sample_reference,
)
from .errors import ConfigError, DataError, DevnetError, NumericError
from .evaluation import (
    RankingMetrics,
    RunAggregate,
    aggregate_runs,
    auc_roc,
    average_precision,
    ranking_metrics,
    scalability_sweep,
    wilcoxon_signed_rank,
)
from .interpret import (
    Interpretation,
    normal_cdf,
    normal_quantile,
    score_to_probability,
    threshold_for_confidence,
)
from .network import (
    Architecture,
    ForwardCache,
    Gradients,
    Parameters,
    backward,
    forward,
    init_parameters,
    score,
)
from .optimizer import (
    OptimizerConfig,
    RmsState,
    init_rms_state,
    regularized_gradient,
    rmsprop_step,
)
from .trainer import (
    TrainConfig,
    TrainedModel,
    TrainingSet,
    architecture_for_variant,
    batch_loss,
    predict,
    sample_minibatch,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "ConfigError",
    "DataError",
    "Dataset",
    "DevnetError",
    "Encoder",
    "ExperimentSpec",
    "FeatureScaler",
    "ForwardCache",
    "Gradients",
    "Interpretation",
    "LossConfig",
    "NumericError",
    "OptimizerConfig",
    "Parameters",
    "PreparedData",
    "PriorConfig",
    "RankingMetrics",
    "ReferenceStats",
    "RmsState",
    "RunAggregate",
    "Table",
    "TrainConfig",
    "TrainedModel",
    "TrainingSet",
    "adjust_contamination",
    "aggregate_runs",
    "architecture_for_variant",
    "auc_roc",
    "average_precision",
    "backward",
    "batch_loss",
    "deviation",
    "deviation_loss",
    "draw_labeled_anomalies",
    "fit_encoder",
    "forward",
    "init_parameters",
    "init_rms_state",
    "load_csv",
    "loss_gradient_wrt_score",
    "normal_cdf",
    "normal_quantile",
    "predict",
    "prepare_training_data",
    "preprocess",
    "ranking_metrics",
    "regularized_gradient",
    "rmsprop_step",
    "sample_minibatch",
    "sample_reference",
    "scalability_sweep",
    "score",
    "score_to_probability",
    "split_train_test",
    "standardize_fit_apply",
    "synth_gaussian",
    "threshold_for_confidence",
    "train",
]
