"""shotlocker: few-shot example retrieval over sentence embeddings, prompt
assembly, and LM-scored label prediction, with a reproducible evaluation
harness."""

from ._version import __version__
from .corpus import (
    DatasetCollection,
    DatasetRecord,
    OverlapReport,
    Split,
    canonicalize,
    filter_overlap,
    load_dataset,
    overlap_rate,
    save_dataset,
)
from .embedfile import read_embeddings, write_embeddings
from .errors import ShotlockerError
from .geometry import (
    EmbeddingMatrix,
    Measure,
    Standardizer,
    apply_standardizer,
    cosine_distance,
    euclidean_distance,
    fit_standardizer,
    l2_normalize,
    mean_pool,
    measure_distance,
)
from .harness import (
    ExperimentConfig,
    ExperimentData,
    RunMetrics,
    delta_accuracy,
    execute_experiment,
    export_results,
    knn_sweep,
    load_experiment_data,
    load_metrics,
    parse_config_file,
    run_experiment,
    sweep_interval,
)
from .prompting import (
    Prompt,
    PromptTemplate,
    build_prompt,
    identity_label_map,
    verbalize_label,
)
from .retrieval import (
    IntervalSpec,
    RankedList,
    ShotSet,
    farthest_per_label,
    interval_sample,
    knn_classify,
    nearest_per_label,
    random_per_label,
    rank,
    select_shots,
)
from .scoring import (
    ScoredLabel,
    ScoreRequest,
    Scorer,
    ScorerDescriptor,
    mock_score,
    normalize_by_length,
    predict_label,
    score_labels,
)

__all__ = [
    "__version__",
    "DatasetCollection",
    "DatasetRecord",
    "OverlapReport",
    "Split",
    "canonicalize",
    "filter_overlap",
    "load_dataset",
    "overlap_rate",
    "save_dataset",
    "read_embeddings",
    "write_embeddings",
    "ShotlockerError",
    "EmbeddingMatrix",
    "Measure",
    "Standardizer",
    "apply_standardizer",
    "cosine_distance",
    "euclidean_distance",
    "fit_standardizer",
    "l2_normalize",
    "mean_pool",
    "measure_distance",
    "ExperimentConfig",
    "ExperimentData",
    "RunMetrics",
    "delta_accuracy",
    "execute_experiment",
    "export_results",
    "knn_sweep",
    "load_experiment_data",
    "load_metrics",
    "parse_config_file",
    "run_experiment",
    "sweep_interval",
    "Prompt",
    "PromptTemplate",
    "build_prompt",
    "identity_label_map",
    "verbalize_label",
    "IntervalSpec",
    "RankedList",
    "ShotSet",
    "farthest_per_label",
    "interval_sample",
    "knn_classify",
    "nearest_per_label",
    "random_per_label",
    "rank",
    "select_shots",
    "ScoredLabel",
    "ScoreRequest",
    "Scorer",
    "ScorerDescriptor",
    "mock_score",
    "normalize_by_length",
    "predict_label",
    "score_labels",
]
