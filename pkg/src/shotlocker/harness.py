"""Experiment orchestration: seeded runs over a test split, accuracy
aggregation, interval and kNN sweeps, and byte-stable result export.

Overlap filtering runs unconditionally before retrieval; ``dedup=False``
is an ablation escape hatch and watermarks the export sidecar. Deterministic
strategies still execute once per seed so call accounting stays honest.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from ._version import __version__
from .corpus import DatasetCollection, OverlapReport, Split, filter_overlap, load_dataset
from .embedfile import read_embeddings
from .errors import ConfigError, ExperimentError, ShotlockerError
from .geometry import EmbeddingMatrix, Measure, Standardizer, fit_standardizer
from .kvfile import parse_bool, parse_list, read_kv
from .prompting import (
    Prompt,
    build_prompt,
    identity_label_map,
    resolve_template,
    verbalize_label,
)
from .retrieval import STRATEGIES, IntervalSpec, rank, select_shots, knn_classify
from .scoring import (
    ScoredLabel,
    ScoreRequest,
    Scorer,
    ScorerDescriptor,
    normalize_by_length,
    predict_label,
)

CSV_COLUMNS = (
    "dataset", "L1", "L2", "strategy", "k", "p", "width",
    "measure", "normalize", "standardize", "seed", "accuracy",
)


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_bool(x: bool) -> str:
    return "true" if x else "false"


def _hash_dict(d: dict) -> str:
    return hashlib.sha256(
        json.dumps(d, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    train_path: str
    train_lang: str
    train_embeddings: str
    test_path: str
    test_lang: str
    test_embeddings: str
    strategy: str = "nearest"
    k: int = 1
    p: float = 0.0
    width: float = 0.1
    measure_kind: str = "cosine"
    normalize: bool = False
    standardize: bool = False
    template_id: str = "default"
    label_map_id: str = "identity"
    scorer: ScorerDescriptor = field(default_factory=ScorerDescriptor)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    dedup: bool = True
    stratified: bool = True
    length_normalize: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if any(s < 0 for s in self.seeds):
            raise ConfigError("seeds must be non-negative")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        self.measure  # validates measure_kind

    @property
    def measure(self) -> Measure:
        return Measure(
            self.measure_kind,
            normalize_first=self.normalize,
            standardize_first=self.standardize,
        )

    @property
    def cross_lingual(self) -> bool:
        return self.train_lang != self.test_lang

    def to_dict(self) -> dict:
        d = {
            "dataset": self.dataset,
            "train_path": self.train_path,
            "train_lang": self.train_lang,
            "train_embeddings": self.train_embeddings,
            "test_path": self.test_path,
            "test_lang": self.test_lang,
            "test_embeddings": self.test_embeddings,
            "strategy": self.strategy,
            "k": self.k,
            "p": self.p,
            "width": self.width,
            "measure": self.measure_kind,
            "normalize": self.normalize,
            "standardize": self.standardize,
            "template_id": self.template_id,
            "label_map_id": self.label_map_id,
            "seeds": list(self.seeds),
            "dedup": self.dedup,
            "stratified": self.stratified,
            "length_normalize": self.length_normalize,
            "scorer": {
                "kind": self.scorer.kind,
                "endpoint": self.scorer.endpoint,
                "model_id": self.scorer.model_id,
                "timeout": self.scorer.timeout,
                "max_concurrent": self.scorer.max_concurrent,
                "max_attempts": self.scorer.max_attempts,
                "backoff_base": self.scorer.backoff_base,
                "mock_mode": self.scorer.mock_mode,
                "mock_salt": self.scorer.mock_salt,
                "cassette": self.scorer.cassette,
                "cassette_mode": self.scorer.cassette_mode,
            },
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        scorer = ScorerDescriptor(**d.get("scorer", {}))
        return cls(
            dataset=d["dataset"],
            train_path=d["train_path"],
            train_lang=d["train_lang"],
            train_embeddings=d["train_embeddings"],
            test_path=d["test_path"],
            test_lang=d["test_lang"],
            test_embeddings=d["test_embeddings"],
            strategy=d.get("strategy", "nearest"),
            k=int(d.get("k", 1)),
            p=float(d.get("p", 0.0)),
            width=float(d.get("width", 0.1)),
            measure_kind=d.get("measure", "cosine"),
            normalize=bool(d.get("normalize", False)),
            standardize=bool(d.get("standardize", False)),
            template_id=d.get("template_id", "default"),
            label_map_id=d.get("label_map_id", "identity"),
            scorer=scorer,
            seeds=tuple(d.get("seeds", (0, 1, 2, 3, 4))),
            dedup=bool(d.get("dedup", True)),
            stratified=bool(d.get("stratified", True)),
            length_normalize=bool(d.get("length_normalize", False)),
        )

    @property
    def fingerprint(self) -> str:
        return _hash_dict(self.to_dict())

    @property
    def comparable_fingerprint(self) -> str:
        """Fingerprint with the strategy and its parameters masked out, for
        comparing runs that differ only in how shots were selected."""
        d = self.to_dict()
        for key in ("strategy", "p", "width"):
            d.pop(key)
        return _hash_dict(d)


@dataclass(frozen=True)
class RunMetrics:
    config: ExperimentConfig
    per_run_accuracy: tuple[float, ...]
    n_queries: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_run_accuracy", tuple(float(a) for a in self.per_run_accuracy))
        if len(self.per_run_accuracy) != len(self.config.seeds):
            raise ValueError("one accuracy per seed is required")
        if any(not 0.0 <= a <= 1.0 for a in self.per_run_accuracy):
            raise ValueError("accuracies must lie in [0, 1]")

    @property
    def mean(self) -> float:
        return sum(self.per_run_accuracy) / len(self.per_run_accuracy)

    @property
    def std(self) -> float:
        """Population standard deviation over the seeded runs."""
        m = self.mean
        return (sum((a - m) ** 2 for a in self.per_run_accuracy) / len(self.per_run_accuracy)) ** 0.5

    @property
    def strategy(self) -> str:
        return self.config.strategy

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint

    @property
    def comparable_fingerprint(self) -> str:
        return self.config.comparable_fingerprint


@dataclass(frozen=True)
class ExperimentData:
    """Loaded, overlap-filtered inputs ready for retrieval."""

    train: DatasetCollection
    test: DatasetCollection
    train_matrix: EmbeddingMatrix
    test_matrix: EmbeddingMatrix
    overlap: OverlapReport | None
    standardizer: Standardizer | None
    instruction: str

    @property
    def shot_label_order(self) -> tuple[str, ...]:
        return self.train.label_set

    @property
    def scoring_label_order(self) -> tuple[str, ...]:
        return self.test.label_set


def _check_alignment(collection: DatasetCollection, matrix: EmbeddingMatrix, name: str) -> None:
    if len(collection) != len(matrix):
        raise ConfigError(
            f"{name} embeddings hold {len(matrix)} rows but the dataset has {len(collection)} records"
        )


def load_experiment_data(cfg: ExperimentConfig) -> ExperimentData:
    """Load datasets and embeddings, filter overlap, and fit statistics.

    The standardizer, when requested, is fitted on the filtered training
    rows only; test vectors are transformed with train statistics.
    """
    train = load_dataset(cfg.train_path, cfg.train_lang, Split.TRAIN)
    test = load_dataset(cfg.test_path, cfg.test_lang, Split.TEST)
    train_matrix = read_embeddings(cfg.train_embeddings)
    test_matrix = read_embeddings(cfg.test_embeddings)
    _check_alignment(train, train_matrix, "train")
    _check_alignment(test, test_matrix, "test")
    overlap: OverlapReport | None = None
    if cfg.dedup:
        train, overlap = filter_overlap(train, test)
        train_matrix = train_matrix.subset([rec.id for rec in train.records])
    if len(train) == 0:
        raise ExperimentError("training set is empty after overlap filtering")
    standardizer = fit_standardizer(train_matrix) if cfg.standardize else None
    return ExperimentData(
        train=train,
        test=test,
        train_matrix=train_matrix,
        test_matrix=test_matrix,
        overlap=overlap,
        standardizer=standardizer,
        instruction=test.task_instruction or train.task_instruction,
    )


@contextmanager
def _stage(name: str, query_id: int):
    try:
        yield
    except ExperimentError:
        raise
    except ShotlockerError as err:
        raise ExperimentError(f"run aborted at stage {name!r} on query {query_id}: {err}") from err


def resolve_label_map(id_or_path: str, labels: Sequence[str]) -> dict[str, str]:
    """``identity`` maps labels to themselves; anything else is a JSON file
    of label -> surface string (JSON preserves leading spaces exactly)."""
    if id_or_path == "identity":
        return identity_label_map(labels)
    p = Path(id_or_path)
    if p.exists():
        mapping = json.loads(p.read_text(encoding="utf-8"))
        if not isinstance(mapping, dict):
            raise ConfigError(f"label map {id_or_path} must be a JSON object")
        return {str(k): str(v) for k, v in mapping.items()}
    raise ConfigError(f"unknown label map {id_or_path!r} (not 'identity' and not a file)")


def _score_all(
    scorer: Scorer,
    records,
    requests_: list[ScoreRequest],
    max_concurrent: int,
) -> list[list[ScoredLabel]]:
    out: list[list[ScoredLabel]] = []
    if max_concurrent > 1:
        with ThreadPoolExecutor(max_workers=max_concurrent) as pool:
            results = iter(pool.map(scorer.score, requests_))
            for rec in records:
                with _stage("score", rec.id):
                    out.append(next(results))
    else:
        for rec, req in zip(records, requests_):
            with _stage("score", rec.id):
                out.append(scorer.score(req))
    return out


def execute_experiment(cfg: ExperimentConfig, data: ExperimentData) -> RunMetrics:
    """Run rank -> select -> prompt -> score -> predict for every test query
    and every seed. Any module error aborts the whole run (no silent skips),
    so accuracy denominators always equal the test-set size."""
    scorer = Scorer(cfg.scorer)
    template = resolve_template(cfg.template_id)
    all_labels = tuple(dict.fromkeys(data.shot_label_order + data.scoring_label_order))
    label_map = resolve_label_map(cfg.label_map_id, all_labels)
    continuations = tuple(verbalize_label(l, label_map) for l in data.scoring_label_order)
    if len(set(continuations)) != len(continuations):
        raise ConfigError("label map is not injective over the scoring labels")

    labels_by_id = data.train.labels_by_id()
    records_by_id = data.train.by_id()
    spec = IntervalSpec(cfg.p, cfg.width) if cfg.strategy == "interval" else None
    measure = cfg.measure

    accuracies: list[float] = []
    for seed in cfg.seeds:
        prompts: list[Prompt] = []
        for rec in data.test.records:
            with _stage("rank", rec.id):
                ranked = rank(
                    data.test_matrix.row(rec.id),
                    data.train_matrix,
                    labels_by_id,
                    measure,
                    data.standardizer,
                    label_order=data.shot_label_order,
                    query_id=rec.id,
                )
            with _stage("select", rec.id):
                shots = select_shots(
                    ranked, cfg.strategy, cfg.k,
                    seed=seed, spec=spec, stratified=cfg.stratified,
                )
            with _stage("prompt", rec.id):
                prompts.append(
                    build_prompt(
                        data.instruction, shots, rec, template, records_by_id,
                        verbalizer=label_map,
                    )
                )
        requests_ = [ScoreRequest(prompt=p.text, continuations=continuations) for p in prompts]
        scored_all = _score_all(scorer, data.test.records, requests_, cfg.scorer.max_concurrent)
        correct = 0
        for rec, scored in zip(data.test.records, scored_all):
            named = [
                ScoredLabel(label=name, logprob=sl.logprob, token_count=sl.token_count)
                for sl, name in zip(scored, data.scoring_label_order)
            ]
            if cfg.length_normalize:
                named = normalize_by_length(named)
            with _stage("predict", rec.id):
                predicted = predict_label(named, label_order=data.scoring_label_order)
            correct += int(predicted == rec.label)
        accuracies.append(correct / len(data.test.records))
    return RunMetrics(config=cfg, per_run_accuracy=tuple(accuracies), n_queries=len(data.test.records))


def run_experiment(cfg: ExperimentConfig) -> RunMetrics:
    return execute_experiment(cfg, load_experiment_data(cfg))


def delta_accuracy(nearest: RunMetrics, farthest: RunMetrics) -> float:
    """Mean accuracy gap between two runs that differ only in strategy."""
    if nearest.comparable_fingerprint != farthest.comparable_fingerprint:
        raise ExperimentError(
            "metrics come from different configurations (fingerprints differ beyond strategy)"
        )
    return nearest.mean - farthest.mean


def sweep_interval(
    cfg: ExperimentConfig,
    p_grid: Sequence[float],
    *,
    width: float | None = None,
    data: ExperimentData | None = None,
) -> list[RunMetrics]:
    """One interval run per lower edge p, sharing loaded data."""
    if data is None:
        data = load_experiment_data(cfg)
    w = float(width) if width is not None else cfg.width
    metrics = []
    for p in p_grid:
        cfg_p = replace(cfg, strategy="interval", p=float(p), width=w)
        metrics.append(execute_experiment(cfg_p, data))
    return metrics


def knn_sweep(
    cfg: ExperimentConfig,
    k_values: Sequence[int],
    *,
    data: ExperimentData | None = None,
) -> list[tuple[int, float]]:
    """Accuracy of the kNN baseline over the test split for each k; no
    scorer involved."""
    if data is None:
        data = load_experiment_data(cfg)
    labels_by_id = data.train.labels_by_id()
    measure = cfg.measure
    out: list[tuple[int, float]] = []
    for k in k_values:
        correct = 0
        for rec in data.test.records:
            with _stage("knn", rec.id):
                predicted = knn_classify(
                    data.test_matrix.row(rec.id),
                    data.train_matrix,
                    labels_by_id,
                    measure,
                    int(k),
                    s=data.standardizer,
                    label_order=data.shot_label_order,
                )
            correct += int(predicted == rec.label)
        out.append((int(k), correct / len(data.test.records)))
    return out


def export_results(metrics: Sequence[RunMetrics], path: str | Path) -> Path:
    """Write per-seed CSV rows plus a JSON sidecar with fingerprints and the
    software version. Output bytes depend only on the inputs."""
    csv_path = Path(path)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for m in metrics:
            c = m.config
            for seed, acc in zip(c.seeds, m.per_run_accuracy):
                writer.writerow([
                    c.dataset, c.train_lang, c.test_lang, c.strategy, c.k,
                    _fmt_float(c.p), _fmt_float(c.width), c.measure_kind,
                    _fmt_bool(c.normalize), _fmt_bool(c.standardize),
                    seed, _fmt_float(acc),
                ])
    sidecar = {
        "format": "shotlocker-results",
        "version": __version__,
        "std_kind": "population",
        # scores are compared in log space as summed token logprobs; no
        # renormalization over the label set happens before the argmax
        "label_renormalization": "none",
        "runs": [
            {
                "fingerprint": m.fingerprint,
                "comparable_fingerprint": m.comparable_fingerprint,
                "strategy": m.config.strategy,
                "mean": m.mean,
                "std": m.std,
                "n_queries": m.n_queries,
                "per_run_accuracy": list(m.per_run_accuracy),
                "dedup": m.config.dedup,
                "stratified": m.config.stratified,
                "config": m.config.to_dict(),
            }
            for m in metrics
        ],
    }
    csv_path.with_suffix(".json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return csv_path


def load_metrics(json_path: str | Path) -> list[RunMetrics]:
    """Read back the JSON sidecar written by :func:`export_results`."""
    payload = json.loads(Path(json_path).read_text(encoding="utf-8"))
    if payload.get("format") != "shotlocker-results":
        raise ConfigError(f"{json_path} is not a results sidecar")
    out = []
    for run in payload["runs"]:
        cfg = ExperimentConfig.from_dict(run["config"])
        metrics = RunMetrics(
            config=cfg,
            per_run_accuracy=tuple(run["per_run_accuracy"]),
            n_queries=int(run["n_queries"]),
        )
        if metrics.fingerprint != run["fingerprint"]:
            raise ConfigError(f"{json_path}: run fingerprint does not match its config")
        out.append(metrics)
    return out


def read_results_csv(path: str | Path) -> list[dict]:
    """Typed rows of an exported CSV."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for row in reader:
            rows.append({
                "dataset": row["dataset"],
                "L1": row["L1"],
                "L2": row["L2"],
                "strategy": row["strategy"],
                "k": int(row["k"]),
                "p": float(row["p"]),
                "width": float(row["width"]),
                "measure": row["measure"],
                "normalize": row["normalize"] == "true",
                "standardize": row["standardize"] == "true",
                "seed": int(row["seed"]),
                "accuracy": float(row["accuracy"]),
            })
    return rows


def parse_config_file(
    path: str | Path,
    *,
    seeds: Sequence[int] | None = None,
) -> ExperimentConfig:
    """Build an ExperimentConfig from a ``key = value`` file.

    Relative paths resolve against the config file's directory. ``seeds``
    given here (e.g. from the command line) override the file.
    """
    p = Path(path)
    kv = read_kv(p)
    base = p.parent

    def resolve(key: str) -> str:
        if key not in kv:
            raise ConfigError(f"config {p} is missing required key {key!r}")
        value = Path(kv[key])
        return str(value if value.is_absolute() else base / value)

    def resolve_optional(key: str, default: str) -> str:
        if key not in kv or kv[key] == default:
            return kv.get(key, default)
        value = Path(kv[key])
        return str(value if value.is_absolute() else base / value)

    scorer = ScorerDescriptor(
        kind=kv.get("scorer_kind", "mock"),
        endpoint=kv.get("scorer_endpoint", ""),
        model_id=kv.get("scorer_model", ""),
        timeout=float(kv.get("scorer_timeout", "30")),
        max_concurrent=int(kv.get("scorer_max_concurrent", "1")),
        max_attempts=int(kv.get("scorer_max_attempts", "3")),
        backoff_base=float(kv.get("scorer_backoff_base", "0.25")),
        mock_mode=kv.get("mock_mode", "hash"),
        mock_salt=int(kv.get("mock_salt", "0")),
        cassette=resolve_optional("cassette", ""),
        cassette_mode=kv.get("cassette_mode", ""),
    )
    seed_values = tuple(int(s) for s in (seeds if seeds is not None else parse_list(kv.get("seeds", "0,1,2,3,4"))))
    return ExperimentConfig(
        dataset=kv.get("dataset", Path(resolve("train_path")).stem),
        train_path=resolve("train_path"),
        train_lang=kv.get("train_lang", "en"),
        train_embeddings=resolve("train_embeddings"),
        test_path=resolve("test_path"),
        test_lang=kv.get("test_lang", "en"),
        test_embeddings=resolve("test_embeddings"),
        strategy=kv.get("strategy", "nearest"),
        k=int(kv.get("k", "1")),
        p=float(kv.get("p", "0.0")),
        width=float(kv.get("width", "0.1")),
        measure_kind=kv.get("measure", "cosine"),
        normalize=parse_bool(kv.get("normalize", "false"), key="normalize"),
        standardize=parse_bool(kv.get("standardize", "false"), key="standardize"),
        template_id=resolve_optional("template_id", "default"),
        label_map_id=resolve_optional("label_map_id", "identity"),
        scorer=scorer,
        seeds=seed_values,
        dedup=parse_bool(kv.get("dedup", "true"), key="dedup"),
        stratified=parse_bool(kv.get("stratified", "true"), key="stratified"),
        length_normalize=parse_bool(kv.get("length_normalize", "false"), key="length_normalize"),
    )
