"""Command-line interface.

Subcommands: ingest, dedup, retrieve, knn, run, sweep-interval, knn-sweep,
delta. The exit code is 0 only when a command ran to completion.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from ._version import __version__
from .corpus import Split, filter_overlap, load_dataset, save_dataset
from .errors import ShotlockerError
from .retrieval import IntervalSpec, rank, select_shots, knn_classify


def _print_json(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _parse_grid(text: str, cast):
    values = [cast(part) for part in text.split(",") if part.strip()]
    if not values:
        raise ShotlockerError(f"empty grid {text!r}")
    return values


def _cmd_ingest(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train = load_dataset(args.train, args.lang, Split.TRAIN)
    test = load_dataset(args.test, args.test_lang or args.lang, Split.TEST)
    save_dataset(train, out / "train.tsv")
    save_dataset(test, out / "test.tsv")
    _print_json({
        "train": {"records": len(train), "labels": list(train.label_set)},
        "test": {"records": len(test), "labels": list(test.label_set)},
        "out": str(out),
    })
    return 0


def _cmd_dedup(args) -> int:
    train = load_dataset(args.train, args.lang, Split.TRAIN)
    test = load_dataset(args.test, args.test_lang or args.lang, Split.TEST)
    filtered, report = filter_overlap(train, test, canonical=not args.byte_exact)
    payload = {
        "removed_ids": list(report.removed_ids),
        "overlap_rate": report.overlap_rate,
        "normalization": report.normalization,
        "train_before": len(train),
        "train_after": len(filtered),
    }
    Path(args.report).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if args.out:
        save_dataset(filtered, args.out)
    _print_json(payload)
    return 0


def _apply_retrieval_overrides(cfg, args):
    updates = {}
    if args.strategy is not None:
        updates["strategy"] = args.strategy
    if args.k is not None:
        updates["k"] = args.k
    if args.measure is not None:
        updates["measure_kind"] = args.measure
    if args.normalize:
        updates["normalize"] = True
    if args.standardize:
        updates["standardize"] = True
    if args.p is not None:
        updates["p"] = args.p
    if args.width is not None:
        updates["width"] = args.width
    if getattr(args, "global_pool", False):
        updates["stratified"] = False
    if args.no_dedup:
        updates["dedup"] = False
    return replace(cfg, **updates) if updates else cfg


def _cmd_retrieve(args) -> int:
    cfg = harness.parse_config_file(args.config)
    cfg = _apply_retrieval_overrides(cfg, args)
    data = harness.load_experiment_data(cfg)
    query = data.test.by_id().get(args.query_id)
    if query is None:
        raise ShotlockerError(f"query id {args.query_id} is not in the test split")
    ranked = rank(
        data.test_matrix.row(query.id),
        data.train_matrix,
        data.train.labels_by_id(),
        cfg.measure,
        data.standardizer,
        label_order=data.shot_label_order,
        query_id=query.id,
    )
    spec = IntervalSpec(cfg.p, cfg.width) if cfg.strategy == "interval" else None
    shots = select_shots(
        ranked, cfg.strategy, cfg.k,
        seed=args.seed, spec=spec, stratified=cfg.stratified,
    )
    records = data.train.by_id()
    _print_json({
        "query": {"id": query.id, "text": query.text, "label": query.label},
        "strategy": cfg.strategy,
        "k": cfg.k,
        "measure": cfg.measure.describe(),
        "stratified": cfg.stratified,
        "groups": {
            label: [
                {"id": rid, "text": records[rid].text, "label": records[rid].label, "distance": d}
                for rid, d in entries
            ]
            for label, entries in shots.groups.items()
        },
    })
    return 0


def _cmd_knn(args) -> int:
    cfg = harness.parse_config_file(args.config)
    cfg = _apply_retrieval_overrides(cfg, args)
    data = harness.load_experiment_data(cfg)
    labels_by_id = data.train.labels_by_id()
    predictions = []
    correct = 0
    for rec in data.test.records:
        predicted = knn_classify(
            data.test_matrix.row(rec.id),
            data.train_matrix,
            labels_by_id,
            cfg.measure,
            args.k if args.k is not None else cfg.k,
            s=data.standardizer,
            label_order=data.shot_label_order,
        )
        correct += int(predicted == rec.label)
        predictions.append({"query_id": rec.id, "gold": rec.label, "predicted": predicted})
    _print_json({
        "k": args.k if args.k is not None else cfg.k,
        "measure": cfg.measure.describe(),
        "accuracy": correct / len(data.test.records),
        "predictions": predictions,
    })
    return 0


def _export_and_summarize(metrics, out_dir: str | None, name: str) -> None:
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = harness.export_results(metrics, out / f"{name}.csv")
        print(f"wrote {csv_path} and {csv_path.with_suffix('.json')}")
    for m in metrics:
        tag = m.config.strategy
        if m.config.strategy == "interval":
            tag += f" p={m.config.p} width={m.config.width}"
        print(f"{tag}: mean={m.mean:.4f} std={m.std:.4f} n_queries={m.n_queries}")


def _cmd_run(args) -> int:
    seeds = _parse_grid(args.seeds, int) if args.seeds else None
    cfg = harness.parse_config_file(args.config, seeds=seeds)
    metrics = harness.run_experiment(cfg)
    if not cfg.dedup:
        print("warning: overlap filtering disabled (--dedup false); outputs are watermarked")
    _export_and_summarize([metrics], args.out, "results")
    return 0


def _cmd_sweep_interval(args) -> int:
    seeds = _parse_grid(args.seeds, int) if args.seeds else None
    cfg = harness.parse_config_file(args.config, seeds=seeds)
    p_grid = _parse_grid(args.p_grid, float)
    metrics = harness.sweep_interval(cfg, p_grid, width=args.width)
    _export_and_summarize(metrics, args.out, "interval_sweep")
    return 0


def _cmd_knn_sweep(args) -> int:
    cfg = harness.parse_config_file(args.config)
    k_grid = _parse_grid(args.k_grid, int)
    pairs = harness.knn_sweep(cfg, k_grid)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["k,accuracy"] + [f"{k},{acc!r}" for k, acc in pairs]
        (out / "knn_sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {out / 'knn_sweep.csv'}")
    for k, acc in pairs:
        print(f"k={k}: accuracy={acc:.4f}")
    return 0


def _cmd_delta(args) -> int:
    a_runs = harness.load_metrics(args.a)
    b_runs = harness.load_metrics(args.b)
    if len(a_runs) != 1 or len(b_runs) != 1:
        raise ShotlockerError("delta expects single-run result files")
    delta = harness.delta_accuracy(a_runs[0], b_runs[0])
    _print_json({
        "delta": delta,
        "a": {"strategy": a_runs[0].strategy, "mean": a_runs[0].mean},
        "b": {"strategy": b_runs[0].strategy, "mean": b_runs[0].mean},
    })
    return 0


def _add_retrieval_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--strategy", choices=["random", "nearest", "farthest", "interval"])
    parser.add_argument("--k", type=int)
    parser.add_argument("--measure", choices=["cosine", "euclidean"])
    parser.add_argument("--normalize", action="store_true")
    parser.add_argument("--standardize", action="store_true")
    parser.add_argument("--p", type=float)
    parser.add_argument("--width", type=float)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--global", dest="global_pool", action="store_true",
                        help="non-stratified selection from the global pool (ablation)")
    parser.add_argument("--no-dedup", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shotlocker")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate datasets and write normalized copies")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--lang", required=True)
    p.add_argument("--test-lang", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("dedup", help="report and remove train/test text overlap")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--lang", default="en")
    p.add_argument("--test-lang", default=None)
    p.add_argument("--report", required=True)
    p.add_argument("--out", default=None, help="write the filtered train split here")
    p.add_argument("--byte-exact", action="store_true", help="disable text canonicalization")
    p.set_defaults(func=_cmd_dedup)

    p = sub.add_parser("retrieve", help="print the shot set for one test query as JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--query-id", type=int, required=True)
    _add_retrieval_flags(p)
    p.set_defaults(func=_cmd_retrieve)

    p = sub.add_parser("knn", help="per-query kNN predictions and accuracy")
    p.add_argument("--config", required=True)
    _add_retrieval_flags(p)
    p.set_defaults(func=_cmd_knn)

    p = sub.add_parser("run", help="run a full experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", default=None, help="comma-separated, overrides the config")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep-interval", help="interval runs over a grid of lower edges p")
    p.add_argument("--config", required=True)
    p.add_argument("--p-grid", required=True)
    p.add_argument("--width", type=float, default=None)
    p.add_argument("--seeds", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep_interval)

    p = sub.add_parser("knn-sweep", help="kNN accuracy over a grid of k")
    p.add_argument("--config", required=True)
    p.add_argument("--k-grid", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_knn_sweep)

    p = sub.add_parser("delta", help="mean accuracy gap between two exported runs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=_cmd_delta)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ShotlockerError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
