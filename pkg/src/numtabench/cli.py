"""Command line driver: ``ingest``, ``split``, ``train``, ``evaluate``, ``compare``.

Every command works inside ``<output_dir>/<run_name>/``. Exit codes:
0 success, 1 configuration/workflow error, 2 data error, 3 training failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import torch

from numtabench import __version__
from numtabench.datasetio import (
    DatasetError,
    DatasetManifest,
    SplitResult,
    scan_sources,
    stratified_split,
    subsample,
    validate_and_clean,
)
from numtabench.metrics import ClassificationReport, build_report, render_report_text
from numtabench.models import (
    ArchiveError,
    ModelConfig,
    build_model,
    load_checkpoint,
    load_pretrained,
    parameter_count,
    save_checkpoint,
)
from numtabench.reporting import (
    ConfigError,
    RunConfig,
    compare,
    epoch_delta,
    plot_comparison_bars,
    plot_test_curves,
    render_plots,
    write_epoch_deltas,
)
from numtabench.training import EmptyDatasetError, EpochHistory, NonFiniteLossError, predict_labels, train

log = logging.getLogger("numtabench")

EXIT_CONFIG, EXIT_DATA, EXIT_TRAIN = 1, 2, 3


class WorkflowError(Exception):
    """A command ran before the step it depends on, or its run dir is busy."""


@contextmanager
def run_lock(run_dir: Path):
    run_dir.mkdir(parents=True, exist_ok=True)
    lock = run_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise WorkflowError(f"{run_dir} is locked by another invocation (remove {lock} if stale)")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield run_dir
    finally:
        lock.unlink(missing_ok=True)


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.from_dict({})
    return cfg.with_overrides(
        model=args.model, out=args.out, seed=args.seed, epochs=args.epochs, lr=args.lr,
        batch=args.batch, mode=args.mode, pretrained=args.pretrained,
    )


def _require(path: Path, step: str) -> Path:
    if not path.exists():
        raise WorkflowError(f"{path} not found; run `{step}` first")
    return path


def cmd_ingest(cfg: RunConfig, args) -> int:
    if not cfg.dataset_root:
        raise ConfigError("no dataset_root in config and NUMTA_ROOT is not set")
    if not Path(cfg.dataset_root).is_dir():
        raise ConfigError(f"dataset root {cfg.dataset_root} does not exist")
    with run_lock(cfg.run_dir) as run:
        if (run / "manifest.json").exists() and not args.force:
            raise WorkflowError(f"{run} already holds an ingested dataset (use --force)")
        raw = scan_sources(cfg.dataset_root, cfg.source_tags, cfg.filename_column, cfg.label_column)
        manifest, clean_log = validate_and_clean(raw)
        if cfg.subsample_n is not None:
            manifest = subsample(manifest, cfg.subsample_n, cfg.subsample_seed)
        manifest.save(run / "manifest.json")
        info = clean_log.to_dict() | {"malformed_rows": [str(e) for e in raw.row_errors],
                                      "after_subsample": len(manifest)}
        (run / "cleanlog.json").write_text(json.dumps(info, indent=1))
        print(f"ingested {len(manifest)} records into {run / 'manifest.json'} ({clean_log.to_dict()})")
    return 0


def cmd_split(cfg: RunConfig, args) -> int:
    with run_lock(cfg.run_dir) as run:
        manifest = DatasetManifest.load(_require(run / "manifest.json", "ingest"))
        result = stratified_split(manifest, cfg.split)
        result.save(run / "split.json")
        print(f"split: train={len(result.train)} test={len(result.test)} new_data={len(result.new_data)}")
    return 0


def _snapshot(cfg: RunConfig, model, extra: dict) -> dict:
    summary = parameter_count(model)
    return cfg.to_dict() | {
        "numtabench_version": __version__,
        "torch_version": torch.__version__,
        "parameters": {"total": summary.total, "trainable": summary.trainable},
    } | extra


def cmd_train(cfg: RunConfig, args) -> int:
    with run_lock(cfg.run_dir) as run:
        split = SplitResult.load(_require(run / "split.json", "split"))
        if (run / "checkpoint.safetensors").exists() and not args.force:
            raise WorkflowError(f"{run} already holds a trained model (use --force)")
        model = build_model(cfg.model_kind, ModelConfig(seed=cfg.train.seed))
        load_info = None
        if cfg.pretrained:
            model, report = load_pretrained(model, cfg.pretrained)
            load_info = {k: len(v) for k, v in vars(report).items()}
            log.info("pretrained weights: %s", load_info)
        (run / "config.json").write_text(json.dumps(_snapshot(cfg, model, {"pretrained_load": load_info}), indent=1))
        try:
            result = train(model, split.train, split.test, cfg.train, cfg.preprocess)
        except NonFiniteLossError as exc:
            if len(exc.partial.history):
                exc.partial.history.to_csv(run / "history.csv")
            print(f"training failed: {exc}", file=sys.stderr)
            return EXIT_TRAIN
        render_plots(result.history, run)
        save_checkpoint(result.model, run / "checkpoint")
        (run / "train_summary.json").write_text(json.dumps({"wall_time_s": result.wall_time,
                                                            "epochs": len(result.history)}, indent=1))
        last = list(result.history.rows())[-1]
        print(f"trained {cfg.model_kind} for {last[0]} epochs: "
              f"train_acc={last[2]:.4f} test_acc={last[4]:.4f} -> {run}")
    return 0


def cmd_evaluate(cfg: RunConfig, args) -> int:
    with run_lock(cfg.run_dir) as run:
        ckpt = _require(run / "checkpoint.safetensors", "train")
        split = SplitResult.load(_require(run / "split.json", "split"))
        meta = json.loads((run / "checkpoint.json").read_text())
        model = load_checkpoint(meta["kind"], ckpt)
        parts = [("test", split.test, "report")]
        if len(split.new_data):
            parts.append(("new_data", split.new_data, "report_new_data"))
        for label, part, stem in parts:
            y_true, y_pred = predict_labels(model, part, cfg.preprocess)
            report = build_report(y_true, y_pred)
            report.to_json(run / f"{stem}.json")
            report.to_csv(run / f"{stem}.csv")
            print(f"== {meta['kind']} on {label} partition ({len(part)} samples)")
            print(render_report_text(report))
    return 0


def cmd_compare(args) -> int:
    if not args.runs:
        raise ConfigError("compare needs at least one run directory")
    runs, histories = [], []
    for rd in map(Path, args.runs):
        report = ClassificationReport.from_json(_require(rd / "report.json", "evaluate"))
        history = EpochHistory.from_csv(_require(rd / "history.csv", "train"))
        runs.append((report, history, rd.name))
        histories.append((history, rd.name))
    out = Path(args.out or "comparison")
    out.mkdir(parents=True, exist_ok=True)
    table = compare(runs)
    table.to_json(out / "comparison.json")
    plot_comparison_bars(table, out / "comparison.png")
    plot_test_curves(histories, out / "test_curves.png")
    write_epoch_deltas([epoch_delta(h, n) for h, n in histories], out / "epoch_delta.csv")
    width = max(len(r.name) for r in table.rows)
    print(f"{'model'.ljust(width)}  accuracy  macro_f1  weighted_f1  test_loss")
    for r in table.rows:
        mark = "  <- best" if r.best else ""
        print(f"{r.name.ljust(width)}  {r.accuracy:8.4f}  {r.macro_f1:8.4f}  {r.weighted_f1:11.4f}  "
              f"{r.final_test_loss:9.4f}{mark}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON run config")
    common.add_argument("--model", help="backbone kind")
    common.add_argument("--out", help="output directory (runs live in <out>/<run_name>)")
    common.add_argument("--seed", type=int)
    common.add_argument("--epochs", type=int)
    common.add_argument("--lr", type=float)
    common.add_argument("--batch", type=int)
    common.add_argument("--mode", choices=("caffe", "tf", "torch"))
    common.add_argument("--pretrained", help="backbone weight archive (.safetensors)")
    common.add_argument("--force", action="store_true", help="overwrite existing run artifacts")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="numtabench", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="scan, clean and subsample the dataset")
    sub.add_parser("split", parents=[common], help="stratified train/test/new-data split")
    sub.add_parser("train", parents=[common], help="fine-tune a backbone on the train split")
    sub.add_parser("evaluate", parents=[common], help="classification reports for a trained run")
    cp = sub.add_parser("compare", help="compare evaluated runs")
    cp.add_argument("runs", nargs="*", help="run directories")
    cp.add_argument("--out", help="where comparison artifacts go")
    cp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "compare":
            return cmd_compare(args)
        cfg = _config(args)
        return {"ingest": cmd_ingest, "split": cmd_split, "train": cmd_train,
                "evaluate": cmd_evaluate}[args.command](cfg, args)
    except (ConfigError, WorkflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, EmptyDatasetError, ArchiveError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
