"""Command-line orchestration: preprocess, train, eval, compare, synth.

Every command writes its artifacts under ``--out`` together with a
``manifest.json`` naming each file's role and sha256.  A flat ``key=value``
config file can pre-set any flag; explicit flags win.  Relative input paths
are resolved against $RESNIDS_DATA_ROOT when they do not exist locally.

Exit codes: 0 success, 2 user/config error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (
    FoldPlan,
    apply_encoder,
    fit_encoder,
    make_folds,
    merge_raw,
    parse_csv,
    stratified_subsample,
)
from .errors import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_NUMERIC,
    EXIT_OK,
    ConfigError,
    DataError,
    NumericError,
    ShapeError,
)
from .metrics import ConfusionCounts, compute_metrics, confusion, prediction_histogram
from .network import NAMED_ARCHS, NetworkConfig, build_network
from .schemas import DATASET_IDS, GENERIC, get_schema, parse_schema_file
from .synth import generate_dataset_files
from .training import TrainConfig, evaluate, train

DATA_ROOT_ENV = "RESNIDS_DATA_ROOT"
EPOCH_DEFAULTS = {"nslkdd": 50, "unswnb15": 100, "generic": 50}


# ---------------------------------------------------------------------------
# small shared helpers

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, payload):
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_manifest(out_dir: Path, roles: dict[str, Path]):
    manifest = {
        "tool_version": __version__,
        "files": {
            role: {"path": p.name, "sha256": sha256_file(p)}
            for role, p in sorted(roles.items())
        },
    }
    write_json(out_dir / "manifest.json", manifest)


def resolve_input(path_str: str) -> Path:
    p = Path(path_str)
    if p.exists():
        return p
    root = os.environ.get(DATA_ROOT_ENV)
    if root and not p.is_absolute():
        candidate = Path(root) / p
        if candidate.exists():
            return candidate
    raise ConfigError(f"input path not found: {path_str}")


def load_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _cast_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


class Options:
    """Flag > config-file > built-in default resolution."""

    def __init__(self, args):
        self.args = args
        self.file_values = (
            load_config_file(resolve_input(args.config)) if args.config else {}
        )

    def get(self, name, default, cast=str):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.file_values:
            raw = self.file_values[name]
            if cast is bool:
                return _cast_bool(raw)
            if raw.lower() == "none":
                return None
            return cast(raw)
        return default


def load_dataset_dir(path_str: str):
    d = resolve_input(path_str)
    needed = [d / "encoded.npz", d / "meta.json", d / "folds.json"]
    for p in needed:
        if not p.exists():
            raise ConfigError(f"{d} is not a preprocessed dataset (missing {p.name})")
    with np.load(d / "encoded.npz", allow_pickle=False) as z:
        features = z["features"]
        onehot = z["onehot"]
        y = z["y"]
    meta = json.loads((d / "meta.json").read_text(encoding="utf-8"))
    folds = FoldPlan.from_json((d / "folds.json").read_text(encoding="utf-8"))
    return d, features, onehot, y, meta, folds


def _normal_index(meta) -> tuple[int, bool]:
    idx = meta.get("normal_index")
    if idx is None:
        return 0, True  # no class named "normal": treat class 0 as normal
    return int(idx), False


def _metrics_for(net, features, onehot, y, idx, meta):
    res = evaluate(net, features[idx], onehot[idx])
    normal, assumed = _normal_index(meta)
    counts = confusion(res.pred_classes, y[idx], normal)
    hist = prediction_histogram(res.pred_classes, meta["class_names"])
    report = compute_metrics(counts, hist)
    return res, report, assumed


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> int:
    opts = Options(args)
    out = Path(opts.get("out", "synth-data"))
    csv_path, schema_path, _ = generate_dataset_files(
        out,
        n_rows=opts.get("rows", 400, int),
        n_classes=opts.get("classes", 3, int),
        n_numeric=opts.get("numeric", 6, int),
        vocab_sizes=tuple(
            int(v) for v in str(opts.get("vocab_sizes", "3,4")).split(",")
        ),
        seed=opts.get("seed", 0, int),
        class_sep=opts.get("class_sep", 2.0, float),
        noise=opts.get("noise", 1.0, float),
        label_noise=opts.get("label_noise", 0.0, float),
    )
    write_manifest(out, {"csv": csv_path, "schema": schema_path})
    print(f"wrote {csv_path} and {schema_path}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    opts = Options(args)
    dataset_id = args.dataset
    schema_path = opts.get("schema", None)
    if schema_path:
        schema = parse_schema_file(resolve_input(schema_path), dataset_id)
    elif dataset_id == GENERIC:
        raise ConfigError("--schema is required for the generic dataset id")
    else:
        schema = get_schema(dataset_id)

    inputs = [resolve_input(p) for p in args.input]
    parts = [parse_csv(p, schema) for p in inputs]
    raw = merge_raw(parts)
    if raw.n_rows == 0:
        raise DataError("no usable rows after parsing (all rejected or empty)")

    encoder = fit_encoder(schema, raw.rows, raw.labels)
    encoded = apply_encoder(encoder, schema, raw.rows, raw.labels,
                            raw.binary_flags)
    k = opts.get("folds", 10, int)
    seed = opts.get("seed", 0, int)
    plan = make_folds(encoded.y, k=k, seed=seed)

    out = Path(opts.get("out", "preprocessed"))
    out.mkdir(parents=True, exist_ok=True)
    npz_path = out / "encoded.npz"
    with open(npz_path, "wb") as fh:
        np.savez(fh, features=encoded.features, onehot=encoded.onehot,
                 y=encoded.y)
    (out / "encoder.json").write_text(encoder.to_json() + "\n", encoding="utf-8")
    (out / "folds.json").write_text(plan.to_json() + "\n", encoding="utf-8")

    class_hist = {
        name: int((encoded.y == i).sum())
        for i, name in enumerate(encoded.class_names)
    }
    meta = {
        "dataset_id": dataset_id,
        "width": encoder.width,
        "class_names": encoded.class_names,
        "attack_mask": encoded.attack_mask.tolist(),
        "normal_index": encoded.normal_index,
        "tool_version": __version__,
    }
    write_json(out / "meta.json", meta)
    summary = {
        "dataset_id": dataset_id,
        "encoded_width": encoder.width,
        "n_rows": raw.n_rows,
        "class_histogram": class_hist,
        "rejects": len(raw.rejects),
        "reject_samples": [
            {"line": r.line, "column": r.column, "reason": r.reason}
            for r in raw.rejects[:20]
        ],
        "unseen_values": encoded.unseen_count,
        "unseen_by_column": encoded.unseen_by_column,
        "binary_label_mismatches": encoded.binary_mismatches,
        "inputs": [
            {"path": str(p), "sha256": sha256_file(p)} for p in inputs
        ],
        "folds": k,
        "seed": seed,
    }
    write_json(out / "summary.json", summary)
    write_manifest(out, {
        "encoded": npz_path,
        "encoder": out / "encoder.json",
        "folds": out / "folds.json",
        "meta": out / "meta.json",
        "summary": out / "summary.json",
    })
    print(f"encoded width: {encoder.width}")
    print(f"rows: {raw.n_rows}  rejects: {len(raw.rejects)}")
    print(f"classes: {class_hist}")
    return EXIT_OK


def _train_cfg(opts, meta, seed) -> TrainConfig:
    epochs = opts.get("epochs", None, int)
    if epochs is None:
        epochs = EPOCH_DEFAULTS.get(meta["dataset_id"], 50)
    return TrainConfig(
        learning_rate=opts.get("lr", 0.01, float),
        epochs=epochs,
        batch_size=opts.get("batch", 4000, int),
        rms_decay=opts.get("rms_decay", 0.9, float),
        rms_epsilon=opts.get("rms_epsilon", 1e-7, float),
        seed=seed,
        gradient_clip=opts.get("grad_clip", None, float),
        record_grad_norms=bool(opts.get("grad_probe", False, bool)),
    )


def _dataset_hashes(dataset_dir: Path) -> dict:
    manifest = dataset_dir / "manifest.json"
    if manifest.exists():
        payload = json.loads(manifest.read_text(encoding="utf-8"))
        return {
            role: info["sha256"] for role, info in payload["files"].items()
        }
    return {"encoded": sha256_file(dataset_dir / "encoded.npz")}


def _write_predictions(path: Path, idx, y_true, preds, class_names):
    lines = ["index,true_class,pred_class"]
    for i, t, p in zip(idx.tolist(), y_true.tolist(), preds.tolist()):
        lines.append(f"{i},{class_names[t]},{class_names[p]}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_train(args) -> int:
    opts = Options(args)
    dataset_dir, features, onehot, y, meta, plan = load_dataset_dir(args.dataset)
    seed = opts.get("seed", 0, int)
    arch = opts.get("arch", "residual")
    if arch not in ("plain", "residual"):
        raise ConfigError(f"unknown arch {arch!r}; expected plain or residual")
    blocks = opts.get("blocks", 5, int)
    cfg = _train_cfg(opts, meta, seed)
    net_cfg = NetworkConfig(
        blocks=blocks, kind=arch, features=int(meta["width"]),
        classes=len(meta["class_names"]), kernel=opts.get("kernel", 10, int),
        dropout_rate=opts.get("dropout", 0.6, float), seed=seed,
    )
    net_cfg.validate()  # surface filter/feature mismatches before training
    if features.shape[1] != net_cfg.features:
        raise ShapeError(
            f"encoded width {features.shape[1]} does not match configured "
            f"features {net_cfg.features}"
        )

    folds_to_run = (
        list(range(plan.k)) if opts.get("all_folds", False, bool)
        else [opts.get("fold", 0, int)]
    )
    out = Path(opts.get("out", "train-out"))
    out.mkdir(parents=True, exist_ok=True)

    roles: dict[str, Path] = {}
    per_fold = []
    pooled = ConfusionCounts(0, 0, 0, 0)
    start_all = time.monotonic()
    for fold in folds_to_run:
        t0 = time.monotonic()
        train_idx = plan.train_indices(fold)
        test_idx = plan.test_indices(fold)
        net = build_network(net_cfg)
        history = train(net, features, onehot, train_idx, test_idx, cfg)
        res, report, normal_assumed = _metrics_for(
            net, features, onehot, y, test_idx, meta
        )
        elapsed = time.monotonic() - t0

        hist_path = out / f"history_fold{fold}.csv"
        hist_path.write_text(history.to_csv(), encoding="utf-8")
        roles[f"history_fold{fold}"] = hist_path
        ckpt_path = out / f"checkpoint_fold{fold}.npz"
        save_checkpoint(ckpt_path, net, extra_meta={
            "dataset_id": meta["dataset_id"],
            "class_names": meta["class_names"],
            "normal_index": meta["normal_index"],
            "fold": fold,
        })
        roles[f"checkpoint_fold{fold}"] = ckpt_path
        if cfg.record_grad_norms:
            gn_path = out / f"gradnorms_fold{fold}.csv"
            gn_path.write_text(history.grad_norms_to_csv(), encoding="utf-8")
            roles[f"gradnorms_fold{fold}"] = gn_path
        if opts.get("dump_predictions", False, bool):
            pred_path = out / f"predictions_fold{fold}.csv"
            _write_predictions(pred_path, test_idx, y[test_idx],
                               res.pred_classes, meta["class_names"])
            roles[f"predictions_fold{fold}"] = pred_path

        pooled = pooled + report.counts
        per_fold.append({
            "fold": fold,
            "metrics": report.to_dict(),
            "normal_class_assumed": normal_assumed,
            "final_epoch": {
                "train_loss": history.epochs[-1].train_loss,
                "train_acc": history.epochs[-1].train_acc,
                "test_loss": history.epochs[-1].test_loss,
                "test_acc": history.epochs[-1].test_acc,
            },
            "param_hash_per_epoch": [e.param_hash for e in history.epochs],
            "updates": history.update_count,
            "seconds": elapsed,
        })
        acc_txt = f"{report.acc:.4f}"
        dr_txt = "n/a" if report.dr is None else f"{report.dr:.4f}"
        far_txt = "n/a" if report.far is None else f"{report.far:.4f}"
        print(f"fold {fold}: ACC {acc_txt}  DR {dr_txt}  FAR {far_txt}")

    pooled_report = compute_metrics(pooled)
    fold_mean = {
        "acc": float(np.mean([f["metrics"]["acc"] for f in per_fold])),
        "dr": _mean_or_none([f["metrics"]["dr"] for f in per_fold]),
        "far": _mean_or_none([f["metrics"]["far"] for f in per_fold]),
    }
    summary_path = dataset_dir / "summary.json"
    counters = {}
    if summary_path.exists():
        s = json.loads(summary_path.read_text(encoding="utf-8"))
        counters = {
            "rejects": s.get("rejects"),
            "unseen_values": s.get("unseen_values"),
            "binary_label_mismatches": s.get("binary_label_mismatches"),
        }
    report_payload = {
        "command": "train",
        "tool_version": __version__,
        "network": net_cfg.to_dict(),
        "training": {
            "learning_rate": cfg.learning_rate, "epochs": cfg.epochs,
            "batch_size": cfg.batch_size, "rms_decay": cfg.rms_decay,
            "rms_epsilon": cfg.rms_epsilon, "seed": cfg.seed,
            "gradient_clip": cfg.gradient_clip,
        },
        "dataset": {
            "path": str(dataset_dir),
            "dataset_id": meta["dataset_id"],
            "width": meta["width"],
            "hashes": _dataset_hashes(dataset_dir),
            "counters": counters,
        },
        "folds_run": folds_to_run,
        "per_fold": per_fold,
        "pooled_metrics": pooled_report.to_dict(),
        "fold_mean_metrics": fold_mean,
        "wall_seconds": time.monotonic() - start_all,
    }
    report_path = out / "report.json"
    write_json(report_path, report_payload)
    roles["report"] = report_path
    write_manifest(out, roles)
    print(f"pooled: ACC {pooled_report.acc:.4f}")
    return EXIT_OK


def _mean_or_none(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def cmd_eval(args) -> int:
    opts = Options(args)
    ckpt_path = resolve_input(args.checkpoint)
    net, ckpt_meta = load_checkpoint(ckpt_path)
    dataset_dir, features, onehot, y, meta, plan = load_dataset_dir(args.dataset)
    if features.shape[1] != net.features:
        raise ConfigError(
            f"checkpoint expects {net.features} features but the dataset "
            f"provides {features.shape[1]}"
        )
    fold = opts.get("fold", 0, int)
    test_idx = plan.test_indices(fold)
    res, report, normal_assumed = _metrics_for(
        net, features, onehot, y, test_idx, meta
    )
    payload = {
        "command": "eval",
        "tool_version": __version__,
        "checkpoint": str(ckpt_path),
        "dataset": str(dataset_dir),
        "fold": fold,
        "test_loss": res.loss,
        "test_acc": res.accuracy,
        "metrics": report.to_dict(),
        "normal_class_assumed": normal_assumed,
    }
    out_dir = Path(opts.get("out", str(ckpt_path.parent)))
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / f"metrics_fold{fold}.json"
    write_json(metrics_path, payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_compare(args) -> int:
    opts = Options(args)
    dataset_dir, features, onehot, y, meta, plan = load_dataset_dir(args.dataset)
    tokens = [t.strip() for t in opts.get("archs", "plain21,res21,plain41,res41")
              .split(",") if t.strip()]
    for t in tokens:
        if t not in NAMED_ARCHS:
            raise ConfigError(
                f"unknown arch token {t!r}; expected {sorted(NAMED_ARCHS)}"
            )
    seed = opts.get("seed", 0, int)
    cfg = _train_cfg(opts, meta, seed)
    fold = opts.get("fold", 0, int)

    subsample = opts.get("subsample", None, int)
    if subsample is not None:
        sub = stratified_subsample(y, subsample, seed=seed)
        sub_plan = make_folds(y[sub], k=plan.k, seed=seed)
        train_idx = sub[sub_plan.train_indices(fold)]
        test_idx = sub[sub_plan.test_indices(fold)]
    else:
        train_idx = plan.train_indices(fold)
        test_idx = plan.test_indices(fold)

    out = Path(opts.get("out", "compare-out"))
    out.mkdir(parents=True, exist_ok=True)
    curve_lines = ["arch,epoch,train_loss,train_acc,test_loss,test_acc"]
    table_lines = ["arch,tp,fp,dr,acc,far"]
    results = []
    for token in tokens:
        kind, blocks = NAMED_ARCHS[token]
        net_cfg = NetworkConfig(
            blocks=blocks, kind=kind, features=int(meta["width"]),
            classes=len(meta["class_names"]),
            kernel=opts.get("kernel", 10, int),
            dropout_rate=opts.get("dropout", 0.6, float), seed=seed,
        )
        t0 = time.monotonic()
        net = build_network(net_cfg)
        history = train(net, features, onehot, train_idx, test_idx, cfg)
        _, report, normal_assumed = _metrics_for(
            net, features, onehot, y, test_idx, meta
        )
        elapsed = time.monotonic() - t0
        for e in history.epochs:
            curve_lines.append(
                f"{token},{e.epoch},{e.train_loss!r},{e.train_acc!r},"
                f"{e.test_loss!r},{e.test_acc!r}"
            )
        dr_txt = "" if report.dr is None else repr(report.dr)
        far_txt = "" if report.far is None else repr(report.far)
        table_lines.append(
            f"{token},{report.counts.tp},{report.counts.fp},"
            f"{dr_txt},{report.acc!r},{far_txt}"
        )
        results.append({
            "arch": token,
            "parameter_layers": net.parameter_layer_count,
            "metrics": report.to_dict(),
            "normal_class_assumed": normal_assumed,
            "final_train_loss": history.epochs[-1].train_loss,
            "final_test_loss": history.epochs[-1].test_loss,
            "seconds": elapsed,
        })
        print(
            f"{token}: final train loss "
            f"{history.epochs[-1].train_loss:.4f}, "
            f"TP {report.counts.tp}, FP {report.counts.fp}"
        )

    curves_path = out / "curves.csv"
    curves_path.write_text("\n".join(curve_lines) + "\n", encoding="utf-8")
    table_path = out / "comparison.csv"
    table_path.write_text("\n".join(table_lines) + "\n", encoding="utf-8")
    report_payload = {
        "command": "compare",
        "tool_version": __version__,
        "archs": tokens,
        "seed": seed,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "subsample": subsample,
        "fold": fold,
        "train_rows": int(train_idx.size),
        "test_rows": int(test_idx.size),
        "dataset": {
            "path": str(dataset_dir),
            "hashes": _dataset_hashes(dataset_dir),
        },
        "results": results,
    }
    report_path = out / "report.json"
    write_json(report_path, report_payload)
    write_manifest(out, {
        "curves": curves_path,
        "comparison": table_path,
        "report": report_path,
    })
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resnids",
        description="Residual CNN+GRU networks for flow-based intrusion "
                    "detection: preprocessing, training, evaluation, and the "
                    "four-network comparison.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("synth", help="generate a synthetic schema-conformant CSV")
    common(p)
    p.add_argument("--rows", type=int)
    p.add_argument("--classes", type=int)
    p.add_argument("--numeric", type=int)
    p.add_argument("--vocab-sizes", dest="vocab_sizes")
    p.add_argument("--class-sep", dest="class_sep", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--label-noise", dest="label_noise", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="parse, encode and fold a dataset")
    common(p)
    p.add_argument("--dataset", required=True, choices=DATASET_IDS)
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--schema", help="schema override file (name:kind lines)")
    p.add_argument("--folds", type=int)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train one network on a preprocessed dataset")
    common(p)
    p.add_argument("--dataset", required=True, help="preprocessed dataset dir")
    p.add_argument("--arch", choices=("plain", "residual"))
    p.add_argument("--blocks", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--kernel", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--rms-decay", dest="rms_decay", type=float)
    p.add_argument("--rms-epsilon", dest="rms_epsilon", type=float)
    p.add_argument("--grad-clip", dest="grad_clip", type=float)
    p.add_argument("--fold", type=int)
    p.add_argument("--all-folds", dest="all_folds", action="store_true",
                   default=None)
    p.add_argument("--grad-probe", dest="grad_probe", action="store_true",
                   default=None)
    p.add_argument("--dump-predictions", dest="dump_predictions",
                   action="store_true", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a held-out fold")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--fold", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="train the four reference networks and "
                                       "tabulate their metrics")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--archs")
    p.add_argument("--subsample", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--kernel", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--fold", type=int)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
