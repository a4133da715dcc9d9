"""Command-line surface: dataset conversion, training, evaluation, plotting,
and similarity-matrix export."""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import datasets, evaluation, plotting, similarity, training
from .graph import GraphFormatError, load_graph, write_graph
from .model import save_checkpoint
from .training import TrainConfig

MANIFEST_VERSION = 1
EMBEDDINGS_TAG = "#dmgae-embeddings-v1"
METRICS_VERSION = 1


class ConfigError(ValueError):
    """Invalid run configuration; carries the full list of problems."""


# dataset / output keys accepted in a run config alongside TrainConfig fields
RUN_KEYS = ("edge_file", "feature_file", "label_file", "out_dir")

_TRAIN_FIELDS = {f.name: f.type for f in dataclasses.fields(TrainConfig)}


def _parse_value(key: str, raw: str):
    if key in RUN_KEYS:
        return raw
    ftype = _TRAIN_FIELDS[key]
    if ftype in ("bool", bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if ftype in ("int", int):
        return int(raw)
    if ftype in ("float", float):
        return float(raw)
    return raw


def parse_config_file(path: str | Path) -> dict:
    """Flat key=value config file; blank lines and #-comments ignored."""
    values = {}
    errors = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                errors.append(f"{path}:{lineno}: expected key=value, got {line!r}")
                continue
            key, raw = line.split("=", 1)
            key, raw = key.strip(), raw.strip()
            if key not in _TRAIN_FIELDS and key not in RUN_KEYS:
                errors.append(f"{path}:{lineno}: unknown key {key!r}")
                continue
            try:
                values[key] = _parse_value(key, raw)
            except (ValueError, ConfigError) as exc:
                errors.append(f"{path}:{lineno}: {exc}")
    if errors:
        raise ConfigError("\n".join(errors))
    return values


def apply_overrides(values: dict, overrides: list[str]) -> dict:
    """Apply --key=value override tokens onto a config dict."""
    values = dict(values)
    errors = []
    for token in overrides:
        if not token.startswith("--") or "=" not in token:
            errors.append(f"override {token!r}: expected --key=value")
            continue
        key, raw = token[2:].split("=", 1)
        if key not in _TRAIN_FIELDS and key not in RUN_KEYS:
            errors.append(f"override --{key}: unknown key")
            continue
        try:
            values[key] = _parse_value(key, raw)
        except (ValueError, ConfigError) as exc:
            errors.append(f"override --{key}: {exc}")
    if errors:
        raise ConfigError("\n".join(errors))
    return values


def resolve_run_config(values: dict) -> tuple[TrainConfig, dict]:
    """Split a raw config dict into (TrainConfig, run paths); validate fully."""
    errors = []
    run = {k: values.get(k) for k in RUN_KEYS}
    if not run.get("edge_file"):
        errors.append("edge_file is required")
    if not run.get("feature_file"):
        errors.append("feature_file is required")
    train_values = {k: v for k, v in values.items() if k in _TRAIN_FIELDS}
    cfg = TrainConfig(**train_values)
    errors.extend(cfg.validate())
    if errors:
        raise ConfigError("\n".join(errors))
    return cfg, run


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(cfg: TrainConfig, run: dict) -> str:
    doc = json.dumps({"config": cfg.to_dict(), "run": run}, sort_keys=True)
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def write_embeddings(path: str | Path, z: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(EMBEDDINGS_TAG + "\n")
        for i, row in enumerate(z):
            fh.write(str(i) + "\t" + "\t".join(f"{v:.8g}" for v in row) + "\n")


def read_embeddings(path: str | Path) -> np.ndarray:
    with open(path) as fh:
        tag = fh.readline().strip()
        if tag != EMBEDDINGS_TAG:
            raise GraphFormatError(f"{path}: unknown embeddings format tag {tag!r}")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if int(parts[0]) != len(rows):
                raise GraphFormatError(f"{path}:{lineno}: node ids must be sequential")
            rows.append([float(v) for v in parts[1:]])
    return np.asarray(rows, dtype=np.float64)


def _load_run_graph(run: dict):
    return load_graph(run["edge_file"], run["feature_file"], run.get("label_file"))


def cmd_convert(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format != "planetoid":
        raise ConfigError(f"unknown source format {args.format!r}")
    g = datasets.load_planetoid(args.input, args.name)
    has_labels = g.labels is not None
    write_graph(
        g,
        out / "edges.txt",
        out / "features.txt",
        (out / "labels.txt") if has_labels else None,
    )
    print(
        f"converted {args.name}: n={g.n}, edges={g.num_edges}, "
        f"features={g.num_features}, classes={len(np.unique(g.labels)) if has_labels else 0}"
    )
    return 0


def _gather_config(args) -> dict:
    if getattr(args, "from_manifest", None):
        with open(args.from_manifest) as fh:
            manifest = json.load(fh)
        if manifest.get("format_version") != MANIFEST_VERSION:
            raise ConfigError(
                f"unsupported manifest version {manifest.get('format_version')!r}"
            )
        values = dict(manifest["config"])
        values.update({k: v for k, v in manifest["run"].items() if v is not None})
    elif args.config:
        values = parse_config_file(args.config)
    else:
        values = {}
    return apply_overrides(values, args.overrides)


def cmd_train(args) -> int:
    values = _gather_config(args)
    cfg, run = resolve_run_config(values)
    if not run.get("out_dir"):
        raise ConfigError("out_dir is required")
    g = _load_run_graph(run)
    errs = cfg.validate(g.n)
    if errs:
        raise ConfigError("\n".join(errs))

    out = Path(run["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    inputs = {
        k: _sha256(run[k]) for k in ("edge_file", "feature_file", "label_file") if run.get(k)
    }
    manifest = {
        "format_version": MANIFEST_VERSION,
        "config": cfg.to_dict(),
        "run": run,
        "inputs": inputs,
        "config_hash": config_hash(cfg, run),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)

    log_path = out / "train.log.jsonl"
    t0 = time.time()
    with open(log_path, "w") as log_fh:

        def on_epoch(epoch, report):
            doc = {"epoch": epoch, **report.to_dict(), "wall_time": time.time() - t0}
            if not cfg.variational:
                doc.pop("kl")  # the non-probabilistic path has no KL term
            log_fh.write(json.dumps(doc) + "\n")

        def on_checkpoint(epoch, model):
            save_checkpoint(model, out / "checkpoint", {"epoch": epoch})

        state, embedding, _ = training.fit(
            g, cfg, epoch_callback=on_epoch, checkpoint_callback=on_checkpoint
        )
    save_checkpoint(state.model, out / "checkpoint", {"epoch": cfg.epochs})
    write_embeddings(out / "embeddings.tsv", embedding)
    print(f"trained {cfg.epochs} epochs; embeddings at {out / 'embeddings.tsv'}")
    return 0


def _parse_seeds(raw: str) -> list[int]:
    return [int(s) for s in raw.split(",") if s.strip() != ""]


def _aggregate(per_seed: list[dict], keys: list[str]) -> dict:
    agg = {}
    for key in keys:
        vals = np.array([d[key] for d in per_seed])
        agg[f"{key}_mean"] = float(vals.mean())
        agg[f"{key}_std"] = float(vals.std())
    return agg


def cmd_eval(args) -> int:
    seeds = _parse_seeds(args.seeds)
    if not seeds:
        raise ConfigError("at least one seed is required")
    doc = {"format_version": METRICS_VERSION, "task": args.task, "seeds": seeds}

    if args.task == "cluster":
        if not args.embeddings or not args.labels:
            raise ConfigError("cluster task requires --embeddings and --labels")
        z = read_embeddings(args.embeddings)
        from .graph import _read_labels

        labels = _read_labels(args.labels)
        mask = labels >= 0
        classes = np.unique(labels[mask])
        c = args.clusters or len(classes)
        if c < 2:
            raise ConfigError("cluster task needs at least 2 classes")
        per_seed = []
        for seed in seeds:
            pred = evaluation.kmeans(z[mask], c, seed=seed)
            res = evaluation.clustering_metrics(pred, labels[mask])
            per_seed.append({"seed": seed, "acc": res.acc, "nmi": res.nmi, "f1": res.f1})
        doc["per_seed"] = per_seed
        doc["aggregate"] = _aggregate(per_seed, ["acc", "nmi", "f1"])
    elif args.task == "linkpred":
        if not args.config:
            raise ConfigError("linkpred task requires --config (training is per split)")
        values = apply_overrides(parse_config_file(args.config), args.overrides)
        cfg, run = resolve_run_config(values)
        g = _load_run_graph(run)
        doc["config_hash"] = config_hash(cfg, run)
        per_seed = []
        for seed in seeds:
            split = evaluation.split_edges(g, seed=seed)
            g_train = evaluation.split_graph(g, split)
            cfg_seed = dataclasses.replace(cfg, seed=seed)
            _, z, _ = training.fit(g_train, cfg_seed)
            auc, ap = evaluation.link_prediction_metrics(z, split)
            per_seed.append({"seed": seed, "auc": auc, "ap": ap})
        doc["per_seed"] = per_seed
        doc["aggregate"] = _aggregate(per_seed, ["auc", "ap"])
    else:
        raise ConfigError(f"unknown task {args.task!r}")

    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_plot(args) -> int:
    z = read_embeddings(args.embeddings)
    labels = None
    if args.labels:
        from .graph import _read_labels

        labels = _read_labels(args.labels)
    coords = plotting.pca_2d(z)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    plotting.write_scatter(
        coords, labels, prefix.with_suffix(".csv"), prefix.with_suffix(".svg")
    )
    print(f"wrote {prefix.with_suffix('.csv')} and {prefix.with_suffix('.svg')}")
    return 0


def cmd_export_similarity(args) -> int:
    values = apply_overrides(parse_config_file(args.config), args.overrides)
    cfg, run = resolve_run_config(values)
    g = _load_run_graph(run)
    x = training.prepared_features(g, cfg)
    params = similarity.KernelParams(nu=cfg.nu_input, q_p=cfg.q_p)
    if args.which == "prior":
        p = similarity.similarity_pipeline(
            x, training.prior_edges(g, cfg, x), "prior", params, space="input"
        )
    elif args.which == "complete":
        p = similarity.similarity_pipeline(x, None, "complete", params, space="input")
    else:
        raise ConfigError(f"unknown matrix {args.which!r}")
    similarity.export_tsv(p, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dmgae",
        description="Deep manifold (variational) graph auto-encoder",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a source dataset to canonical files")
    p.add_argument("--input", required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--format", default="planetoid", choices=["planetoid"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("train", help="train and write embeddings")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--from-manifest", help="re-run from a previous manifest.json")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="node clustering or link prediction metrics")
    p.add_argument("--task", required=True, choices=["cluster", "linkpred"])
    p.add_argument("--embeddings")
    p.add_argument("--labels")
    p.add_argument("--clusters", type=int)
    p.add_argument("--config")
    p.add_argument("--seeds", default="0")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="2D PCA scatter (CSV + SVG)")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("export-similarity", help="dump an input-space similarity matrix as TSV")
    p.add_argument("--config", required=True)
    p.add_argument("--which", required=True, choices=["prior", "complete"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_similarity)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    args.overrides = extra
    try:
        return args.func(args)
    except (ConfigError, GraphFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
