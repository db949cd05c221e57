"""Command-line front end: ``maada gen | train | report``.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import bound_report, risk_split
from .data import PRNG_ALGORITHM, gen_circle, gen_two_moons, load_csv, rotate, save_csv
from .errors import ConfigError, DataError, MaadaError, TrainingError
from .model import ModelParams
from .trainer import TrainConfig, train

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(MaadaError):
    pass


# -- model files ---------------------------------------------------------------

def save_model(params: ModelParams, path) -> Path:
    """Little-endian float64 values plus a ``<path>.json`` shape header."""
    path = Path(path)
    params.flat().astype("<f8").tofile(path)
    header = {"format": "maada-flat-f64", "byteorder": "little", "dtype": "float64",
              "layer_sizes": params.layer_sizes, "count": int(params.flat().size),
              "order": "per layer: weight (fan_in x fan_out, row-major) then bias"}
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(header, indent=2) + "\n")
    return sidecar


def load_model(path) -> ModelParams:
    path = Path(path)
    sidecar = path.with_name(path.name + ".json")
    try:
        header = json.loads(sidecar.read_text())
        flat = np.fromfile(path, dtype="<f8")
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read model {path}: {exc}") from None
    if flat.size != header.get("count"):
        raise UsageError(f"model {path} has {flat.size} values, header says {header.get('count')}")
    return ModelParams.from_flat(header["layer_sizes"], flat.astype(np.float64))


def load_config(path) -> TrainConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return TrainConfig.from_dict(raw)


def _load_data(path):
    try:
        return load_csv(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


# -- subcommands -----------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.kind == "two-moons":
        ds = gen_two_moons(args.n, args.noise, args.seed, domain=args.domain)
    else:
        ds = gen_circle(args.n, args.radius, args.seed, domain=args.domain)
        if args.noise:
            rng = np.random.Generator(np.random.PCG64([args.seed, 1]))
            ds.X = ds.X + rng.normal(0.0, args.noise, size=ds.X.shape)
    if args.rotate_deg:
        ds = rotate(ds, np.deg2rad(args.rotate_deg))
    if args.drop_labels:
        ds = ds.with_labels(np.full(len(ds), -1))
    save_csv(ds, args.out)
    print(args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    config = load_config(args.config)
    source, target = _load_data(args.source), _load_data(args.target)
    target_eval = _load_data(args.target_eval) if args.target_eval else None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params, log = train(config, source, target, target_eval)
    metrics = out / "metrics.jsonl"
    metrics.write_text(log.to_jsonl())
    model_path = out / "model.bin"
    sidecar = save_model(params, model_path)
    manifest = {
        "tool": "maada",
        "version": __version__,
        "prng": PRNG_ALGORITHM,
        "seed": config.seed,
        "config": config.to_dict(),
        "inputs": {"source": str(args.source), "target": str(args.target),
                   "target_eval": str(args.target_eval) if args.target_eval else None},
        "artifacts": {"metrics": str(metrics), "model": str(model_path), "model_header": str(sidecar)},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(out / "manifest.json")
    return EXIT_OK


def cmd_report(args) -> int:
    if args.lambda_star and not args.target_oracle:
        raise UsageError("--lambda-star requires --target-oracle")
    config = load_config(args.config)
    params = load_model(args.model)
    source, target = _load_data(args.source), _load_data(args.target)
    oracle = _load_data(args.target_oracle) if args.target_oracle else None
    if oracle is not None and not oracle.labeled:
        raise UsageError("--target-oracle file must carry labels for every point")

    labeled_target = oracle if oracle is not None else (target if target.labeled else None)
    split = None
    if labeled_target is not None:
        split = risk_split(params, labeled_target, config.beta, config.k, config.m, config.norm_floor).as_dict()
    report = bound_report(params, source, target, config, oracle)
    doc = {
        "tool": "maada",
        "version": __version__,
        "config": config.to_dict(),
        "risk_split": split,
        "epsilon_c": {"mean": report.epsilon_c_mean, "max": report.epsilon_c_max},
        "geod": report.geod.as_dict(),
        "bound": report.as_dict(),
        "notes": "all quantities are empirical surrogates; lambda_star_upper is a pooled-ERM upper estimate",
    }
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    print(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maada", description="Manifold-aware adversarial data augmentation")
    p.add_argument("--version", action="version", version=f"maada {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset as CSV")
    g.add_argument("--kind", choices=["two-moons", "circle"], required=True)
    g.add_argument("--n", type=int, default=400)
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--rotate-deg", type=float, default=0.0)
    g.add_argument("--radius", type=float, default=1.0)
    g.add_argument("--domain", choices=["source", "target"], default="source")
    g.add_argument("--drop-labels", action="store_true")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a classifier from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--source", required=True)
    t.add_argument("--target", required=True)
    t.add_argument("--target-eval", help="labeled target CSV used only for per-epoch accuracy")
    t.add_argument("--out-dir", required=True)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("report", help="risk split, epsilon_c, GeoD and the bound report")
    r.add_argument("--model", required=True)
    r.add_argument("--source", required=True)
    r.add_argument("--target", required=True)
    r.add_argument("--target-oracle")
    r.add_argument("--lambda-star", action="store_true", help="require the pooled-ERM lambda* estimate")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"maada: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DataError, UsageError) as exc:
        print(f"maada: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MaadaError as exc:
        print(f"maada: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
