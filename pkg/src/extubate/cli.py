"""Command-line pipeline: generate, preprocess, train, search, evaluate, ablate, ensemble.

Every command writes ``manifest.json`` into its output directory and checks
the hashes of the artifacts it reads against the producing stage's manifest.
Exit codes: 0 success, 2 configuration error, 3 missing or bad data,
4 hash mismatch, 5 schema or shape error, 6 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np
from sklearn.base import clone

from . import __version__
from .bundle import TabularData
from .catalog import FEATURE_SET_THRESHOLDS
from .cohort import GeneratorConfig, generate_cohort, read_ndjson, write_ndjson
from .evaluation import (
    ensemble_average,
    ensemble_stack,
    evaluate,
    feature_ablation,
    out_of_fold_probabilities,
)
from .exceptions import ConfigError, ExtubateError, SchemaError
from .io import (
    RunManifest,
    config_hash,
    load_bundle,
    load_checkpoint,
    load_tabular,
    read_json,
    save_bundle,
    save_checkpoint,
    save_tabular,
    sha256_file,
    verify_artifacts,
    write_json,
)
from .models import FusedLSTMClassifier, FusedTCNClassifier, GBDTClassifier
from .pipeline import prepare
from .training import hyperparam_search

ESTIMATORS = {"fused-lstm": FusedLSTMClassifier, "fused-tcn": FusedTCNClassifier,
              "gbdt": GBDTClassifier}

PREPROCESS_DEFAULTS = {"threshold": None, "ratio": 0.8, "single_rate": False,
                       "single_interval": 30, "upsample": True, "include_charlson": False,
                       "intervals": None}


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return cfg


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(command, out, cfg, seed, inputs, outputs) -> None:
    m = RunManifest(command, config_hash(cfg), seed, cfg)
    for p in inputs:
        m.add_input(out, p)
    for p in outputs:
        m.add_output(out, p)
    m.write(out)


def _estimator(family: str, params: dict, static: bool, seed):
    if family not in ESTIMATORS:
        raise ConfigError(f"family must be one of {sorted(ESTIMATORS)}, got {family!r}")
    est = ESTIMATORS[family]()
    params = dict(params)
    if family != "gbdt":
        params.setdefault("use_static", static)
    params.setdefault("random_state", seed)
    try:
        est.set_params(**params)
    except ValueError as exc:
        if isinstance(exc, ExtubateError):
            raise
        raise ConfigError(f"bad {family} parameters: {exc}") from exc
    return est


def _data_inputs(data_dir: Path, family: str, split: str) -> list[Path]:
    name = f"{split}.tab" if family == "gbdt" else f"{split}.bundle"
    verify_artifacts(data_dir, [name, "labels.json", "state.json"])
    return [data_dir / name, data_dir / "labels.json", data_dir / "state.json"]


def _load_split(data_dir: Path, family: str, split: str, static: bool):
    labels = read_json(data_dir / "labels.json")
    y = np.asarray(labels[split], dtype=int)
    if family == "gbdt":
        tab = load_tabular(data_dir / f"{split}.tab")
        if not static:
            static_names = set(read_json(data_dir / "state.json")["static_features"])
            keep = [i for i, f in enumerate(tab.feature_names) if f not in static_names]
            tab = TabularData(tab.X[:, keep], [tab.feature_names[i] for i in keep],
                              tab.patient_ids, tab.provenance)
        return tab, y
    bundle = load_bundle(data_dir / f"{split}.bundle")
    return (bundle if static else bundle.without_static()), y


def _probabilities(model, family, X):
    if family == "gbdt" and model.feature_names_ is not None:
        if list(X.feature_names) != list(model.feature_names_):
            raise SchemaError(f"tabular feature order differs from training: "
                              f"{X.feature_names} vs {model.feature_names_}")
    return model.predict_proba(X)[:, 1]


# ----------------------------------------------------------------- commands

def cmd_generate(args) -> None:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    gen = GeneratorConfig.from_dict(cfg)
    out = _out_dir(args.out)
    events, profiles, timelines = generate_cohort(gen)
    paths = [out / "events.ndjson", out / "profiles.ndjson", out / "timelines.ndjson",
             out / "config.json"]
    write_ndjson(paths[0], events)
    write_ndjson(paths[1], profiles)
    write_ndjson(paths[2], timelines)
    write_json(paths[3], gen.to_dict())
    _finish("generate", out, gen.to_dict(), gen.seed, [], paths)


def cmd_preprocess(args) -> None:
    cfg = dict(PREPROCESS_DEFAULTS)
    user = _load_config(args.config)
    unknown = set(user) - set(PREPROCESS_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown preprocess config keys: {sorted(unknown)}")
    cfg.update(user)
    if args.threshold is not None:
        cfg["threshold"] = args.threshold
    if cfg["threshold"] is None:
        cfg["threshold"] = FEATURE_SET_THRESHOLDS.get(args.feature_set, 0.5)
    cfg["feature_set"] = args.feature_set
    seed = 0 if args.seed is None else args.seed
    cohort = Path(args.cohort)
    names = ["events.ndjson", "profiles.ndjson", "timelines.ndjson", "config.json"]
    verify_artifacts(cohort, names)
    gen = GeneratorConfig.from_dict(read_json(cohort / "config.json"))
    d = prepare(read_ndjson(cohort / names[0], "events"),
                read_ndjson(cohort / names[1], "profiles"),
                read_ndjson(cohort / names[2], "timelines"),
                catalog=gen.feature_catalog, feature_set=args.feature_set,
                threshold=cfg["threshold"], ratio=cfg["ratio"], seed=seed,
                single_rate=cfg["single_rate"], single_interval=cfg["single_interval"],
                upsample=cfg["upsample"], include_charlson=cfg["include_charlson"],
                intervals=cfg["intervals"])
    out = _out_dir(args.out)
    paths = {n: out / n for n in ("train.bundle", "test.bundle", "train.tab", "test.tab",
                                  "labels.json", "split.json", "state.json")}
    save_bundle(paths["train.bundle"], d.train)
    save_bundle(paths["test.bundle"], d.test)
    save_tabular(paths["train.tab"], d.train_tab)
    save_tabular(paths["test.tab"], d.test_tab)
    write_json(paths["labels.json"], {"train": d.y_train.tolist(), "test": d.y_test.tolist()})
    write_json(paths["split.json"], {"train_ids": d.train_ids, "test_ids": d.test_ids,
                                     "ratio": cfg["ratio"], "seed": seed})
    enc = d.encoder
    write_json(paths["state.json"], {
        "sequencer": d.sequencer.state_dict(),
        "static_encoder": {"fences": enc.fences_, "means": enc.means_,
                           "scaler": enc.scaler_.to_dict()},
        "static_features": list(enc.get_feature_names_out()),
        "aggregate_fill": d.aggregator.fill_,
    })
    _finish("preprocess", out, cfg, seed, [cohort / n for n in names], paths.values())


def cmd_train(args) -> None:
    params = _load_config(args.config)
    seed = 0 if args.seed is None else args.seed
    est = _estimator(args.family, params, args.static, seed)
    data = Path(args.data)
    inputs = _data_inputs(data, args.family, "train")
    X, y = _load_split(data, args.family, "train", args.static)
    est.fit(X, y)
    out = _out_dir(args.out)
    ckpt, hist = out / "model.ckpt", out / "history.json"
    save_checkpoint(ckpt, est, args.family, seed, sha256_file(data / "state.json"),
                    {"static": args.static})
    write_json(hist, est.history_)
    cfg = {"family": args.family, "static": args.static, "params": params}
    _finish("train", out, cfg, seed, inputs, [ckpt, hist])


def cmd_search(args) -> None:
    space = _load_config(args.space)
    seed = 0 if args.seed is None else args.seed
    base = _load_config(args.config)
    est = _estimator(args.family, base, args.static, seed)
    data = Path(args.data)
    inputs = _data_inputs(data, args.family, "train")
    X, y = _load_split(data, args.family, "train", args.static)
    try:
        result = hyperparam_search(est, space, X, y, args.strategy, args.n_trials, args.folds,
                                   seed)
    except ValueError as exc:
        if isinstance(exc, ExtubateError):
            raise
        raise ConfigError(str(exc)) from exc
    out = _out_dir(args.out)
    paths = [out / "trials.csv", out / "trials.json", out / "best_config.json"]
    result.write(paths[0], paths[1])
    write_json(paths[2], dict(base, **result.best_params))
    cfg = {"family": args.family, "static": args.static, "space": space, "base": base,
           "strategy": args.strategy, "n_trials": args.n_trials, "folds": args.folds}
    _finish("search", out, cfg, seed, inputs + [Path(args.space)], paths)


def _checkpoint_inputs(path: Path) -> Path:
    verify_artifacts(path.parent, [path.name])
    return path


def _write_report(report, out: Path):
    paths = [out / "report.json", out / "roc.csv"]
    report.write(paths[0], paths[1])
    return paths


def cmd_evaluate(args) -> None:
    ckpt = _checkpoint_inputs(Path(args.checkpoint))
    model, header = load_checkpoint(ckpt)
    family = header["family"]
    static = header["extra"].get("static", False)
    data = Path(args.data)
    inputs = _data_inputs(data, family, "test")
    X, y = _load_split(data, family, "test", static)
    probs = _probabilities(model, family, X)
    cfg = {"checkpoint_params": header["params"], "family": family, "threshold": args.threshold}
    report = evaluate(probs, y, args.threshold, config_hash(cfg), header["seed"])
    out = _out_dir(args.out)
    _finish("evaluate", out, cfg, header["seed"], [ckpt, *inputs], _write_report(report, out))


def cmd_ablate(args) -> None:
    params = _load_config(args.config)
    seed = 0 if args.seed is None else args.seed
    est = _estimator(args.family, params, args.static, seed)
    data = Path(args.data)
    inputs = _data_inputs(data, args.family, "train") + _data_inputs(data, args.family, "test")
    Xtr, ytr = _load_split(data, args.family, "train", args.static)
    Xte, yte = _load_split(data, args.family, "test", args.static)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [seed]
    report = feature_ablation(est, Xtr, ytr, Xte, yte, seeds=seeds)
    out = _out_dir(args.out)
    paths = [out / "ablation.csv", out / "ablation.json"]
    report.write_csv(paths[0])
    write_json(paths[1], report.rows)
    cfg = {"family": args.family, "static": args.static, "params": params, "seeds": seeds}
    _finish("ablate", out, cfg, seed, sorted(set(inputs)), paths)


def cmd_ensemble(args) -> None:
    if len(args.checkpoint) < 2:
        raise ConfigError("an ensemble needs at least two checkpoints")
    data = Path(args.data)
    seed = 0 if args.seed is None else args.seed
    inputs, test_probs, train_probs, y_test = [], [], [], None
    for c in args.checkpoint:
        ckpt = _checkpoint_inputs(Path(c))
        model, header = load_checkpoint(ckpt)
        family = header["family"]
        static = header["extra"].get("static", False)
        inputs += [ckpt, *_data_inputs(data, family, "test")]
        Xte, y_test = _load_split(data, family, "test", static)
        test_probs.append(_probabilities(model, family, Xte))
        if args.mode == "stack":
            inputs += _data_inputs(data, family, "train")
            Xtr, ytr = _load_split(data, family, "train", static)
            train_probs.append(out_of_fold_probabilities(clone(model), Xtr, ytr, args.folds,
                                                         seed))
    if args.mode == "average":
        probs = ensemble_average(test_probs)
    elif args.mode == "stack":
        _, probs = ensemble_stack(train_probs, ytr, test_probs)
    else:
        raise ConfigError(f"mode must be 'average' or 'stack', got {args.mode!r}")
    cfg = {"mode": args.mode, "checkpoints": [sha256_file(c) for c in args.checkpoint],
           "folds": args.folds}
    report = evaluate(probs, y_test, 0.5, config_hash(cfg), seed)
    out = _out_dir(args.out)
    _finish("ensemble", out, cfg, seed, sorted(set(inputs)), _write_report(report, out))


# ------------------------------------------------------------------- parser

def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("on", "true", "1", "yes"):
        return True
    if t in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="extubate", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=False, family=False):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
        if data:
            sp.add_argument("--data", required=True, help="preprocess output directory")
        if family:
            sp.add_argument("--family", required=True, choices=sorted(ESTIMATORS))
            sp.add_argument("--static", type=_bool, default=False, help="on/off")

    sp = sub.add_parser("generate", help="synthetic cohort")
    common(sp)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("preprocess", help="split, resample and scale a cohort")
    common(sp)
    sp.add_argument("--cohort", required=True)
    sp.add_argument("--feature-set", type=int, choices=(1, 2, 3), default=None)
    sp.add_argument("--threshold", type=float, default=None)
    sp.set_defaults(func=cmd_preprocess)

    sp = sub.add_parser("train", help="fit one model")
    common(sp, data=True, family=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("search", help="hyperparameter search by k-fold AUC")
    common(sp, data=True, family=True)
    sp.add_argument("--space", required=True, help="JSON object of candidate lists")
    sp.add_argument("--strategy", choices=("grid", "random", "adaptive"), default="grid")
    sp.add_argument("--n-trials", type=int, default=10)
    sp.add_argument("--folds", type=int, default=5)
    sp.set_defaults(func=cmd_search)

    sp = sub.add_parser("evaluate", help="test-set report for a checkpoint")
    common(sp, data=True)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("ablate", help="leave-one-feature-out retraining")
    common(sp, data=True, family=True)
    sp.add_argument("--seeds", default=None, help="comma-separated seeds to average over")
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("ensemble", help="average or stack several checkpoints")
    common(sp, data=True)
    sp.add_argument("--checkpoint", nargs="+", required=True)
    sp.add_argument("--mode", choices=("average", "stack"), default="average")
    sp.add_argument("--folds", type=int, default=5)
    sp.set_defaults(func=cmd_ensemble)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        from threadpoolctl import threadpool_limits
        limit = threadpool_limits(limits=args.threads)
    else:
        limit = nullcontext()
    try:
        with limit:
            args.func(args)
    except ExtubateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
