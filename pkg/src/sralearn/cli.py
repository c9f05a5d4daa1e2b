"""Command-line interface: reproducible experiment pipelines.

Commands: synth, train, explain, reinforce, gradcheck, rerun.  Every
artifact-producing command writes a JSON manifest next to its outputs
recording the resolved configuration, the seed, and sha256 digests of
all inputs and outputs; `rerun` replays a manifest into a fresh
directory and verifies digest equality.

Exit codes: 0 success, 2 configuration error, 3 data/runtime error,
4 failed check (gradient check or rerun digest mismatch).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .autodiff import Tape, finite_diff_check
from .checkpoint import load as load_checkpoint
from .checkpoint import save as save_checkpoint
from .data import Preprocessor, Schema, TabularDataset, folds_for, load_csv
from .estimators import cross_validate_dataset, estimator_for, score_metric
from .exceptions import (
    ConfigError,
    DataError,
    SralearnError,
    UnsupportedModelError,
)
from .explain import (
    contribution_matrix,
    explain_batch,
    export_reinforced,
    write_attributions_csv,
)
from .metrics import tpr_topk
from .models import init_model
from .rng import substream
from .synth import DEFAULT_N, KINDS, generate, write_csv

OK, CONFIG_ERROR, RUNTIME_ERROR, CHECK_FAILED = 0, 2, 3, 4


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: Path, command: str, config: dict, seed: int,
                   inputs: dict[str, Path], outputs: list[Path]) -> Path:
    payload = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {name: {"path": str(p), "sha256": sha256_file(p)}
                   for name, p in inputs.items()},
        "outputs": {p.name: sha256_file(p) for p in outputs},
        "version": __version__,
    }
    path = out_dir / f"{command}-manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- filter mini-language ----------------------------------------------------

_OPS = ("<=", ">=", "!=", "==", "<", ">")


def _parse_clause(clause: str) -> tuple[str, str, str]:
    for op in _OPS:  # two-char ops first so "<=" never parses as "<"
        if op in clause:
            left, _, right = clause.partition(op)
            left, right = left.strip(), right.strip()
            if not left or not right:
                raise ConfigError(f"malformed filter clause {clause!r}")
            return left, op, right
    raise ConfigError(f"no comparison operator in filter clause {clause!r}")


def apply_filter(dataset: TabularDataset, expression: str) -> np.ndarray:
    """Boolean row mask for `feature op constant [and ...]` over raw values."""
    mask = np.ones(dataset.n, dtype=bool)
    for clause in expression.split(" and "):
        name, op, raw = _parse_clause(clause)
        try:
            column = dataset.feature_column(name)
        except DataError:
            raise ConfigError(f"filter references unknown feature {name!r}") from None
        if isinstance(column, list):  # categorical: string compare, eq/ne only
            if op not in ("==", "!="):
                raise ConfigError(
                    f"categorical filter supports == and != only, got {op!r}")
            values = np.asarray(column, dtype=object)
            hit = values == raw
            mask &= hit if op == "==" else ~hit
            continue
        try:
            const = float(raw)
        except ValueError:
            raise ConfigError(f"filter constant {raw!r} is not numeric") from None
        ops = {
            "<=": column <= const, ">=": column >= const,
            "<": column < const, ">": column > const,
            "==": column == const, "!=": column != const,
        }
        mask &= ops[op]
    return mask


def _parse_relevant(spec: str, feature_names: list[str]) -> list[int]:
    """Feature references: names, or 1-based positions (x1 is 1)."""
    out = []
    for token in spec.split(","):
        token = token.strip()
        if token in feature_names:
            out.append(feature_names.index(token))
        elif token.isdigit():
            pos = int(token)
            if not 1 <= pos <= len(feature_names):
                raise ConfigError(
                    f"feature position {pos} out of range 1..{len(feature_names)}")
            out.append(pos - 1)
        else:
            raise ConfigError(f"unknown feature reference {token!r}")
    if not out:
        raise ConfigError("empty relevant set")
    return out


# -- commands ----------------------------------------------------------------


def cmd_synth(args) -> int:
    out = _out_dir(args)
    result = generate(args.kind, n=args.n, seed=args.seed, noise=args.noise)
    csv_path = out / f"{args.kind}.csv"
    schema_path = out / f"{args.kind}.schema"
    write_csv(result, csv_path)
    result.schema().write(schema_path)
    config = {"kind": args.kind, "n": args.n if args.n else DEFAULT_N[args.kind],
              "noise": args.noise, "out_dir": str(out)}
    write_manifest(out, "synth", config, args.seed, {}, [csv_path, schema_path])
    print(f"wrote {csv_path} ({result.X.shape[0]} rows, {result.X.shape[1]} features)")
    return OK


def _training_params(args) -> dict:
    return {
        "d_k": args.dk,
        "learning_rate": args.lr,
        "batch_size": args.batch_size,
        "max_epochs": args.epochs,
        "weight_decay": args.weight_decay,
        "dropout": args.dropout,
        "patience": args.patience,
        "val_fraction": args.val_fraction,
    }


def cmd_train(args) -> int:
    out = _out_dir(args)
    if args.folds < 2:
        raise ConfigError(f"fold count must be >= 2, got {args.folds}")
    schema = Schema.read(args.schema)
    dataset = load_csv(args.data, schema)
    task = dataset.task
    metric = args.metric or ("aucroc" if task == "binary" else "r2")
    # fail on metric/task mismatches here, not inside a parallel worker
    score_metric(metric, np.array([0.0, 1.0]), np.array([0.25, 0.75]), task)
    estimator = estimator_for(args.model, task, metric=metric, seed=args.seed,
                              **_training_params(args))
    report, fitted = cross_validate_dataset(
        estimator, dataset, k=args.folds, seed=args.seed, metric=metric,
        jobs=args.jobs, model_name=args.model)

    outputs = []
    report_path = out / "cv_report.csv"
    report.save(report_path)
    outputs.append(report_path)
    for i, (est, pre) in enumerate(fitted):
        ckpt = out / f"fold{i}.ckpt"
        save_checkpoint(est.model_, ckpt)
        pre_path = out / f"fold{i}.preprocessor.json"
        pre.save(pre_path)
        log_path = out / f"fold{i}.trainlog.csv"
        est.log_.save(log_path)
        outputs += [ckpt, pre_path, log_path]
    config = {
        "model": args.model, "metric": metric, "folds": args.folds,
        "jobs": args.jobs, "data": str(args.data), "schema": str(args.schema),
        "out_dir": str(out), **_training_params(args),
    }
    write_manifest(out, "train", config, args.seed,
                   {"data": Path(args.data), "schema": Path(args.schema)}, outputs)
    print(report)
    return OK


def _load_model_and_preprocessor(args):
    model = load_checkpoint(args.checkpoint)
    pre_path = args.preprocessor
    if pre_path is None:
        pre_path = str(args.checkpoint).replace(".ckpt", ".preprocessor.json")
    if not os.path.exists(pre_path):
        raise ConfigError(f"preprocessor file not found: {pre_path} "
                          "(pass --preprocessor explicitly)")
    return model, Preprocessor.load(pre_path), Path(pre_path)


def _restrict_to_test_fold(dataset: TabularDataset, args) -> TabularDataset:
    if args.fold_test is None:
        return dataset
    if not 0 <= args.fold_test < args.folds:
        raise ConfigError(f"--fold-test must be in 0..{args.folds - 1}")
    folds = folds_for(dataset.y, args.folds, args.seed, dataset.task)
    return dataset.subset(folds[args.fold_test][1])


def cmd_explain(args) -> int:
    out = _out_dir(args)
    model, pre, pre_path = _load_model_and_preprocessor(args)
    dataset = load_csv(args.data, Schema.read(args.schema))
    dataset = _restrict_to_test_fold(dataset, args)
    if args.filter:
        mask = apply_filter(dataset, args.filter)
        dataset = dataset.subset(np.flatnonzero(mask))
    if dataset.n == 0:
        raise DataError("no rows left after filtering")
    X = pre.transform(dataset)
    explanations = explain_batch(model, X)
    attr_path = out / "attributions.csv"
    write_attributions_csv(attr_path, explanations, pre.feature_names)
    outputs = [attr_path]
    print(f"wrote {attr_path} ({len(explanations)} instances)")

    if args.relevant:
        relevant = _parse_relevant(args.relevant, pre.feature_names)
        k = args.topk or len(relevant)
        value = tpr_topk(contribution_matrix(model, X), relevant, k)
        print(f"TPR@{k} over {dataset.n} instances: {value:.4f}")

    config = {
        "checkpoint": str(args.checkpoint), "preprocessor": str(pre_path),
        "data": str(args.data), "schema": str(args.schema),
        "filter": args.filter, "relevant": args.relevant, "topk": args.topk,
        "fold_test": args.fold_test, "folds": args.folds, "out_dir": str(out),
    }
    write_manifest(out, "explain", config, args.seed,
                   {"checkpoint": Path(args.checkpoint), "data": Path(args.data),
                    "schema": Path(args.schema), "preprocessor": pre_path},
                   outputs)
    return OK


def cmd_reinforce(args) -> int:
    out = _out_dir(args)
    model, pre, pre_path = _load_model_and_preprocessor(args)
    dataset = load_csv(args.data, Schema.read(args.schema))
    X = pre.transform(dataset)
    csv_path = out / "reinforced.csv"
    outputs = [csv_path]
    if X.shape[1] == 2:
        orig_svg = out / "original.svg"
        reinf_svg = out / "reinforced.svg"
        export_reinforced(model, X, dataset.y, csv_path,
                          svg_original=orig_svg, svg_reinforced=reinf_svg)
        outputs += [orig_svg, reinf_svg]
        print(f"wrote {csv_path}, {orig_svg}, {reinf_svg}")
    else:
        export_reinforced(model, X, dataset.y, csv_path)
        print(f"wrote {csv_path}; scatter SVG skipped (p={X.shape[1]}, needs p=2)")
    config = {"checkpoint": str(args.checkpoint), "preprocessor": str(pre_path),
              "data": str(args.data), "schema": str(args.schema),
              "out_dir": str(out)}
    write_manifest(out, "reinforce", config, args.seed,
                   {"checkpoint": Path(args.checkpoint), "data": Path(args.data),
                    "schema": Path(args.schema), "preprocessor": pre_path}, outputs)
    return OK


def _gradcheck_case(rng, kind: str):
    """Random small model + batch, resampled away from relu kinks."""
    p = int(rng.integers(2, 7))
    b = int(rng.integers(2, 17))
    task = "binary" if rng.uniform() < 0.7 else "regression"
    for _ in range(40):
        model = init_model(kind, p=p, d_k=int(rng.choice([4, 8])),
                           seed=int(rng.integers(1 << 31)), task=task)
        for name in model.params:
            model.params[name] = rng.normal(scale=0.8, size=model.params[name].shape)
        X = rng.normal(size=(b, p))
        y = (rng.uniform(size=b) > 0.5).astype(float) if task == "binary" \
            else rng.normal(size=b)
        tape = Tape()
        refs = model.record(tape, tape.input("x", X))
        loss = model.loss_ref(tape, refs, tape.input("y", y))
        # a relu pre-activation within step distance of 0 would make the
        # central difference straddle the kink; resample such draws
        near_kink = any(
            node.op == "relu" and np.min(np.abs(tape._nodes[node.args[0]].value)) < 1e-3
            for node in tape._nodes
        )
        if not near_kink:
            return tape, loss, model, task
    return tape, loss, model, task


def cmd_gradcheck(args) -> int:
    rng = substream(args.seed, "gradcheck")
    failures = 0
    worst = 0.0
    for trial in range(args.seeds):
        for kind in ("sralinear", "lr", "mlp"):
            tape, loss, model, task = _gradcheck_case(rng, kind)
            corrupt = "beta" if args.corrupt and kind != "mlp" else (
                "w1" if args.corrupt else None)
            report = finite_diff_check(tape, loss, step=args.step,
                                       tolerance=args.tol, corrupt=corrupt)
            worst = max(worst, report.max_rel_error)
            status = "PASS" if report.passed else "FAIL"
            if not report.passed:
                failures += 1
            print(f"{kind:9s} p={model.p} task={task:10s} "
                  f"max_rel_err={report.max_rel_error:.3e} {status}")
    print(f"gradcheck: {args.seeds * 3} cases, worst {worst:.3e}, "
          f"{failures} failure(s)")
    return OK if failures == 0 else CHECK_FAILED


def cmd_rerun(args) -> int:
    with open(args.manifest, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    command = manifest["command"]
    config = dict(manifest["config"])
    out_dir = args.out_dir or config.get("out_dir")
    if out_dir is None:
        raise ConfigError("manifest has no out_dir; pass --out-dir")
    config["out_dir"] = out_dir
    argv = [command]
    flag_names = {
        "n": "--n", "kind": "--kind", "noise": "--noise", "model": "--model",
        "metric": "--metric", "folds": "--folds", "jobs": "--jobs",
        "data": "--data", "schema": "--schema", "d_k": "--dk",
        "learning_rate": "--lr", "batch_size": "--batch-size",
        "max_epochs": "--epochs", "weight_decay": "--weight-decay",
        "dropout": "--dropout", "patience": "--patience",
        "val_fraction": "--val-fraction", "checkpoint": "--checkpoint",
        "preprocessor": "--preprocessor", "filter": "--filter",
        "relevant": "--relevant", "topk": "--topk",
        "fold_test": "--fold-test", "out_dir": "--out-dir",
    }
    for key, value in config.items():
        if value is None or key not in flag_names:
            continue
        argv += [flag_names[key], str(value)]
    argv += ["--seed", str(manifest["seed"])]
    code = main(argv)
    if code != OK:
        return code
    mismatches = []
    for name, digest in manifest["outputs"].items():
        produced = Path(out_dir) / name
        if not produced.exists():
            mismatches.append(f"{name}: missing")
        elif sha256_file(produced) != digest:
            mismatches.append(f"{name}: digest differs")
    if mismatches:
        for line in mismatches:
            print(f"rerun mismatch - {line}", file=sys.stderr)
        return CHECK_FAILED
    print(f"rerun of {command}: all {len(manifest['outputs'])} output digests match")
    return OK


# -- parser ------------------------------------------------------------------


def _add_common(sub):
    sub.add_argument("--seed", type=int, default=0, help="master seed")
    sub.add_argument("--out-dir", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sralearn",
        description="attention-reinforced tabular models with exact attributions",
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic dataset")
    synth.add_argument("--kind", required=True, choices=KINDS)
    synth.add_argument("--n", type=int, default=None,
                       help="sample count (default: the kind's standard size)")
    synth.add_argument("--noise", type=float, default=None)
    _add_common(synth)
    synth.set_defaults(func=cmd_synth)

    train_p = commands.add_parser("train", help="k-fold cross-validated training")
    train_p.add_argument("--data", required=True)
    train_p.add_argument("--schema", required=True)
    train_p.add_argument("--model", required=True, choices=("sralinear", "lr", "mlp"))
    train_p.add_argument("--dk", type=int, default=8, help="key/query width")
    train_p.add_argument("--folds", type=int, default=5)
    train_p.add_argument("--metric", default=None,
                         choices=("aucroc", "aucpr", "accuracy", "mse", "r2"))
    train_p.add_argument("--lr", type=float, default=1e-3, dest="lr")
    train_p.add_argument("--batch-size", type=int, default=256)
    train_p.add_argument("--epochs", type=int, default=200)
    train_p.add_argument("--dropout", type=float, default=0.1)
    train_p.add_argument("--weight-decay", type=float, default=1e-4)
    train_p.add_argument("--patience", type=int, default=20)
    train_p.add_argument("--val-fraction", type=float, default=0.1)
    train_p.add_argument("--jobs", type=int, default=1)
    _add_common(train_p)
    train_p.set_defaults(func=cmd_train)

    explain = commands.add_parser("explain", help="export per-instance attributions")
    explain.add_argument("--checkpoint", required=True)
    explain.add_argument("--preprocessor", default=None,
                         help="default: <checkpoint>.preprocessor.json sibling")
    explain.add_argument("--data", required=True)
    explain.add_argument("--schema", required=True)
    explain.add_argument("--filter", default=None,
                         help="row filter, e.g. 'x5<=0 and x1>0.5'")
    explain.add_argument("--relevant", default=None,
                         help="known relevant features, e.g. 'x1,x2' or '1,2'")
    explain.add_argument("--topk", type=int, default=None)
    explain.add_argument("--fold-test", type=int, default=None,
                         help="restrict to the test side of this CV fold")
    explain.add_argument("--folds", type=int, default=5)
    _add_common(explain)
    explain.set_defaults(func=cmd_explain)

    reinforce = commands.add_parser("reinforce",
                                    help="export reinforced inputs (+SVG for p=2)")
    reinforce.add_argument("--checkpoint", required=True)
    reinforce.add_argument("--preprocessor", default=None)
    reinforce.add_argument("--data", required=True)
    reinforce.add_argument("--schema", required=True)
    _add_common(reinforce)
    reinforce.set_defaults(func=cmd_reinforce)

    gradcheck = commands.add_parser("gradcheck",
                                    help="finite-difference gradient audit")
    gradcheck.add_argument("--seeds", type=int, default=20,
                           help="random cases per model kind")
    gradcheck.add_argument("--step", type=float, default=1e-5)
    gradcheck.add_argument("--tol", type=float, default=1e-4)
    gradcheck.add_argument("--corrupt", action="store_true",
                           help="negative control: corrupt one adjoint, expect FAIL")
    gradcheck.add_argument("--seed", type=int, default=0)
    gradcheck.set_defaults(func=cmd_gradcheck)

    rerun = commands.add_parser("rerun", help="replay a manifest and verify digests")
    rerun.add_argument("--manifest", required=True)
    rerun.add_argument("--out-dir", default=None,
                       help="default: the manifest's recorded out_dir")
    rerun.set_defaults(func=cmd_rerun)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnsupportedModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except (DataError, SralearnError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


def entrypoint() -> None:
    sys.exit(main())
