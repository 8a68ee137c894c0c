"""Command-line entry point: corrupt, train, eval, verify.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.
"""
import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields, replace
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import trainer
from .data import (
    CorruptionConfig,
    CsvSchema,
    DatasetError,
    blob_benchmark,
    corrupt,
    corrupt_instance_dependent,
    corrupt_uniform,
    load_csv,
    train_test_split,
    write_csv,
    write_report,
)
from .models import ModelBundle, ModelSpec, load_models, save_models, spec_dict
from .numeric.optim import NonFiniteGradientError
from .numeric.random import RngState
from .verify import ORACLES, run_oracles

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
OUTPUT_ROOT_ENV = "PLLVLE_OUTPUT_ROOT"
BUILTIN_DATA = {"blobs:separable": True, "blobs:overlap": False}

log = logging.getLogger("pllvle")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    train_data: str
    test_data: Optional[str] = None
    folds: int = 0
    test_fraction: float = 0.2
    standardize: bool = False
    corruption: Optional[CorruptionConfig] = None
    train: trainer.TrainConfig = field(default_factory=trainer.TrainConfig)
    output_dir: Optional[str] = None
    ablate_no_le: bool = False
    split_seed: int = 0

    def validate(self):
        for path in (self.train_data, self.test_data):
            if path and path not in BUILTIN_DATA and not os.path.isfile(path):
                raise ConfigError(f"data file not found: {path}")
        if self.folds and self.test_data:
            raise ConfigError("use either folds or a separate test file, not both")
        if self.folds == 1 or self.folds < 0:
            raise ConfigError("folds must be 0 (no cross-validation) or >= 2")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        out = self.output_dir
        parent = os.path.dirname(os.path.abspath(out)) if out else None
        if parent and os.path.exists(parent) and not os.access(parent, os.W_OK):
            raise ConfigError(f"output directory not writable: {out}")


def _train_fields():
    return {f.name for f in fields(trainer.TrainConfig)}


def load_experiment(path):
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return raw


def build_experiment(raw, args):
    """Merge a parsed TOML document with command-line overrides."""
    data = dict(raw.get("data", {}))
    train = dict(raw.get("train", {}))
    unknown = set(train) - _train_fields()
    if unknown:
        raise ConfigError(f"unknown [train] keys: {', '.join(sorted(unknown))}")
    overrides = {
        "seed": args.seed, "total_epochs": args.epochs, "warmup_epochs": args.warmup,
        "lam": args.lam, "lr": args.lr, "batch_size": args.batch_size, "k": args.k,
        "arch": args.arch, "mc_samples": args.mc_samples, "graph_refresh": args.graph_refresh,
        "eval_every": args.eval_every,
    }
    train.update({k: v for k, v in overrides.items() if v is not None})
    if args.hidden is not None:
        train["hidden"] = tuple(args.hidden)
    corruption = None
    if "corruption" in raw:
        c = dict(raw["corruption"])
        spec = ModelSpec(**c.pop("clean_model", {}))
        corruption = CorruptionConfig(
            mode=c.pop("mode", "uniform"), xi_uniform=c.pop("xi", 0.5), clean_model_spec=spec,
            seed=c.pop("seed", 0),
        )
        if c:
            raise ConfigError(f"unknown [corruption] keys: {', '.join(sorted(c))}")
    exp = ExperimentConfig(
        train_data=args.data or data.get("train"),
        test_data=args.test or data.get("test") or None,
        folds=args.folds if args.folds is not None else data.get("folds", 0),
        test_fraction=args.test_fraction or data.get("test_fraction", 0.2),
        standardize=args.standardize or data.get("standardize", False),
        corruption=corruption,
        train=trainer.TrainConfig(**train),
        output_dir=args.out or raw.get("output", {}).get("dir"),
        ablate_no_le=args.ablate_no_le,
        split_seed=data.get("split_seed", 0),
    )
    if not exp.train_data:
        raise ConfigError("no training data given (--data or [data].train)")
    exp.validate()
    return exp


def _load(path, standardize):
    if path in BUILTIN_DATA:
        return blob_benchmark(separable=BUILTIN_DATA[path])
    return load_csv(path, CsvSchema(standardize=standardize))


def _output_dir(exp):
    if exp.output_dir:
        return exp.output_dir
    root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
    stem = os.path.splitext(os.path.basename(exp.train_data.replace(":", "-")))[0]
    tag = "ablate" if exp.ablate_no_le else "full"
    return os.path.join(root, f"{stem}-{tag}-seed{exp.train.seed}")


def cmd_train(args):
    raw = load_experiment(args.config) if args.config else {}
    exp = build_experiment(raw, args)
    dataset = _load(exp.train_data, exp.standardize)
    if exp.corruption is not None:
        dataset, report, _ = corrupt(dataset, exp.corruption)
        log.info("corrupted training data: %.3f candidates on average", report.avg_candidates)
    out = _output_dir(exp)
    extra = {"data": {"train": exp.train_data, "test": exp.test_data, "folds": exp.folds,
                      "standardize": exp.standardize}}
    if exp.folds:
        summary = trainer.cross_validate(dataset, exp.train, exp.folds, exp.ablate_no_le, exp.split_seed)
        os.makedirs(out, exist_ok=True)
        summary = {k: v for k, v in summary.items() if k != "folds"} | {
            "folds": [{k: v for k, v in f.items() if k != "seconds"} for f in summary["folds"]]
        }
        _write_json(os.path.join(out, "summary.json"), summary)
        print(f"{exp.folds}-fold accuracy: {summary['mean']:.4f} +- {summary['std']:.4f}")
        return EXIT_OK
    if exp.test_data:
        train, test = dataset, replace(_load(exp.test_data, exp.standardize), split_tag="test")
    else:
        train, test = train_test_split(dataset, exp.test_fraction, RngState(exp.split_seed).stream("split"))
    metrics, state = trainer.run(train, exp.train, test, exp.ablate_no_le)
    trainer.write_checkpoint(state, exp.train, out, exp.ablate_no_le, extra)
    print(f"test accuracy: {metrics['accuracy']:.4f}")
    if "le_quality" in metrics:
        print(f"LE quality: {metrics['le_quality']:.4f}")
    print(f"checkpoint: {out}")
    return EXIT_OK


def _write_json(path, payload):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def cmd_corrupt(args):
    if not os.path.isfile(args.input):
        raise ConfigError(f"input file not found: {args.input}")
    if not 0 <= args.xi <= 1:
        raise ConfigError("--xi must lie in [0, 1]")
    spec = ModelSpec(arch=args.clean_arch, hidden=tuple(args.clean_hidden or ()), epochs=args.clean_epochs)
    clean = load_csv(args.input, CsvSchema(standardize=args.standardize))
    if args.mode == "uniform":
        # same stream as corrupt(), but xi may be 0 or 1 here
        ds, report = corrupt_uniform(clean, args.xi, RngState(args.seed).stream("corruption"))
        report.seed = args.seed
    else:
        config = CorruptionConfig(mode=args.mode, clean_model_spec=spec, seed=args.seed)
        ds, report = _corrupt_cached(clean, config, args)
    write_csv(ds, args.output)
    write_report(report, args.report or args.output + ".report.json")
    print(f"average candidates: {report.avg_candidates:.4f}")
    return EXIT_OK


def _corrupt_cached(clean, config, args):
    cache = args.clean_model_dir or args.output + ".clean-model"
    key = {"input_sha256": _sha256(args.input), "spec": spec_dict(config.clean_model_spec),
           "seed": config.seed, "standardize": args.standardize}
    model = None
    if os.path.exists(os.path.join(cache, "models.json")):
        bundle, manifest = load_models(cache)
        if manifest.get("cache_key") == key:
            model = bundle.predictive
    if model is None:
        ds, report, model = corrupt(clean, config)
        save_models(ModelBundle(model, extra={"cache_key": key}), cache, seed=config.seed)
        return ds, report
    ds, report = corrupt_instance_dependent(clean, model, RngState(config.seed).stream("corruption"))
    report.seed = config.seed
    return ds, report


def cmd_eval(args):
    if not os.path.exists(os.path.join(args.checkpoint, "models.json")):
        raise ConfigError(f"no checkpoint in {args.checkpoint}")
    bundle, _ = load_models(args.checkpoint)
    test = _load(args.data, args.standardize)
    metrics = trainer.evaluate(bundle.predictive, test)
    print(json.dumps(metrics))
    return EXIT_OK


def cmd_verify(args):
    if args.list:
        for name in ORACLES:
            print(name)
        return EXIT_OK
    try:
        results = run_oracles(args.only, args.inject_fault)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def build_parser():
    p = argparse.ArgumentParser(prog="pllvle", description="Partial-label learning with variational label enhancement")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("corrupt", help="turn a clean CSV into a partial-label CSV")
    c.add_argument("input")
    c.add_argument("output")
    c.add_argument("--mode", choices=("uniform", "instance_dependent"), default="uniform")
    c.add_argument("--xi", type=float, default=0.5, help="flip probability for uniform mode")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--standardize", action="store_true")
    c.add_argument("--report", help="report path (default: OUTPUT.report.json)")
    c.add_argument("--clean-arch", choices=("linear", "mlp"), default="linear")
    c.add_argument("--clean-hidden", type=int, nargs="*")
    c.add_argument("--clean-epochs", type=int, default=50)
    c.add_argument("--clean-model-dir", help="cache directory for the clean model")
    c.set_defaults(func=cmd_corrupt)

    t = sub.add_parser("train", help="warm-up, label enhancement and classifier training")
    t.add_argument("--config", help="TOML experiment file")
    t.add_argument("--data", help="training CSV or blobs:separable / blobs:overlap")
    t.add_argument("--test", help="test CSV")
    t.add_argument("--folds", type=int)
    t.add_argument("--test-fraction", type=float)
    t.add_argument("--standardize", action="store_true")
    t.add_argument("--out")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--warmup", type=int)
    t.add_argument("--lambda", dest="lam", type=float)
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--k", type=int)
    t.add_argument("--arch", choices=("linear", "mlp"))
    t.add_argument("--hidden", type=int, nargs="*")
    t.add_argument("--mc-samples", type=int)
    t.add_argument("--graph-refresh", choices=("once", "per_epoch"))
    t.add_argument("--eval-every", type=int)
    t.add_argument("--ablate-no-le", action="store_true", help="minimal-loss training only")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="accuracy of a saved predictive model")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--standardize", action="store_true")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run numerical oracles")
    v.add_argument("--only", nargs="+", metavar="NAME")
    v.add_argument("--list", action="store_true")
    v.add_argument("--inject-fault", metavar="NAME", help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DatasetError, tomllib.TOMLDecodeError, FileNotFoundError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (trainer.TrainingAborted, NonFiniteGradientError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
