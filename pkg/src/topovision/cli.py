"""Command-line interface.

Subcommands: denoise, segment, optimize, train, tune, classify, eval,
fixtures, pipeline.  Every subcommand honors the global flags --seed,
--config (INI file), and --out-dir; explicit flags override config
values.  Exit codes: 0 success, 1 configuration/usage error, 2 I/O
error, 3 stage (computation) failure.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_model, save_model
from .classifier import ConvRecurrentClassifier, stratified_split, tune_hyperparameters
from .denoise import denoise
from .eho import ElephantHerdingOptimizer, rastrigin_problem, sphere_problem
from .exceptions import (
    CheckpointError,
    ConfigError,
    DivergenceError,
    ImageFormatError,
    MalformedComplexError,
    OptimizerError,
    StageError,
)
from .fixtures import FIXTURE_KINDS, generate_fixtures
from .image_io import load_image, save_image
from .metrics import multiclass_report, write_metrics_csv
from .pipeline import (
    load_config,
    load_labeled_dataset,
    run_pipeline,
    save_label_mask,
    write_regions_csv,
)
from .segmentation import segment

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_STAGE = 3


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the config error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _global_flags(parser):
    parser.add_argument("--seed", type=int, default=None, help="deterministic RNG seed")
    parser.add_argument("--config", default=None, help="INI config file")
    parser.add_argument(
        "--out-dir", default=None, help="directory for artifacts (default '.')"
    )


def _load(args, **section_overrides):
    overrides = {"pipeline": {}}
    if args.seed is not None:
        overrides["pipeline"]["seed"] = args.seed
    if args.out_dir is not None:
        overrides["pipeline"]["out_dir"] = args.out_dir
    for section, mapping in section_overrides.items():
        merged = overrides.setdefault(section, {})
        merged.update({k: v for k, v in mapping.items() if v is not None})
    return load_config(args.config, overrides)


def _out_dir(config):
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------- subcommands


def cmd_denoise(args):
    config = _load(
        args,
        denoise={"iterations": args.iters, "step": args.step, "weight": args.weight},
    )
    image = load_image(args.input)
    result = denoise(image, config.denoise)
    save_image(result, args.output)
    print(f"denoised {args.input} -> {args.output} ({config.denoise.iterations} iterations)")
    return EXIT_OK


def cmd_segment(args):
    config = _load(
        args,
        segment={
            "beta": args.beta,
            "persistence": args.persistence,
            "merge_tau": args.tau,
        },
    )
    image = load_image(args.input)
    result = segment(image, config.segment)
    save_image(result.foreground_mask.astype(np.float64), args.mask_out)
    save_label_mask(args.labels_out, result.partition.label_mask)
    regions_out = args.regions_out or (_out_dir(config) / "regions.csv")
    write_regions_csv(regions_out, result.partition)
    if result.warning:
        print(f"warning: {result.warning}", file=sys.stderr)
    print(
        f"segmented {args.input}: {len(result.partition.regions)} regions, "
        f"{result.partition.persistent_count} persistent -> {args.mask_out}, "
        f"{args.labels_out}, {regions_out}"
    )
    return EXIT_OK


def _write_history(path, history):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["generation", "best_fitness", "mean_fitness", "best_position_decoded"]
        )
        for record in history:
            writer.writerow(
                [
                    record.generation,
                    f"{record.best_fitness:.10g}",
                    f"{record.mean_fitness:.10g}",
                    " ".join(str(v) for v in record.best_decoded),
                ]
            )


def cmd_optimize(args):
    config = _load(
        args,
        optimize={
            "clan_count": args.clans,
            "per_clan_size": args.per_clan,
            "max_generations": args.generations,
        },
    )
    if args.objective == "sphere":
        space, objective = sphere_problem(args.dims)
    elif args.objective == "rastrigin":
        space, objective = rastrigin_problem(args.dims)
    else:
        from .fixtures import three_class_blobs

        images, labels = three_class_blobs(seed=config.seed)
        tuned = tune_hyperparameters(images, labels, eho_config=config.optimize)
        _write_history(args.output, tuned.optimize_result.history)
        print(
            f"best fitness {tuned.best_fitness:.4f} with {tuned.best_params} "
            f"-> {args.output}"
        )
        return EXIT_OK
    result = ElephantHerdingOptimizer(space, config.optimize).optimize(objective)
    _write_history(args.output, result.history)
    decoded = " ".join(f"{v:.6g}" for v in result.best_decoded)
    print(f"best fitness {result.best_fitness:.6g} at [{decoded}] -> {args.output}")
    return EXIT_OK


def cmd_train(args):
    config = _load(
        args,
        model={
            "epochs": args.epochs,
            "learning_rate": args.learning_rate,
            "batch_size": args.batch_size,
        },
    )
    images, labels, _ = load_labeled_dataset(args.data)
    train_idx, test_idx = stratified_split(labels, 0.7, config.seed)
    params = dict(config.model_params)
    params.setdefault("seed", config.seed)
    model = ConvRecurrentClassifier(**params)
    model.fit(images[train_idx], labels[train_idx])
    save_model(model, args.model_out)
    predicted = model.predict(images[test_idx])
    held_out = float(np.mean(predicted == labels[test_idx]))
    metrics_out = args.metrics_out or (_out_dir(config) / "metrics.csv")
    write_metrics_csv(metrics_out, multiclass_report(labels[test_idx], predicted))
    train_acc = model.history_[-1] if model.history_ else float("nan")
    print(
        f"trained on {train_idx.size} images (final epoch accuracy {train_acc:.3f}); "
        f"held-out accuracy {held_out:.3f} on {test_idx.size} -> {args.model_out}, "
        f"{metrics_out}"
    )
    return EXIT_OK


def cmd_tune(args):
    config = _load(
        args,
        optimize={
            "clan_count": args.clans,
            "per_clan_size": args.per_clan,
            "max_generations": args.generations,
        },
    )
    images, labels, _ = load_labeled_dataset(args.data)
    tuned = tune_hyperparameters(
        images, labels, eho_config=config.optimize, base_params=config.model_params
    )
    if args.history_out:
        _write_history(args.history_out, tuned.optimize_result.history)
    save_model(tuned.model, args.model_out)
    print(
        f"best validation fitness {tuned.best_fitness:.4f}; "
        f"hyperparameters {tuned.best_params} -> {args.model_out}"
    )
    return EXIT_OK


def cmd_classify(args):
    model = load_model(args.model)
    for path in args.inputs:
        image = load_image(path)
        probs = model.predict_proba(image)[0]
        label = model.classes_[int(np.argmax(probs))]
        detail = ", ".join(
            f"{cls}={p:.4f}" for cls, p in zip(model.classes_, probs)
        )
        print(f"{path}: {label} ({detail})")
    return EXIT_OK


def _read_label_csv(path):
    labels = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise ConfigError(f"{path} needs a two-column header row (id,label)")
        for row in reader:
            if not row:
                continue
            raw = row[1].strip()
            labels[row[0]] = int(raw) if raw.lstrip("-").isdigit() else raw
    if not labels:
        raise ConfigError(f"{path} lists no samples")
    return labels


def cmd_eval(args):
    predictions = _read_label_csv(args.pred)
    truths = _read_label_csv(args.truth)
    missing = sorted(set(truths) ^ set(predictions))
    if missing:
        raise ConfigError(
            f"prediction and truth ids do not match; first differences: {missing[:5]}"
        )
    keys = sorted(truths)
    y_true = np.asarray([truths[k] for k in keys])
    y_pred = np.asarray([predictions[k] for k in keys])
    report = multiclass_report(y_true, y_pred)
    write_metrics_csv(args.output, report)
    print(
        f"evaluated {len(keys)} samples; macro F1 {report['macro']['f1']:.4f} "
        f"-> {args.output}"
    )
    return EXIT_OK


def cmd_fixtures(args):
    config = _load(args)
    out_dir = args.fixtures_dir or config.out_dir
    written = generate_fixtures(args.kind, config.seed, out_dir)
    print(f"wrote {len(written)} files for fixture '{args.kind}' in {out_dir}")
    return EXIT_OK


def cmd_pipeline(args):
    config = _load(
        args,
        pipeline={
            "input": args.input,
            "dataset": args.dataset,
            "model": args.model,
            "stages": args.stages,
        },
    )
    manifest = run_pipeline(config)
    print(
        f"pipeline complete: {len(manifest['artifacts'])} artifacts in "
        f"{config.out_dir} (manifest.json)"
    )
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser():
    parser = _Parser(prog="topovision", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = subs.add_parser("denoise", help="adaptive anisotropic diffusion")
    _global_flags(p)
    p.add_argument("--in", dest="input", required=True, help="input image (PGM/PNG)")
    p.add_argument("--out", dest="output", required=True, help="output PGM")
    p.add_argument("--iters", type=int, default=None, help="diffusion iterations")
    p.add_argument("--lambda", dest="step", type=float, default=None, help="step size")
    p.add_argument("--weight", type=float, default=None, help="threshold weight")
    p.set_defaults(func=cmd_denoise)

    p = subs.add_parser("segment", help="topological split-merge segmentation")
    _global_flags(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mask-out", dest="mask_out", required=True)
    p.add_argument("--labels-out", dest="labels_out", required=True)
    p.add_argument("--regions-out", dest="regions_out", default=None)
    p.add_argument("--beta", type=float, default=None, help="base radius")
    p.add_argument("--persistence", type=float, default=None, help="radius increment")
    p.add_argument("--tau", type=float, default=None, help="merge tolerance")
    p.set_defaults(func=cmd_segment)

    p = subs.add_parser("optimize", help="run the herd optimizer")
    _global_flags(p)
    p.add_argument(
        "--objective", choices=("sphere", "rastrigin", "ctvr"), required=True
    )
    p.add_argument("--clans", type=int, default=None)
    p.add_argument("--per-clan", dest="per_clan", type=int, default=None)
    p.add_argument("--generations", type=int, default=None)
    p.add_argument("--dims", type=int, default=4, help="test-function dimensions")
    p.add_argument("--out", dest="output", required=True, help="history CSV")
    p.set_defaults(func=cmd_optimize)

    p = subs.add_parser("train", help="train the classifier on a labeled directory")
    _global_flags(p)
    p.add_argument("--data", required=True, help="directory with images + labels.csv")
    p.add_argument("--model-out", dest="model_out", required=True)
    p.add_argument("--metrics-out", dest="metrics_out", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("tune", help="hyperparameter search, then train the best")
    _global_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model-out", dest="model_out", required=True)
    p.add_argument("--history-out", dest="history_out", default=None)
    p.add_argument("--clans", type=int, default=None)
    p.add_argument("--per-clan", dest="per_clan", type=int, default=None)
    p.add_argument("--generations", type=int, default=None)
    p.set_defaults(func=cmd_tune)

    p = subs.add_parser("classify", help="classify images with a trained model")
    _global_flags(p)
    p.add_argument("--model", required=True, help="model checkpoint")
    p.add_argument("--in", dest="inputs", required=True, nargs="+")
    p.set_defaults(func=cmd_classify)

    p = subs.add_parser("eval", help="confusion-matrix metrics from label CSVs")
    _global_flags(p)
    p.add_argument("--pred", required=True, help="CSV of id,predicted label")
    p.add_argument("--truth", required=True, help="CSV of id,true label")
    p.add_argument("--out", dest="output", required=True, help="metrics CSV")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("fixtures", help="generate synthetic fixtures")
    _global_flags(p)
    p.add_argument("--kind", choices=FIXTURE_KINDS, required=True)
    p.add_argument(
        "--fixtures-dir",
        default=None,
        help="destination directory (defaults to --out-dir)",
    )
    p.set_defaults(func=cmd_fixtures)

    p = subs.add_parser("pipeline", help="run configured stages end to end")
    _global_flags(p)
    p.add_argument("--in", dest="input", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--stages", default=None, help="comma list, e.g. denoise,segment")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ImageFormatError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (StageError, DivergenceError, OptimizerError, MalformedComplexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
