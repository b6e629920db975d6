"""Batch pipeline: config handling, stage orchestration, artifact manifest.

A pipeline run reads one or more input images, executes the configured
stages in order (denoise, segment, train, classify), writes every
artifact under the output directory, and finishes with a
``manifest.json`` listing each artifact with its SHA-256.  Runs are
byte-reproducible for a fixed seed: the manifest carries no timestamps
and every stage derives its randomness from the config seed.
"""

import configparser
import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import load_model, save_model
from .classifier import ConvRecurrentClassifier, stratified_split
from .denoise import DiffusionConfig, denoise
from .eho import EhoConfig
from .exceptions import ConfigError, StageError
from .image_io import load_image, save_image
from .metrics import multiclass_report, write_metrics_csv
from .segmentation import SegmentationConfig, segment

# section -> key -> parser; the single source of truth for config files
_SCHEMA = {
    "pipeline": {
        "seed": int,
        "out_dir": str,
        "input": str,
        "dataset": str,
        "model": str,
        "stages": str,
    },
    "denoise": {"iterations": int, "step": float, "weight": float},
    "segment": {
        "beta": float,
        "persistence": float,
        "merge_tau": float,
        "hysteresis_low": float,
        "hysteresis_high": float,
        "min_region_size": int,
    },
    "optimize": {
        "clan_count": int,
        "per_clan_size": int,
        "beta_scale": float,
        "lambda_scale": float,
        "worst_count": int,
        "max_generations": int,
    },
    "model": {
        "conv_layers": int,
        "conv_kernel": int,
        "conv_channels": int,
        "pool_size": int,
        "pool_kind": str,
        "activation": str,
        "lstm_hidden": int,
        "memory_depth": int,
        "head_layers": int,
        "fcl_neurons": int,
        "conv_dropout": float,
        "lstm_dropout": float,
        "learning_rate": float,
        "batch_size": int,
        "epochs": int,
    },
}

STAGES = ("denoise", "segment", "train", "classify")


@dataclass(frozen=True)
class PipelineConfig:
    """Fully defaulted configuration for one pipeline run."""

    seed: int = 0
    out_dir: str = "."
    input: str = None
    dataset: str = None
    model: str = None
    stages: tuple = None
    denoise: DiffusionConfig = field(default_factory=DiffusionConfig)
    segment: SegmentationConfig = field(default_factory=SegmentationConfig)
    optimize: EhoConfig = field(default_factory=EhoConfig)
    model_params: dict = field(default_factory=dict)

    def resolved_stages(self):
        """Explicit stages, or the ones implied by the configured inputs."""
        if self.stages:
            return tuple(self.stages)
        implied = []
        if self.input:
            implied += ["denoise", "segment"]
        if self.dataset:
            implied.append("train")
        if self.model and self.input:
            implied.append("classify")
        return tuple(implied)


def _parse_value(section, key, raw):
    try:
        return _SCHEMA[section][key](raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def load_config(path=None, overrides=None):
    """Build a PipelineConfig from an INI file plus override mappings.

    ``overrides`` maps section name to {key: value} with already typed
    values (CLI flags).  Unknown sections or keys are rejected.
    """
    values = {section: {} for section in _SCHEMA}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise FileNotFoundError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigError(
                    f"unknown config section [{section}]; expected one of "
                    f"{sorted(_SCHEMA)}"
                )
            for key, raw in parser.items(section):
                if key not in _SCHEMA[section]:
                    raise ConfigError(
                        f"unknown key {key!r} in section [{section}]; expected one "
                        f"of {sorted(_SCHEMA[section])}"
                    )
                values[section][key] = _parse_value(section, key, raw)
    for section, mapping in (overrides or {}).items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in mapping.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            if value is not None:
                values[section][key] = value

    pipe = values["pipeline"]
    stages = None
    if "stages" in pipe:
        stages = tuple(s.strip() for s in pipe["stages"].split(",") if s.strip())
        for stage in stages:
            if stage not in STAGES:
                raise ConfigError(
                    f"unknown stage {stage!r}; expected a comma list from {STAGES}"
                )
    try:
        return PipelineConfig(
            seed=pipe.get("seed", 0),
            out_dir=pipe.get("out_dir", "."),
            input=pipe.get("input"),
            dataset=pipe.get("dataset"),
            model=pipe.get("model"),
            stages=stages,
            denoise=DiffusionConfig(**values["denoise"]),
            segment=SegmentationConfig(**values["segment"]),
            optimize=EhoConfig(seed=pipe.get("seed", 0), **values["optimize"]),
            model_params=values["model"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def save_config(config, path):
    """Serialize a PipelineConfig to INI; load_config round-trips it."""
    parser = configparser.ConfigParser()
    pipe = {"seed": config.seed, "out_dir": config.out_dir}
    if config.input:
        pipe["input"] = config.input
    if config.dataset:
        pipe["dataset"] = config.dataset
    if config.model:
        pipe["model"] = config.model
    if config.stages:
        pipe["stages"] = ",".join(config.stages)
    parser["pipeline"] = {k: str(v) for k, v in pipe.items()}
    parser["denoise"] = {
        "iterations": str(config.denoise.iterations),
        "step": repr(config.denoise.step),
        "weight": repr(config.denoise.weight),
    }
    seg = config.segment
    parser["segment"] = {
        "beta": repr(seg.beta),
        "persistence": repr(seg.persistence),
        "merge_tau": repr(seg.merge_tau),
        "hysteresis_low": repr(seg.hysteresis_low),
        "hysteresis_high": repr(seg.hysteresis_high),
        "min_region_size": str(seg.min_region_size),
    }
    opt = config.optimize
    parser["optimize"] = {
        "clan_count": str(opt.clan_count),
        "per_clan_size": str(opt.per_clan_size),
        "beta_scale": repr(opt.beta_scale),
        "lambda_scale": repr(opt.lambda_scale),
        "worst_count": str(opt.worst_count),
        "max_generations": str(opt.max_generations),
    }
    parser["model"] = {k: repr(v) if isinstance(v, float) else str(v)
                       for k, v in config.model_params.items()}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _input_images(config):
    path = Path(config.input)
    if path.is_dir():
        files = sorted(
            p for p in path.iterdir() if p.suffix.lower() in (".pgm", ".png")
        )
        if not files:
            raise FileNotFoundError(f"no .pgm or .png images in directory {path}")
        return files
    if not path.exists():
        raise FileNotFoundError(f"input image not found: {path}")
    return [path]


def load_labeled_dataset(directory):
    """Read a fixture-style dataset: images plus labels.csv.

    Returns (images array (n, h, w), labels array, filenames).  Labels
    that look like integers are parsed as integers.
    """
    directory = Path(directory)
    labels_path = directory / "labels.csv"
    if not labels_path.exists():
        raise FileNotFoundError(f"labels file not found: {labels_path}")
    names, labels = [], []
    with open(labels_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["filename", "label"]:
            raise ConfigError(
                f"{labels_path} must start with a 'filename,label' header row"
            )
        for row in reader:
            if not row:
                continue
            names.append(row[0])
            raw = row[1].strip()
            labels.append(int(raw) if raw.lstrip("-").isdigit() else raw)
    if not names:
        raise ConfigError(f"{labels_path} lists no samples")
    images = np.stack([load_image(directory / name) for name in names])
    return images, np.asarray(labels), names


def write_regions_csv(path, partition):
    """Region stats with the canonical column order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "kind", "birth_beta", "pixel_count", "mean_intensity"])
        for rid in partition.region_ids():
            info = partition.regions[rid]
            writer.writerow(
                [
                    rid,
                    info.kind.value,
                    f"{info.birth_beta:g}",
                    info.pixel_count,
                    f"{info.mean_intensity:.6f}",
                ]
            )


def save_label_mask(path, label_mask):
    """Write a label mask as an 8-bit image with compact sequential ids."""
    ids = np.unique(label_mask)
    if ids.size > 256:
        raise StageError(
            "segment", f"{ids.size} regions cannot be stored in an 8-bit label image"
        )
    compact = np.searchsorted(ids, label_mask)
    save_image(compact / 255.0, path)


def run_pipeline(config):
    """Execute the configured stages and write manifest.json.

    Returns the manifest dict.  A stage failure still writes the
    manifest (flagged incomplete) before raising StageError.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stages = config.resolved_stages()
    if not stages:
        raise ConfigError(
            "nothing to do: configure input, dataset, or model to imply stages, "
            "or set stages explicitly"
        )
    for stage in stages:
        if stage not in STAGES:
            raise ConfigError(f"unknown stage {stage!r}")
    if any(s in ("denoise", "segment", "classify") for s in stages):
        if not config.input:
            raise ConfigError(f"stages {stages} need an input image")
        inputs = _input_images(config)
    else:
        inputs = []
    if "train" in stages and not config.dataset:
        raise ConfigError("the train stage needs a dataset directory")
    if "classify" in stages and not config.model and "train" not in stages:
        raise ConfigError("the classify stage needs a model checkpoint")

    manifest = {
        "seed": config.seed,
        "stages": list(stages),
        "complete": False,
        "failed_stage": None,
        "artifacts": [],
    }

    def add(path, stage):
        manifest["artifacts"].append(
            {
                "path": str(Path(path).relative_to(out_dir)),
                "stage": stage,
                "sha256": sha256_file(path),
            }
        )

    def write_manifest():
        with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    current = {p.stem: load_image(p) for p in inputs}
    segmentation_warning = "denoise" not in stages and "segment" in stages
    model_path = Path(config.model) if config.model else None
    stage = None
    try:
        for stage in stages:
            if stage == "denoise":
                for stem, img in current.items():
                    current[stem] = denoise(img, config.denoise)
                    path = out_dir / f"{stem}_denoised.pgm"
                    save_image(current[stem], path)
                    add(path, stage)
            elif stage == "segment":
                if segmentation_warning:
                    manifest["warnings"] = [
                        "segment ran on raw input; the denoise stage was skipped"
                    ]
                for stem, img in current.items():
                    result = segment(img, config.segment)
                    mask_path = out_dir / f"{stem}_mask.pgm"
                    save_image(result.foreground_mask.astype(np.float64), mask_path)
                    add(mask_path, stage)
                    labels_path = out_dir / f"{stem}_labels.pgm"
                    save_label_mask(labels_path, result.partition.label_mask)
                    add(labels_path, stage)
                    regions_path = out_dir / f"{stem}_regions.csv"
                    write_regions_csv(regions_path, result.partition)
                    add(regions_path, stage)
                    if result.warning:
                        manifest.setdefault("warnings", []).append(
                            f"{stem}: {result.warning}"
                        )
            elif stage == "train":
                images, labels, _ = load_labeled_dataset(config.dataset)
                train_idx, test_idx = stratified_split(labels, 0.7, config.seed)
                params = dict(config.model_params)
                params.setdefault("seed", config.seed)
                model = ConvRecurrentClassifier(**params)
                model.fit(images[train_idx], labels[train_idx])
                model_path = out_dir / "model.ctvr"
                save_model(model, model_path)
                add(model_path, stage)
                predicted = model.predict(images[test_idx])
                report = multiclass_report(labels[test_idx], predicted)
                metrics_path = out_dir / "metrics.csv"
                write_metrics_csv(metrics_path, report)
                add(metrics_path, stage)
            elif stage == "classify":
                model = load_model(model_path)
                rows = []
                for stem, img in sorted(current.items()):
                    probs = model.predict_proba(img)[0]
                    label = model.classes_[int(np.argmax(probs))]
                    rows.append((stem, label, probs))
                pred_path = out_dir / "predictions.csv"
                with open(pred_path, "w", newline="", encoding="utf-8") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(
                        ["input", "predicted"]
                        + [f"p_{c}" for c in model.classes_]
                    )
                    for stem, label, probs in rows:
                        writer.writerow(
                            [stem, label] + [f"{p:.6f}" for p in probs]
                        )
                add(pred_path, stage)
    except (ConfigError, FileNotFoundError):
        raise
    except Exception as exc:
        manifest["failed_stage"] = stage
        write_manifest()
        raise StageError(stage, str(exc)) from exc

    manifest["complete"] = True
    write_manifest()
    return manifest
