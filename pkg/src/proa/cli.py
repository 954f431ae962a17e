"""Operator surface: ``proa certify|baseline|inspect``.

The certify command verifies every dataset image against one
perturbation family and writes:

  report.csv    one row per image with the deterministic outcome fields
                (image_id, family, verdict, mu_hat, epsilon,
                samples_used, margin_d); byte-identical across runs with
                the same seed
  timings.csv   per-image measured wall time (nondeterministic, kept out
                of report.csv so the determinism contract holds)
  summary.json  verdict percentages, average runtime and sample usage

The baseline command does the same per enabled method (report_ac.csv,
report_grid.csv, report_random.csv).  Datasets are a directory of .imt
tensors plus a labels.tsv index of "filename<TAB>label" lines; flat
key=value config files are supported with command-line flags taking
precedence.

Exit codes: 0 success, 2 configuration error, 3 model error, 4 dataset
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from proa import baselines as baselines_mod
from proa import classifier as classifier_mod
from proa import container
from proa.perturb import Family, ImageTensor, PerturbationSpec
from proa.verifier import (
    DatasetItem,
    DatasetResult,
    ImageRecord,
    Verdict,
    VerifyConfig,
    VerifyOutcome,
    certify_dataset,
    clean_margin,
)

__all__ = ["main", "RunConfig", "load_dataset", "DatasetError", "ConfigError"]

EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_DATASET = 4

LABELS_FILENAME = "labels.tsv"


class ConfigError(Exception):
    pass


class DatasetError(Exception):
    pass


@dataclass
class RunConfig:
    """Merged command configuration; every field except the model and
    dataset paths has a default."""

    model: str | None = None
    dataset: str | None = None
    perturbation: str = Family.ROTATION.value
    box: str | None = None
    tau: float = 0.05
    delta: float = 1e-4
    n0: int = 100
    nmax: int = 10_000
    seed: int = 0
    workers: int = 1
    out: str = "proa-out"
    ac_n: int | None = None
    grid_points: int | None = None
    rand_n: int | None = None
    timeout: float = 30.0

    def verify_config(self) -> VerifyConfig:
        try:
            return VerifyConfig(tau=self.tau, delta=self.delta, n0=self.n0,
                                n_max=self.nmax, seed=self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def perturbation_spec(self) -> PerturbationSpec:
        try:
            family = Family(self.perturbation)
        except ValueError as exc:
            names = ", ".join(f.value for f in Family)
            raise ConfigError(
                f"unknown perturbation {self.perturbation!r}; choose from {names}"
            ) from exc
        box = _parse_box(self.box) if self.box else ()
        try:
            return PerturbationSpec(family=family, theta_box=box)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _parse_box(text: str) -> tuple[tuple[float, float], ...]:
    dims = []
    for part in text.split(","):
        lo, sep, hi = part.partition(":")
        if not sep:
            raise ConfigError(f"box dimension {part!r} is not lo:hi")
        try:
            dims.append((float(lo), float(hi)))
        except ValueError as exc:
            raise ConfigError(f"box dimension {part!r} is not numeric") from exc
    return tuple(dims)


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


_INT_KEYS = {"n0", "nmax", "seed", "workers", "ac_n", "grid_points", "rand_n"}
_FLOAT_KEYS = {"tau", "delta", "timeout"}


def build_run_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    if getattr(args, "config", None):
        for key, value in _read_config_file(args.config).items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                if key in _INT_KEYS:
                    setattr(config, key, int(value))
                elif key in _FLOAT_KEYS:
                    setattr(config, key, float(value))
                else:
                    setattr(config, key, value)
            except ValueError as exc:
                raise ConfigError(f"config key {key}: {exc}") from exc
    for key in known:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            setattr(config, key, flag_value)
    return config


def load_dataset(
    path: str | Path,
    expected_shape: tuple[int, int, int] | None = None,
    num_classes: int | None = None,
) -> tuple[list[DatasetItem], list[str]]:
    """Read a labels.tsv-indexed directory of .imt tensors.

    Bad rows are skipped and reported as warning strings; the call fails
    only when nothing loads at all.
    """
    root = Path(path)
    index = root / LABELS_FILENAME if root.is_dir() else root
    if not index.exists():
        raise DatasetError(f"labels index {index} does not exist")
    base = index.parent

    items: list[DatasetItem] = []
    warnings: list[str] = []
    for lineno, raw in enumerate(index.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, sep, label_text = line.partition("\t")
        if not sep:
            warnings.append(f"{index}:{lineno}: expected name<TAB>label, got {raw!r}")
            continue
        try:
            label = int(label_text)
        except ValueError:
            warnings.append(f"{index}:{lineno}: label {label_text!r} is not an integer")
            continue
        tensor_path = base / name
        if not tensor_path.exists():
            warnings.append(f"{index}:{lineno}: missing tensor file {name}")
            continue
        try:
            pixels = container.load_imt(tensor_path)
            image = ImageTensor(pixels)
        except (container.ContainerFormatError, ValueError) as exc:
            warnings.append(f"{name}: {exc}")
            continue
        if expected_shape is not None and image.shape != tuple(expected_shape):
            warnings.append(
                f"{name}: shape {image.shape} does not match model input "
                f"{tuple(expected_shape)}"
            )
            continue
        if num_classes is not None and not 0 <= label < num_classes:
            warnings.append(f"{name}: label {label} outside [0, {num_classes})")
            continue
        items.append(DatasetItem(image=image, label=label, index=len(items),
                                 name=name))
    if not items:
        raise DatasetError(
            f"no usable images in {index} ({len(warnings)} problem(s))"
        )
    return items, warnings


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def _write_outcome_csv(path: Path, family: str, rows) -> None:
    lines = ["image_id,family,verdict,mu_hat,epsilon,samples_used,margin_d"]
    for record in rows:
        o = record.outcome
        lines.append(
            f"{record.item.name},{family},{o.verdict.value},{_fmt(o.mu_hat)},"
            f"{_fmt(o.epsilon)},{o.samples_used},{_fmt(o.margin_d)}"
        )
    path.write_text("\n".join(lines) + "\n")


def _write_timings_csv(path: Path, rows) -> None:
    lines = ["image_id,wall_time"]
    for record in rows:
        lines.append(f"{record.item.name},{_fmt(record.outcome.wall_time)}")
    path.write_text("\n".join(lines) + "\n")


def _summarise(result: DatasetResult, warnings: list[str]) -> dict:
    total = result.total
    outcomes = [r.outcome for r in result.records if r.outcome is not None]
    avg_runtime = (
        sum(o.wall_time for o in outcomes) / len(outcomes) if outcomes else 0.0
    )
    avg_samples = (
        sum(o.samples_used for o in outcomes) / len(outcomes) if outcomes else 0.0
    )
    return {
        "n_images": total,
        "certified_pct": 100.0 * result.counts[Verdict.CERTIFIED] / total,
        "violated_pct": 100.0 * result.counts[Verdict.VIOLATED] / total,
        "undetermined_pct": 100.0 * result.counts[Verdict.UNDETERMINED] / total,
        "misclassified_pct": 100.0 * result.counts[Verdict.MISCLASSIFIED] / total,
        "avg_runtime_s": avg_runtime,
        "avg_samples": avg_samples,
        "errors": [
            {"image_id": r.item.name, "error": r.error}
            for r in result.records
            if r.error is not None
        ],
        "warnings": warnings,
    }


def _load_model(config: RunConfig):
    try:
        return classifier_mod.resolve_model(config.model, timeout=config.timeout)
    except (classifier_mod.ModelError, container.ContainerFormatError,
            OSError, ValueError) as exc:
        raise _Exit(EXIT_MODEL, f"model error: {exc}") from exc


def _load_items(config: RunConfig, model):
    try:
        return load_dataset(
            config.dataset,
            expected_shape=model.input_shape,
            num_classes=model.num_classes,
        )
    except DatasetError as exc:
        raise _Exit(EXIT_DATASET, f"dataset error: {exc}") from exc


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def cmd_certify(config: RunConfig) -> int:
    if not config.model and not os.environ.get(classifier_mod.ENDPOINT_ENV_VAR):
        raise _Exit(EXIT_CONFIG, "certify requires --model (or PROA_ENDPOINT)")
    if not config.dataset:
        raise _Exit(EXIT_CONFIG, "certify requires --dataset")
    spec = config.perturbation_spec()
    verify_config = config.verify_config()
    model = _load_model(config)
    items, warnings = _load_items(config, model)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)

    result = certify_dataset(model, items, spec, verify_config,
                             workers=config.workers)
    ordered = sorted(result.records, key=lambda r: r.item.index)
    completed = [r for r in ordered if r.outcome is not None]

    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_outcome_csv(out_dir / "report.csv", spec.family.value, completed)
    _write_timings_csv(out_dir / "timings.csv", completed)
    summary = _summarise(result, warnings)
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    print(
        f"certified {summary['certified_pct']:.1f}% of {result.total} image(s); "
        f"reports in {out_dir}"
    )
    return 0


def cmd_baseline(config: RunConfig) -> int:
    if not config.model and not os.environ.get(classifier_mod.ENDPOINT_ENV_VAR):
        raise _Exit(EXIT_CONFIG, "baseline requires --model (or PROA_ENDPOINT)")
    if not config.dataset:
        raise _Exit(EXIT_CONFIG, "baseline requires --dataset")
    spec = config.perturbation_spec()
    config.verify_config()  # validates tau/delta/seed bundle
    model = _load_model(config)
    items, warnings = _load_items(config, model)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)

    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary: dict[str, object] = {}

    def bit_outcome(bit: int, clean_ok: bool, n_evals: int) -> VerifyOutcome:
        if not clean_ok:
            return VerifyOutcome(Verdict.MISCLASSIFIED, 0.0, 1.0, 0, 0.0, 0.0)
        verdict = Verdict.CERTIFIED if bit else Verdict.VIOLATED
        return VerifyOutcome(verdict, float(bit), 0.0, n_evals, 0.0, 0.0)

    if config.ac_n:
        records = []
        for item in items:
            outcome = baselines_mod.ac_certify(
                model, item.image, item.label, spec, n_fixed=config.ac_n,
                tau=config.tau, delta=config.delta, seed=config.seed,
                image_index=item.index,
            )
            records.append(ImageRecord(item=item, outcome=outcome))
        _write_outcome_csv(out_dir / "report_ac.csv", spec.family.value, records)
        certified = sum(
            1 for r in records if r.outcome.verdict is Verdict.CERTIFIED
        )
        summary["ac"] = {
            "enabled": True,
            "n_fixed": config.ac_n,
            "certified_pct": 100.0 * certified / len(records),
        }
    else:
        summary["ac"] = {"enabled": False}

    if config.grid_points:
        records = []
        for item in items:
            clean_ok = clean_margin(model, item.image, item.label).hit
            bit = baselines_mod.grid_accuracy(
                model, item.image, item.label, spec, config.grid_points
            )
            n_evals = config.grid_points ** spec.dims if clean_ok else 0
            records.append(
                ImageRecord(item=item, outcome=bit_outcome(bit, clean_ok, n_evals))
            )
        _write_outcome_csv(out_dir / "report_grid.csv", spec.family.value, records)
        summary["grid"] = {
            "enabled": True,
            "points_per_dim": config.grid_points,
            "robust_pct": 100.0 * sum(
                1 for r in records if r.outcome.verdict is Verdict.CERTIFIED
            ) / len(records),
        }
    else:
        summary["grid"] = {"enabled": False}

    if config.rand_n:
        records = []
        for item in items:
            clean_ok = clean_margin(model, item.image, item.label).hit
            stream = np.random.default_rng((config.seed, item.index))
            bit = baselines_mod.random_accuracy(
                model, item.image, item.label, spec, config.rand_n, stream
            )
            n_evals = config.rand_n if clean_ok else 0
            records.append(
                ImageRecord(item=item, outcome=bit_outcome(bit, clean_ok, n_evals))
            )
        _write_outcome_csv(out_dir / "report_random.csv", spec.family.value, records)
        summary["random"] = {
            "enabled": True,
            "n_random": config.rand_n,
            "robust_pct": 100.0 * sum(
                1 for r in records if r.outcome.verdict is Verdict.CERTIFIED
            ) / len(records),
        }
    else:
        summary["random"] = {"enabled": False}

    summary["warnings"] = warnings
    (out_dir / "baseline_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    enabled = [k for k in ("ac", "grid", "random") if summary[k]["enabled"]]
    print(f"baseline methods run: {', '.join(enabled) if enabled else 'none'}; "
          f"reports in {out_dir}")
    return 0


def cmd_inspect(config: RunConfig) -> int:
    if not config.model and not config.dataset and not os.environ.get(
        classifier_mod.ENDPOINT_ENV_VAR
    ):
        raise _Exit(EXIT_CONFIG, "inspect needs --model and/or --dataset")
    model = None
    if config.model or os.environ.get(classifier_mod.ENDPOINT_ENV_VAR):
        model = _load_model(config)
        desc = model.descriptor
        print(f"model: {desc.source}")
        print(f"  kind: {desc.kind.value}")
        h, w, c = desc.input_shape
        print(f"  input shape: {h}x{w}x{c}")
        print(f"  classes: {desc.num_classes}")
        if isinstance(model, classifier_mod.BuiltinClassifier):
            shapes = " -> ".join(f"{r}x{c}" for r, c in model.layer_shapes)
            print(f"  layers: {shapes}")
    if config.dataset:
        try:
            items, warnings = load_dataset(
                config.dataset,
                expected_shape=model.input_shape if model else None,
                num_classes=model.num_classes if model else None,
            )
        except DatasetError as exc:
            raise _Exit(EXIT_DATASET, f"dataset error: {exc}") from exc
        labels = sorted({item.label for item in items})
        shapes = sorted({item.image.shape for item in items})
        print(f"dataset: {config.dataset}")
        print(f"  images: {len(items)}")
        print(f"  shapes: {', '.join(f'{h}x{w}x{c}' for h, w, c in shapes)}")
        print(f"  labels: {labels[0]}..{labels[-1]}")
        if warnings:
            print(f"  skipped rows: {len(warnings)}")
            for warning in warnings:
                print(f"    {warning}")
    return 0


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--model", help=".nnw weight file or host:port endpoint")
    parser.add_argument("--dataset", help="dataset directory or labels.tsv path")
    parser.add_argument("--perturbation",
                        choices=[f.value for f in Family],
                        help="perturbation family (default rotation)")
    parser.add_argument("--box", help="parameter box override, lo:hi[,lo:hi]")
    parser.add_argument("--tau", type=float, help="tolerated failure rate")
    parser.add_argument("--delta", type=float, help="confidence complement")
    parser.add_argument("--n0", type=int, help="samples per batch")
    parser.add_argument("--nmax", type=int, help="maximum total samples per image")
    parser.add_argument("--seed", type=int, help="base RNG seed")
    parser.add_argument("--workers", type=int, help="parallel images")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--timeout", type=float,
                        help="per-batch timeout for external models (s)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proa",
        description="Probabilistic robustness certification of black-box "
                    "classifiers under functional perturbations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_certify = sub.add_parser("certify", help="adaptive certification run")
    _add_common_flags(p_certify)

    p_baseline = sub.add_parser("baseline", help="fixed-budget and empirical runs")
    _add_common_flags(p_baseline)
    p_baseline.add_argument("--ac-n", dest="ac_n", type=int, nargs="?",
                            const=1000,
                            help="enable the interval baseline with this budget")
    p_baseline.add_argument("--grid-points", dest="grid_points", type=int,
                            nargs="?", const=21,
                            help="enable grid search with points per dimension")
    p_baseline.add_argument("--rand-n", dest="rand_n", type=int, nargs="?",
                            const=100,
                            help="enable random search with this many draws")

    p_inspect = sub.add_parser("inspect", help="print model/dataset metadata")
    _add_common_flags(p_inspect)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = build_run_config(args)
        if args.command == "certify":
            return cmd_certify(config)
        if args.command == "baseline":
            return cmd_baseline(config)
        return cmd_inspect(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _Exit as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
