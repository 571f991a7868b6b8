"""Command-line interface for LSR super-resolution.

Provides a Typer-based CLI for training, x2 super-resolution, PSNR/SSIM
evaluation, complexity reporting and model inspection.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional

import pandas as pd
import typer
import yaml

from lsr.chartGenerator import ChartGenerator
from lsr.complexityCalculator import (
    ComplexityError,
    compare_methods,
    descriptor_from_model,
    eval_method,
    format_count,
    get_method,
    method_names,
)
from lsr.config import ConfigurationError, RunConfig, load_settings, settings
from lsr.decision.gbtRegressor import TreeTrainingError
from lsr.decision.kmeans import ClusteringError
from lsr.decision.modelStore import ModelFormatError, load_model, read_manifest, save_model
from lsr.decision.pipeline import (
    LsrTrainer,
    TrainingError,
    dataset_statistics,
    list_images,
    superresolve,
    superresolve_color,
)
from lsr.evaluator import Evaluator, summarize, to_text, write_csv
from lsr.imaging import DimensionError, read_image, write_luma_png, write_rgb_png
from lsr.patches import Dataset
from lsr.representations import TransformFitError
from lsr.rft import SelectionError
from lsr.sampleCache import SampleCacheError, load_samples, save_samples
from lsr.utils.parallel import ThreadBudget

app = typer.Typer(no_args_is_help=True, add_completion=False)

# Exception class -> (message category, exit code); first match wins.
ERROR_CATEGORIES = (
    (ModelFormatError, "Model file error", 4),
    (SampleCacheError, "Data error", 3),
    (TrainingError, "Training error", 5),
    (ClusteringError, "Training error", 5),
    (TreeTrainingError, "Training error", 5),
    (TransformFitError, "Training error", 5),
    (DimensionError, "Data error", 3),
    (OSError, "Data error", 3),
    (ConfigurationError, "Configuration error", 2),
    (SelectionError, "Parameter error", 2),
    (ComplexityError, "Parameter error", 2),
    (ValueError, "Parameter error", 2),
)


def _abort(action: str, e: Exception) -> None:
    if isinstance(e, typer.Exit):
        raise e
    for cls, category, code in ERROR_CATEGORIES:
        if isinstance(e, cls):
            typer.echo(f"{category} while {action}: {e}", err=True)
            raise typer.Exit(code=code)
    typer.echo(f"Error while {action}: {e}", err=True)
    raise typer.Exit(code=1)


def _warn(message: str) -> None:
    typer.secho(f"Warning: {message}", fg=typer.colors.YELLOW, err=True)


def _images_in(directory: str) -> List[Path]:
    root = Path(directory)
    if not root.is_dir():
        typer.echo(f"Data error: {directory} is not a directory", err=True)
        raise typer.Exit(code=3)
    images = list_images(root)
    if not images:
        typer.echo(f"Data error: no images found in {directory}", err=True)
        raise typer.Exit(code=3)
    return images


def _read_all(paths: List[Path]) -> list:
    named = []
    for path in paths:
        try:
            luma, _ = read_image(path)
        except (OSError, ValueError) as e:
            _warn(f"skipping unreadable image {path}: {e}")
            continue
        named.append((path.name, luma))
    if not named:
        typer.echo("Data error: none of the images could be read", err=True)
        raise typer.Exit(code=3)
    return named


def _parse_types(text: Optional[str]):
    if text is None:
        return None
    try:
        return tuple(sorted({int(t) for t in text.replace(" ", "").split(",") if t}))
    except ValueError:
        raise typer.BadParameter(f"expected comma-separated type numbers, got {text!r}")


def _run_config(config_path: Optional[str], variant: Optional[str], **overrides) -> RunConfig:
    try:
        return RunConfig.from_settings(load_settings(config_path), variant, **overrides)
    except ConfigurationError as e:
        _abort("loading configuration", e)


@app.command()
def stats(
    train_dir: str = typer.Argument(..., help="Directory of HR training images"),
    stride: Optional[int] = typer.Option(None, help="Sampling stride in pixels"),
    threshold: Optional[float] = typer.Option(None, help="Easy/hard variance threshold"),
    csv: Optional[str] = typer.Option(None, help="Write the table to this CSV file"),
    config: Optional[str] = typer.Option(None, help="Extra settings TOML file"),
) -> None:
    """Report easy/hard sample counts and initial residual MSE per image."""
    cfg = _run_config(config, None, train_stride=stride, variance_threshold=threshold)
    images = _read_all(_images_in(train_dir))
    try:
        table = dataset_statistics(images, cfg)
    except Exception as e:
        _abort("computing dataset statistics", e)
    typer.echo(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    if csv:
        table.to_csv(csv, index=False, lineterminator="\n")


@app.command()
def prepare(
    train_dir: str = typer.Argument(..., help="Directory of HR training images"),
    output: str = typer.Option(settings.default_samples_path, help="Sample cache file"),
    stride: Optional[int] = typer.Option(None, help="Sampling stride in pixels"),
    seed: Optional[int] = typer.Option(None, help="Random seed"),
    config: Optional[str] = typer.Option(None, help="Extra settings TOML file"),
    verbose: bool = typer.Option(False, help="Enable verbose logging"),
) -> None:
    """Sample and augment training patches into a reusable cache file."""
    cfg = _run_config(config, None, train_stride=stride, seed=seed)
    images = _read_all(_images_in(train_dir))
    try:
        easy, hard = LsrTrainer(cfg, verbose=verbose).collect(images)
        samples = Dataset.concat([easy, hard])
        save_samples(samples, output)
    except Exception as e:
        _abort("preparing samples", e)
    typer.echo(f"{len(easy)} easy and {len(hard)} hard samples written to {output}")


@app.command()
def train(
    train_dir: Optional[str] = typer.Argument(None, help="Directory of HR training images"),
    samples: Optional[str] = typer.Option(None, help="Train from a sample cache instead"),
    model_out: str = typer.Option(settings.default_model_path, help="Output model file"),
    variant: Optional[str] = typer.Option(None, help="V1, V2 or custom"),
    hard_types: Optional[str] = typer.Option(None, help="Hard-branch types, e.g. '1,3,5'"),
    hard_features: Optional[int] = typer.Option(None, help="Hard-branch feature count"),
    selection_mode: Optional[str] = typer.Option(None, help="fixed_count or elbow"),
    fusion_scheme: Optional[int] = typer.Option(None, help="Decision scheme FU_h (1-4)"),
    seed: Optional[int] = typer.Option(None, help="Random seed"),
    stride: Optional[int] = typer.Option(None, help="Sampling stride in pixels"),
    threads: int = typer.Option(settings.threads, help="Worker threads"),
    config: Optional[str] = typer.Option(None, help="Extra settings TOML file"),
    verbose: bool = typer.Option(False, help="Enable verbose logging"),
) -> None:
    """Train an LSR model on a directory of HR images."""
    types = _parse_types(hard_types)
    if types is not None and variant is None:
        variant = "custom"
    cfg = _run_config(
        config,
        variant,
        hard_types=types,
        hard_features=hard_features,
        selection_mode=selection_mode,
        fusion_scheme=fusion_scheme,
        seed=seed,
        train_stride=stride,
        threads=threads,
    )
    ThreadBudget().configure(cfg.threads)
    if (train_dir is None) == (samples is None):
        typer.echo("Usage error: give either a training directory or --samples", err=True)
        raise typer.Exit(code=2)
    try:
        trainer = LsrTrainer(cfg, verbose=verbose)
        if samples is not None:
            model = trainer.train_samples(load_samples(samples))
        else:
            model = trainer.train(_read_all(_images_in(train_dir)))
        save_model(model, model_out)
    except Exception as e:
        _abort("training", e)
    for message in model.warnings:
        _warn(message)
    typer.echo(f"Model ({cfg.variant}) written to {model_out}")


@app.command()
def sr(
    model_path: str = typer.Argument(..., help="Trained model file"),
    input_path: str = typer.Argument(..., help="Low-resolution input image"),
    output: str = typer.Option(settings.default_output_path, help="Output luma PNG"),
    color: Optional[str] = typer.Option(None, help="Also write an RGB PNG to this path"),
    variant: Optional[str] = typer.Option(None, help="Fail unless the model has this variant"),
    threads: int = typer.Option(settings.threads, help="Worker threads"),
) -> None:
    """Super-resolve an image by a factor of 2."""
    ThreadBudget().configure(threads)
    try:
        model = load_model(model_path)
    except Exception as e:
        _abort("loading the model", e)
    if variant is not None and variant != model.variant:
        typer.echo(
            f"Model file error: model variant {model.variant} does not match {variant}", err=True
        )
        raise typer.Exit(code=4)
    try:
        luma, rgb = read_image(input_path)
        result = superresolve(model, luma)
        write_luma_png(result, output)
        if color:
            if rgb is None:
                _warn(f"{input_path} is grayscale; writing luma to {color}")
                write_luma_png(result, color)
            else:
                write_rgb_png(superresolve_color(model, rgb), color)
    except Exception as e:
        _abort(f"super-resolving {input_path}", e)
    typer.echo(f"{luma.height}x{luma.width} -> {result.height}x{result.width} written to {output}")


@app.command(name="eval")
def evaluate(
    model_path: str = typer.Argument(..., help="Trained model file"),
    hr_dirs: List[str] = typer.Argument(..., help="One or more directories of HR images"),
    csv: Optional[str] = typer.Option(None, help="Write per-image scores to this CSV file"),
    threads: int = typer.Option(settings.threads, help="Worker threads"),
    verbose: bool = typer.Option(False, help="Enable verbose logging"),
) -> None:
    """Compare LSR with the Lanczos baseline by PSNR/SSIM."""
    ThreadBudget().configure(threads)
    try:
        model = load_model(model_path)
    except Exception as e:
        _abort("loading the model", e)
    evaluator = Evaluator(model, shave=model.config.shave, verbose=verbose)
    frames = []
    for directory in hr_dirs:
        images = _read_all(_images_in(directory))
        try:
            frames.append(evaluator.evaluate(images, dataset=Path(directory).name))
        except Exception as e:
            _abort(f"evaluating {directory}", e)
    scores = pd.concat(frames, ignore_index=True)
    typer.echo(to_text(scores))
    typer.echo("")
    typer.echo(to_text(summarize(scores)))
    if csv:
        write_csv(scores, csv)


@app.command()
def complexity(
    methods: List[str] = typer.Argument(None, help="Method names or 'all'"),
    height: int = typer.Option(settings.complexity_height, help="HR image height"),
    width: int = typer.Option(settings.complexity_width, help="HR image width"),
    compare: bool = typer.Option(False, help="Also print the ratio comparison table"),
    csv: Optional[str] = typer.Option(None, help="Write step tables to this CSV file"),
) -> None:
    """Report FLOPs, FLOPs per pixel and model size per step."""
    names = methods or ["all"]
    if "all" in names:
        names = method_names()
    try:
        reports = [eval_method(get_method(name, (height, width))) for name in names]
    except Exception as e:
        _abort("computing complexity", e)
    frames = []
    for report in reports:
        frame = report.to_frame()
        typer.echo(f"== {report.method} ({height}x{width}) ==")
        typer.echo(frame.to_string(index=False))
        total = report.total
        typer.echo(
            f"Total: F = {format_count(total.flops)}, "
            f"F_p = {float(total.flops_per_pixel):.2f}, M = {total.params}"
        )
        for note in report.notes:
            typer.echo(f"Note: {note}")
        typer.echo("")
        frames.append(frame.assign(method=report.method))
    if compare:
        typer.echo(compare_methods(reports).to_string(index=False))
    if csv:
        table = pd.concat(frames, ignore_index=True)
        table = table[["method", "step", "label", "F", "F_p", "M"]]
        table.to_csv(csv, index=False, lineterminator="\n")


@app.command()
def inspect_model(
    model_path: str = typer.Argument(..., help="Trained model file"),
    rft_curve: Optional[str] = typer.Option(None, help="Write the sorted RFT curve CSV here"),
    branch: str = typer.Option("hard", help="Branch for --rft-curve: easy or hard"),
    show_complexity: bool = typer.Option(
        False, "--complexity", help="Print the complexity of this model"
    ),
) -> None:
    """Print a model's manifest and optional diagnostics."""
    try:
        manifest = read_manifest(model_path)
        model = load_model(model_path)
    except Exception as e:
        _abort("loading the model", e)
    summary = {k: manifest[k] for k in ("format_version", "variant", "branches", "warnings")}
    typer.echo(yaml.safe_dump(summary, sort_keys=False).rstrip())

    if rft_curve:
        chosen = model.hard if branch == "hard" else model.easy
        if chosen is None:
            typer.echo(f"Parameter error: model has no {branch} branch", err=True)
            raise typer.Exit(code=2)
        pd.DataFrame({"feature_id": chosen.rft_curve_ids, "loss": chosen.rft_curve}).to_csv(
            rft_curve, index=False, lineterminator="\n"
        )
        typer.echo(f"RFT curve of the {branch} branch written to {rft_curve}")
    if show_complexity:
        report = eval_method(descriptor_from_model(model))
        typer.echo(report.to_frame().to_string(index=False))


@app.command()
def chart(
    kind: str = typer.Argument(..., help="rft or complexity"),
    output: str = typer.Option(..., help="Output image path"),
    model_path: Optional[str] = typer.Option(None, "--model", help="Model file (for rft)"),
    branch: str = typer.Option("hard", help="Branch for the rft chart"),
    methods: Optional[List[str]] = typer.Option(None, "--method", help="Methods (complexity)"),
    verbose: bool = typer.Option(False, help="Enable verbose logging"),
) -> None:
    """Draw the RFT loss curve of a model or the method complexity bars."""
    try:
        generator = ChartGenerator(verbose=verbose)
        if kind == "rft":
            if model_path is None:
                raise ValueError("the rft chart needs --model")
            model = load_model(model_path)
            chosen = model.hard if branch == "hard" else model.easy
            if chosen is None:
                raise ValueError(f"model has no {branch} branch")
            generator.rft_curve(
                chosen.rft_curve, output, selected=chosen.feature_count, title=f"{branch} branch"
            )
        elif kind == "complexity":
            names = methods or method_names()
            reports = [eval_method(get_method(name)) for name in names]
            generator.complexity_bars(compare_methods(reports), output)
        else:
            raise ValueError(f"unknown chart kind {kind!r}; expected rft or complexity")
    except Exception as e:
        _abort("generating chart", e)
    typer.echo(f"Chart written to {output}")


if __name__ == "__main__":
    app()
