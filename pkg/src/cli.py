"""Command-line harness: generate toy data, train, evaluate, analyze and export plots."""
import json
import logging
from pathlib import Path
from typing import Optional

import click
import numpy as np
from pydantic import BaseModel, ValidationError

from src.bingham.service import plot_points_csv
from src.errors import ConfigError, PoseKitError
from src.metrics.service import write_report
from src.model.domain import ModelSpec, TrainConfig
from src.model.repository import ModelRepository
from src.model.service import train
from src.pipeline.domain import InferenceConfig
from src.pipeline.repository import load_hypotheses, write_json
from src.pipeline.service import analyze_hypotheses, bingham_plots, evaluate, sweep_hypothesis_counts
from src.settings import configure_logging, resolve_seed
from src.toy.domain import PinholeCamera, ToyConfig, ToysetHeader
from src.toy.repository import ToysetRepository
from src.toy.service import get_object, sample_dataset, symmetry_kind

logger = logging.getLogger(__name__)

EXISTING_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)
OUTPUT_FILE = click.Path(dir_okay=False, path_type=Path)


class PoseKitGroup(click.Group):
    """Maps domain errors to exit status 2 and numerical failures to 3."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except PoseKitError as e:
            click.echo(f"Error: {e}", err=True)
            ctx.exit(e.exit_code)
        except ValidationError as e:
            click.echo(f"Error: {e}", err=True)
            ctx.exit(ConfigError.exit_code)


def _load_config(model: type[BaseModel], path: Optional[Path]) -> BaseModel:
    if path is None:
        return model()
    try:
        return model.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ConfigError(f"Invalid config '{path}': {e}")


def _inference_config(
    path: Optional[Path], singular_index: Optional[int], rule: Optional[str], axis_method: Optional[str] = None
) -> InferenceConfig:
    config = _load_config(InferenceConfig, path)
    updates = {}
    if axis_method is not None:
        updates["axis_method"] = axis_method
    if singular_index is not None:
        updates["singular_index"] = singular_index
    if rule is not None:
        updates["cluster_selection_rule"] = rule
    return InferenceConfig.model_validate({**config.model_dump(), **updates})


def _echo_json(model: BaseModel) -> None:
    click.echo(model.model_dump_json(indent=2))


@click.group(cls=PoseKitGroup)
@click.option("--verbose", "-v", is_flag=True, help="Log at DEBUG level.")
def cli(verbose: bool):
    """Multi-hypothesis pose estimation toolkit."""
    configure_logging(verbose)


@cli.command()
@click.option("--object", "object_id", type=click.Choice(["cube", "cup", "cylinder"]), required=True)
@click.option("--n", type=click.IntRange(min=1), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--noise", type=click.FloatRange(min=0.0), default=None, help="Observation noise sigma.")
@click.option("--out", type=OUTPUT_FILE, required=True)
def gen(object_id: str, n: int, seed: Optional[int], noise: Optional[float], out: Path):
    """Generate a toy dataset file."""
    seed = resolve_seed(seed)
    obj = get_object(object_id)
    camera = PinholeCamera()
    config = ToyConfig() if noise is None else ToyConfig(noise_sigma=noise)
    header = ToysetHeader(
        object_id=object_id,
        diameter=obj.diameter,
        symmetry=symmetry_kind(obj),
        camera=camera,
        seed=seed,
        n=n,
        depth_range=config.depth_range,
        noise_sigma=config.noise_sigma,
    )
    repository = ToysetRepository(header)
    for sample in sample_dataset(obj, n, camera, config, seed):
        repository.add(sample)
    repository.save(out)
    click.echo(f"Wrote {n} samples to {out}")


@cli.command("train")
@click.option("--data", type=EXISTING_FILE, required=True)
@click.option("--m", type=click.IntRange(min=1), default=30, show_default=True)
@click.option("--epochs", type=click.IntRange(min=1), default=None)
@click.option("--config", "config_path", type=EXISTING_FILE, default=None, help="TrainConfig JSON.")
@click.option("--out", type=OUTPUT_FILE, required=True)
@click.option("--log", "log_path", type=OUTPUT_FILE, default=None, help="Training log (default <out>.log.json).")
def train_command(data: Path, m: int, epochs: Optional[int], config_path: Optional[Path], out: Path, log_path: Optional[Path]):
    """Train a multi-hypothesis regressor."""
    config = _load_config(TrainConfig, config_path)
    updates = {"seed": resolve_seed(config.seed)}
    if epochs is not None:
        updates["epochs"] = epochs
    config = config.model_copy(update=updates)

    dataset = ToysetRepository.load(data)
    spec = ModelSpec(m=m, seed=config.seed)
    model, log = train(dataset.get_all(), spec, config)
    ModelRepository().save(model, out, config, log, log_path)
    click.echo(f"Trained M={m} for {config.epochs} epochs; final loss {log.epochs[-1].mean_loss:.5f}")


@cli.command("eval")
@click.option("--data", type=EXISTING_FILE, required=True)
@click.option("--model", "model_path", type=EXISTING_FILE, required=True)
@click.option("--report", type=OUTPUT_FILE, required=True)
@click.option("--config", "config_path", type=EXISTING_FILE, default=None, help="InferenceConfig JSON.")
@click.option("--calibrate", is_flag=True, help="Recalibrate the ambiguity threshold on this dataset.")
@click.option("--singular-index", type=click.Choice(["1", "2"]), default=None)
@click.option("--selection-rule", type=click.Choice(["largest-membership", "lowest-dispersion"]), default=None)
@click.option("--axis-method", type=click.Choice(["plane", "relative"]), default=None)
def eval_command(
    data: Path,
    model_path: Path,
    report: Path,
    config_path: Optional[Path],
    calibrate: bool,
    singular_index: Optional[str],
    selection_rule: Optional[str],
    axis_method: Optional[str],
):
    """Evaluate a model on a toy dataset and write the JSON/CSV report."""
    dataset = ToysetRepository.load(data)
    model, _ = ModelRepository().load(model_path)
    config = _inference_config(
        config_path, None if singular_index is None else int(singular_index), selection_rule, axis_method
    )
    result = evaluate(model, get_object(dataset.header.object_id), dataset.get_all(), config, calibrate)
    json_path, csv_path = write_report(result, report)
    aggregates = result.aggregates
    click.echo(
        f"ADD {aggregates.add_acc:.3f}  ADI {aggregates.adi_acc:.3f}  "
        f"rot {aggregates.mean_rot_err_deg:.2f} deg  trans {aggregates.mean_trans_err_mm:.1f} mm"
    )
    click.echo(f"Report written to {json_path} and {csv_path}")


@cli.command()
@click.option("--hypotheses", type=EXISTING_FILE, required=True)
@click.option("--object", "object_id", type=click.Choice(["cube", "cup", "cylinder"]), default=None)
@click.option("--config", "config_path", type=EXISTING_FILE, default=None, help="InferenceConfig JSON.")
@click.option("--singular-index", type=click.Choice(["1", "2"]), default=None)
@click.option("--out", type=OUTPUT_FILE, default=None)
@click.option("--axis-method", type=click.Choice(["plane", "relative"]), default=None)
def analyze(
    hypotheses: Path,
    object_id: Optional[str],
    config_path: Optional[Path],
    singular_index: Optional[str],
    out: Optional[Path],
    axis_method: Optional[str],
):
    """Ambiguity report and mean-shift clusters of a hypothesis file."""
    rotations, _ = load_hypotheses(hypotheses)
    config = _inference_config(config_path, None if singular_index is None else int(singular_index), None, axis_method)
    result = analyze_hypotheses(rotations, config, object_id)
    if out is None:
        _echo_json(result)
    else:
        write_json(result, out)
        click.echo(f"Analysis written to {out}")


@cli.command()
@click.option("--hypotheses", type=EXISTING_FILE, required=True)
@click.option("--out", type=OUTPUT_FILE, required=True)
@click.option("--per-cluster", is_flag=True, help="Fit one distribution per mean-shift cluster.")
@click.option("--bandwidth", type=click.FloatRange(min=0.0, min_open=True), default=float(np.pi / 4), show_default=True)
def bingham(hypotheses: Path, out: Path, per_cluster: bool, bandwidth: float):
    """Fit Bingham distributions and export equatorial plot data (JSON plus point CSV)."""
    rotations, _ = load_hypotheses(hypotheses)
    results = bingham_plots(rotations, per_cluster, bandwidth)
    out.write_text(json.dumps([r.model_dump() for r in results], indent=2) + "\n", encoding="utf-8")
    table = plot_points_csv([r.plot for r in results], [r.cluster for r in results])
    out.with_suffix(".csv").write_text(table, encoding="utf-8")
    click.echo(f"Wrote {len(results)} Bingham fit(s) to {out}")


@cli.command("sweep-m")
@click.option("--data", type=EXISTING_FILE, required=True)
@click.option("--test-data", type=EXISTING_FILE, default=None, help="Held-out set (default: last fifth of --data).")
@click.option("--m-list", default="1,2,5,10,20,30,40", show_default=True)
@click.option("--epochs", type=click.IntRange(min=1), default=None)
@click.option("--config", "config_path", type=EXISTING_FILE, default=None, help="TrainConfig JSON.")
@click.option("--out", type=OUTPUT_FILE, default=None)
def sweep_m(data: Path, test_data: Optional[Path], m_list: str, epochs: Optional[int], config_path: Optional[Path], out: Optional[Path]):
    """Ablation over the number of hypotheses."""
    try:
        m_values = [int(m) for m in m_list.split(",") if m.strip()]
    except ValueError:
        raise ConfigError(f"--m-list must be comma-separated integers, got '{m_list}'")
    if not m_values or min(m_values) < 1:
        raise ConfigError(f"--m-list must hold positive integers, got '{m_list}'")

    config = _load_config(TrainConfig, config_path)
    updates = {"seed": resolve_seed(config.seed)}
    if epochs is not None:
        updates["epochs"] = epochs
    config = config.model_copy(update=updates)

    dataset = ToysetRepository.load(data)
    samples = dataset.get_all()
    if test_data is None:
        split = len(samples) - max(1, len(samples) // 5)
        train_samples, test_samples = samples[:split], samples[split:]
    else:
        train_samples, test_samples = samples, ToysetRepository.load(test_data).get_all()

    rows = sweep_hypothesis_counts(
        get_object(dataset.header.object_id),
        train_samples,
        test_samples,
        m_values,
        ModelSpec(seed=config.seed),
        config,
    )
    click.echo(f"{'M':>4} {'ADD':>6} {'ADI':>6} {'rot(deg)':>9} {'trans(mm)':>10}")
    for row in rows:
        a = row.aggregates
        click.echo(f"{row.m:>4} {a.add_acc:>6.3f} {a.adi_acc:>6.3f} {a.mean_rot_err_deg:>9.2f} {a.mean_trans_err_mm:>10.1f}")
    if out is not None:
        out.write_text(json.dumps([row.model_dump() for row in rows], indent=2) + "\n", encoding="utf-8")


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int):
    """Serve the HTTP API."""
    import uvicorn

    uvicorn.run("src.fastapi:app", host=host, port=port)
