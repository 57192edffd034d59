import json
import logging
from pathlib import Path
from typing import List, Optional

import typer

from ..core.config import ConfigManager, TrackerConfig
from ..core.errors import FantrackError
from ..core.mesh import PRIMITIVES, load_obj, save_obj
from ..core.metadata import MetadataManager, RunMetadata
from ..core.models import Modality, ResetPolicy, VariantKind, Weighting

logger = logging.getLogger(__name__)

EXIT_LOST = 1
EXIT_ERROR = 2


# Configure logging
def setup_logging(log_file: Optional[Path] = None, verbose: bool = False):
    """Configure logging for the application."""
    log_level = logging.DEBUG if verbose else logging.INFO

    console_formatter = logging.Formatter('%(levelname)s: %(message)s')
    file_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    logger = logging.getLogger()
    logger.setLevel(log_level)
    logger.handlers.clear()

    console_handler = logging.StreamHandler()
    console_handler.setLevel(log_level)
    console_handler.setFormatter(console_formatter)
    logger.addHandler(console_handler)

    if log_file:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(file_formatter)
        logger.addHandler(file_handler)


def _fail(error: Exception) -> typer.Exit:
    typer.echo(f"Error: {error}", err=True)
    return typer.Exit(EXIT_ERROR)


def _load_config(config_file: Optional[str], modality: Optional[Modality] = None,
                 weighting: Optional[Weighting] = None) -> TrackerConfig:
    config = ConfigManager(config_file).load()
    overrides = {}
    if modality is not None:
        overrides["modality"] = modality.value
    if weighting is not None:
        overrides["weighting"] = weighting.value
    if overrides:
        config = TrackerConfig.from_dict({**config.to_dict(), **overrides})
    return config


LogFileOption = typer.Option(None, "--log-file", "-l", help="Log file path")
VerboseOption = typer.Option(False, "--verbose", "-v", help="Enable verbose logging")
ConfigOption = typer.Option(None, "--config", "-c", help="TOML or JSON file overriding tracker defaults")


app = typer.Typer(help="Monocular 6DoF object pose tracking with contour and interior modalities.")


@app.command("gen-templates")
def gen_templates(
    mesh_path: Path = typer.Argument(..., help="Object mesh (OBJ, meters)"),
    out: Path = typer.Argument(..., help="Template file to write"),
    views: Optional[int] = typer.Option(None, "--views", help="Icosphere subdivision level"),
    radius: Optional[float] = typer.Option(None, "--radius", help="Camera distance in meters"),
    seed: int = typer.Option(0, "--seed", help="Sampling seed"),
    workers: int = typer.Option(4, "--workers", help="Parallel views"),
    config_file: Optional[str] = ConfigOption,
    log_file: Optional[str] = LogFileOption,
    verbose: bool = VerboseOption,
):
    """Render viewpoint templates for a mesh."""
    from ..services.viewpoint_model import generate_model, save_model

    setup_logging(Path(log_file) if log_file else None, verbose)
    try:
        config = _load_config(config_file)
        if views is not None:
            config = TrackerConfig.from_dict({**config.to_dict(), "templates": {"subdivision_level": views}})
        mesh = load_obj(mesh_path)
        model = generate_model(mesh, config, radius=radius, seed=seed, max_workers=workers, show_progress=True)
        save_model(model, out)
    except (FantrackError, OSError, ValueError) as e:
        raise _fail(e)
    typer.echo(f"Wrote {len(model.views)} views to {out} (sha256 {MetadataManager.calculate_sha256(out)[:12]})")


@app.command()
def synth(
    mesh_path: Path = typer.Argument(..., help="Object mesh (OBJ, meters)"),
    out: Path = typer.Argument(..., help="Output sequence directory"),
    variant: VariantKind = typer.Option(VariantKind.REGULAR, "--variant", help="Appearance variant"),
    frames: int = typer.Option(200, "--frames", help="Number of frames"),
    seed: int = typer.Option(0, "--seed", help="Rendering seed"),
    deg_per_frame: float = typer.Option(3.0, "--deg-per-frame", help="Orbit rotation per frame; 0 for a static scene"),
    distance: float = typer.Option(0.5, "--distance", help="Object distance in meters"),
    noise_sigma: Optional[float] = typer.Option(None, "--noise-sigma", help="Pixel noise for the noise variant"),
    log_file: Optional[str] = LogFileOption,
    verbose: bool = VerboseOption,
):
    """Render a synthetic sequence with ground truth."""
    from ..services.synthetic import (
        default_intrinsics,
        default_start_pose,
        generate_synthetic_sequence,
        make_variant,
        orbit_trajectory,
        static_trajectory,
    )

    setup_logging(Path(log_file) if log_file else None, verbose)
    try:
        mesh = load_obj(mesh_path)
        start = default_start_pose(distance)
        if deg_per_frame == 0:
            trajectory = static_trajectory(start, frames)
        else:
            trajectory = orbit_trajectory(start, frames, deg_per_frame)
        sequence = generate_synthetic_sequence(
            mesh, default_intrinsics(), trajectory, make_variant(variant, noise_sigma), seed, out,
            show_progress=True,
        )
    except (FantrackError, OSError, ValueError) as e:
        raise _fail(e)
    typer.echo(f"Wrote {len(sequence)} frames to {out}")


@app.command()
def track(
    sequence_path: Path = typer.Argument(..., help="Sequence directory"),
    mesh_path: Path = typer.Argument(..., help="Object mesh (OBJ, meters)"),
    templates: Path = typer.Argument(..., help="Template file from gen-templates"),
    init: str = typer.Option("gt", "--init", help="'gt' or a pose file whose first line is the initial pose"),
    out: Path = typer.Option(Path("trajectory.csv"), "--out", "-o", help="Trajectory CSV to write"),
    policy: ResetPolicy = typer.Option(ResetPolicy.NO_RESET, "--policy", help="Behaviour after failures"),
    modality: Optional[Modality] = typer.Option(None, "--modality", help="joint or contour-only tracking"),
    weighting: Optional[Weighting] = typer.Option(None, "--weighting", help="Contour weighting"),
    config_file: Optional[str] = ConfigOption,
    log_file: Optional[str] = LogFileOption,
    verbose: bool = VerboseOption,
):
    """Track an object through a sequence."""
    from ..services.benchmark import run_tracking
    from ..services.dataset import load_sequence, read_poses, save_trajectory
    from ..services.viewpoint_model import load_model

    setup_logging(Path(log_file) if log_file else None, verbose)
    try:
        config = _load_config(config_file, modality, weighting)
        sequence = load_sequence(sequence_path)
        mesh = load_obj(mesh_path)
        model = load_model(templates)
        init_pose = None if init == "gt" else read_poses(init)[0]
        run = run_tracking(sequence, mesh, model, config, policy, init_pose, show_progress=True)
        save_trajectory(out, run.trajectory)
        RunMetadata(
            sequence=sequence.name,
            mesh_sha256=MetadataManager.mesh_digest(mesh).hex(),
            templates_sha256=MetadataManager.calculate_sha256(templates),
            modality=config.modality.value,
            policy=policy.value,
            config=config.to_dict(),
        ).save(out.with_suffix(".meta.json"))
    except (FantrackError, OSError, ValueError) as e:
        raise _fail(e)

    typer.echo(f"Wrote {len(run.trajectory)} poses to {out}")
    if run.lost_frames:
        typer.echo(f"Tracking lost at {len(run.lost_frames)} frames (first: {run.lost_frames[0]})", err=True)
        if policy is ResetPolicy.NO_RESET:
            raise typer.Exit(EXIT_LOST)


@app.command("eval")
def evaluate_command(
    sequence_path: Path = typer.Argument(..., help="Sequence directory with ground truth"),
    trajectory_path: Path = typer.Argument(..., help="Trajectory CSV"),
    policy: ResetPolicy = typer.Option(ResetPolicy.NO_RESET, "--policy", help="Reset accounting"),
    mesh_path: Optional[Path] = typer.Option(None, "--mesh", help="Mesh, if the sequence names none"),
    json_out: Optional[Path] = typer.Option(None, "--json", help="Write the MetricReport as JSON"),
    per_frame: bool = typer.Option(False, "--per-frame", help="Print per-frame errors"),
    log_file: Optional[str] = LogFileOption,
    verbose: bool = VerboseOption,
):
    """Score a trajectory against ground truth."""
    from ..services.dataset import load_sequence, load_trajectory
    from ..services.evaluation import evaluate
    from ..ui.report import ReportFormatter

    setup_logging(Path(log_file) if log_file else None, verbose)
    try:
        sequence = load_sequence(sequence_path)
        mesh = load_obj(mesh_path) if mesh_path else sequence.load_mesh()
        report = evaluate(sequence, load_trajectory(trajectory_path), policy, mesh=mesh)
        if json_out:
            MetadataManager.save_json(report.to_dict(), json_out)
    except (FantrackError, OSError, ValueError) as e:
        raise _fail(e)

    if per_frame:
        for line in ReportFormatter.per_frame(report):
            typer.echo(line)
    for line in ReportFormatter.summary(report):
        typer.echo(line)


@app.command()
def bench(
    sequences: List[Path] = typer.Argument(..., help="Sequence directories (with manifests)"),
    policy: ResetPolicy = typer.Option(ResetPolicy.RESET_5CM5DEG, "--policy", help="Behaviour after failures"),
    modality: Optional[Modality] = typer.Option(None, "--modality", help="joint or contour-only tracking"),
    weighting: Optional[Weighting] = typer.Option(None, "--weighting", help="Contour weighting"),
    workers: int = typer.Option(2, "--workers", help="Sequences processed in parallel"),
    json_out: Optional[Path] = typer.Option(None, "--json", help="Write all reports as JSON"),
    config_file: Optional[str] = ConfigOption,
    log_file: Optional[str] = LogFileOption,
    verbose: bool = VerboseOption,
):
    """Track and evaluate several sequences."""
    from ..services.benchmark import bench as run_bench
    from ..ui.report import ReportFormatter

    setup_logging(Path(log_file) if log_file else None, verbose)
    try:
        config = _load_config(config_file, modality, weighting)
        results = run_bench(sequences, config, policy, max_workers=workers)
        if json_out:
            MetadataManager.save_json({name: report.to_dict() for name, report in results}, json_out)
    except (FantrackError, OSError, ValueError) as e:
        raise _fail(e)

    for name, report in results:
        typer.echo(f"{name}: " + ", ".join(f"{r:.1f}" for r in (f.runtime_ms for f in report.per_frame[1:])) + " ms")
    for line in ReportFormatter.bench_table(results):
        typer.echo(line)


@app.command()
def primitive(
    shape: str = typer.Argument(..., help=f"One of: {', '.join(PRIMITIVES)}"),
    out: Path = typer.Argument(..., help="OBJ file to write"),
    size: float = typer.Option(0.1, "--size", help="Characteristic size in meters"),
):
    """Write a primitive mesh for experiments."""
    if shape not in PRIMITIVES:
        raise _fail(ValueError(f"unknown primitive {shape!r}; choose from {', '.join(PRIMITIVES)}"))
    try:
        save_obj(PRIMITIVES[shape](size), out)
    except OSError as e:
        raise _fail(e)
    typer.echo(f"Wrote {shape} to {out}")


@app.command()
def config(
    out: Path = typer.Argument(..., help="JSON file to write the effective configuration to"),
    config_file: Optional[str] = ConfigOption,
):
    """Write the effective tracker configuration."""
    try:
        ConfigManager(out).save(_load_config(config_file))
    except (FantrackError, OSError, ValueError) as e:
        raise _fail(e)
    typer.echo(f"Wrote configuration to {out}")


@app.command()
def version():
    """Show version information."""
    from .. import __version__
    typer.echo(f"fantrack version {__version__}")


def main():
    """Main CLI entry point."""
    app()


if __name__ == "__main__":
    main()
