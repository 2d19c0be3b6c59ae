"""Command line entry point.

Exit codes: 0 on success, 1 on a configuration or backend failure, 2 when the
corpus cannot be read.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from attributor.backends.cache import CacheMode
from attributor.errors import AttributorError, CorpusError, CorpusMismatch
from attributor.pipeline.config import RunConfig, load_config
from attributor.pipeline.report import RunReport, compare_runs, render_report
from attributor.pipeline.run import STAGES, run_stage, run_to_dir

EXIT_FATAL = 1
EXIT_CORPUS = 2


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(EXIT_CORPUS if isinstance(exc, CorpusError) else EXIT_FATAL)


def _configure(config_path: str, mode: str | None, max_records: int | None, seed: int | None) -> RunConfig:
    config = load_config(config_path)
    return config.with_overrides(cache_mode=CacheMode(mode) if mode else None, max_records=max_records, seed=seed)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Post-hoc answer attribution for LLM answers."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


def _mode_options(fn):
    fn = click.option("--offline", "--replay", "mode", flag_value="offline",
                      help="Serve every backend call from the cache; never touch the network.")(fn)
    fn = click.option("--record", "mode", flag_value="record", help="Use the cache, filling misses from upstream.")(fn)
    fn = click.option("--live", "mode", flag_value="live", help="Bypass the cache.")(fn)
    return fn


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@_mode_options
@click.option("--max-records", type=click.IntRange(min=0), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def run(config_path, mode, max_records, seed, out_dir):
    """Run the full pipeline and write report.json plus stage artifacts."""
    try:
        config = _configure(config_path, mode, max_records, seed)
        report = run_to_dir(config, out_dir)
    except AttributorError as exc:
        _fail(exc)
    c = report.counts
    click.echo(f"run {report.run_id}: {c['records']} records, {c['segmented']} claims, "
               f"{c['attributed']} attributed, {len(report.errors)} errors -> {Path(out_dir) / 'report.json'}")


def _stage_command(stage: str):
    @click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
    @_mode_options
    @click.option("--max-records", type=click.IntRange(min=0), default=None)
    @click.option("--seed", type=int, default=None)
    @click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
    def command(config_path, mode, max_records, seed, out_dir):
        try:
            config = _configure(config_path, mode, max_records, seed)
            state = run_stage(stage, config, out_dir)
        except AttributorError as exc:
            _fail(exc)
        click.echo(f"{stage}: done ({len(state.errors)} errors logged) -> {out_dir}")

    command.__doc__ = f"Run only the {stage} stage against a run directory."
    return main.command(name=stage)(command)


for _stage in STAGES:
    _stage_command(_stage)


@main.command()
@click.argument("run_a", type=click.Path(exists=True))
@click.argument("run_b", type=click.Path(exists=True))
def compare(run_a, run_b):
    """Compare two runs over the same corpus (deltas are B - A)."""
    try:
        result = compare_runs(RunReport.load(run_a), RunReport.load(run_b))
    except CorpusMismatch as exc:
        _fail(exc)
    except (OSError, ValueError, KeyError) as exc:
        _fail(AttributorError(f"cannot read report: {exc}"))
    click.echo(json.dumps(result, sort_keys=True, indent=2))


@main.command()
@click.argument("run_path", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["md", "markdown", "csv", "json"]), default="md")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory (defaults to the run directory).")
def render(run_path, fmt, out_dir):
    """Render a run report as markdown tables, CSV files or JSON."""
    path = Path(run_path)
    try:
        report = RunReport.load(path)
    except (OSError, ValueError, KeyError) as exc:
        _fail(AttributorError(f"cannot read report: {exc}"))
    target = out_dir or (path if path.is_dir() else path.parent)
    for written in render_report(report, fmt, target):
        click.echo(str(written))


if __name__ == "__main__":
    main()
