"""Corpus ingestion, run orchestration, persistence and reporting."""

from attributor.pipeline.config import RunConfig, build_backends, config_from_dict, load_config
from attributor.pipeline.corpus import corpus_digest, load_corpus
from attributor.pipeline.report import RunReport, compare_runs, render_markdown, render_report, report_tables
from attributor.pipeline.run import STAGES, RunState, build_report, run_phr, run_stage, run_to_dir

__all__ = [
    "RunConfig",
    "RunReport",
    "RunState",
    "STAGES",
    "build_backends",
    "build_report",
    "compare_runs",
    "config_from_dict",
    "corpus_digest",
    "load_config",
    "load_corpus",
    "render_markdown",
    "render_report",
    "report_tables",
    "run_phr",
    "run_stage",
    "run_to_dir",
]
