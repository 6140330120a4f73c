"""Training harness: config, model bundle, synthetic data, train/eval loops."""

from oapr.harness.bench import bench_latency
from oapr.harness.config import TrainConfig, cosine_lr_factor
from oapr.harness.evaluate import REPORT_SCHEMA, evaluate, write_report
from oapr.harness.model import CHECKPOINT_FIELDS, OAPRModel
from oapr.harness.synthetic import (
    SYNTH_COLORS,
    SYNTH_RAW_NAMES,
    SYNTH_REGIONS,
    generate_dataset,
    labels_for,
    render_person,
    sample_world,
    synthetic_catalog,
)
from oapr.harness.train import TrainResult, run_training, write_log

__all__ = [
    "CHECKPOINT_FIELDS",
    "OAPRModel",
    "REPORT_SCHEMA",
    "SYNTH_COLORS",
    "SYNTH_RAW_NAMES",
    "SYNTH_REGIONS",
    "TrainConfig",
    "TrainResult",
    "bench_latency",
    "cosine_lr_factor",
    "evaluate",
    "generate_dataset",
    "labels_for",
    "render_person",
    "run_training",
    "sample_world",
    "synthetic_catalog",
    "write_log",
    "write_report",
]
