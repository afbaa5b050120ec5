"""Seeded batch runs and baseline-vs-encoder comparisons."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from setattn.harness.config import ExperimentConfig, dump_config, load_config
from setattn.harness.greedy import estimate_greedy_return
from setattn.harness.plot import emit_plot
from setattn.harness.report import ComparisonReport, ReportRow, epochs_to_threshold
from setattn.ppo.trainer import TrainingCurve, TrainingDiverged, train

log = logging.getLogger(__name__)


@dataclass
class SeedResult:
    seed: int
    curve: TrainingCurve
    csv_path: Path


def _run_seed(cfg: ExperimentConfig, seed: int, run_dir: Path) -> SeedResult:
    checkpoint_dir = None
    if cfg.train.checkpoint_every:
        checkpoint_dir = run_dir / f"checkpoints_seed{seed}"
        checkpoint_dir.mkdir(parents=True, exist_ok=True)
    try:
        curve = train(cfg.task, cfg.m, cfg.representation, cfg.train.to_train_config(seed),
                      cfg.encoder_spec(), checkpoint_dir)
    except TrainingDiverged as exc:
        log.warning("seed %d: %s", seed, exc)
        curve = exc.curve
    path = run_dir / f"seed{seed}.csv"
    curve.to_csv(path)
    return SeedResult(seed, curve, path)


def greedy_reference(cfg: ExperimentConfig):
    return estimate_greedy_return(cfg.task, cfg.m, cfg.greedy_episodes, cfg.greedy_seed)


def _final_return(curve: TrainingCurve, window):
    r = curve.returns[-window:]
    r = r[np.isfinite(r)]
    return float(r.mean()) if r.size else math.nan


def report_rows(cfg: ExperimentConfig, results, reference):
    mean, std = reference
    return [
        ReportRow(
            name=cfg.run_name,
            representation=cfg.representation,
            seed=res.seed,
            final_mean_return=_final_return(res.curve, cfg.window),
            epochs_to_threshold=epochs_to_threshold(res.curve.returns, mean, cfg.threshold, cfg.window),
            greedy_mean=mean,
            greedy_std=std,
            diverged_at=res.curve.diverged_at,
        )
        for res in results
    ]


def run_experiment(config, workers: int = 1, output_dir=None):
    """Train every seed of one config; write curves, report, summary and plot.

    Returns ``(ComparisonReport, run_dir)``.
    """
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config)
    root = Path(output_dir) if output_dir is not None else cfg.resolved_output_dir()
    run_dir = root / cfg.run_name
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.yaml").write_text(dump_config(cfg))

    if workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_seed, [cfg] * len(cfg.seeds), cfg.seeds, [run_dir] * len(cfg.seeds)))
    else:
        results = [_run_seed(cfg, s, run_dir) for s in cfg.seeds]

    reference = greedy_reference(cfg)
    report = ComparisonReport(cfg.threshold, cfg.window, report_rows(cfg, results, reference))
    report.to_csv(run_dir / "report.csv")
    (run_dir / "summary.txt").write_text(report.summary())
    emit_plot([r.csv_path for r in results], run_dir / "curves.svg", reference[0], cfg.window,
              title=cfg.run_name)
    return report, run_dir


def compare(configs, workers: int = 1, output_dir=None):
    """Run several configs and merge their rows into one report.

    Configs must share task, object count, threshold settings and greedy
    settings, so every row is measured against the same greedy reference.
    """
    cfgs = [c if isinstance(c, ExperimentConfig) else load_config(c) for c in configs]
    if len(cfgs) < 2:
        raise ValueError("compare needs at least two configs")
    keys = {(c.task, c.m, c.threshold, c.window, c.greedy_episodes, c.greedy_seed) for c in cfgs}
    if len(keys) != 1:
        raise ValueError("compared configs must share task, m, threshold, window and greedy settings")
    names = [c.run_name for c in cfgs]
    if len(set(names)) != len(names):
        raise ValueError(f"compared configs need distinct run names, got {names}")
    root = Path(output_dir) if output_dir is not None else cfgs[0].resolved_output_dir()
    rows = []
    curves = []
    for cfg in cfgs:
        report, run_dir = run_experiment(cfg, workers, root)
        rows.extend(report.rows)
        curves.extend(sorted(run_dir.glob("seed*.csv")))
    out_dir = root / ("compare_" + "_vs_".join(names))
    out_dir.mkdir(parents=True, exist_ok=True)
    merged = ComparisonReport(cfgs[0].threshold, cfgs[0].window, rows)
    merged.to_csv(out_dir / "report.csv")
    (out_dir / "summary.txt").write_text(merged.summary())
    emit_plot(curves, out_dir / "curves.svg", rows[0].greedy_mean, cfgs[0].window,
              title=" vs ".join(names), labels=[f"{p.parent.name}/{p.stem}" for p in curves])
    return merged, out_dir
