"""Multi-seed sweeps and CSV output.

Output layout under the experiment's ``out`` directory::

    runs/<task>_<algo>_seed<k>.csv          one metrics row per epoch
    diagnostics/<task>_<algo>_seed<k>.csv   one row per diagnostics checkpoint
    aggregate/<task>_<algo>.csv             mean/std across seeds per epoch
    diagnostics/<task>_aggregate.csv        mean/std across seeds per checkpoint
    exact_anchor/...                        paired re-run logs (exact-anchor experiment)

Each cell writes only its own files; aggregation runs after every cell has
finished.
"""

from __future__ import annotations

import csv
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentSpec, TaskConfig
from .diagnostics import DIAGNOSTICS_COLUMNS, REPLAY_COLUMNS, exact_anchor_rerun
from .trainer import LOG_COLUMNS, run_training

log = logging.getLogger(__name__)

AGG_METRICS = ("avg_reward", "window_avg_reward_100", "episode_length", "delta_norm_mean")
DIAG_AGG_METRICS = ("grad_std_sum", "anchor_distance_mean")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def mean_std(values) -> tuple[float, float]:
    """Mean and population std, ignoring NaNs; NaN when nothing is left."""
    arr = np.asarray([v for v in values if not math.isnan(v)], dtype=np.float64)
    if arr.size == 0:
        return math.nan, math.nan
    # shifted by the first value so that identical inputs aggregate to exactly that value
    dev = arr - arr[0]
    return float(arr[0] + dev.mean()), float(dev.std())


def aggregate_logs(logs: list[list[dict]], key: str = "epoch", metrics=AGG_METRICS) -> list[dict]:
    """One row per distinct ``key`` value; each input row lands in exactly one bucket."""
    buckets: dict[int, list[dict]] = {}
    for run_log in logs:
        for row in run_log:
            buckets.setdefault(int(row[key]), []).append(row)
    out = []
    for k in sorted(buckets):
        rows = buckets[k]
        agg = {key: k, "n_runs": len(rows)}
        for metric in metrics:
            agg[f"{metric}_mean"], agg[f"{metric}_std"] = mean_std(float(r[metric]) for r in rows)
        out.append(agg)
    return out


def aggregate_columns(key: str = "epoch", metrics=AGG_METRICS) -> tuple[str, ...]:
    cols = [key, "n_runs"]
    for metric in metrics:
        cols += [f"{metric}_mean", f"{metric}_std"]
    return tuple(cols)


def diagnostics_rows(result) -> list[dict]:
    return [
        {
            "checkpoint_step": d.checkpoint_step,
            "algo": d.algo,
            "seed": d.seed,
            "grad_std_sum": d.grad_std_sum,
            "anchor_distance_mean": d.anchor_distance,
        }
        for d in result.diagnostics
    ]


@dataclass
class CellResult:
    task: str
    algo: str
    seed: int
    log: list[dict] | None = None
    diagnostics: list[dict] | None = None
    error: str | None = None


def run_cell(config: TaskConfig, algo: str, out: Path) -> CellResult:
    """Train one (task, algo, seed) cell and write its own CSVs; failures are captured."""
    name = f"{config.task}_{algo}_seed{config.seed}"
    try:
        result = run_training(config, algo)
        diag = diagnostics_rows(result)
        write_csv(out / "runs" / f"{name}.csv", LOG_COLUMNS, result.log)
        write_csv(out / "diagnostics" / f"{name}.csv", DIAGNOSTICS_COLUMNS, diag)
        return CellResult(config.task, algo, config.seed, result.log, diag)
    except Exception:
        return CellResult(config.task, algo, config.seed, error=traceback.format_exc())


def _run_cell_args(args):
    return run_cell(*args)


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> int:
    """Run every (algo, seed) cell of ``spec`` and write per-run and aggregate CSVs.

    Returns 0 when all cells succeed, 1 otherwise; a failed cell is logged
    and left out of the aggregates.
    """
    out = Path(spec.out)
    cells = [(spec.task_config(seed), algo, out) for algo in spec.algos for seed in spec.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell_args, cells))
    else:
        results = [run_cell(*cell) for cell in cells]

    status = 0
    for res in results:
        if res.error is not None:
            status = 1
            log.error("cell %s/%s seed %d failed:\n%s", res.task, res.algo, res.seed, res.error)
        else:
            log.info("cell %s/%s seed %d done (%d epochs)", res.task, res.algo, res.seed, len(res.log))

    ok = [r for r in results if r.error is None]
    all_diag = []
    for algo in spec.algos:
        logs = [r.log for r in ok if r.algo == algo]
        if logs:
            write_csv(out / "aggregate" / f"{spec.task}_{algo}.csv", aggregate_columns(),
                      aggregate_logs(logs))
        diags = [r.diagnostics for r in ok if r.algo == algo]
        for rows in diags:
            all_diag.extend(rows)
    if ok:
        agg_rows = []
        for algo in spec.algos:
            per_algo = [r.diagnostics for r in ok if r.algo == algo]
            for row in aggregate_logs(per_algo, key="checkpoint_step", metrics=DIAG_AGG_METRICS):
                agg_rows.append({"algo": algo, **row})
        write_csv(out / "diagnostics" / f"{spec.task}_aggregate.csv",
                  ("algo",) + aggregate_columns("checkpoint_step", DIAG_AGG_METRICS), agg_rows)
        write_csv(out / "diagnostics" / f"{spec.task}_all.csv", DIAGNOSTICS_COLUMNS, all_diag)
    return status


def run_exact_anchor(spec: ExperimentSpec) -> int:
    """Record an SVRG run (Adam off) per seed, then replay it with batch and exact anchors."""
    out = Path(spec.out) / "exact_anchor"
    summary = []
    for seed in spec.seeds:
        config = spec.task_config(seed).replace(svrg_adam=False)
        run = run_training(config, "svrg")
        if not run.epochs:
            log.error("seed %d: no epochs were run; nothing to replay", seed)
            return 1
        standard, exact = exact_anchor_rerun(run)
        for arm in (standard, exact):
            write_csv(out / f"{spec.task}_seed{seed}_{arm.arm}.csv", REPLAY_COLUMNS, arm.rows)
        summary.append({
            "seed": seed,
            "standard_mean_eval_reward": standard.mean_eval_reward,
            "exact_mean_eval_reward": exact.mean_eval_reward,
        })
        log.info("seed %d: standard %.4f, exact %.4f", seed,
                 standard.mean_eval_reward, exact.mean_eval_reward)
    write_csv(out / f"{spec.task}_summary.csv",
              ("seed", "standard_mean_eval_reward", "exact_mean_eval_reward"), summary)
    return 0
