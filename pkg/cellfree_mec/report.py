# -*- coding: utf-8 -*-

# Copyright: (c) 2024, Cell-Free MEC Contributors
# GNU General Public License v3.0+ (see COPYING or
# https://www.gnu.org/licenses/gpl-3.0.txt)

"""
CSV reports of a campaign: empirical CDFs, summary statistics and mode ratios.

CDF files hold one "value,probability" line per sample, sorted, without header.
Infeasible snapshots are excluded from every CDF and counted separately.
"""

from __future__ import annotations

import logging

from pathlib import Path

import numpy as np
import pandas as pd

from cellfree_mec.campaign import MetricsTable
from cellfree_mec.store import write_metrics

logger = logging.getLogger(__name__)

# metric name -> (table, column)
CDF_METRICS = {
    "total_power_w": ("snapshots", "total_power_w"),
    "total_compute_ghz": ("snapshots", "total_compute_ghz"),
    "power_mw": ("users", "power_mw"),
    "compute_ghz": ("users", "f_total_ghz"),
    "se": ("users", "se"),
    "ergodic_se": ("users", "ergodic_se"),
    "energy_j_per_mbit": ("users", "energy_j_per_mbit"),
    "latency_s": ("users", "latency_s"),
}

PERCENTILES = (5, 10, 25, 50, 75, 90, 95)

RATIO_PAIRS = (
    ("cellfree", "cellular"),
    ("cellfree", "fullpower"),
    ("cellular", "fullpower_cellular"),
)


def empirical_cdf(values):
    """Sorted finite-or-infinite samples with probabilities (i + 1) / n"""
    values = np.asarray(values, dtype=float)
    values = np.sort(values[~np.isnan(values)])
    probability = np.arange(1, values.size + 1) / max(values.size, 1)
    return pd.DataFrame({"value": values, "probability": probability})


def metric_samples(metrics: MetricsTable, metric, mode):
    """Samples of one CDF metric for one mode, infeasible snapshots excluded"""
    table, column = CDF_METRICS[metric]
    if table == "snapshots":
        rows = metrics.feasible_snapshots(mode)
    else:
        rows = metrics.feasible_users(mode)
    values = pd.to_numeric(rows[column], errors="coerce").to_numpy(dtype=float)
    return values[~np.isnan(values)]


def summarize(metrics: MetricsTable):
    """Median, 5th and 95th percentile of every metric and mode"""
    records = []
    for mode in metrics.modes:
        for metric in CDF_METRICS:
            values = metric_samples(metrics, metric, mode)
            if values.size == 0:
                continue
            records.append(
                {
                    "mode": mode,
                    "metric": metric,
                    "count": int(values.size),
                    "median": float(np.median(values)),
                    "p5": float(np.percentile(values, 5)),
                    "p95": float(np.percentile(values, 95)),
                    "mean": float(np.mean(values)),
                }
            )
    return pd.DataFrame(records, columns=["mode", "metric", "count", "median", "p5", "p95", "mean"])


def infeasibility(metrics: MetricsTable):
    """Infeasible snapshot count and rate per mode"""
    records = []
    for mode in metrics.modes:
        rows = metrics.snapshots[metrics.snapshots["mode"] == mode]
        records.append(
            {
                "mode": mode,
                "snapshots": int(len(rows)),
                "infeasible": int(rows["infeasible"].sum()),
                "rate": metrics.infeasibility_rate(mode),
            }
        )
    return pd.DataFrame(records, columns=["mode", "snapshots", "infeasible", "rate"])


def ratios(metrics: MetricsTable):
    """Percentile-wise ratios between modes for every metric"""
    modes = set(metrics.modes)
    records = []
    for numerator, denominator in RATIO_PAIRS:
        if numerator not in modes or denominator not in modes:
            continue
        for metric in CDF_METRICS:
            top = metric_samples(metrics, metric, numerator)
            bottom = metric_samples(metrics, metric, denominator)
            if top.size == 0 or bottom.size == 0:
                continue
            for percentile in PERCENTILES:
                top_value = float(np.percentile(top, percentile))
                bottom_value = float(np.percentile(bottom, percentile))
                records.append(
                    {
                        "metric": metric,
                        "numerator": numerator,
                        "denominator": denominator,
                        "percentile": percentile,
                        "numerator_value": top_value,
                        "denominator_value": bottom_value,
                        "ratio": top_value / bottom_value if bottom_value != 0 else np.nan,
                    }
                )
    columns = [
        "metric",
        "numerator",
        "denominator",
        "percentile",
        "numerator_value",
        "denominator_value",
        "ratio",
    ]
    return pd.DataFrame(records, columns=columns)


def emit_report(metrics: MetricsTable, out_dir, database=None):
    """Write CDFs, raw metrics, summary, infeasibility and ratio tables; return the paths"""
    if metrics.users.empty and metrics.snapshots.empty:
        raise ValueError("No metrics to report")

    out_dir = Path(out_dir)
    cdf_dir = out_dir / "cdf"
    cdf_dir.mkdir(parents=True, exist_ok=True)
    written = []

    for mode in metrics.modes:
        for metric in CDF_METRICS:
            path = cdf_dir / f"{metric}__{mode}.csv"
            empirical_cdf(metric_samples(metrics, metric, mode)).to_csv(
                path, header=False, index=False
            )
            written.append(path)

    tables = {
        "metrics_users.csv": metrics.users,
        "metrics_snapshots.csv": metrics.snapshots,
        "summary.csv": summarize(metrics),
        "infeasibility.csv": infeasibility(metrics),
        "ratios.csv": ratios(metrics),
    }
    for name, frame in tables.items():
        path = out_dir / name
        frame.to_csv(path, index=False)
        written.append(path)

    if database is not None:
        write_metrics(database, metrics)
        written.append(Path(database))

    logger.info("Wrote %d report files to %s", len(written), out_dir)
    return written
