"""Output bundle writers: series CSV, summary JSON, gnuplot scripts.

A bundle directory holds:

    summary.json    config echo, items {measured, target, tol, pass},
                    provenance and environment; always written, with an
                    error block when a run fails
    series.csv      one row per report time, fixed leading column schema
                    (t, energy_w1, energy_w0, norm_conf_plus,
                    norm_1_s_surrogate, flux_*, identity_residual,
                    sup_envelope) followed by any extra columns, values
                    formatted with 17 significant digits so a re-parse is
                    bit-exact
    plots/*.gp      self-contained gnuplot scripts (log-log decay plots
                    with target-slope guide lines), referencing only files
                    inside the bundle
"""

from __future__ import annotations

import json
import os
import platform
import sys
from typing import Dict, List, Optional

import numpy as np

from backwave import __version__
from backwave.scenarios import ScenarioReport

FIXED_COLUMNS = ["t", "energy_w1", "energy_w0", "norm_conf_plus",
                 "norm_1_s_surrogate", "identity_residual", "sup_envelope"]


def _fmt(x: float) -> str:
    if x != x:  # nan
        return "nan"
    return f"{float(x):.17g}"


def series_columns(report: ScenarioReport) -> List[str]:
    keys = set()
    for fr in report.series:
        keys.update(fr.values)
    flux = sorted(k for k in keys if k.startswith("flux_"))
    extras = sorted(k for k in keys if not k.startswith("flux_") and k not in FIXED_COLUMNS)
    fixed = FIXED_COLUMNS[:5] + flux + FIXED_COLUMNS[5:]
    return fixed + extras


def write_series_csv(report: ScenarioReport, path: str) -> List[str]:
    cols = series_columns(report)
    rows = sorted(report.series, key=lambda fr: fr.t)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for fr in rows:
            vals = [fr.t] + [fr.values.get(c, float("nan")) for c in cols[1:]]
            fh.write(",".join(_fmt(v) for v in vals) + "\n")
    return cols


def read_series_csv(path: str):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = [[float(x) for x in line.strip().split(",")] for line in fh if line.strip()]
    return header, np.asarray(data) if data else np.empty((0, len(header)))


def environment_block() -> Dict[str, str]:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "package_version": __version__,
    }


def write_summary_json(report: ScenarioReport, path: str,
                       config_text: Optional[str] = None,
                       error: Optional[str] = None) -> dict:
    payload = {
        "scenario": report.name,
        "status": "error" if (error or report.status != "ok") else "ok",
        "passed": bool(report.passed) and not error,
        "items": [it.as_dict() for it in report.items],
        "provenance": report.provenance,
        "environment": environment_block(),
        "config": report.spec,
    }
    if config_text is not None:
        payload["config_echo"] = config_text
    if error or report.error:
        payload["error"] = {"stage": report.name, "message": error or report.error}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return payload


def emit_plot_script(bundle_dir: str, report: ScenarioReport) -> Optional[str]:
    """One gnuplot script per bundle: log-log decay panels with guide slopes."""
    if not report.series:
        return None
    cols = series_columns(report)
    plots_dir = os.path.join(bundle_dir, "plots")
    os.makedirs(plots_dir, exist_ok=True)
    path = os.path.join(plots_dir, f"{report.name}_decay.gp")
    fit_items = [it for it in report.items if it.kind == "fit" and it.target is not None]
    lines = [
        "# log-log decay series with target-slope guides",
        "set terminal pngcairo size 900,600",
        f"set output 'plots/{report.name}_decay.png'",
        "set logscale xy",
        "set xlabel 't'",
        "set key left bottom",
        "set datafile separator ','",
    ]
    plot_parts = []
    for name in ("energy_v", "norm_conf_plus", "norm_1_s_surrogate", "sup_envelope",
                 "source_norm_s", "difference_energy_at_t0"):
        if name in cols:
            idx = cols.index(name) + 1
            plot_parts.append(f"'series.csv' using 1:{idx} skip 1 with linespoints title '{name}'")
    for it in fit_items:
        plot_parts.append(f"{max(abs(it.measured), 1e-12):.6g} * (x/10.0)**({it.target:.6g}) "
                          f"with lines dashtype 2 title 'target slope {it.target:g}'")
    if not plot_parts:
        return None
    lines.append("plot " + ", \\\n     ".join(plot_parts))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_bundle(report: ScenarioReport, out_dir: str,
                 config_text: Optional[str] = None,
                 slices=None) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    if report.series:
        write_series_csv(report, os.path.join(out_dir, "series.csv"))
        emit_plot_script(out_dir, report)
    if slices is not None:
        from backwave.engine import write_slice_dump
        write_slice_dump(slices, os.path.join(out_dir, "slices.bin"))
    return write_summary_json(report, os.path.join(out_dir, "summary.json"),
                              config_text=config_text)
