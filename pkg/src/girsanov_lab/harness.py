"""Run a configured scenario and write its CSV tables and JSON summary."""

from __future__ import annotations

import datetime as _dt
import json
import math
import os
import time

from . import __version__
from .config import ConfigError, ScenarioConfig
from .report import RunReport
from .scenarios import REGISTRY


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item"):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def run_scenario(config: ScenarioConfig, write: bool = True) -> RunReport:
    """Execute ``config``; with ``write`` the outputs land in ``config.output_dir()``.

    CSV files are a pure function of the config (no timestamps), so reruns
    are byte-identical whatever the worker count.
    """
    if config.scenario_name not in REGISTRY:
        raise ConfigError(f"unknown scenario {config.scenario_name!r}; choose from {sorted(REGISTRY)}")
    report = RunReport(config.scenario_name, __version__, config.seed, config.echo())
    t0 = time.perf_counter()
    REGISTRY[config.scenario_name](config, report)
    report.wall_clock = time.perf_counter() - t0
    if write:
        write_outputs(report, config.output_dir())
    return report


def write_outputs(report: RunReport, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, buf in report.tables.items():
        path = os.path.join(out_dir, f"{report.scenario}_{name}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
        paths.append(path)
    report.files = paths
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    summary = os.path.join(out_dir, f"{report.scenario}_summary.json")
    with open(summary, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(report.summary(stamp)), fh, indent=2)
        fh.write("\n")
    paths.append(summary)
    return paths
