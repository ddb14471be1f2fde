"""Run a scenario, write CSV artifacts and a manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from .pipelines import PIPELINE_FUNCS, PipelineResult
from .scenario import Scenario, load_scenario

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_table(path: Path, header, rows) -> str:
    """Write a CSV with round-trip float formatting; returns its sha256."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return hashlib.sha256(path.read_bytes()).hexdigest()


def versions() -> dict:
    return {"isaclab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run_scenario(sc: Scenario, out_dir, threads: int = 1) -> dict:
    """Execute ``sc`` and write its artifacts; returns the manifest dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result: PipelineResult = PIPELINE_FUNCS[sc.pipeline](sc, threads=threads)
    artifacts = []
    for name, table in result.tables.items():
        fname = f"{sc.pipeline}_{name}.csv"
        digest = write_table(out / fname, table.header, table.rows)
        artifacts.append({"file": fname, "rows": len(table.rows), "columns": table.header,
                          "sha256": digest})
    manifest = {
        "pipeline": sc.pipeline,
        "config_hash": sc.config_hash(),
        "seed": sc.seed,
        "trials": sc.trials,
        "versions": versions(),
        "status": "infeasible" if result.infeasible else "ok",
        "infeasible": result.infeasible,
        "artifacts": artifacts,
        "summary": result.summary,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    if result.infeasible:
        log.warning("%d infeasible sweep points recorded", len(result.infeasible))
    return manifest


def run_experiment(scenario_file, out_dir, seed: int | None = None, trials: int | None = None,
                   threads: int = 1) -> dict:
    """Load, validate and run a scenario file."""
    return run_scenario(load_scenario(scenario_file, seed, trials), out_dir, threads)
