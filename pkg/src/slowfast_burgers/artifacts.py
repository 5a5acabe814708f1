"""Artifact writers: CSV tables, SVG plots and the run manifest.

Files are written to ``<name>.partial`` and renamed into place only once
complete, so an interrupted run leaves visibly partial artifacts behind.
"""

from __future__ import annotations

import contextlib
import csv
import json
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

SWEEP_COLUMNS = ["epsilon", "p", "estimate", "stderr", "M_effective", "exclusions",
                 "runtime_s", "config_hash", "estimate_root"]


@contextlib.contextmanager
def atomic_path(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_name(path.name + ".partial")
    yield partial
    partial.replace(path)


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    with atomic_path(path) as tmp, open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return Path(path)


def write_sweep_csv(path, report) -> Path:
    rows = [[c.epsilon, c.p, c.estimate, c.stderr, c.m_effective, c.exclusions,
             c.runtime_s, report.config_hash, c.root_estimate] for c in report.cells]
    return write_csv(path, SWEEP_COLUMNS, rows)


def write_trajectory_csv(path, times, traj, config_hash, prefix="a") -> Path:
    n = traj.shape[-1]
    header = ["t"] + [f"{prefix}{k}" for k in range(1, n + 1)] + ["config_hash"]
    rows = ([t, *row, config_hash] for t, row in zip(times, traj))
    return write_csv(path, header, rows)


def write_sweep_svg(path, report) -> Path:
    """Log-x plot of the error estimate against epsilon, one line per p."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": report.config_hash or "sweep"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for p in sorted({c.p for c in report.cells}):
            cells = sorted((c for c in report.cells if c.p == p), key=lambda c: c.epsilon)
            ax.errorbar([c.epsilon for c in cells], [c.estimate for c in cells],
                        yerr=[c.stderr for c in cells], marker="o", capsize=3, label=f"p={p:g}")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("epsilon")
        ax.set_ylabel("E[sup_t ||X^eps - Xbar||^p]")
        ax.set_title(f"averaging error (config {report.config_hash})", fontsize=9)
        ax.legend()
        fig.tight_layout()
        with atomic_path(path) as tmp:
            fig.savefig(tmp, format="svg",
                        metadata={"Date": None, "Description": f"config_hash={report.config_hash}"})
        plt.close(fig)
    return Path(path)


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    config_hash: str
    version: str = __version__
    started: float = field(default_factory=time.time)
    finished: float | None = None
    outputs: list[str] = field(default_factory=list)
    status: str = "running"
    host: str = field(default_factory=platform.node)

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / "manifest.json"
        with atomic_path(path) as tmp:
            tmp.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=float))
        return path
