"""Training-trace figures and a long-format traces CSV for a stage report."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

TRACES_CSV = "traces.csv"


def _as_float(value) -> float:
    # traces store non-finite numbers as strings
    return float(value)


def write_traces_csv(report, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["check", "run", "seed", "epoch", "loss", "metric_kind", "metric"])
        for rec in report.traces:
            for epoch, (loss, metric) in enumerate(zip(rec["losses"], rec["metrics"]), start=1):
                writer.writerow([rec["check"], rec["run"], rec["seed"], epoch,
                                 repr(_as_float(loss)), rec["metric_kind"], repr(_as_float(metric))])
    return path


def plot_trace(rec: dict, path) -> Path:
    losses = [_as_float(v) for v in rec["losses"]]
    metrics = [_as_float(v) for v in rec["metrics"]]
    epochs = range(1, len(losses) + 1)
    fig, (ax_loss, ax_metric) = plt.subplots(2, 1, sharex=True, figsize=(6.0, 5.0))
    ax_loss.plot(epochs, losses, color="tab:blue", lw=1.2, label="loss")
    every = rec.get("sample_every")
    if every:
        idx = list(range(every - 1, len(losses), every))
        ax_loss.plot([i + 1 for i in idx], [losses[i] for i in idx], "o", color="tab:red",
                     ms=4, label=f"sampled every {every}")
    finite = [v for v in losses if math.isfinite(v)]
    if finite and min(finite) > 0 and max(finite) / min(finite) > 100:
        ax_loss.set_yscale("log")
    ax_loss.set_ylabel("loss")
    ax_loss.legend(frameon=False, fontsize=8)
    ax_metric.plot(epochs, metrics, color="tab:green", lw=1.2)
    ax_metric.set_ylabel(rec["metric_kind"])
    ax_metric.set_xlabel("epoch")
    ax_loss.set_title(f"{rec['check']} run {rec['run']} (seed {rec['seed']})", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def write_figures(report, directory) -> list[Path]:
    """Write one PNG per training run plus ``traces.csv``; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = [write_traces_csv(report, directory / TRACES_CSV)]
    for rec in report.traces:
        name = f"{report.stage}_{rec['check']}_run{rec['run']}.png"
        written.append(plot_trace(rec, directory / name))
    return written
