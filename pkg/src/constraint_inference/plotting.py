"""Figures written next to the CSV outputs of the command-line tools."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_PANELS = (("kinematic_error", "position", "kinematic error (m)"),
           ("f_error", "force", "force error (N)"),
           ("n_error", "moment", "moment error (N m)"))


def _positive(values):
    # log axes cannot show exact zeros
    return np.maximum(np.asarray(values, dtype=float), 1e-12)


def plot_error_traces(traces, path, thresholds=None, title=None):
    """One panel per error criterion, one line per model.

    ``traces`` maps a model label to a dict with ``t`` and the error arrays;
    ``thresholds`` optionally maps the same labels to a Threshold, drawn as
    dashed lines in the model's colour.
    """
    fig, axes = plt.subplots(3, 1, figsize=(8, 8), sharex=True)
    for i, (label, trace) in enumerate(traces.items()):
        color = f"C{i}"
        for ax, (key, attr, _) in zip(axes, _PANELS):
            if key not in trace:
                continue
            ax.semilogy(trace["t"], _positive(trace[key]), color=color, lw=1.0, label=label)
            if thresholds and label in thresholds:
                ax.axhline(getattr(thresholds[label], attr), color=color, ls="--", lw=0.8)
    for ax, (_, _, ylabel) in zip(axes, _PANELS):
        ax.set_ylabel(ylabel)
        ax.grid(True, which="both", alpha=0.3)
    axes[0].legend(fontsize="small", ncol=3)
    axes[-1].set_xlabel("time (s)")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sampling_study(study, path, title=None):
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, data, name in ((axes[0], study.contiguous, "contiguous samples"),
                           (axes[1], study.random, "random samples")):
        lo, med, hi = np.percentile(data, [25, 50, 75], axis=0)
        ax.fill_between(study.counts, lo, hi, alpha=0.3)
        ax.loglog(study.counts, med, "o-")
        ax.set_xlabel("number of samples")
        ax.set_title(name)
        ax.grid(True, which="both", alpha=0.3)
    axes[0].set_ylabel("fit error (m)")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_votes(report, path):
    """Bar chart of eligible-sample counts per model."""
    labels = [k.label for k in report.votes]
    counts = [v.eligible_count for v in report.votes.values()]
    fig, ax = plt.subplots(figsize=(8, 3.5))
    bars = ax.bar(labels, counts, color=["C3" if k == report.winner else "C0" for k in report.votes])
    ax.bar_label(bars)
    ax.set_ylabel("eligible samples")
    ax.set_title(f"winner: {report.label}")
    ax.tick_params(axis="x", labelrotation=20)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
