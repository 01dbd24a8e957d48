"""Figures for ``beswork props --figures DIR``."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, out: Path, name: str) -> Path:
    path = out / name
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def monotonicity_figure(sweep, out: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    sizes = list(sweep.support_by_size)
    ax.plot(sizes, [sweep.support_by_size[s] for s in sizes], marker="o")
    ax.set_xlabel("rules in base")
    ax.set_ylabel("fraction of formulas supported")
    ax.set_title(f"{sweep.formulas} formulas, {len(sweep.violations)} monotonicity violations")
    ax.set_xticks(sizes)
    ax.grid(alpha=0.3)
    return _save(fig, out, "monotonicity.png")


def clause_figure(surveys, out: Path) -> Path:
    clauses = ["ii", "iv", "v"]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    width = 0.8 / max(len(surveys), 1)
    for k, s in enumerate(surveys):
        tally = s.tally()
        rates = [tally[c][0] / tally[c][1] if c in tally else float("nan") for c in clauses]
        xs = [i + k * width for i in range(len(clauses))]
        ax.bar(xs, rates, width, label=f"variant {s.variant}")
        for x, c in zip(xs, clauses):
            if c in tally:
                ax.text(x, 0.02, f"{tally[c][0]}/{tally[c][1]}", ha="center", fontsize=7, rotation=90)
    ax.set_xticks([i + width * (len(surveys) - 1) / 2 for i in range(len(clauses))])
    ax.set_xticklabels([f"({c})" for c in clauses])
    ax.set_ylim(0, 1.3)
    ax.set_ylabel("biconditional holds")
    ax.legend(loc="upper left", ncol=2, fontsize=8)
    return _save(fig, out, "clauses.png")


def base_size_figure(surveys, out: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for s in surveys:
        ax.scatter([b[1] for b in s.bases], [b[2] for b in s.bases], label=f"variant {s.variant}")
    ax.set_xlabel("|subformula set|")
    ax.set_ylabel("rules in natural base")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, out, "base_sizes.png")


def render_all(report, directory) -> list:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    return [monotonicity_figure(report.monotonicity, out),
            clause_figure(report.surveys, out),
            base_size_figure(report.surveys, out)]
