"""Evaluation reports: delimited table, audit JSON, and figures.

The evaluate path writes a tab-separated model-performance table (the
published comparison format), a JSON document with the pooled
out-of-fold scores for audit, and matplotlib renderings of the pooled
ROC curves and the AUC/H agreement.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluation import ComparisonTable, CvResult
from .metrics import roc
from .service import round10


def write_report(
    table: ComparisonTable,
    results: Sequence[CvResult],
    outdir: str | Path,
    seed: int,
    folds: int,
) -> list[Path]:
    """Write report.tsv, report.json and figures/ under ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    tsv = outdir / "report.tsv"
    lines = ["model\tbinning\tselector\taccuracy\tauc\ttp_rate\tfp_rate\th\tseed\tfolds\tpartial"]
    for row in table.rows:
        lines.append(
            f"{row.method}\t{row.binning}\t{row.selector or '-'}\t"
            f"{row.accuracy:.4f}\t{row.auc:.4f}\t{row.tp_rate:.4f}\t"
            f"{row.fp_rate:.4f}\t{row.h_measure:.4f}\t{row.seed}\t{row.folds}\t"
            f"{'yes' if row.partial else 'no'}"
        )
    if table.spearman_auc_vs_h is not None:
        lines.append(f"# spearman(auc, h) = {table.spearman_auc_vs_h:.4f}")
    tsv.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(tsv)

    audit = {
        "seed": seed,
        "folds": folds,
        "spearman_auc_vs_h": table.spearman_auc_vs_h,
        "failures": [list(f) for f in table.failures],
        "rows": [
            {
                "method": res.row.method,
                "binning": res.row.binning,
                "selector": res.row.selector,
                "accuracy": round10(res.row.accuracy),
                "auc": round10(res.row.auc),
                "tp_rate": round10(res.row.tp_rate),
                "fp_rate": round10(res.row.fp_rate),
                "h": round10(res.row.h_measure),
                "partial": res.row.partial,
                "pooled_scores": [round10(s) for s in res.scores.tolist()],
                "pooled_labels": [int(v) for v in res.labels.tolist()],
                "fold_details": res.fold_details,
            }
            for res in results
        ],
    }
    json_path = outdir / "report.json"
    json_path.write_text(json.dumps(audit, indent=2), encoding="utf-8")
    written.append(json_path)

    figdir = outdir / "figures"
    figdir.mkdir(exist_ok=True)
    written.append(_roc_figure(results, figdir / "roc_curves.png"))
    if len(table.rows) >= 2:
        written.append(_auc_h_figure(table, figdir / "auc_vs_h.png"))
    return written


def _roc_figure(results: Sequence[CvResult], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    for res in results:
        curve = roc(res.scores, res.labels)
        label = f"{res.row.method}/{res.row.binning} (AUC {res.row.auc:.3f})"
        ax.plot(curve.fpr, curve.tpr, lw=1.2, label=label)
    ax.plot([0, 1], [0, 1], ls="--", c="gray", lw=0.8)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_title("Pooled out-of-fold ROC")
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _auc_h_figure(table: ComparisonTable, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    aucs = [r.auc for r in table.rows]
    hs = [r.h_measure for r in table.rows]
    ax.scatter(aucs, hs, s=24)
    for r in table.rows:
        ax.annotate(
            f"{r.method}/{r.binning}",
            (r.auc, r.h_measure),
            fontsize=6,
            xytext=(3, 3),
            textcoords="offset points",
        )
    title = "AUC vs H-measure"
    if table.spearman_auc_vs_h is not None:
        title += f" (Spearman {table.spearman_auc_vs_h:.3f})"
    ax.set_xlabel("AUC")
    ax.set_ylabel("H-measure")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
