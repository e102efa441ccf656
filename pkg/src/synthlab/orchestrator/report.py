"""Report assembly: condition tables, pairwise significance, grouped bars."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from ..errors import ReportError
from ..metrics.bootstrap import bootstrap_ci
from ..metrics.significance import StatResult, wilcoxon_signed_rank
from ..conditions.plans import all_conditions, condition_by_name
from ..seeding import derive_seed
from .runner import RunRecord, RunStore

REAL_COLUMNS = ("minimal", "low", "moderate", "full")

# Significance-table rows: (display name, comparator builder). The comparator
# for a real-data column is (condition, pretrain) compared against that
# column's plain-real baseline; None marks a non-applicable cell.
SIGNIFICANCE_ROWS: list[tuple[str, dict]] = [
    ("+ synthetic gap / full synthetic augmentation",
     {"minimal": ("minimal_real+gap", False), "low": ("low_real+gap", False),
      "moderate": ("moderate_real+gap", False), "full": ("full_real+frac_100", False)}),
    ("+ pretrain",
     {"minimal": ("minimal_real", True), "low": ("low_real", True),
      "moderate": ("moderate_real", True), "full": ("full_real", True)}),
    ("+ synthetic gap / full synthetic + pretrain",
     {"minimal": ("minimal_real+gap", True), "low": ("low_real+gap", True),
      "moderate": ("moderate_real+gap", True), "full": ("full_real+frac_100", True)}),
    ("+ low synthetic augmentation",
     {"full": ("full_real+frac_10", False)}),
    ("+ low synthetic augmentation + pretrain",
     {"full": ("full_real+frac_10", True)}),
    ("+ moderate synthetic augmentation",
     {"full": ("full_real+frac_50", False)}),
    ("+ moderate synthetic augmentation + pretrain",
     {"full": ("full_real+frac_50", True)}),
]

# Figure groups: (group title, augmented condition, its plain-real anchor).
BAR_GROUPS = [
    ("minimal + gap", "minimal_real+gap", "minimal_real"),
    ("low + gap", "low_real+gap", "low_real"),
    ("moderate + gap", "moderate_real+gap", "moderate_real"),
    ("full + 10% synth", "full_real+frac_10", "full_real"),
    ("full + 50% synth", "full_real+frac_50", "full_real"),
    ("full + 100% synth", "full_real+frac_100", "full_real"),
]
BAR_VARIANTS = ("real only", "+ augmentation", "+ pretrain", "+ both")


@dataclass
class RunReport:
    """All persisted records of one experiment, with pooled views."""

    records: list[RunRecord]

    def __post_init__(self):
        if not self.records:
            raise ReportError("report has no run records")

    @staticmethod
    def from_store(path: str | Path) -> "RunReport":
        return RunReport(records=RunStore(path).all_records())

    @property
    def labels(self) -> list[str]:
        seen = []
        for r in self.records:
            if r.task_label not in seen:
                seen.append(r.task_label)
        return seen

    @property
    def dataset(self) -> str:
        return self.records[0].dataset

    def cell(self, label: str, condition: str, pretrain: bool) -> list[RunRecord]:
        return sorted(
            (
                r
                for r in self.records
                if r.task_label == label and r.condition == condition
                and r.pretrain == pretrain and r.status == "ok"
            ),
            key=lambda r: r.fold,
        )

    def pooled_scores(self, label: str, condition: str, pretrain: bool) -> dict[tuple[int, str], float]:
        """(fold, test image id) -> Dice, pooled over folds; the key makes
        pairing across conditions exact."""
        out = {}
        for rec in self.cell(label, condition, pretrain):
            for rid, score in zip(rec.test_ids, rec.per_image_dice):
                out[(rec.fold, rid)] = score
        return out

    def pooled_summary(self, label: str, condition: str, pretrain: bool,
                       resamples: int = 1000, seed: int = 0):
        scores = list(self.pooled_scores(label, condition, pretrain).values())
        if not scores:
            return None
        ci = bootstrap_ci(scores, resamples=resamples,
                          seed=derive_seed(seed, "report-ci", label, condition, pretrain))
        return float(np.mean(scores)), ci


def paired_wilcoxon(report: RunReport, label: str,
                    a: tuple[str, bool], b: tuple[str, bool]) -> StatResult:
    """Wilcoxon on per-image Dice paired by (fold, test image)."""
    sa = report.pooled_scores(label, *a)
    sb = report.pooled_scores(label, *b)
    keys = sorted(set(sa) & set(sb))
    if not keys:
        raise ReportError(f"no paired test images between {a} and {b}")
    return wilcoxon_signed_rank([sa[k] for k in keys], [sb[k] for k in keys])


@dataclass
class SignificanceCell:
    p_value: Optional[float] = None
    method: str = ""
    applicable: bool = True
    missing: bool = False

    def render(self) -> str:
        if not self.applicable:
            return "N/A"
        if self.missing:
            return "missing"
        if self.p_value < 0.001:
            return "<0.001"
        return f"{self.p_value:.5f}".rstrip("0").rstrip(".")


@dataclass
class SignificanceTable:
    label: str
    rows: list[tuple[str, dict[str, SignificanceCell]]]

    def render_text(self) -> str:
        width = max(len(name) for name, _ in self.rows) + 2
        cols = [f"{c.capitalize()} real data" for c in REAL_COLUMNS]
        lines = [" " * width + "\t".join(f"{c:>22}" for c in cols)]
        for name, cells in self.rows:
            row = [f"{cells[c].render():>22}" for c in REAL_COLUMNS]
            lines.append(f"{name:<{width}}" + "\t".join(row))
        return "\n".join(lines) + "\n"


def significance_table(report: RunReport, label: str,
                       baseline: Optional[str] = None) -> SignificanceTable:
    """Pairwise Wilcoxon table mirroring the supplement's row layout.

    Columns are the four real-data levels; each cell compares the row's
    (condition, pretrain) against the column's plain-real baseline. Cells
    that do not apply to a column render as N/A. Passing ``baseline``
    restricts the table to that condition's column.
    """
    base_for_column = {c: (f"{c}_real", False) for c in REAL_COLUMNS}
    restrict_col = None
    if baseline is not None:
        cond = condition_by_name(baseline)
        if cond.synthetic != "none":
            raise ReportError("baseline must be a plain-real condition")
        restrict_col = cond.real_level

    rows = []
    for name, per_column in SIGNIFICANCE_ROWS:
        cells: dict[str, SignificanceCell] = {}
        for col in REAL_COLUMNS:
            if col not in per_column or (restrict_col is not None and col != restrict_col):
                cells[col] = SignificanceCell(applicable=False)
                continue
            comparator = per_column[col]
            base = base_for_column[col]
            if not report.cell(label, *comparator) or not report.cell(label, *base):
                cells[col] = SignificanceCell(missing=True)
                continue
            res = paired_wilcoxon(report, label, comparator, base)
            cells[col] = SignificanceCell(p_value=res.p_value, method=res.method)
        rows.append((name, cells))
    return SignificanceTable(label=label, rows=rows)


def _format_cell(summary) -> str:
    if summary is None:
        return "missing"
    mean, (lo, hi) = summary
    return f"{mean:.3f} ({lo:.3f}, {hi:.3f})"


def condition_table(report: RunReport, label: str,
                    resamples: int = 1000, seed: int = 0) -> list[tuple[str, str, str]]:
    """Ten condition rows x (plain, with-pretrain) columns of mean (CI)."""
    rows = []
    for cond in all_conditions():
        plain = report.pooled_summary(label, cond.name, False, resamples, seed)
        pre = report.pooled_summary(label, cond.name, True, resamples, seed)
        rows.append((cond.display_name, _format_cell(plain), _format_cell(pre)))
    return rows


def _write_table_files(report: RunReport, label: str, out_dir: Path,
                       resamples: int, seed: int) -> list[Path]:
    rows = condition_table(report, label, resamples, seed)
    safe = label.replace(" ", "_")
    tsv = out_dir / f"conditions_{safe}.tsv"
    txt = out_dir / f"conditions_{safe}.txt"
    header = ["condition", label, f"{label} (with pretrain)"]
    tsv.write_text("\n".join("\t".join(r) for r in [tuple(header)] + rows) + "\n")
    width = max(len(r[0]) for r in rows) + 2
    lines = [f"{report.dataset}: average Dice (95% bootstrap CI), {label}", ""]
    lines.append(f"{header[0]:<{width}}{header[1]:>28}{header[2]:>28}")
    for name, plain, pre in rows:
        lines.append(f"{name:<{width}}{plain:>28}{pre:>28}")
    txt.write_text("\n".join(lines) + "\n")
    return [tsv, txt]


def _write_significance_files(report: RunReport, label: str, out_dir: Path) -> list[Path]:
    table = significance_table(report, label)
    safe = label.replace(" ", "_")
    tsv = out_dir / f"significance_{safe}.tsv"
    txt = out_dir / f"significance_{safe}.txt"
    lines = ["\t".join(["effect"] + [f"{c}_real" for c in REAL_COLUMNS])]
    for name, cells in table.rows:
        lines.append("\t".join([name] + [cells[c].render() for c in REAL_COLUMNS]))
    tsv.write_text("\n".join(lines) + "\n")
    txt.write_text(f"{report.dataset}: paired Wilcoxon p-values, {label}\n\n" + table.render_text())
    return [tsv, txt]


def _write_bar_chart(report: RunReport, label: str, out_dir: Path,
                     resamples: int, seed: int) -> Path:
    groups = []
    for title, aug_cond, base_cond in BAR_GROUPS:
        variants = [
            (base_cond, False),
            (aug_cond, False),
            (base_cond, True),
            (aug_cond, True),
        ]
        groups.append((title, [report.pooled_summary(label, c, p, resamples, seed)
                               for c, p in variants]))

    fig, ax = plt.subplots(figsize=(11, 4.5), dpi=120)
    width = 0.2
    xs = np.arange(len(groups))
    colors = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"]
    for vi in range(4):
        heights, errs = [], []
        for _, summaries in groups:
            s = summaries[vi]
            if s is None:
                heights.append(0.0)
                errs.append((0.0, 0.0))
            else:
                mean, (lo, hi) = s
                heights.append(mean)
                errs.append((mean - lo, hi - mean))
        yerr = np.array(errs).T
        ax.bar(xs + (vi - 1.5) * width, heights, width, yerr=yerr, capsize=2,
               color=colors[vi], label=BAR_VARIANTS[vi], error_kw={"linewidth": 0.8})
    ax.set_xticks(xs)
    ax.set_xticklabels([g for g, _ in groups], fontsize=8)
    ax.set_ylabel("mean Dice")
    ax.set_ylim(0, 1.05)
    ax.set_title(f"{report.dataset}: {label}")
    ax.legend(fontsize=8, ncol=4, loc="lower right")
    fig.tight_layout()
    path = out_dir / f"bars_{label.replace(' ', '_')}.png"
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def render(report: RunReport, out_dir: str | Path, formats: tuple[str, ...] = ("table", "bars"),
           resamples: int = 1000, seed: int = 0) -> list[Path]:
    """Emit tables (TSV + aligned text, with significance) and/or bar charts.

    Outputs are deterministic byte-for-byte for a fixed report. Missing grid
    cells are rendered as explicit "missing" entries, never dropped.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    known = {"table", "bars"}
    unknown = set(formats) - known
    if unknown:
        raise ReportError(f"unknown render formats {sorted(unknown)}; valid: {sorted(known)}")
    paths: list[Path] = []
    for label in report.labels:
        if "table" in formats:
            paths += _write_table_files(report, label, out_dir, resamples, seed)
            paths += _write_significance_files(report, label, out_dir)
        if "bars" in formats:
            paths.append(_write_bar_chart(report, label, out_dir, resamples, seed))
    return paths
