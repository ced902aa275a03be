"""Classify per-API outcome rows into compatibility issues and render
machine- and human-readable reports.

Issue taxonomy over one API's per-version outcomes:

* Type1    -- signature divergence: a signature-class error
              (NoSuchMethodError / NoClassDefFoundError / NoSuchFieldError)
              on a nonempty proper subset of versions.
* Type2_1  -- semantic divergence through errors: differing semantic
              error kinds, or a semantic error on some versions versus
              success on others.
* Type2_2  -- semantic divergence through return values: two or more
              successful versions render non-identical values.

Rows whose outcomes are identical everywhere (same success render, or
the same error kind on every version) yield no issue.  One API can carry
several issue types at once, but at most one issue per (API, type).

The report path writes ``report.json`` (full evidence), ``report.txt``
(summary tables), ``issues.csv`` (delimited listing) and, unless
disabled, two PNG charts alongside them.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from .harness import (
    ERROR,
    ExecutionOutcome,
    OutcomeMatrix,
    SIGNATURE_ERROR_KINDS,
    SUCCESS,
)

TYPE1 = "Type1"
TYPE2_1 = "Type2_1"
TYPE2_2 = "Type2_2"
ISSUE_TYPES = (TYPE1, TYPE2_1, TYPE2_2)
DISPLAY_NAMES = {TYPE1: "Type 1", TYPE2_1: "Type 2.1", TYPE2_2: "Type 2.2"}

SIGNATURE_CLASS = "signature"
SEMANTIC_CLASS = "semantic"


class ReportError(Exception):
    pass


class InsufficientVersions(ReportError):
    pass


def categorize_error(kind: str) -> str:
    """Partition error kinds into the signature and semantic classes."""
    return SIGNATURE_CLASS if kind in SIGNATURE_ERROR_KINDS else SEMANTIC_CLASS


@dataclass(frozen=True)
class CompatibilityIssue:
    target: str
    issue_type: str
    # version partition: one cell per distinct outcome, ordered by the
    # smallest version in the cell
    divergence_versions: tuple[tuple[str, tuple[int, ...]], ...]
    evidence: tuple[tuple[int, str], ...]  # (version, outcome label)


def _outcome_label(outcome: ExecutionOutcome) -> str:
    if outcome.status == SUCCESS:
        render = outcome.return_render
        return "success" if render is None else f"success:{render}"
    return outcome.error_kind or "Other"


def _partition(row: dict[int, ExecutionOutcome]) -> list[tuple[str, tuple[int, ...]]]:
    cells: dict[str, list[int]] = {}
    for version in sorted(row):
        cells.setdefault(_outcome_label(row[version]), []).append(version)
    ordered = sorted(cells.items(), key=lambda kv: min(kv[1]))
    return [(label, tuple(vs)) for label, vs in ordered]


def classify_api(row: dict[int, ExecutionOutcome]) -> list[CompatibilityIssue]:
    """Issues for one API's per-version outcomes (from a valid test).
    The result is invariant under version-column permutation and empty
    when all outcomes agree."""
    if len(row) < 2:
        raise InsufficientVersions(f"need >=2 versions, got {len(row)}")
    partition = _partition(row)
    if len(partition) < 2:
        return []

    target = ""  # filled by the caller via issues_for_matrix
    evidence = tuple(
        (version, _outcome_label(row[version])) for version in sorted(row)
    )
    cells = tuple(partition)

    error_kinds = {
        outcome.error_kind
        for outcome in row.values()
        if outcome.status == ERROR and outcome.error_kind
    }
    signature_kinds = {k for k in error_kinds if categorize_error(k) == SIGNATURE_CLASS}
    semantic_kinds = error_kinds - signature_kinds
    success_renders = {
        outcome.return_render for outcome in row.values() if outcome.status == SUCCESS
    }
    any_success = any(outcome.status == SUCCESS for outcome in row.values())

    issues = []
    if signature_kinds:
        issues.append(CompatibilityIssue(target, TYPE1, cells, evidence))
    if len(semantic_kinds) >= 2 or (semantic_kinds and any_success):
        issues.append(CompatibilityIssue(target, TYPE2_1, cells, evidence))
    if len(success_renders) >= 2:
        issues.append(CompatibilityIssue(target, TYPE2_2, cells, evidence))
    return issues


def issues_for_matrix(matrix: OutcomeMatrix) -> list[CompatibilityIssue]:
    """Classify every matrix row, ordered by target signature."""
    from dataclasses import replace

    issues: list[CompatibilityIssue] = []
    by_target = sorted(matrix.rows.items(), key=lambda kv: matrix.targets[kv[0]])
    for test_id, row in by_target:
        target = matrix.targets[test_id]
        for issue in classify_api(row):
            issues.append(replace(issue, target=target))
    return issues


# ============================================================
# Rendering
# ============================================================


def _error_histogram(matrix: OutcomeMatrix, issues: list[CompatibilityIssue]) -> dict:
    """Error kinds associated with issue-bearing targets, counted once per
    (target, kind)."""
    flagged = {issue.target for issue in issues}
    counts: dict[str, int] = {}
    for test_id, row in matrix.rows.items():
        if matrix.targets[test_id] not in flagged:
            continue
        kinds = {
            o.error_kind for o in row.values() if o.status == ERROR and o.error_kind
        }
        for kind in kinds:
            counts[kind] = counts.get(kind, 0) + 1
    return dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))


def _report_dict(matrix: OutcomeMatrix, issues: list[CompatibilityIssue]) -> dict:
    per_target: dict[str, list[CompatibilityIssue]] = {}
    for issue in issues:
        per_target.setdefault(issue.target, []).append(issue)
    targets = []
    for target in sorted(per_target):
        entries = []
        for issue in per_target[target]:
            entries.append(
                {
                    "type": issue.issue_type,
                    "versions": {
                        label: list(vs) for label, vs in issue.divergence_versions
                    },
                    "evidence": [
                        {"version": v, "outcome": label} for v, label in issue.evidence
                    ],
                }
            )
        targets.append({"sig": target, "issues": entries})
    return {
        "targets": targets,
        "validity": {"valid": matrix.valid_count, "invalid": matrix.invalid_count},
        "histogram": _error_histogram(matrix, issues),
    }


def _summary_text(matrix: OutcomeMatrix, issues: list[CompatibilityIssue]) -> str:
    counts = {t: 0 for t in ISSUE_TYPES}
    for issue in issues:
        counts[issue.issue_type] += 1
    histogram = _error_histogram(matrix, issues)
    lines = []
    lines.append("compatibility report")
    lines.append("")
    lines.append("validity")
    lines.append(f"  valid\t{matrix.valid_count}")
    lines.append(f"  invalid\t{matrix.invalid_count}")
    lines.append("")
    lines.append("issues per type")
    for t in ISSUE_TYPES:
        lines.append(f"  {DISPLAY_NAMES[t]}\t{counts[t]}")
    lines.append("")
    lines.append("error kinds on issue-bearing APIs")
    if not histogram:
        lines.append("  (none)")
    for kind, count in histogram.items():
        lines.append(f"  {categorize_error(kind)}\t{kind}\t{count}")
    lines.append("")
    lines.append("issues per target")
    per_target: dict[str, list[str]] = {}
    for issue in issues:
        per_target.setdefault(issue.target, []).append(
            DISPLAY_NAMES[issue.issue_type]
        )
    if not per_target:
        lines.append("  (none)")
    for target in sorted(per_target):
        lines.append(f"  {target}\t{', '.join(per_target[target])}")
    return "\n".join(lines) + "\n"


def _issues_csv(issues: list[CompatibilityIssue]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["target", "type", "partition"])
    for issue in sorted(issues, key=lambda i: (i.target, i.issue_type)):
        partition = "; ".join(
            f"{label}@{'-'.join(str(v) for v in vs)}"
            for label, vs in issue.divergence_versions
        )
        writer.writerow([issue.target, DISPLAY_NAMES[issue.issue_type], partition])
    return buf.getvalue()


def _render_figures(
    out_dir: Path, matrix: OutcomeMatrix, issues: list[CompatibilityIssue]
) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    counts = {t: 0 for t in ISSUE_TYPES}
    for issue in issues:
        counts[issue.issue_type] += 1

    fig, ax = plt.subplots(figsize=(5, 3.2))
    labels = [DISPLAY_NAMES[t] for t in ISSUE_TYPES]
    values = [counts[t] for t in ISSUE_TYPES]
    ax.bar(labels, values, color=["#c44e52", "#dd8452", "#4c72b0"])
    ax.set_ylabel("issues")
    ax.set_title("Compatibility issues per type")
    for i, v in enumerate(values):
        ax.text(i, v, str(v), ha="center", va="bottom")
    fig.tight_layout()
    path = out_dir / "issues_by_type.png"
    fig.savefig(path, metadata={"Software": "slicegen"})
    plt.close(fig)
    written.append(path)

    histogram = _error_histogram(matrix, issues)
    fig, ax = plt.subplots(figsize=(6, max(2.4, 0.5 * len(histogram) + 1.2)))
    if histogram:
        kinds = list(histogram)[::-1]
        values = [histogram[k] for k in kinds]
        colors = [
            "#c44e52" if categorize_error(k) == SIGNATURE_CLASS else "#4c72b0"
            for k in kinds
        ]
        ax.barh(kinds, values, color=colors)
        ax.set_xlabel("issue-bearing APIs")
    else:
        ax.text(0.5, 0.5, "no errors observed", ha="center", va="center")
        ax.set_axis_off()
    ax.set_title("Error kinds (signature=red, semantic=blue)")
    fig.tight_layout()
    path = out_dir / "error_kinds.png"
    fig.savefig(path, metadata={"Software": "slicegen"})
    plt.close(fig)
    written.append(path)
    return written


def render_report(
    matrix: OutcomeMatrix,
    out_dir: str | Path,
    issues: list[CompatibilityIssue] | None = None,
    figures: bool = True,
) -> dict:
    """Write report.json, report.txt and issues.csv (plus charts) into
    ``out_dir``; ordering is deterministic and re-rendering the same
    inputs produces byte-identical text outputs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if issues is None:
        issues = issues_for_matrix(matrix)
    report = _report_dict(matrix, issues)
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    (out / "report.txt").write_text(_summary_text(matrix, issues))
    (out / "issues.csv").write_text(_issues_csv(issues))
    if figures:
        _render_figures(out, matrix, issues)
    return report
