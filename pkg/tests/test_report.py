"""Issue classification and report rendering."""

import json

import pytest

from slicegen.harness import (
    ERROR,
    ExecutionOutcome,
    OutcomeMatrix,
    SUCCESS,
)
from slicegen.report import (
    InsufficientVersions,
    SEMANTIC_CLASS,
    SIGNATURE_CLASS,
    TYPE1,
    TYPE2_1,
    TYPE2_2,
    categorize_error,
    classify_api,
    issues_for_matrix,
    render_report,
)


def _success(version, render="ok"):
    return ExecutionOutcome("t", version, SUCCESS, return_render=render)


def _error(version, kind):
    return ExecutionOutcome("t", version, ERROR, error_kind=kind, at_index=0)


def _row(**by_version):
    return {int(k[1:]): v for k, v in by_version.items()}


def _matrix(rows_by_target, versions=(21, 30)):
    rows = {}
    targets = {}
    for i, (target, row) in enumerate(sorted(rows_by_target.items())):
        test_id = f"t{i}"
        rows[test_id] = row
        targets[test_id] = target
    all_versions = tuple(sorted({v for row in rows.values() for v in row}))
    return OutcomeMatrix(all_versions or tuple(versions), rows, targets, [])


# ============================================================
# categorize_error
# ============================================================


def test_signature_kinds():
    assert categorize_error("NoSuchMethodError") == SIGNATURE_CLASS
    assert categorize_error("NoClassDefFoundError") == SIGNATURE_CLASS
    assert categorize_error("NoSuchFieldError") == SIGNATURE_CLASS


def test_semantic_kinds_and_escape():
    assert categorize_error("SecurityException") == SEMANTIC_CLASS
    assert categorize_error("KeyChainException") == SEMANTIC_CLASS  # escape hatch
    assert categorize_error("Resources$NotFoundException") == SEMANTIC_CLASS


def test_partition_is_exact():
    kinds = [
        "NoSuchMethodError", "NoClassDefFoundError", "NoSuchFieldError",
        "SecurityException", "NullPointerException", "RuntimeException",
        "IllegalArgumentException", "IllegalStateException", "ClassCastException",
        "Whatever",
    ]
    classes = {categorize_error(k) for k in kinds}
    assert classes == {SIGNATURE_CLASS, SEMANTIC_CLASS}
    assert [k for k in kinds if categorize_error(k) == SIGNATURE_CLASS] == kinds[:3]


# ============================================================
# classify_api
# ============================================================


def _notification_row():
    row = {}
    for v in (21, 22):
        row[v] = _error(v, "NoSuchMethodError")
    for v in range(23, 28):
        row[v] = _error(v, "SecurityException")
    for v in range(28, 31):
        row[v] = _success(v, "android.app.NotificationManager$Policy@fresh")
    return row


def test_motivating_scenario_emits_type1_and_type21():
    issues = classify_api(_notification_row())
    assert [i.issue_type for i in issues] == [TYPE1, TYPE2_1]


def test_shortcut_row_is_type1_only():
    row = {}
    for v in (21, 22, 23):
        row[v] = _error(v, "NoSuchMethodError")
    for v in range(24, 31):
        row[v] = _success(v, "true")
    issues = classify_api(row)
    assert [i.issue_type for i in issues] == [TYPE1]
    (issue,) = issues
    cells = dict(issue.divergence_versions)
    assert cells["NoSuchMethodError"] == (21, 22, 23)
    assert cells["success:true"] == tuple(range(24, 31))


def test_formatter_row_is_type22_with_three_cells():
    row = {}
    for v in (21, 22):
        row[v] = _success(v, '"1.0B"')
    row[23] = _success(23, '"1.0 B"')
    for v in range(24, 31):
        row[v] = _success(v, '"1 B"')
    issues = classify_api(row)
    assert [i.issue_type for i in issues] == [TYPE2_2]
    assert len(issues[0].divergence_versions) == 3


def test_uniform_success_has_no_issue():
    row = {v: _success(v, "same") for v in range(21, 31)}
    assert classify_api(row) == []


def test_same_error_everywhere_has_no_issue():
    row = {v: _error(v, "SecurityException") for v in range(21, 31)}
    assert classify_api(row) == []
    row = {v: _error(v, "NoSuchMethodError") for v in range(21, 31)}
    assert classify_api(row) == []


def test_two_distinct_semantic_errors_are_type21():
    row = {21: _error(21, "SecurityException"), 22: _error(22, "IllegalStateException")}
    assert [i.issue_type for i in classify_api(row)] == [TYPE2_1]


def test_signature_vs_single_semantic_error_is_type1_only():
    row = {21: _error(21, "NoSuchMethodError"), 22: _error(22, "SecurityException")}
    assert [i.issue_type for i in classify_api(row)] == [TYPE1]


def test_mixed_success_renders_with_semantic_error_is_type21_and_type22():
    row = {
        21: _error(21, "SecurityException"),
        22: _success(22, "a"),
        23: _success(23, "b"),
    }
    assert [i.issue_type for i in classify_api(row)] == [TYPE2_1, TYPE2_2]


def test_insufficient_versions():
    with pytest.raises(InsufficientVersions):
        classify_api({21: _success(21)})


def test_classification_is_permutation_invariant():
    row = _notification_row()
    shuffled = dict(reversed(list(row.items())))
    assert classify_api(row) == classify_api(shuffled)


def test_type1_implies_divergent_signature_error():
    # whenever Type1 is emitted, some version shows a signature error and
    # some version does not show that same error
    rows = [
        _notification_row(),
        {21: _error(21, "NoSuchMethodError"), 22: _success(22)},
        {21: _error(21, "NoSuchMethodError"), 22: _error(22, "NoClassDefFoundError")},
    ]
    for row in rows:
        for issue in classify_api(row):
            if issue.issue_type != TYPE1:
                continue
            labels = {cell: vs for cell, vs in issue.divergence_versions}
            sig_cells = [
                c for c in labels
                if not c.startswith("success")
                and categorize_error(c) == SIGNATURE_CLASS
            ]
            assert sig_cells
            for cell in sig_cells:
                assert len(labels[cell]) < len(row)


# ============================================================
# render_report
# ============================================================


def test_empty_matrix_renders_zero_tallies(tmp_path):
    matrix = _matrix({})
    report = render_report(matrix, tmp_path, figures=False)
    assert report["targets"] == []
    assert report["validity"] == {"valid": 0, "invalid": 0}
    assert report["histogram"] == {}
    text = (tmp_path / "report.txt").read_text()
    assert "Type 1\t0" in text and "Type 2.1\t0" in text and "Type 2.2\t0" in text


def test_seeded_case_studies_tally(tmp_path):
    shortcut_row = {21: _error(21, "NoSuchMethodError"),
                    24: _success(24, "true")}
    formatter_row = {21: _success(21, '"1.0B"'), 24: _success(24, '"1 B"')}
    matrix = _matrix(
        {
            "<nm: P getNotificationPolicy()>": _notification_row(),
            "<la: boolean hasShortcutHostPermission()>": shortcut_row,
            "<fmt: S formatShortFileSize(C, long)>": formatter_row,
        }
    )
    issues = issues_for_matrix(matrix)
    tallies = {t: 0 for t in (TYPE1, TYPE2_1, TYPE2_2)}
    for issue in issues:
        tallies[issue.issue_type] += 1
    assert tallies == {TYPE1: 2, TYPE2_1: 1, TYPE2_2: 1}

    report = render_report(matrix, tmp_path, figures=False)
    assert (tmp_path / "report.json").exists()
    assert (tmp_path / "issues.csv").read_text().count("\n") == 1 + 4  # header + issues


def test_rerender_is_byte_identical(tmp_path):
    matrix = _matrix({"<a.B: int f()>": _notification_row()})
    out1 = tmp_path / "one"
    out2 = tmp_path / "two"
    render_report(matrix, out1, figures=False)
    render_report(matrix, out2, figures=False)
    for name in ("report.json", "report.txt", "issues.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_report_json_schema(tmp_path):
    matrix = _matrix({"<a.B: int f()>": _notification_row()})
    render_report(matrix, tmp_path, figures=False)
    data = json.loads((tmp_path / "report.json").read_text())
    assert set(data) == {"targets", "validity", "histogram"}
    (entry,) = data["targets"]
    assert entry["sig"] == "<a.B: int f()>"
    for issue in entry["issues"]:
        assert set(issue) == {"type", "versions", "evidence"}
        assert sum(len(v) for v in issue["versions"].values()) == 10


def test_figures_are_rendered(tmp_path):
    matrix = _matrix({"<a.B: int f()>": _notification_row()})
    render_report(matrix, tmp_path, figures=True)
    assert (tmp_path / "issues_by_type.png").stat().st_size > 0
    assert (tmp_path / "error_kinds.png").stat().st_size > 0
