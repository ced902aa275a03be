"""Command-line driver.

    slicegen parse <files...>
    slicegen gen --ir <files...> [--targets FILE] [--seed N] -o DIR
    slicegen run --suite FILE --profiles DIR -o DIR
    slicegen report -o DIR

Exit codes: 0 success, 1 input error (malformed IR, bad suite, unknown
target), 2 environment error (missing files, unreadable directories).
Identical inputs and seed produce byte-identical suite.json, matrix.json
and report files regardless of host.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .graphs import (
    build_call_graph,
    build_icfg,
    call_graph_to_dot,
    cfg_to_dot,
    icfg_to_dot,
)
from .harness import (
    HarnessError,
    OutcomeMatrix,
    ProfileParseError,
    load_profile_dir,
    run_matrix,
)
from .ir import ApiRef, IRProgram
from .parser import merge_programs, parse_member_ref, parse_program, validate_program
from .report import issues_for_matrix, render_report
from .slicer import (
    SliceConfig,
    SliceError,
    enumerate_slices,
    locate_api_call_sites,
    lower_field_access,
    UnknownTarget,
)
from .testgen import (
    SuiteLoadError,
    TestCase,
    construct_test_case,
    eliminate_equivalent,
    emit_test_suite,
    load_test_suite,
    select_minimal,
)

OK = 0
INPUT_ERROR = 1
ENV_ERROR = 2

DEFAULT_VERSIONS = list(range(21, 31))
DEFAULT_TIME_BUDGET = 1200.0  # seconds per generation run


@dataclass
class RunConfig:
    ir_paths: list[Path]
    output_dir: Path
    targets: Optional[set[ApiRef]] = None
    seed: int = 0
    depth_cap: int = 64
    branch_cap: int = 16
    step_budget: int = 10000
    versions: list[int] = field(default_factory=lambda: list(DEFAULT_VERSIONS))
    time_budget: float = DEFAULT_TIME_BUDGET
    dot: bool = False

    def slice_config(self) -> SliceConfig:
        return SliceConfig(self.depth_cap, self.branch_cap, self.seed)


@dataclass
class GenCounts:
    sites: int = 0
    raw_tests: int = 0
    distinct_tests: int = 0
    selected: int = 0
    skipped_sites: int = 0


@dataclass
class GenResult:
    tests: list[TestCase]  # selected concrete tests plus their generic siblings
    counts: GenCounts


def _load_programs(paths: list[Path]) -> tuple[Optional[IRProgram], int]:
    """Parse, merge and validate; prints diagnostics to stderr.  Callee
    references may cross files, so resolution runs after the merge."""
    programs = []
    failed = False
    for path in paths:
        if not path.exists():
            print(f"slicegen: no such file: {path}", file=sys.stderr)
            return None, ENV_ERROR
        result = parse_program(path.read_text(), resolve=False)
        for d in result.diagnostics:
            print(f"{path}:{d}", file=sys.stderr)
        if result.diagnostics or result.program is None:
            failed = True
            continue
        programs.append(result.program)
    if failed:
        return None, INPUT_ERROR
    program, diags = merge_programs(programs)
    diags += validate_program(program)
    for d in diags:
        print(f"slicegen: {d}", file=sys.stderr)
    if diags:
        return None, INPUT_ERROR
    return program, OK


def _parse_targets_file(path: Path) -> Optional[set[ApiRef]]:
    refs: set[ApiRef] = set()
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        is_static = line.startswith("static ")
        if is_static:
            line = line[len("static ") :].strip()
        ref = parse_member_ref(line, is_static=is_static)
        if ref is None:
            print(f"slicegen: malformed target signature: {line}", file=sys.stderr)
            return None
        refs.add(ref)
    return refs


def run_generation(program: IRProgram, config: RunConfig) -> GenResult:
    """locate -> slice -> bind -> construct -> dedupe -> select."""
    cg = build_call_graph(program)
    icfg = build_icfg(program, cg)
    sites = locate_api_call_sites(program, config.targets)
    sconfig = config.slice_config()
    counts = GenCounts(sites=len(sites))

    pairs: dict[str, TestCase] = {}  # concrete id -> generic sibling
    by_target: dict[str, list[TestCase]] = {}
    deadline = time.monotonic() + config.time_budget
    for site in sites:
        if time.monotonic() > deadline:
            print("slicegen: generation time budget exhausted", file=sys.stderr)
            break
        try:
            variants = enumerate_slices(program, cg, icfg, site, sconfig)
        except SliceError as exc:
            print(f"slicegen: skipping {site.target}: {exc}", file=sys.stderr)
            counts.skipped_sites += 1
            continue
        if not variants:
            counts.skipped_sites += 1
            continue
        for variant in variants:
            trace = lower_field_access(
                variant.trace, program, cg, icfg, sconfig, keep_vars=variant.roots()
            )
            generic, concrete = construct_test_case(
                trace, variant.bindings, site, variant.variant_index, config.seed
            )
            counts.raw_tests += 1
            pairs[concrete.id] = generic
            by_target.setdefault(str(site.target), []).append(concrete)

    selected: list[TestCase] = []
    for target in sorted(by_target):
        distinct = eliminate_equivalent(by_target[target])
        counts.distinct_tests += len(distinct)
        winner = select_minimal(distinct)
        selected.append(winner)
        selected.append(pairs[winner.id])
    counts.selected = len(selected) // 2
    return GenResult(selected, counts)


# ============================================================
# Subcommands
# ============================================================


def cmd_parse(args: argparse.Namespace) -> int:
    paths = [Path(p) for p in args.files]
    failed = False
    for path in paths:
        if not path.exists():
            print(f"slicegen: no such file: {path}", file=sys.stderr)
            return ENV_ERROR
        result = parse_program(path.read_text())
        diags = list(result.diagnostics)
        if result.program is not None and not diags:
            diags = validate_program(result.program)
        for d in diags:
            print(f"{path}:{d}", file=sys.stderr)
        if diags:
            failed = True
            print(f"{path}: {len(diags)} problem(s)")
        else:
            print(f"{path}: ok")
    return INPUT_ERROR if failed else OK


def cmd_gen(args: argparse.Namespace) -> int:
    config = RunConfig(
        ir_paths=[Path(p) for p in args.ir],
        output_dir=Path(args.output),
        seed=args.seed,
        depth_cap=args.depth_cap,
        branch_cap=args.branch_cap,
        versions=args.versions,
        time_budget=args.timeout,
        dot=args.dot,
    )
    if not config.ir_paths:
        print("slicegen: gen needs at least one --ir file", file=sys.stderr)
        return INPUT_ERROR
    if config.depth_cap < 1 or config.branch_cap < 1:
        print("slicegen: caps must be positive", file=sys.stderr)
        return INPUT_ERROR
    program, status = _load_programs(config.ir_paths)
    if program is None:
        return status
    if args.targets:
        targets_path = Path(args.targets)
        if not targets_path.exists():
            print(f"slicegen: no such file: {targets_path}", file=sys.stderr)
            return ENV_ERROR
        targets = _parse_targets_file(targets_path)
        if targets is None:
            return INPUT_ERROR
        config.targets = targets
    try:
        result = run_generation(program, config)
    except UnknownTarget as exc:
        print(f"slicegen: {exc}", file=sys.stderr)
        return INPUT_ERROR

    config.output_dir.mkdir(parents=True, exist_ok=True)
    _, manifest_text = emit_test_suite(result.tests, config.versions)
    suite_path = config.output_dir / "suite.json"
    suite_path.write_text(manifest_text)
    if config.dot:
        cg = build_call_graph(program)
        icfg = build_icfg(program, cg)
        (config.output_dir / "cg.dot").write_text(call_graph_to_dot(cg))
        (config.output_dir / "icfg.dot").write_text(icfg_to_dot(icfg))
        cfg_dir = config.output_dir / "cfg"
        cfg_dir.mkdir(exist_ok=True)
        for sig in sorted(icfg.cfgs, key=str):
            slug = f"{sig.declaring_class}.{sig.name}".replace("$", "_")
            (cfg_dir / f"{slug}.dot").write_text(cfg_to_dot(icfg.cfgs[sig]))
    c = result.counts
    print(f"sites located: {c.sites}")
    print(f"raw tests: {c.raw_tests}")
    print(f"distinct tests: {c.distinct_tests}")
    print(f"selected tests: {c.selected}")
    if c.skipped_sites:
        print(f"skipped sites: {c.skipped_sites}")
    print(f"suite: {suite_path}")
    return OK


def cmd_run(args: argparse.Namespace) -> int:
    suite_path = Path(args.suite)
    profiles_dir = Path(args.profiles)
    out_dir = Path(args.output)
    if not suite_path.exists():
        print(f"slicegen: no such file: {suite_path}", file=sys.stderr)
        return ENV_ERROR
    if not profiles_dir.is_dir():
        print(f"slicegen: no such directory: {profiles_dir}", file=sys.stderr)
        return ENV_ERROR
    try:
        suite = load_test_suite(suite_path.read_text())
    except SuiteLoadError as exc:
        print(f"slicegen: {exc}", file=sys.stderr)
        return INPUT_ERROR
    try:
        profiles = load_profile_dir(profiles_dir)
    except ProfileParseError as exc:
        print(f"slicegen: {exc}", file=sys.stderr)
        return INPUT_ERROR
    if len(profiles) < 2:
        print("slicegen: need at least two profile_v<N>.json files", file=sys.stderr)
        return INPUT_ERROR
    if args.step_budget < 1:
        print("slicegen: step budget must be positive", file=sys.stderr)
        return INPUT_ERROR
    try:
        matrix = run_matrix(suite, profiles, args.step_budget)
    except HarnessError as exc:
        print(f"slicegen: {exc}", file=sys.stderr)
        return INPUT_ERROR
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "matrix.json").write_text(
        json.dumps(matrix.to_json(), indent=2) + "\n"
    )
    issues = issues_for_matrix(matrix)
    render_report(matrix, out_dir, issues, figures=not args.no_figures)
    _print_run_summary(matrix, issues)
    print(f"report: {out_dir / 'report.txt'}")
    return OK


def cmd_report(args: argparse.Namespace) -> int:
    out_dir = Path(args.output)
    matrix_path = out_dir / "matrix.json"
    if not matrix_path.exists():
        print(f"slicegen: no such file: {matrix_path}", file=sys.stderr)
        return ENV_ERROR
    try:
        matrix = OutcomeMatrix.from_json(json.loads(matrix_path.read_text()))
    except (json.JSONDecodeError, KeyError, TypeError, AttributeError, ValueError) as exc:
        print(f"slicegen: malformed matrix.json: {exc}", file=sys.stderr)
        return INPUT_ERROR
    issues = issues_for_matrix(matrix)
    render_report(matrix, out_dir, issues, figures=not args.no_figures)
    _print_run_summary(matrix, issues)
    return OK


def _print_run_summary(matrix: OutcomeMatrix, issues) -> None:
    from .report import DISPLAY_NAMES, ISSUE_TYPES

    counts = {t: 0 for t in ISSUE_TYPES}
    for issue in issues:
        counts[issue.issue_type] += 1
    print(f"valid tests: {matrix.valid_count}")
    print(f"invalid tests: {matrix.invalid_count}")
    summary = "  ".join(f"{DISPLAY_NAMES[t]}={counts[t]}" for t in ISSUE_TYPES)
    print(f"issues: {summary}")


# ============================================================
# Argument parsing
# ============================================================


def _version_range(text: str) -> list[int]:
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return sorted({int(v) for v in text.split(",") if v.strip()})


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicegen",
        description="Mine framework-API usages, generate unit-test slices, "
        "and diff their behavior across framework version profiles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_parse = sub.add_parser("parse", help="parse and validate IR files")
    p_parse.add_argument("files", nargs="+")
    p_parse.set_defaults(func=cmd_parse)

    try:
        default_seed = int(os.environ.get("SLICEGEN_SEED", "0"))
    except ValueError:
        default_seed = 0

    p_gen = sub.add_parser("gen", help="generate a test suite from IR files")
    p_gen.add_argument("--ir", nargs="+", required=True, metavar="FILE")
    p_gen.add_argument("--targets", metavar="FILE", help="signature list, one per line")
    p_gen.add_argument("--seed", type=int, default=default_seed)
    p_gen.add_argument("--depth-cap", type=int, default=64)
    p_gen.add_argument("--branch-cap", type=int, default=16)
    p_gen.add_argument(
        "--versions", type=_version_range, default=list(DEFAULT_VERSIONS),
        metavar="LO:HI", help="declared version range (default 21:30)",
    )
    p_gen.add_argument(
        "--timeout", type=float, default=DEFAULT_TIME_BUDGET,
        help="generation wall-clock budget in seconds (default 1200)",
    )
    p_gen.add_argument("--dot", action="store_true", help="export cg.dot, icfg.dot")
    p_gen.add_argument("-o", "--output", required=True, metavar="DIR")
    p_gen.set_defaults(func=cmd_gen)

    p_run = sub.add_parser("run", help="execute a suite against version profiles")
    p_run.add_argument("--suite", required=True, metavar="FILE")
    p_run.add_argument("--profiles", required=True, metavar="DIR")
    p_run.add_argument("--step-budget", type=int, default=10000,
                       help="interpreter steps per (test, version) pair")
    p_run.add_argument("--no-figures", action="store_true")
    p_run.add_argument("-o", "--output", required=True, metavar="DIR")
    p_run.set_defaults(func=cmd_run)

    p_report = sub.add_parser("report", help="re-render reports from matrix.json")
    p_report.add_argument("--no-figures", action="store_true")
    p_report.add_argument("-o", "--output", required=True, metavar="DIR")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"slicegen: {exc}", file=sys.stderr)
        return ENV_ERROR


if __name__ == "__main__":
    sys.exit(main())
