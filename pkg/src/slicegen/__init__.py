"""slicegen: mine framework-API usages from a 3-address mini-IR, slice them
into minimal executable unit tests, and diff behavior across framework
version profiles."""

from .graphs import build_call_graph, build_cfg, build_icfg
from .harness import (
    canonical_render,
    check_validity,
    execute_test,
    load_profile_dir,
    load_version_profile,
    run_matrix,
)
from .ir import FieldSignature, IRProgram, MethodSignature, pretty_print
from .parser import parse_member_ref, parse_program, validate_program
from .report import categorize_error, classify_api, issues_for_matrix, render_report
from .slicer import (
    SliceConfig,
    construct_call_trace,
    enumerate_slices,
    get_definition_stmt,
    infer_caller_context,
    infer_parameter_values,
    locate_api_call_sites,
    lower_field_access,
    split_branches,
    synthesize_dummy_value,
)
from .testgen import (
    construct_test_case,
    eliminate_equivalent,
    emit_test_suite,
    load_test_suite,
    select_minimal,
)

__version__ = "0.1.0"

__all__ = [
    "FieldSignature",
    "IRProgram",
    "MethodSignature",
    "SliceConfig",
    "build_call_graph",
    "build_cfg",
    "build_icfg",
    "canonical_render",
    "categorize_error",
    "check_validity",
    "classify_api",
    "construct_call_trace",
    "construct_test_case",
    "eliminate_equivalent",
    "emit_test_suite",
    "enumerate_slices",
    "execute_test",
    "get_definition_stmt",
    "infer_caller_context",
    "infer_parameter_values",
    "issues_for_matrix",
    "load_profile_dir",
    "load_test_suite",
    "load_version_profile",
    "locate_api_call_sites",
    "lower_field_access",
    "parse_member_ref",
    "parse_program",
    "pretty_print",
    "render_report",
    "run_matrix",
    "select_minimal",
    "split_branches",
    "synthesize_dummy_value",
    "validate_program",
]
