"""Reverse call traces into executable test cases and package suites.

Every mined usage yields a pair: a generic test (target parameters left
open, receiver construction inlined) and a concrete test (every value
bound: constants inline, trace chains inlined, dummies materialized as
seeded initializations, and the target's return value captured by a
trailing return).  Concrete tests are what the version harness executes;
generic tests are emitted for downstream fuzzing and only checked
structurally.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

from .ir import (
    ApiRef,
    AssignConst,
    AssignFieldLoad,
    AssignInvoke,
    AssignNew,
    Const,
    FieldSignature,
    IdentityParam,
    InvokeVoid,
    MethodSignature,
    Operand,
    Return,
    Statement,
    VOID_TYPE,
    is_invoke,
)
from .slicer import (
    BindConst,
    BindTraceVar,
    CallSite,
    CallTrace,
    ConstTerminal,
    DummyValue,
    ObjectDummy,
    ParamBinding,
    PrimDummy,
    _sweep,
)

GENERIC = "generic"
CONCRETE = "concrete"

MANIFEST_VERSION = 1


class TestGenError(Exception):
    pass


class IncompleteBindings(TestGenError):
    pass


class EmptyGroup(TestGenError):
    pass


@dataclass(frozen=True)
class TestCase:
    id: str
    target: ApiRef
    body: tuple[Statement, ...]
    target_index: int
    form: str  # generic | concrete
    capture_return: bool
    provenance: tuple[str, str, int, int]  # source class, source method, trace id, seed

    def invocation_sequence(self) -> tuple[str, ...]:
        """Ordered framework-API invocations in the body; a field-read
        target contributes its own reference so field tests with identical
        call prefixes stay distinct."""
        seq = [str(s.callee) for s in self.body if is_invoke(s)]
        if isinstance(self.target, FieldSignature):
            seq.append(str(self.target))
        return tuple(seq)


@dataclass(frozen=True)
class TestSuite:
    tests: tuple[TestCase, ...]
    api_levels: tuple[int, ...]
    checksum: str


# ============================================================
# Test construction
# ============================================================


def _target_return_type(target: ApiRef) -> str:
    if isinstance(target, FieldSignature):
        return target.type_name
    return target.return_type


def _test_id(site: CallSite, variant: int, seed: int, form: str) -> str:
    material = f"{site.target}|{site.method}|{site.stmt_index}|{variant}|{seed}"
    digest = hashlib.sha256(material.encode()).hexdigest()[:10]
    name = site.target.name.strip("<>")
    suffix = "c" if form == CONCRETE else "g"
    return f"t_{name}_{digest}_{suffix}"


def _materialize_dummy(tv: str, plan: DummyValue, out: list[Statement]) -> None:
    """Seeded initialization statements for a dummy value, defining tv."""
    if isinstance(plan, PrimDummy):
        out.append(AssignConst(tv, plan.as_const()))
        return
    assert isinstance(plan, ObjectDummy)
    out.append(AssignNew(tv, plan.class_name))
    if plan.ctor is not None:
        args: list[Operand] = []
        for k, sub in enumerate(plan.ctor_args):
            if isinstance(sub, PrimDummy):
                args.append(sub.as_const())
            else:
                sub_tv = f"{tv}_c{k}"
                _materialize_dummy(sub_tv, sub, out)
                args.append(sub_tv)
        out.append(InvokeVoid(plan.ctor, tv, tuple(args)))


def _terminal_inits(trace: CallTrace, ordered_uses: list[str]) -> list[Statement]:
    """Materialize constants and dummies in first-use order."""
    out: list[Statement] = []
    done: set[str] = set()
    for tv in ordered_uses:
        if tv in done or tv not in trace.terminals:
            continue
        done.add(tv)
        term = trace.terminals[tv]
        if isinstance(term, ConstTerminal):
            out.append(AssignConst(tv, term.const))
        else:
            _materialize_dummy(tv, term.plan, out)
    return out


def _first_use_order(statements: list[Statement], extra: list[str]) -> list[str]:
    order: list[str] = []
    for stmt in statements:
        for u in stmt.uses:
            if u not in order:
                order.append(u)
    for u in extra:
        if u not in order:
            order.append(u)
    return order


def _rename(body: list[Statement]) -> list[Statement]:
    """Map synthetic trace variables to var1..varN in definition order
    (uses always follow their defs in generated bodies)."""
    from dataclasses import replace

    from .slicer import _substitute_uses  # shared operand rewriting

    mapping: dict[str, str] = {}
    renamed: list[Statement] = []
    for stmt in body:
        stmt = _substitute_uses(stmt, mapping)
        dv = stmt.def_var
        if dv is not None:
            if dv not in mapping:
                mapping[dv] = f"var{len(mapping) + 1}"
            stmt = replace(stmt, var=mapping[dv])
        renamed.append(stmt)
    return renamed


def _target_call(
    target: ApiRef,
    receiver: Optional[str],
    args: tuple[Operand, ...],
    result_var: Optional[str],
) -> Statement:
    if isinstance(target, FieldSignature):
        assert result_var is not None
        return AssignFieldLoad(result_var, target, receiver)
    if result_var is None:
        return InvokeVoid(target, receiver, args)
    return AssignInvoke(result_var, target, receiver, args)


def construct_test_case(
    trace: CallTrace,
    bindings: tuple[ParamBinding, ...],
    site: CallSite,
    variant: int = 0,
    seed: int = 0,
) -> tuple[TestCase, TestCase]:
    """Build the (generic, concrete) pair for one sliced usage.

    The concrete body is fully closed: parameter-preparation chains in
    parameter order, then the receiver chain, then the bound target call,
    then the return capture.  The generic body opens one parameter per
    target parameter and keeps only the receiver context.
    """
    target = site.target
    arity = len(site.args)
    if isinstance(target, MethodSignature) and len(bindings) != arity:
        raise IncompleteBindings(
            f"{target} needs {arity} binding(s), got {len(bindings)}"
        )
    capture = _target_return_type(target) != VOID_TYPE
    provenance = (site.method.declaring_class, str(site.method), variant, seed)

    # ---- concrete form ----
    trace_stmts = [s for _, s in trace.statements]
    dummy_inits: list[Statement] = []
    call_args: list[Operand] = []
    for b in bindings:
        if isinstance(b.source, BindConst):
            call_args.append(b.source.const)
        elif isinstance(b.source, BindTraceVar):
            call_args.append(b.source.var)
        else:
            tv = f"d{b.param_index}"
            _materialize_dummy(tv, b.source.plan, dummy_inits)
            call_args.append(tv)

    result_var = "ret" if capture else None
    call = _target_call(target, trace.receiver_var, tuple(call_args), result_var)
    use_order = _first_use_order(trace_stmts + dummy_inits + [call], [])
    inits = _terminal_inits(trace, use_order)
    body = inits + trace_stmts + dummy_inits + [call]
    target_index = len(body) - 1
    if capture:
        body.append(Return(result_var))
    body = _rename(body)
    concrete = TestCase(
        _test_id(site, variant, seed, CONCRETE),
        target,
        tuple(body),
        target_index,
        CONCRETE,
        capture,
        provenance,
    )

    # ---- generic form ----
    recv_stmts, recv_terms = _sweep(
        list(trace.statements),
        dict(trace.terminals),
        (trace.receiver_var,) if trace.receiver_var else (),
    )
    recv_trace = CallTrace(recv_stmts, recv_terms, trace.receiver_var)
    param_types = (
        target.param_types if isinstance(target, MethodSignature) else ()
    )
    identities: list[Statement] = [
        IdentityParam(f"p{k}", k, pt) for k, pt in enumerate(param_types)
    ]
    open_args: tuple[Operand, ...] = tuple(f"p{k}" for k in range(len(param_types)))
    g_stmts = [s for _, s in recv_stmts]
    g_call = _target_call(target, trace.receiver_var, open_args, result_var)
    g_use_order = _first_use_order(g_stmts + [g_call], [])
    g_inits = _terminal_inits(recv_trace, g_use_order)
    g_body = identities + g_inits + g_stmts + [g_call]
    g_target_index = len(g_body) - 1
    if capture:
        g_body.append(Return(result_var))
    g_body = _rename(g_body)
    generic = TestCase(
        _test_id(site, variant, seed, GENERIC),
        target,
        tuple(g_body),
        g_target_index,
        GENERIC,
        capture,
        provenance,
    )
    return generic, concrete


# ============================================================
# Deduplication and selection
# ============================================================


def eliminate_equivalent(tests: list[TestCase]) -> list[TestCase]:
    """Keep the first test of every equivalence class; two tests are
    equivalent when their framework-API invocation sequences are equal.
    Input order is otherwise preserved, and the pass is idempotent."""
    seen: set[tuple[str, ...]] = set()
    kept: list[TestCase] = []
    for t in tests:
        key = t.invocation_sequence()
        if key in seen:
            continue
        seen.add(key)
        kept.append(t)
    return kept


def select_minimal(tests: list[TestCase]) -> TestCase:
    """Smallest-scale representative of one target's test group: fewest
    framework-API invocations, then fewest body statements, then
    lexicographically smallest id."""
    if not tests:
        raise EmptyGroup("select_minimal on an empty group")
    targets = {str(t.target) for t in tests}
    if len(targets) > 1:
        raise TestGenError(f"select_minimal across targets {sorted(targets)}")
    return min(
        tests,
        key=lambda t: (sum(1 for s in t.body if is_invoke(s)), len(t.body), t.id),
    )


# ============================================================
# Suite manifest
# ============================================================


def _manifest_dict(tests: list[TestCase], versions: list[int]) -> dict:
    entries = []
    for t in sorted(tests, key=lambda t: (str(t.target), t.id)):
        entries.append(
            {
                "id": t.id,
                "target": str(t.target),
                "form": t.form,
                "body": [s.render() for s in t.body],
                "target_index": t.target_index,
                "capture_return": t.capture_return,
            }
        )
    return {
        "version": MANIFEST_VERSION,
        "api_levels": sorted(versions),
        "targets": sorted({str(t.target) for t in tests}),
        "tests": entries,
    }


def manifest_checksum(manifest: dict) -> str:
    canonical = {k: v for k, v in manifest.items() if k != "checksum"}
    payload = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(payload.encode()).hexdigest()


def emit_test_suite(
    tests: list[TestCase], versions: list[int]
) -> tuple[TestSuite, str]:
    """Deterministic manifest (sorted by target signature) embedding test
    bodies in the IR grammar, with a checksum over the canonical bytes.
    Returns the suite and the manifest text."""
    ids = [t.id for t in tests]
    if len(ids) != len(set(ids)):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise TestGenError(f"duplicate test ids: {dupes}")
    manifest = _manifest_dict(tests, versions)
    checksum = manifest_checksum(manifest)
    ordered = {
        "version": manifest["version"],
        "checksum": checksum,
        "api_levels": manifest["api_levels"],
        "targets": manifest["targets"],
        "tests": manifest["tests"],
    }
    text = json.dumps(ordered, indent=2) + "\n"
    suite_tests = tuple(
        sorted(tests, key=lambda t: (str(t.target), t.id))
    )
    return TestSuite(suite_tests, tuple(sorted(versions)), checksum), text


class SuiteLoadError(TestGenError):
    pass


def load_test_suite(text: str) -> TestSuite:
    """Reload a manifest.  Unknown schema versions and checksum mismatches
    are rejected; bodies are reparsed from the embedded IR lines and the
    target identity is reconstructed from the statement at target_index."""
    from .parser import parse_member_ref, parse_statements

    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SuiteLoadError(f"malformed suite JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SuiteLoadError("manifest must be a JSON object")
    if data.get("version") != MANIFEST_VERSION:
        raise SuiteLoadError(f"unknown manifest version {data.get('version')!r}")
    expected = data.get("checksum", "")
    actual = manifest_checksum(
        {k: v for k, v in data.items() if k != "checksum"}
    )
    if expected != actual:
        raise SuiteLoadError("manifest checksum mismatch")
    entries = data.get("tests", [])
    if not isinstance(entries, list) or not all(
        isinstance(e, dict) for e in entries
    ):
        raise SuiteLoadError("manifest 'tests' must be a list of objects")
    tests: list[TestCase] = []
    for entry in entries:
        body_lines = entry.get("body", [])
        if not isinstance(body_lines, list) or not all(
            isinstance(line, str) for line in body_lines
        ):
            raise SuiteLoadError(f"test {entry.get('id')}: body must be IR lines")
        body_text = "\n".join(body_lines)
        stmts, diags = parse_statements(body_text)
        if diags:
            raise SuiteLoadError(
                f"test {entry.get('id')}: malformed body: {diags[0]}"
            )
        idx = entry.get("target_index", -1)
        if not isinstance(idx, int) or not (0 <= idx < len(stmts)):
            raise SuiteLoadError(f"test {entry.get('id')}: bad target_index")
        stmt = stmts[idx]
        if isinstance(stmt, (AssignInvoke, InvokeVoid)):
            target: ApiRef = stmt.callee
        elif isinstance(stmt, AssignFieldLoad):
            target = stmt.fieldsig
        else:
            raise SuiteLoadError(
                f"test {entry.get('id')}: target_index is not an API usage"
            )
        declared = parse_member_ref(
            entry.get("target", ""),
            is_static=isinstance(target, MethodSignature) and target.is_static,
        )
        if declared is not None and str(declared) != str(target):
            raise SuiteLoadError(
                f"test {entry.get('id')}: declared target does not match body"
            )
        tests.append(
            TestCase(
                entry.get("id", ""),
                target,
                tuple(stmts),
                idx,
                entry.get("form", CONCRETE),
                bool(entry.get("capture_return", False)),
                ("", "", 0, 0),
            )
        )
    levels = data.get("api_levels", [])
    if not isinstance(levels, list) or not all(isinstance(v, int) for v in levels):
        raise SuiteLoadError("manifest 'api_levels' must be a list of integers")
    return TestSuite(tuple(tests), tuple(levels), expected)
