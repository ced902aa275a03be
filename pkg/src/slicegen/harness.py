"""Deterministic interpreter for test bodies against declarative
framework-version profiles.

A profile stands in for one platform version: which classes exist, and
how each framework API behaves (return a constant, return null, echo an
argument, throw, or return a fresh instance).  Executing a concrete test
against a profile yields exactly one outcome; a failure strictly before
the target call marks the run invalid-before-target, which feeds the
validity verdict (the dynamic half of "the test sets up its environment
cleanly on every version").

The interpreter is total: malformed situations map to error outcomes,
never exceptions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .ir import (
    AssignCast,
    AssignConst,
    AssignFieldLoad,
    AssignInvoke,
    AssignNew,
    Const,
    FieldSignature,
    FieldStore,
    Goto,
    IdentityParam,
    IdentityThis,
    If,
    InvokeVoid,
    Label,
    MethodSignature,
    Operand,
    Return,
    ReturnVoid,
    STRING_TYPE,
    VOID_TYPE,
    is_object_type,
    is_primitive,
    is_primitive_array,
)
from .parser import parse_member_ref
from .testgen import CONCRETE, TestCase, TestSuite

# ============================================================
# Error kinds (signature kinds vs semantic kinds)
# ============================================================

NO_SUCH_METHOD = "NoSuchMethodError"
NO_CLASS_DEF_FOUND = "NoClassDefFoundError"
NO_SUCH_FIELD = "NoSuchFieldError"

SIGNATURE_ERROR_KINDS = frozenset(
    {NO_SUCH_METHOD, NO_CLASS_DEF_FOUND, NO_SUCH_FIELD}
)

KNOWN_ERROR_KINDS = SIGNATURE_ERROR_KINDS | {
    "SecurityException",
    "NullPointerException",
    "RuntimeException",
    "IllegalArgumentException",
    "IllegalStateException",
    "ClassCastException",
}
# Any other nonempty name is carried through verbatim (the escape hatch
# for the long tail of platform exceptions).


class HarnessError(Exception):
    pass


class ProfileParseError(HarnessError):
    pass


class DuplicateApi(ProfileParseError):
    def __init__(self, sig: object):
        super().__init__(f"duplicate profile entry for {sig}")
        self.sig = sig


# ============================================================
# Profiles
# ============================================================

EFFECTS = ("return_const", "return_null", "return_arg", "throw", "return_fresh")


@dataclass(frozen=True)
class ApiBehavior:
    effect: str
    value: object = None  # for return_const (python value)
    arg_index: int = 0  # for return_arg
    error_kind: str = ""  # for throw
    message: str = ""  # for throw
    fresh_class: str = ""  # for return_fresh


@dataclass(frozen=True)
class FrameworkVersionProfile:
    version: int
    class_table: frozenset[str]
    api_table: dict[MethodSignature, ApiBehavior]
    field_table: dict[FieldSignature, ApiBehavior]


def _check_const_value(sig_str: str, return_type: str, raw: object) -> object:
    if return_type in ("int", "long"):
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ProfileParseError(f"{sig_str}: {return_type} needs an integer value")
        return raw
    if return_type == "double":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ProfileParseError(f"{sig_str}: double needs a numeric value")
        return float(raw)
    if return_type == "boolean":
        if not isinstance(raw, bool):
            raise ProfileParseError(f"{sig_str}: boolean needs true/false")
        return raw
    if return_type == STRING_TYPE:
        if not isinstance(raw, str):
            raise ProfileParseError(f"{sig_str}: String needs a string value")
        return raw
    if is_primitive_array(return_type):
        if not isinstance(raw, list):
            raise ProfileParseError(f"{sig_str}: array needs a list value")
        elem = return_type[:-2]
        return tuple(_check_const_value(sig_str, elem, v) for v in raw)
    if raw is None:
        return None
    raise ProfileParseError(
        f"{sig_str}: constant return unsupported for type {return_type}"
    )


def _behavior_from_entry(entry: dict, return_type: str, sig_str: str) -> ApiBehavior:
    effect = entry.get("effect")
    if effect not in EFFECTS:
        raise ProfileParseError(f"{sig_str}: unknown effect {effect!r}")
    if effect == "return_const":
        value = _check_const_value(sig_str, return_type, entry.get("value"))
        return ApiBehavior("return_const", value=value)
    if effect == "return_null":
        return ApiBehavior("return_null")
    if effect == "return_arg":
        index = entry.get("index", 0)
        if not isinstance(index, int) or index < 0:
            raise ProfileParseError(f"{sig_str}: return_arg needs an index")
        return ApiBehavior("return_arg", arg_index=index)
    if effect == "throw":
        kind = entry.get("error_kind", "")
        if not kind or not isinstance(kind, str):
            raise ProfileParseError(f"{sig_str}: throw needs an error_kind name")
        return ApiBehavior(
            "throw", error_kind=kind, message=str(entry.get("message", ""))
        )
    fresh = entry.get("class", "")
    if not fresh:
        raise ProfileParseError(f"{sig_str}: return_fresh needs a class")
    if not is_object_type(return_type):
        raise ProfileParseError(f"{sig_str}: return_fresh on non-object return type")
    return ApiBehavior("return_fresh", fresh_class=fresh)


def load_version_profile(source: Union[str, Path, dict]) -> FrameworkVersionProfile:
    """Load and validate one profile.  ``source`` may be a path, raw JSON
    text, or an already-decoded dict."""
    if isinstance(source, dict):
        data = source
    else:
        text = str(source)
        if isinstance(source, Path) or not text.lstrip().startswith("{"):
            try:
                text = Path(source).read_text()
            except OSError as exc:
                raise ProfileParseError(f"cannot read profile {source!r}: {exc}")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProfileParseError(f"malformed profile JSON: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("version"), int):
        raise ProfileParseError("profile needs an integer 'version'")
    version = data["version"]
    classes = data.get("classes", [])
    if not isinstance(classes, list) or not all(isinstance(c, str) for c in classes):
        raise ProfileParseError("profile 'classes' must be a list of names")
    entries = data.get("apis", [])
    if not isinstance(entries, list) or not all(isinstance(e, dict) for e in entries):
        raise ProfileParseError("profile 'apis' must be a list of objects")
    api_table: dict[MethodSignature, ApiBehavior] = {}
    field_table: dict[FieldSignature, ApiBehavior] = {}
    for entry in entries:
        sig_str = entry.get("sig", "")
        if not isinstance(sig_str, str):
            raise ProfileParseError(f"profile entry 'sig' must be a string: {entry}")
        ref = parse_member_ref(sig_str, is_static=bool(entry.get("static", False)))
        if ref is None:
            raise ProfileParseError(f"malformed signature {sig_str!r}")
        if isinstance(ref, MethodSignature):
            behavior = _behavior_from_entry(entry, ref.return_type, sig_str)
            if ref in api_table:
                raise DuplicateApi(ref)
            if ref.return_type == VOID_TYPE and behavior.effect in (
                "return_const",
                "return_arg",
                "return_fresh",
            ):
                raise ProfileParseError(f"{sig_str}: void API cannot return a value")
            api_table[ref] = behavior
        else:
            behavior = _behavior_from_entry(entry, ref.type_name, sig_str)
            if ref in field_table:
                raise DuplicateApi(ref)
            field_table[ref] = behavior
    return FrameworkVersionProfile(version, frozenset(classes), api_table, field_table)


def load_profile_dir(directory: Union[str, Path]) -> list[FrameworkVersionProfile]:
    paths = sorted(Path(directory).glob("profile_v*.json"))
    profiles = [load_version_profile(p) for p in paths]
    return sorted(profiles, key=lambda p: p.version)


# ============================================================
# Runtime values and rendering
# ============================================================


@dataclass
class ObjRef:
    class_name: str
    fields: dict = field(default_factory=dict)


def canonical_render(value: object) -> str:
    """Stable cross-version rendering: integers in decimal, doubles with
    17 significant digits, strings quoted verbatim, fresh objects by class
    with identity elided."""
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, tuple):
        return "[" + ", ".join(canonical_render(v) for v in value) + "]"
    if isinstance(value, ObjRef):
        return f"{value.class_name}@fresh"
    return f"<{type(value).__name__}>"


# ============================================================
# Execution outcomes
# ============================================================

SUCCESS = "success"
ERROR = "error"
INVALID_BEFORE_TARGET = "invalid_before_target"


@dataclass(frozen=True)
class ExecutionOutcome:
    test_id: str
    version: int
    status: str
    return_render: Optional[str] = None
    error_kind: Optional[str] = None
    at_index: Optional[int] = None
    message: str = ""

    def key(self) -> tuple:
        """Comparison key for divergence detection (version-independent)."""
        if self.status == SUCCESS:
            return (SUCCESS, self.return_render)
        return (ERROR, self.error_kind)

    def to_json(self) -> dict:
        out: dict = {"status": self.status}
        if self.status == SUCCESS:
            out["return"] = self.return_render
        else:
            out["error_kind"] = self.error_kind
            out["at_index"] = self.at_index
            if self.message:
                out["message"] = self.message
        return out


class _Raise(Exception):
    """Internal control flow for interpreter faults."""

    def __init__(self, kind: str, message: str = ""):
        self.kind = kind
        self.message = message


DEFAULT_STEP_BUDGET = 10000


class _Interp:
    def __init__(self, profile: FrameworkVersionProfile, step_budget: int):
        self.profile = profile
        self.step_budget = step_budget
        self.steps = 0
        self.env: dict[str, object] = {}
        self.static_fields: dict[FieldSignature, object] = {}

    def value_of(self, op: Operand) -> object:
        if isinstance(op, Const):
            if op.type_name == "double":
                return float(op.value)
            return op.value
        if op not in self.env:
            raise _Raise("Other", f"undefined variable {op}")
        return self.env[op]

    def require_class(self, name: str) -> None:
        if name not in self.profile.class_table:
            raise _Raise(NO_CLASS_DEF_FOUND, name)

    def dispatch(self, behavior: ApiBehavior, args: list[object]) -> object:
        if behavior.effect == "return_const":
            return behavior.value
        if behavior.effect == "return_null":
            return None
        if behavior.effect == "return_arg":
            if behavior.arg_index >= len(args):
                raise _Raise("Other", "return_arg index out of range")
            return args[behavior.arg_index]
        if behavior.effect == "throw":
            raise _Raise(behavior.error_kind, behavior.message)
        return ObjRef(behavior.fresh_class)

    def invoke(self, callee: MethodSignature, receiver: Optional[str], args_ops) -> object:
        behavior = self.profile.api_table.get(callee)
        if behavior is None:
            # linkage failure precedes the null-receiver check
            raise _Raise(NO_SUCH_METHOD, str(callee))
        recv_value: object = None
        if not callee.is_static:
            recv_value = self.value_of(receiver)
            if recv_value is None:
                raise _Raise("NullPointerException", f"null receiver of {callee.name}")
            if not isinstance(recv_value, ObjRef) and not isinstance(recv_value, str):
                raise _Raise("Other", f"receiver of {callee.name} is not an object")
        args = [self.value_of(a) for a in args_ops]
        return self.dispatch(behavior, args)

    def field_load(self, fs: FieldSignature, receiver: Optional[str]) -> object:
        if receiver is not None:
            recv_value = self.value_of(receiver)
            if recv_value is None:
                raise _Raise("NullPointerException", f"null receiver of {fs.name}")
            if isinstance(recv_value, ObjRef) and fs in recv_value.fields:
                return recv_value.fields[fs]
        elif fs in self.static_fields:
            return self.static_fields[fs]
        behavior = self.profile.field_table.get(fs)
        if behavior is None:
            raise _Raise(NO_SUCH_FIELD, str(fs))
        return self.dispatch(behavior, [])

    def cast(self, type_name: str, value: object) -> object:
        if value is None:
            return None  # a null reference casts to anything
        if is_object_type(type_name):
            self.require_class(type_name)
            if isinstance(value, ObjRef):
                return ObjRef(type_name, value.fields)  # retag, share fields
            if isinstance(value, (str, tuple)):
                return value
            raise _Raise("ClassCastException", f"primitive to {type_name}")
        if type_name in ("int", "long"):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise _Raise("ClassCastException", f"to {type_name}")
            return int(value)
        if type_name == "double":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise _Raise("ClassCastException", "to double")
            return float(value)
        if type_name == "boolean":
            if not isinstance(value, bool):
                raise _Raise("ClassCastException", "to boolean")
            return value
        if type_name == STRING_TYPE:
            if not isinstance(value, str):
                raise _Raise("ClassCastException", "to String")
            return value
        if is_primitive_array(type_name):
            if not isinstance(value, tuple):
                raise _Raise("ClassCastException", f"to {type_name}")
            return value
        raise _Raise("ClassCastException", f"to {type_name}")

    def step(self, stmt) -> Optional[tuple[str, object]]:
        """Execute one statement; returns ("return", value) on completion,
        ("goto", label) on jumps, None to fall through."""
        if isinstance(stmt, (IdentityParam, IdentityThis)):
            raise _Raise("Other", "open parameter in a concrete test body")
        if isinstance(stmt, AssignConst):
            self.env[stmt.var] = self.value_of(stmt.const)
            return None
        if isinstance(stmt, AssignCast):
            self.env[stmt.var] = self.cast(stmt.type_name, self.value_of(stmt.src))
            return None
        if isinstance(stmt, AssignNew):
            self.require_class(stmt.type_name)
            self.env[stmt.var] = ObjRef(stmt.type_name)
            return None
        if isinstance(stmt, AssignInvoke):
            self.env[stmt.var] = self.invoke(stmt.callee, stmt.receiver, stmt.args)
            return None
        if isinstance(stmt, InvokeVoid):
            self.invoke(stmt.callee, stmt.receiver, stmt.args)
            return None
        if isinstance(stmt, AssignFieldLoad):
            self.env[stmt.var] = self.field_load(stmt.fieldsig, stmt.receiver)
            return None
        if isinstance(stmt, FieldStore):
            value = self.value_of(stmt.src)
            if stmt.receiver is None:
                self.static_fields[stmt.fieldsig] = value
                return None
            recv_value = self.value_of(stmt.receiver)
            if recv_value is None:
                raise _Raise("NullPointerException", f"null receiver store")
            if isinstance(recv_value, ObjRef):
                recv_value.fields[stmt.fieldsig] = value
            return None
        if isinstance(stmt, Return):
            return ("return", self.value_of(stmt.var))
        if isinstance(stmt, ReturnVoid):
            return ("return", None)
        if isinstance(stmt, If):
            cond = self.value_of(stmt.cond)
            if not isinstance(cond, bool):
                raise _Raise("Other", "non-boolean branch condition")
            return ("goto", stmt.target) if cond else None
        if isinstance(stmt, Goto):
            return ("goto", stmt.target)
        if isinstance(stmt, Label):
            return None
        raise _Raise("Other", f"unknown statement {type(stmt).__name__}")


def execute_test(
    test: TestCase,
    profile: FrameworkVersionProfile,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> ExecutionOutcome:
    """Interpret one concrete test body against one version profile."""
    interp = _Interp(profile, step_budget)
    body = test.body
    labels = {s.name: i for i, s in enumerate(body) if isinstance(s, Label)}
    pc = 0
    returned: object = None
    try:
        while pc < len(body):
            interp.steps += 1
            if interp.steps > step_budget:
                raise _Raise("Other", "step budget exceeded")
            try:
                action = interp.step(body[pc])
            except _Raise as fault:
                status = (
                    INVALID_BEFORE_TARGET if pc < test.target_index else ERROR
                )
                return ExecutionOutcome(
                    test.id,
                    profile.version,
                    status,
                    error_kind=fault.kind,
                    at_index=pc,
                    message=fault.message,
                )
            if action is None:
                pc += 1
            elif action[0] == "return":
                returned = action[1]
                break
            else:
                label = action[1]
                if label not in labels:
                    return ExecutionOutcome(
                        test.id,
                        profile.version,
                        INVALID_BEFORE_TARGET if pc < test.target_index else ERROR,
                        error_kind="Other",
                        at_index=pc,
                        message=f"jump to unknown label {label}",
                    )
                pc = labels[label] + 1
    except _Raise as fault:  # step budget
        at = min(pc, len(body) - 1)
        return ExecutionOutcome(
            test.id,
            profile.version,
            INVALID_BEFORE_TARGET if at < test.target_index else ERROR,
            error_kind=fault.kind,
            at_index=at,
            message=fault.message,
        )
    render = canonical_render(returned) if test.capture_return else None
    return ExecutionOutcome(test.id, profile.version, SUCCESS, return_render=render)


# ============================================================
# Validity
# ============================================================


@dataclass(frozen=True)
class ValidityVerdict:
    valid: bool
    reason: str = ""
    versions: tuple[int, ...] = ()


def _static_violations(test: TestCase) -> list[str]:
    """The compile-analog checks: closed, well-formed, target in place."""
    from .ir import IRMethod
    from .parser import _check_definite_assignment

    problems: list[str] = []
    body = test.body
    if not body:
        return ["empty body"]
    if not (0 <= test.target_index < len(body)):
        return ["target index out of range"]
    stmt = body[test.target_index]
    if isinstance(test.target, MethodSignature):
        if not isinstance(stmt, (AssignInvoke, InvokeVoid)) or stmt.callee != test.target:
            problems.append("statement at target index does not invoke the target")
    else:
        if not isinstance(stmt, AssignFieldLoad) or stmt.fieldsig != test.target:
            problems.append("statement at target index does not read the target field")
    if test.form == CONCRETE:
        for s in body:
            if isinstance(s, (IdentityParam, IdentityThis)):
                problems.append("concrete test has open parameters")
                break
    labels = {s.name for s in body if isinstance(s, Label)}
    for s in body:
        target_label = getattr(s, "target", None)
        if target_label is not None and target_label not in labels:
            problems.append(f"jump to undefined label {target_label}")
    carrier = IRMethod(
        MethodSignature("suite", test.id.replace("-", "_"), (), VOID_TYPE, True),
        body,
    )
    for diag in _check_definite_assignment(carrier):
        problems.append(diag.message)
    return problems


def check_validity(
    test: TestCase,
    profiles: list[FrameworkVersionProfile],
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> ValidityVerdict:
    """Valid iff the body passes the static checks and no profile run
    fails strictly before the target call."""
    problems = _static_violations(test)
    if problems:
        return ValidityVerdict(False, "static: " + "; ".join(problems))
    bad_versions = []
    reasons = []
    for profile in profiles:
        outcome = execute_test(test, profile, step_budget)
        if outcome.status == INVALID_BEFORE_TARGET:
            bad_versions.append(profile.version)
            reasons.append(
                f"v{profile.version}: {outcome.error_kind} at {outcome.at_index}"
            )
    if bad_versions:
        return ValidityVerdict(
            False, "fails before target: " + "; ".join(reasons), tuple(bad_versions)
        )
    return ValidityVerdict(True)


# ============================================================
# Outcome matrix
# ============================================================


@dataclass
class OutcomeMatrix:
    versions: tuple[int, ...]
    rows: dict[str, dict[int, ExecutionOutcome]]  # test id -> version -> outcome
    targets: dict[str, str]  # test id -> target signature
    invalid: list[tuple[str, str, ValidityVerdict]]

    @property
    def valid_count(self) -> int:
        return len(self.rows)

    @property
    def invalid_count(self) -> int:
        return len(self.invalid)

    def to_json(self) -> dict:
        tests = []
        for test_id in sorted(self.rows):
            outcomes = self.rows[test_id]
            tests.append(
                {
                    "id": test_id,
                    "target": self.targets[test_id],
                    "outcomes": {
                        str(v): outcomes[v].to_json() for v in self.versions
                    },
                }
            )
        invalid = [
            {
                "id": test_id,
                "target": target,
                "reason": verdict.reason,
                "versions": list(verdict.versions),
            }
            for test_id, target, verdict in self.invalid
        ]
        return {
            "versions": list(self.versions),
            "tests": tests,
            "invalid": invalid,
        }

    @classmethod
    def from_json(cls, data: dict) -> "OutcomeMatrix":
        versions = tuple(int(v) for v in data.get("versions", []))
        rows: dict[str, dict[int, ExecutionOutcome]] = {}
        targets: dict[str, str] = {}
        for entry in data.get("tests", []):
            test_id = entry["id"]
            targets[test_id] = entry["target"]
            row: dict[int, ExecutionOutcome] = {}
            for v_str, o in entry.get("outcomes", {}).items():
                version = int(v_str)
                if o.get("status") == SUCCESS:
                    row[version] = ExecutionOutcome(
                        test_id, version, SUCCESS, return_render=o.get("return")
                    )
                else:
                    row[version] = ExecutionOutcome(
                        test_id,
                        version,
                        o.get("status", ERROR),
                        error_kind=o.get("error_kind"),
                        at_index=o.get("at_index"),
                        message=o.get("message", ""),
                    )
            rows[test_id] = row
        invalid = [
            (
                e["id"],
                e.get("target", ""),
                ValidityVerdict(
                    False, e.get("reason", ""), tuple(e.get("versions", []))
                ),
            )
            for e in data.get("invalid", [])
        ]
        return cls(versions, rows, targets, invalid)


def run_matrix(
    suite: TestSuite,
    profiles: list[FrameworkVersionProfile],
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> OutcomeMatrix:
    """Execute every valid concrete test on every profile.  Invalid tests
    are excluded from the matrix and listed separately."""
    if len(profiles) < 2:
        raise HarnessError("need at least two version profiles to compare")
    versions = tuple(p.version for p in sorted(profiles, key=lambda p: p.version))
    if len(set(versions)) != len(versions):
        raise HarnessError("duplicate profile versions")
    rows: dict[str, dict[int, ExecutionOutcome]] = {}
    targets: dict[str, str] = {}
    invalid: list[tuple[str, str, ValidityVerdict]] = []
    for test in suite.tests:
        if test.form != CONCRETE:
            continue
        verdict = check_validity(test, list(profiles), step_budget)
        if not verdict.valid:
            invalid.append((test.id, str(test.target), verdict))
            continue
        row = {p.version: execute_test(test, p, step_budget) for p in profiles}
        rows[test.id] = row
        targets[test.id] = str(test.target)
    return OutcomeMatrix(versions, rows, targets, invalid)
