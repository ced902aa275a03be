"""Inter-procedural, field-aware backward slicing of framework-API usages.

From a located call site the engine reconstructs the minimal executable
context: the receiver's construction chain and a value source for every
argument.  Resolution walks definitions backward, stepping across method
boundaries in two ways: a parameter resolves through the call sites of
its host method, and a value returned by an app-defined callee resolves
through that callee's return statements (the callee body is lifted into
the trace; app methods are never called from generated tests).

Resolution of one variable bottoms out at three terminals: a constant, a
framework-API result (the API call joins the trace and the walk stops at
the framework boundary), or a seeded dummy value when nothing better is
reachable.  Already-visited definition statements are shared, which both
terminates recursion and keeps the trace acyclic.

Choice points (a definition per branch arm, several call sites for a
parameter, several returns in a callee) fork the analysis; each complete
assignment of choices is one trace variant, capped by ``branch_cap``.
"""

from __future__ import annotations

import hashlib
import random
import string
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .graphs import CallGraph, ICFG
from .ir import (
    ApiRef,
    AssignCast,
    AssignConst,
    AssignFieldLoad,
    AssignInvoke,
    AssignNew,
    Const,
    FieldSignature,
    FieldStore,
    IdentityParam,
    IdentityThis,
    InvokeVoid,
    IRProgram,
    MethodSignature,
    Operand,
    Statement,
    STRING_TYPE,
    is_object_type,
    is_primitive,
    is_primitive_array,
)

INIT_NAME = "<init>"


# ============================================================
# Errors
# ============================================================


class SliceError(Exception):
    pass


class UnknownTarget(SliceError):
    def __init__(self, target: ApiRef):
        super().__init__(f"target {target} is not a framework API")
        self.target = target


class NoDefinition(SliceError):
    def __init__(self, var: str, where: str):
        super().__init__(f"no reverse-reachable definition of {var} at {where}")
        self.var = var


class UnresolvableReceiver(SliceError):
    def __init__(self, site: "CallSite", reason: str):
        super().__init__(f"receiver of {site.target} unresolvable: {reason}")
        self.site = site
        self.reason = reason


class DepthExceeded(SliceError):
    def __init__(self, limit: int):
        super().__init__(f"inter-procedural depth cap {limit} exceeded")
        self.limit = limit


class BranchCapExceeded(SliceError):
    def __init__(self, limit: int):
        super().__init__(f"branch cap {limit} must be positive")
        self.limit = limit


class Unconstructible(SliceError):
    def __init__(self, type_name: str):
        super().__init__(f"no constructor known for non-framework type {type_name}")
        self.type_name = type_name


@dataclass(frozen=True)
class SliceConfig:
    depth_cap: int = 64
    branch_cap: int = 16
    seed: int = 0


# ============================================================
# Sites, definitions, traces
# ============================================================


@dataclass(frozen=True)
class CallSite:
    """A statement using a target API: a framework method invocation, or a
    framework field read (field reads can raise NoSuchFieldError and are
    therefore API usages in their own right)."""

    method: MethodSignature  # host method
    stmt_index: int
    target: ApiRef
    receiver_var: Optional[str]
    args: tuple[Operand, ...]

    @property
    def is_static_target(self) -> bool:
        return self.receiver_var is None


@dataclass(frozen=True)
class DefinitionStmt:
    method: MethodSignature
    index: int
    stmt: Statement


Origin = tuple[MethodSignature, int]
VisitedSet = set[Origin]


# -------- dummy value plans --------


@dataclass(frozen=True)
class PrimDummy:
    type_name: str
    value: object  # int/float/bool/str or tuple for arrays

    def as_const(self) -> Const:
        return Const(self.type_name, self.value)


@dataclass(frozen=True)
class ObjectDummy:
    class_name: str
    ctor: Optional[MethodSignature]
    ctor_args: tuple["DummyValue", ...]


DummyValue = Union[PrimDummy, ObjectDummy]


# -------- terminals --------


@dataclass(frozen=True)
class ConstTerminal:
    const: Const


@dataclass(frozen=True)
class DummyTerminal:
    rule: str  # type rule that generated the value (int, string, object, ...)
    seed: int
    plan: DummyValue
    cause: str = ""  # why resolution fell back (no-call-site, cycle, depth-cap, ...)


Terminal = Union[ConstTerminal, DummyTerminal]


@dataclass
class CallTrace:
    """Dependency-ordered statements over synthetic trace variables, plus
    the terminals grounding every remaining free variable."""

    statements: list[tuple[Origin, Statement]]
    terminals: dict[str, Terminal]
    receiver_var: Optional[str] = None

    def invariant_violations(self, extra_roots: tuple[str, ...] = ()) -> list[str]:
        problems: list[str] = []
        seen_origins: set[Origin] = set()
        defined: set[str] = set(self.terminals)
        for origin, stmt in self.statements:
            if origin in seen_origins:
                problems.append(f"origin {origin} appears twice")
            seen_origins.add(origin)
            for u in stmt.uses:
                if u not in defined:
                    problems.append(f"{u} used before definition or terminal")
            if stmt.def_var:
                defined.add(stmt.def_var)
        for root in extra_roots:
            if root is not None and root not in defined:
                problems.append(f"root {root} is not produced by the trace")
        return problems

    def to_json(self) -> dict:
        stmts = []
        for (method, index), stmt in self.statements:
            stmts.append(
                {
                    "origin": {
                        "class": method.declaring_class,
                        "method": str(method),
                        "index": index,
                    },
                    "text": stmt.render(),
                }
            )
        terminals = {}
        for var in sorted(self.terminals):
            term = self.terminals[var]
            if isinstance(term, ConstTerminal):
                terminals[var] = {"kind": "constant", "value": term.const.render()}
            else:
                terminals[var] = {
                    "kind": "dummy",
                    "rule": term.rule,
                    "seed": term.seed,
                    "cause": term.cause,
                }
        return {
            "receiver_var": self.receiver_var,
            "statements": stmts,
            "terminals": terminals,
        }


# -------- parameter bindings --------


@dataclass(frozen=True)
class BindConst:
    const: Const


@dataclass(frozen=True)
class BindTraceVar:
    var: str


@dataclass(frozen=True)
class BindDummy:
    rule: str
    seed: int
    plan: DummyValue


@dataclass(frozen=True)
class ParamBinding:
    param_index: int
    source: Union[BindConst, BindTraceVar, BindDummy]


@dataclass
class SlicedVariant:
    """One complete resolution of a call site: merged trace plus one
    binding per target parameter."""

    site: CallSite
    trace: CallTrace
    bindings: tuple[ParamBinding, ...]
    variant_index: int
    depth_exceeded: bool = False

    def roots(self) -> tuple[str, ...]:
        roots = []
        if self.trace.receiver_var is not None:
            roots.append(self.trace.receiver_var)
        for b in self.bindings:
            if isinstance(b.source, BindTraceVar):
                roots.append(b.source.var)
        return tuple(roots)


# ============================================================
# Locating call sites
# ============================================================


def locate_api_call_sites(
    program: IRProgram, targets: Optional[set[ApiRef]] = None
) -> list[CallSite]:
    """Every statement using a target API, in (class, method, index) order.
    An empty target set means every framework API used by the program,
    including framework field reads."""
    if targets:
        for t in targets:
            if isinstance(t, MethodSignature):
                if t not in program.framework_api_list:
                    raise UnknownTarget(t)
            elif program.is_app_class(t.declaring_class):
                raise UnknownTarget(t)

    sites: list[CallSite] = []
    for cls_name in sorted(program.classes):
        for method in program.classes[cls_name].methods:
            for i, stmt in enumerate(method.body):
                site = _site_for_stmt(program, method.signature, i, stmt, targets)
                if site is not None:
                    sites.append(site)
    sites.sort(
        key=lambda s: (
            s.method.declaring_class,
            s.method.name,
            str(s.method),  # disambiguates overloads
            s.stmt_index,
        )
    )
    return sites


def _site_for_stmt(
    program: IRProgram,
    host: MethodSignature,
    index: int,
    stmt: Statement,
    targets: Optional[set[ApiRef]],
) -> Optional[CallSite]:
    if isinstance(stmt, (AssignInvoke, InvokeVoid)):
        callee = stmt.callee
        if not program.is_framework(callee):
            return None
        if targets and callee not in targets:
            return None
        return CallSite(host, index, callee, stmt.receiver, stmt.args)
    if isinstance(stmt, AssignFieldLoad):
        fs = stmt.fieldsig
        if program.is_app_class(fs.declaring_class):
            return None
        if targets and fs not in targets:
            return None
        return CallSite(host, index, fs, stmt.receiver, ())
    return None


# ============================================================
# Dummy value synthesis
# ============================================================

_ALNUM = string.ascii_uppercase + string.ascii_lowercase + string.digits


def synthesize_dummy_value(
    type_name: str,
    seed: int,
    program: Optional[IRProgram] = None,
    _depth: int = 0,
) -> DummyValue:
    """Seeded, type-conforming placeholder value.

    Primitives draw from a PRNG over the type's range, strings are 8-char
    alphanumeric, arrays hold three seeded elements, and objects recurse
    through the constructor with the fewest parameters (ties broken by
    lexicographic signature).  Identical seeds give identical values.
    """
    rng = random.Random(seed)
    if type_name == "int":
        return PrimDummy("int", rng.randint(-(2**31), 2**31 - 1))
    if type_name == "long":
        return PrimDummy("long", rng.randint(-(2**63), 2**63 - 1))
    if type_name == "double":
        return PrimDummy("double", rng.uniform(-1e6, 1e6))
    if type_name == "boolean":
        return PrimDummy("boolean", rng.random() < 0.5)
    if type_name == STRING_TYPE:
        return PrimDummy(STRING_TYPE, "".join(rng.choice(_ALNUM) for _ in range(8)))
    if is_primitive_array(type_name):
        elem = type_name[:-2]
        values = tuple(
            _prim_value(synthesize_dummy_value(elem, _mix(seed, i))) for i in range(3)
        )
        return PrimDummy(type_name, values)
    if not is_object_type(type_name):
        raise Unconstructible(type_name)

    ctors = _constructors_of(type_name, program)
    if not ctors:
        if program is not None and program.is_app_class(type_name):
            raise Unconstructible(type_name)
        return ObjectDummy(type_name, None, ())
    if _depth >= 4:  # ctor chains must bottom out; fall back to a bare instance
        return ObjectDummy(type_name, None, ())
    ctor = min(ctors, key=lambda c: (c.arity, str(c)))
    args = tuple(
        synthesize_dummy_value(pt, _mix(seed, k), program, _depth + 1)
        for k, pt in enumerate(ctor.param_types)
    )
    return ObjectDummy(type_name, ctor, args)


def _prim_value(d: DummyValue) -> object:
    assert isinstance(d, PrimDummy)
    return d.value


def _constructors_of(
    type_name: str, program: Optional[IRProgram]
) -> list[MethodSignature]:
    if program is None:
        return []
    ctors = []
    cls = program.classes.get(type_name)
    if cls is not None:
        ctors += [m.signature for m in cls.methods if m.signature.name == INIT_NAME]
    ctors += [
        sig
        for sig in program.framework_api_list
        if sig.name == INIT_NAME and sig.declaring_class == type_name
    ]
    return ctors


def _mix(seed: int, *parts: object) -> int:
    material = str(seed) + "|" + "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(material.encode()).digest()[:8], "big")


def dummy_seed(config: SliceConfig, target: ApiRef, scope: object) -> int:
    """Seeds derive from the config seed, the target API signature and a
    stable per-value scope so reruns regenerate identical dummies."""
    return _mix(config.seed, str(target), scope)


# ============================================================
# Nearest reverse-reachable definitions
# ============================================================


def get_definition_stmt(
    program: IRProgram,
    icfg: ICFG,
    use: tuple[MethodSignature, int],
    var: str,
) -> list[DefinitionStmt]:
    """Nearest defining statement(s) of ``var`` backward from ``use``; one
    entry per branch arm when arms define the variable separately.  The
    walk never revisits a statement, so loop back edges are cut after a
    single iteration."""
    method_sig, use_index = use
    method = program.lookup_method(method_sig)
    if method is None:
        raise NoDefinition(var, f"{method_sig} (method unknown)")
    cfg = icfg.cfg(method_sig)
    defs: list[int] = []
    seen: set[int] = set()
    work = list(cfg.stmt_preds(use_index))
    while work:
        i = work.pop()
        if i in seen:
            continue
        seen.add(i)
        stmt = method.body[i]
        if stmt.def_var == var:
            defs.append(i)
            continue  # nearest definition on this path; stop here
        work.extend(cfg.stmt_preds(i))
    if not defs:
        raise NoDefinition(var, f"{method_sig}#{use_index}")
    return [DefinitionStmt(method_sig, i, method.body[i]) for i in sorted(defs)]


# ============================================================
# Resolution engine
# ============================================================

_IN_PROGRESS = object()


@dataclass(frozen=True)
class _Frame:
    """Inlining context: the call site a callee body was entered through.
    Parameter and @this references inside the callee re-resolve at this
    site.  A missing frame means the method's callers are looked up in
    the call graph instead."""

    caller: MethodSignature
    site_index: int
    parent: Optional["_Frame"]


@dataclass
class _State:
    statements: list[tuple[Origin, Statement]]
    terminals: dict[str, Terminal]
    memo: dict[Origin, object]  # origin -> trace var name | _IN_PROGRESS
    lifted: set[Origin]  # origins already present in statements
    fresh: int = 0
    depth_exceeded: bool = False

    def clone(self) -> "_State":
        return _State(
            list(self.statements),
            dict(self.terminals),
            dict(self.memo),
            set(self.lifted),
            self.fresh,
            self.depth_exceeded,
        )

    def new_var(self) -> str:
        name = f"t{self.fresh}"
        self.fresh += 1
        return name


class _Engine:
    def __init__(
        self,
        program: IRProgram,
        cg: CallGraph,
        icfg: ICFG,
        target: ApiRef,
        config: SliceConfig,
        pre_visited: Optional[VisitedSet] = None,
    ):
        self.program = program
        self.cg = cg
        self.icfg = icfg
        self.target = target
        self.config = config
        self.pre_visited = frozenset(pre_visited or ())

    # -------- terminals --------

    def _dummy(
        self, state: _State, type_name: str, scope: object, cause: str
    ) -> str:
        seed = dummy_seed(self.config, self.target, scope)
        try:
            plan: DummyValue = synthesize_dummy_value(type_name, seed, self.program)
        except Unconstructible:
            # no constructor known: emit a bare fresh instance anyway and
            # let the harness rule the test invalid if the class is absent
            plan = ObjectDummy(type_name, None, ())
            cause = cause + "+unconstructible" if cause else "unconstructible"
        rule = _rule_name(plan)
        var = state.new_var()
        state.terminals[var] = DummyTerminal(rule, seed, plan, cause)
        return var

    def _const(self, state: _State, const: Const) -> str:
        var = state.new_var()
        state.terminals[var] = ConstTerminal(const)
        return var

    # -------- variable resolution --------

    def resolve_var(
        self,
        state: _State,
        method: MethodSignature,
        use_index: int,
        var: str,
        depth: int,
        frame: Optional[_Frame],
        limit: int,
    ) -> list[tuple[_State, str]]:
        defs = get_definition_stmt(self.program, self.icfg, (method, use_index), var)
        out: list[tuple[_State, str]] = []
        for k, d in enumerate(defs):
            if len(out) >= limit:
                break
            branch_state = state.clone() if len(defs) > 1 else state
            out.extend(
                self.resolve_def(branch_state, d, depth, frame, limit - len(out))
            )
        return out[:limit]

    def resolve_operand(
        self,
        state: _State,
        method: MethodSignature,
        use_index: int,
        operand: Operand,
        depth: int,
        frame: Optional[_Frame],
        limit: int,
    ) -> list[tuple[_State, str]]:
        if isinstance(operand, Const):
            return [(state, self._const(state, operand))]
        return self.resolve_var(state, method, use_index, operand, depth, frame, limit)

    # -------- definition resolution (the Construct-Call-Trace core) --------

    def resolve_def(
        self,
        state: _State,
        d: DefinitionStmt,
        depth: int,
        frame: Optional[_Frame],
        limit: int,
    ) -> list[tuple[_State, str]]:
        origin: Origin = (d.method, d.index)
        memoized = state.memo.get(origin)
        if memoized is _IN_PROGRESS or origin in self.pre_visited:
            # revisited statement: stop here, ground the value in a dummy
            tv = self._dummy(
                state, self._def_type(d), ("cycle", str(d.method), d.index), "cycle"
            )
            return [(state, tv)]
        if isinstance(memoized, str):
            return [(state, memoized)]

        if depth > self.config.depth_cap:
            state.depth_exceeded = True
            tv = self._dummy(
                state,
                self._def_type(d),
                ("depth", str(d.method), d.index),
                "depth-cap",
            )
            return [(state, tv)]

        stmt = d.stmt

        if isinstance(stmt, AssignConst):
            tv = self._const(state, stmt.const)
            state.memo[origin] = tv
            return [(state, tv)]

        if isinstance(stmt, IdentityParam):
            return self._resolve_incoming(
                state, d, depth, frame, limit, kind="param", index=stmt.index
            )

        if isinstance(stmt, IdentityThis):
            return self._resolve_incoming(
                state, d, depth, frame, limit, kind="this", index=-1
            )

        if isinstance(stmt, AssignCast):
            state.memo[origin] = _IN_PROGRESS
            out = []
            for st, src_tv in self.resolve_var(
                state, d.method, d.index, stmt.src, depth, frame, limit
            ):
                tv = st.new_var()
                st.statements.append(
                    (origin, AssignCast(tv, stmt.type_name, src_tv))
                )
                st.lifted.add(origin)
                st.memo[origin] = tv
                out.append((st, tv))
            return out

        if isinstance(stmt, AssignNew):
            return self._resolve_new(state, d, stmt, depth, frame, limit)

        if isinstance(stmt, AssignInvoke):
            if self.program.lookup_method(stmt.callee) is not None:
                return self._resolve_app_call(state, d, stmt, depth, frame, limit)
            return self._resolve_framework_call(state, d, stmt, depth, frame, limit)

        if isinstance(stmt, AssignFieldLoad):
            state.memo[origin] = _IN_PROGRESS
            if stmt.receiver is None:
                tv = state.new_var()
                state.statements.append(
                    (origin, AssignFieldLoad(tv, stmt.fieldsig, None))
                )
                state.lifted.add(origin)
                state.memo[origin] = tv
                return [(state, tv)]
            out = []
            for st, recv_tv in self.resolve_var(
                state, d.method, d.index, stmt.receiver, depth, frame, limit
            ):
                tv = st.new_var()
                st.statements.append(
                    (origin, AssignFieldLoad(tv, stmt.fieldsig, recv_tv))
                )
                st.lifted.add(origin)
                st.memo[origin] = tv
                out.append((st, tv))
            return out

        raise SliceError(f"statement at {d.method}#{d.index} defines nothing")

    def _def_type(self, d: DefinitionStmt) -> str:
        method = self.program.lookup_method(d.method)
        assert method is not None
        var = d.stmt.def_var
        return method.local_types().get(var, "java.lang.Object")

    def _resolve_incoming(
        self,
        state: _State,
        d: DefinitionStmt,
        depth: int,
        frame: Optional[_Frame],
        limit: int,
        kind: str,
        index: int,
    ) -> list[tuple[_State, str]]:
        """@parameterN / @this: re-resolve at the inlining site when one is
        known, otherwise through every call site in the call graph."""
        origin: Origin = (d.method, d.index)
        state.memo[origin] = _IN_PROGRESS

        def finish(results: list[tuple[_State, str]]) -> list[tuple[_State, str]]:
            for st, tv in results:
                st.memo[origin] = tv
            return results

        if frame is not None:
            caller_method = self.program.lookup_method(frame.caller)
            assert caller_method is not None
            call_stmt = caller_method.body[frame.site_index]
            assert isinstance(call_stmt, (AssignInvoke, InvokeVoid))
            operand = call_stmt.receiver if kind == "this" else call_stmt.args[index]
            return finish(
                self.resolve_operand(
                    state,
                    frame.caller,
                    frame.site_index,
                    operand,
                    depth,
                    frame.parent,
                    limit,
                )
            )

        edges = [
            e
            for e in self.cg.callers_of(d.method)
            if isinstance(
                self.program.lookup_method(e.caller).body[e.site_index],
                (AssignInvoke, InvokeVoid),
            )
        ]
        if not edges:
            scope = (kind, str(d.method), index)
            tv = self._dummy(state, self._def_type(d), scope, "no-call-site")
            return finish([(state, tv)])

        out: list[tuple[_State, str]] = []
        for e in edges:
            if len(out) >= limit:
                break
            branch_state = state.clone() if len(edges) > 1 else state
            caller_method = self.program.lookup_method(e.caller)
            call_stmt = caller_method.body[e.site_index]
            operand = call_stmt.receiver if kind == "this" else call_stmt.args[index]
            if operand is None:  # static call cannot supply @this
                continue
            out.extend(
                finish(
                    self.resolve_operand(
                        branch_state,
                        e.caller,
                        e.site_index,
                        operand,
                        depth + 1,
                        None,
                        limit - len(out),
                    )
                )
            )
        if not out:
            scope = (kind, str(d.method), index)
            tv = self._dummy(state, self._def_type(d), scope, "no-call-site")
            return finish([(state, tv)])
        return out[:limit]

    def _resolve_framework_call(
        self,
        state: _State,
        d: DefinitionStmt,
        stmt: AssignInvoke,
        depth: int,
        frame: Optional[_Frame],
        limit: int,
    ) -> list[tuple[_State, str]]:
        """A framework-API result: the call joins the trace, the walk stops
        at the boundary (only receiver and arguments are chased)."""
        origin: Origin = (d.method, d.index)
        state.memo[origin] = _IN_PROGRESS
        recv_outcomes: list[tuple[_State, Optional[str]]]
        if stmt.receiver is None:
            recv_outcomes = [(state, None)]
        else:
            recv_outcomes = self.resolve_var(
                state, d.method, d.index, stmt.receiver, depth, frame, limit
            )
        out: list[tuple[_State, str]] = []
        for st, recv_tv in recv_outcomes:
            for st2, arg_tvs in self._resolve_args(
                st, d, stmt.args, depth, frame, limit - len(out)
            ):
                tv = st2.new_var()
                st2.statements.append(
                    (origin, AssignInvoke(tv, stmt.callee, recv_tv, tuple(arg_tvs)))
                )
                st2.lifted.add(origin)
                st2.memo[origin] = tv
                out.append((st2, tv))
                if len(out) >= limit:
                    break
            if len(out) >= limit:
                break
        return out

    def _resolve_args(
        self,
        state: _State,
        d: DefinitionStmt,
        args: tuple[Operand, ...],
        depth: int,
        frame: Optional[_Frame],
        limit: int,
    ) -> list[tuple[_State, list[Operand]]]:
        """Literal arguments stay inline; variable arguments are resolved
        to trace variables."""
        acc: list[tuple[_State, list[Operand]]] = [(state, [])]
        for op in args:
            nxt: list[tuple[_State, list[Operand]]] = []
            for st, ops in acc:
                if isinstance(op, Const):
                    nxt.append((st, ops + [op]))
                    continue
                for st2, tv in self.resolve_var(
                    st, d.method, d.index, op, depth, frame, limit
                ):
                    nxt.append((st2, ops + [tv]))
                    if len(nxt) >= limit:
                        break
                if len(nxt) >= limit:
                    break
            acc = nxt
        return acc[:limit]

    def _resolve_app_call(
        self,
        state: _State,
        d: DefinitionStmt,
        stmt: AssignInvoke,
        depth: int,
        frame: Optional[_Frame],
        limit: int,
    ) -> list[tuple[_State, str]]:
        """Value returned by an app-defined method: chase the definition of
        each returned variable inside the callee, with parameters bound to
        this call site.  The call itself never appears in the trace."""
        origin: Origin = (d.method, d.index)
        state.memo[origin] = _IN_PROGRESS
        callee = self.program.lookup_method(stmt.callee)
        assert callee is not None
        inner = _Frame(d.method, d.index, frame)
        value_returns = [
            (i, callee.body[i].var)
            for i in callee.return_indices()
            if hasattr(callee.body[i], "var")
        ]
        if not value_returns:
            tv = self._dummy(
                state,
                stmt.callee.return_type,
                ("no-return", str(stmt.callee)),
                "no-value-return",
            )
            state.memo[origin] = tv
            return [(state, tv)]
        out: list[tuple[_State, str]] = []
        for i, (ridx, rvar) in enumerate(value_returns):
            if len(out) >= limit:
                break
            branch_state = state.clone() if len(value_returns) > 1 else state
            for st, tv in self.resolve_var(
                branch_state, stmt.callee, ridx, rvar, depth + 1, inner,
                limit - len(out),
            ):
                st.memo[origin] = tv
                out.append((st, tv))
        return out[:limit]

    def _resolve_new(
        self,
        state: _State,
        d: DefinitionStmt,
        stmt: AssignNew,
        depth: int,
        frame: Optional[_Frame],
        limit: int,
    ) -> list[tuple[_State, str]]:
        """A fresh allocation joins the trace together with its constructor
        call (the first ``<init>`` on the variable after the allocation)."""
        origin: Origin = (d.method, d.index)
        state.memo[origin] = _IN_PROGRESS
        method = self.program.lookup_method(d.method)
        ctor: Optional[tuple[int, InvokeVoid]] = None
        for j in range(d.index + 1, len(method.body)):
            s = method.body[j]
            if isinstance(s, InvokeVoid) and s.receiver == stmt.var and (
                s.callee.name == INIT_NAME
            ):
                ctor = (j, s)
                break
            if s.def_var == stmt.var:
                break
        tv = state.new_var()
        state.statements.append((origin, AssignNew(tv, stmt.type_name)))
        state.lifted.add(origin)
        state.memo[origin] = tv
        if ctor is None:
            return [(state, tv)]
        ctor_idx, ctor_stmt = ctor
        ctor_origin: Origin = (d.method, ctor_idx)
        out: list[tuple[_State, str]] = []
        for st, arg_ops in self._resolve_args(
            state, DefinitionStmt(d.method, ctor_idx, ctor_stmt), ctor_stmt.args,
            depth, frame, limit,
        ):
            if ctor_origin not in st.lifted:
                st.statements.append(
                    (ctor_origin, InvokeVoid(ctor_stmt.callee, tv, tuple(arg_ops)))
                )
                st.lifted.add(ctor_origin)
            out.append((st, tv))
        return out[:limit]


def _rule_name(plan: DummyValue) -> str:
    if isinstance(plan, PrimDummy):
        if plan.type_name == STRING_TYPE:
            return "string"
        if plan.type_name.endswith("[]"):
            return "array"
        return plan.type_name
    return "object" if plan.ctor is not None else "fresh-object"


# ============================================================
# Surface operations
# ============================================================


def _fresh_state() -> _State:
    return _State([], {}, {}, set())


def enumerate_slices(
    program: IRProgram,
    cg: CallGraph,
    icfg: ICFG,
    site: CallSite,
    config: SliceConfig = SliceConfig(),
) -> list[SlicedVariant]:
    """All trace variants for one call site: arguments resolve first (in
    parameter order), then the receiver, sharing one visited set so common
    sub-chains are lifted once.  Variants beyond ``branch_cap`` are
    dropped deterministically."""
    if config.branch_cap < 1:
        raise BranchCapExceeded(config.branch_cap)
    engine = _Engine(program, cg, icfg, site.target, config)
    limit = config.branch_cap

    # arguments, in parameter order
    acc: list[tuple[_State, list[Optional[str]]]] = [(_fresh_state(), [])]
    for k, op in enumerate(site.args):
        nxt: list[tuple[_State, list[Optional[str]]]] = []
        for st, tvs in acc:
            if isinstance(op, Const):
                nxt.append((st, tvs + [None]))  # literal stays at the site
                continue
            for st2, tv in engine.resolve_var(
                st, site.method, site.stmt_index, op, 0, None, limit
            ):
                nxt.append((st2, tvs + [tv]))
                if len(nxt) >= limit:
                    break
            if len(nxt) >= limit:
                break
        acc = nxt[:limit]

    # receiver
    outcomes: list[tuple[_State, list[Optional[str]], Optional[str]]] = []
    for st, tvs in acc:
        if site.receiver_var is None:
            outcomes.append((st, tvs, None))
            continue
        for st2, recv_tv in engine.resolve_var(
            st, site.method, site.stmt_index, site.receiver_var, 0, None, limit
        ):
            outcomes.append((st2, tvs, recv_tv))
            if len(outcomes) >= limit:
                break
    outcomes = outcomes[:limit]

    variants: list[SlicedVariant] = []
    for vi, (st, tvs, recv_tv) in enumerate(outcomes):
        bindings = []
        for k, op in enumerate(site.args):
            tv = tvs[k]
            if tv is None:
                assert isinstance(op, Const)
                bindings.append(ParamBinding(k, BindConst(op)))
                continue
            term = st.terminals.get(tv)
            if isinstance(term, ConstTerminal):
                bindings.append(ParamBinding(k, BindConst(term.const)))
            elif isinstance(term, DummyTerminal):
                bindings.append(
                    ParamBinding(k, BindDummy(term.rule, term.seed, term.plan))
                )
            else:
                bindings.append(ParamBinding(k, BindTraceVar(tv)))
        trace = CallTrace(st.statements, st.terminals, recv_tv)
        variants.append(
            SlicedVariant(site, trace, tuple(bindings), vi, st.depth_exceeded)
        )
    return variants


def infer_caller_context(
    program: IRProgram,
    cg: CallGraph,
    icfg: ICFG,
    site: CallSite,
    config: SliceConfig = SliceConfig(),
) -> CallTrace:
    """Minimum executable context for the receiver.  Static targets need
    no context (empty trace); instance targets resolve the receiver chain.
    Raises UnresolvableReceiver when no variant grounds the receiver in an
    invocable value."""
    if site.receiver_var is None:
        return CallTrace([], {}, None)
    engine = _Engine(program, cg, icfg, site.target, config)
    state = _fresh_state()
    try:
        outcomes = engine.resolve_var(
            state, site.method, site.stmt_index, site.receiver_var, 0, None,
            config.branch_cap,
        )
    except Unconstructible as exc:
        raise UnresolvableReceiver(site, str(exc)) from exc
    for st, tv in outcomes:
        term = st.terminals.get(tv)
        if isinstance(term, (ConstTerminal, DummyTerminal)) and not _invocable(term):
            continue
        return CallTrace(st.statements, st.terminals, tv)
    raise UnresolvableReceiver(site, "no variant yields an invocable receiver")


def _invocable(term: Terminal) -> bool:
    if isinstance(term, ConstTerminal):
        return term.const.type_name == STRING_TYPE  # strings are objects
    plan = term.plan
    return isinstance(plan, ObjectDummy)


def construct_call_trace(
    program: IRProgram,
    cg: CallGraph,
    icfg: ICFG,
    definition: DefinitionStmt,
    visited: Optional[VisitedSet] = None,
    config: SliceConfig = SliceConfig(),
) -> CallTrace:
    """Trace grounding one definition statement.  Constants, framework-API
    results and already-visited statements terminate the walk; parameter
    definitions recurse through call sites; results of app-defined calls
    recurse from the callee's return definitions."""
    engine = _Engine(
        program, cg, icfg, _target_of(definition), config, pre_visited=visited
    )
    state = _fresh_state()
    outcomes = engine.resolve_def(state, definition, 0, None, config.branch_cap)
    if not outcomes:
        return CallTrace([], {}, None)
    st, tv = outcomes[0]
    return CallTrace(st.statements, st.terminals, tv)


def _target_of(definition: DefinitionStmt) -> ApiRef:
    # seed scoping for dummies produced outside a concrete call-site slice
    return MethodSignature(
        definition.method.declaring_class, definition.method.name, (), "void", True
    )


def infer_parameter_values(
    program: IRProgram,
    cg: CallGraph,
    icfg: ICFG,
    site: CallSite,
    config: SliceConfig = SliceConfig(),
) -> tuple[ParamBinding, ...]:
    """One binding per target parameter: Constant when the walk ends at a
    constant, TraceVar when grounded through trace statements, Dummy
    otherwise (never an error)."""
    variants = enumerate_slices(program, cg, icfg, site, config)
    if not variants:
        return tuple(
            ParamBinding(
                k,
                BindDummy(
                    "object",
                    dummy_seed(config, site.target, k),
                    synthesize_dummy_value("java.lang.Object", 0),
                ),
            )
            for k in range(len(site.args))
        )
    return variants[0].bindings


def split_branches(
    program: IRProgram,
    cg: CallGraph,
    icfg: ICFG,
    site: CallSite,
    config: SliceConfig = SliceConfig(),
) -> list[CallTrace]:
    """One trace per acyclic reverse path whose definitions differ."""
    return [v.trace for v in enumerate_slices(program, cg, icfg, site, config)]


# ============================================================
# Field lowering
# ============================================================


def lower_field_access(
    trace: CallTrace,
    program: IRProgram,
    cg: Optional[CallGraph] = None,
    icfg: Optional[ICFG] = None,
    config: SliceConfig = SliceConfig(),
    keep_vars: tuple[str, ...] = (),
) -> CallTrace:
    """Replace every app-class field load in the trace with the value the
    field is assigned in its declaring class (first store in (method,
    index) order), resolved backward in the store's own context.  Loads of
    framework-class fields stay: they are API usages.  Unassigned or
    unliftable fields become dummy terminals.  Statements orphaned by the
    rewrite are swept out."""
    if not any(
        isinstance(stmt, AssignFieldLoad)
        and program.is_app_class(stmt.fieldsig.declaring_class)
        for _, stmt in trace.statements
    ):
        return trace

    from .graphs import build_call_graph, build_icfg  # lazy; avoids rebuild cost

    if cg is None:
        cg = build_call_graph(program)
    if icfg is None:
        icfg = build_icfg(program, cg)

    terminals = dict(trace.terminals)
    # completed memo entries for everything already in the trace, so the
    # store-chain resolution shares rather than re-lifts statements
    memo: dict[Origin, object] = {
        origin: stmt.def_var
        for origin, stmt in trace.statements
        if stmt.def_var is not None
    }
    lifted = {origin for origin, _ in trace.statements}
    fresh = _next_fresh(trace)
    rewritten: list[tuple[Origin, Statement]] = []
    subst: dict[str, str] = {}

    for origin, stmt in trace.statements:
        if not (
            isinstance(stmt, AssignFieldLoad)
            and program.is_app_class(stmt.fieldsig.declaring_class)
        ):
            rewritten.append((origin, _substitute_uses(stmt, subst)))
            continue
        replacement: Optional[str] = None
        store = _first_field_store(program, stmt.fieldsig)
        if store is not None:
            store_method, store_idx, store_stmt = store
            engine = _Engine(program, cg, icfg, _field_target(stmt.fieldsig), config)
            state = _State(list(rewritten), terminals, dict(memo), set(lifted), fresh)
            try:
                outcomes = engine.resolve_operand(
                    state, store_method, store_idx, store_stmt.src, 0, None, 1
                )
            except SliceError:
                outcomes = []
            if outcomes:
                st, tv = outcomes[0]
                rewritten = st.statements
                terminals = st.terminals
                memo = st.memo
                lifted = st.lifted
                fresh = st.fresh
                replacement = tv
        if replacement is None:
            seed = dummy_seed(config, _field_target(stmt.fieldsig), "field")
            try:
                plan = synthesize_dummy_value(stmt.fieldsig.type_name, seed, program)
            except Unconstructible:
                plan = ObjectDummy(stmt.fieldsig.type_name, None, ())
            replacement = f"t{fresh}"
            fresh += 1
            terminals[replacement] = DummyTerminal(
                _rule_name(plan), seed, plan, cause="field-unassigned"
            )
        subst[stmt.var] = replacement

    receiver = subst.get(trace.receiver_var, trace.receiver_var)
    roots = tuple(subst.get(v, v) for v in keep_vars)
    if receiver is not None:
        roots = roots + (receiver,)
    statements, terminals = _sweep(rewritten, terminals, roots)
    return CallTrace(statements, terminals, receiver)


def _field_target(fs: FieldSignature) -> ApiRef:
    return fs


def _next_fresh(trace: CallTrace) -> int:
    highest = -1
    names = set(trace.terminals)
    for _, stmt in trace.statements:
        if stmt.def_var:
            names.add(stmt.def_var)
    for name in names:
        if name.startswith("t") and name[1:].isdigit():
            highest = max(highest, int(name[1:]))
    return highest + 1


def _first_field_store(
    program: IRProgram, fs: FieldSignature
) -> Optional[tuple[MethodSignature, int, FieldStore]]:
    cls = program.classes.get(fs.declaring_class)
    if cls is None:
        return None
    for method in cls.methods:
        for i, stmt in enumerate(method.body):
            if isinstance(stmt, FieldStore) and stmt.fieldsig == fs:
                return method.signature, i, stmt
    return None


def _substitute_uses(stmt: Statement, subst: dict[str, str]) -> Statement:
    """Rewrite used variables through a substitution (defs untouched)."""
    if not subst:
        return stmt

    def s(v: Optional[str]) -> Optional[str]:
        return subst.get(v, v) if isinstance(v, str) else v

    from .ir import If, Return

    if isinstance(stmt, AssignCast):
        return replace(stmt, src=s(stmt.src))
    if isinstance(stmt, (AssignInvoke, InvokeVoid)):
        return replace(
            stmt,
            receiver=s(stmt.receiver),
            args=tuple(s(a) if isinstance(a, str) else a for a in stmt.args),
        )
    if isinstance(stmt, AssignFieldLoad):
        return replace(stmt, receiver=s(stmt.receiver))
    if isinstance(stmt, FieldStore):
        return replace(
            stmt,
            receiver=s(stmt.receiver),
            src=s(stmt.src) if isinstance(stmt.src, str) else stmt.src,
        )
    if isinstance(stmt, Return):
        return replace(stmt, var=s(stmt.var))
    if isinstance(stmt, If):
        return replace(stmt, cond=s(stmt.cond))
    return stmt


def _sweep(
    statements: list[tuple[Origin, Statement]],
    terminals: dict[str, Terminal],
    roots: tuple[str, ...],
) -> tuple[list[tuple[Origin, Statement]], dict[str, Terminal]]:
    """Keep only statements whose definitions (transitively) feed a root;
    constructor calls stay with their allocation."""
    needed = set(roots)
    kept_flags = [False] * len(statements)
    changed = True
    while changed:
        changed = False
        for i in range(len(statements) - 1, -1, -1):
            if kept_flags[i]:
                continue
            origin, stmt = statements[i]
            dv = stmt.def_var
            is_ctor = (
                isinstance(stmt, InvokeVoid)
                and stmt.callee.name == INIT_NAME
                and stmt.receiver in needed
            )
            if (dv is not None and dv in needed) or is_ctor:
                kept_flags[i] = True
                for u in stmt.uses:
                    if u not in needed:
                        needed.add(u)
                        changed = True
    kept = [sp for sp, flag in zip(statements, kept_flags) if flag]
    live_terms = {v: t for v, t in terminals.items() if v in needed}
    return kept, live_terms
