"""Backward slicing: site location, definition lookup, trace
construction, parameter inference, dummy synthesis, field lowering and
branch splitting."""

import re

import pytest

from slicegen.ir import (
    AssignCast,
    AssignFieldLoad,
    AssignInvoke,
    Const,
    MethodSignature,
)
from slicegen.parser import parse_program
from slicegen.slicer import (
    BindConst,
    BindDummy,
    BindTraceVar,
    ConstTerminal,
    DummyTerminal,
    NoDefinition,
    ObjectDummy,
    PrimDummy,
    SliceConfig,
    UnknownTarget,
    UnresolvableReceiver,
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

from conftest import graphs_for


def _method(program, name):
    for m in program.iter_methods():
        if m.signature.name == name:
            return m
    raise AssertionError(name)


def _site(program, target_name):
    sites = [
        s for s in locate_api_call_sites(program) if s.target.name == target_name
    ]
    assert sites, target_name
    return sites[0]


# ============================================================
# locate_api_call_sites
# ============================================================


def test_named_target_finds_one_site(netstats):
    target = next(
        s for s in netstats.framework_api_list if s.name == "queryDetailsForUid"
    )
    sites = locate_api_call_sites(netstats, {target})
    assert len(sites) == 1
    assert sites[0].method.name == "getCurAppFlow"
    assert sites[0].receiver_var == "$r3"


def test_empty_targets_means_every_framework_usage(netstats):
    # brute force: framework invokes plus framework field reads
    count = 0
    for method in netstats.iter_methods():
        for stmt in method.body:
            if isinstance(stmt, AssignInvoke) and netstats.is_framework(stmt.callee):
                count += 1
            if isinstance(stmt, AssignFieldLoad) and not netstats.is_app_class(
                stmt.fieldsig.declaring_class
            ):
                count += 1
    sites = locate_api_call_sites(netstats)
    assert len(sites) == count == 7
    # ordering: (class, method, index)
    keys = [(s.method.declaring_class, s.method.name, s.stmt_index) for s in sites]
    assert keys == sorted(keys)


def test_unknown_target_rejected(netstats):
    bogus = MethodSignature("no.Such", "api", (), "void", False)
    with pytest.raises(UnknownTarget):
        locate_api_call_sites(netstats, {bogus})


# ============================================================
# get_definition_stmt
# ============================================================


def test_nearest_definition_is_the_cast(netstats):
    cg, icfg = graphs_for(netstats)
    gnsm = _method(netstats, "getNetworkStatsManager")
    ret_idx = gnsm.return_indices()[0]
    defs = get_definition_stmt(netstats, icfg, (gnsm.signature, ret_idx), "$r2")
    assert len(defs) == 1
    assert isinstance(defs[0].stmt, AssignCast)
    assert defs[0].index == 2


def test_definition_immediately_above_use(netstats):
    cg, icfg = graphs_for(netstats)
    flow = _method(netstats, "getCurAppFlow")
    defs = get_definition_stmt(netstats, icfg, (flow.signature, 4), "$i0")
    assert [d.index for d in defs] == [3]


def test_two_arm_definitions_yield_two_results(branches):
    cg, icfg = graphs_for(branches)
    probe = _method(branches, "probe")
    use = next(
        i for i, s in enumerate(probe.body) if isinstance(s, AssignInvoke)
        and s.callee.name == "ping"
    )
    defs = get_definition_stmt(branches, icfg, (probe.signature, use), "$d")
    assert len(defs) == 2
    callees = {d.stmt.callee.name for d in defs}
    assert callees == {"primary", "secondary"}


def test_no_definition_raises():
    program = parse_program(
        "framework <x.Y: void f()>;\n"
        "class A { void m() { $a = 1; return; } }"
    ).program
    cg, icfg = graphs_for(program)
    sig = program.classes["A"].methods[0].signature
    with pytest.raises(NoDefinition):
        get_definition_stmt(program, icfg, (sig, 1), "$zz")


# ============================================================
# infer_caller_context
# ============================================================


def test_static_target_needs_no_context(formatter):
    cg, icfg = graphs_for(formatter)
    site = _site(formatter, "formatShortFileSize")
    trace = infer_caller_context(formatter, cg, icfg, site)
    assert trace.statements == []
    assert trace.receiver_var is None


def test_receiver_chain_of_query_details(netstats):
    cg, icfg = graphs_for(netstats)
    site = _site(netstats, "queryDetailsForUid")
    trace = infer_caller_context(netstats, cg, icfg, site)
    kinds = [type(s).__name__ for _, s in trace.statements]
    assert kinds == ["AssignInvoke", "AssignCast"]
    call = trace.statements[0][1]
    assert call.callee.name == "getSystemService"
    assert call.args[0].value == "netstats"
    # the context terminal is a fresh framework object standing in for the
    # unavailable app entry environment
    (term,) = trace.terminals.values()
    assert isinstance(term, DummyTerminal)
    assert isinstance(term.plan, ObjectDummy)
    assert term.plan.class_name == "android.content.Context"
    assert trace.invariant_violations((trace.receiver_var,)) == []


def test_receiver_defined_directly_by_framework_call_is_one_statement():
    text = """
framework static <fw.E: fw.Dev make()>;
framework <fw.Dev: void go()>;
class A { static void m() { $d = staticinvoke <fw.E: fw.Dev make()>(); virtualinvoke $d.<fw.Dev: void go()>(); return; } }
"""
    program = parse_program(text).program
    cg, icfg = graphs_for(program)
    site = _site(program, "go")
    trace = infer_caller_context(program, cg, icfg, site)
    assert len(trace.statements) == 1
    assert trace.terminals == {}


def test_primitive_receiver_is_unresolvable():
    text = """
framework <fw.Dev: void go()>;
class A { static void m() { $i = 1; virtualinvoke $i.<fw.Dev: void go()>(); return; } }
"""
    program = parse_program(text).program
    cg, icfg = graphs_for(program)
    site = _site(program, "go")
    with pytest.raises(UnresolvableReceiver):
        infer_caller_context(program, cg, icfg, site)


# ============================================================
# construct_call_trace
# ============================================================


def test_constant_definition_is_a_terminal_with_empty_trace(netstats):
    text = """
framework <fw.Dev: void go(java.lang.String)>;
class A { static void m() { $s = "netstats"; return; } }
"""
    program = parse_program(text).program
    cg, icfg = graphs_for(program)
    method = program.classes["A"].methods[0]
    defs = get_definition_stmt(program, icfg, (method.signature, 1), "$s")
    trace = construct_call_trace(program, cg, icfg, defs[0])
    assert trace.statements == []
    (term,) = trace.terminals.values()
    assert isinstance(term, ConstTerminal)
    assert term.const.value == "netstats"


def test_app_callee_body_is_lifted_with_params_rebound(netstats):
    cg, icfg = graphs_for(netstats)
    flow = _method(netstats, "getCurAppFlow")
    # definition of $r3: the call into the self-defined getNetworkStatsManager
    defs = get_definition_stmt(netstats, icfg, (flow.signature, 4), "$r3")
    trace = construct_call_trace(netstats, cg, icfg, defs[0])
    lifted = [s for _, s in trace.statements]
    assert [type(s).__name__ for s in lifted] == ["AssignInvoke", "AssignCast"]
    origins = {origin[0].name for origin, _ in trace.statements}
    assert origins == {"getNetworkStatsManager"}  # statements come from the callee


def test_previsited_definition_grounds_in_a_dummy(netstats):
    cg, icfg = graphs_for(netstats)
    flow = _method(netstats, "getCurAppFlow")
    defs = get_definition_stmt(netstats, icfg, (flow.signature, 4), "$r3")
    visited = {(defs[0].method, defs[0].index)}
    trace = construct_call_trace(netstats, cg, icfg, defs[0], visited=visited)
    assert trace.statements == []
    (term,) = trace.terminals.values()
    assert isinstance(term, DummyTerminal) and term.cause == "cycle"


def test_self_recursive_resolution_terminates(recursion_program):
    cg, icfg = graphs_for(recursion_program)
    site = _site(recursion_program, "ping")
    trace = infer_caller_context(recursion_program, cg, icfg, site)
    spin = _method(recursion_program, "spin")
    assert len(trace.statements) <= len(spin.body)
    (term,) = trace.terminals.values()
    assert isinstance(term, DummyTerminal)
    assert term.plan.class_name == "fw.Dev"


# ============================================================
# infer_parameter_values
# ============================================================


def test_query_details_bindings(netstats):
    cg, icfg = graphs_for(netstats)
    site = _site(netstats, "queryDetailsForUid")
    bindings = infer_parameter_values(netstats, cg, icfg, site)
    assert len(bindings) == 5
    assert isinstance(bindings[0].source, BindConst)
    assert bindings[0].source.const.value == 0
    assert isinstance(bindings[1].source, BindConst)
    assert bindings[1].source.const.value == ""
    assert isinstance(bindings[2].source, BindConst)
    assert bindings[2].source.const.type_name == "long"
    assert isinstance(bindings[3].source, BindTraceVar)
    assert isinstance(bindings[4].source, BindTraceVar)


def test_literal_parameter_binds_without_recursion(formatter):
    cg, icfg = graphs_for(formatter)
    site = _site(formatter, "formatShortFileSize")
    bindings = infer_parameter_values(formatter, cg, icfg, site)
    # $l0 = 1L resolves to a constant terminal
    assert isinstance(bindings[1].source, BindConst)
    assert bindings[1].source.const.value == 1


def test_depth_cap_falls_back_to_dummy():
    # a linear chain of app calls longer than the cap
    hops = 8
    parts = ["framework static <fw.E: int leaf()>;", "class A {"]
    for i in range(hops):
        callee = f"m{i + 1}" if i + 1 < hops else None
        if callee:
            parts.append(
                f"  static int m{i}() {{ $v = staticinvoke <A: int {callee}()>(); return $v; }}"
            )
        else:
            parts.append(
                f"  static int m{i}() {{ $v = staticinvoke <fw.E: int leaf()>(); return $v; }}"
            )
    parts.append(
        "  static void probe() { $x = staticinvoke <A: int m0()>();"
        " staticinvoke <fw.T: void use(int)>($x); return; }"
    )
    parts.insert(1, "framework static <fw.T: void use(int)>;")
    parts.append("}")
    program = parse_program("\n".join(parts)).program
    cg, icfg = graphs_for(program)
    site = _site(program, "use")
    config = SliceConfig(depth_cap=3, branch_cap=16, seed=0)
    bindings = infer_parameter_values(program, cg, icfg, site, config)
    assert isinstance(bindings[0].source, BindDummy)
    assert bindings[0].source.rule == "int"


# ============================================================
# synthesize_dummy_value
# ============================================================


def test_boolean_dummy_is_deterministic():
    a = synthesize_dummy_value("boolean", 0)
    assert a == synthesize_dummy_value("boolean", 0)
    assert a.value is False  # frozen from one reference run


def test_string_dummy_matches_golden():
    value = synthesize_dummy_value("java.lang.String", 42).value
    assert value == "oHBvRPOI"  # frozen from one reference run
    assert re.fullmatch(r"[A-Za-z0-9]{8}", value)


def test_primitive_array_dummy_has_three_seeded_elements():
    plan = synthesize_dummy_value("int[]", 5)
    assert plan.type_name == "int[]"
    assert plan.value == (-746282442, -571964602, 1740449745)  # frozen


def test_object_dummy_picks_fewest_parameter_constructor():
    text = """
framework <lib.Obj: void <init>(int, int, int)>;
framework <lib.Obj: void <init>(boolean)>;
class A {}
"""
    program = parse_program(text).program
    plan = synthesize_dummy_value("lib.Obj", 1, program)
    assert isinstance(plan, ObjectDummy)
    assert plan.ctor.arity == 1
    assert plan.ctor.param_types == ("boolean",)
    assert isinstance(plan.ctor_args[0], PrimDummy)


def test_unknown_framework_object_is_a_bare_fresh_instance():
    plan = synthesize_dummy_value("android.content.Context", 3)
    assert plan == ObjectDummy("android.content.Context", None, ())


# ============================================================
# lower_field_access
# ============================================================


def test_trace_without_field_loads_is_unchanged(netstats):
    cg, icfg = graphs_for(netstats)
    site = _site(netstats, "getSystemService")
    trace = infer_caller_context(netstats, cg, icfg, site)
    lowered = lower_field_access(trace, netstats, cg, icfg)
    assert lowered is trace


def test_field_stashed_context_becomes_a_local(fields_program):
    cg, icfg = graphs_for(fields_program)
    site = _site(fields_program, "getActiveNetworkInfo")
    (variant,) = enumerate_slices(fields_program, cg, icfg, site)
    raw_kinds = [type(s).__name__ for _, s in variant.trace.statements]
    assert "AssignFieldLoad" in raw_kinds
    lowered = lower_field_access(
        variant.trace, fields_program, cg, icfg, keep_vars=variant.roots()
    )
    kinds = [type(s).__name__ for _, s in lowered.statements]
    assert kinds == ["AssignInvoke", "AssignCast"]  # the load is gone
    # the service read now hangs off an environment-context local
    (term,) = lowered.terminals.values()
    assert isinstance(term, DummyTerminal)
    assert term.plan.class_name == "android.content.Context"
    assert lowered.invariant_violations((lowered.receiver_var,)) == []


def test_unassigned_field_becomes_dummy(fields_program):
    from slicegen.ir import pretty_print

    text = pretty_print(fields_program)
    mutated = text.replace(
        "    $r0.<com.comment.one.h.a: android.content.Context n> = $r1;\n", ""
    )
    program = parse_program(mutated).program
    cg, icfg = graphs_for(program)
    site = _site(program, "getActiveNetworkInfo")
    (variant,) = enumerate_slices(program, cg, icfg, site)
    lowered = lower_field_access(
        variant.trace, program, cg, icfg, keep_vars=variant.roots()
    )
    terms = list(lowered.terminals.values())
    assert any(
        isinstance(t, DummyTerminal) and t.cause == "field-unassigned" for t in terms
    )


def test_two_field_loads_lower_without_duplicating_shared_chains():
    text = """
framework static <fw.E: fw.Src source()>;
framework <fw.Src: java.lang.String name()>;
framework <fw.Src: int size()>;
framework static <fw.E: void use(java.lang.String, int)>;
class app.Holder {
  field java.lang.String tag;
  field int count;
  void fill() {
    $r0 := @this: app.Holder;
    $s = staticinvoke <fw.E: fw.Src source()>();
    $n = virtualinvoke $s.<fw.Src: java.lang.String name()>();
    $c = virtualinvoke $s.<fw.Src: int size()>();
    $r0.<app.Holder: java.lang.String tag> = $n;
    $r0.<app.Holder: int count> = $c;
    return;
  }
  void probe() {
    $r0 := @this: app.Holder;
    $a = $r0.<app.Holder: java.lang.String tag>;
    $b = $r0.<app.Holder: int count>;
    staticinvoke <fw.E: void use(java.lang.String, int)>($a, $b);
    return;
  }
}
"""
    program = parse_program(text).program
    cg, icfg = graphs_for(program)
    site = _site(program, "use")
    (variant,) = enumerate_slices(program, cg, icfg, site)
    lowered = lower_field_access(
        variant.trace, program, cg, icfg, keep_vars=variant.roots()
    )
    # both loads replaced; the shared source() chain is lifted exactly once
    origins = [o for o, _ in lowered.statements]
    assert len(origins) == len(set(origins))
    callees = [s.callee.name for _, s in lowered.statements]
    assert callees.count("source") == 1
    assert set(callees) == {"source", "name", "size"}
    assert lowered.invariant_violations(()) == []


def test_parameter_with_two_call_sites_gives_one_variant_each():
    text = """
framework static <fw.E: fw.Dev left()>;
framework static <fw.E: fw.Dev right()>;
framework <fw.Dev: java.lang.String ping()>;
class app.TwoSites {
  static java.lang.String probe(fw.Dev) {
    $d := @parameter0: fw.Dev;
    $s = virtualinvoke $d.<fw.Dev: java.lang.String ping()>();
    return $s;
  }
  static void a() {
    $x = staticinvoke <fw.E: fw.Dev left()>();
    $r = staticinvoke <app.TwoSites: java.lang.String probe(fw.Dev)>($x);
    return;
  }
  static void b() {
    $y = staticinvoke <fw.E: fw.Dev right()>();
    $r = staticinvoke <app.TwoSites: java.lang.String probe(fw.Dev)>($y);
    return;
  }
}
"""
    program = parse_program(text).program
    cg, icfg = graphs_for(program)
    site = _site(program, "ping")
    variants = enumerate_slices(program, cg, icfg, site)
    assert len(variants) == 2
    producers = set()
    for v in variants:
        producers |= {
            s.callee.name for _, s in v.trace.statements if isinstance(s, AssignInvoke)
        }
    assert {"left", "right"} <= producers


def test_callee_with_two_returns_gives_one_variant_each():
    text = """
framework static <fw.E: boolean flag()>;
framework static <fw.E: fw.Dev left()>;
framework static <fw.E: fw.Dev right()>;
framework <fw.Dev: java.lang.String ping()>;
class app.TwoReturns {
  static fw.Dev pick() {
    $z = staticinvoke <fw.E: boolean flag()>();
    if $z goto L1;
    $a = staticinvoke <fw.E: fw.Dev left()>();
    return $a;
  L1:
    $b = staticinvoke <fw.E: fw.Dev right()>();
    return $b;
  }
  static void probe() {
    $d = staticinvoke <app.TwoReturns: fw.Dev pick()>();
    $s = virtualinvoke $d.<fw.Dev: java.lang.String ping()>();
    return;
  }
}
"""
    program = parse_program(text).program
    cg, icfg = graphs_for(program)
    site = _site(program, "ping")
    variants = enumerate_slices(program, cg, icfg, site)
    assert len(variants) == 2
    names = [
        {s.callee.name for _, s in v.trace.statements} for v in variants
    ]
    assert {"left"} in names and {"right"} in names


# ============================================================
# split_branches
# ============================================================


def test_straight_line_yields_one_trace(netstats):
    cg, icfg = graphs_for(netstats)
    site = _site(netstats, "queryDetailsForUid")
    traces = split_branches(netstats, cg, icfg, site)
    assert len(traces) == 1


def test_two_arm_receiver_yields_two_traces(branches):
    cg, icfg = graphs_for(branches)
    site = _site(branches, "ping")
    traces = split_branches(branches, cg, icfg, site)
    assert len(traces) == 2
    producers = [
        {s.callee.name for _, s in t.statements if isinstance(s, AssignInvoke)}
        for t in traces
    ]
    assert {"primary"} in producers and {"secondary"} in producers


def test_two_independent_branches_yield_four_traces(branches2x2):
    cg, icfg = graphs_for(branches2x2)
    site = _site(branches2x2, "echo")
    traces = split_branches(branches2x2, cg, icfg, site)
    # oracle: number of acyclic reverse paths with differing definitions
    # is the product of the independent choice points
    assert len(traces) == 2 * 2


def test_exponential_branch_fanout_is_capped():
    # ten stacked diamonds feeding one call: 2^10 paths, capped at 16
    parts = [
        "framework static <fw.E: boolean flag()>;",
        "framework static <fw.E: int a()>;",
        "framework static <fw.E: int b()>;",
        "framework static <fw.E: void useAll(int, int, int, int, int, "
        "int, int, int, int, int)>;",
        "class app.Wide { static void probe() {",
    ]
    for i in range(10):
        parts += [
            f"    $z{i} = staticinvoke <fw.E: boolean flag()>();",
            f"    if $z{i} goto T{i};",
            f"    $x{i} = staticinvoke <fw.E: int a()>();",
            f"    goto J{i};",
            f"  T{i}:",
            f"    $x{i} = staticinvoke <fw.E: int b()>();",
            f"  J{i}:",
        ]
    args = ", ".join(f"$x{i}" for i in range(10))
    parts.append(
        "    staticinvoke <fw.E: void useAll(int, int, int, int, int, "
        f"int, int, int, int, int)>({args});"
    )
    parts.append("    return; } }")
    program = parse_program("\n".join(parts)).program
    cg, icfg = graphs_for(program)
    site = _site(program, "useAll")
    variants = enumerate_slices(program, cg, icfg, site)
    assert len(variants) == SliceConfig().branch_cap
    for v in variants:
        assert v.trace.invariant_violations(v.roots()) == []


def test_branch_cap_truncates_deterministically(branches2x2):
    cg, icfg = graphs_for(branches2x2)
    site = _site(branches2x2, "echo")
    config = SliceConfig(branch_cap=3)
    capped = split_branches(branches2x2, cg, icfg, site, config)
    full = split_branches(branches2x2, cg, icfg, site)
    assert len(capped) == 3
    for a, b in zip(capped, full):
        assert [s.render() for _, s in a.statements] == [
            s.render() for _, s in b.statements
        ]


def test_app_allocation_pulls_its_constructor_into_the_slice():
    text = """
framework <lib.Box: void <init>(int)>;
framework <lib.Box: java.lang.String label()>;
class app.Maker {
  static void probe() {
    $b = new lib.Box;
    virtualinvoke $b.<lib.Box: void <init>(int)>(5);
    $s = virtualinvoke $b.<lib.Box: java.lang.String label()>();
    return;
  }
}
"""
    program = parse_program(text).program
    cg, icfg = graphs_for(program)
    site = _site(program, "label")
    (variant,) = enumerate_slices(program, cg, icfg, site)
    kinds = [type(s).__name__ for _, s in variant.trace.statements]
    assert kinds == ["AssignNew", "InvokeVoid"]  # allocation plus <init>
    ctor = variant.trace.statements[1][1]
    assert ctor.callee.name == "<init>" and ctor.args == (Const("int", 5),)


def test_static_framework_field_is_a_receiverless_target():
    text = """
class app.Reader {
  static void probe() {
    $v = <android.os.Build$VERSION: int SDK_INT>;
    return;
  }
}
"""
    program = parse_program(text).program
    (site,) = locate_api_call_sites(program)
    assert site.receiver_var is None
    assert site.target.name == "SDK_INT"
    cg, icfg = graphs_for(program)
    (variant,) = enumerate_slices(program, cg, icfg, site)
    assert variant.trace.statements == [] and variant.bindings == ()


def test_overloads_are_distinct_targets():
    text = """
framework <fw.Log: void log(java.lang.String)>;
framework <fw.Log: void log(java.lang.String, int)>;
framework static <fw.E: fw.Log logger()>;
class app.Over {
  static void probe() {
    $l = staticinvoke <fw.E: fw.Log logger()>();
    virtualinvoke $l.<fw.Log: void log(java.lang.String)>("a");
    virtualinvoke $l.<fw.Log: void log(java.lang.String, int)>("b", 2);
    return;
  }
}
"""
    program = parse_program(text).program
    one_arg = next(
        s for s in program.framework_api_list
        if s.name == "log" and s.arity == 1
    )
    sites = locate_api_call_sites(program, {one_arg})
    assert len(sites) == 1
    assert sites[0].target.arity == 1


# ============================================================
# Determinism
# ============================================================


def test_identical_inputs_give_identical_serialized_traces(netstats):
    cg, icfg = graphs_for(netstats)
    site = _site(netstats, "queryDetailsForUid")
    one = enumerate_slices(netstats, cg, icfg, site)[0]
    two = enumerate_slices(netstats, cg, icfg, site)[0]
    import json

    assert json.dumps(one.trace.to_json()) == json.dumps(two.trace.to_json())
