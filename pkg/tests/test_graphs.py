"""Call graph, CFG and ICFG construction."""

from slicegen.graphs import (
    build_call_graph,
    build_cfg,
    build_icfg,
    call_graph_to_dot,
    cfg_to_dot,
    icfg_to_dot,
    reverse_reachable_stmts,
)
from slicegen.ir import is_invoke
from slicegen.parser import parse_program

from conftest import graphs_for


def _method(program, name):
    for m in program.iter_methods():
        if m.signature.name == name:
            return m
    raise AssertionError(name)


# ============================================================
# Call graph
# ============================================================


def test_no_invokes_no_edges():
    program = parse_program("class A { void m() { $a = 1; return; } }").program
    assert build_call_graph(program).edges == ()


def test_netstats_fixture_call_edges(netstats):
    cg = build_call_graph(netstats)
    flow = _method(netstats, "getCurAppFlow").signature
    pairs = {(e.caller.name, e.site_index, e.callee.name) for e in cg.edges}
    assert ("getCurAppFlow", 1, "getNetworkStatsManager") in pairs
    assert ("getCurAppFlow", 3, "getUid") in pairs
    # reverse index is the exact inverse of the edge set
    for callee, sites in cg.reverse.items():
        for e in sites:
            assert e in cg.edges and e.callee == callee
    assert sum(len(v) for v in cg.reverse.values()) == len(cg.edges)


def test_three_method_chain_has_two_edges_oracle():
    text = """
framework static <fw.E: int leaf()>;
class X {
  static int a() { $v = staticinvoke <X: int b()>(); return $v; }
  static int b() { $v = staticinvoke <X: int c()>(); return $v; }
  static int c() { $v = staticinvoke <fw.E: int leaf()>(); return $v; }
}
"""
    program = parse_program(text).program
    cg = build_call_graph(program)
    # oracle: brute-force scan over every statement for invoke kinds
    expected = set()
    for method in program.iter_methods():
        for i, stmt in enumerate(method.body):
            if is_invoke(stmt):
                expected.add((method.signature, i, stmt.callee))
    assert {(e.caller, e.site_index, e.callee) for e in cg.edges} == expected
    app_edges = [e for e in cg.edges if program.lookup_method(e.callee)]
    assert len(app_edges) == 2
    c_sig = _method(program, "c").signature
    assert {e.caller.name for e in cg.callers_of(c_sig)} == {"b"}


# ============================================================
# CFG
# ============================================================


def test_straight_line_method_is_one_block():
    text = "class A { static void m() { $a = 1; $b = 2; $c = 3; $d = 4; return; } }"
    method = parse_program(text).program.classes["A"].methods[0]
    cfg = build_cfg(method)
    real = [b for b in cfg.blocks if b.end > b.start]
    assert len(real) == 1
    assert real[0].succs == (cfg.exit,)


def test_if_else_join_is_a_diamond():
    text = """
class A {
  static void m() {
    $z = true;
    if $z goto L1;
    $a = 1;
    goto L2;
  L1:
    $a = 2;
  L2:
    $b = (int) $a;
    return;
  }
}
"""
    method = parse_program(text).program.classes["A"].methods[0]
    cfg = build_cfg(method)
    real = [b for b in cfg.blocks if b.end > b.start]
    assert len(real) == 4
    # hand-simulated control transfer: head splits, both arms join
    head, fall, taken, join = real
    assert set(head.succs) == {fall.id, taken.id}
    assert fall.succs == (join.id,)
    assert taken.succs == (join.id,)
    assert set(join.preds) == {fall.id, taken.id}


def test_unreachable_code_after_return_is_flagged_dead():
    text = "class A { static void m() { return; $a = 1; } }"
    method = parse_program(text).program.classes["A"].methods[0]
    cfg = build_cfg(method)
    dead = [b for b in cfg.blocks if b.dead and b.end > b.start]
    assert len(dead) == 1
    assert dead[0].start == 1


def test_every_statement_in_exactly_one_block(netstats):
    for method in netstats.iter_methods():
        cfg = build_cfg(method)
        for i in range(len(method.body)):
            owners = [b for b in cfg.blocks if i in b.indices()]
            assert len(owners) == 1
            assert owners[0].id == cfg.block_of[i]
        assert cfg.blocks[cfg.entry].preds == ()


# ============================================================
# ICFG
# ============================================================


def test_single_method_icfg_equals_its_cfg():
    text = "class A { static void m() { $a = 1; return; } }"
    program = parse_program(text).program
    cg, icfg = build_call_graph(program), None
    icfg = build_icfg(program, cg)
    assert icfg.call_edges == () and icfg.return_edges == ()
    (sig,) = icfg.cfgs
    assert icfg.cfgs[sig] == build_cfg(program.classes["A"].methods[0])


def test_call_and_return_edges_are_paired_and_framework_is_boundary(netstats):
    cg, icfg = graphs_for(netstats)
    assert len(icfg.call_edges) == len(icfg.return_edges)
    calls = {(caller, site, callee) for caller, site, callee in icfg.call_edges}
    rets = {(caller, site, callee) for callee, caller, site in icfg.return_edges}
    assert calls == rets
    # framework callees contribute no edges
    app_edges = [e for e in cg.edges if netstats.lookup_method(e.callee)]
    assert len(icfg.call_edges) == len(app_edges) == 2
    # node count: one node per block
    assert icfg.node_count() == sum(len(c.blocks) for c in icfg.cfgs.values())


def test_reverse_walk_reaches_callee_return_through_return_edge(netstats):
    cg, icfg = graphs_for(netstats)
    flow = _method(netstats, "getCurAppFlow")
    gnsm = _method(netstats, "getNetworkStatsManager")
    returns = {
        m.signature: m.return_indices() for m in netstats.iter_methods()
    }
    seen = reverse_reachable_stmts(icfg, (flow.signature, 4), returns)
    ret_idx = gnsm.return_indices()[0]
    assert (gnsm.signature, ret_idx) in seen
    # superset of the intra-method backward reach
    for i in range(4):
        assert (flow.signature, i) in seen


def test_recursive_reverse_walk_terminates(recursion_program):
    cg, icfg = graphs_for(recursion_program)
    spin = _method(recursion_program, "spin")
    returns = {
        m.signature: m.return_indices() for m in recursion_program.iter_methods()
    }
    seen = reverse_reachable_stmts(icfg, (spin.signature, 2), returns)
    assert len(seen) < 100  # bounded despite the cycle


# ============================================================
# DOT export determinism
# ============================================================


def test_dot_exports_are_deterministic(netstats):
    text = (graphs_for(netstats), graphs_for(netstats))
    (cg1, icfg1), (cg2, icfg2) = text
    assert call_graph_to_dot(cg1) == call_graph_to_dot(cg2)
    assert icfg_to_dot(icfg1) == icfg_to_dot(icfg2)
    method = next(netstats.iter_methods())
    assert cfg_to_dot(build_cfg(method)) == cfg_to_dot(build_cfg(method))
    assert call_graph_to_dot(cg1).startswith("digraph")
