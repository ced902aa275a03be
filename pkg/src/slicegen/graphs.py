"""Call graph, per-method control-flow graphs and the inter-procedural CFG.

Construction is purely syntactic: callees are taken verbatim from the
signature at each call site (no class-hierarchy or points-to analysis),
and framework callees are boundary nodes that contribute no call/return
edges.  Dead blocks are kept and flagged so statement indices stay stable
for the slicer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .ir import (
    Goto,
    If,
    IRMethod,
    IRProgram,
    Label,
    MethodSignature,
    Return,
    ReturnVoid,
    Statement,
    callee_of,
)

# ============================================================
# Call graph
# ============================================================


@dataclass(frozen=True)
class CallEdge:
    caller: MethodSignature
    site_index: int
    callee: MethodSignature


@dataclass(frozen=True)
class CallGraph:
    edges: tuple[CallEdge, ...]
    # exact inverse of edges: callee -> call sites, in edge order
    reverse: dict[MethodSignature, tuple[CallEdge, ...]] = field(
        default_factory=dict, compare=False
    )

    def callers_of(self, callee: MethodSignature) -> tuple[CallEdge, ...]:
        return self.reverse.get(callee, ())


def build_call_graph(program: IRProgram) -> CallGraph:
    """One edge per syntactic call site, in (class, method, index) order."""
    edges: list[CallEdge] = []
    for cls_name in sorted(program.classes):
        for method in program.classes[cls_name].methods:
            for i, stmt in enumerate(method.body):
                callee = callee_of(stmt)
                if callee is not None:
                    edges.append(CallEdge(method.signature, i, callee))
    rev: dict[MethodSignature, list[CallEdge]] = {}
    for e in edges:
        rev.setdefault(e.callee, []).append(e)
    return CallGraph(tuple(edges), {k: tuple(v) for k, v in rev.items()})


# ============================================================
# Control-flow graphs
# ============================================================


@dataclass(frozen=True)
class BasicBlock:
    id: int
    start: int  # first statement index
    end: int  # one past the last statement index (start == end for virtual exit)
    succs: tuple[int, ...]
    preds: tuple[int, ...]
    dead: bool

    def indices(self) -> range:
        return range(self.start, self.end)


@dataclass(frozen=True)
class CFG:
    method: MethodSignature
    blocks: tuple[BasicBlock, ...]
    entry: int
    exit: int
    block_of: tuple[int, ...]  # statement index -> block id

    def stmt_preds(self, index: int) -> tuple[int, ...]:
        """Intra-method statement-level predecessors of a statement."""
        block = self.blocks[self.block_of[index]]
        if index > block.start:
            return (index - 1,)
        preds = []
        for pid in block.preds:
            pb = self.blocks[pid]
            if pb.end > pb.start:
                preds.append(pb.end - 1)
        return tuple(preds)


def _leaders(body: tuple[Statement, ...]) -> list[int]:
    labels = {s.name: i for i, s in enumerate(body) if isinstance(s, Label)}
    leaders = {0} if body else set()
    for i, stmt in enumerate(body):
        if isinstance(stmt, (If, Goto)):
            if stmt.target in labels:
                leaders.add(labels[stmt.target])
            if i + 1 < len(body):
                leaders.add(i + 1)
        elif isinstance(stmt, (Return, ReturnVoid)):
            if i + 1 < len(body):
                leaders.add(i + 1)
        elif isinstance(stmt, Label):
            leaders.add(i)
    return sorted(leaders)


def build_cfg(method: IRMethod) -> CFG:
    """Straight-line code yields one block; every If is a two-way split.
    A virtual exit block (no statements) collects all returns and the
    final fallthrough; unreachable blocks are flagged dead, not removed."""
    body = method.body
    labels = {s.name: i for i, s in enumerate(body) if isinstance(s, Label)}
    leaders = _leaders(body)
    bounds = list(zip(leaders, leaders[1:] + [len(body)]))
    block_of = [0] * len(body)
    for bid, (start, end) in enumerate(bounds):
        for i in range(start, end):
            block_of[i] = bid

    exit_id = len(bounds)
    succs: list[list[int]] = [[] for _ in range(exit_id + 1)]
    for bid, (start, end) in enumerate(bounds):
        last = body[end - 1]
        if isinstance(last, (Return, ReturnVoid)):
            succs[bid].append(exit_id)
        elif isinstance(last, Goto):
            if last.target in labels:
                succs[bid].append(block_of[labels[last.target]])
        elif isinstance(last, If):
            if end < len(body):
                succs[bid].append(block_of[end])
            else:
                succs[bid].append(exit_id)
            if last.target in labels:
                tgt = block_of[labels[last.target]]
                if tgt not in succs[bid]:
                    succs[bid].append(tgt)
        else:
            # plain fallthrough; falling off the end reaches the exit
            succs[bid].append(block_of[end] if end < len(body) else exit_id)

    preds: list[list[int]] = [[] for _ in range(exit_id + 1)]
    for bid, out in enumerate(succs):
        for s in out:
            preds[s].append(bid)

    reachable: set[int] = set()
    work = [0] if bounds else [exit_id]
    while work:
        b = work.pop()
        if b in reachable:
            continue
        reachable.add(b)
        work.extend(succs[b])

    blocks = []
    for bid, (start, end) in enumerate(bounds):
        blocks.append(
            BasicBlock(
                bid,
                start,
                end,
                tuple(succs[bid]),
                tuple(preds[bid]),
                dead=bid not in reachable,
            )
        )
    end_of_body = len(body)
    blocks.append(
        BasicBlock(
            exit_id,
            end_of_body,
            end_of_body,
            (),
            tuple(preds[exit_id]),
            dead=exit_id not in reachable,
        )
    )
    return CFG(method.signature, tuple(blocks), 0, exit_id, tuple(block_of))


# ============================================================
# Inter-procedural CFG
# ============================================================


@dataclass(frozen=True)
class ICFG:
    cfgs: dict[MethodSignature, CFG]
    # call edge: (caller, call-site statement index) -> callee entry
    call_edges: tuple[tuple[MethodSignature, int, MethodSignature], ...]
    # return edge: callee exit -> (caller, call-site statement index)
    return_edges: tuple[tuple[MethodSignature, MethodSignature, int], ...]

    def cfg(self, sig: MethodSignature) -> CFG:
        return self.cfgs[sig]

    def node_count(self) -> int:
        return sum(len(c.blocks) for c in self.cfgs.values())

    def sites_calling(self, callee: MethodSignature) -> tuple[tuple[MethodSignature, int], ...]:
        return tuple((c, i) for c, i, k in self.call_edges if k == callee)


def build_icfg(program: IRProgram, cg: CallGraph) -> ICFG:
    """Join per-method CFGs with paired call/return edges.  Framework
    callees are boundary nodes: their call sites get no edges."""
    cfgs = {m.signature: build_cfg(m) for m in program.iter_methods()}
    call_edges = []
    return_edges = []
    for edge in cg.edges:
        if program.lookup_method(edge.callee) is None:
            continue  # framework boundary
        call_edges.append((edge.caller, edge.site_index, edge.callee))
        return_edges.append((edge.callee, edge.caller, edge.site_index))
    return ICFG(cfgs, tuple(call_edges), tuple(return_edges))


def reverse_reachable_stmts(
    icfg: ICFG,
    start: tuple[MethodSignature, int],
    return_stmts: Optional[dict[MethodSignature, tuple[int, ...]]] = None,
    limit: int = 100000,
) -> set[tuple[MethodSignature, int]]:
    """All (method, statement) pairs backward-reachable from ``start``.

    Walks intra-method predecessor edges; stepping back over a call site
    to an app-defined callee also enters the callee at its return
    statements (return edge in reverse), and stepping back past a method
    entry continues at every caller's call site (call edge in reverse).
    Visited-set traversal, so recursive programs terminate.
    """
    into_callee: dict[tuple[MethodSignature, int], list[MethodSignature]] = {}
    for callee, caller, site in icfg.return_edges:
        into_callee.setdefault((caller, site), []).append(callee)
    out_to_callers: dict[MethodSignature, list[tuple[MethodSignature, int]]] = {}
    for caller, site, callee in icfg.call_edges:
        out_to_callers.setdefault(callee, []).append((caller, site))

    seen: set[tuple[MethodSignature, int]] = set()
    work = [start]
    while work and len(seen) < limit:
        method, idx = work.pop()
        if (method, idx) in seen:
            continue
        seen.add((method, idx))
        cfg = icfg.cfgs[method]
        for p in cfg.stmt_preds(idx):
            work.append((method, p))
            # return edge, reversed: continue inside earlier callees
            for callee in into_callee.get((method, p), ()):
                if return_stmts and callee in return_stmts:
                    for r in return_stmts[callee]:
                        work.append((callee, r))
        if idx == 0:
            # call edge, reversed: continue at every caller
            for caller_site in out_to_callers.get(method, ()):
                work.append(caller_site)
    return seen


# ============================================================
# DOT export
# ============================================================


def call_graph_to_dot(cg: CallGraph) -> str:
    lines = ["digraph callgraph {"]
    for e in cg.edges:
        lines.append(f'  "{e.caller}" -> "{e.callee}" [label="#{e.site_index}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def cfg_to_dot(cfg: CFG) -> str:
    lines = [f'digraph "cfg {cfg.method}" {{']
    for b in cfg.blocks:
        shape = "doublecircle" if b.id in (cfg.entry, cfg.exit) else "box"
        dead = " (dead)" if b.dead else ""
        label = f"B{b.id} [{b.start}:{b.end}){dead}"
        lines.append(f'  b{b.id} [shape={shape}, label="{label}"];')
    for b in cfg.blocks:
        for s in b.succs:
            lines.append(f"  b{b.id} -> b{s};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def icfg_to_dot(icfg: ICFG) -> str:
    lines = ["digraph icfg {"]
    for sig in sorted(icfg.cfgs, key=str):
        cfg = icfg.cfgs[sig]
        lines.append(f'  subgraph "cluster_{sig}" {{')
        lines.append(f'    label="{sig}";')
        for b in cfg.blocks:
            lines.append(f'    "{sig}#b{b.id}" [shape=box, label="B{b.id}"];')
        for b in cfg.blocks:
            for s in b.succs:
                lines.append(f'    "{sig}#b{b.id}" -> "{sig}#b{s}";')
        lines.append("  }")
    for caller, site, callee in icfg.call_edges:
        src = icfg.cfgs[caller].block_of[site]
        lines.append(
            f'  "{caller}#b{src}" -> "{callee}#b0" [style=dashed, label="call"];'
        )
    for callee, caller, site in icfg.return_edges:
        dst = icfg.cfgs[caller].block_of[site]
        exit_id = icfg.cfgs[callee].exit
        lines.append(
            f'  "{callee}#b{exit_id}" -> "{caller}#b{dst}" [style=dashed, label="ret"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
