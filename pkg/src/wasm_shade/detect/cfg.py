"""Rule-based detection of hashing loops over an interprocedural CFG.

Bodies are lifted into basic blocks of categorised ops. Loops are the
non-trivial strongly connected components of each function's flow graph,
plus recursion cycles in the call graph. A loop's op counts include every
function it can call, directly or through the table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from ..wasm import opcodes as ops

XOR, ROTATE, SHIFT, ADDMUL, LOAD, STORE, OTHER = (
    "xor", "rotate", "shift", "add/mul", "load", "store", "other")
HASHING = (XOR, ROTATE, SHIFT)
UNBOUNDED = float("inf")

_LOADS = frozenset(n for _, n, *_ in ops.LOADS)
_STORES = frozenset(n for _, n, *_ in ops.STORES)
_TERMINATORS = frozenset(("block", "loop", "if", "else", "end", "br", "br_if", "br_table", "return",
                          "unreachable"))
_CONTINUE_CMP = {"lt_u": 0, "lt_s": 0, "le_u": 1, "le_s": 1, "ne": 0}
_EXIT_CMP = {"ge_u": 0, "ge_s": 0, "gt_u": 1, "gt_s": 1, "eq": 0}


def categorize(op: str) -> str:
    if op in _LOADS:
        return LOAD
    if op in _STORES:
        return STORE
    _, _, name = op.partition(".")
    if name == "xor":
        return XOR
    if name in ("rotl", "rotr"):
        return ROTATE
    if name in ("shl", "shr_s", "shr_u"):
        return SHIFT
    if name in ("add", "sub", "mul"):
        return ADDMUL
    return OTHER


def _arity(ins, m):
    info = ops.BY_NAME[ins.op]
    if info.params is not None:
        return len(info.params)
    if ins.op == "call":
        return len(m.func_type(ins.imm[0]).params)
    if ins.op == "call_indirect":
        return len(m.types[ins.imm[0]].params) + 1
    return {"if": 1, "br_if": 1, "br_table": 1, "drop": 1, "select": 3, "local.set": 1,
            "local.tee": 1, "global.set": 1}.get(ins.op, 0)


@dataclass
class BasicBlock:
    id: int
    start: int  # pc of the first instruction
    ops: list  # (category, mnemonic, arity)
    terminator: str
    succs: list = field(default_factory=list)
    calls: list = field(default_factory=list)  # callee function indices
    loop_header: bool = False


@dataclass
class IRFunction:
    index: int
    blocks: list
    loop_trips: dict  # header block id -> estimated trip count (inf when unknown)


@dataclass
class IRProgram:
    functions: dict  # absolute function index -> IRFunction
    imported: int


def _frames(body):
    """For each pc, the stack of enclosing (opener pc, op) frames before it executes."""
    stack, out, ends, elses = [], [], {}, {}
    for pc, ins in enumerate(body):
        out.append(tuple(stack))
        if ins.op in ops.CONTROL_OPEN:
            stack.append(pc)
        elif ins.op == "else":
            elses[stack[-1]] = pc
        elif ins.op == "end" and stack:
            ends[stack.pop()] = pc
    return out, ends, elses


def _table_targets(m):
    """type index -> defined functions reachable through the table with that signature."""
    out = {}
    for seg in m.elements:
        for f in seg.funcs:
            sig = m.func_type(f)
            for t, ft in enumerate(m.types):
                if ft == sig:
                    out.setdefault(t, set()).add(f)
    return out


def _trip(body, pc, loop_pc, target_is_loop):
    """Trip estimate from the compare feeding a conditional branch at ``pc``."""
    if pc < 3 or body[pc].op != "br_if":
        return UNBOUNDED
    a, b, cmp = body[pc - 3], body[pc - 2], body[pc - 1]
    kind, _, rel = cmp.op.partition(".")
    if kind not in ("i32", "i64"):
        return UNBOUNDED
    table = _CONTINUE_CMP if target_is_loop else _EXIT_CMP
    if rel not in table or a.op != "local.get" or not b.op.endswith(".const"):
        return UNBOUNDED
    bound = b.imm[0] + table[rel]
    return bound if bound >= 0 else UNBOUNDED


def lift_function(m, def_idx, table_targets):
    body = m.functions[def_idx].body
    frames, ends, elses = _frames(body)
    n = len(body)
    # leaders: entry, every control instruction, and whatever follows one
    leaders = {0}
    for pc, ins in enumerate(body):
        if ins.op in _TERMINATORS:
            leaders.add(pc)
            if pc + 1 < n:
                leaders.add(pc + 1)
    starts = sorted(leaders)
    block_of = {}
    blocks = []
    for bid, s in enumerate(starts):
        e = starts[bid + 1] if bid + 1 < len(starts) else n
        for pc in range(s, e):
            block_of[pc] = bid
        seq = body[s:e]
        calls = []
        for ins in seq:
            if ins.op == "call":
                calls.append(ins.imm[0])
            elif ins.op == "call_indirect":
                calls.extend(sorted(table_targets.get(ins.imm[0], ())))
        blocks.append(BasicBlock(bid, s, [(categorize(i.op), i.op, _arity(i, m)) for i in seq],
                                 seq[-1].op, calls=calls))

    def target(pc, label):
        fr = frames[pc]
        if label >= len(fr):
            return None  # function exit
        opener = fr[-1 - label]
        if body[opener].op == "loop":
            return opener + 1
        return ends[opener]

    trips = {}
    for b in blocks:
        last = b.start + len(b.ops) - 1
        ins = body[last]
        op = ins.op
        succ = []
        if op in ("block", "loop"):
            succ = [last + 1]
        elif op == "if":
            succ = [last + 1, elses[last] + 1 if last in elses else ends[last]]
        elif op == "else":
            opener = frames[last][-1]
            succ = [ends[opener]]
        elif op == "end":
            succ = [last + 1] if last + 1 < n else []
        elif op in ("br", "br_if", "br_table"):
            labels = ins.imm if op == "br_table" else (ins.imm[0],)
            for lab in labels:
                t = target(last, lab)
                if t is not None:
                    succ.append(t)
                    opener = frames[last][-1 - lab]
                    if body[opener].op == "loop":
                        hdr = block_of[t]
                        trip = _trip(body, last, opener, True)
                        trips[hdr] = max(trips.get(hdr, 0), trip)
            if op == "br_if":
                succ.append(last + 1)
                # exit-style counters: a compare guarding a branch out of the innermost loop
                fr = frames[last]
                loops = [o for o in fr if body[o].op == "loop"]
                if loops:
                    inner = loops[-1]
                    lab = ins.imm[0]
                    if lab < len(fr) and fr[-1 - lab] < inner:
                        hdr = block_of[inner + 1]
                        trip = _trip(body, last, inner, False)
                        if trip != UNBOUNDED:
                            trips.setdefault(("exit", hdr), trip)
        elif op in ("return", "unreachable"):
            succ = []
        else:
            succ = [last + 1] if last + 1 < n else []
        b.succs = sorted({block_of[s] for s in succ if s < n})
    for b in blocks:
        if b.start > 0 and body[b.start - 1].op == "loop":
            b.loop_header = True
    # a loop that only continues unconditionally takes its bound from an exit compare
    final = {}
    for hdr, t in trips.items():
        if isinstance(hdr, tuple):
            continue
        exit_t = trips.get(("exit", hdr))
        final[hdr] = exit_t if t == UNBOUNDED and exit_t is not None and _only_br(blocks, hdr, body) else t
    return IRFunction(m.num_imported_funcs + def_idx, blocks, final)


def _only_br(blocks, hdr, body):
    """True when no conditional branch jumps back to ``hdr``."""
    return not any(hdr in b.succs and b.terminator in ("br_if", "br_table") for b in blocks)


def lift_to_ir(m) -> IRProgram:
    targets = _table_targets(m)
    funcs = {}
    for d in range(len(m.functions)):
        f = lift_function(m, d, targets)
        funcs[f.index] = f
    return IRProgram(funcs, m.num_imported_funcs)


def build_icfg(p: IRProgram) -> nx.DiGraph:
    """Nodes are (function, block); edges carry kind "flow" or "call"."""
    g = nx.DiGraph()
    for fi, f in p.functions.items():
        for b in f.blocks:
            g.add_node((fi, b.id), block=b, header=b.loop_header,
                       trip=f.loop_trips.get(b.id))
        for b in f.blocks:
            for s in b.succs:
                g.add_edge((fi, b.id), (fi, s), kind="flow")
            for c in b.calls:
                if c in p.functions:
                    g.add_edge((fi, b.id), (c, 0), kind="call")
    return g


@dataclass(frozen=True)
class Thresholds:
    r_xor: int = 6
    r_mem: int = 4
    r_iter: int = 16


@dataclass(frozen=True)
class LoopFinding:
    function: int
    blocks: tuple
    hashing: int
    memory: int
    trip: float
    groups: int
    recursive: bool = False

    def to_json(self):
        return {"function": self.function, "start_block": self.blocks[0], "hashing_ops": self.hashing,
                "memory_ops": self.memory, "trip": None if self.trip == UNBOUNDED else self.trip,
                "groups_satisfied": self.groups, "recursive": self.recursive}


def _callee_closure(g, funcs):
    calls = nx.DiGraph()
    for u, v, k in g.edges(data="kind"):
        if k == "call":
            calls.add_edge(u[0], v[0])
    seen, todo = set(), list(funcs)
    while todo:
        f = todo.pop()
        if f in seen:
            continue
        seen.add(f)
        if f in calls:
            todo.extend(calls.successors(f))
    return seen, calls


def find_loops(g: nx.DiGraph, th: Thresholds = Thresholds()) -> list:
    """Every cycle with at least one hashing-class op, scored against the three rule groups."""
    flow = nx.DiGraph()
    flow.add_nodes_from(g.nodes)
    flow.add_edges_from((u, v) for u, v, k in g.edges(data="kind") if k == "flow")
    _, calls = _callee_closure(g, ())
    func_nodes = {}
    for node in g.nodes:
        func_nodes.setdefault(node[0], []).append(node)

    def count(nodes, extra_funcs):
        reached, _ = _callee_closure(g, extra_funcs)
        members = set(nodes)
        for f in reached:
            members.update(func_nodes.get(f, ()))
        h = mem = 0
        for node in members:
            for cat, _, _ in g.nodes[node]["block"].ops:
                h += cat in HASHING
                mem += cat in (LOAD, STORE)
        return h, mem

    findings = []
    for comp in nx.strongly_connected_components(flow):
        nodes = sorted(comp)
        if len(nodes) == 1 and not flow.has_edge(nodes[0], nodes[0]):
            continue
        callees = {c for n in nodes for c in g.nodes[n]["block"].calls}
        h, mem = count(nodes, callees)
        trips = [g.nodes[n]["trip"] for n in nodes if g.nodes[n]["header"] and g.nodes[n]["trip"] is not None]
        trip = max(trips) if trips else UNBOUNDED
        findings.append((nodes[0][0], tuple(n[1] for n in nodes), h, mem, trip, False))
    for comp in nx.strongly_connected_components(calls):
        fs = sorted(comp)
        if len(fs) == 1 and not calls.has_edge(fs[0], fs[0]):
            continue
        h, mem = count([], fs)
        findings.append((fs[0], (0,), h, mem, UNBOUNDED, True))
    out = []
    for f, blocks, h, mem, trip, rec in findings:
        if h == 0:
            continue
        groups = (h >= th.r_xor) + (mem >= th.r_mem) + (trip >= th.r_iter)
        out.append(LoopFinding(f, blocks, h, mem, trip, groups, rec))
    out.sort(key=lambda x: (-x.groups, -x.hashing, x.function, x.blocks))
    return out


def mining_probability(g: nx.DiGraph, th: Thresholds = Thresholds()):
    """Fraction of rule groups met by the best hashing-shaped loop, plus that loop."""
    loops = find_loops(g, th)
    if not loops:
        return 0.0, None
    best = loops[0]
    return best.groups / 3.0, best
