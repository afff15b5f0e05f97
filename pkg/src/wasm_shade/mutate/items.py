"""Module-level additions and removals of items that no execution can reach."""

from __future__ import annotations

from ..wasm import Custom, Function, FuncType, Instr
from ..wasm import opcodes as ops
from .peephole import _random_const
from .structure import canonical_customs, nonempty_sections

MAX_BODY = 16  # instructions in a generated function, closing end included
_EXCLUDED = (".div", ".rem", "trunc_f", "load", "store", "memory.")


def _pure_ops():
    table = {}
    for info in ops.BY_NAME.values():
        if info.params is None or len(info.results) != 1 or info.imm != ops.NONE:
            continue
        if any(x in info.name for x in _EXCLUDED) or not info.params:
            continue
        table.setdefault(info.results[0], []).append(info)
    return {t: sorted(v, key=lambda i: i.code) for t, v in table.items()}


PURE_OPS = _pure_ops()


def _random_functype(rng, max_params=4):
    params = tuple(rng.choice(ops.VALTYPES) for _ in range(rng.randint(0, max_params)))
    results = (rng.choice(ops.VALTYPES),) if rng.random() < 0.75 else ()
    return FuncType(params, results)


def _expr(t, budget, params, rng):
    """Postfix instructions computing a value of type ``t`` in at most ``budget`` instructions."""
    leaves = [i for i, p in enumerate(params) if p == t]
    fitting = [i for i in PURE_OPS[t] if len(i.params) < budget]
    if not fitting or rng.random() < 0.25:
        if leaves and rng.random() < 0.6:
            return [Instr("local.get", (rng.choice(leaves),))]
        return [_random_const(t, rng)]
    info = rng.choice(fitting)
    out = []
    left = budget - 1
    for i, pt in enumerate(info.params):
        share = left // (len(info.params) - i)
        sub = _expr(pt, share, params, rng)
        out += sub
        left -= len(sub)
    return out + [Instr(info.name)]


def add_function(m, rng, params, num_imported):
    ft = _random_functype(rng, 3)
    if ft.results:
        code = _expr(ft.results[0], MAX_BODY - 1, ft.params, rng)
    else:
        code = [Instr("nop")]
    body = tuple(code) + (Instr("end"),)
    types = list(m.types)
    if ft in types:
        tidx = types.index(ft)
    else:
        tidx = len(types)
        types.append(ft)
    out = m.replace(types=tuple(types), functions=m.functions + (Function(tidx, (), body),))
    return canonical_customs(out), {"func": num_imported + len(m.functions), "type": tidx,
                                    "length": len(body)}


def add_type(m, rng, params, num_imported):
    ft = _random_functype(rng)
    out = m.replace(types=m.types + (ft,))
    return canonical_customs(out), {"type": len(m.types), "params": list(ft.params),
                                    "results": list(ft.results)}


def add_custom_section(m, rng, params, num_imported):
    name = params.get("name") or f"{rng.choice(('meta', 'build', 'producers.x', 'dbg', 'sig'))}.{rng.getrandbits(24):06x}"
    payload = bytes(rng.getrandbits(8) for _ in range(rng.randint(1, 32)))
    placement = rng.choice([0] + nonempty_sections(m))
    customs = list(m.customs)
    group = [i for i, c in enumerate(customs) if c.placement == placement]
    if group:
        pos = rng.randint(group[0], group[-1] + 1)
    else:
        pos = sum(1 for c in customs if c.placement < placement)
    customs.insert(pos, Custom(name, payload, placement))
    return m.replace(customs=tuple(customs)), {"name": name, "placement": placement,
                                              "index": pos, "size": len(payload)}


# removal --------------------------------------------------------------------

def _callees(body):
    return {ins.imm[0] for ins in body if ins.op == "call"}


def _live_functions(m):
    nimp = m.num_imported_funcs
    roots = {e.index for e in m.exports if e.kind == "func"}
    if m.start is not None:
        roots.add(m.start)
    for seg in m.elements:
        roots.update(seg.funcs)
    live, todo = set(), list(roots)
    while todo:
        f = todo.pop()
        if f in live:
            continue
        live.add(f)
        if f >= nimp:
            todo.extend(_callees(m.functions[f - nimp].body))
    return live


def removable(m):
    """Ordered (kind, index) candidates: customs, dead functions, unused types."""
    out = [("custom", i) for i in range(len(m.customs))]
    nimp = m.num_imported_funcs
    live = _live_functions(m)
    called_by = {}
    for d, f in enumerate(m.functions):
        for c in _callees(f.body):
            if c != nimp + d:
                called_by.setdefault(c, set()).add(nimp + d)
    for d in range(len(m.functions)):
        a = nimp + d
        if a not in live and not called_by.get(a):
            out.append(("func", a))
    used = {imp.desc for imp in m.imports if imp.kind == "func"}
    used |= {f.type_idx for f in m.functions}
    for f in m.functions:
        used |= {ins.imm[0] for ins in f.body if ins.op == "call_indirect"}
    out += [("type", t) for t in range(len(m.types)) if t not in used]
    return out


def _drop_function(m, a):
    nimp = m.num_imported_funcs

    def fix(i):
        return i - 1 if i > a else i

    funcs = []
    for d, f in enumerate(m.functions):
        if nimp + d == a:
            continue
        body = tuple(Instr("call", (fix(ins.imm[0]),)) if ins.op == "call" else ins for ins in f.body)
        funcs.append(f._replace(body=body))
    return m.replace(
        functions=tuple(funcs),
        exports=tuple(e._replace(index=fix(e.index)) if e.kind == "func" else e for e in m.exports),
        start=None if m.start is None else fix(m.start),
        elements=tuple(s._replace(funcs=tuple(fix(i) for i in s.funcs)) for s in m.elements),
    )


def _drop_type(m, t):
    def fix(i):
        return i - 1 if i > t else i

    funcs = []
    for f in m.functions:
        body = tuple(Instr("call_indirect", (fix(ins.imm[0]),)) if ins.op == "call_indirect" else ins
                     for ins in f.body)
        funcs.append(f._replace(type_idx=fix(f.type_idx), body=body))
    return m.replace(
        types=m.types[:t] + m.types[t + 1:],
        imports=tuple(i._replace(desc=fix(i.desc)) if i.kind == "func" else i for i in m.imports),
        functions=tuple(funcs),
    )


def remove_item(m, rng, params, num_imported):
    cands = removable(m)
    kinds = params.get("items")
    if kinds:
        cands = [c for c in cands if c[0] in kinds]
    if not cands:
        return m, None
    kind, idx = rng.choice(cands)
    if kind == "custom":
        out = m.replace(customs=m.customs[:idx] + m.customs[idx + 1:])
    elif kind == "func":
        out = _drop_function(m, idx)
    else:
        out = _drop_type(m, idx)
    return canonical_customs(out), {"item": kind, "index": idx}
