"""Control-structure rewrites: redundant blocks, swapped if arms, loop peeling."""

from __future__ import annotations

from ..wasm import Instr
from .structure import annotations, match_blocks, pops, replace_body, shift_labels

MUTATORS = ("wrap-block", "swap-if-arms", "peel-loop")
MAX_WRAP = 32  # instructions per wrapped region
MAX_PEEL = 64  # loop body size eligible for peeling


def _wrap_sites(m, d, ann, body):
    sites = []
    n = len(body)
    h, reach, depth, top = ann.height, ann.reachable, ann.depth, ann.top_after
    for i in range(n - 1):
        if not reach[i] or body[i].op in ("else", "end"):
            continue
        base, h0 = depth[i], h[i]
        for k in range(i, min(i + MAX_WRAP, n - 1)):
            if depth[k] < base:
                break
            if depth[k] == base:
                if body[k].op in ("else", "end") or not reach[k] or h[k] - pops(m, body[k]) < h0:
                    break
            e = k + 1
            if depth[e] != base or not reach[e]:
                continue
            grow = h[e] - h0
            if grow == 0:
                sites.append((d, i, e, ()))
            elif grow == 1 and top[k] is not None:
                sites.append((d, i, e, (top[k],)))
    return sites


def _apply_wrap(body, i, e, bt):
    return body[:i] + [Instr("block", bt)] + shift_labels(body[i:e]) + [Instr("end")] + body[e:]


def _apply_swap(body, pc, ends, elses):
    end = ends[pc]
    bt = body[pc].imm
    if pc in elses:
        then, other = body[pc + 1:elses[pc]], body[elses[pc] + 1:end]
    else:
        then, other = body[pc + 1:end], []
    return (body[:pc] + [Instr("i32.eqz"), Instr("if", bt)] + other + [Instr("else")] + then
            + [Instr("end")] + body[end + 1:])


def _apply_peel(body, pc, ends):
    """``loop B end`` becomes ``block block B' br 1 end loop B end end``.

    The first copy runs the first iteration; a continue inside it leaves the
    inner block and enters the loop, falling through exits both.
    """
    end = ends[pc]
    bt = body[pc].imm
    inner = body[pc + 1:end]
    copy = shift_labels(inner, threshold=1)
    return (body[:pc] + [Instr("block", bt), Instr("block", ())] + copy
            + [Instr("br", (1,)), Instr("end"), Instr("loop", bt)] + copy + [Instr("end"), Instr("end")]
            + body[end + 1:])


def code_motion(m, rng, params, num_imported):
    allowed = params.get("mutators") or MUTATORS
    unknown = set(allowed) - set(MUTATORS)
    if unknown:
        raise ValueError(f"unknown code-motion mutators: {sorted(unknown)}")
    if not m.functions:
        return m, None
    anns = annotations(m)
    sites = {k: [] for k in MUTATORS}
    for d, (f, ann) in enumerate(zip(m.functions, anns)):
        body = list(f.body)
        ends, _ = match_blocks(body)
        if "wrap-block" in allowed:
            sites["wrap-block"] += _wrap_sites(m, d, ann, body)
        for pc, ins in enumerate(body):
            if not ann.reachable[pc]:
                continue
            if ins.op == "if":
                sites["swap-if-arms"].append((d, pc))
            elif ins.op == "loop" and ends[pc] - pc - 1 <= MAX_PEEL:
                sites["peel-loop"].append((d, pc))
    usable = [k for k in MUTATORS if k in allowed and sites[k]]
    if not usable:
        return m, None
    mutator = rng.choice(usable)
    site = rng.choice(sites[mutator])
    d, pc = site[0], site[1]
    body = list(m.functions[d].body)
    desc = {"mutator": mutator, "func": num_imported + d, "pc": pc}
    if mutator == "wrap-block":
        body = _apply_wrap(body, pc, site[2], site[3])
        desc["end"] = site[2]
    else:
        ends, elses = match_blocks(body)
        body = _apply_swap(body, pc, ends, elses) if mutator == "swap-if-arms" else _apply_peel(body, pc, ends)
    return replace_body(m, d, body), desc
