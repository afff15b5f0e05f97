"""Structural helpers shared by the mutators."""

from __future__ import annotations

from ..wasm import Instr
from ..wasm import opcodes as ops
from ..wasm.validate import annotate_function

# section ids, used for custom-section placement
SECTION_FIELDS = {1: "types", 2: "imports", 3: "functions", 4: "tables", 5: "memories",
                  6: "globals", 7: "exports", 9: "elements", 10: "functions", 11: "data"}


def nonempty_sections(m) -> list:
    out = []
    for sid in range(1, 12):
        if sid == 8:
            if m.start is not None:
                out.append(sid)
        elif getattr(m, SECTION_FIELDS[sid]):
            out.append(sid)
    return out


def canonical_customs(m):
    """Move custom placements onto sections that will actually be emitted."""
    present = [0] + nonempty_sections(m)
    fixed = []
    for c in m.customs:
        p = max(s for s in present if s <= c.placement) if 0 <= c.placement <= 11 else c.placement
        fixed.append(c._replace(placement=p))
    fixed.sort(key=lambda c: c.placement)
    return m.replace(customs=tuple(fixed))


def match_blocks(body):
    """Map each block/loop/if pc to its end pc, and each if pc to its else pc."""
    ends, elses, stack = {}, {}, []
    for pc, ins in enumerate(body):
        if ins.op in ops.CONTROL_OPEN:
            stack.append(pc)
        elif ins.op == "else":
            elses[stack[-1]] = pc
        elif ins.op == "end" and stack:
            ends[stack.pop()] = pc
    return ends, elses


def shift_labels(instrs, threshold=0):
    """Increment branch labels that escape ``instrs`` when wrapped in one more frame.

    ``threshold`` is the number of frames enclosing the fragment that are
    themselves inside the new frame (labels below it stay local).
    """
    out, depth = [], threshold
    for ins in instrs:
        op = ins.op
        if op in ("br", "br_if"):
            ins = Instr(op, (ins.imm[0] + 1 if ins.imm[0] >= depth else ins.imm[0],))
        elif op == "br_table":
            ins = Instr(op, tuple(lab + 1 if lab >= depth else lab for lab in ins.imm))
        out.append(ins)
        if op in ops.CONTROL_OPEN:
            depth += 1
        elif op == "end":
            depth -= 1
    return out


def pops(m, ins) -> int:
    """Values an instruction removes from its own frame before pushing results."""
    op = ins.op
    info = ops.BY_NAME[op]
    if info.params is not None:
        return len(info.params)
    if op in ("if", "drop", "local.set", "local.tee", "global.set"):
        return 1
    if op == "br_if":
        return 2  # condition plus at most one carried value
    if op == "select":
        return 3
    if op == "call":
        return len(m.func_type(ins.imm[0]).params)
    if op == "call_indirect":
        return 1 + len(m.types[ins.imm[0]].params)
    return 0


def annotations(m):
    return [annotate_function(m, i) for i in range(len(m.functions))]


def replace_body(m, def_idx, body, extra_locals=()):
    f = m.functions[def_idx]
    funcs = list(m.functions)
    funcs[def_idx] = f._replace(body=tuple(body), locals=f.locals + tuple(extra_locals))
    return m.replace(functions=tuple(funcs))


def local_count(m, def_idx) -> int:
    f = m.functions[def_idx]
    return len(m.types[f.type_idx].params) + len(f.locals)
