"""Canonical one-line instruction text and a debug dump of modules.

The text form is ``mnemonic imm...`` and is the input to instruction
hashing, so it must stay stable. It is not a `.wat` parser input.
"""

import math
import struct


def _float_text(bits, width):
    if width == 32:
        value = struct.unpack("<f", struct.pack("<I", bits))[0]
    else:
        value = struct.unpack("<d", struct.pack("<Q", bits))[0]
    if math.isnan(value):
        return f"nan:0x{bits:x}"
    return value.hex()


def instr_text(ins) -> str:
    op, imm = ins
    if not imm:
        return op
    if op == "f32.const":
        return f"{op} {_float_text(imm[0], 32)}"
    if op == "f64.const":
        return f"{op} {_float_text(imm[0], 64)}"
    return op + " " + " ".join(str(x) for x in imm)


def dump_module(m) -> str:
    """Human-readable listing, one instruction per line."""
    lines = []
    for i, t in enumerate(m.types):
        lines.append(f"(type {i} (param {' '.join(t.params)}) (result {' '.join(t.results)}))")
    for imp in m.imports:
        lines.append(f"(import {imp.module!r} {imp.name!r} {imp.kind} {imp.desc})")
    nimp = m.num_imported_funcs
    for i, f in enumerate(m.functions):
        lines.append(f"(func {nimp + i} (type {f.type_idx}) (locals {' '.join(f.locals)})")
        depth = 1
        for ins in f.body:
            if ins.op in ("end", "else"):
                depth -= 1
            lines.append("  " * depth + instr_text(ins))
            if ins.op in ("block", "loop", "if", "else"):
                depth += 1
        lines.append(")")
    for e in m.exports:
        lines.append(f"(export {e.name!r} {e.kind} {e.index})")
    for c in m.customs:
        lines.append(f"(custom {c.name!r} {len(c.payload)} bytes after section {c.placement})")
    return "\n".join(lines) + "\n"
