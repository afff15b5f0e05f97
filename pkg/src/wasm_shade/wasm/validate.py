"""Structural and type validation for the supported subset.

The operand-stack typing pass doubles as an annotator: mutation passes
use the per-instruction stack heights and reachability it records.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from ..errors import InvalidModule
from . import opcodes as ops
from .module import Module

UNKNOWN = None
MAX_PAGES = 65536


@dataclass
class ValidationResult:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def raise_if_invalid(self):
        if self.violations:
            raise InvalidModule(self.violations)


class FuncAnnotation(NamedTuple):
    """Per-instruction facts recorded *before* each instruction executes."""

    height: list  # operand stack height (function-relative)
    reachable: list
    depth: list  # control nesting, 0 = function body level
    top_after: list  # type on top of stack after the instruction, if any


class _TypeError(Exception):
    pass


class _Frame:
    __slots__ = ("op", "label_types", "end_types", "height", "unreachable")

    def __init__(self, op, label_types, end_types, height):
        self.op = op
        self.label_types = label_types
        self.end_types = end_types
        self.height = height
        self.unreachable = False


def _check_body(m: Module, ftype, locals_, body, annotate=False):
    opd = []
    ctrl = [_Frame("func", ftype.results, ftype.results, 0)]
    local_types = list(ftype.params) + list(locals_)
    global_types = m.global_types()
    has_memory = m.num_memories() > 0
    has_table = m.num_tables() > 0
    nfuncs = m.num_funcs
    ann = FuncAnnotation([], [], [], []) if annotate else None

    def push(t):
        opd.append(t)

    def pop():
        f = ctrl[-1]
        if len(opd) == f.height:
            if f.unreachable:
                return UNKNOWN
            raise _TypeError("operand stack underflow")
        return opd.pop()

    def pop_expect(t):
        actual = pop()
        if actual is not UNKNOWN and t is not UNKNOWN and actual != t:
            raise _TypeError(f"type mismatch: expected {t}, got {actual}")
        return actual

    def pop_many(types):
        for t in reversed(types):
            pop_expect(t)

    def unreachable():
        f = ctrl[-1]
        del opd[f.height:]
        f.unreachable = True

    def label(n):
        if n >= len(ctrl):
            raise _TypeError(f"branch depth {n} out of range")
        return ctrl[-1 - n].label_types

    for pc, (op, imm) in enumerate(body):
        if not ctrl:
            raise _TypeError("instructions after function end")
        if annotate:
            ann.height.append(len(opd))
            ann.reachable.append(not ctrl[-1].unreachable)
            ann.depth.append(len(ctrl) - 1)
        info = ops.BY_NAME[op]
        if info.params is not None:
            if info.imm == ops.MEMARG:
                if not has_memory:
                    raise _TypeError("memory instruction without memory")
                if (1 << imm[0]) > ops.MEM_WIDTH[op]:
                    raise _TypeError("alignment exceeds natural width")
            elif info.imm == ops.MEMIDX and not has_memory:
                raise _TypeError("memory instruction without memory")
            pop_many(info.params)
            for t in info.results:
                push(t)
        elif op in ("block", "loop", "if"):
            if op == "if":
                pop_expect(ops.I32)
            results = tuple(imm)
            ctrl.append(_Frame(op, () if op == "loop" else results, results, len(opd)))
        elif op == "else":
            f = ctrl[-1]
            if f.op != "if":
                raise _TypeError("else without matching if")
            pop_many(f.end_types)
            if len(opd) != f.height:
                raise _TypeError("values remaining on stack at else")
            f.op = "else"
            f.unreachable = False
        elif op == "end":
            f = ctrl[-1]
            pop_many(f.end_types)
            if len(opd) != f.height:
                raise _TypeError("values remaining on stack at end of block")
            if f.op == "if" and f.end_types:
                raise _TypeError("if without else must not produce values")
            ctrl.pop()
            opd.extend(f.end_types)
        elif op == "br":
            pop_many(label(imm[0]))
            unreachable()
        elif op == "br_if":
            pop_expect(ops.I32)
            lt = label(imm[0])
            pop_many(lt)
            opd.extend(lt)
        elif op == "br_table":
            pop_expect(ops.I32)
            default = label(imm[-1])
            for lab in imm[:-1]:
                if len(label(lab)) != len(default):
                    raise _TypeError("br_table arity mismatch")
                if tuple(label(lab)) != tuple(default):
                    raise _TypeError("br_table label type mismatch")
            pop_many(default)
            unreachable()
        elif op == "return":
            pop_many(ctrl[0].label_types)
            unreachable()
        elif op == "unreachable":
            unreachable()
        elif op == "call":
            if imm[0] >= nfuncs:
                raise _TypeError("call to undefined function")
            t = m.func_type(imm[0])
            pop_many(t.params)
            opd.extend(t.results)
        elif op == "call_indirect":
            if not has_table:
                raise _TypeError("call_indirect without table")
            if imm[0] >= len(m.types):
                raise _TypeError("call_indirect to undefined type")
            t = m.types[imm[0]]
            pop_expect(ops.I32)
            pop_many(t.params)
            opd.extend(t.results)
        elif op == "drop":
            pop()
        elif op == "select":
            pop_expect(ops.I32)
            t1 = pop()
            t2 = pop_expect(t1)
            push(t1 if t1 is not UNKNOWN else t2)
        elif op in ("local.get", "local.set", "local.tee"):
            if imm[0] >= len(local_types):
                raise _TypeError("undefined local")
            t = local_types[imm[0]]
            if op == "local.get":
                push(t)
            else:
                pop_expect(t)
                if op == "local.tee":
                    push(t)
        elif op in ("global.get", "global.set"):
            if imm[0] >= len(global_types):
                raise _TypeError("undefined global")
            g = global_types[imm[0]]
            if op == "global.get":
                push(g.valtype)
            else:
                if not g.mutable:
                    raise _TypeError("global.set on immutable global")
                pop_expect(g.valtype)
        else:  # pragma: no cover - table is closed
            raise _TypeError(f"unhandled opcode {op}")
        if annotate:
            ann.top_after.append(opd[-1] if ctrl and len(opd) > ctrl[-1].height else UNKNOWN)
    if ctrl:
        raise _TypeError("function body not terminated by end")
    return ann


def _check_const_expr(m, expr, expected, n_imported_globals):
    if len(expr) != 2 or expr[-1].op != "end":
        return "constant expression must be a single instruction"
    op, imm = expr[0]
    if op == "global.get":
        gts = m.global_types()
        if imm[0] >= n_imported_globals:
            return "constant expression may only read imported globals"
        if gts[imm[0]].mutable:
            return "constant expression reads mutable global"
        t = gts[imm[0]].valtype
    elif op in ("i32.const", "i64.const", "f32.const", "f64.const"):
        t = op[:3]
    else:
        return f"non-constant instruction {op} in constant expression"
    if t != expected:
        return f"constant expression type mismatch: expected {expected}, got {t}"
    return None


def validate(m: Module) -> ValidationResult:
    """Collect every violation rather than stopping at the first."""
    v = []
    ntypes = len(m.types)
    for imp in m.imports:
        if imp.kind == "func" and imp.desc >= ntypes:
            v.append(f"import {imp.module}.{imp.name}: dangling type index {imp.desc}")
    for i, f in enumerate(m.functions):
        if f.type_idx >= ntypes:
            v.append(f"function {i}: dangling type index {f.type_idx}")
    if m.num_tables() > 1:
        v.append("multiple tables")
    if m.num_memories() > 1:
        v.append("multiple memories")
    limits = [imp.desc for imp in m.imports if imp.kind == "memory"] + list(m.memories)
    for lim in limits:
        if lim.min > MAX_PAGES or (lim.max is not None and (lim.max > MAX_PAGES or lim.max < lim.min)):
            v.append("memory limits invalid")
    tlimits = [imp.desc.limits for imp in m.imports if imp.kind == "table"] + [t.limits for t in m.tables]
    for lim in tlimits:
        if lim.max is not None and lim.max < lim.min:
            v.append("table limits invalid")

    n_imp_globals = len(m.imported("global"))
    for i, g in enumerate(m.globals):
        err = _check_const_expr(m, g.init, g.type.valtype, n_imp_globals)
        if err:
            v.append(f"global {i}: {err}")

    counts = {"func": m.num_funcs, "table": m.num_tables(), "memory": m.num_memories(),
              "global": len(m.global_types())}
    seen = set()
    for e in m.exports:
        if e.index >= counts[e.kind]:
            v.append(f"export {e.name!r}: dangling export index {e.index}")
        if e.name in seen:
            v.append(f"duplicate export name {e.name!r}")
        seen.add(e.name)

    if m.start is not None:
        if m.start >= m.num_funcs:
            v.append(f"dangling start index {m.start}")
        else:
            t = m.func_type(m.start) if _types_ok(m, m.start) else None
            if t is not None and (t.params or t.results):
                v.append("start function must have type [] -> []")

    for i, e in enumerate(m.elements):
        if e.table >= counts["table"]:
            v.append(f"element segment {i}: dangling table index")
        err = _check_const_expr(m, e.offset, ops.I32, n_imp_globals)
        if err:
            v.append(f"element segment {i}: {err}")
        for fi in e.funcs:
            if fi >= m.num_funcs:
                v.append(f"element segment {i}: dangling function index {fi}")
    for i, d in enumerate(m.data):
        if d.memory >= counts["memory"]:
            v.append(f"data segment {i}: dangling memory index")
        err = _check_const_expr(m, d.offset, ops.I32, n_imp_globals)
        if err:
            v.append(f"data segment {i}: {err}")

    if not v:
        nimp = m.num_imported_funcs
        for i, f in enumerate(m.functions):
            try:
                _check_body(m, m.types[f.type_idx], f.locals, f.body)
            except _TypeError as exc:
                v.append(f"function {nimp + i}: {exc}")
    return ValidationResult(v)


def _types_ok(m, func_idx):
    try:
        m.func_type(func_idx)
        return True
    except IndexError:
        return False


def annotate_function(m: Module, def_idx: int) -> FuncAnnotation:
    """Typing facts for defined function ``def_idx``; raises InvalidModule if ill-typed."""
    f = m.functions[def_idx]
    try:
        return _check_body(m, m.types[f.type_idx], f.locals, f.body, annotate=True)
    except _TypeError as exc:
        raise InvalidModule([f"function {def_idx}: {exc}"]) from None
