"""A deterministic, fuel-metered interpreter for the supported subset.

Function bodies are pre-compiled into flat tuples. Branch targets and the
operand-stack heights they unwind to are resolved statically from the
validator's annotations, so there is no runtime label stack.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

from ..errors import NoSuchExport, SegmentOutOfBounds, SignatureMismatch, Trap, UnboundImport
from ..fnv import fnv1a64
from ..wasm import opcodes as ops
from ..wasm.module import Module
from ..wasm.validate import annotate_function
from . import numeric as num

PAGE = 65536
DEFAULT_FUEL = 50_000_000
MAX_CALL_DEPTH = 250
# memory.grow fails (returns -1) beyond this many pages
MAX_RUNTIME_PAGES = 1024

(K_LGET, K_CONST, K_LSET, K_BIN, K_LTEE, K_BRIF, K_NOP, K_LOAD, K_STORE, K_UN, K_BR, K_IF,
 K_ELSE, K_GGET, K_GSET, K_CALL, K_RET, K_DROP, K_SELECT, K_CALLI, K_BRTABLE, K_UNREACH,
 K_MEMSIZE, K_MEMGROW) = range(24)


class _OutOfFuel(Exception):
    pass


# outcome kinds
VALUES, TRAP, FUEL_EXHAUSTED = "values", "trap", "fuel_exhausted"


@dataclass(frozen=True, eq=False)
class ExecResult:
    outcome: str
    values: tuple = ()
    trap: str | None = None
    fuel_used: int = 0
    memory_digest: int = 0

    def _key(self, with_fuel=True):
        vals = tuple(("f", num.f64_bits(v)) if isinstance(v, float) else ("i", v) for v in self.values)
        return (self.outcome, vals, self.trap, self.memory_digest) + ((self.fuel_used,) if with_fuel else ())

    def same_behaviour(self, other) -> bool:
        """Equal outcome and final memory, ignoring fuel."""
        return self._key(False) == other._key(False)

    def __eq__(self, other):
        return isinstance(other, ExecResult) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def to_json(self):
        vals = [("nan" if v != v else v) if isinstance(v, float) else v for v in self.values]
        return {"outcome": self.outcome, "values": vals, "trap": self.trap,
                "fuel_used": self.fuel_used, "memory_digest": f"{self.memory_digest:016x}"}


def _load(fmt, mask=None):
    s = struct.Struct(fmt)
    unpack = s.unpack_from
    if mask is None:
        return lambda mem, ea: unpack(mem, ea)[0]
    return lambda mem, ea: unpack(mem, ea)[0] & mask


def _store(fmt, mask=None):
    pack = struct.Struct(fmt).pack_into
    if mask is None:
        return pack
    return lambda mem, ea, v: pack(mem, ea, v & mask)


def _canon_store(fmt, nan_bits):
    s = struct.Struct(fmt)
    raw = struct.Struct("<I" if fmt == "<f" else "<Q")

    def store(mem, ea, v):
        if v != v:
            raw.pack_into(mem, ea, nan_bits)
        else:
            s.pack_into(mem, ea, v)
    return store


LOADERS = {
    "i32.load": _load("<I"), "i64.load": _load("<Q"), "f32.load": _load("<f"),
    "f64.load": _load("<d"),
    "i32.load8_s": _load("<b", num.M32), "i32.load8_u": _load("<B"),
    "i32.load16_s": _load("<h", num.M32), "i32.load16_u": _load("<H"),
    "i64.load8_s": _load("<b", num.M64), "i64.load8_u": _load("<B"),
    "i64.load16_s": _load("<h", num.M64), "i64.load16_u": _load("<H"),
    "i64.load32_s": _load("<i", num.M64), "i64.load32_u": _load("<I"),
}
STORERS = {
    "i32.store": _store("<I"), "i64.store": _store("<Q"),
    "f32.store": _canon_store("<f", num.CANON_NAN32), "f64.store": _canon_store("<d", num.CANON_NAN64),
    "i32.store8": _store("<B", 0xFF), "i32.store16": _store("<H", 0xFFFF),
    "i64.store8": _store("<B", 0xFF), "i64.store16": _store("<H", 0xFFFF),
    "i64.store32": _store("<I", num.M32),
}


def const_value(ins):
    op, imm = ins
    if op == "i32.const":
        return imm[0] & num.M32
    if op == "i64.const":
        return imm[0] & num.M64
    if op == "f32.const":
        return num.bits_f32(imm[0])
    return num.bits_f64(imm[0])


def _to_internal(v, t):
    if t == ops.I32:
        if not isinstance(v, int):
            raise SignatureMismatch(f"expected i32, got {v!r}")
        return v & num.M32
    if t == ops.I64:
        if not isinstance(v, int):
            raise SignatureMismatch(f"expected i64, got {v!r}")
        return v & num.M64
    if not isinstance(v, (int, float)):
        raise SignatureMismatch(f"expected {t}, got {v!r}")
    return num.f32(float(v)) if t == ops.F32 else float(v)


def _to_external(v, t):
    if t == ops.I32:
        return num.signed(v, 32)
    if t == ops.I64:
        return num.signed(v, 64)
    return math.nan if v != v else v


class _Compiled:
    __slots__ = ("code", "nparams", "zero_locals", "arity")

    def __init__(self, code, nparams, zero_locals, arity):
        self.code = code
        self.nparams = nparams
        self.zero_locals = zero_locals
        self.arity = arity


def compile_function(m: Module, def_idx: int) -> _Compiled:
    f = m.functions[def_idx]
    ftype = m.types[f.type_idx]
    ann = annotate_function(m, def_idx)
    body = f.body
    end_of, else_of, opened = {}, {}, []
    for pc, (op, _) in enumerate(body):
        if op in ops.CONTROL_OPEN:
            opened.append(pc)
        elif op == "else":
            else_of[opened[-1]] = pc
        elif op == "end" and opened:
            end_of[opened.pop()] = pc

    nimp = m.num_imported_funcs
    global_types = m.global_types()
    code = []
    ctrl = []  # (start_pc, target, arity, height)
    ret_arity = len(ftype.results)

    def branch(label):
        if label >= len(ctrl):
            return None  # function-level label: behaves like return
        start, target, arity, height = ctrl[-1 - label]
        return (target, arity, height)

    for pc, (op, imm) in enumerate(body):
        info = ops.BY_NAME[op]
        if op == "local.get":
            code.append((K_LGET, imm[0], None, None))
        elif op == "local.set":
            code.append((K_LSET, imm[0], None, None))
        elif op == "local.tee":
            code.append((K_LTEE, imm[0], None, None))
        elif info.imm in (ops.CONST_I32, ops.CONST_I64, ops.CONST_F32, ops.CONST_F64):
            code.append((K_CONST, const_value((op, imm)), None, None))
        elif op in num.BINARY:
            code.append((K_BIN, num.BINARY[op], None, None))
        elif op in num.UNARY:
            code.append((K_UN, num.UNARY[op], None, None))
        elif op in LOADERS:
            code.append((K_LOAD, LOADERS[op], imm[1], ops.MEM_WIDTH[op]))
        elif op in STORERS:
            code.append((K_STORE, STORERS[op], imm[1], None))
        elif op == "block":
            ctrl.append((pc, end_of[pc] + 1, len(imm), ann.height[pc]))
            code.append((K_NOP, None, None, None))
        elif op == "loop":
            ctrl.append((pc, pc + 1, 0, ann.height[pc]))
            code.append((K_NOP, None, None, None))
        elif op == "if":
            ctrl.append((pc, end_of[pc] + 1, len(imm), ann.height[pc] - 1))
            false_target = else_of[pc] + 1 if pc in else_of else end_of[pc]
            code.append((K_IF, false_target, None, None))
        elif op == "else":
            code.append((K_ELSE, end_of[ctrl[-1][0]], None, None))
        elif op == "end":
            if ctrl:
                ctrl.pop()
                code.append((K_NOP, None, None, None))
            else:
                code.append((K_RET, ret_arity, None, None))
        elif op in ("br", "br_if"):
            tgt = branch(imm[0])
            if tgt is None:
                code.append((K_RET if op == "br" else K_BRIF, ret_arity, None, "ret"))
            else:
                code.append((K_BR if op == "br" else K_BRIF,) + tgt)
        elif op == "br_table":
            targets = tuple(branch(lab) for lab in imm)
            code.append((K_BRTABLE, targets[:-1], targets[-1], ret_arity))
        elif op == "return":
            code.append((K_RET, ret_arity, None, None))
        elif op == "call":
            fi = imm[0]
            if fi < nimp:
                code.append((K_CALL, fi, m.func_type(fi), True))
            else:
                code.append((K_CALL, fi, m.func_type(fi), False))
        elif op == "call_indirect":
            code.append((K_CALLI, m.types[imm[0]], None, None))
        elif op == "global.get":
            code.append((K_GGET, imm[0], None, None))
        elif op == "global.set":
            code.append((K_GSET, imm[0], global_types[imm[0]].valtype, None))
        elif op == "drop":
            code.append((K_DROP, None, None, None))
        elif op == "select":
            code.append((K_SELECT, None, None, None))
        elif op == "nop":
            code.append((K_NOP, None, None, None))
        elif op == "unreachable":
            code.append((K_UNREACH, None, None, None))
        elif op == "memory.size":
            code.append((K_MEMSIZE, None, None, None))
        elif op == "memory.grow":
            code.append((K_MEMGROW, None, None, None))
        else:  # pragma: no cover
            raise AssertionError(op)
    zero = {ops.I32: 0, ops.I64: 0, ops.F32: 0.0, ops.F64: 0.0}
    return _Compiled(tuple(code), len(ftype.params), [zero[t] for t in f.locals], ret_arity)


class Instance:
    """Runtime state of an instantiated module. Not shareable across threads."""

    def __init__(self, module: Module, host_funcs, memory, mem_max, globals_, table):
        self.module = module
        self.host_funcs = host_funcs
        self.memory = memory
        self.mem_max = mem_max
        self.globals = globals_
        self.table = table
        self._compiled = {}
        self._fuel = 0
        self._depth = 0
        self._nimp = module.num_imported_funcs

    def _get_compiled(self, def_idx):
        c = self._compiled.get(def_idx)
        if c is None:
            c = self._compiled[def_idx] = compile_function(self.module, def_idx)
        return c

    def memory_digest(self) -> int:
        return fnv1a64(self.memory) if self.memory is not None else fnv1a64(b"")

    def call_function(self, func_idx, args):
        if func_idx < self._nimp:
            return self._call_host(func_idx, args)
        return self._run(func_idx - self._nimp, args)

    def _call_host(self, func_idx, args):
        fn, ftype = self.host_funcs[func_idx]
        ext = [_to_external(a, t) for a, t in zip(args, ftype.params)]
        out = fn(*ext)
        if out is None:
            out = ()
        elif not isinstance(out, (tuple, list)):
            out = (out,)
        return [_to_internal(v, t) for v, t in zip(out, ftype.results)]

    def _run(self, def_idx, args):
        c = self._get_compiled(def_idx)
        code = c.code
        loc = list(args)
        loc.extend(c.zero_locals)
        stack = []
        push = stack.append
        pop = stack.pop
        mem = self.memory
        glob = self.globals
        fuel = self._fuel
        pc = 0
        in_call = False
        self._depth += 1
        if self._depth > MAX_CALL_DEPTH:
            self._depth -= 1
            raise Trap("CallStackExhausted")
        try:
            while True:
                fuel -= 1
                if fuel < 0:
                    fuel = 0
                    raise _OutOfFuel
                k, a, b, d = code[pc]
                pc += 1
                if k == K_LGET:
                    push(loc[a])
                elif k == K_CONST:
                    push(a)
                elif k == K_LSET:
                    loc[a] = pop()
                elif k == K_BIN:
                    y = pop()
                    stack[-1] = a(stack[-1], y)
                elif k == K_LTEE:
                    loc[a] = stack[-1]
                elif k == K_BRIF:
                    if pop():
                        if d == "ret":
                            return stack[len(stack) - a:] if a else []
                        if b:
                            v = stack[-1]
                            del stack[d:]
                            push(v)
                        else:
                            del stack[d:]
                        pc = a
                elif k == K_NOP:
                    pass
                elif k == K_LOAD:
                    ea = stack[-1] + b
                    try:
                        stack[-1] = a(mem, ea)
                    except (struct.error, TypeError):
                        raise Trap("MemoryOutOfBounds") from None
                elif k == K_STORE:
                    v = pop()
                    ea = pop() + b
                    try:
                        a(mem, ea, v)
                    except (struct.error, TypeError):
                        raise Trap("MemoryOutOfBounds") from None
                elif k == K_UN:
                    stack[-1] = a(stack[-1])
                elif k == K_BR:
                    if b:
                        v = stack[-1]
                        del stack[d:]
                        push(v)
                    else:
                        del stack[d:]
                    pc = a
                elif k == K_IF:
                    if not pop():
                        pc = a
                elif k == K_ELSE:
                    pc = a
                elif k == K_GGET:
                    push(glob[a])
                elif k == K_GSET:
                    glob[a] = pop()
                elif k == K_CALL:
                    n = len(b.params)
                    if n:
                        args_ = stack[-n:]
                        del stack[-n:]
                    else:
                        args_ = []
                    self._fuel = fuel
                    in_call = True
                    if d:
                        res = self._call_host(a, args_)
                    else:
                        res = self._run(a - self._nimp, args_)
                    in_call = False
                    fuel = self._fuel
                    mem = self.memory
                    stack.extend(res)
                elif k == K_RET:
                    return stack[len(stack) - a:] if a else []
                elif k == K_DROP:
                    pop()
                elif k == K_SELECT:
                    cnd = pop()
                    y = pop()
                    if not cnd:
                        stack[-1] = y
                elif k == K_CALLI:
                    idx = pop()
                    tbl = self.table
                    if tbl is None or idx >= len(tbl):
                        raise Trap("UndefinedElement")
                    fi = tbl[idx]
                    if fi is None:
                        raise Trap("UninitializedElement")
                    if tuple(self.module.func_type(fi)) != tuple(a):
                        raise Trap("IndirectCallTypeMismatch")
                    n = len(a.params)
                    if n:
                        args_ = stack[-n:]
                        del stack[-n:]
                    else:
                        args_ = []
                    self._fuel = fuel
                    in_call = True
                    res = self.call_function(fi, args_)
                    in_call = False
                    fuel = self._fuel
                    mem = self.memory
                    stack.extend(res)
                elif k == K_BRTABLE:
                    i = pop()
                    tgt = a[i] if i < len(a) else b
                    if tgt is None:
                        return stack[len(stack) - d:] if d else []
                    pc, arity, height = tgt
                    if arity:
                        v = stack[-1]
                        del stack[height:]
                        push(v)
                    else:
                        del stack[height:]
                elif k == K_UNREACH:
                    raise Trap("Unreachable")
                elif k == K_MEMSIZE:
                    push(len(mem) // PAGE)
                elif k == K_MEMGROW:
                    delta = pop()
                    old = len(mem) // PAGE
                    if old + delta > min(self.mem_max, MAX_RUNTIME_PAGES):
                        push(num.M32)
                    else:
                        mem.extend(bytes(delta * PAGE))
                        push(old)
        finally:
            # a callee that raised has already recorded the remaining fuel
            if not in_call:
                self._fuel = fuel
            self._depth -= 1


def _eval_const(expr, globals_):
    op, imm = expr[0]
    if op == "global.get":
        return globals_[imm[0]]
    return const_value(expr[0])


def host_stubs(source_seed=0x5EED):
    """Deterministic host functions: abort, a constant clock, a byte sink and source."""
    state = {"x": source_seed & 0xFFFFFFFF}

    def abort(*args):
        raise Trap("HostAbort")

    def now(*args):
        return 1_700_000_000

    def sink(*args):
        return None

    def source(*args):
        state["x"] = (state["x"] * 1103515245 + 12345) & 0x7FFFFFFF
        return (state["x"] >> 16) & 0xFF

    return {"env.abort": abort, "env.now": now, "env.time": now, "env.sink": sink,
            "env.source": source}


def instantiate(m: Module, import_bindings=None) -> Instance:
    """Allocate memory, globals and table, apply segments, and run the start function."""
    bindings = host_stubs() if import_bindings is None else import_bindings
    host_funcs = []
    imp_globals = []
    memory = None
    mem_max = MAX_RUNTIME_PAGES
    table = None
    for imp in m.imports:
        key = f"{imp.module}.{imp.name}"
        if key not in bindings:
            raise UnboundImport(key)
        val = bindings[key]
        if imp.kind == "func":
            host_funcs.append((val, m.types[imp.desc]))
        elif imp.kind == "global":
            imp_globals.append(_to_internal(val, imp.desc.valtype))
        elif imp.kind == "memory":
            memory = val if isinstance(val, bytearray) else bytearray(imp.desc.min * PAGE)
            mem_max = imp.desc.max if imp.desc.max is not None else MAX_RUNTIME_PAGES
        elif imp.kind == "table":
            table = list(val) if val is not None else [None] * imp.desc.limits.min
    for lim in m.memories:
        memory = bytearray(lim.min * PAGE)
        mem_max = lim.max if lim.max is not None else MAX_RUNTIME_PAGES
    for t in m.tables:
        table = [None] * t.limits.min
    globals_ = list(imp_globals)
    for g in m.globals:
        globals_.append(_eval_const(g.init, globals_))

    # bounds for every segment are checked before any is applied
    elem_offsets = []
    for e in m.elements:
        off = _eval_const(e.offset, globals_)
        if table is None or off + len(e.funcs) > len(table):
            raise SegmentOutOfBounds(f"element segment at {off} exceeds table")
        elem_offsets.append(off)
    data_offsets = []
    for d in m.data:
        off = _eval_const(d.offset, globals_)
        if memory is None or off + len(d.init) > len(memory):
            raise SegmentOutOfBounds(f"data segment at {off} exceeds memory")
        data_offsets.append(off)
    for e, off in zip(m.elements, elem_offsets):
        table[off:off + len(e.funcs)] = list(e.funcs)
    for d, off in zip(m.data, data_offsets):
        memory[off:off + len(d.init)] = d.init

    inst = Instance(m, host_funcs, memory, mem_max, globals_, table)
    if m.start is not None:
        inst._fuel = DEFAULT_FUEL
        inst.call_function(m.start, [])
    return inst


def invoke(inst: Instance, export: str, args=(), fuel: int = DEFAULT_FUEL) -> ExecResult:
    """Call an exported function under a fuel budget (executed instruction count)."""
    e = inst.module.export(export)
    if e is None or e.kind != "func":
        raise NoSuchExport(export)
    ftype = inst.module.func_type(e.index)
    if len(args) != len(ftype.params):
        raise SignatureMismatch(f"{export} expects {len(ftype.params)} arguments, got {len(args)}")
    internal = [_to_internal(v, t) for v, t in zip(args, ftype.params)]
    inst._fuel = fuel
    inst._depth = 0
    try:
        out = inst.call_function(e.index, internal)
    except Trap as t:
        return ExecResult(TRAP, (), t.kind, fuel - inst._fuel, inst.memory_digest())
    except _OutOfFuel:
        return ExecResult(FUEL_EXHAUSTED, (), None, fuel, inst.memory_digest())
    except RecursionError:
        return ExecResult(TRAP, (), "CallStackExhausted", fuel - inst._fuel, inst.memory_digest())
    values = tuple(_to_external(v, t) for v, t in zip(out, ftype.results))
    return ExecResult(VALUES, values, None, fuel - inst._fuel, inst.memory_digest())
