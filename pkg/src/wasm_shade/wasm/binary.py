"""Decoding and encoding of the WebAssembly binary format (version 1)."""

from __future__ import annotations

import struct

from ..errors import MalformedBinary, UnsupportedFeature
from . import opcodes as ops
from .module import (
    Custom, Data, Element, Export, Function, FuncType, Global, GlobalType, Import,
    Instr, Limits, Module, TableType,
)

MAGIC = b"\0asm"
VERSION = b"\x01\0\0\0"
HEADER = MAGIC + VERSION

SECTION_ORDER = {1: "type", 2: "import", 3: "function", 4: "table", 5: "memory", 6: "global",
                 7: "export", 8: "start", 9: "element", 10: "code", 11: "data"}
EXTERN_KINDS = ["func", "table", "memory", "global"]
MAX_LOCALS = 50_000
FUNCREF = 0x70


class _Reader:
    __slots__ = ("data", "pos", "end")

    def __init__(self, data, pos=0, end=None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def fail(self, msg, offset=None):
        raise MalformedBinary(msg, self.pos if offset is None else offset)

    def byte(self):
        if self.pos >= self.end:
            self.fail("unexpected end of input")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def take(self, n):
        if n < 0 or self.pos + n > self.end:
            self.fail("unexpected end of input")
        out = bytes(self.data[self.pos:self.pos + n])
        self.pos += n
        return out

    def uleb(self, bits=32):
        start = self.pos
        result = shift = 0
        while True:
            b = self.byte()
            result |= (b & 0x7F) << shift
            shift += 7
            if not b & 0x80:
                break
            if shift >= bits + 7:
                self.fail("LEB128 integer too long", start)
        if result >> bits:
            self.fail("LEB128 integer out of range", start)
        return result

    def sleb(self, bits):
        start = self.pos
        result = shift = 0
        while True:
            b = self.byte()
            result |= (b & 0x7F) << shift
            shift += 7
            if not b & 0x80:
                break
            if shift >= bits + 7:
                self.fail("LEB128 integer too long", start)
        if b & 0x40:
            result -= 1 << shift
        if not -(1 << (bits - 1)) <= result < (1 << (bits - 1)):
            self.fail("LEB128 integer out of range", start)
        return result

    def name(self):
        start = self.pos
        raw = self.take(self.uleb())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            self.fail("malformed UTF-8 name", start)

    def vec(self, fn):
        return tuple(fn() for _ in range(self.uleb()))


def _valtype(r):
    off = r.pos
    b = r.byte()
    if b not in ops.VALTYPE_CODES:
        raise UnsupportedFeature(f"unsupported value type 0x{b:02x}", off)
    return ops.VALTYPE_CODES[b]


def _limits(r):
    off = r.pos
    flag = r.byte()
    if flag == 0:
        return Limits(r.uleb())
    if flag == 1:
        return Limits(r.uleb(), r.uleb())
    raise UnsupportedFeature(f"unsupported limits flag 0x{flag:02x}", off)


def _tabletype(r):
    off = r.pos
    if r.byte() != FUNCREF:
        raise UnsupportedFeature("unsupported table element type", off)
    return TableType(_limits(r))


def _globaltype(r):
    t = _valtype(r)
    off = r.pos
    mut = r.byte()
    if mut > 1:
        r.fail("malformed mutability flag", off)
    return GlobalType(t, bool(mut))


def _functype(r):
    off = r.pos
    if r.byte() != 0x60:
        r.fail("expected function type 0x60", off)
    return FuncType(r.vec(lambda: _valtype(r)), r.vec(lambda: _valtype(r)))


def _import(r):
    module, name = r.name(), r.name()
    off = r.pos
    k = r.byte()
    if k == 0:
        desc = r.uleb()
    elif k == 1:
        desc = _tabletype(r)
    elif k == 2:
        desc = _limits(r)
    elif k == 3:
        desc = _globaltype(r)
    else:
        r.fail(f"bad import kind {k}", off)
    return Import(module, name, EXTERN_KINDS[k], desc)


def _export(r):
    name = r.name()
    off = r.pos
    k = r.byte()
    if k > 3:
        r.fail(f"bad export kind {k}", off)
    return Export(name, EXTERN_KINDS[k], r.uleb())


def read_instructions(r):
    """Read instructions up to and including the `end` closing depth zero."""
    out = []
    depth = 0
    by_code = ops.BY_CODE
    while True:
        off = r.pos
        code = r.byte()
        info = by_code.get(code)
        if info is None:
            raise UnsupportedFeature(f"opcode 0x{code:02x} outside supported subset", off)
        kind = info.imm
        name = info.name
        if kind == ops.NONE:
            imm = ()
        elif kind == ops.BLOCK:
            boff = r.pos
            b = r.byte()
            if b == ops.BLOCKTYPE_EMPTY:
                imm = ()
            elif b in ops.VALTYPE_CODES:
                imm = (ops.VALTYPE_CODES[b],)
            else:
                raise UnsupportedFeature("multi-value block types are not supported", boff)
        elif kind in (ops.LABEL, ops.FUNC, ops.LOCAL, ops.GLOBAL):
            imm = (r.uleb(),)
        elif kind == ops.BR_TABLE:
            labels = r.vec(r.uleb)
            imm = labels + (r.uleb(),)
        elif kind == ops.CALL_INDIRECT:
            t = r.uleb()
            zoff = r.pos
            if r.byte() != 0:
                raise UnsupportedFeature("call_indirect with nonzero table index", zoff)
            imm = (t,)
        elif kind == ops.MEMARG:
            imm = (r.uleb(), r.uleb())
        elif kind == ops.MEMIDX:
            zoff = r.pos
            if r.byte() != 0:
                raise UnsupportedFeature("nonzero memory index", zoff)
            imm = ()
        elif kind == ops.CONST_I32:
            imm = (r.sleb(32),)
        elif kind == ops.CONST_I64:
            imm = (r.sleb(64),)
        elif kind == ops.CONST_F32:
            imm = (struct.unpack("<I", r.take(4))[0],)
        else:
            imm = (struct.unpack("<Q", r.take(8))[0],)
        out.append(Instr(name, imm))
        if name in ops.CONTROL_OPEN:
            depth += 1
        elif name == "end":
            if depth == 0:
                return tuple(out)
            depth -= 1
        elif name == "else" and depth == 0:
            r.fail("else outside if", off)


def _element(r):
    off = r.pos
    flags = r.uleb()
    if flags != 0:
        raise UnsupportedFeature(f"element segment flags {flags} not supported", off)
    offset = read_instructions(r)
    return Element(0, offset, r.vec(r.uleb))


def _data(r):
    off = r.pos
    flags = r.uleb()
    if flags != 0:
        raise UnsupportedFeature(f"data segment flags {flags} not supported", off)
    offset = read_instructions(r)
    return Data(0, offset, r.take(r.uleb()))


def _code(r):
    size = r.uleb()
    start = r.pos
    body_end = start + size
    if body_end > r.end:
        r.fail("function body exceeds section")
    sub = _Reader(r.data, start, body_end)
    locals_ = []
    for _ in range(sub.uleb()):
        coff = sub.pos
        n = sub.uleb()
        t = _valtype(sub)
        if len(locals_) + n > MAX_LOCALS:
            raise UnsupportedFeature("too many locals", coff)
        locals_.extend([t] * n)
    body = read_instructions(sub)
    if sub.pos != body_end:
        r.fail("function body size mismatch", sub.pos)
    r.pos = body_end
    return tuple(locals_), body


def parse_module(data) -> Module:
    """Decode a binary module.

    Raises MalformedBinary or UnsupportedFeature, both carrying the byte
    offset where decoding stopped. Custom sections are kept verbatim.
    """
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise MalformedBinary("bad magic number", 0)
    if len(data) < 8 or data[4:8] != VERSION:
        raise MalformedBinary("unsupported version", 4)
    try:
        return _parse_sections(_Reader(data, 8))
    except (MalformedBinary, UnsupportedFeature):
        raise
    except RecursionError as exc:  # pragma: no cover - defensive
        raise MalformedBinary(f"decoder failure: {exc}", 8) from exc


_FIELD_OF = {1: "types", 2: "imports", 4: "tables", 5: "memories", 6: "globals", 7: "exports",
             9: "elements", 11: "data"}


def _nonempty(sid, fields, func_types, codes):
    if sid == 8:
        return True
    if sid == 3:
        return bool(func_types)
    if sid == 10:
        return bool(codes)
    return bool(fields.get(_FIELD_OF[sid]))


def _parse_sections(r) -> Module:
    fields = {}
    func_types = ()
    codes = None
    customs = []
    last_id = 0
    placement = 0  # last section the encoder would emit
    while r.pos < r.end:
        id_off = r.pos
        sid = r.byte()
        size = r.uleb()
        start = r.pos
        if start + size > r.end:
            r.fail("section extends past end of input", id_off)
        sub = _Reader(r.data, start, start + size)
        if sid == 0:
            name = sub.name()
            customs.append(Custom(name, sub.take(sub.end - sub.pos), placement))
        elif sid in SECTION_ORDER:
            if sid <= last_id:
                r.fail(f"section {sid} out of order or duplicated", id_off)
            last_id = sid
            if sid == 1:
                fields["types"] = sub.vec(lambda: _functype(sub))
            elif sid == 2:
                fields["imports"] = sub.vec(lambda: _import(sub))
            elif sid == 3:
                func_types = sub.vec(sub.uleb)
            elif sid == 4:
                fields["tables"] = sub.vec(lambda: _tabletype(sub))
            elif sid == 5:
                fields["memories"] = sub.vec(lambda: _limits(sub))
            elif sid == 6:
                fields["globals"] = sub.vec(lambda: Global(_globaltype(sub), read_instructions(sub)))
            elif sid == 7:
                fields["exports"] = sub.vec(lambda: _export(sub))
            elif sid == 8:
                fields["start"] = sub.uleb()
            elif sid == 9:
                fields["elements"] = sub.vec(lambda: _element(sub))
            elif sid == 10:
                codes = sub.vec(lambda: _code(sub))
            elif sid == 11:
                fields["data"] = sub.vec(lambda: _data(sub))
            if sub.pos != sub.end:
                r.fail(f"section {sid} size mismatch", sub.pos)
            if _nonempty(sid, fields, func_types, codes):
                placement = sid
        elif sid == 12:
            raise UnsupportedFeature("data count section (bulk memory) not supported", id_off)
        else:
            r.fail(f"unknown section id {sid}", id_off)
        r.pos = start + size
    codes = codes or ()
    if len(codes) != len(func_types):
        r.fail("function and code section counts differ", r.pos)
    fields["functions"] = tuple(Function(t, loc, body) for t, (loc, body) in zip(func_types, codes))
    fields["customs"] = tuple(customs)
    return Module(**fields)


# encoding -----------------------------------------------------------------

def uleb(n: int) -> bytes:
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def sleb(n: int) -> bytes:
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if (n == 0 and not b & 0x40) or (n == -1 and b & 0x40):
            out.append(b)
            return bytes(out)
        out.append(b | 0x80)


def _name(s: str) -> bytes:
    raw = s.encode("utf-8")
    return uleb(len(raw)) + raw


def _vec(items, fn) -> bytes:
    return uleb(len(items)) + b"".join(fn(i) for i in items)


def _enc_limits(lim: Limits) -> bytes:
    if lim.max is None:
        return b"\x00" + uleb(lim.min)
    return b"\x01" + uleb(lim.min) + uleb(lim.max)


def _enc_valtype(t):
    return bytes([ops.VALTYPE_BYTES[t]])


def _enc_globaltype(g: GlobalType):
    return _enc_valtype(g.valtype) + bytes([1 if g.mutable else 0])


def encode_instr(ins: Instr) -> bytes:
    info = ops.BY_NAME[ins.op]
    out = bytes([info.code])
    kind = info.imm
    imm = ins.imm
    if kind == ops.NONE:
        return out
    if kind == ops.BLOCK:
        return out + (_enc_valtype(imm[0]) if imm else bytes([ops.BLOCKTYPE_EMPTY]))
    if kind in (ops.LABEL, ops.FUNC, ops.LOCAL, ops.GLOBAL):
        return out + uleb(imm[0])
    if kind == ops.BR_TABLE:
        return out + uleb(len(imm) - 1) + b"".join(uleb(x) for x in imm)
    if kind == ops.CALL_INDIRECT:
        return out + uleb(imm[0]) + b"\x00"
    if kind == ops.MEMARG:
        return out + uleb(imm[0]) + uleb(imm[1])
    if kind == ops.MEMIDX:
        return out + b"\x00"
    if kind in (ops.CONST_I32, ops.CONST_I64):
        return out + sleb(imm[0])
    if kind == ops.CONST_F32:
        return out + struct.pack("<I", imm[0])
    return out + struct.pack("<Q", imm[0])


def encode_expr(instrs) -> bytes:
    return b"".join(encode_instr(i) for i in instrs)


def _enc_import(imp: Import) -> bytes:
    k = EXTERN_KINDS.index(imp.kind)
    head = _name(imp.module) + _name(imp.name) + bytes([k])
    if k == 0:
        return head + uleb(imp.desc)
    if k == 1:
        return head + bytes([FUNCREF]) + _enc_limits(imp.desc.limits)
    if k == 2:
        return head + _enc_limits(imp.desc)
    return head + _enc_globaltype(imp.desc)


def _enc_locals(locals_) -> bytes:
    groups = []
    for t in locals_:
        if groups and groups[-1][1] == t:
            groups[-1][0] += 1
        else:
            groups.append([1, t])
    return uleb(len(groups)) + b"".join(uleb(n) + _enc_valtype(t) for n, t in groups)


def _enc_code(f: Function) -> bytes:
    body = _enc_locals(f.locals) + encode_expr(f.body)
    return uleb(len(body)) + body


def encode_module(m: Module) -> bytes:
    """Encode with canonical minimal LEB128 integers; empty sections are omitted."""
    payloads = {
        1: m.types and _vec(m.types, lambda t: b"\x60" + _vec(t.params, _enc_valtype)
                            + _vec(t.results, _enc_valtype)),
        2: m.imports and _vec(m.imports, _enc_import),
        3: m.functions and _vec(m.functions, lambda f: uleb(f.type_idx)),
        4: m.tables and _vec(m.tables, lambda t: bytes([FUNCREF]) + _enc_limits(t.limits)),
        5: m.memories and _vec(m.memories, _enc_limits),
        6: m.globals and _vec(m.globals, lambda g: _enc_globaltype(g.type) + encode_expr(g.init)),
        7: m.exports and _vec(m.exports, lambda e: _name(e.name) + bytes([EXTERN_KINDS.index(e.kind)])
                              + uleb(e.index)),
        8: uleb(m.start) if m.start is not None else b"",
        9: m.elements and _vec(m.elements, lambda e: b"\x00" + encode_expr(e.offset)
                               + _vec(e.funcs, uleb)),
        10: m.functions and _vec(m.functions, _enc_code),
        11: m.data and _vec(m.data, lambda d: b"\x00" + encode_expr(d.offset) + uleb(len(d.init))
                            + d.init),
    }
    customs = {}
    for c in m.customs:
        customs.setdefault(c.placement, []).append(c)
    out = bytearray(HEADER)

    def emit_customs(pid):
        for c in customs.get(pid, ()):
            body = _name(c.name) + c.payload
            out.extend(b"\x00" + uleb(len(body)) + body)

    emit_customs(0)
    for sid in range(1, 12):
        body = payloads[sid]
        if body:
            out.extend(bytes([sid]) + uleb(len(body)) + body)
        emit_customs(sid)
    # placements outside the standard range are emitted last
    for pid in sorted(p for p in customs if not 0 <= p <= 11):
        emit_customs(pid)
    return bytes(out)


def normalize(data) -> bytes:
    """Re-encode a binary in canonical form."""
    return encode_module(parse_module(data))
