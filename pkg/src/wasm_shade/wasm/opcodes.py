"""Opcode table for the supported WebAssembly 1.0 subset.

Each entry maps an opcode byte to its mnemonic, immediate kind, and (for
opcodes with a fixed signature) the operand and result value types.
Opcodes whose typing depends on context (locals, calls, control) carry
``None`` as their signature and are handled explicitly by the validator.
"""

from collections import namedtuple

I32, I64, F32, F64 = "i32", "i64", "f32", "f64"
VALTYPES = (I32, I64, F32, F64)

VALTYPE_CODES = {0x7F: I32, 0x7E: I64, 0x7D: F32, 0x7C: F64}
VALTYPE_BYTES = {v: k for k, v in VALTYPE_CODES.items()}
BLOCKTYPE_EMPTY = 0x40

# immediate kinds
NONE = "none"
BLOCK = "block"  # block type: () or (valtype,)
LABEL = "label"
BR_TABLE = "br_table"  # (l0, ..., ln, default)
FUNC = "func"
CALL_INDIRECT = "call_indirect"  # (typeidx,)
LOCAL = "local"
GLOBAL = "global"
MEMARG = "memarg"  # (align, offset)
MEMIDX = "memidx"  # reserved zero byte, no stored immediate
CONST_I32 = "i32"
CONST_I64 = "i64"
CONST_F32 = "f32"  # stored as raw IEEE bits
CONST_F64 = "f64"

OpInfo = namedtuple("OpInfo", "code name imm params results")

_TABLE = [
    (0x00, "unreachable", NONE, None, None),
    (0x01, "nop", NONE, (), ()),
    (0x02, "block", BLOCK, None, None),
    (0x03, "loop", BLOCK, None, None),
    (0x04, "if", BLOCK, None, None),
    (0x05, "else", NONE, None, None),
    (0x0B, "end", NONE, None, None),
    (0x0C, "br", LABEL, None, None),
    (0x0D, "br_if", LABEL, None, None),
    (0x0E, "br_table", BR_TABLE, None, None),
    (0x0F, "return", NONE, None, None),
    (0x10, "call", FUNC, None, None),
    (0x11, "call_indirect", CALL_INDIRECT, None, None),
    (0x1A, "drop", NONE, None, None),
    (0x1B, "select", NONE, None, None),
    (0x20, "local.get", LOCAL, None, None),
    (0x21, "local.set", LOCAL, None, None),
    (0x22, "local.tee", LOCAL, None, None),
    (0x23, "global.get", GLOBAL, None, None),
    (0x24, "global.set", GLOBAL, None, None),
    (0x3F, "memory.size", MEMIDX, (), (I32,)),
    (0x40, "memory.grow", MEMIDX, (I32,), (I32,)),
    (0x41, "i32.const", CONST_I32, (), (I32,)),
    (0x42, "i64.const", CONST_I64, (), (I64,)),
    (0x43, "f32.const", CONST_F32, (), (F32,)),
    (0x44, "f64.const", CONST_F64, (), (F64,)),
]

# loads and stores: (code, name, value type, access width in bytes)
LOADS = [
    (0x28, "i32.load", I32, 4), (0x29, "i64.load", I64, 8),
    (0x2A, "f32.load", F32, 4), (0x2B, "f64.load", F64, 8),
    (0x2C, "i32.load8_s", I32, 1), (0x2D, "i32.load8_u", I32, 1),
    (0x2E, "i32.load16_s", I32, 2), (0x2F, "i32.load16_u", I32, 2),
    (0x30, "i64.load8_s", I64, 1), (0x31, "i64.load8_u", I64, 1),
    (0x32, "i64.load16_s", I64, 2), (0x33, "i64.load16_u", I64, 2),
    (0x34, "i64.load32_s", I64, 4), (0x35, "i64.load32_u", I64, 4),
]
STORES = [
    (0x36, "i32.store", I32, 4), (0x37, "i64.store", I64, 8),
    (0x38, "f32.store", F32, 4), (0x39, "f64.store", F64, 8),
    (0x3A, "i32.store8", I32, 1), (0x3B, "i32.store16", I32, 2),
    (0x3C, "i64.store8", I64, 1), (0x3D, "i64.store16", I64, 2),
    (0x3E, "i64.store32", I64, 4),
]
for _c, _n, _t, _w in LOADS:
    _TABLE.append((_c, _n, MEMARG, (I32,), (_t,)))
for _c, _n, _t, _w in STORES:
    _TABLE.append((_c, _n, MEMARG, (I32, _t), ()))

MEM_WIDTH = {n: w for _, n, _, w in LOADS + STORES}


def _numeric(start, prefix, names, params, results):
    for i, n in enumerate(names):
        _TABLE.append((start + i, f"{prefix}.{n}", NONE, params, results))


_numeric(0x45, I32, ["eqz"], (I32,), (I32,))
_numeric(0x46, I32, "eq ne lt_s lt_u gt_s gt_u le_s le_u ge_s ge_u".split(), (I32, I32), (I32,))
_numeric(0x50, I64, ["eqz"], (I64,), (I32,))
_numeric(0x51, I64, "eq ne lt_s lt_u gt_s gt_u le_s le_u ge_s ge_u".split(), (I64, I64), (I32,))
_numeric(0x5B, F32, "eq ne lt gt le ge".split(), (F32, F32), (I32,))
_numeric(0x61, F64, "eq ne lt gt le ge".split(), (F64, F64), (I32,))
_numeric(0x67, I32, "clz ctz popcnt".split(), (I32,), (I32,))
_numeric(0x6A, I32, "add sub mul div_s div_u rem_s rem_u and or xor shl shr_s shr_u rotl rotr".split(),
         (I32, I32), (I32,))
_numeric(0x79, I64, "clz ctz popcnt".split(), (I64,), (I64,))
_numeric(0x7C, I64, "add sub mul div_s div_u rem_s rem_u and or xor shl shr_s shr_u rotl rotr".split(),
         (I64, I64), (I64,))
_numeric(0x8B, F32, "abs neg ceil floor trunc nearest sqrt".split(), (F32,), (F32,))
_numeric(0x92, F32, "add sub mul div min max copysign".split(), (F32, F32), (F32,))
_numeric(0x99, F64, "abs neg ceil floor trunc nearest sqrt".split(), (F64,), (F64,))
_numeric(0xA0, F64, "add sub mul div min max copysign".split(), (F64, F64), (F64,))

_CONVERSIONS = [
    (0xA7, "i32.wrap_i64", I64, I32),
    (0xA8, "i32.trunc_f32_s", F32, I32), (0xA9, "i32.trunc_f32_u", F32, I32),
    (0xAA, "i32.trunc_f64_s", F64, I32), (0xAB, "i32.trunc_f64_u", F64, I32),
    (0xAC, "i64.extend_i32_s", I32, I64), (0xAD, "i64.extend_i32_u", I32, I64),
    (0xAE, "i64.trunc_f32_s", F32, I64), (0xAF, "i64.trunc_f32_u", F32, I64),
    (0xB0, "i64.trunc_f64_s", F64, I64), (0xB1, "i64.trunc_f64_u", F64, I64),
    (0xB2, "f32.convert_i32_s", I32, F32), (0xB3, "f32.convert_i32_u", I32, F32),
    (0xB4, "f32.convert_i64_s", I64, F32), (0xB5, "f32.convert_i64_u", I64, F32),
    (0xB6, "f32.demote_f64", F64, F32),
    (0xB7, "f64.convert_i32_s", I32, F64), (0xB8, "f64.convert_i32_u", I32, F64),
    (0xB9, "f64.convert_i64_s", I64, F64), (0xBA, "f64.convert_i64_u", I64, F64),
    (0xBB, "f64.promote_f32", F32, F64),
    (0xBC, "i32.reinterpret_f32", F32, I32), (0xBD, "i64.reinterpret_f64", F64, I64),
    (0xBE, "f32.reinterpret_i32", I32, F32), (0xBF, "f64.reinterpret_i64", I64, F64),
]
for _c, _n, _p, _r in _CONVERSIONS:
    _TABLE.append((_c, _n, NONE, (_p,), (_r,)))

BY_CODE = {c: OpInfo(c, n, k, p, r) for c, n, k, p, r in _TABLE}
BY_NAME = {i.name: i for i in BY_CODE.values()}

CONTROL_OPEN = frozenset(("block", "loop", "if"))
BRANCHES = frozenset(("br", "br_if", "br_table"))
COMMUTATIVE = frozenset(
    f"{t}.{o}" for t in (I32, I64) for o in ("add", "mul", "and", "or", "xor", "eq", "ne")
) | frozenset(f"{t}.{o}" for t in (F32, F64) for o in ("add", "mul"))


def info(name):
    return BY_NAME[name]


def result_type(name):
    """Static single result type of an opcode, or None if context-dependent."""
    r = BY_NAME[name].results
    if r is not None and len(r) == 1:
        return r[0]
    return None
