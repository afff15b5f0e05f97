"""Numeric instruction semantics.

Integers are carried as unsigned Python ints masked to their width; floats
as Python floats, with f32 values always rounded to single precision.
"""

import math
import struct

from ..errors import Trap

M32 = 0xFFFFFFFF
M64 = 0xFFFFFFFFFFFFFFFF
CANON_NAN32 = 0x7FC00000
CANON_NAN64 = 0x7FF8000000000000

_F = struct.Struct("<f")
_D = struct.Struct("<d")
_I = struct.Struct("<I")
_Q = struct.Struct("<Q")


def f32(x):
    """Round a double to the nearest single-precision value."""
    try:
        return _F.unpack(_F.pack(x))[0]
    except OverflowError:
        return math.copysign(math.inf, x)


def f32_bits(x):
    if x != x:
        return CANON_NAN32
    return _I.unpack(_F.pack(x))[0]


def f64_bits(x):
    if x != x:
        return CANON_NAN64
    return _Q.unpack(_D.pack(x))[0]


def bits_f32(b):
    return _F.unpack(_I.pack(b & M32))[0]


def bits_f64(b):
    return _D.unpack(_Q.pack(b & M64))[0]


def signed(x, bits):
    return x - (1 << bits) if x >> (bits - 1) else x


# integer ops ----------------------------------------------------------------

def _int_ops(bits):
    mask = (1 << bits) - 1
    top = 1 << (bits - 1)
    shmask = bits - 1

    def s(x):
        return x - (1 << bits) if x & top else x

    def div_s(a, b):
        if b == 0:
            raise Trap("DivideByZero")
        sa, sb = s(a), s(b)
        if sa == -top and sb == -1:
            raise Trap("IntegerOverflow")
        q = abs(sa) // abs(sb)
        return (-q if (sa < 0) != (sb < 0) else q) & mask

    def div_u(a, b):
        if b == 0:
            raise Trap("DivideByZero")
        return a // b

    def rem_s(a, b):
        if b == 0:
            raise Trap("DivideByZero")
        sa, sb = s(a), s(b)
        r = abs(sa) % abs(sb)
        return (-r if sa < 0 else r) & mask

    def rem_u(a, b):
        if b == 0:
            raise Trap("DivideByZero")
        return a % b

    def rotl(a, b):
        k = b & shmask
        return ((a << k) | (a >> (bits - k))) & mask

    def rotr(a, b):
        k = b & shmask
        return ((a >> k) | (a << (bits - k))) & mask

    def ctz(a):
        return bits if a == 0 else (a & -a).bit_length() - 1

    binary = {
        "add": lambda a, b: (a + b) & mask,
        "sub": lambda a, b: (a - b) & mask,
        "mul": lambda a, b: (a * b) & mask,
        "div_s": div_s, "div_u": div_u, "rem_s": rem_s, "rem_u": rem_u,
        "and": lambda a, b: a & b,
        "or": lambda a, b: a | b,
        "xor": lambda a, b: a ^ b,
        "shl": lambda a, b: (a << (b & shmask)) & mask,
        "shr_s": lambda a, b: (s(a) >> (b & shmask)) & mask,
        "shr_u": lambda a, b: a >> (b & shmask),
        "rotl": rotl, "rotr": rotr,
        "eq": lambda a, b: int(a == b),
        "ne": lambda a, b: int(a != b),
        "lt_s": lambda a, b: int(s(a) < s(b)),
        "lt_u": lambda a, b: int(a < b),
        "gt_s": lambda a, b: int(s(a) > s(b)),
        "gt_u": lambda a, b: int(a > b),
        "le_s": lambda a, b: int(s(a) <= s(b)),
        "le_u": lambda a, b: int(a <= b),
        "ge_s": lambda a, b: int(s(a) >= s(b)),
        "ge_u": lambda a, b: int(a >= b),
    }
    unary = {
        "clz": lambda a: bits - a.bit_length(),
        "ctz": ctz,
        "popcnt": lambda a: bin(a).count("1"),
        "eqz": lambda a: int(a == 0),
    }
    return binary, unary


# float ops ------------------------------------------------------------------

def _fdiv(a, b):
    if b == 0.0:
        if a == 0.0 or a != a:
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def _fmin(a, b):
    if a != a or b != b:
        return math.nan
    if a == b == 0.0:
        return a if math.copysign(1.0, a) < 0 else b
    return a if a < b else b


def _fmax(a, b):
    if a != a or b != b:
        return math.nan
    if a == b == 0.0:
        return a if math.copysign(1.0, a) > 0 else b
    return a if a > b else b


def _keep_zero_sign(r, x):
    return math.copysign(0.0, x) if r == 0 else float(r)


def _fround(fn):
    def op(x):
        if x != x or math.isinf(x) or x == 0.0:
            return x
        return _keep_zero_sign(fn(x), x)
    return op


def _nearest(x):
    if x != x or math.isinf(x) or x == 0.0 or abs(x) >= 2.0 ** 52:
        return x
    return _keep_zero_sign(round(x), x)


def _sqrt(x):
    if x != x or x < 0:
        return math.nan
    return math.sqrt(x)


def _float_ops(rnd):
    binary = {
        "add": lambda a, b: rnd(a + b),
        "sub": lambda a, b: rnd(a - b),
        "mul": lambda a, b: rnd(a * b),
        "div": lambda a, b: rnd(_fdiv(a, b)),
        "min": _fmin,
        "max": _fmax,
        "copysign": math.copysign,
        "eq": lambda a, b: int(a == b),
        "ne": lambda a, b: int(a != b),
        "lt": lambda a, b: int(a < b),
        "gt": lambda a, b: int(a > b),
        "le": lambda a, b: int(a <= b),
        "ge": lambda a, b: int(a >= b),
    }
    unary = {
        "abs": abs,
        "neg": lambda a: -a,
        "ceil": _fround(math.ceil),
        "floor": _fround(math.floor),
        "trunc": _fround(math.trunc),
        "nearest": _nearest,
        "sqrt": lambda a: rnd(_sqrt(a)),
    }
    return binary, unary


def _identity(x):
    return x


# conversions ----------------------------------------------------------------

def _trunc(lo, hi, unsigned_mask):
    def op(x):
        if x != x:
            raise Trap("InvalidConversionToInteger")
        if math.isinf(x):
            raise Trap("IntegerOverflow")
        t = math.trunc(x)
        if not lo <= t <= hi:
            raise Trap("IntegerOverflow")
        return t & unsigned_mask
    return op


def _int_to_f32(n):
    if abs(n) < (1 << 53):
        return f32(float(n))
    neg = n < 0
    n = -n if neg else n
    shift = n.bit_length() - 26
    sticky = 1 if n & ((1 << shift) - 1) else 0
    # 24 mantissa bits + round bit + sticky bit, exact in a double
    m = (n >> shift) | sticky
    v = f32(math.ldexp(float(m), shift))
    return -v if neg else v


CONVERSIONS = {
    "i32.wrap_i64": lambda x: x & M32,
    "i32.trunc_f32_s": _trunc(-(1 << 31), (1 << 31) - 1, M32),
    "i32.trunc_f32_u": _trunc(0, M32, M32),
    "i32.trunc_f64_s": _trunc(-(1 << 31), (1 << 31) - 1, M32),
    "i32.trunc_f64_u": _trunc(0, M32, M32),
    "i64.extend_i32_s": lambda x: signed(x, 32) & M64,
    "i64.extend_i32_u": _identity,
    "i64.trunc_f32_s": _trunc(-(1 << 63), (1 << 63) - 1, M64),
    "i64.trunc_f32_u": _trunc(0, M64, M64),
    "i64.trunc_f64_s": _trunc(-(1 << 63), (1 << 63) - 1, M64),
    "i64.trunc_f64_u": _trunc(0, M64, M64),
    "f32.convert_i32_s": lambda x: f32(float(signed(x, 32))),
    "f32.convert_i32_u": lambda x: f32(float(x)),
    "f32.convert_i64_s": lambda x: _int_to_f32(signed(x, 64)),
    "f32.convert_i64_u": _int_to_f32,
    "f32.demote_f64": f32,
    "f64.convert_i32_s": lambda x: float(signed(x, 32)),
    "f64.convert_i32_u": float,
    "f64.convert_i64_s": lambda x: float(signed(x, 64)),
    "f64.convert_i64_u": float,
    "f64.promote_f32": _identity,
    "i32.reinterpret_f32": f32_bits,
    "i64.reinterpret_f64": f64_bits,
    "f32.reinterpret_i32": bits_f32,
    "f64.reinterpret_i64": bits_f64,
}


def _build():
    binary, unary = {}, {}
    for prefix, (b, u) in (("i32", _int_ops(32)), ("i64", _int_ops(64)),
                           ("f32", _float_ops(f32)), ("f64", _float_ops(_identity))):
        binary.update({f"{prefix}.{k}": v for k, v in b.items()})
        unary.update({f"{prefix}.{k}": v for k, v in u.items()})
    unary.update(CONVERSIONS)
    return binary, unary


BINARY, UNARY = _build()
