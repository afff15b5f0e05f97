"""Local rewrites, each equivalent by a one-line algebraic argument."""

from __future__ import annotations

from ..wasm import Instr
from ..wasm import opcodes as ops
from .structure import annotations, local_count, replace_body

INTS = ("i32", "i64")
FLOATS = ("f32", "f64")
WIDTH = {"i32": 32, "i64": 64}
ONE_BITS = {"f32": 0x3F800000, "f64": 0x3FF0000000000000}
NEG_ZERO_BITS = {"f32": 0x80000000, "f64": 0x8000000000000000}
PURE_PRODUCERS = frozenset(("local.get", "global.get", "i32.const", "i64.const", "f32.const",
                            "f64.const"))

RULES = ("swap-commutative", "add-zero", "xor-zero", "mul-one", "split-constant",
         "double-negation", "nop", "select-wrap")


def _signed(v, bits):
    v &= (1 << bits) - 1
    return v - (1 << bits) if v >> (bits - 1) else v


def _const(t, value):
    return Instr(f"{t}.const", (value,))


def _random_const(t, rng):
    if t in INTS:
        return _const(t, _signed(rng.getrandbits(WIDTH[t]), WIDTH[t]))
    return _const(t, rng.getrandbits(32 if t == "f32" else 64))


def _is_producer(ins, reachable, top):
    if not reachable or top is None:
        return False
    op = ins.op
    if op in ("local.get", "local.tee", "global.get", "call", "call_indirect"):
        return True
    info = ops.BY_NAME[op]
    return info.params is not None and len(info.results) == 1


def _sites(m, anns):
    """rule -> ordered list of (def_idx, pc, operand type)."""
    sites = {r: [] for r in RULES}
    for d, (f, ann) in enumerate(zip(m.functions, anns)):
        body = f.body
        for pc, ins in enumerate(body):
            sites["nop"].append((d, pc, None))
            if not ann.reachable[pc]:
                continue
            top = ann.top_after[pc]
            if ins.op in ops.COMMUTATIVE:
                sites["swap-commutative"].append((d, pc, ins.op[:3]))
            if ins.op in ("i32.const", "i64.const"):
                sites["split-constant"].append((d, pc, ins.op[:3]))
            if _is_producer(ins, True, top):
                sites["add-zero"].append((d, pc, top))
                sites["mul-one"].append((d, pc, top))
                sites["double-negation"].append((d, pc, top))
                sites["select-wrap"].append((d, pc, top))
                if top in INTS:
                    sites["xor-zero"].append((d, pc, top))
    return sites


def _rewrite(m, ann, rule, d, pc, t, rng):
    body = list(m.functions[d].body)
    extra = ()
    if rule == "nop":
        body.insert(pc, Instr("nop"))
    elif rule == "swap-commutative":
        if _simple_operands(body, ann, pc):
            body[pc - 2], body[pc - 1] = body[pc - 1], body[pc - 2]
        else:
            n = local_count(m, d)
            extra = (t, t)
            body[pc:pc] = [Instr("local.set", (n + 1,)), Instr("local.set", (n,)),
                           Instr("local.get", (n + 1,)), Instr("local.get", (n,))]
    elif rule == "split-constant":
        bits = WIDTH[t]
        c = body[pc].imm[0]
        c1 = _signed(rng.getrandbits(bits), bits)
        c2 = _signed(c - c1, bits)
        body[pc:pc + 1] = [_const(t, c1), _const(t, c2), Instr(f"{t}.add")]
    else:
        body[pc + 1:pc + 1] = _identity(rule, t, rng)
    return replace_body(m, d, body, extra)


def _simple_operands(body, ann, pc):
    """True when the two preceding side-effect-free reads are exactly the operands of body[pc]."""
    if pc < 2 or body[pc - 2].op not in PURE_PRODUCERS or body[pc - 1].op not in PURE_PRODUCERS:
        return False
    h = ann.height
    return (ann.reachable[pc - 2] and ann.reachable[pc - 1]
            and h[pc - 1] == h[pc - 2] + 1 and h[pc] == h[pc - 2] + 2)


def _identity(rule, t, rng):
    if rule == "add-zero":
        zero = _const(t, 0) if t in INTS else _const(t, NEG_ZERO_BITS[t])
        return [zero, Instr(f"{t}.add")]
    if rule == "xor-zero":
        return [_const(t, 0), Instr(f"{t}.xor")]
    if rule == "mul-one":
        one = _const(t, 1) if t in INTS else _const(t, ONE_BITS[t])
        return [one, Instr(f"{t}.mul")]
    if rule == "double-negation":
        if t in INTS:
            return [_const(t, -1), Instr(f"{t}.xor"), _const(t, -1), Instr(f"{t}.xor")]
        return [Instr(f"{t}.neg"), Instr(f"{t}.neg")]
    if rule == "select-wrap":
        return [_random_const(t, rng), _const("i32", 1), Instr("select")]
    raise ValueError(rule)


def peephole(m, rng, params, num_imported):
    allowed = params.get("rules") or RULES
    unknown = set(allowed) - set(RULES)
    if unknown:
        raise ValueError(f"unknown peephole rules: {sorted(unknown)}")
    if not m.functions:
        return m, None
    anns = annotations(m)
    sites = _sites(m, anns)
    usable = [r for r in RULES if r in allowed and sites[r]]
    if not usable:
        return m, None
    rule = rng.choice(usable)
    d, pc, t = rng.choice(sites[rule])
    out = _rewrite(m, anns[d], rule, d, pc, t, rng)
    return out, {"mutator": rule, "func": num_imported + d, "pc": pc}
