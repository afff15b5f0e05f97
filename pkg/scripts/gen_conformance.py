"""Record reference results for the interpreter conformance suite.

Runs each case once under wasmtime and freezes binaries plus results into
tests/data/conformance.json. Only needed when the case list changes:

    pip install wasmtime && python scripts/gen_conformance.py
"""

import json
import math
import struct
from pathlib import Path

import wasmtime

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "conformance.json"


def unop(t_in, t_out, op):
    return f"(func (export \"run\") (param {t_in}) (result {t_out}) local.get 0 {op})"


def binop(t, op, t_out=None):
    return (f"(func (export \"run\") (param {t} {t}) (result {t_out or t}) "
            f"local.get 0 local.get 1 {op})")


I32_MIN, I32_MAX = -(2 ** 31), 2 ** 31 - 1
I64_MIN, I64_MAX = -(2 ** 63), 2 ** 63 - 1

CASES = [
    # integer division and remainder signs
    ("i32.div_s", binop("i32", "i32.div_s"), [(7, 2), (-7, 2), (7, -2), (-7, -2), (1, 0),
                                              (I32_MIN, -1), (I32_MIN, 1)]),
    ("i32.div_u", binop("i32", "i32.div_u"), [(7, 2), (-7, 2), (-1, 3), (1, 0)]),
    ("i32.rem_s", binop("i32", "i32.rem_s"), [(7, 3), (-7, 3), (7, -3), (-7, -3), (I32_MIN, -1), (5, 0)]),
    ("i32.rem_u", binop("i32", "i32.rem_u"), [(7, 3), (-7, 3), (5, 0)]),
    ("i64.div_s", binop("i64", "i64.div_s"), [(-7, 2), (I64_MIN, -1), (I64_MAX, -1), (3, 0)]),
    ("i64.div_u", binop("i64", "i64.div_u"), [(-1, 2), (10, 3)]),
    ("i64.rem_s", binop("i64", "i64.rem_s"), [(-7, 3), (I64_MIN, -1), (7, -3)]),
    ("i64.rem_u", binop("i64", "i64.rem_u"), [(-1, 10)]),
    # wrapping arithmetic, shifts, rotations
    ("i32.add", binop("i32", "i32.add"), [(I32_MAX, 1), (-1, -1)]),
    ("i32.mul", binop("i32", "i32.mul"), [(0x10001, 0x10001), (-3, 7), (I32_MIN, -1)]),
    ("i32.sub", binop("i32", "i32.sub"), [(I32_MIN, 1), (0, 1)]),
    ("i32.shl", binop("i32", "i32.shl"), [(1, 31), (1, 32), (1, 33), (3, -1)]),
    ("i32.shr_s", binop("i32", "i32.shr_s"), [(I32_MIN, 1), (-1, 31), (-8, 33), (8, 1)]),
    ("i32.shr_u", binop("i32", "i32.shr_u"), [(I32_MIN, 1), (-1, 31), (-8, 32)]),
    ("i32.rotl", binop("i32", "i32.rotl"), [(0x12345678, 4), (0x12345678, 36), (-1, 7), (1, 0), (I32_MIN, 1)]),
    ("i32.rotr", binop("i32", "i32.rotr"), [(0x12345678, 4), (1, 1), (0x12345678, -4)]),
    ("i64.rotl", binop("i64", "i64.rotl"), [(0x0123456789ABCDEF, 8), (1, 64), (1, 63)]),
    ("i64.rotr", binop("i64", "i64.rotr"), [(0x0123456789ABCDEF, 8), (1, 1)]),
    ("i64.shr_s", binop("i64", "i64.shr_s"), [(I64_MIN, 63), (-2, 65)]),
    ("i64.mul", binop("i64", "i64.mul"), [(I64_MAX, 2), (0x100000001, 0x100000001)]),
    ("i32.clz", unop("i32", "i32", "i32.clz"), [(0,), (1,), (-1,), (0x00F00000,)]),
    ("i32.ctz", unop("i32", "i32", "i32.ctz"), [(0,), (I32_MIN,), (0x00F00000,)]),
    ("i32.popcnt", unop("i32", "i32", "i32.popcnt"), [(0,), (-1,), (0x55555555,)]),
    ("i64.clz", unop("i64", "i64", "i64.clz"), [(0,), (1,)]),
    ("i64.ctz", unop("i64", "i64", "i64.ctz"), [(0,), (I64_MIN,)]),
    ("i64.popcnt", unop("i64", "i64", "i64.popcnt"), [(-1,)]),
    ("i32.lt_s", binop("i32", "i32.lt_s"), [(-1, 0), (0, -1)]),
    ("i32.lt_u", binop("i32", "i32.lt_u"), [(-1, 0), (0, -1)]),
    ("i64.ge_s", binop("i64", "i64.ge_s", "i32"), [(-1, 0), (I64_MIN, I64_MAX)]),
    # wrap and extend
    ("i32.wrap_i64", unop("i64", "i32", "i32.wrap_i64"), [(0x1FFFFFFFF,), (-1,), (0x80000000,)]),
    ("i64.extend_i32_s", unop("i32", "i64", "i64.extend_i32_s"), [(-1,), (I32_MIN,), (5,)]),
    ("i64.extend_i32_u", unop("i32", "i64", "i64.extend_i32_u"), [(-1,), (I32_MIN,)]),
    ("i32.eqz", unop("i32", "i32", "i32.eqz"), [(0,), (7,)]),
    # float / int conversions
    ("i32.trunc_f64_s", unop("f64", "i32", "i32.trunc_f64_s"),
     [(-1.9,), (2147483647.9,), (2147483648.0,), (-2147483648.9,), (-2147483649.0,), (math.nan,),
      (math.inf,)]),
    ("i32.trunc_f32_u", unop("f32", "i32", "i32.trunc_f32_u"), [(-0.9,), (4294967040.0,), (4294967296.0,),
                                                               (-1.0,)]),
    ("i64.trunc_f64_u", unop("f64", "i64", "i64.trunc_f64_u"), [(1.8446744073709550e19,), (1.8446744073709552e19,)]),
    ("f32.convert_i64_s", unop("i64", "f32", "f32.convert_i64_s"),
     [(2 ** 53 + 1,), (0x7FFFFFFFFFFFFFFF,), (-(2 ** 60) - 1,), (0x0020000020000001,), (16777217,)]),
    ("f32.convert_i64_u", unop("i64", "f32", "f32.convert_i64_u"), [(-1,), (0x8000008000000001 - 2 ** 64,)]),
    ("f32.convert_i32_u", unop("i32", "f32", "f32.convert_i32_u"), [(-1,), (16777217,)]),
    ("f64.convert_i64_u", unop("i64", "f64", "f64.convert_i64_u"), [(-1,), (2 ** 53 + 1,)]),
    ("f32.demote_f64", unop("f64", "f32", "f32.demote_f64"), [(1e39,), (1.0000000596046448,), (-1e-50,),
                                                            (3.4028235677973366e38,)]),
    ("i32.reinterpret_f32", unop("f32", "i32", "i32.reinterpret_f32"), [(-0.0,), (1.5,)]),
    ("f64.reinterpret_i64", unop("i64", "f64", "f64.reinterpret_i64"), [(0x3FF8000000000000,)]),
    # float arithmetic edges
    ("f64.min", binop("f64", "f64.min"), [(0.0, -0.0), (-0.0, 0.0), (1.0, 2.0)]),
    ("f64.max", binop("f64", "f64.max"), [(0.0, -0.0), (-0.0, 0.0), (-1.0, -2.0)]),
    ("f32.min", binop("f32", "f32.min"), [(-0.0, 0.0), (3.0, -3.0)]),
    ("f64.nearest", unop("f64", "f64", "f64.nearest"), [(0.5,), (1.5,), (2.5,), (-0.5,), (-1.5,), (4503599627370497.0,)]),
    ("f32.nearest", unop("f32", "f32", "f32.nearest"), [(2.5,), (-3.5,)]),
    ("f64.ceil", unop("f64", "f64", "f64.ceil"), [(-0.5,), (1.1,)]),
    ("f64.floor", unop("f64", "f64", "f64.floor"), [(-0.5,), (0.5,)]),
    ("f64.trunc", unop("f64", "f64", "f64.trunc"), [(-0.7,), (2.9,)]),
    ("f64.div", binop("f64", "f64.div"), [(1.0, 0.0), (-1.0, 0.0), (1.0, -0.0), (1.0, 3.0)]),
    ("f32.div", binop("f32", "f32.div"), [(1.0, 3.0), (2.0, -0.0)]),
    ("f32.add", binop("f32", "f32.add"), [(16777216.0, 1.0), (3.4028234663852886e38, 3.4028234663852886e38)]),
    ("f32.mul", binop("f32", "f32.mul"), [(1.0000001192092896, 1.0000001192092896)]),
    ("f64.copysign", binop("f64", "f64.copysign"), [(1.0, -0.0), (-2.0, 3.0)]),
    ("f32.sqrt", unop("f32", "f32", "f32.sqrt"), [(2.0,), (-0.0,)]),
    ("f64.abs", unop("f64", "f64", "f64.abs"), [(-0.0,), (-3.0,)]),
    # control flow
    ("br_table", """(func (export "run") (param i32) (result i32)
        block block block block
          local.get 0 br_table 0 1 2 3
        end i32.const 10 return
        end i32.const 11 return
        end i32.const 12 return
        end i32.const 13)""", [(0,), (1,), (2,), (3,), (4,), (-1,)]),
    ("br_table_value", """(func (export "run") (param i32) (result i32)
        block (result i32)
          block (result i32)
            i32.const 100 local.get 0 br_table 0 1 0
          end
          i32.const 1 i32.add
        end)""", [(0,), (1,), (2,), (99,)]),
    ("br_if_value", """(func (export "run") (param i32) (result i32)
        block (result i32)
          i32.const 7 local.get 0 br_if 0 drop i32.const 9
        end)""", [(0,), (1,)]),
    ("nested_loop", """(func (export "run") (param i32) (result i32) (local i32 i32)
        block loop
          local.get 1 local.get 0 i32.ge_u br_if 1
          i32.const 0 local.set 2
          block loop
            local.get 2 local.get 1 i32.ge_u br_if 1
            local.get 2 i32.const 1 i32.add local.set 2
            br 0
          end end
          local.get 1 i32.const 1 i32.add local.set 1
          br 0
        end end
        local.get 1 local.get 2 i32.add)""", [(0,), (5,), (17,)]),
    ("if_else", """(func (export "run") (param i32) (result i32)
        local.get 0 if (result i32) i32.const 1 else i32.const 2 end)""", [(0,), (5,)]),
    ("select", """(func (export "run") (param i32 i32 i32) (result i32)
        local.get 0 local.get 1 local.get 2 select)""", [(1, 2, 0), (1, 2, 7)]),
    ("unreachable", """(func (export "run") (param i32) (result i32)
        local.get 0 if unreachable end i32.const 3)""", [(0,), (1,)]),
    ("recursion", """(func $f (export "run") (param i32) (result i32)
        local.get 0 i32.const 2 i32.lt_u if (result i32) local.get 0 else
        local.get 0 i32.const 1 i32.sub call $f local.get 0 i32.const 2 i32.sub call $f i32.add end)""",
     [(10,), (1,)]),
    # memory
    ("load8_s", """(memory 1) (data (i32.const 0) "\\ff\\80\\7f")
        (func (export "run") (param i32) (result i32) local.get 0 i32.load8_s)""", [(0,), (1,), (2,)]),
    ("load16_u_store", """(memory 1)
        (func (export "run") (param i32 i32) (result i64)
          local.get 0 local.get 1 i32.store16 local.get 0 i64.load16_s)""", [(4, 0x18000), (65534, 5), (65535, 1)]),
    ("load_oob", """(memory 1)
        (func (export "run") (param i32) (result i32) local.get 0 i32.load offset=4)""", [(65528,), (65531,),
                                                                                        (-1,)]),
    ("memory_grow", """(memory 1 3)
        (func (export "run") (param i32) (result i32)
          local.get 0 memory.grow drop memory.size)""", [(1,), (1,), (5,)]),
    ("call_indirect", """(type $t0 (func (param i32) (result i32))) (type $t1 (func (result i32)))
        (table 3 funcref) (elem (i32.const 0) $inc $k)
        (func $inc (type $t0) local.get 0 i32.const 1 i32.add)
        (func $k (type $t1) i32.const 42)
        (func (export "run") (param i32) (result i32)
          i32.const 5 local.get 0 call_indirect (type $t0))""", [(0,), (1,), (2,), (3,)]),
]


def wasmtime_trap_kind(msg):
    msg = msg.lower()
    for needle, kind in [("divide by zero", "DivideByZero"), ("integer overflow", "IntegerOverflow"),
                         ("invalid conversion", "InvalidConversionToInteger"),
                         ("out of bounds memory", "MemoryOutOfBounds"),
                         ("undefined element", "UndefinedElement"),
                         ("uninitialized element", "UninitializedElement"),
                         ("indirect call type mismatch", "IndirectCallTypeMismatch"),
                         ("unreachable", "Unreachable")]:
        if needle in msg:
            return kind
    raise ValueError(f"unmapped trap message: {msg}")


def encode_value(v, t):
    if t in ("i32", "i64"):
        return {"type": t, "value": v}
    if t == "f32":
        return {"type": t, "bits": struct.unpack("<I", struct.pack("<f", v))[0]}
    return {"type": t, "bits": struct.unpack("<Q", struct.pack("<d", v))[0]}


def main():
    engine = wasmtime.Engine()
    out = []
    for name, body, arglist in CASES:
        wasm = bytes(wasmtime.wat2wasm(f"(module {body})"))
        module = wasmtime.Module(engine, wasm)
        store = wasmtime.Store(engine)
        inst = wasmtime.Instance(store, module, [])
        run = inst.exports(store)["run"]
        ftype = run.type(store)
        params = [str(p) for p in ftype.params]
        results = [str(r) for r in ftype.results]
        cases = []
        for args in arglist:
            try:
                r = run(store, *args)
                vals = [] if r is None else (list(r) if isinstance(r, (list, tuple)) else [r])
                cases.append({"args": [encode_value(a, t) for a, t in zip(args, params)],
                              "values": [encode_value(v, t) for v, t in zip(vals, results)]})
            except wasmtime.Trap as exc:
                cases.append({"args": [encode_value(a, t) for a, t in zip(args, params)],
                              "trap": wasmtime_trap_kind(str(exc))})
        out.append({"name": name, "wasm": wasm.hex(), "params": params, "results": results,
                    "cases": cases})
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(out, indent=1) + "\n")
    print(f"{sum(len(c['cases']) for c in out)} cases in {len(out)} groups -> {OUT}")


if __name__ == "__main__":
    main()
