import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIXTURES, I, single_func
from wasm_shade.corpus import fixture
from wasm_shade.errors import MalformedBinary, UnsupportedFeature, WasmShadeError
from wasm_shade.wasm import (
    Custom, Function, FuncType, Module, dump_module, encode_module, extract_instruction_sequence,
    parse_module, validate,
)

HEADER = b"\0asm\x01\0\0\0"


def test_header_only_binary_is_empty_module():
    assert parse_module(HEADER) == Module()


def test_bad_magic_reports_offset_zero():
    with pytest.raises(MalformedBinary) as e:
        parse_module(b"\0wat\x01\0\0\0")
    assert e.value.offset == 0


@pytest.mark.parametrize("data", [HEADER[:6], b"\0asm\x02\0\0\0", HEADER + b"\x01\x05\x01",
                                  HEADER + b"\x01\x80\x80\x80\x80\x80\x01"])
def test_malformed_inputs(data):
    with pytest.raises(MalformedBinary):
        parse_module(data)


def test_opcode_outside_subset():
    # one function whose body starts with a SIMD prefix
    data = HEADER + bytes([1, 4, 1, 0x60, 0, 0, 3, 2, 1, 0, 10, 4, 1, 2, 0, 0xFD])
    with pytest.raises(UnsupportedFeature) as e:
        parse_module(data)
    assert e.value.offset == len(data) - 1


def test_add_fixture_counts():
    m = fixture("add").module
    assert (len(m.types), len(m.functions), len(m.exports)) == (1, 1, 1)
    assert m.types[0] == FuncType(("i32", "i32"), ("i32",))
    assert m.exports[0].name == "add"


def test_add_fixture_sequence():
    seq = extract_instruction_sequence(fixture("add").module)
    assert seq == [I("local.get", 0), I("local.get", 1), I("i32.add"), I("end")]


def test_empty_module_encodes_to_header():
    assert encode_module(Module()) == HEADER


def test_custom_section_hand_encoding():
    blob = encode_module(Module(customs=(Custom("meta", b"abc"),)))
    # id 0, payload length 8 = name length byte + "meta" + 3 bytes
    assert blob == HEADER + bytes([0, 8, 4]) + b"meta" + b"abc"


@pytest.mark.parametrize("fx", FIXTURES, ids=lambda f: f.name)
def test_fixture_roundtrip(fx):
    m = fx.module
    assert validate(m).ok
    assert parse_module(encode_module(m)) == m
    assert encode_module(parse_module(encode_module(m))) == encode_module(m)


def test_noncanonical_leb_reencodes_minimally():
    # type section size written as a padded 2-byte LEB128
    padded = HEADER + bytes([1, 0x84, 0x00, 1, 0x60, 0, 0])
    m = parse_module(padded)
    assert encode_module(m) == HEADER + bytes([1, 4, 1, 0x60, 0, 0])


def test_unknown_custom_section_preserved():
    m = fixture("matrix").module
    m2 = m.replace(customs=(Custom("zz.opaque", bytes(range(256)), 11),))
    (c,) = parse_module(encode_module(m2)).customs
    assert (c.name, c.payload) == ("zz.opaque", bytes(range(256)))


def test_validate_empty_ok():
    assert validate(Module()).ok


def test_validate_dangling_export():
    m = single_func([I("i32.const", 1)])
    m = m.replace(exports=(m.exports[0]._replace(index=5),))
    assert any("dangling export index" in v for v in validate(m).violations)


def test_validate_result_type_mismatch():
    m = single_func([I("i32.const", 1)], results=("i64",))
    assert any("type mismatch" in v for v in validate(m).violations)


def test_validate_unbalanced_nesting():
    m = single_func([I("block", None), I("i32.const", 1)])
    assert not validate(m).ok


def test_sequence_empty_and_additive():
    assert extract_instruction_sequence(Module()) == []
    body0 = (I("i32.const", 1), I("end"))
    body1 = (I("i32.const", 2), I("i32.const", 3), I("i32.add"), I("end"))
    m = Module(types=(FuncType((), ("i32",)),),
               functions=(Function(0, (), body0), Function(0, (), body1)))
    seq = extract_instruction_sequence(m)
    assert len(seq) == len(body0) + len(body1)
    assert seq == extract_instruction_sequence(m)


def test_text_dump_lists_one_instruction_per_line():
    text = dump_module(fixture("add").module)
    assert "i32.add" in text and "local.get 1" in text


def _total(data):
    try:
        parse_module(data)
    except WasmShadeError:
        pass


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200))
def test_parser_total_on_arbitrary_bytes(data):
    _total(data)
    _total(HEADER + data)


def test_parser_total_on_corrupted_fixtures():
    rng = random.Random(1)
    blobs = [f.data for f in FIXTURES]
    for _ in range(2000):
        b = bytearray(rng.choice(blobs))
        for _ in range(rng.randint(1, 4)):
            b[rng.randrange(8, len(b))] = rng.randrange(256)
        if rng.random() < 0.3:
            del b[rng.randrange(8, len(b)):]
        _total(bytes(b))
