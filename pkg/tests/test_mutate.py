import json

import pytest

import wasm_shade.mutate as mutate
from conftest import FIXTURES, I, single_func
from wasm_shade.corpus import fixture
from wasm_shade.errors import ReplayMismatch, SemanticsViolation
from wasm_shade.interp import differential_check
from wasm_shade.mutate import (
    KINDS, MUTATORS, RULES, MutationTrace, TransformationSpec, apply, module_digest, removable,
    replay, stack,
)
from wasm_shade.wasm import Module, encode_module, extract_instruction_sequence, validate

SEEDS = range(20)
ADDERS = ("add-function", "add-type", "add-custom-section")


def _check(fx, out):
    assert validate(out).ok
    assert differential_check(fx.module, out, fx.suite)


def test_spec_rejects_unknown_kind_and_wide_seed():
    with pytest.raises(ValueError):
        TransformationSpec("inline", 1)
    with pytest.raises(ValueError):
        TransformationSpec("peephole", 1 << 64)


def test_spec_json_roundtrip():
    t = TransformationSpec("peephole", 99, {"rules": ["nop"]})
    assert TransformationSpec.from_json(t.to_json()) == t


def test_add_custom_section_on_empty_module():
    out, e = apply(Module(), TransformationSpec("add-custom-section", 1))
    assert e.applied and len(out.customs) == 1
    assert extract_instruction_sequence(out) == []


def test_remove_item_nothing_removable():
    m = fixture("add").module
    out, e = apply(m, TransformationSpec("remove-item", 1))
    assert not e.applied and out == m and e.site is None


def test_peephole_add_zero_site():
    m = single_func([I("i32.const", 7)])
    out, e = apply(m, TransformationSpec("peephole", 3, {"rules": ["add-zero"]}))
    assert out.functions[0].body == (I("i32.const", 7), I("i32.const", 0), I("i32.add"), I("end"))
    assert e.site == {"mutator": "add-zero", "func": 0, "pc": 0}
    assert differential_check(m, out, [("f", ())])


@pytest.mark.parametrize("rule", RULES)
@pytest.mark.parametrize("name", ["arith_utils", "matrix", "game_physics", "keccak_like"])
def test_each_peephole_rule_preserves(rule, name):
    fx = fixture(name)
    hits = 0
    for seed in range(8):
        out, e = apply(fx.module, TransformationSpec("peephole", seed, {"rules": [rule]}))
        if e.applied:
            hits += 1
            assert e.site["mutator"] == rule
            _check(fx, out)
    assert hits > 0


@pytest.mark.parametrize("mutator", MUTATORS)
@pytest.mark.parametrize("fx", FIXTURES, ids=lambda f: f.name)
def test_each_code_motion_mutator_preserves(mutator, fx):
    for seed in range(5):
        out, e = apply(fx.module, TransformationSpec("code-motion", seed, {"mutators": [mutator]}))
        if e.applied:
            assert e.site["mutator"] == mutator
            _check(fx, out)


def test_peel_loop_applies_on_hash_loop():
    out, e = apply(fixture("xor_rotate_hash").module,
                   TransformationSpec("code-motion", 0, {"mutators": ["peel-loop"]}))
    assert e.applied
    _check(fixture("xor_rotate_hash"), out)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("fx", FIXTURES, ids=lambda f: f.name)
def test_single_application_preserves_and_validates(kind, fx):
    for seed in SEEDS:
        out, e = apply(fx.module, TransformationSpec(kind, seed))
        if e.applied:
            _check(fx, out)
        else:
            assert out == fx.module


@pytest.mark.parametrize("fx", FIXTURES, ids=lambda f: f.name)
def test_remove_item_after_additions(fx):
    grown, _ = stack(fx.module, 12, 3, ADDERS, check_every=100, suite=fx.suite)
    assert removable(grown)
    cur = grown
    for seed in range(10):
        before = len(encode_module(cur))
        cur, e = apply(cur, TransformationSpec("remove-item", seed))
        assert len(encode_module(cur)) <= before
        if e.applied:
            assert len(encode_module(cur)) < before
    _check(fx, cur)


@pytest.mark.parametrize("kind", ADDERS)
@pytest.mark.parametrize("name", ["add", "cn_lite", "text_stats"])
def test_additions_strictly_grow(kind, name):
    m = fixture(name).module
    size = len(encode_module(m))
    for seed in range(10):
        out, e = apply(m, TransformationSpec(kind, seed))
        assert e.applied and len(encode_module(out)) > size


@pytest.mark.parametrize("kind", KINDS)
def test_apply_is_deterministic(kind):
    m = fixture("sha_like").module
    for seed in range(5):
        a, ea = apply(m, TransformationSpec(kind, seed))
        b, eb = apply(m, TransformationSpec(kind, seed))
        assert encode_module(a) == encode_module(b) and ea == eb


def test_stack_one_custom_section():
    m = fixture("add").module
    out, trace = stack(m, 1, 7, {"add-custom-section"})
    assert len(out.customs) == len(m.customs) + 1
    assert len(trace.entries) == 1 and trace.entries[0].applied


def test_stack_deterministic():
    m = fixture("murmur_mix").module
    a, ta = stack(m, 200, 11)
    b, tb = stack(m, 200, 11)
    assert encode_module(a) == encode_module(b)
    assert ta.to_jsonl() == tb.to_jsonl()


def test_stack_draws_every_allowed_kind():
    _, trace = stack(fixture("matrix").module, 300, 2)
    assert {e.spec.kind for e in trace.entries} == set(KINDS)


def test_stack_thousand_on_hash_fixture():
    fx = fixture("xor_rotate_hash")
    out, trace = stack(fx.module, 1000, 7, suite=fx.suite)
    assert len(trace.entries) == 1000
    _check(fx, out)


def test_stack_argument_checks():
    m = fixture("add").module
    with pytest.raises(ValueError):
        stack(m, 0, 1)
    with pytest.raises(ValueError):
        stack(m, 1, 1, allowed=())


def test_broken_transformation_is_caught(monkeypatch):
    fx = fixture("add")

    def corrupt(m, rng, params, nimp):
        f = m.functions[0]
        body = (I("i32.const", 1), I("i32.add")) + f.body
        return m.replace(functions=(f._replace(body=body),) + m.functions[1:]), {"bad": True}

    monkeypatch.setitem(mutate._APPLY, "peephole", corrupt)
    with pytest.raises(SemanticsViolation) as err:
        stack(fx.module, 5, 0, {"peephole"}, check_every=2, suite=fx.suite)
    assert err.value.iteration == 2
    assert len(err.value.trace.entries) == 2


def test_trace_jsonl_replay():
    m = fixture("blake_like").module
    out, trace = stack(m, 150, 5)
    text = trace.to_jsonl()
    lines = text.splitlines()
    assert len(lines) == 151 and json.loads(lines[0])["entries"] == 150
    again = MutationTrace.from_jsonl(text)
    assert again.output_digest == module_digest(out)
    assert encode_module(replay(m, again)) == encode_module(out)


def test_truncated_trace_rejected():
    _, trace = stack(fixture("add").module, 5, 5)
    with pytest.raises(ValueError):
        MutationTrace.from_jsonl("\n".join(trace.to_jsonl().splitlines()[:-1]))


def test_replay_on_wrong_input():
    _, trace = stack(fixture("add").module, 5, 5)
    with pytest.raises(ReplayMismatch):
        replay(fixture("matrix").module, trace)
