import io
import statistics

import pytest

from conftest import FIXTURES, MINERS
from wasm_shade.corpus import fixture
from wasm_shade.detect import FEATURE_LOGISTIC, train_detector, train_feature_detector
from wasm_shade.errors import SemanticsViolation
from wasm_shade.evade import EVADED, EXHAUSTED, evade_random, evade_strategic, rank_transformations
from wasm_shade.interp import differential_check
from wasm_shade.mutate import KINDS, replay
from wasm_shade.wasm import encode_module, validate


def constant(m):
    return 1.0


@pytest.fixture(scope="module")
def centroid():
    return train_detector([(f.data, f.label) for f in FIXTURES], "image-centroid")


def test_constant_model_exhausts_flat():
    fx = fixture("cn_lite")
    tr = evade_random(fx.module, constant, max_iters=30, seed=1, suite=fx.suite)
    assert tr.outcome == EXHAUSTED and tr.iterations == 30
    assert {p for _, _, p, _ in tr.steps} == {1.0}
    assert [i for i, *_ in tr.steps] == list(range(1, 31))


def test_degenerate_centroid_evaded_quickly():
    fx = fixture("xor_rotate_hash")
    model = train_detector([(fx.data, "miner"), (fixture("matrix").data, "benign")], "image-centroid")
    tr = evade_random(fx.module, model, max_iters=100, seed=0, suite=fx.suite)
    assert tr.outcome == EVADED and tr.iterations <= 10
    assert tr.final_probability < 0.5


def test_same_seed_same_trace(centroid):
    fx = fixture("murmur_mix")
    a = evade_random(fx.module, centroid, max_iters=50, seed=4, stop_below=0.01)
    b = evade_random(fx.module, centroid, max_iters=50, seed=4, stop_below=0.01)
    assert a.to_json() == b.to_json()


def test_trace_replays_to_final_module(centroid):
    fx = fixture("sha_like")
    tr = evade_random(fx.module, centroid, max_iters=120, seed=2, stop_below=0.0, suite=fx.suite)
    assert tr.outcome == EXHAUSTED
    assert encode_module(replay(fx.module, tr.mutations)) == encode_module(tr.module)
    assert validate(tr.module).ok and differential_check(fx.module, tr.module, fx.suite)


def test_probabilities_in_range(centroid):
    fx = fixture("keccak_like")
    tr = evade_random(fx.module, centroid, max_iters=40, seed=0, stop_below=0.0)
    assert all(0 <= p <= 1 for _, _, p, _ in tr.steps)


def test_non_miner_rejected(centroid):
    with pytest.raises(ValueError):
        evade_random(fixture("matrix").module, centroid)


def test_argument_checks():
    m = fixture("cn_lite").module
    with pytest.raises(ValueError):
        evade_random(m, constant, max_iters=0)
    with pytest.raises(ValueError):
        evade_strategic(m, constant, top_k=0)


def test_ranking_constant_model_is_alphabetical():
    ranking = rank_transformations(fixture("cn_lite").module, constant, trials_per_kind=2)
    assert ranking == [(k, 0.0) for k in sorted(KINDS)]


def test_ranking_needs_trials():
    with pytest.raises(ValueError):
        rank_transformations(fixture("cn_lite").module, constant, trials_per_kind=0)


def test_size_model_prefers_add_function_over_remove_item():
    corpus = [(f.data, f.label) for f in FIXTURES]
    model = train_feature_detector(corpus, FEATURE_LOGISTIC, features=["size"])
    assert model.estimator().coef_[0] < 0  # larger binaries look less like miners
    for fx in MINERS:
        order = [k for k, _ in rank_transformations(fx.module, model, trials_per_kind=5)]
        assert order.index("add-function") < order.index("remove-item")


def test_strategic_full_pool_equals_random_pool():
    fx = fixture("cn_lite")
    a = evade_strategic(fx.module, constant, top_k=len(KINDS), max_iters=3, trials_per_kind=1)
    b = evade_random(fx.module, constant, max_iters=3)
    assert a.kinds == b.kinds == sorted(KINDS)


def test_strategic_uses_top_kinds(centroid):
    fx = fixture("cn_lite")
    tr = evade_strategic(fx.module, centroid, max_iters=20, seed=0, stop_below=0.0,
                         trials_per_kind=5, suite=fx.suite)
    top = [k for k, _ in tr.ranking[:2]]
    assert sorted(top) == tr.kinds
    assert {s.kind for _, s, _, _ in tr.steps} <= set(top)


def test_strategic_evades_a_miner(centroid):
    fx = fixture("xor_rotate_hash")
    tr = evade_strategic(fx.module, centroid, max_iters=1000, seed=0, suite=fx.suite)
    assert tr.initial_probability >= 0.5
    assert tr.outcome == EVADED and tr.final_probability < 0.5
    assert differential_check(fx.module, tr.module, fx.suite)


@pytest.mark.parametrize("name", ["xor_rotate_hash", "cn_lite", "murmur_mix"])
def test_strategic_not_slower_than_random(centroid, name):
    fx = fixture(name)
    r = [evade_random(fx.module, centroid, max_iters=300, seed=s).iterations for s in range(5)]
    s_ = [evade_strategic(fx.module, centroid, max_iters=300, seed=s).iterations for s in range(5)]
    assert statistics.median(s_) <= statistics.median(r)


def test_checkpoint_violation_propagates(monkeypatch, centroid):
    import wasm_shade.evade as ev

    fx = fixture("cn_lite")
    calls = []

    def broken(orig, cur, suite, fuel, bindings):
        calls.append(1)
        from wasm_shade.interp import Diverged
        return Diverged("forced")

    monkeypatch.setattr(ev, "differential_check", broken)
    with pytest.raises(SemanticsViolation):
        evade_random(fx.module, constant, max_iters=5, check_every=2, suite=fx.suite)
    assert calls


def test_serialisation(centroid):
    fx = fixture("murmur_mix")
    tr = evade_random(fx.module, centroid, max_iters=10, seed=1, stop_below=0.05)
    obj = tr.to_json()
    assert obj["outcome"] in (EVADED, EXHAUSTED) and len(obj["steps"]) == tr.iterations
    buf = io.StringIO()
    tr.write_csv(buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "iteration,kind,probability" and len(rows) == tr.iterations + 2
