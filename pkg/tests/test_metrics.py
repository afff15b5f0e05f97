import itertools

import pytest

from conftest import MINERS
from wasm_shade.corpus import fixture
from wasm_shade.errors import ZeroBaseline
from wasm_shade.metrics import (
    ConfusionCounts, HashRateMetric, bench_hash_rate, detection_scores, f1, f1_from, fuel_per_hash,
    precision, recall, relative_fuel_proxy, relative_rate, size_increase,
)
from wasm_shade.mutate import stack
from wasm_shade.wasm import encode_module, parse_module


def test_perfect_detector():
    c = ConfusionCounts(tp=10)
    assert (precision(c), recall(c), f1(c)) == (1.0, 1.0, 1.0)


def test_high_precision_low_recall():
    assert f1_from(1.0, 0.2) == pytest.approx(1 / 3)
    c = ConfusionCounts(tp=1, fn=4)
    assert round(f1(c), 2) == 0.33


def test_zero_denominators():
    c = ConfusionCounts(tn=7)
    assert (precision(c), recall(c), f1(c)) == (0.0, 0.0, 0.0)
    assert f1_from(0.0, 0.0) == 0.0


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        ConfusionCounts(tp=-1)


def test_from_labels():
    c = ConfusionCounts.from_labels(["miner", "miner", "benign", "benign"],
                                    ["miner", "benign", "miner", "benign"])
    assert c == ConfusionCounts(1, 1, 1, 1)
    assert detection_scores(c)["f1"] == 0.5


def test_f1_bounds_and_extremes():
    for tp, fp, fn in itertools.product(range(5), repeat=3):
        c = ConfusionCounts(tp, fp, fn)
        p, r, s = precision(c), recall(c), f1(c)
        assert 0 <= s <= 1
        assert (s == 0) == (p == 0 or r == 0)
        assert (s == 1) == (p == 1 and r == 1)


def test_f1_swap_asymmetry():
    # F1 itself is symmetric in FP and FN, while precision and recall trade places
    a, b = ConfusionCounts(tp=4, fp=1, fn=3), ConfusionCounts(tp=4, fp=3, fn=1)
    assert f1(a) == pytest.approx(f1(b))
    assert precision(a) != precision(b) and precision(a) == recall(b)
    # with P = R the swap leaves every quantity unchanged
    c = ConfusionCounts(tp=4, fp=2, fn=2)
    assert (precision(c), recall(c)) == (recall(c), precision(c))


def test_size_increase():
    assert size_increase(1000, 1000).increase_pct == 0
    assert size_increase(1000, 1530).increase_pct == pytest.approx(53.0)
    with pytest.raises(ZeroBaseline):
        size_increase(0, 10)


@pytest.mark.parametrize("fx", MINERS, ids=lambda f: f.name)
def test_fuel_proxy_is_exact(fx):
    a = fuel_per_hash(fx.module, "hash")
    assert a == fuel_per_hash(fx.module, "hash") and a > 0
    assert relative_fuel_proxy(fx.module, parse_module(encode_module(fx.module))) == 100.0


def test_fuel_proxy_custom_sections_unchanged():
    fx = fixture("cn_lite")
    out, _ = stack(fx.module, 1000, 3, {"add-custom-section"}, suite=fx.suite)
    assert relative_fuel_proxy(fx.module, out) == 100.0


def test_fuel_proxy_peephole_slows_down():
    fx = fixture("xor_rotate_hash")
    out, _ = stack(fx.module, 300, 3, {"peephole"}, suite=fx.suite)
    assert relative_fuel_proxy(fx.module, out) < 100.0


def test_bench_with_fake_clock():
    ticks = itertools.count()
    r = bench_hash_rate(fixture("murmur_mix").module, warmup=2, duration=10, clock=lambda: next(ticks))
    # warmup consumes ticks 1-2, each measured call advances the clock by one
    assert r.hashes == 10 and r.seconds == 10 and r.rate == 1.0
    assert r.proxy_rate == pytest.approx(1e6 / r.fuel_per_hash)


def test_bench_rejects_zero_duration():
    with pytest.raises(ValueError):
        bench_hash_rate(fixture("murmur_mix").module, duration=0)


def test_identical_copy_wall_clock_within_noise():
    m = fixture("sha_like").module
    copy = parse_module(encode_module(m))
    a = bench_hash_rate(m, warmup=0.3, duration=1.5)
    b = bench_hash_rate(copy, warmup=0.3, duration=1.5)
    rel = relative_rate(a, b)
    assert rel["fuel_proxy_pct"] == 100.0
    assert 95.0 <= rel["wall_pct"] <= 105.0


def test_relative_rate_fields():
    a = HashRateMetric(100, 10.0, 10.0, 200.0, 5000.0)
    b = HashRateMetric(50, 10.0, 5.0, 400.0, 2500.0)
    assert relative_rate(a, b) == {"wall_pct": 50.0, "fuel_proxy_pct": 50.0}
