"""End-to-end acceptance criteria. Each test prints one PASS/FAIL line."""

import io
import json
import random
import time
from functools import lru_cache

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, BENIGN, FIXTURES, MINERS
from oracles import brute_force_dtw
from wasm_shade.cli import main as cli_main
from wasm_shade.detect import predict, train_detector
from wasm_shade.evade import EVADED, evade_strategic
from wasm_shade.interp import differential_check
from wasm_shade.metrics import ConfusionCounts, f1, f1_from, precision, recall, relative_fuel_proxy, size_increase
from wasm_shade.mutate import KINDS, TransformationSpec, apply, stack
from wasm_shade.simdist import distance_report, dtw, fastdtw, hash_instructions
from wasm_shade.wasm import encode_module, extract_instruction_sequence

STACK_SEED = 1000
NON_CODE = ("add-custom-section", "add-type")


def record(n, ok, detail, started):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - started:.1f}s) {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@lru_cache(maxsize=None)
def random_stack(name, seed=STACK_SEED, n=1000):
    fx = next(f for f in FIXTURES if f.name == name)
    return stack(fx.module, n, seed, KINDS, 100, fx.suite)


@lru_cache(maxsize=None)
def centroid_model():
    return train_detector([(f.data, f.label) for f in FIXTURES], "image-centroid")


def test_criterion_1_formula_fidelity():
    t = time.perf_counter()
    perfect = ConfusionCounts(tp=10)
    a = (precision(perfect), recall(perfect), f1(perfect)) == (1.0, 1.0, 1.0)
    b = abs(f1_from(1.0, 0.20) - 0.33) <= 0.005
    zero = ConfusionCounts(fn=5)
    c = (precision(zero), recall(zero), f1(zero)) == (0.0, 0.0, 0.0)
    elapsed = time.perf_counter() - t
    ok = a and b and c and elapsed < 1
    assert record(1, ok, f"F1(1,1)={f1(perfect):.2f} F1(1,0.2)={f1_from(1, 0.2):.4f} "
                         f"F1(0,0)={f1(zero):.2f}", t)


def test_criterion_2_semantic_preservation():
    t = time.perf_counter()
    cases = applied = failures = 0
    for fx in FIXTURES:
        m = fx.module
        for kind in KINDS:
            for seed in range(200):
                out, e = apply(m, TransformationSpec(kind, seed))
                cases += 1
                if not e.applied:
                    failures += out != m
                    continue
                applied += 1
                if not differential_check(m, out, fx.suite):
                    failures += 1
    stacked = 0
    for fx in FIXTURES:
        out, trace = random_stack(fx.name)  # raises SemanticsViolation on any failed checkpoint
        stacked += len(trace.entries) == 1000 and bool(differential_check(fx.module, out, fx.suite))
    elapsed = time.perf_counter() - t
    ok = failures == 0 and stacked == len(FIXTURES) and elapsed < 15 * 60
    assert record(2, ok, f"{cases - failures}/{cases} single applications equivalent "
                         f"({applied} applied), {stacked}/{len(FIXTURES)} 1000-stacks passed "
                         f"every 100-iteration checkpoint", t)


def _edited(rng, a, alphabet, weights, rate):
    out = []
    for x in a:
        r = rng.random()
        if r < rate / 3:
            continue
        if r < 2 * rate / 3:
            out.append(rng.choices(alphabet, weights)[0])
        else:
            out.append(x)
        if rng.random() < rate / 3:
            out.append(rng.choices(alphabet, weights)[0])
    return out


def test_criterion_3_dtw_oracles():
    t = time.perf_counter()
    rng = random.Random(3)
    brute = sum(
        dtw(a, b).distance == brute_force_dtw(a, b)
        for a, b in (([rng.randrange(4) for _ in range(rng.randint(1, 8))],
                      [rng.randrange(4) for _ in range(rng.randint(1, 8))]) for _ in range(1000)))
    nrng = np.random.default_rng(3)
    full = 0
    for _ in range(100):
        a = nrng.integers(0, 6, nrng.integers(1, 513)).astype(np.uint64)
        b = nrng.integers(0, 6, nrng.integers(1, 513)).astype(np.uint64)
        full += fastdtw(a, b, max(len(a), len(b))).distance == dtw(a, b).distance
    # instruction-hash pairs: a drawn from the corpus distribution, b an edited copy of a
    hashes = np.concatenate([hash_instructions(extract_instruction_sequence(f.module)) for f in FIXTURES])
    alphabet, counts = np.unique(hashes, return_counts=True)
    alphabet, weights = [int(x) for x in alphabet], counts.tolist()
    close = 0
    for _ in range(100):
        a = rng.choices(alphabet, weights, k=500)
        b = _edited(rng, a, alphabet, weights, 0.2)
        b = (b + rng.choices(alphabet, weights, k=500))[:500]
        exact = dtw(a, b).distance
        close += abs(fastdtw(a, b, 10).distance - exact) <= 0.05 * exact
    elapsed = time.perf_counter() - t
    ok = brute == 1000 and full == 100 and close >= 95 and elapsed < 5 * 60
    assert record(3, ok, f"brute force {brute}/1000, full radius {full}/100, "
                         f"radius 10 within 5% {close}/100", t)


def test_criterion_4_distance_trend():
    t = time.perf_counter()
    rising, rows = 0, []
    for fx in FIXTURES:
        m1000, trace = random_stack(fx.name)
        m100, prefix = stack(fx.module, 100, STACK_SEED, KINDS, 100, fx.suite)
        assert [e.spec for e in prefix.entries] == [e.spec for e in trace.entries[:100]]
        d100 = distance_report(fx.module, m100, "exact").distance
        d1000 = distance_report(fx.module, m1000, "exact").distance
        rising += d1000 > d100
        rows.append(f"{fx.name}:{d100:.0f}->{d1000:.0f}")
    share = rising / len(FIXTURES)
    elapsed = time.perf_counter() - t
    ok = share >= 0.7 and elapsed < 10 * 60
    assert record(4, ok, f"{rising}/{len(FIXTURES)} rising ({share:.0%}); " + " ".join(rows), t)


def test_criterion_5_detector_sanity(training_corpus):
    t = time.perf_counter()
    scores = {}
    for kind in ("image-centroid", "feature-naive-bayes"):
        model = train_detector(training_corpus, kind)
        pred = [predict(model, x).label for x, _ in training_corpus]
        scores[kind] = f1(ConfusionCounts.from_labels([lab for _, lab in training_corpus], pred))
    rules = train_detector(training_corpus, "cfg-rules")
    flagged = sum(predict(rules, f.data).label == "miner" for f in MINERS)
    false_alarms = sum(predict(rules, f.data).label == "miner" for f in BENIGN)
    ok = all(s == 1.0 for s in scores.values()) and flagged == len(MINERS) >= 6 and false_alarms == 0
    assert record(5, ok, f"F1 centroid={scores['image-centroid']:.2f} "
                         f"naive-bayes={scores['feature-naive-bayes']:.2f}; cfg-rules flags "
                         f"{flagged}/{len(MINERS)} miners, {false_alarms}/{len(BENIGN)} benign", t)


def test_criterion_6_robustness_asymmetry(training_corpus):
    t = time.perf_counter()
    rules = train_detector(training_corpus, "cfg-rules")
    centroid = centroid_model()
    rules_same, shifted, deltas = 0, 0, []
    for fx in FIXTURES:
        out, _ = stack(fx.module, 1000, STACK_SEED, NON_CODE, 100, fx.suite)
        assert extract_instruction_sequence(out) == extract_instruction_sequence(fx.module)
        before, after = predict(rules, fx.data), predict(rules, out)
        rules_same += json.dumps(before.to_json(), sort_keys=True) == json.dumps(after.to_json(), sort_keys=True)
        if fx.label == "miner":
            d = abs(predict(centroid, out).miner_probability - predict(centroid, fx.data).miner_probability)
            deltas.append(f"{fx.name}:{d:.3f}")
            shifted += d >= 0.05
    ok = rules_same == len(FIXTURES) and shifted * 2 >= len(MINERS)
    assert record(6, ok, f"cfg-rules identical on {rules_same}/{len(FIXTURES)}; centroid moved "
                         f">=0.05 on {shifted}/{len(MINERS)} miners ({' '.join(deltas)})", t)


def test_criterion_7_strategic_evasion():
    t = time.perf_counter()
    model = centroid_model()
    results, winner = [], None
    for fx in MINERS:
        p0 = predict(model, fx.data).miner_probability
        if p0 < 0.9:
            results.append(f"{fx.name}:start {p0:.3f}")
            continue
        tr = evade_strategic(fx.module, model, top_k=2, max_iters=1000, seed=0, stop_below=0.1,
                             suite=fx.suite)
        results.append(f"{fx.name}:{tr.outcome}@{tr.iterations} p={tr.final_probability:.3f}")
        if tr.outcome == EVADED and tr.final_probability < 0.1 and winner is None:
            if differential_check(fx.module, tr.module, fx.suite):
                winner = fx.name
    elapsed = time.perf_counter() - t
    ok = winner is not None and elapsed < 10 * 60
    assert record(7, ok, f"evaded: {winner}; " + " ".join(results), t)


def test_criterion_8_overhead_bookkeeping():
    t = time.perf_counter()
    custom, peep = [], []
    for fx in MINERS:
        m_custom, _ = stack(fx.module, 1000, STACK_SEED, ("add-custom-section",), 100, fx.suite)
        custom.append(relative_fuel_proxy(fx.module, m_custom, fx.hash_export))
        m_peep, _ = stack(fx.module, 1000, STACK_SEED, ("peephole",), 100, fx.suite)
        peep.append(relative_fuel_proxy(fx.module, m_peep, fx.hash_export))
    growth = []
    for fx in FIXTURES:
        out, _ = random_stack(fx.name)
        growth.append(size_increase(len(fx.data), len(encode_module(out))).increase_pct)
    ok = all(r == 100.0 for r in custom) and all(r <= 100.0 for r in peep) and all(g > 0 for g in growth)
    assert record(8, ok, f"custom-only proxy {min(custom):.1f}-{max(custom):.1f}%; peephole-only proxy "
                         f"{min(peep):.1f}-{max(peep):.1f}%; size increase {min(growth):.0f}-"
                         f"{max(growth):.0f}% (median {np.median(growth):.0f}%)", t)


def _cli(argv):
    out = io.StringIO()
    assert cli_main([str(a) for a in argv], out) == 0
    report = json.loads(out.getvalue())
    report.pop("wall_clock", None)
    return json.dumps(report, sort_keys=True).encode()


def _experiment(tmp):
    hash_fixture = next(f for f in MINERS if f.name == "xor_rotate_hash").path
    model = tmp / "centroid.json"
    parts = [
        _cli(["train", "--kind", "image-centroid", "--out", model, "--seed", 5]),
        model.read_bytes(),
        _cli(["detect", "--model", model, "--jobs", 2]),
        _cli(["obfuscate", "--in", hash_fixture, "--out", tmp / "o.wasm", "--stack", 300, "--seed", 5,
              "--trace", tmp / "t.jsonl"]),
        (tmp / "o.wasm").read_bytes(),
        (tmp / "t.jsonl").read_bytes(),
        _cli(["compare", "--orig", hash_fixture, "--obf", tmp / "o.wasm", "--method", "exact"]),
        _cli(["evade", "--in", hash_fixture, "--model", model, "--seed", 5, "--trials", 5,
              "--stop-below", "0.1"]),
        _cli(["bench", "--in", hash_fixture, "--duration", 0.2, "--warmup", 0]),
    ]
    return parts


def test_criterion_9_reproducibility(tmp_path):
    t = time.perf_counter()
    first = _experiment(tmp_path)
    second = _experiment(tmp_path)
    same = sum(x == y for x, y in zip(first, second))
    ok = same == len(first)
    assert record(9, ok, f"{same}/{len(first)} outputs byte-identical across reruns", t)
