"""Detection, size and throughput metrics."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

from .errors import ZeroBaseline
from .interp import DEFAULT_FUEL, VALUES, instantiate, invoke


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @classmethod
    def from_labels(cls, truth, predicted, positive="miner"):
        tp = fp = fn = tn = 0
        for t, p in zip(truth, predicted, strict=True):
            if p == positive:
                tp, fp = (tp + 1, fp) if t == positive else (tp, fp + 1)
            else:
                fn, tn = (fn + 1, tn) if t == positive else (fn, tn + 1)
        return cls(tp, fp, fn, tn)

    def to_json(self):
        return asdict(self)


def _ratio(num, den):
    return num / den if den else 0.0


def precision(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fn)


def f1_from(p: float, r: float) -> float:
    return _ratio(2 * p * r, p + r)


def f1(c: ConfusionCounts) -> float:
    return f1_from(precision(c), recall(c))


def detection_scores(c: ConfusionCounts) -> dict:
    return {"precision": precision(c), "recall": recall(c), "f1": f1(c), **c.to_json()}


@dataclass(frozen=True)
class SizeMetric:
    before: int
    after: int
    increase_pct: float

    def to_json(self):
        return asdict(self)


def size_increase(before: int, after: int) -> SizeMetric:
    """(after - before) / before * 100. Works for file sizes and native-code sizes alike."""
    if before <= 0:
        raise ZeroBaseline("size baseline must be positive")
    return SizeMetric(before, after, (after - before) / before * 100.0)


@dataclass(frozen=True)
class HashRateMetric:
    hashes: int
    seconds: float
    rate: float
    fuel_per_hash: float  # mean fuel over the fixed proxy nonces
    proxy_rate: float  # hashes per million fuel

    def to_json(self):
        return asdict(self)


def _nonce(i):
    return i if i < 2 ** 31 else i - 2 ** 32


def fuel_per_hash(m, export, nonces=16, bindings=None, fuel=DEFAULT_FUEL) -> float:
    """Mean executed instructions per hash over nonces 0..n-1 on a fresh instance."""
    inst = instantiate(m, bindings)
    total = 0
    for i in range(nonces):
        r = invoke(inst, export, (_nonce(i),), fuel)
        if r.outcome != VALUES:
            raise RuntimeError(f"{export}({i}) did not return: {r.outcome} {r.trap}")
        total += r.fuel_used
    return total / nonces


def bench_hash_rate(m, export="hash", warmup=2.0, duration=10.0, bindings=None,
                    proxy_nonces=16, clock=time.perf_counter) -> HashRateMetric:
    """Call ``export`` with increasing nonces for ``duration`` seconds after a warmup."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    inst = instantiate(m, bindings)
    i = 0
    end = clock() + warmup
    while clock() < end:
        invoke(inst, export, (_nonce(i),))
        i += 1
    h = 0
    start = clock()
    end = start + duration
    while True:
        invoke(inst, export, (_nonce(i + h),))
        h += 1
        now = clock()
        if now >= end:
            break
    t = now - start
    fph = fuel_per_hash(m, export, proxy_nonces, bindings)
    return HashRateMetric(h, t, h / t, fph, 1e6 / fph)


def relative_rate(original: HashRateMetric, obfuscated: HashRateMetric) -> dict:
    """Obfuscated throughput as a percentage of the original, wall clock and fuel proxy."""
    return {"wall_pct": obfuscated.rate / original.rate * 100.0,
            "fuel_proxy_pct": original.fuel_per_hash / obfuscated.fuel_per_hash * 100.0}


def relative_fuel_proxy(m_orig, m_obf, export="hash", nonces=16, bindings=None) -> float:
    """Deterministic relative hash rate: original fuel over obfuscated fuel, in percent."""
    return (fuel_per_hash(m_orig, export, nonces, bindings)
            / fuel_per_hash(m_obf, export, nonces, bindings) * 100.0)
