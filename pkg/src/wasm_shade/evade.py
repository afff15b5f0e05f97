"""Detector-guided transformation search."""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field

from .errors import SemanticsViolation
from .interp import DEFAULT_FUEL, differential_check
from .mutate import KINDS, MutationTrace, TransformationSpec, apply, default_suite, module_digest
from .wasm import validate

EVADED, EXHAUSTED = "evaded", "exhausted"


def _scorer(model):
    """Detector models go through detect.predict; plain callables map Module -> probability."""
    if callable(model):
        return model
    from .detect import predict

    return lambda m: predict(model, m).miner_probability


@dataclass
class EvasionTrace:
    seed: int
    kinds: list
    initial_probability: float
    stop_below: float
    steps: list = field(default_factory=list)  # (iteration, spec, probability, applied)
    outcome: str = EXHAUSTED
    ranking: list | None = None
    mutations: MutationTrace | None = None
    module: object = None  # final module, not serialised

    @property
    def final_probability(self) -> float:
        return self.steps[-1][2] if self.steps else self.initial_probability

    @property
    def iterations(self) -> int:
        return self.steps[-1][0] if self.steps else 0

    def to_json(self):
        return {
            "seed": self.seed, "kinds": list(self.kinds), "outcome": self.outcome,
            "initial_probability": self.initial_probability,
            "final_probability": self.final_probability, "iterations": self.iterations,
            "stop_below": self.stop_below,
            "ranking": None if self.ranking is None else [[k, d] for k, d in self.ranking],
            "steps": [{"iteration": i, **s.to_json(), "probability": p, "applied": a}
                      for i, s, p, a in self.steps],
            "input_digest": self.mutations.input_digest if self.mutations else None,
            "output_digest": self.mutations.output_digest if self.mutations else None,
        }

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("iteration", "kind", "probability"))
        w.writerow((0, "", repr(self.initial_probability)))
        for i, s, p, _ in self.steps:
            w.writerow((i, s.kind, repr(p)))


def _check(orig, cur, it, suite, fuel, bindings, trace):
    v = validate(cur)
    if not v.ok:
        raise SemanticsViolation(it, f"invalid module: {v.violations[0]}", trace)
    if suite:
        r = differential_check(orig, cur, suite, fuel, bindings)
        if not r:
            raise SemanticsViolation(it, r.detail, trace)


def _search(m, score, kinds, max_iters, seed, stop_below, check_every, suite, fuel, bindings):
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    p0 = float(score(m))
    pool = sorted(set(kinds))
    if not pool:
        raise ValueError("no transformation kinds to draw from")
    suite = default_suite(m) if suite is None else list(suite)
    trace = EvasionTrace(seed, pool, p0, stop_below)
    muts = MutationTrace(module_digest(m))
    master = random.Random(seed)
    cur = m
    last_checked = 0
    for it in range(1, max_iters + 1):
        spec = TransformationSpec(master.choice(pool), master.getrandbits(64))
        cur, entry = apply(cur, spec, it)
        muts.entries.append(entry)
        p = float(score(cur))
        trace.steps.append((it, spec, p, entry.applied))
        if it % check_every == 0:
            _check(m, cur, it, suite, fuel, bindings, muts)
            last_checked = it
        if p < stop_below:
            trace.outcome = EVADED
            break
    if last_checked != trace.iterations:
        _check(m, cur, trace.iterations, suite, fuel, bindings, muts)
    muts.output_digest = module_digest(cur)
    trace.mutations = muts
    trace.module = cur
    return trace


def _require_miner(m, score, threshold=0.5):
    if score(m) < threshold:
        raise ValueError("input is not classified as a miner; nothing to evade")


def evade_random(m, model, max_iters=1000, seed=0, allowed=KINDS, stop_below=0.5,
                 check_every=100, suite=None, fuel=DEFAULT_FUEL, bindings=None) -> EvasionTrace:
    """Stack uniformly drawn kinds until the miner probability drops below ``stop_below``."""
    score = _scorer(model)
    _require_miner(m, score)
    return _search(m, score, allowed, max_iters, seed, stop_below, check_every, suite, fuel, bindings)


def rank_transformations(m, model, trials_per_kind=30, seed=0, allowed=KINDS) -> list:
    """(kind, mean probability drop) over seeded single applications, best first."""
    if trials_per_kind < 1:
        raise ValueError("trials_per_kind must be at least 1")
    score = _scorer(model)
    p0 = float(score(m))
    rng = random.Random(seed)
    out = []
    for kind in sorted(set(allowed)):
        drops = []
        for _ in range(trials_per_kind):
            mutated, entry = apply(m, TransformationSpec(kind, rng.getrandbits(64)))
            drops.append(p0 - float(score(mutated)) if entry.applied else 0.0)
        out.append((kind, sum(drops) / len(drops)))
    out.sort(key=lambda kd: (-kd[1], kd[0]))
    return out


def evade_strategic(m, model, top_k=2, max_iters=1000, seed=0, allowed=KINDS, trials_per_kind=30,
                    stop_below=0.5, check_every=100, suite=None, fuel=DEFAULT_FUEL,
                    bindings=None) -> EvasionTrace:
    """Rank kinds once, then stack only the ``top_k`` best."""
    if top_k < 1:
        raise ValueError("top_k must be at least 1")
    score = _scorer(model)
    _require_miner(m, score)
    ranking = rank_transformations(m, score, trials_per_kind, seed, allowed)
    pool = [k for k, _ in ranking[:top_k]]
    trace = _search(m, score, pool, max_iters, seed, stop_below, check_every, suite, fuel, bindings)
    trace.ranking = ranking
    return trace
