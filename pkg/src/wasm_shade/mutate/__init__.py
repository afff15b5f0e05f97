"""Semantics-preserving transformations, applied singly or stacked."""

from __future__ import annotations

import random

from ..errors import ReplayMismatch, SemanticsViolation
from ..interp import DEFAULT_FUEL, differential_check
from ..wasm import validate
from .items import add_custom_section, add_function, add_type, remove_item, removable
from .motion import MUTATORS, code_motion
from .peephole import RULES, peephole
from .spec import (
    ADD_CUSTOM_SECTION, ADD_FUNCTION, ADD_TYPE, CODE_MOTION, KINDS, PEEPHOLE, REMOVE_ITEM,
    SEED_MASK, MutationTrace, TraceEntry, TransformationSpec, module_digest,
)

_APPLY = {
    CODE_MOTION: code_motion,
    PEEPHOLE: peephole,
    ADD_FUNCTION: add_function,
    ADD_TYPE: add_type,
    ADD_CUSTOM_SECTION: add_custom_section,
    REMOVE_ITEM: remove_item,
}


def apply(m, t: TransformationSpec, iteration: int = 0):
    """Apply one transformation. Returns the new module and its trace entry.

    When the kind has no applicable site the module comes back unchanged
    with ``applied=False``.
    """
    rng = random.Random(t.seed)
    out, site = _APPLY[t.kind](m, rng, t.params, m.num_imported_funcs)
    if site is None:
        return m, TraceEntry(iteration, t, None, False)
    return out, TraceEntry(iteration, t, site, True)


_SAMPLE_ARGS = {"i32": (0, 1, 7, -3), "i64": (0, 1, 1 << 40, -5),
                "f32": (0.0, 1.0, 2.5, -0.5), "f64": (0.0, 1.0, 3.25, -1e10)}


def default_suite(m) -> list:
    """Small argument sweep over every exported function, for modules without a suite."""
    suite = []
    for e in sorted(m.exports, key=lambda e: e.name):
        if e.kind != "func":
            continue
        params = m.func_type(e.index).params
        for col in range(4):
            suite.append((e.name, tuple(_SAMPLE_ARGS[p][(col + i) % 4] for i, p in enumerate(params))))
    return suite


def _checkpoint(orig, cur, iteration, suite, fuel, bindings, trace):
    v = validate(cur)
    if not v.ok:
        raise SemanticsViolation(iteration, f"invalid module: {v.violations[0]}", trace)
    if suite:
        r = differential_check(orig, cur, suite, fuel, bindings)
        if not r:
            raise SemanticsViolation(iteration, r.detail, trace)


def stack(m, n: int, seed: int, allowed=KINDS, check_every: int = 100, suite=None,
          fuel: int = DEFAULT_FUEL, bindings=None):
    """Apply ``n`` transformations with kinds drawn uniformly from ``allowed``.

    Every ``check_every`` iterations (and after the last one) the current
    module is validated and compared with the original on ``suite``. A
    divergence raises SemanticsViolation carrying the trace up to that point.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    kinds = sorted(set(allowed))
    if not kinds:
        raise ValueError("allowed kinds must be non-empty")
    bad = set(kinds) - set(KINDS)
    if bad:
        raise ValueError(f"unknown kinds: {sorted(bad)}")
    if check_every < 1:
        raise ValueError("check_every must be positive")
    suite = default_suite(m) if suite is None else list(suite)
    master = random.Random(seed)
    trace = MutationTrace(module_digest(m))
    cur = m
    for it in range(1, n + 1):
        spec = TransformationSpec(master.choice(kinds), master.getrandbits(64))
        cur, entry = apply(cur, spec, it)
        trace.entries.append(entry)
        if it % check_every == 0 or it == n:
            _checkpoint(m, cur, it, suite, fuel, bindings, trace)
    trace.output_digest = module_digest(cur)
    return cur, trace


def replay(m, trace: MutationTrace):
    """Re-run a trace; the result is bit-identical to the module that produced it."""
    if module_digest(m) != trace.input_digest:
        raise ReplayMismatch("input module digest does not match the trace")
    cur = m
    for e in trace.entries:
        cur, again = apply(cur, e.spec, e.iteration)
        if again.applied != e.applied or (e.applied and again.site != e.site):
            raise ReplayMismatch(f"iteration {e.iteration} did not reproduce")
    if trace.output_digest is not None and module_digest(cur) != trace.output_digest:
        raise ReplayMismatch("output digest does not match the trace")
    return cur


__all__ = [
    "ADD_CUSTOM_SECTION", "ADD_FUNCTION", "ADD_TYPE", "CODE_MOTION", "KINDS", "MUTATORS",
    "MutationTrace", "PEEPHOLE", "REMOVE_ITEM", "RULES", "SEED_MASK", "TraceEntry",
    "TransformationSpec", "apply", "default_suite", "module_digest", "removable", "replay", "stack",
]
