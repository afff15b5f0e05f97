"""Fixed-layout structural feature vectors."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..wasm import encode_module, parse_module
from ..wasm import opcodes as ops
from ..wasm.binary import uleb

IMPORT_TOKENS = ("env", "memory", "math", "crypto", "time", "wasi")
SIZE_FEATURES = ("size", "custom_share")

FEATURE_NAMES = (
    "size", "sections", "types", "functions", "imports", "exports", "memories", "globals",
    "instructions", "op_arith", "op_memory", "op_control", "op_call", "op_other",
    "mean_body_length", "custom_share",
) + tuple(f"import_{t}" for t in IMPORT_TOKENS)

_CONTROL = frozenset(("block", "loop", "if", "else", "end", "br", "br_if", "br_table", "return",
                      "unreachable"))
_MEMORY = frozenset(n for _, n, *_ in ops.LOADS + ops.STORES) | {"memory.size", "memory.grow"}


def op_category(op: str) -> str:
    if op in _CONTROL:
        return "control"
    if op in _MEMORY:
        return "memory"
    if op in ("call", "call_indirect"):
        return "call"
    info = ops.BY_NAME[op]
    if info.params:
        return "arith"
    return "other"


def _custom_bytes(c) -> int:
    raw = c.name.encode("utf-8")
    body = len(uleb(len(raw))) + len(raw) + len(c.payload)
    return 1 + len(uleb(body)) + body


def extract_features(m) -> np.ndarray:
    """Feature vector in FEATURE_NAMES order; all entries finite and non-negative."""
    size = len(encode_module(m))
    sections = sum(1 for x in (m.types, m.imports, m.functions, m.tables, m.memories, m.globals,
                               m.exports, m.elements, m.data) if x)
    sections += bool(m.functions) + (m.start is not None)  # code section, start section
    cats = {"arith": 0, "memory": 0, "control": 0, "call": 0, "other": 0}
    total = 0
    for f in m.functions:
        total += len(f.body)
        for ins in f.body:
            cats[op_category(ins.op)] += 1
    names = [f"{i.module}.{i.name}".lower() for i in m.imports]
    vec = [
        size, sections, len(m.types), len(m.functions), len(m.imports), len(m.exports),
        m.num_memories(), len(m.global_types()), total,
        cats["arith"], cats["memory"], cats["control"], cats["call"], cats["other"],
        total / len(m.functions) if m.functions else 0.0,
        sum(_custom_bytes(c) for c in m.customs) / size,
    ] + [float(any(t in n for n in names)) for t in IMPORT_TOKENS]
    return np.asarray(vec, dtype=np.float64)


class FeatureExtractor(TransformerMixin, BaseEstimator):
    """Map modules (or raw binaries) to feature rows."""

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        rows = [extract_features(parse_module(x) if isinstance(x, (bytes, bytearray)) else x)
                for x in X]
        return np.stack(rows) if rows else np.zeros((0, len(FEATURE_NAMES)))
