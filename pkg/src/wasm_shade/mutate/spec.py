"""Transformation specs and replayable mutation traces."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..fnv import fnv1a64
from ..wasm import encode_module

CODE_MOTION = "code-motion"
PEEPHOLE = "peephole"
ADD_FUNCTION = "add-function"
ADD_TYPE = "add-type"
ADD_CUSTOM_SECTION = "add-custom-section"
REMOVE_ITEM = "remove-item"
KINDS = (CODE_MOTION, PEEPHOLE, ADD_FUNCTION, ADD_TYPE, ADD_CUSTOM_SECTION, REMOVE_ITEM)

SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class TransformationSpec:
    kind: str
    seed: int
    params: dict = field(default_factory=dict, compare=True, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown transformation kind {self.kind!r}")
        if not 0 <= self.seed <= SEED_MASK:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def to_json(self):
        return {"kind": self.kind, "seed": self.seed, "params": dict(self.params)}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["kind"], int(obj["seed"]), dict(obj.get("params") or {}))


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    spec: TransformationSpec
    site: dict | None
    applied: bool

    def to_json(self):
        return {"iteration": self.iteration, **self.spec.to_json(), "site": self.site,
                "applied": self.applied}

    @classmethod
    def from_json(cls, obj):
        return cls(int(obj["iteration"]), TransformationSpec.from_json(obj), obj.get("site"),
                   bool(obj["applied"]))


def module_digest(m) -> str:
    return f"{fnv1a64(encode_module(m)):016x}"


@dataclass
class MutationTrace:
    input_digest: str
    output_digest: str | None = None
    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def to_jsonl(self) -> str:
        head = {"input_digest": self.input_digest, "output_digest": self.output_digest,
                "entries": len(self.entries)}
        lines = [json.dumps(head, sort_keys=True)]
        lines += [json.dumps(e.to_json(), sort_keys=True) for e in self.entries]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "MutationTrace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty trace")
        head = json.loads(lines[0])
        if "input_digest" not in head:
            raise ValueError("trace is missing its header line")
        entries = [TraceEntry.from_json(json.loads(ln)) for ln in lines[1:]]
        if head.get("entries", len(entries)) != len(entries):
            raise ValueError("trace is truncated")
        return cls(head["input_digest"], head.get("output_digest"), entries)
