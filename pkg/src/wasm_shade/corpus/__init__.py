"""Bundled fixture corpus: small benign programs and miner-like hash loops."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from ..wasm import parse_module

ROOT = Path(__file__).resolve().parent


@dataclass(frozen=True)
class Fixture:
    name: str
    label: str
    path: Path
    suite: tuple
    hash_export: str | None = None

    @property
    def data(self) -> bytes:
        return self.path.read_bytes()

    @property
    def module(self):
        return parse_module(self.data)


@lru_cache(maxsize=None)
def load_fixtures() -> tuple:
    manifest = json.loads((ROOT / "manifest.json").read_text())
    return tuple(
        Fixture(e["name"], e["label"], ROOT / e["path"],
                tuple((exp, tuple(args)) for exp, args in e["suite"]),
                e.get("hash_export"))
        for e in manifest)


def fixture(name: str) -> Fixture:
    for f in load_fixtures():
        if f.name == name:
            return f
    raise KeyError(name)
