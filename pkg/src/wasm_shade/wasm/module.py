"""Immutable in-memory model of a WebAssembly 1.0 module."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import NamedTuple, Optional


class Instr(NamedTuple):
    op: str
    imm: tuple = ()

    def text(self) -> str:
        from .text import instr_text

        return instr_text(self)


class FuncType(NamedTuple):
    params: tuple
    results: tuple


class Limits(NamedTuple):
    min: int
    max: Optional[int] = None


class TableType(NamedTuple):
    limits: Limits
    elem: str = "funcref"


class GlobalType(NamedTuple):
    valtype: str
    mutable: bool = False


class Import(NamedTuple):
    module: str
    name: str
    kind: str  # func | table | memory | global
    desc: object  # type index | TableType | Limits | GlobalType


class Function(NamedTuple):
    type_idx: int
    locals: tuple  # flattened valtypes, one entry per declared local
    body: tuple  # Instr, terminated by the function's closing `end`


class Global(NamedTuple):
    type: GlobalType
    init: tuple


class Export(NamedTuple):
    name: str
    kind: str
    index: int


class Element(NamedTuple):
    table: int
    offset: tuple
    funcs: tuple


class Data(NamedTuple):
    memory: int
    offset: tuple
    init: bytes


class Custom(NamedTuple):
    name: str
    payload: bytes
    # id of the standard section this custom section follows (0 = before all)
    placement: int = 11


@dataclass(frozen=True)
class Module:
    types: tuple = ()
    imports: tuple = ()
    functions: tuple = ()
    tables: tuple = ()
    memories: tuple = ()
    globals: tuple = ()
    exports: tuple = ()
    start: Optional[int] = None
    elements: tuple = ()
    data: tuple = ()
    customs: tuple = field(default=())

    def replace(self, **changes) -> "Module":
        return dataclasses.replace(self, **changes)

    # index spaces --------------------------------------------------------

    def imported(self, kind):
        return [i for i in self.imports if i.kind == kind]

    @property
    def num_imported_funcs(self) -> int:
        return sum(1 for i in self.imports if i.kind == "func")

    @property
    def num_funcs(self) -> int:
        return self.num_imported_funcs + len(self.functions)

    def func_type(self, func_idx: int) -> FuncType:
        n = self.num_imported_funcs
        if func_idx < n:
            return self.types[self.imported("func")[func_idx].desc]
        return self.types[self.functions[func_idx - n].type_idx]

    def global_types(self):
        return [i.desc for i in self.imported("global")] + [g.type for g in self.globals]

    def num_tables(self):
        return len(self.imported("table")) + len(self.tables)

    def num_memories(self):
        return len(self.imported("memory")) + len(self.memories)

    def export(self, name):
        for e in self.exports:
            if e.name == name:
                return e
        return None
