"""Parse, validate, and re-encode WebAssembly binaries."""

from .binary import encode_module, normalize, parse_module
from .module import (
    Custom, Data, Element, Export, Function, FuncType, Global, GlobalType, Import, Instr,
    Limits, Module, TableType,
)
from .text import dump_module, instr_text
from .validate import ValidationResult, annotate_function, validate


def extract_instruction_sequence(m: Module) -> list:
    """All defined function bodies concatenated in function-index order."""
    seq = []
    for f in m.functions:
        seq.extend(f.body)
    return seq


__all__ = [
    "Custom", "Data", "Element", "Export", "Function", "FuncType", "Global", "GlobalType",
    "Import", "Instr", "Limits", "Module", "TableType", "ValidationResult", "annotate_function",
    "dump_module", "encode_module", "extract_instruction_sequence", "instr_text", "normalize",
    "parse_module", "validate",
]
