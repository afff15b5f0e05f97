"""Deterministic interpreter used for differential checks and throughput measurement."""

from .machine import (
    DEFAULT_FUEL, FUEL_EXHAUSTED, TRAP, VALUES, ExecResult, Instance, host_stubs, instantiate,
    invoke,
)
from .differential import Diverged, Equivalent, differential_check

__all__ = [
    "DEFAULT_FUEL", "FUEL_EXHAUSTED", "TRAP", "VALUES", "Diverged", "Equivalent", "ExecResult",
    "Instance", "differential_check", "host_stubs", "instantiate", "invoke",
]
