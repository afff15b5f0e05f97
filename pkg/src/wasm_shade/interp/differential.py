from __future__ import annotations

from dataclasses import dataclass

from ..errors import WasmShadeError
from .machine import DEFAULT_FUEL, instantiate, invoke


@dataclass(frozen=True)
class Equivalent:
    cases: int

    def __bool__(self):
        return True


@dataclass(frozen=True)
class Diverged:
    detail: str
    case: tuple | None = None
    original: object = None
    mutated: object = None

    def __bool__(self):
        return False


def differential_check(orig, mut, suite, fuel=DEFAULT_FUEL, bindings=None):
    """Run ``suite`` against both modules and compare observable behaviour.

    Each module gets one instance; cases run in order on it, so state left
    by earlier cases is part of what is compared. Fuel is not compared.
    """
    suite = list(suite)
    if not suite:
        raise ValueError("differential suite must be non-empty")
    try:
        a = instantiate(orig, bindings)
        b = instantiate(mut, bindings)
    except WasmShadeError as exc:
        return Diverged(f"setup: {type(exc).__name__}: {exc}")
    for export, args in suite:
        try:
            ra = invoke(a, export, tuple(args), fuel)
            rb = invoke(b, export, tuple(args), fuel)
        except WasmShadeError as exc:
            return Diverged(f"setup: {type(exc).__name__}: {exc}", (export, tuple(args)))
        if not ra.same_behaviour(rb):
            return Diverged(f"{export}{tuple(args)}: {ra.to_json()} != {rb.to_json()}",
                            (export, tuple(args)), ra, rb)
    return Equivalent(len(suite))
