class WasmShadeError(Exception):
    """Base class for all errors raised by this package."""


class MalformedBinary(WasmShadeError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnsupportedFeature(WasmShadeError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class InvalidModule(WasmShadeError):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


class UnboundImport(WasmShadeError):
    pass


class SegmentOutOfBounds(WasmShadeError):
    pass


class Trap(WasmShadeError):
    """Runtime trap raised inside the interpreter; ``kind`` names the cause."""

    def __init__(self, kind):
        super().__init__(kind)
        self.kind = kind


class NoSuchExport(WasmShadeError):
    pass


class SignatureMismatch(WasmShadeError):
    pass


class SemanticsViolation(WasmShadeError):
    def __init__(self, iteration, detail, trace=None):
        super().__init__(f"semantics violated at iteration {iteration}: {detail}")
        self.iteration = iteration
        self.detail = detail
        self.trace = trace


class EmptySequence(WasmShadeError, ValueError):
    pass


class EmptyInput(WasmShadeError, ValueError):
    pass


class DegenerateCorpus(WasmShadeError, ValueError):
    pass


class KindMismatch(WasmShadeError, TypeError):
    pass


class ZeroBaseline(WasmShadeError, ValueError):
    pass


class ReplayMismatch(WasmShadeError):
    """A trace does not reproduce against the given module."""


class SequenceTooLong(WasmShadeError, ValueError):
    """Exact DTW refused: the cost matrix would exceed the cell budget."""
