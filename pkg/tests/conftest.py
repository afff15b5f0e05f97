import pytest

from wasm_shade.corpus import load_fixtures
from wasm_shade.wasm import Export, Function, FuncType, Instr, Module


def I(op, *imm):
    return Instr(op, tuple(imm))


def single_func(body, params=(), results=("i32",), locals_=(), name="f"):
    """Module exporting one function whose body is ``body`` plus the closing end."""
    return Module(types=(FuncType(tuple(params), tuple(results)),),
                  functions=(Function(0, tuple(locals_), tuple(body) + (I("end"),)),),
                  exports=(Export(name, "func", 0),))


FIXTURES = load_fixtures()
MINERS = [f for f in FIXTURES if f.label == "miner"]
BENIGN = [f for f in FIXTURES if f.label == "benign"]


@pytest.fixture(scope="session")
def training_corpus():
    return [(f.data, f.label) for f in FIXTURES]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
