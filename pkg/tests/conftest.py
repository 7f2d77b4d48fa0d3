import pytest

from msvc.field import FieldModulus, FieldRandom

# 0.999 quantile of the chi-square distribution with 4 degrees of freedom.
CHI2_4_999 = 18.467


def chi_square(counts, expected):
    return sum((c - expected) ** 2 / expected for c in counts)


class TapeRandom(FieldRandom):
    """Replays a fixed list of field elements; used to enumerate every coin sequence."""

    def __init__(self, tape):
        super().__init__(0)
        self.tape = list(tape)
        self.pos = 0

    def elements(self, count, q):
        out = self.tape[self.pos:self.pos + count]
        if len(out) != count:
            raise AssertionError("tape exhausted")
        self.pos += count
        return out


@pytest.fixture
def q7():
    return FieldModulus(7)


@pytest.fixture
def q101():
    return FieldModulus(101)


@pytest.fixture
def rng():
    return FieldRandom(1234)


# One line per acceptance criterion, shown in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
