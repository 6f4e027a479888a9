import pytest

from rsaware.logic import program_from_text
from rsaware.shortcuts import Remapping, Support, identity_remapping


@pytest.fixture
def xor():
    return program_from_text("(c1 & !c2) | (!c1 & c2)", 2)


@pytest.fixture
def nand():
    return program_from_text("!c1 | !c2", 2)


@pytest.fixture
def first_bit():
    return program_from_text("c1", 2)


@pytest.fixture
def full2():
    return Support.full(2)


def flip_second(p, s):
    return Remapping({g: (g[0], 1 - g[1]) for g in s}, p, s)


def swap_all(p, s):
    return Remapping({g: (1 - g[0], 1 - g[1]) for g in s}, p, s)


@pytest.fixture
def first_bit_mix(first_bit, full2):
    return [identity_remapping(first_bit, full2), flip_second(first_bit, full2)]


@pytest.fixture
def xor_mix(xor, full2):
    return [identity_remapping(xor, full2), swap_all(xor, full2)]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
