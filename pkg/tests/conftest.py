import pytest

from perron.benchmarks import basilica, newton_quadratic, z_squared
from perron.equilibrium import sample_equilibrium

# acceptance outcomes, filled by test_acceptance.py and printed at the end
ACCEPTANCE = {}


def record(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {k:2d}. {title}: {detail}")


@pytest.fixture(scope="session")
def z2():
    return z_squared()


@pytest.fixture(scope="session")
def z2m1():
    return basilica()


@pytest.fixture(scope="session")
def newton():
    return newton_quadratic()


@pytest.fixture(scope="session")
def z2_sample(z2):
    return sample_equilibrium(z2, 100_000, 50, seed=11)


@pytest.fixture(scope="session")
def z2_small(z2):
    return sample_equilibrium(z2, 20_000, 50, seed=12)


@pytest.fixture(scope="session")
def z2m1_sample(z2m1):
    return sample_equilibrium(z2m1, 20_000, 50, seed=13)


@pytest.fixture(scope="session")
def newton_sample(newton):
    return sample_equilibrium(newton, 20_000, 50, seed=14)
