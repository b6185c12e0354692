import pytest

from nested_admm.generators import GeneratorSpec, generate_instance

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def small_quadratic():
    return generate_instance(GeneratorSpec(d=6, l=5, n1=12, n2=9, seed=3))


@pytest.fixture(scope="session")
def small_logistic():
    return generate_instance(GeneratorSpec(kind="logistic-composition", d=6, l=5, n1=12, n2=9, seed=4))


@pytest.fixture(scope="session")
def small_graph():
    return generate_instance(GeneratorSpec(kind="graph-guided-lasso", d=6, l=5, n1=12, n2=9, seed=5))


@pytest.fixture(scope="session")
def small_online():
    return generate_instance(GeneratorSpec(d=5, l=4, seed=6, mode="online"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
