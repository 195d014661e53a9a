import numpy as np
import pytest

from unitdispatch import EfficiencyCurve, Fleet, Unit, fixture_path, load_fleet

# exact similar-family coefficients for case 1, device 2 (beta = 1.5)
A1, B1 = 0.022, 0.0001375
A2_CASE1, B2_CASE1 = A1 / 1.5, B1 / 2.25
A2_CASE2, B2_CASE2 = 0.0287, 0.000233333

ACCEPTANCE_RESULTS = []


def random_curve(rng, cap_fraction=(0.6, 1.0)):
    """Valid curve with peak efficiency in [0.5, 0.98] at an input in [20, 200]."""
    p_e = rng.uniform(20.0, 200.0)
    eta_e = rng.uniform(0.5, 0.98)
    a = 2.0 * eta_e / p_e
    b = eta_e / p_e**2
    return EfficiencyCurve(a, b, (a / b) * rng.uniform(*cap_fraction))


def random_fleet(rng, n):
    return Fleet(tuple(Unit(str(k + 1), random_curve(rng)) for k in range(n)))


def random_family(rng, n):
    """Similar family: unit k is the reference stretched by beta_k in [0.5, 3]."""
    ref = random_curve(rng, cap_fraction=(1.0, 1.0))
    betas = [1.0] + list(rng.uniform(0.5, 3.0, size=n - 1))
    units = tuple(Unit(str(k + 1), ref.scaled(beta)) for k, beta in enumerate(betas))
    return Fleet(units), betas


@pytest.fixture
def case1():
    return Fleet((
        Unit("1", EfficiencyCurve(A1, B1)),
        Unit("2", EfficiencyCurve(A2_CASE1, B2_CASE1)),
    ))


@pytest.fixture
def case2():
    return Fleet((
        Unit("1", EfficiencyCurve(A1, B1)),
        Unit("2", EfficiencyCurve(A2_CASE2, B2_CASE2)),
    ))


@pytest.fixture
def case1_file():
    return fixture_path("case1")


@pytest.fixture
def case2_file():
    return fixture_path("case2")


@pytest.fixture
def unit1():
    return Unit("1", EfficiencyCurve(A1, B1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
