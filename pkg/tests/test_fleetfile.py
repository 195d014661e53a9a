import pytest

from unitdispatch import load_fleet
from unitdispatch.fleetfile import FleetFileError, parse_fleet

from conftest import A1, A2_CASE1, B1, B2_CASE1

GOOD = """\
units:
  - id: "1"
    a: 0.022
    b: 1.375e-4
  - id: pump-b
    a: 0.0287
    b: 0.000233333
    p_max: 100
"""


def test_fixtures(case1_file, case2_file):
    ff = load_fleet(case1_file)
    assert ff.fleet.ids == ("1", "2")
    assert ff.fleet["2"].curve.a == pytest.approx(A2_CASE1, rel=1e-12)
    assert ff.fleet["2"].curve.b == pytest.approx(B2_CASE1, rel=1e-12)
    assert ff.reference_breakpoints == (96.0, 150.0)
    (ref,) = ff.reference_allocations
    assert ref.p_t == 200.0 and ref.loads == {"1": 80.0, "2": 120.0}
    ff2 = load_fleet(case2_file)
    assert ff2.reference_breakpoints == (62.61, 103.36)
    assert not ff.fleet.problems() and not ff2.fleet.problems()


def test_defaults_and_exponents():
    fleet = parse_fleet(GOOD).fleet
    assert fleet["1"].curve.b == 1.375e-4
    assert fleet["1"].curve.p_max == pytest.approx(A1 / B1)
    assert fleet["pump-b"].curve.p_max == 100.0


def expect_error(text, line, fragment):
    with pytest.raises(FleetFileError) as info:
        parse_fleet(text, "f.fleet")
    assert info.value.line == line
    assert fragment in str(info.value)
    assert str(info.value).startswith(f"f.fleet:{line}:")
    return info.value


def test_unknown_key():
    err = expect_error(GOOD.replace("p_max: 100", "pmax: 100"), 8, "unknown key 'pmax'")
    assert err.column == 5


def test_unknown_top_key():
    expect_error(GOOD + "extra: 1\n", 9, "unknown key 'extra'")


def test_malformed_yaml():
    expect_error("units:\n  - id: 1\n    a: [0.1\n", 4, "")


def test_missing_id():
    expect_error("units:\n  - a: 0.1\n    b: 0.001\n", 2, "missing 'id'")


def test_duplicate_ids():
    expect_error('units:\n  - {id: x, a: 0.02, b: 0.0001}\n  - {id: x, a: 0.02, b: 0.0001}\n',
                 3, "duplicate unit id 'x'")


def test_duplicate_key():
    expect_error("units:\n  - id: x\n    a: 0.02\n    a: 0.03\n    b: 0.0001\n", 4, "duplicate key")


def test_not_a_number():
    expect_error("units:\n  - id: x\n    a: fast\n    b: 0.0001\n", 3, "must be a number")
    expect_error("units:\n  - id: x\n    a: .nan\n    b: 0.0001\n", 3, "must be a number")


def test_empty():
    with pytest.raises(FleetFileError):
        parse_fleet("")
    with pytest.raises(FleetFileError):
        parse_fleet("units: []\n")


def test_reference_unknown_unit():
    text = GOOD + "reference:\n  allocations:\n    - pt: 10\n      loads: {zz: 10}\n"
    expect_error(text, 12, "unknown key 'zz'")


def test_invalid_curve_still_loads():
    fleet = parse_fleet("units:\n  - {id: x, a: 0.1, b: 0.001}\n").fleet
    assert "x" in fleet.problems()


def test_missing_file(tmp_path):
    with pytest.raises(FleetFileError):
        load_fleet(tmp_path / "nope.fleet")
