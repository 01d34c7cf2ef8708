import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opfproxy.netcase import (
    CaseFormatError,
    CaseValidationError,
    NetworkError,
    build_dc_model,
    format_case,
    load_case,
    nominal_load_vector,
    parse_case,
)
from oracles import angle_flows

TWO_BUS = """
[buses]
1, 0.0, 1
2, 1.0, 0
[branches]
1, 2, 0.1, 1.5
[generators]
1, 0.0, 2.0, 1.0, 10.0, 0.0
"""


def test_minimal_two_bus_case():
    case = parse_case(TWO_BUS)
    assert case.n_b == 2
    assert case.base_mva == 100.0
    assert case.slack_bus == 1
    assert len(case.branches) == 1 and len(case.generators) == 1


def test_generator_on_missing_bus_names_the_bus():
    text = TWO_BUS.replace("1, 0.0, 2.0, 1.0", "7, 0.0, 2.0, 1.0")
    with pytest.raises(CaseValidationError, match="bus 7"):
        parse_case(text)


@pytest.mark.parametrize(
    "text, match",
    [
        (TWO_BUS.replace("1, 2, 0.1, 1.5", "1, 2, 0.0, 1.5"), "reactance"),
        (TWO_BUS.replace("2, 1.0, 0", "1, 1.0, 0"), "duplicate bus id 1"),
        (TWO_BUS.replace("2, 1.0, 0", "2, 1.0, 1"), "one slack"),
        (TWO_BUS.replace("0.0, 2.0, 1.0, 10.0", "3.0, 2.0, 1.0, 10.0"), "p_min"),
        (TWO_BUS.replace("2.0, 1.0, 10.0", "2.0, -1.0, 10.0"), "cost_quadratic"),
    ],
)
def test_semantic_errors(text, match):
    with pytest.raises(CaseValidationError, match=match):
        parse_case(text)


def test_syntax_error_reports_line_and_field():
    text = TWO_BUS.replace("1, 2, 0.1, 1.5", "1, 2, abc, 1.5")
    with pytest.raises(CaseFormatError) as info:
        parse_case(text)
    assert info.value.line == 6
    assert info.value.field == "reactance"


def test_wrong_field_count():
    with pytest.raises(CaseFormatError, match="4 fields"):
        parse_case(TWO_BUS.replace("1, 2, 0.1, 1.5", "1, 2, 0.1"))


def test_missing_section():
    with pytest.raises(CaseFormatError, match="generators"):
        parse_case(TWO_BUS.split("[generators]")[0])


def test_bundled_five_bus(case5):
    assert case5.n_b == 5
    loads = nominal_load_vector(case5)
    assert np.count_nonzero(loads) == 3
    np.testing.assert_array_equal(loads, [0.0, 3.0, 3.0, 4.0, 0.0])
    assert len(case5.generators) == 5


def test_nominal_load_vectors(case2):
    np.testing.assert_array_equal(nominal_load_vector(case2), [0.0, 1.0])
    zero = parse_case(TWO_BUS.replace("2, 1.0, 0", "2, 0.0, 0"))
    np.testing.assert_array_equal(nominal_load_vector(zero), [0.0, 0.0])


def test_two_bus_shift_sign(model2):
    # +1 pu injected at bus 2 and withdrawn at the slack flows 2 -> 1,
    # which is negative in the branch's from -> to direction.
    assert model2.branch_flows([0.0, 1.0])[0] == pytest.approx(-1.0, abs=1e-12)


def test_ring_splits_two_thirds_one_third(model3):
    flows = model3.branch_flows([-1.0, 1.0, 0.0])
    np.testing.assert_allclose(flows, [-2 / 3, -1 / 3, 1 / 3], atol=1e-12)


def test_disconnected_network():
    text = """
[buses]
1, 0.0, 1
2, 1.0, 0
3, 1.0, 0
[branches]
1, 2, 0.1, 1.0
[generators]
1, 0.0, 5.0, 1.0, 1.0, 0.0
"""
    with pytest.raises(NetworkError, match=r"\[3\]"):
        build_dc_model(parse_case(text))


def test_shift_factors_match_angle_oracle(case5, model5, rng):
    for _ in range(20):
        inj = rng.normal(size=5)
        inj -= inj.mean()
        ref = angle_flows(case5, dict(zip(case5.bus_ids, inj)))
        got = model5.branch_flows(inj)
        np.testing.assert_allclose(got, [ref[(b.from_bus, b.to_bus)] for b in case5.branches], atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=5, max_size=5))
def test_flow_conservation(case5, model5, values):
    inj = np.array(values) - np.mean(values)
    flows = model5.branch_flows(inj)
    net = np.zeros(5)
    pos = {b: i for i, b in enumerate(case5.bus_ids)}
    for f, br in zip(flows, case5.branches):
        net[pos[br.from_bus]] += f
        net[pos[br.to_bus]] -= f
    assert np.abs(net - inj).max() <= 1e-9


@pytest.mark.parametrize("fixture", ["case2", "case3", "case5"])
def test_format_round_trip(fixture, request):
    case = request.getfixturevalue(fixture)
    again = parse_case(format_case(case), name=case.name)
    assert again == case


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(0, 10, allow_nan=False), min_size=2, max_size=2),
    st.floats(1e-3, 1.0),
    st.floats(0.01, 100),
)
def test_round_trip_arbitrary_values(loads, reactance, limit):
    text = f"""
[buses]
1, {loads[0]!r}, 1
2, {loads[1]!r}, 0
[branches]
1, 2, {reactance!r}, {limit!r}
[generators]
1, 0.0, 2.0, 1.0, 10.0, 0.0
"""
    case = parse_case(text)
    assert parse_case(format_case(case)) == case


def test_build_is_deterministic(case5):
    a, b = build_dc_model(case5), build_dc_model(case5)
    assert a.injection_shift_matrix.tobytes() == b.injection_shift_matrix.tobytes()


def test_load_case_uses_file_stem(tmp_path):
    path = tmp_path / "tiny.net"
    path.write_text(TWO_BUS, encoding="utf-8")
    assert load_case(path).name == "tiny"
