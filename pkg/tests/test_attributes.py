import numpy as np
import pytest
from hypothesis import given, strategies as st

from phyauth.attributes import (AttributeSpec, EstimateVector, OverflowCounter, Phase, check_attribute_set,
                                denormalize, diff, normalize, normalize_unclamped)
from phyauth.errors import DimensionError, ParameterError, ProtocolError

finite = st.floats(-1e6, 1e6, allow_nan=False)


def ev(values, phase):
    return EstimateVector(np.asarray(values, float), phase, 0)


@st.composite
def spec_and_point(draw):
    lo = draw(st.floats(-1e3, 1e3))
    width = draw(st.floats(1e-3, 1e3))
    t = draw(st.floats(0, 1))
    return AttributeSpec("a", lo, lo + width), lo + t * width


def test_spec_requires_lo_below_hi():
    with pytest.raises(ParameterError):
        AttributeSpec("x", 1.0, 1.0)
    with pytest.raises(ParameterError):
        AttributeSpec("x", 2.0, 1.0)
    with pytest.raises(ParameterError):
        AttributeSpec("x", -np.inf, 1.0)


def test_attribute_names_unique():
    with pytest.raises(ParameterError):
        check_attribute_set([AttributeSpec("a", 0, 1), AttributeSpec("a", 0, 2)])


def test_diff_identical_is_zero():
    x = [1.5, -2.0, 7.0]
    assert np.array_equal(diff(ev(x, Phase.PHASE_I), ev(x, Phase.PHASE_II)), np.zeros(3))


def test_diff_direct_subtraction():
    out = diff(ev([3.0, -1.0], Phase.PHASE_I), ev([1.0, 1.0], Phase.PHASE_II))
    assert out.tolist() == [2.0, -2.0]


def test_diff_length_mismatch():
    with pytest.raises(DimensionError):
        diff(ev([1.0, 2.0], Phase.PHASE_I), ev([1.0, 2.0, 3.0], Phase.PHASE_II))


def test_diff_wrong_phase_order():
    with pytest.raises(ProtocolError):
        diff(ev([1.0], Phase.PHASE_II), ev([1.0], Phase.PHASE_I))


def test_normalize_endpoints_and_midpoint():
    specs = [AttributeSpec("a", -3.0, 5.0)]
    assert normalize([-3.0], specs)[0] == -1.0
    assert normalize([5.0], specs)[0] == 1.0
    assert normalize([1.0], specs)[0] == 0.0


def test_normalize_direct_value():
    assert normalize([5.0], [AttributeSpec("a", -10.0, 10.0)])[0] == 0.5


def test_normalize_dimension_check():
    with pytest.raises(DimensionError):
        normalize([1.0, 2.0], [AttributeSpec("a", 0, 1)])


@given(st.floats(-100, 100), st.floats(0.01, 100))
def test_zero_difference_maps_to_closed_form(lo, width):
    spec = AttributeSpec("a", lo, lo + width)
    x = ev([4.2], Phase.PHASE_I)
    got = normalize_unclamped(diff(x, ev([4.2], Phase.PHASE_II)), [spec])[0]
    want = -(spec.lo + spec.hi) / (spec.hi - spec.lo)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


@given(spec_and_point())
def test_round_trip(sp):
    spec, h = sp
    back = denormalize(normalize([h], [spec]), [spec])[0]
    assert back == pytest.approx(h, rel=1e-12, abs=1e-12 * (spec.hi - spec.lo))


@given(st.floats(-100, 100), st.floats(0.01, 100), st.floats(0, 1), st.floats(0, 1))
def test_normalize_affine_and_increasing(lo, width, t1, t2):
    spec = AttributeSpec("a", lo, lo + width)
    h1, h2 = lo + t1 * width, lo + t2 * width
    x1, x2 = normalize([h1], [spec])[0], normalize([h2], [spec])[0]
    if h1 < h2:
        assert x1 <= x2
    xm = normalize([0.5 * (h1 + h2)], [spec])[0]
    assert xm == pytest.approx(0.5 * (x1 + x2), abs=1e-9)


@given(spec_and_point(), st.floats(1.0, 50.0))
def test_widening_scales_features_by_inverse_factor(sp, k):
    spec, h = sp
    # widening keeps the center, so measure from it
    wide = spec.widened(k)
    x = normalize([h], [spec])[0]
    xw = normalize([h], [wide])[0]
    assert xw == pytest.approx(x / k, rel=1e-9, abs=1e-12)


def test_widening_exact_on_symmetric_range():
    spec = AttributeSpec("a", -2.0, 2.0)
    h = np.linspace(-2, 2, 41)
    for k in (2.0, 10.0):
        assert np.allclose(normalize(h[:, None], [spec.widened(k)])[:, 0], normalize(h[:, None], [spec])[:, 0] / k,
                           rtol=0, atol=1e-15)


@given(st.lists(finite, min_size=1, max_size=20))
def test_clamped_features_in_unit_box(values):
    out = normalize(np.array(values)[:, None], [AttributeSpec("a", -1.0, 3.0)])
    assert np.all((out >= -1) & (out <= 1))


def test_overflow_counter_tallies_clamps():
    specs = [AttributeSpec("a", -1, 1), AttributeSpec("b", 0, 10)]
    c = OverflowCounter(["a", "b"])
    h = np.array([[0.0, 5.0], [2.0, 5.0], [-3.0, 11.0], [0.5, -1.0]])
    out = normalize(h, specs, c)
    assert c.as_dict() == {"a": 2, "b": 2}
    assert c.total == 4
    assert out[1, 0] == 1.0 and out[2, 0] == -1.0
