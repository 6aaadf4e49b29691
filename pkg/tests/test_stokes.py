import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from polarsynth.errors import PreconditionError, ShapeError
from polarsynth.metrics import ang_e
from polarsynth.stokes import (
    EncodedPolarMap,
    PolarizationStack,
    PolarStateMap,
    consistency_residual,
    decode,
    decompose_stack,
    encode,
    malus_intensity,
    synthesize_stack,
    to_grayscale,
    unpolarized_intensity,
    wrap_aolp,
)

angles = st.floats(min_value=-20.0, max_value=20.0, allow_nan=False, allow_infinity=False)
dolps = st.floats(min_value=1e-3, max_value=1.0)
intensities = st.floats(min_value=1e-3, max_value=10.0)


def state_of(s0, p, phi):
    return PolarStateMap.from_arrays(np.asarray(s0, float), np.asarray(p, float), np.asarray(phi, float))


def random_state(rng, n, p_low=1e-6):
    s0 = rng.uniform(0.05, 1.0, n)
    p = rng.uniform(p_low, 1.0, n)
    phi = rng.uniform(-math.pi / 2, math.pi / 2, n)
    return state_of(s0, p, phi)


# ---- malus_intensity


def test_malus_unpolarized_halves():
    st0 = state_of(1.0, 0.0, 0.3)
    for theta in np.linspace(-3, 3, 13):
        assert malus_intensity(st0, theta) == pytest.approx(0.5)


def test_malus_aligned_full_polarization():
    assert malus_intensity(state_of(1.0, 1.0, 0.0), 0.0) == pytest.approx(1.0)


def test_malus_exact_trig_value():
    out = malus_intensity(state_of(1.0, 0.5, math.radians(30)), math.radians(90))
    assert out == pytest.approx(0.375, abs=1e-15)


def test_malus_invalid_pixels_are_unpolarized():
    state = PolarStateMap(np.array([2.0]), np.array([0.9]), np.array([0.4]), np.array([False]))
    assert malus_intensity(state, 0.7)[0] == pytest.approx(1.0)


def test_malus_dimension_mismatch():
    state = PolarStateMap(np.ones(3), np.ones(3) * 0.5, np.zeros(3), np.ones(3, bool))
    state.dolp = np.ones(4)
    with pytest.raises(ShapeError):
        malus_intensity(state, 0.0)


def test_state_construction_rejects_mismatch():
    with pytest.raises(ShapeError):
        PolarStateMap(np.ones(3), np.ones(2), np.zeros(3), np.ones(3, bool))


@given(intensities, dolps, angles, angles)
def test_malus_bounds(s0, p, phi, theta):
    state = state_of(s0, p, phi)
    v = float(malus_intensity(state, theta))
    lo, hi = s0 * (1 - p) / 2, s0 * (1 + p) / 2
    assert lo - 1e-12 * s0 <= v <= hi + 1e-12 * s0


@given(intensities, dolps, angles)
def test_malus_extremes(s0, p, phi):
    state = state_of(s0, p, phi)
    assert float(malus_intensity(state, phi)) == pytest.approx(s0 * (1 + p) / 2, rel=1e-12)
    assert float(malus_intensity(state, phi + math.pi / 2)) == pytest.approx(s0 * (1 - p) / 2, rel=1e-9, abs=1e-12)


# ---- synthesize / decompose


def test_synthesize_hand_values():
    stack = synthesize_stack(state_of(1.0, 0.5, 0.0))
    assert [float(x) for x in stack.as_list()] == pytest.approx([0.75, 0.5, 0.25, 0.5], abs=1e-15)


def test_synthesize_unpolarized():
    s0 = np.array([[0.2, 0.8], [1.0, 0.0]])
    stack = synthesize_stack(state_of(s0, np.zeros_like(s0), np.zeros_like(s0)))
    for img in stack.as_list():
        np.testing.assert_array_equal(img, s0 / 2)


def test_decompose_hand_values():
    st0 = decompose_stack(PolarizationStack(0.75, 0.5, 0.25, 0.5))
    assert float(st0.aolp) == pytest.approx(0.0, abs=1e-15)
    assert float(st0.dolp) == pytest.approx(0.5)
    assert float(st0.s0) == pytest.approx(1.0)
    assert bool(st0.valid)


def test_decompose_unpolarized_is_invalid():
    st0 = decompose_stack(PolarizationStack(0.5, 0.5, 0.5, 0.5))
    assert float(st0.dolp) == 0.0
    assert not bool(st0.valid)
    assert float(st0.aolp) == 0.0


def test_decompose_plus_45():
    st0 = decompose_stack(PolarizationStack(0.5, 0.75, 0.5, 0.25))
    assert float(st0.aolp) == pytest.approx(math.pi / 4)
    assert float(st0.dolp) == pytest.approx(0.5)


def test_decompose_dark_is_invalid():
    st0 = decompose_stack(PolarizationStack(0.0, 0.0, 0.0, 1e-9))
    assert not bool(st0.valid)


def test_decompose_rejects_negative():
    with pytest.raises(PreconditionError):
        decompose_stack(PolarizationStack(0.5, -0.1, 0.5, 0.5))


def test_decompose_rejects_mismatch():
    with pytest.raises(ShapeError):
        PolarizationStack(np.ones(2), np.ones(2), np.ones(3), np.ones(2))


def test_decompose_clamps_dolp():
    # inconsistent measurement: Stokes magnitude exceeds s0
    st0 = decompose_stack(PolarizationStack(1.0, 1.0, 0.0, 0.0))
    assert float(st0.dolp) == 1.0


def test_roundtrip_randomized():
    rng = np.random.default_rng(1)
    state = random_state(rng, 20000)
    back = decompose_stack(synthesize_stack(state))
    assert back.valid.all()
    assert np.max(np.abs(back.dolp - state.dolp)) < 1e-9
    assert np.max(ang_e(state.aolp, back.aolp)) < 1e-9
    np.testing.assert_allclose(back.s0, state.s0, rtol=1e-15)


@given(intensities, st.floats(min_value=1e-6, max_value=1.0), angles)
def test_roundtrip_property(s0, p, phi):
    state = state_of(s0, p, phi)
    back = decompose_stack(synthesize_stack(state))
    assert abs(float(back.dolp) - p) < 1e-9
    assert ang_e(float(state.aolp), float(back.aolp)) < 1e-9


def test_three_channel_per_channel():
    rng = np.random.default_rng(2)
    shape = (4, 5, 3)
    state = state_of(rng.uniform(0.1, 1, shape), rng.uniform(0.01, 1, shape), rng.uniform(-1.5, 1.5, shape))
    back = decompose_stack(synthesize_stack(state))
    np.testing.assert_allclose(back.dolp, state.dolp, atol=1e-12)


def test_grayscale_luma():
    img = np.zeros((2, 2, 3))
    img[..., 0] = 1.0
    np.testing.assert_allclose(to_grayscale(img), 0.299)
    img[...] = 0.5
    np.testing.assert_allclose(to_grayscale(img), 0.5)


# ---- redundancy, unpolarized intensity, residual


def test_redundancy_within_four_ulp():
    rng = np.random.default_rng(3)
    state = random_state(rng, 50000, p_low=0.0)
    stack = synthesize_stack(state)
    a = stack.i0 + stack.i90
    b = stack.i45 + stack.i135
    assert np.all(np.abs(a - b) <= 4 * np.spacing(np.maximum(a, b)))


def test_unpolarized_intensity_hand():
    assert float(unpolarized_intensity(PolarizationStack(0.75, 0.5, 0.25, 0.5))) == 1.0
    v = np.full((3, 3), 0.3)
    np.testing.assert_allclose(unpolarized_intensity(PolarizationStack(v, v, v, v)), 0.6)


def test_unpolarized_intensity_recovers_s0():
    rng = np.random.default_rng(4)
    state = random_state(rng, 10000)
    s0 = unpolarized_intensity(synthesize_stack(state))
    assert np.all(np.abs(s0 - state.s0) <= 4 * np.spacing(state.s0))


def test_consistency_residual():
    rng = np.random.default_rng(5)
    stack = synthesize_stack(random_state(rng, 1000))
    assert consistency_residual(stack) <= 1e-12
    assert consistency_residual(PolarizationStack(1.0, 1.0, 1.0, 0.0)) == pytest.approx(2 / 3)


def test_consistency_residual_positive_under_noise():
    rng = np.random.default_rng(6)
    stack = synthesize_stack(random_state(rng, 1000))
    noisy = PolarizationStack.from_list(
        [np.clip(img + rng.normal(0, 0.01, img.shape), 0, None) for img in stack.as_list()]
    )
    assert consistency_residual(noisy) > 1e-3


# ---- encode / decode


def test_encode_examples():
    enc = encode(state_of(1.0, 0.25, 0.0))
    assert (float(enc.c), float(enc.s), float(enc.p_norm)) == pytest.approx((1.0, 0.0, -0.5))
    enc = encode(state_of(1.0, 0.5, math.pi / 2))
    assert float(enc.c) == pytest.approx(-1.0)
    assert float(enc.s) == pytest.approx(0.0, abs=1e-15)


def test_encode_prewrap_equivalence():
    a = encode(PolarStateMap(1.0, 0.5, math.radians(89), True))
    b = encode(PolarStateMap(1.0, 0.5, math.radians(-91), True))
    assert float(a.c) == pytest.approx(float(b.c), abs=1e-15)
    assert float(a.s) == pytest.approx(float(b.s), abs=1e-15)


def test_encode_invalid_pixels():
    enc = encode(PolarStateMap(np.ones(1), np.array([0.7]), np.array([0.3]), np.array([False])))
    assert (enc.c[0], enc.s[0], enc.p_norm[0]) == (1.0, 0.0, -1.0)


def test_encode_unit_circle():
    rng = np.random.default_rng(7)
    enc = encode(random_state(rng, 10000))
    np.testing.assert_allclose(enc.c**2 + enc.s**2, 1.0, atol=1e-6)
    assert enc.p_norm.min() >= -1 and enc.p_norm.max() <= 1


def test_decode_examples():
    st0 = decode(EncodedPolarMap(1.0, 0.0, -0.5), 1.0)
    assert float(st0.aolp) == 0.0 and float(st0.dolp) == pytest.approx(0.25)
    st0 = decode(EncodedPolarMap(0.0, 0.0, 0.3), 1.0)
    assert not bool(st0.valid)


def test_decode_encode_identity():
    rng = np.random.default_rng(8)
    state = random_state(rng, 20000)
    back = decode(encode(state), state.s0)
    assert np.max(np.abs(back.dolp - state.dolp)) < 1e-9
    assert np.max(ang_e(state.aolp, back.aolp)) < 1e-9
    np.testing.assert_array_equal(back.s0, state.s0)


@given(
    st.floats(min_value=-3.0, max_value=3.0),
    st.floats(min_value=-3.0, max_value=3.0),
    st.floats(min_value=-1.0, max_value=1.0),
)
def test_encode_decode_projects_to_circle(c, s, p):
    if math.hypot(c, s) < 1e-3:
        return
    enc = encode(decode(EncodedPolarMap(c, s, p), 1.0))
    r = math.hypot(c, s)
    assert float(enc.c) == pytest.approx(c / r, abs=1e-12)
    assert float(enc.s) == pytest.approx(s / r, abs=1e-12)


def test_decode_dimension_mismatch():
    with pytest.raises(ShapeError):
        decode(EncodedPolarMap(np.ones(3), np.zeros(3), np.zeros(3)), np.ones(4))


# ---- wrap_aolp


def test_wrap_examples():
    assert wrap_aolp(math.pi / 2 + 0.1) == pytest.approx(-math.pi / 2 + 0.1, abs=1e-15)
    assert wrap_aolp(-math.pi / 2) == math.pi / 2
    assert wrap_aolp(3 * math.pi) == pytest.approx(0.0, abs=1e-15)
    assert wrap_aolp(math.pi / 2) == math.pi / 2


def test_wrap_rejects_non_finite():
    with pytest.raises(PreconditionError):
        wrap_aolp(float("nan"))
    with pytest.raises(PreconditionError):
        wrap_aolp(np.array([0.0, np.inf]))


@given(arrays(np.float64, 16, elements=st.floats(-100, 100)))
def test_wrap_range_and_congruence(phi):
    w = wrap_aolp(phi)
    assert np.all(w > -math.pi / 2) and np.all(w <= math.pi / 2)
    k = (phi - w) / math.pi
    np.testing.assert_allclose(k, np.round(k), atol=1e-9)


@settings(max_examples=200)
@given(st.floats(min_value=-math.pi / 2, max_value=math.pi / 2, exclude_min=True))
def test_wrap_is_exact_for_one_period(phi):
    # a single subtraction of pi is exact, so whatever fl(phi + pi) is, wrapping it is reproducible
    shifted = phi + math.pi
    w = wrap_aolp(shifted)
    assert w == shifted - math.pi or (w == math.pi / 2 and shifted - math.pi == -math.pi / 2)
