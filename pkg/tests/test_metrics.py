import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from skimage.metrics import structural_similarity

from polarsynth.errors import PreconditionError, ShapeError
from polarsynth.metrics import PSNR_INF, MetricReport, ang_e, evaluate, mabse, mange, psnr, ssim
from polarsynth.pbrdf import Material, SceneLight, make_sphere, render_polar
from polarsynth.stokes import synthesize_stack

finite_angles = st.floats(min_value=-50, max_value=50, allow_nan=False)


def brute_ang_e(a, b):
    """Direct transcription: min over k in {-1, 0, 1} of |b + k pi - a| after canonicalizing."""
    def canon(x):
        x = math.fmod(x, math.pi)
        if x <= -math.pi / 2:
            x += math.pi
        if x > math.pi / 2:
            x -= math.pi
        return x

    a, b = canon(a), canon(b)
    return min(abs(b + k * math.pi - a) for k in (-1, 0, 1))


def test_ang_e_examples():
    assert math.degrees(ang_e(0.0, math.radians(45))) == pytest.approx(45)
    assert math.degrees(ang_e(math.radians(89), math.radians(-89))) == pytest.approx(2)
    for phi in (-1.5, 0.0, 0.3, math.pi / 2, 7.0):
        assert ang_e(phi, phi) == 0.0


def test_ang_e_rejects_non_finite():
    with pytest.raises(PreconditionError):
        ang_e(float("inf"), 0.0)


@given(finite_angles, finite_angles)
def test_ang_e_matches_brute_force(a, b):
    assert ang_e(a, b) == pytest.approx(brute_ang_e(a, b), abs=1e-9)


@given(finite_angles, finite_angles, finite_angles)
def test_ang_e_pseudometric(a, b, c):
    ab, ba = ang_e(a, b), ang_e(b, a)
    assert ab == pytest.approx(ba, abs=1e-12)
    assert 0 <= ab <= math.pi / 2
    assert ang_e(a, c) <= ab + ang_e(b, c) + 1e-9
    assert ang_e(a, a + math.pi) == pytest.approx(0.0, abs=1e-9)


def test_mange_identical_and_offset():
    rng = np.random.default_rng(0)
    gt = rng.uniform(-math.pi / 2, math.pi / 2, (50, 50))
    assert mange(gt, gt) == 0.0
    est = gt + math.radians(10)
    assert mange(gt, est) == pytest.approx(10.0, abs=1e-9)


def test_mange_uniform_is_45():
    rng = np.random.default_rng(1)
    a = rng.uniform(-math.pi / 2, math.pi / 2, 1_000_000)
    b = rng.uniform(-math.pi / 2, math.pi / 2, 1_000_000)
    # wrap distance of independent uniforms is uniform on [0, 90] degrees
    assert abs(mange(a, b) - 45.0) < 0.5


def test_mange_mask_and_errors():
    gt = np.zeros((2, 2))
    est = np.array([[0.0, 1.0], [0.0, 0.0]])
    mask = np.array([[True, False], [True, True]])
    assert mange(gt, est, mask) == 0.0
    with pytest.raises(PreconditionError):
        mange(gt, est, np.zeros((2, 2), bool))
    with pytest.raises(ShapeError):
        mange(gt, np.zeros(3))


def test_mabse():
    assert mabse(np.full(4, 0.3), np.full(4, 0.3)) == 0.0
    assert mabse(np.zeros(4), np.ones(4)) == 1.0
    with pytest.raises(PreconditionError):
        mabse(np.zeros(4), np.ones(4), np.zeros(4, bool))


def test_mabse_brute_force():
    rng = np.random.default_rng(2)
    gt = rng.uniform(0, 1, 5000)
    est = np.clip(gt + 0.1, 0, 1)
    total = 0.0
    for g, e in zip(gt.tolist(), est.tolist()):
        total += abs(e - g)
    assert mabse(gt, est) == pytest.approx(total / len(gt), rel=1e-12)


def test_psnr():
    img = np.random.default_rng(3).random((16, 16))
    assert psnr(img, img) == PSNR_INF
    assert psnr(img + 0.1, img) == pytest.approx(20.0)
    assert psnr(img * 255 + 25.5, img * 255, peak=255) == pytest.approx(psnr(img + 0.1, img))
    with pytest.raises(PreconditionError):
        psnr(img, img, mask=np.zeros_like(img, bool))


def test_ssim_identical():
    img = np.random.default_rng(4).random((32, 32))
    assert ssim(img, img) == pytest.approx(1.0)


def test_ssim_matches_reference():
    rng = np.random.default_rng(5)
    a = rng.random((40, 37))
    b = np.clip(a + 0.1 * rng.standard_normal(a.shape), 0, 1)
    ref = structural_similarity(a, b, gaussian_weights=True, sigma=1.5, use_sample_covariance=False, data_range=1.0)
    assert ssim(a, b) == pytest.approx(ref, abs=1e-12)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-15)


def test_ssim_negative_image_low():
    checker = (np.indices((32, 32)).sum(axis=0) // 4 % 2).astype(float)
    assert ssim(checker, 1.0 - checker) < 0.5


def test_ssim_too_small():
    with pytest.raises(PreconditionError):
        ssim(np.zeros((10, 20)), np.zeros((10, 20)))


def test_report_zero_perturbation():
    state = render_polar(make_sphere(32, 0.9), Material(1.5), SceneLight((0.0, 0.0, 1.0), 0.1))
    rep = evaluate(state, state, synthesize_stack(state), synthesize_stack(state))
    assert rep.mange == 0.0 and rep.mabse == 0.0
    assert rep.psnr_mean == PSNR_INF and rep.ssim_mean == pytest.approx(1.0)
    text = rep.to_text()
    assert "mange=0.000000" in text and "psnr=inf" in text and "ssim=1.000000" in text


def test_report_csv():
    rep = MetricReport(psnr={0: 30.0}, ssim={0: 0.9}, mange=1.5, mabse=0.25, pixel_count=7)
    assert rep.csv_header().split(",") == ["psnr_000", "psnr", "ssim_000", "ssim", "mange", "mabse", "pixel_count"]
    assert rep.csv_row() == "30.000000,30.000000,0.900000,0.900000,1.500000,0.250000,7"
