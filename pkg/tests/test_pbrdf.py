import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polarsynth.errors import PreconditionError
from polarsynth.metrics import ang_e
from polarsynth.pbrdf import (
    Material,
    NormalMap,
    SceneLight,
    invert_diffuse,
    make_sphere,
    normal_angular_error,
    render_polar,
    rho_diffuse,
    rho_specular,
)
from polarsynth.stokes import PolarStateMap, decompose_stack, synthesize_stack


def fresnel_reflectances(theta, eta):
    """Power reflectances (R_s, R_p) at an air/dielectric interface, from the amplitude formulas."""
    theta_t = math.asin(math.sin(theta) / eta)
    ci, ct = math.cos(theta), math.cos(theta_t)
    rs = (ci - eta * ct) / (ci + eta * ct)
    rp = (eta * ci - ct) / (eta * ci + ct)
    return rs * rs, rp * rp


def dolp_diffuse_oracle(theta, eta):
    rs, rp = fresnel_reflectances(theta, eta)
    return (rs - rp) / (2.0 - rs - rp)


def dolp_specular_oracle(theta, eta):
    rs, rp = fresnel_reflectances(theta, eta)
    return (rs - rp) / (rs + rp)


OVERHEAD = SceneLight((0.0, 0.0, 1.0), 0.1)


def test_rho_at_normal_incidence():
    assert rho_diffuse(0.0, 1.5) == 0.0
    assert rho_specular(0.0, 1.5) == 0.0


def test_rho_diffuse_45_matches_fresnel_oracle():
    expected = dolp_diffuse_oracle(math.radians(45), 1.5)
    assert rho_diffuse(math.radians(45), 1.5) == pytest.approx(expected, rel=1e-12)
    # frozen from the oracle above
    assert expected == pytest.approx(0.0439832, abs=1e-7)


@given(st.floats(min_value=1e-3, max_value=1.55), st.floats(min_value=1.05, max_value=3.0))
def test_rho_matches_fresnel_oracle(theta, eta):
    assert rho_diffuse(theta, eta) == pytest.approx(dolp_diffuse_oracle(theta, eta), rel=1e-9, abs=1e-14)
    assert rho_specular(theta, eta) == pytest.approx(dolp_specular_oracle(theta, eta), rel=1e-8, abs=1e-12)


def test_rho_diffuse_monotone_grid():
    theta = np.linspace(0.0, math.pi / 2, 10_001)[:-1]
    for eta in (1.3, 1.5, 1.8, 3.0):
        assert np.all(np.diff(rho_diffuse(theta, eta)) > 0)


def test_rho_specular_finite():
    theta = np.linspace(0.0, math.pi / 2, 2001)[:-1]
    vals = rho_specular(theta, 1.5)
    assert np.all(np.isfinite(vals)) and vals.min() >= 0 and vals.max() <= 1 + 1e-12
    # total polarization at the Brewster angle
    assert rho_specular(math.atan(1.5), 1.5) == pytest.approx(1.0, abs=1e-12)


def test_rho_domain_errors():
    with pytest.raises(PreconditionError):
        rho_diffuse(math.pi / 2, 1.5)
    with pytest.raises(PreconditionError):
        rho_diffuse(-0.1, 1.5)
    with pytest.raises(PreconditionError):
        rho_specular(0.3, 1.0)


def test_material_and_light_validation():
    with pytest.raises(PreconditionError):
        Material(eta=1.0)
    with pytest.raises(PreconditionError):
        Material(eta=1.5, mode="glossy")
    with pytest.raises(PreconditionError):
        SceneLight((0.0, 0.0, 2.0))


def test_sphere_geometry():
    nm = make_sphere(17, 0.9)
    np.testing.assert_allclose(nm.normals[8, 8], (0.0, 0.0, 1.0), atol=1e-15)
    norms = np.linalg.norm(nm.normals, axis=-1)
    assert np.max(np.abs(norms[nm.mask] - 1.0)) < 1e-12
    assert np.all(nm.normals[nm.mask][:, 2] > 0)
    # normals just inside the rim approach grazing
    assert nm.normals[nm.mask][:, 2].min() < 0.5
    with pytest.raises(PreconditionError):
        make_sphere(8)


def test_render_center_unpolarized():
    state = render_polar(make_sphere(17), Material(1.5), OVERHEAD)
    assert state.dolp[8, 8] == 0.0
    assert not state.valid[8, 8]


def test_render_azimuth_alignment():
    n = np.zeros((1, 1, 3))
    n[0, 0] = np.array([1.0, 0.0, 1.0]) / math.sqrt(2)
    nm = NormalMap(n, np.ones((1, 1), bool))
    diffuse = render_polar(nm, Material(1.5, "diffuse"), OVERHEAD)
    specular = render_polar(nm, Material(1.5, "specular"), OVERHEAD)
    assert diffuse.aolp[0, 0] == pytest.approx(0.0, abs=1e-15)
    assert specular.aolp[0, 0] == pytest.approx(math.pi / 2)
    assert diffuse.dolp[0, 0] == pytest.approx(dolp_diffuse_oracle(math.pi / 4, 1.5), rel=1e-12)


def test_render_shading():
    nm = make_sphere(17)
    light = SceneLight((0.0, 0.0, 1.0), 0.1)
    state = render_polar(nm, Material(1.5, albedo=0.5), light)
    np.testing.assert_allclose(state.s0[nm.mask], 0.5 * nm.normals[nm.mask][:, 2] + 0.1)
    assert np.all(state.s0[~nm.mask] == 0)
    assert not state.valid[~nm.mask].any()


def test_render_rotation_shifts_aolp():
    nm = make_sphere(33, 0.9)
    rot = NormalMap(np.rot90(nm.normals, 1, axes=(0, 1)).copy(), np.rot90(nm.mask).copy())
    # rotating the image by 90 degrees maps normal (x, y) to (y, -x)
    rot.normals = np.stack([rot.normals[..., 1], -rot.normals[..., 0], rot.normals[..., 2]], axis=-1)
    a = render_polar(nm, Material(1.5), OVERHEAD)
    b = render_polar(rot, Material(1.5), OVERHEAD)
    a_rot = np.rot90(a.aolp)
    m = np.rot90(a.valid) & b.valid
    assert np.max(ang_e(a_rot[m] - math.pi / 2, b.aolp[m])) < 1e-12


def test_render_links_to_stokes_core():
    state = render_polar(make_sphere(32, 0.95), Material(1.5, "specular"), SceneLight((0.6, 0.0, 0.8), 0.05))
    back = decompose_stack(synthesize_stack(state))
    m = state.valid
    assert np.max(np.abs(back.dolp[m] - state.dolp[m])) < 1e-9
    assert np.max(ang_e(state.aolp[m], back.aolp[m])) < 1e-9


@pytest.mark.parametrize("eta", [1.3, 1.5, 1.8])
def test_invert_diffuse_roundtrip(eta):
    nm = make_sphere(64, 0.95)
    state = render_polar(nm, Material(eta), OVERHEAD)
    est = invert_diffuse(state, Material(eta))
    m = est.mask & nm.mask & (nm.zenith() <= math.radians(80))
    assert m.sum() > 1000
    assert np.mean(normal_angular_error(nm, est, m)) < 0.5


def test_invert_zero_dolp_invalid():
    state = PolarStateMap(np.ones((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), np.ones((2, 2), bool))
    assert not invert_diffuse(state, Material(1.5)).mask.any()


def test_invert_recovers_exact_zenith():
    # a ring of pixels around a centroid, each with the DoLP of a 30 degree zenith
    size = 9
    rows, cols = np.mgrid[0:size, 0:size].astype(float)
    az = np.arctan2(rows - 4, cols - 4)
    ring = (np.hypot(rows - 4, cols - 4) > 2.5) & (np.hypot(rows - 4, cols - 4) < 4.5)
    p = np.where(ring, rho_diffuse(math.radians(30), 1.5), 0.0)
    aolp = np.where(ring, np.vectorize(lambda a: math.atan(math.tan(a)))(az), 0.0)
    state = PolarStateMap(np.ones_like(p), p, aolp, ring)
    est = invert_diffuse(state, Material(1.5))
    assert est.mask[ring].all()
    np.testing.assert_allclose(est.zenith()[ring], math.radians(30), atol=1e-6)
    np.testing.assert_allclose(np.cos(est.azimuth()[ring] - az[ring]), 1.0, atol=1e-9)


def test_invert_dolp_too_large_invalid():
    p = np.full((3, 3), 0.99)
    state = PolarStateMap(np.ones_like(p), p, np.zeros_like(p), np.ones_like(p, bool))
    assert not invert_diffuse(state, Material(1.5)).mask.any()
