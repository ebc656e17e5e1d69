import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from hcsbeam.errors import DegenerateGeometry, InvalidParam
from hcsbeam.geometry import (
    ArrayGeometry,
    C0,
    ElementFactor,
    direction_unit,
    make_ula,
    steering_phase,
    steering_phases,
)

from conftest import F, LAM


def test_ula_single():
    g = make_ula(1, 0.075, F)
    assert_array_equal(g.positions, [[0.0, 0.0, 0.0]])


def test_ula_two():
    assert_allclose(make_ula(2, 0.075, F).y, [-0.0375, 0.0375])


def test_ula_five():
    g = make_ula(5, 0.1, F)
    assert_allclose(g.y, [-0.2, -0.1, 0.0, 0.1, 0.2], atol=1e-15)
    assert_array_equal(g.positions[:, [0, 2]], 0.0)
    assert g.is_uniform_linear()


@pytest.mark.parametrize("T", [1, 2, 7, 32, 104])
def test_ula_centroid(T):
    g = make_ula(T, LAM / 2, F)
    assert_allclose(g.positions.sum(axis=0), 0.0, atol=1e-12)
    assert_allclose(np.diff(g.y), LAM / 2, rtol=1e-12)


@pytest.mark.parametrize("args", [(0, 0.1, F), (-2, 0.1, F), (4, 0.0, F), (4, 0.1, -1.0), (2.5, 0.1, F)])
def test_ula_invalid(args):
    with pytest.raises(InvalidParam):
        make_ula(*args)


def test_geometry_shape_check():
    with pytest.raises(InvalidParam):
        ArrayGeometry(3, 0.1, F, np.zeros((2, 3)))


def test_wavenumber():
    g = make_ula(4, 0.1, F)
    assert_allclose(g.wavelength, C0 / F)
    assert_allclose(g.wavenumber * g.wavelength, 2 * np.pi)


def test_direction_unit_examples():
    assert_allclose(direction_unit(0.0, 0.0), [0, 0, 1], atol=1e-15)
    assert_allclose(direction_unit(np.pi / 2, np.pi / 2), [0, 1, 0], atol=1e-15)
    u = direction_unit(np.deg2rad(60), np.deg2rad(30))
    assert_allclose(u, [0.75, 0.4330127018922193, 0.5], atol=1e-12)


@given(st.floats(0, np.pi), st.floats(-np.pi, np.pi))
def test_direction_unit_norm(theta, phi):
    assert abs(np.linalg.norm(direction_unit(theta, phi)) - 1.0) < 1e-12


def test_element_isotropic():
    e = ElementFactor.isotropic()
    assert_array_equal(e(np.linspace(0, np.pi, 5), 0.3), 1.0)


def test_element_cosine_peak_and_back():
    e = ElementFactor.cosine(2.0)
    assert e(np.pi / 2, 0.0) == 1.0
    assert e(np.pi / 2, np.pi) == 0.0
    assert_allclose(e(np.pi / 2, np.pi / 3), 0.25)
    # separable exponents
    e2 = ElementFactor.cosine(0.5, 4.0)
    assert_allclose(e2(np.pi / 6, 0.0), 0.5**4)
    assert e2.elevation_exponent == 4.0 and e.elevation_exponent == 2.0


@given(st.floats(0, np.pi), st.floats(-np.pi, np.pi), st.floats(0, 8), st.floats(0, 40))
def test_element_bounded(theta, phi, q, qe):
    assert 0.0 <= ElementFactor.cosine(q, qe)(theta, phi) <= 1.0


def test_element_invalid():
    with pytest.raises(InvalidParam):
        ElementFactor("dipole")
    with pytest.raises(InvalidParam):
        ElementFactor.cosine(-1.0)


def test_steering_far_boresight_vanishes():
    g = make_ula(8, LAM / 2, F)
    ph = steering_phases(g, [1e6, 0.0, 0.0])
    assert np.abs(ph).max() < 1e-3


def test_steering_centre_element_zero():
    g = make_ula(5, LAM / 2, F)
    for rx in ([3.0, 4.0, -1.0], [-2.0, 0.5, 7.0]):
        assert steering_phase(g, 2, rx) == 0.0


def test_steering_two_element_far_field():
    g = make_ula(2, LAM / 2, F)
    az = np.deg2rad(45)
    rx = 1e5 * np.array([np.cos(az), np.sin(az), 0.0])
    ph = steering_phases(g, rx)
    assert_allclose(ph[1] - ph[0], np.pi * np.sin(az), atol=1e-3)
    az = np.deg2rad(30)
    ph = steering_phases(g, 1e5 * np.array([np.cos(az), np.sin(az), 0.0]))
    assert_allclose(ph[1] - ph[0], np.pi / 2, atol=1e-3)


def test_steering_plane_wave_limit():
    g = make_ula(16, LAM / 2, F)
    u = direction_unit(np.deg2rad(80), np.deg2rad(25))
    rx = 1e4 * g.aperture * u
    plane = g.wavenumber * g.positions @ u
    assert_allclose(steering_phases(g, rx), plane, rtol=1e-3, atol=1e-12)


def test_steering_vectorized_matches_scalar(rng):
    g = make_ula(6, LAM / 2, F)
    rx = rng.uniform(-50, 50, (4, 3))
    ph = steering_phases(g, rx)
    assert ph.shape == (4, 6)
    for r in range(4):
        for t in range(6):
            assert_allclose(ph[r, t], steering_phase(g, t, rx[r]), rtol=1e-12, atol=1e-12)


def test_steering_general_geometry_matches_axis_path(rng):
    # same array expressed with a tiny off-axis offset takes the generic branch
    g = make_ula(6, LAM / 2, F)
    pos = g.positions.copy()
    pos[:, 0] = 1e-300
    g2 = ArrayGeometry(6, g.spacing, F, pos)
    rx = rng.uniform(-50, 50, (3, 3))
    assert_allclose(steering_phases(g2, rx), steering_phases(g, rx), rtol=1e-10)


def test_steering_degenerate():
    g = make_ula(3, 0.1, F)
    with pytest.raises(DegenerateGeometry):
        steering_phase(g, 0, g.positions[0])
    with pytest.raises(DegenerateGeometry):
        steering_phases(g, [[5.0, 0, 0], list(g.positions[2])])
    with pytest.raises(InvalidParam):
        steering_phase(g, 3, [1.0, 0, 0])
