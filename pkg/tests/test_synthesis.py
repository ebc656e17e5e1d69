import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from hcsbeam.channel import ChannelConfig, free_space_channel, generate_ensemble, random_layout
from hcsbeam.errors import (
    BeamSynthesisError,
    DimensionMismatch,
    ElementFactorNull,
    GridMismatch,
    InvalidParam,
    RankDeficient,
    VisibleRegionOverflow,
    ZeroVector,
)
from hcsbeam.geometry import ElementFactor, make_ula
from hcsbeam.pattern import AngularGrid, FarFieldPattern, SectorSpec, radiate_at
from hcsbeam.synthesis import (
    HcsSynthesizer,
    beam_index,
    hcs_excitation_set,
    hybrid_pattern,
    iso_excitation,
    iso_excitation_set,
    normalize_power,
    read_excitations_csv,
    wl_excitation,
    wl_sample_angles,
    wl_synthesis,
    write_excitations_csv,
    zf_excitation_set,
)

from conftest import F, LAM, crandn

ISO = ElementFactor.isotropic()
EL = ElementFactor.cosine(0.5, 32.0)
SECTOR = SectorSpec.from_degrees()


def scenario(T=16, R=4, seed=3, d=0.5):
    geo = make_ula(T, d * LAM, F)
    lay = random_layout(R, SECTOR, 1)
    G = generate_ensemble(ChannelConfig(P=1, seed=seed), geo, lay, EL, SECTOR).matrices[0]
    return geo, lay, G


def test_beam_index():
    assert beam_index((0, 0)) == 0
    assert beam_index((3, 1)) == 7
    with pytest.raises(InvalidParam):
        beam_index((0, 2))


def test_normalize_power_examples():
    assert_allclose(normalize_power(np.array([3.0, 4.0]), 1.0, 1), np.array([0.6, 0.8]) / np.sqrt(2))
    # ||w||^2 = 4 scaled to omega / 2R = 1/4: amplitude factor 1/4
    w4 = np.array([2.0, 0.0, 0.0, 0.0])
    assert_allclose(normalize_power(w4, 1.0, 2), w4 / 4)
    unit = np.array([0.6, 0.8j]) / np.sqrt(2)
    assert np.abs(normalize_power(unit, 1.0, 1) - unit).max() <= 1e-15
    w = normalize_power(np.array([[1.0, 0.0], [0.0, 2j]]), 4.0, 2)
    assert_allclose(np.sum(np.abs(w) ** 2, axis=0), [1.0, 1.0])
    with pytest.raises(ZeroVector):
        normalize_power(np.zeros(4), 1.0, 1)
    with pytest.raises(InvalidParam):
        normalize_power(np.ones(4), 0.0, 1)


@given(st.floats(0.1, 100), st.integers(1, 8))
def test_normalize_power_contract(omega, R):
    w = crandn(np.random.default_rng(R), 6, 2 * R)
    n = np.sum(np.abs(normalize_power(w, omega, R)) ** 2, axis=0)
    assert_allclose(n, omega / (2 * R), rtol=1e-12)


def test_zf_nulls_other_beams():
    _, _, G = scenario()
    W = zf_excitation_set(G)
    Y = G @ W
    off = Y - np.diag(np.diag(Y))
    assert np.abs(off).max() <= 1e-9 * np.abs(np.diag(Y)).min()
    assert_allclose(np.sum(np.abs(W) ** 2, axis=0), 1.0, rtol=1e-12)


def test_zf_identity_channel():
    assert_allclose(zf_excitation_set(np.eye(4)), np.eye(4), atol=1e-15)


def test_zf_single_receiver_free_space_is_matched_filter():
    geo = make_ula(8, LAM / 2, F)
    lay = random_layout(1, SECTOR, 0)
    G = free_space_channel(geo, lay)
    W = zf_excitation_set(G)
    for chi in range(2):
        g = G[chi]
        expect = g.conj() / np.linalg.norm(g)
        assert_allclose(W[:, chi], expect, atol=1e-12)


def test_zf_rejects_bad_shapes():
    with pytest.raises(DimensionMismatch):
        zf_excitation_set(np.ones((3, 8)))
    with pytest.raises(RankDeficient):
        zf_excitation_set(np.ones((2, 8)))


def test_iso_unit_magnitude_and_cross_pol_zero(rng):
    geo = make_ula(8, LAM / 2, F)
    rx = random_layout(3, SECTOR, 2).positions
    W = iso_excitation_set(geo, rx, normalize=False)
    assert_allclose(np.abs(W[0::2, 0::2]), 1.0, rtol=1e-14)
    assert_allclose(np.abs(W[1::2, 1::2]), 1.0, rtol=1e-14)
    assert_array_equal(W[1::2, 0::2], 0)
    assert_array_equal(W[0::2, 1::2], 0)
    Wn = iso_excitation_set(geo, rx)
    assert_allclose(np.sum(np.abs(Wn) ** 2, axis=0), 1.0)


def test_iso_two_element_phase():
    geo = make_ula(2, LAM / 2, F)
    az = np.deg2rad(30)
    rx = 1e5 * np.array([np.cos(az), np.sin(az), 0.0])
    w = iso_excitation(geo, rx, (0, 0), normalize=False)
    assert_allclose(np.angle(w[0] / w[2]), np.pi / 2, atol=1e-3)


def test_iso_peaks_towards_receiver():
    geo = make_ula(16, LAM / 2, F)
    az = np.deg2rad(20)
    rx = 1e6 * np.array([np.cos(az), np.sin(az), 0.0])
    w = iso_excitation(geo, rx, (0, 1))
    phi = np.linspace(-np.pi / 2, np.pi / 2, 3601)
    p = (np.abs(radiate_at(w, geo, ISO, np.pi / 2, phi)) ** 2).sum(axis=0)
    assert abs(phi[np.argmax(p)] - az) < np.deg2rad(0.1)


def test_hybrid_pattern_selects_by_sector():
    g = AngularGrid.midpoint(5, 16)
    a = FarFieldPattern(g, np.ones((2,) + g.shape))
    b = FarFieldPattern(g, 2 * np.ones((2,) + g.shape))
    h = hybrid_pattern(a, b, SECTOR)
    mask = SECTOR.mask(g)
    assert np.all(h.values[:, mask] == 1) and np.all(h.values[:, ~mask] == 2)
    assert_array_equal(hybrid_pattern(a, b, SectorSpec.whole_sphere()).values, a.values)
    with pytest.raises(GridMismatch):
        hybrid_pattern(a, FarFieldPattern(AngularGrid.midpoint(3, 16), np.ones((2, 3, 16))), SECTOR)


def test_wl_sample_angles_half_wavelength():
    geo = make_ula(4, LAM / 2, F)
    th, ph, u = wl_sample_angles(geo)
    assert_allclose(u, [-0.75, -0.25, 0.25, 0.75])
    assert_allclose(th, np.pi / 2)
    assert_allclose(np.sin(ph), u)


def test_wl_sample_angles_overflow_warns():
    geo = make_ula(16, 0.4 * LAM, F)
    with pytest.warns(VisibleRegionOverflow):
        _, _, u = wl_sample_angles(geo)
    assert u.size < 16 and np.all(np.abs(u) <= 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        wl_sample_angles(geo, warn=False)


@pytest.mark.parametrize("T", [1, 8, 16, 32])
def test_wl_reproduces_samples(T, rng):
    geo = make_ula(T, LAM / 2, F)
    th, ph, u = wl_sample_angles(geo)
    target = crandn(rng, 2, u.size)
    w = wl_synthesis(target, geo, EL)
    assert_allclose(radiate_at(w, geo, EL, th, ph), target, rtol=1e-10, atol=1e-12)


def test_wl_constant_target_isotropic_is_uniform():
    # a flat target on all samples is the broadside uniform array
    geo = make_ula(8, LAM / 2, F)
    w = wl_excitation(lambda th, ph: np.ones_like(ph), geo)
    th, ph, u = wl_sample_angles(geo)
    assert_allclose(np.abs(radiate_at(w, geo, ISO, th, ph)[0]), 1.0, rtol=1e-12)
    assert_array_equal(w[1::2], 0)


def test_wl_constant_target_is_sum_of_steering_vectors():
    geo = make_ula(6, LAM / 2, F)
    _, _, u = wl_sample_angles(geo)
    w = wl_excitation(np.ones(6), geo)
    expect = np.exp(-1j * geo.wavenumber * np.outer(geo.y, u)).sum(axis=1) / 6
    assert_allclose(w[0::2], expect, atol=1e-15)


def test_wl_single_sample_broadside():
    geo = make_ula(1, LAM / 2, F)
    w = wl_excitation(np.array([2.0 - 1j]), geo, beam=(0, 1))
    assert_allclose(w, [0.0, 2.0 - 1j])


def test_wl_element_null():
    geo = make_ula(8, LAM / 2, F)
    null_at_horizon = ElementFactor.cosine(1.0, 1.0)
    with pytest.raises(ElementFactorNull):
        wl_synthesis(np.ones((2, 8)), geo, ElementFactor("cosine_power", 200.0, 0.0))
    wl_synthesis(np.ones((2, 8)), geo, null_at_horizon)  # nonzero at every sample


def test_wl_shape_check():
    geo = make_ula(4, LAM / 2, F)
    with pytest.raises(DimensionMismatch):
        wl_synthesis(np.ones((2, 3)), geo, ISO)


def reference_hcs(G, geo, el, rx, integ):
    """Splice at the WL samples with each auxiliary pattern at unit radiated power."""
    def unit(w):
        return w / np.sqrt(integ.total_power(w))

    th, ph, u = wl_sample_angles(geo, warn=False)
    A = radiate_at(unit(zf_excitation_set(G)), geo, el, th, ph)
    B = radiate_at(unit(iso_excitation_set(geo, rx)), geo, el, th, ph)
    target = np.where(SECTOR.contains(th, ph)[None, :, None], A, B)
    W = wl_synthesis(target, geo, el, (th, ph, u))
    return W / np.linalg.norm(W, axis=0)


@pytest.mark.parametrize("T,d", [(16, 0.5), (16, 0.4), (12, 0.5)])
def test_synthesizer_matches_direct_construction(T, d):
    geo, lay, G = scenario(T=T, d=d)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", VisibleRegionOverflow)
        hs = HcsSynthesizer(geo, EL, SECTOR)
    W = hs.synthesize(G, lay.positions)
    assert_allclose(W, reference_hcs(G, geo, EL, lay.positions, hs.integrator), atol=1e-12)


def test_synthesizer_power_contract_and_cache():
    geo, lay, G = scenario()
    hs = HcsSynthesizer(geo, EL, SECTOR)
    W = hs.synthesize(G, lay.positions, omega=3.0)
    assert_allclose(np.sum(np.abs(W) ** 2, axis=0), 3.0 / 8, rtol=1e-12)
    cold = HcsSynthesizer(geo, EL, SECTOR, integrator=hs.integrator, cache_layout=False)
    assert_allclose(hs.synthesize(G, lay.positions), cold.synthesize(G, lay.positions), atol=1e-14)
    other = random_layout(4, SECTOR, 9).positions
    hs.synthesize(G, other)
    assert_allclose(hs.synthesize(G, lay.positions), cold.synthesize(G, lay.positions), atol=1e-14)


def test_synthesizer_whole_sphere_is_zf_at_samples():
    geo, lay, G = scenario()
    sphere = SectorSpec.whole_sphere()
    W = HcsSynthesizer(geo, EL, sphere).synthesize(G, lay.positions)
    assert_allclose(W, zf_excitation_set(G), atol=1e-12)


def test_synthesizer_complex_kernel_path():
    # an element pattern that is not even in azimuth gives a complex kernel
    geo, lay, G = scenario(T=8, R=2)

    class Tilted:
        kind = "custom"
        peaks_on_horizon = False

        def __call__(self, theta, phi, pol=0):
            return (1.2 + np.sin(phi)) * np.sin(theta) ** 2

    el = Tilted()
    grid = AngularGrid.midpoint(61, 121)
    hs = HcsSynthesizer(geo, el, SECTOR, grid)
    assert hs._kernel_real is None
    W = hs.synthesize(G, lay.positions)
    assert_allclose(W, reference_hcs(G, geo, el, lay.positions, hs.integrator), atol=1e-12)


def test_synthesizer_shape_errors():
    geo, lay, G = scenario()
    hs = HcsSynthesizer(geo, EL, SECTOR)
    with pytest.raises(DimensionMismatch):
        hs.synthesize(G, lay.positions[:3])
    with pytest.raises(DimensionMismatch):
        hs.synthesize(G[:, :16], lay.positions)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_synthesizer_zero_beam():
    geo, lay, G = scenario(T=4, R=2)
    hs = HcsSynthesizer(geo, EL, SECTOR)
    hs._kernel_chol = np.zeros_like(hs._kernel_chol)
    with pytest.raises(BeamSynthesisError) as err:
        hs.synthesize(G, lay.positions)
    assert isinstance(err.value.cause, ZeroVector)


def test_hcs_one_shot():
    geo, lay, G = scenario()
    grid = AngularGrid.midpoint(91, 181)
    W = hcs_excitation_set(G, geo, EL, lay, SECTOR, grid)
    assert W.shape == (32, 8)


def test_excitation_csv_roundtrip(tmp_path, rng):
    W = crandn(rng, 6, 4)
    path = tmp_path / "w.csv"
    write_excitations_csv(W, path)
    assert_array_equal(read_excitations_csv(path), W)
    head = path.read_text().splitlines()[:2]
    assert head[0] == "r,chi,t,psi,re,im"
    assert head[1].startswith("0,0,0,0,")
