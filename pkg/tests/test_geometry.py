import numpy as np
import pytest
from scipy import integrate

from cfdiff.geometry import (DistanceTooSmall, NetworkTopology, PlacementInfeasible,
                             build_large_scale, correlated_shadowing, drop_topology,
                             noise_power_dbm, pathloss_umi_db, place_aps_hcpp,
                             spatial_correlation)
from cfdiff.mathcore import RandomStream


def min_pairwise(pts):
    D = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    np.fill_diagonal(D, np.inf)
    return D.min()


def test_hcpp_single_ap():
    pts = place_aps_hcpp(1, 250_000.0, RandomStream(0))
    assert pts.shape == (1, 2)
    assert np.all((pts >= 0) & (pts <= 500))


@pytest.mark.parametrize("seed", range(10))
def test_hcpp_table_scale_respects_min_distance(seed):
    pts = place_aps_hcpp(40, 250_000.0, RandomStream(seed))
    assert np.sqrt(250_000 / 40) == pytest.approx(79.06, abs=0.01)
    assert min_pairwise(pts) >= np.sqrt(250_000 / 40)
    assert np.all((pts >= 0) & (pts <= 500))


def test_hcpp_impossible_distance():
    with pytest.raises(PlacementInfeasible):
        place_aps_hcpp(2, 100.0, RandomStream(0), d_min=15.0)  # diagonal is 14.1 m


def test_hcpp_iteration_cap():
    with pytest.raises(PlacementInfeasible):
        place_aps_hcpp(40, 250_000.0, RandomStream(0), max_iter=1)


def test_pathloss_hand_value():
    expected = 35.3 * 2 + 22.4 + 21.3 * np.log10(3.5) - 0.3 * 0.15
    assert expected == pytest.approx(104.54, abs=0.01)
    assert pathloss_umi_db(100.0, 3.5, 1.65) == pytest.approx(expected, abs=1e-12)


def test_pathloss_slope_and_frequency_term():
    d = np.array([10.0, 20.0, 40.0])
    pl = pathloss_umi_db(d, 3.5, 1.65)
    np.testing.assert_allclose(np.diff(pl), 35.3 * np.log10(2))
    assert pathloss_umi_db(50.0, 1.0, 1.5) == pytest.approx(35.3 * np.log10(50) + 22.4)
    assert np.all(np.diff(pathloss_umi_db(np.linspace(1, 800, 200), 3.5, 1.65)) >= 0)


def test_pathloss_rejects_short_distance():
    with pytest.raises(DistanceTooSmall):
        pathloss_umi_db(0.5, 3.5)


def test_noise_power_table_value():
    assert 10 * np.log10(2e7) == pytest.approx(73.01, abs=0.005)
    assert noise_power_dbm(20e6, 8.0) == pytest.approx(-174 + 73.0103 + 8, abs=1e-3)
    assert round(noise_power_dbm(20e6, 8.0), 1) == -93.0


def two_ue_topology(sep, n_aps):
    ues = np.array([[0.0, 0.0, 1.65], [sep, 0.0, 1.65]])
    aps = np.zeros((n_aps, 3))
    return NetworkTopology(side=500.0, ap_positions=aps, ue_positions=ues)


def test_shadowing_zero_sigma():
    topo = drop_topology(5, 3, 100.0, 10.0, 1.5, RandomStream(0))
    np.testing.assert_array_equal(correlated_shadowing(topo, 0.0, RandomStream(1)), 0)


def test_shadowing_colocated_identical():
    sf = correlated_shadowing(two_ue_topology(0.0, 10_000), 4.0, RandomStream(2))
    np.testing.assert_allclose(sf[0], sf[1], atol=1e-9)


def test_shadowing_correlation_at_decorrelation_distance():
    sf = correlated_shadowing(two_ue_topology(9.0, 100_000), 4.0, RandomStream(3))
    assert np.corrcoef(sf[0], sf[1])[0, 1] == pytest.approx(0.5, abs=0.05)
    assert sf.std() == pytest.approx(4.0, rel=0.02)


def test_spatial_correlation_single_antenna():
    R = spatial_correlation([0, 0], [10, 20], 3e-9, 15.0, 1)
    np.testing.assert_allclose(R, [[3e-9]])


def test_spatial_correlation_wide_spread_limit():
    R = spatial_correlation([0, 0], [10, 20], 2.0, np.rad2deg(1e4), 4)
    np.testing.assert_allclose(R, 2.0 * np.eye(4), atol=1e-12)


def gaussian_scattering_entry(dist, phi, sigma):
    """Exact local-scattering integral for antenna distance ``dist`` (wavelengths)."""
    def dens(d):
        return np.exp(-d ** 2 / (2 * sigma ** 2)) / (np.sqrt(2 * np.pi) * sigma)

    lim = 20 * sigma
    re = integrate.quad(lambda d: np.cos(2 * np.pi * dist * np.sin(phi + d)) * dens(d),
                        -lim, lim, limit=200)[0]
    im = integrate.quad(lambda d: np.sin(2 * np.pi * dist * np.sin(phi + d)) * dens(d),
                        -lim, lim, limit=200)[0]
    return re + 1j * im


@pytest.mark.parametrize("method", [
    "integral",
    pytest.param("closed_form", marks=pytest.mark.xfail(
        strict=True, reason="small-angle form is off by up to 0.07 here")),
])
def test_spatial_correlation_against_quadrature(method):
    phi = np.deg2rad(30.0)
    ue = [100 * np.cos(phi), 100 * np.sin(phi)]
    R = spatial_correlation([0, 0], ue, 1.0, 15.0, 4, spacing=0.5, method=method)
    for a in range(4):
        for b in range(4):
            exact = gaussian_scattering_entry(0.5 * (a - b), phi, np.deg2rad(15.0))
            assert abs(R[a, b] - exact) <= 0.02


def test_closed_form_matches_integral_at_broadside():
    # the dropped curvature term scales with sin(phi), so phi = 0 is the best case
    R_cf = spatial_correlation([0, 0], [1.0, 0.0], 1.0, 15.0, 4)
    R_in = spatial_correlation([0, 0], [1.0, 0.0], 1.0, 15.0, 4, method="integral")
    assert np.max(np.abs(R_cf - R_in)) <= 0.02
    np.testing.assert_allclose(np.diag(R_in), 1.0, atol=1e-12)


def test_large_scale_invariants():
    topo = drop_topology(12, 6, 300.0, 11.65, 1.65, RandomStream(5))
    ls = build_large_scale(topo, RandomStream(6), N=4)
    assert np.all(ls.beta > 0)
    R = ls.R
    np.testing.assert_allclose(R, np.conj(np.swapaxes(R, -1, -2)), atol=1e-12 * R.real.max())
    tr = np.trace(R, axis1=-2, axis2=-1)
    np.testing.assert_allclose(tr.real, 4 * ls.beta, rtol=1e-12)
    eig = np.linalg.eigvalsh(R)
    assert np.all(eig >= -1e-10 * tr.real[..., None])
    assert ls.noise_power == pytest.approx(10 ** ((-93.0 - 30) / 10), rel=0.01)
