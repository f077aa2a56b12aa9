"""Model manifolds: curvature conventions, comparison ODE, radial operators."""

import numpy as np
import pytest

from nevlab.manifold import (
    CurvatureProfile,
    curvature_scalar_pair,
    flat,
    hyperbolic,
    kappa_of,
    radial_laplacian,
    solve_warp,
    warped_from_callables,
    warped_from_samples,
)


def _bulge():
    # W(s) = s exp(s^2/2): Gaussian curvature -(3 + s^2), strictly decreasing
    return warped_from_callables(
        W=lambda s: np.asarray(s) * np.exp(np.asarray(s) ** 2 / 2),
        Wp=lambda s: np.exp(np.asarray(s) ** 2 / 2) * (1 + np.asarray(s) ** 2),
        Wpp=lambda s: np.exp(np.asarray(s) ** 2 / 2) * np.asarray(s) * (np.asarray(s) ** 2 + 3),
        name="bulge",
    )


def _fd_laplacian(fn, z, h=1e-4):
    # five-point flat Laplacian of a real-valued function of a complex chart point
    return (fn(z + h) + fn(z - h) + fn(z + 1j * h) + fn(z - 1j * h) - 4 * fn(z)) / h**2


# -- kappa ------------------------------------------------------------------

def test_kappa_flat_vanishes():
    for m in (1, 2, 3):
        assert kappa_of(flat(m), 3.7) == 0.0

def test_kappa_hyperbolic_is_minus_half():
    # complex convention: half the Gaussian curvature
    assert kappa_of(hyperbolic(-1.0), 2.0) == pytest.approx(-0.5, abs=1e-9)
    assert kappa_of(hyperbolic(-4.0), 1.0) == pytest.approx(-2.0, abs=1e-8)

def test_kappa_oracle_fd_log_det_metric():
    # independent oracle: s_M = -1/4 Delta_M log det g = -1/4 lam^-2 Delta_flat log lam^2,
    # evaluated by finite differences in the Poincare chart
    mf = hyperbolic(-1.0)
    for z in (0.1 + 0.2j, 0.5j, -0.3 + 0.1j):
        lam2 = lambda w: 2.0 * np.log(2.0 / (1.0 - abs(w) ** 2))
        s_fd = -0.25 * _fd_laplacian(lam2, z) / mf.conformal_factor(abs(z)) ** 2
        assert s_fd == pytest.approx(-0.5, abs=1e-5)

def test_kappa_user_profile():
    prof = CurvatureProfile(kappa=lambda t: -np.asarray(t, dtype=float) ** 2)
    assert prof(2.0) == -4.0

def test_kappa_negative_radius_rejected():
    with pytest.raises(ValueError):
        kappa_of(flat(1), -1.0)

def test_kappa_bulge_non_increasing():
    mf = _bulge()
    ts = np.linspace(0.1, 3.0, 12)
    ks = np.array([kappa_of(mf, t) for t in ts])
    assert np.all(np.diff(ks) <= 1e-9)
    assert ks[-1] == pytest.approx(-(3 + 9.0) / 2, rel=1e-3)


# -- comparison ODE ----------------------------------------------------------

def test_solve_warp_flat_exact():
    prof = CurvatureProfile(kappa=lambda t: np.zeros_like(np.asarray(t, dtype=float)))
    gw = solve_warp(prof, t_max=5.0, tol=1e-10)
    assert np.max(np.abs(gw.G - gw.grid)) < 1e-9

def test_solve_warp_constant_curvature_is_sinh():
    prof = CurvatureProfile(kappa=lambda t: -np.ones_like(np.asarray(t, dtype=float)))
    gw = solve_warp(prof, t_max=5.0, tol=1e-9)
    rel = np.abs(gw.G[1:] - np.sinh(gw.grid[1:])) / np.sinh(gw.grid[1:])
    assert np.max(rel) < 1e-6

def test_solve_warp_step_halving_oracle():
    prof = CurvatureProfile(kappa=lambda t: -1.0 / (1.0 + np.asarray(t, dtype=float)))
    coarse = solve_warp(prof, t_max=5.0, tol=1e-9)
    fine = solve_warp(prof, t_max=5.0, tol=1e-12)
    rel = np.abs(coarse.G[1:] - fine.G[1:]) / np.abs(fine.G[1:])
    assert np.max(rel) < 1e-8

def test_solve_warp_bounds_hold_on_grid():
    prof = CurvatureProfile(kappa=lambda t: -(1.0 + np.asarray(t, dtype=float)))
    gw = solve_warp(prof, t_max=4.0)
    assert np.all(gw.G + 1e-9 >= gw.grid)
    kap = np.array(prof(gw.grid))
    assert np.all(gw.G <= gw.grid * np.exp(gw.grid * np.sqrt(-kap)) + 1e-9)
    assert np.all(np.diff(gw.G) > 0)

def test_solve_warp_inverse_integral_bound():
    # int_1^r dt/G <= log r for r >= 1
    prof = CurvatureProfile(kappa=lambda t: -np.ones_like(np.asarray(t, dtype=float)))
    gw = solve_warp(prof, t_max=5.0)
    for r in (1.5, 2.0, 3.5, 5.0):
        assert gw.inverse_power_integral(1.0, r, -1.0) <= np.log(r) + 1e-9

def test_solve_warp_rejects_positive_curvature():
    prof = CurvatureProfile(kappa=lambda t: 0.1 * np.ones_like(np.asarray(t, dtype=float)))
    with pytest.raises(ValueError):
        solve_warp(prof, t_max=2.0)


# -- scalar curvature pair -----------------------------------------------------

def test_scalar_pair_flat():
    assert curvature_scalar_pair(flat(1), 0.3 + 0.4j) == (0.0, 0.0)
    assert curvature_scalar_pair(flat(2), np.array([0.3 + 0.4j, 1.0])) == (0.0, 0.0)

def test_scalar_pair_hyperbolic_equality():
    s, bound = curvature_scalar_pair(hyperbolic(-1.0), 0.2 + 0.1j)
    assert s == pytest.approx(-0.5, abs=1e-9)
    assert bound == pytest.approx(-0.5, abs=1e-9)

def test_scalar_pair_bound_random_points():
    mf = _bulge()
    rng = np.random.default_rng(11)
    geod = rng.uniform(0.05, 2.0, 40)
    angles = rng.uniform(0, 2 * np.pi, 40)
    for s_g, th in zip(geod, angles):
        z = float(mf.chart_radius(s_g)) * np.exp(1j * th)
        s, bound = curvature_scalar_pair(mf, z)
        assert s - bound >= -1e-10

def test_scalar_pair_fd_oracle_on_bulge():
    # finite-difference Laplacian of log det g through the numeric chart;
    # the step is kept above the chart-interpolation noise floor
    mf = _bulge()
    for z in (0.3 + 0.1j, 0.5j):
        lam2 = lambda w: 2.0 * np.log(mf.conformal_factor(abs(w)))
        s_fd = -0.25 * _fd_laplacian(lam2, z, h=5e-3) / mf.conformal_factor(abs(z)) ** 2
        s, _ = curvature_scalar_pair(mf, z)
        assert s_fd == pytest.approx(s, rel=1e-2)

def test_scalar_pair_outside_chart():
    with pytest.raises(ValueError):
        curvature_scalar_pair(hyperbolic(-1.0), 1.2 + 0.0j)


# -- radial Laplacian ----------------------------------------------------------

def test_radial_laplacian_flat():
    assert radial_laplacian(flat(1), 2.0) == pytest.approx(0.5)
    assert radial_laplacian(flat(2), 2.0) == pytest.approx(1.5)

def test_radial_laplacian_hyperbolic_coth():
    assert radial_laplacian(hyperbolic(-1.0), 1.0) == pytest.approx(1.0 / np.tanh(1.0), rel=1e-12)

def test_radial_laplacian_fd_oracle():
    # Delta_M r = lam^-2 Delta_flat sigma(|z|) in the conformal chart
    mf = hyperbolic(-1.0)
    z = mf.chart_radius(1.0) + 0j  # chart point at geodesic distance 1
    sigma = lambda w: 2.0 * np.arctanh(abs(w))
    fd = _fd_laplacian(sigma, z, h=1e-5) / mf.conformal_factor(abs(z)) ** 2
    assert fd == pytest.approx(1.0 / np.tanh(1.0), rel=1e-5)

def test_radial_laplacian_comparison_bound():
    for mf in (hyperbolic(-1.0), _bulge()):
        for s in np.linspace(0.2, 2.5, 9):
            assert radial_laplacian(mf, s) >= 1.0 / s - 1e-12

def test_radial_laplacian_rejects_center():
    with pytest.raises(ValueError):
        radial_laplacian(flat(1), 0.0)


# -- representation independence & charts ---------------------------------------

def test_flat_warped_representation_independence():
    one = np.asarray
    trivial = warped_from_callables(W=lambda s: one(s, dtype=float),
                                    Wp=lambda s: np.ones_like(one(s, dtype=float)),
                                    Wpp=lambda s: np.zeros_like(one(s, dtype=float)),
                                    name="flat-as-warped")
    plain = flat(1)
    for t in (0.5, 1.0, 3.0):
        assert kappa_of(trivial, t) == pytest.approx(kappa_of(plain, t), abs=1e-9)
        assert radial_laplacian(trivial, t) == pytest.approx(radial_laplacian(plain, t), rel=1e-9)
        assert float(trivial.chart_radius(t)) == pytest.approx(t, rel=1e-9)
        assert float(trivial.conformal_factor(t / 2)) == pytest.approx(1.0, rel=1e-9)
    s, b = curvature_scalar_pair(trivial, 0.7 + 0.2j)
    assert abs(s) < 1e-9 and abs(b) < 1e-9

def test_generic_chart_roundtrip_and_warp_identity():
    mf = _bulge()
    for s in (0.3, 1.0, 1.8):
        rho = float(mf.chart_radius(s))
        assert float(mf.geodesic_radius(rho + 0j)) == pytest.approx(s, rel=2e-6)
        # W(sigma) = rho * lambda(rho)
        assert rho * float(mf.conformal_factor(rho)) == pytest.approx(float(mf.warp_value(s)), rel=1e-5)

def test_hyperbolic_chart_closed_forms():
    mf = hyperbolic(-1.0)
    assert float(mf.chart_radius(1.0)) == pytest.approx(np.tanh(0.5), rel=1e-12)
    assert float(mf.conformal_factor(0.0)) == pytest.approx(2.0)
    assert float(mf.geodesic_radius(np.tanh(0.5) + 0j)) == pytest.approx(1.0, rel=1e-12)

def test_warp_from_samples_matches_closed_form():
    s = np.linspace(0.0, 3.0, 400)
    mf = warped_from_samples(s, np.sinh(s), name="sampled-sinh")
    assert radial_laplacian(mf, 1.0) == pytest.approx(1.0 / np.tanh(1.0), rel=1e-5)
    assert kappa_of(mf, 1.5) == pytest.approx(-0.5, abs=5e-3)

def test_warp_sample_validation():
    with pytest.raises(ValueError):
        warped_from_samples([0.0, 1.0], [0.5, 1.0])
    with pytest.raises(ValueError):
        warped_from_samples([0.0, 1.0, 2.0], [0.0, -1.0, 1.0])
