"""Functionals: characteristic, proximity, counting, defects, sandwich."""

import numpy as np
import pytest
from scipy.integrate import quad

from nevlab.greens import coarea_quadrature
from nevlab.manifold import flat, hyperbolic
from nevlab.nevanlinna import (
    McParams,
    build_table,
    characteristic,
    characteristic_density,
    counting,
    curvature_characteristic,
    defects,
    nevanlinna_T,
    phi_characteristic,
    pn_sandwich,
    proximity,
)
from nevlab.targets import INF, exp_affine, exp_combination, projective, rational

C1, HYP = flat(1), hyperbolic(-1.0)
Z = rational([1, 0])
ZSQ_M1 = rational([1, 0, -1])
MOB = rational([1, -1], [1, 2])
EXP = exp_affine(1.0)
ZP2 = rational([1, 2])  # z + 2


# -- characteristic ---------------------------------------------------------------

def test_characteristic_identity_map():
    assert characteristic(Z, C1, 1.0) == pytest.approx(0.5 * np.log(2), abs=1e-9)
    # Ahlfors-Shimizu closed form for psi = z
    for r in (0.5, 2.0, 7.0):
        assert characteristic(Z, C1, r) == pytest.approx(0.5 * np.log(1 + r * r), abs=1e-9)

def test_characteristic_exponential_growth():
    # the Fubini-Study normalization sits log sqrt(2) below the classical T,
    # which equals r/pi on the nose for e^z
    assert characteristic(EXP, C1, 10.0) == pytest.approx(10 / np.pi, abs=0.4)
    assert nevanlinna_T(EXP, C1, 10.0) == pytest.approx(10 / np.pi, abs=1e-9)

def test_characteristic_density_oracle():
    # independent 2-D quadrature of the spherical density agrees with the
    # sphere-average + pole-count route
    for target, r in [(Z, 2.0), (ZSQ_M1, 2.0), (MOB, 3.0), (EXP, 5.0)]:
        sphere_route = characteristic(target, C1, r)
        density_route = characteristic_density(target, C1, r, tol=1e-10)
        assert density_route == pytest.approx(sphere_route, abs=5e-7), target.label

def test_characteristic_rejects_constant():
    with pytest.raises(ValueError):
        characteristic(rational([3]), C1, 1.0)

def test_classical_textbook_values():
    # T(r) growth of the standard corpus
    r = 20.0
    assert nevanlinna_T(Z, C1, r) == pytest.approx(np.log(r), abs=0.01)
    assert nevanlinna_T(rational([1, 0, 0]), C1, r) == pytest.approx(2 * np.log(r), abs=0.01)
    # Moebius map: T = N(r, inf) + o(1) = log(r/2) since |psi| -> 1 at infinity
    assert nevanlinna_T(MOB, C1, r) == pytest.approx(np.log(r / 2), abs=0.1)
    assert nevanlinna_T(EXP, C1, r) == pytest.approx(r / np.pi, abs=0.05)


# -- proximity ----------------------------------------------------------------------

def test_proximity_logplus_identity_map():
    assert proximity(Z, INF, C1, np.e, flavor="logplus") == pytest.approx(1.0, abs=1e-10)

def test_proximity_exponential_exact():
    for r in (2.0, 10.0, 25.0):
        assert proximity(EXP, INF, C1, r, flavor="logplus") == pytest.approx(r / np.pi, rel=1e-9)

def test_proximity_zero_when_far():
    assert proximity(Z, 0.0, C1, 2.0, flavor="logplus") == 0.0

def test_proximity_tolerates_center_value():
    # psi(o) = a leaves the sphere average finite; only counting and the
    # first-main-theorem constants reject it
    assert proximity(Z, 0.0, C1, 2.0, flavor="chordal") > 0.0
    with pytest.raises(ValueError):
        counting(Z, 0.0, C1, 1.0)


# -- counting -----------------------------------------------------------------------

def test_counting_two_unit_zeros():
    assert counting(ZSQ_M1, 0.0, C1, np.e) == pytest.approx(2.0, abs=1e-12)

def test_counting_exp_lattice():
    expected = 2 * np.log(10 / np.pi) + 2 * np.log(10 / (3 * np.pi))
    assert counting(EXP, -1.0, C1, 10.0) == pytest.approx(expected, abs=1e-12)

def test_counting_truncation_drops_multiplicity():
    sq = rational([1, -2, 1])
    assert counting(sq, 0.0, C1, np.e) == pytest.approx(2.0, abs=1e-12)
    assert counting(sq, 0.0, C1, np.e, truncated=True) == pytest.approx(1.0, abs=1e-12)

def test_counting_on_hyperbolic_uses_curved_green():
    val = counting(Z, 0.3, HYP, 2.0)
    s_pt = float(HYP.geodesic_radius(0.3 + 0j))
    expected = np.pi * np.log(np.tanh(1.0) / np.tanh(s_pt / 2)) / np.pi
    assert val == pytest.approx(expected, rel=1e-12)

@pytest.mark.slow
def test_counting_tail_estimator():
    est, se = counting(ZSQ_M1, 0.0, C1, np.e, method="montecarlo",
                       mc=McParams(paths=30000, seed=42))
    assert abs(est - 2.0) <= 0.2
    assert se < 0.1


# -- singular-metric characteristic -----------------------------------------------

def test_phi_characteristic_fubini_oracle():
    got = phi_characteristic(ZP2, C1, 1.0, tol=1e-9)
    # push through the value side: int over |zeta - 2| < 1 of log(1/|zeta-2|) dPhi
    def inner(rho):
        avg, _ = quad(lambda th: 1.0 / (abs(2 + rho * np.exp(1j * th)) ** 2 *
                                        (1 + np.log(abs(2 + rho * np.exp(1j * th))) ** 2)),
                      0, 2 * np.pi, limit=200)
        return avg
    ref, _ = quad(lambda rho: np.log(1 / rho) * rho * inner(rho) / (2 * np.pi**2), 0, 1, limit=200)
    assert got == pytest.approx(ref, abs=1e-4)

def test_phi_characteristic_monotone_and_dominated():
    rs = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    vals = np.array([phi_characteristic(ZP2, C1, float(r)) for r in rs])
    assert np.all(np.diff(vals) > 0)
    # bounded above by T(r, psi) + O(1): the difference trace flattens
    diffs = vals - np.array([nevanlinna_T(ZP2, C1, float(r)) for r in rs])
    assert diffs[-1] - diffs[-2] < 0.1

def test_phi_characteristic_guard():
    with pytest.raises(ValueError):
        phi_characteristic(Z, C1, 1.0)  # psi(o) = 0


# -- curvature characteristic ---------------------------------------------------

def test_curvature_characteristic_flat_zero():
    assert curvature_characteristic(flat(2), 3.0) == 0.0

def test_curvature_characteristic_hyperbolic():
    val = curvature_characteristic(HYP, 1.0)
    expected = -0.5 * coarea_quadrature(HYP, 1.0, lambda s: 1.0)
    assert val == pytest.approx(expected, rel=1e-8)
    # comparison bound (2m-1)/2 kappa(r) r^2 with kappa = -1/2
    assert val >= 0.5 * (-0.5) * 1.0**2

def test_curvature_characteristic_bound_on_grid():
    for r in (0.5, 1.0, 2.0, 4.0):
        val = curvature_characteristic(HYP, r)
        assert val >= 0.5 * (-0.5) * r * r - 1e-9


# -- first main theorem (module-level smoke; the full suite lives in theorems) ------

def test_fmt_deviation_constant_rational():
    # That - m_hat(a) - N(a) must be flat in r (it equals log ||psi(o), a||);
    # divisor values are chosen with no a-point sitting on a grid circle
    grid = np.linspace(2, 20, 7)
    for target, a in [(ZSQ_M1, 0.0), (ZSQ_M1, 3.5), (MOB, 0.0), (MOB, 1.0), (Z, 1.5j)]:
        dev = []
        for r in grid:
            dev.append(characteristic(target, C1, float(r))
                       - proximity(target, a, C1, float(r))
                       - counting(target, a, C1, float(r)))
        assert max(dev) - min(dev) < 1e-7, (target.label, a)

def test_fmt_deviation_exp_small():
    grid = np.linspace(2, 20, 5)
    dev = [characteristic(EXP, C1, float(r))
           - proximity(EXP, -1.0, C1, float(r))
           - counting(EXP, -1.0, C1, float(r)) for r in grid]
    assert max(dev) - min(dev) < 0.02

def test_fmt_on_hyperbolic_surface():
    grid = np.linspace(1.0, 3.0, 5)
    for a in (0.5, 2.0):
        dev = [characteristic(MOB, HYP, float(r))
               - proximity(MOB, a, HYP, float(r))
               - counting(MOB, a, HYP, float(r)) for r in grid]
        assert max(dev) - min(dev) < 1e-7


# -- estimator agreement ----------------------------------------------------------

@pytest.mark.slow
def test_montecarlo_matches_quadrature():
    mc = McParams(paths=4000, dt=5e-3, seed=11)
    for r in (3.0, 5.0):
        t_mc, t_se = characteristic(EXP, C1, r, "montecarlo", mc=mc)
        t_q = characteristic(EXP, C1, r)
        assert abs(t_mc - t_q) < 3 * t_se + 0.05
        m_mc, m_se = proximity(EXP, INF, C1, r, "montecarlo", "logplus", mc=mc)
        m_q = proximity(EXP, INF, C1, r, flavor="logplus")
        assert abs(m_mc - m_q) < 3 * m_se + 0.02


# -- sandwich ---------------------------------------------------------------------

def test_pn_sandwich_mixed_components():
    mx, that, total = pn_sandwich(projective([rational([1]), Z, EXP]), C1, 10.0)
    assert mx == pytest.approx(10 / np.pi, abs=0.15)
    assert mx <= that + 2.0
    assert that <= total + 4.0

def test_pn_sandwich_polynomial_growth():
    pn = projective([rational([1]), Z, rational([1, 0, 0])])
    vals = [pn_sandwich(pn, C1, r)[1] for r in (10.0, 20.0, 40.0)]
    # That grows like 2 log r: doubling r adds about 2 log 2
    assert vals[1] - vals[0] == pytest.approx(2 * np.log(2), abs=0.1)
    assert vals[2] - vals[1] == pytest.approx(2 * np.log(2), abs=0.1)

def test_pn_sandwich_rejects_constant():
    with pytest.raises(ValueError):
        pn_sandwich(projective([rational([1]), rational([2]), rational([5])]), C1, 5.0)


# -- tables and defects --------------------------------------------------------------

@pytest.fixture(scope="module")
def exp_table():
    grid = np.linspace(2.0, 50.0, 16)
    return build_table(EXP, C1, grid, divisors=(0.0, INF, -1.0, 2.0))

def test_table_monotone_and_goed(exp_table):
    t_hat = exp_table.values("That")
    t_cls = exp_table.values("T")
    assert np.all(np.diff(t_hat) > 0)
    assert np.max(np.abs(t_hat - t_cls)) < 1.0  # differ by a bounded term

def test_table_nevanlinna_inequality(exp_table):
    # N(r, a) <= That(r) + log 1/||f(o), a|| + 1
    from nevlab.targets import chordal_distance
    t_hat = exp_table.values("That")
    for a, label in [(-1.0, "-1"), (2.0, "2")]:
        n = exp_table.values("N", label)
        c_a = np.log(1.0 / chordal_distance(1.0, a)) + 1.0
        assert np.all(n <= t_hat + c_a + 1e-9)

def test_defects_of_exponential(exp_table):
    rep = defects(exp_table)
    assert rep.delta["0"] == 1.0 and rep.theta["0"] == 1.0
    assert rep.delta["inf"] == 1.0 and rep.theta["inf"] == 1.0
    assert 0.0 <= rep.theta["-1"] <= 0.07
    assert 0.0 <= rep.theta["2"] <= 0.07
    assert rep.total_theta() <= 2.1
    for label in rep.divisors:
        assert rep.theta[label] >= rep.delta[label] - 1e-12

def test_defects_need_enough_radii():
    grid = np.linspace(2.0, 10.0, 4)
    small = build_table(Z, C1, grid, divisors=(1.0,))
    with pytest.raises(ValueError):
        defects(small)

def test_table_serialization(exp_table, tmp_path):
    out = tmp_path / "table.csv"
    exp_table.to_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "r,quantity,divisor,method,value,se"
    assert len(lines) == 1 + len(exp_table.rows)
    js = exp_table.to_json()
    assert '"manifold"' in js and '"rows"' in js
