"""Value-distribution functionals by quadrature and by Monte-Carlo.

The characteristic of psi = num/den with respect to the Fubini-Study form,
written That here, is the Green-weighted spherical area swept by the map.
Two independent routes compute it:

* quadrature: the exact exit-law average of u_inf = log 1/||psi, inf||
  (uniform on the geodesic sphere by symmetry) minus its center value, plus
  the Green-weighted count of the poles inside the ball.  The pole term is
  the Riesz mass of u_inf's singularities; with it the chordal first-main
  identity  That = m_hat(r, a) + N(r, a) - log 1/||psi(o), a||  holds
  exactly for every a, which is what the acceptance checks exercise.
* a two-dimensional co-area quadrature of the smooth spherical-derivative
  density (characteristic_density), kept as an independent oracle, and the
  Monte-Carlo path functional of the same density.

Counting functions are computed from exact divisor enumeration with Green
weights, and independently by the tail-probability estimator
lim lambda P(sup log 1/||psi(X), a|| > lambda), extrapolated over a
geometric lambda grid: lambda P is affine in 1/lambda to leading order, so
a weighted straight-line fit in 1/lambda gives the limit, and its residual
chi-square is the required linearity test.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .greens import circle_mean, coarea_quadrature, green_radial
from .manifold import ModelManifold
from .rng import RngSpec
from .stochastic import PathEnsemble, path_functionals, simulate_score_suprema
from .targets import (
    DivisorSpec,
    MeromorphicTarget,
    ProjectiveTarget,
    _as_pair,
    chordal_from_pairs,
    spherical_density,
)

__all__ = [
    "characteristic",
    "characteristic_density",
    "nevanlinna_T",
    "proximity",
    "counting",
    "phi_characteristic",
    "curvature_characteristic",
    "pn_sandwich",
    "McParams",
    "NevanlinnaTable",
    "DefectReport",
    "build_table",
    "defects",
]


@dataclass(frozen=True)
class McParams:
    """Monte-Carlo settings shared by the estimators."""

    paths: int = 10_000
    dt: float = 1e-3
    seed: int = 0

    @property
    def rng(self) -> RngSpec:
        return RngSpec(self.seed)


# ---------------------------------------------------------------------------
# sphere means and the basic integrands
# ---------------------------------------------------------------------------


def _sphere_mean(manifold: ModelManifold, r: float, fn, tol: float = 1e-10) -> float:
    """Average over the exit sphere S_o(r) (uniform angle, m = 1)."""
    if manifold.m != 1:
        raise ValueError("sphere averages are implemented for m = 1 sources")
    rho = float(manifold.chart_radius(r))
    return circle_mean(lambda th: fn(rho * np.exp(1j * th)), tol=tol)


def _log_inv_chordal(target: MeromorphicTarget, a):
    da, na = _as_pair(a)

    def fn(z):
        n, d = target.pair(z)
        dist = chordal_from_pairs(d, n, da, na)
        return -np.log(np.maximum(dist, 1e-300))

    return fn


def _log_plus_inv(target: MeromorphicTarget, a):
    if isinstance(a, str) and a == "inf" or (not isinstance(a, str) and not np.isfinite(complex(a))):
        def fn(z):
            n, d = target.pair(z)
            with np.errstate(divide="ignore"):
                return np.maximum(np.log(np.abs(n)) - np.log(np.abs(d)), 0.0)
        return fn
    a = complex(a)

    def fn(z):
        n, d = target.pair(z)
        with np.errstate(divide="ignore"):
            return np.maximum(np.log(np.abs(d)) - np.log(np.abs(n - a * d)), 0.0)
    return fn


def _pick_anchor(target: MeromorphicTarget, manifold: ModelManifold, r: float):
    """A value a* with psi(o) away from a* and no a*-point near S_o(r).

    The exact That identity needs the sphere average of log 1/||psi, a*||,
    which converges fast only when the a*-divisor stays clear of the sphere.
    """
    n0 = complex(np.asarray(target.num(0.0 + 0.0j)))
    d0 = complex(np.asarray(target.den(0.0 + 0.0j)))
    chart_r = float(manifold.chart_radius(r))
    for cand in ("inf", 0.0, 1.0, -1.0, 2.0j, 0.7 - 0.4j, 3.3 + 1.1j):
        dist = chordal_from_pairs(d0, n0, *_as_pair(cand))
        if dist <= 0.1:
            continue
        pts = target.divisor(cand, float(manifold.chart_radius(1.05 * r + 0.1)), 1e-9)
        radii = np.array([float(manifold.geodesic_radius(z)) for z, _ in pts])
        if radii.size == 0 or np.min(np.abs(radii - r)) > 0.02 * r:
            return cand, float(-np.log(dist))
    raise ValueError("could not find an anchor value away from psi(o) and from S_o(r)")


# ---------------------------------------------------------------------------
# characteristic functions
# ---------------------------------------------------------------------------


def characteristic(target: MeromorphicTarget, manifold: ModelManifold, r: float,
                   method: str = "quadrature", mc: McParams | None = None,
                   ensemble: PathEnsemble | None = None, tol: float = 1e-10):
    """Fubini-Study characteristic That(r).

    quadrature: exit-law sphere average of log sqrt(1+|psi|^2) minus its
    center value, plus the Green-weighted pole count (exact, see module
    docstring).  montecarlo: half the path functional of the pulled-back
    spherical density; returns (estimate, standard error).
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    if target.is_constant():
        raise ValueError("characteristic of a constant target is degenerate")
    if method == "quadrature":
        anchor, u_o = _pick_anchor(target, manifold, r)
        m_hat = _sphere_mean(manifold, r, _log_inv_chordal(target, anchor), tol)
        n_anchor = counting(target, anchor, manifold, r)
        return m_hat + n_anchor - u_o
    if method == "montecarlo":
        ens = ensemble if ensemble is not None else _default_ensemble(manifold, r, mc)
        dens = _pullback_density(target, manifold)
        (est, se), = path_functionals(ens, [dens])
        return 0.5 * est, 0.5 * se
    raise ValueError(f"unknown method {method!r}")


def _default_ensemble(manifold, r, mc: McParams | None) -> PathEnsemble:
    from .stochastic import simulate_paths

    mc = mc or McParams()
    dt = min(mc.dt, 1e-2 * r * r)
    return simulate_paths(manifold, r, dt, mc.paths, mc.rng)


def _pullback_density(target: MeromorphicTarget, manifold: ModelManifold):
    """e_{psi* omega_FS}(x) = 2 lambda^{-2} |psi'|^2/(1+|psi|^2)^2 on the chart."""
    if manifold.is_flat:
        return lambda z: 2.0 * spherical_density(target, z)

    def dens(z):
        lam = np.asarray(manifold.conformal_factor(np.abs(z)), dtype=float)
        return 2.0 * spherical_density(target, z) / lam**2

    return dens


def characteristic_density(target: MeromorphicTarget, manifold: ModelManifold, r: float,
                           tol: float = 1e-9) -> float:
    """That by two-dimensional co-area quadrature of the spherical density.

    Independent of divisor enumeration and of the sphere-average route; used
    as a cross-check oracle.
    """
    dens = _pullback_density(target, manifold)
    return 0.5 * coarea_quadrature(manifold, r, dens, tol=tol, radial=False)


def nevanlinna_T(target: MeromorphicTarget, manifold: ModelManifold, r: float,
                 tol: float = 1e-10) -> float:
    """Classical characteristic T(r) = m(r, inf) + N(r, inf), log-plus flavor."""
    m_inf = _sphere_mean(manifold, r, _log_plus_inv(target, "inf"), tol)
    return m_inf + counting(target, "inf", manifold, r)


# ---------------------------------------------------------------------------
# proximity and counting
# ---------------------------------------------------------------------------


def proximity(target: MeromorphicTarget, a, manifold: ModelManifold, r: float,
              method: str = "quadrature", flavor: str = "chordal",
              mc: McParams | None = None, ensemble: PathEnsemble | None = None,
              tol: float = 1e-10):
    """Proximity of psi to a on S_o(r): chordal m_hat or classical log-plus m.

    quadrature uses the exact uniform exit law; montecarlo averages over the
    exit points of a simulated ensemble and returns (estimate, SE).

    psi(o) = a is tolerated here (the sphere integrand stays integrable);
    the counting and first-main-theorem machinery reject it, since their
    constants carry log 1/||psi(o), a||.
    """
    fn = _log_inv_chordal(target, a) if flavor == "chordal" else _log_plus_inv(target, a)
    if method == "quadrature":
        return _sphere_mean(manifold, r, fn, tol)
    if method == "montecarlo":
        ens = ensemble if ensemble is not None else _default_ensemble(manifold, r, mc)
        vals = np.asarray(fn(ens.exit_points[ens.ok]), dtype=float)
        return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(vals.size))
    raise ValueError(f"unknown method {method!r}")


def _require_off_divisor(target: MeromorphicTarget, a) -> None:
    n0 = np.asarray(target.num(0.0 + 0.0j))
    d0 = np.asarray(target.den(0.0 + 0.0j))
    if chordal_from_pairs(d0, n0, *_as_pair(a)) < 1e-12:
        raise ValueError("psi(o) = a: divisor passes through the reference point")


@dataclass(frozen=True)
class TailDiagnostics:
    lambdas: np.ndarray
    probabilities: np.ndarray
    fitted: np.ndarray
    chi2_per_dof: float


def counting(target: MeromorphicTarget, a, manifold: ModelManifold, r: float,
             truncated: bool = False, method: str = "enumeration",
             mc: McParams | None = None, lambda_window: tuple = (1.2, 3.0),
             n_lambda: int = 9, diagnostics: list | None = None, tol: float = 1e-10):
    """Green-weighted pre-image count N(r, a) (or truncated Nbar).

    enumeration: exact divisor points, each contributing
    pi * mult * g_r(o, s_k).  montecarlo: the tail-probability estimator
    lim lambda P(sup_{t<=tau} log 1/||psi(X_t), a|| > lambda) extrapolated
    over a geometric lambda grid; returns (estimate, SE) and raises if the
    linearity test fails.
    """
    a = a.value if isinstance(a, DivisorSpec) else a
    _require_off_divisor(target, a)
    if method == "enumeration":
        points = target.divisor(a, float(manifold.chart_radius(r)), tol)
        total = 0.0
        for z, mult in points:
            s_k = float(manifold.geodesic_radius(z))
            if s_k <= 0:
                raise ValueError("divisor point at the reference point")
            weight = 1 if truncated else mult
            total += weight * math.pi * green_radial(manifold, r, s_k)
        return total
    if method == "montecarlo":
        if truncated:
            raise ValueError("the tail estimator counts with multiplicity")
        return _counting_tail(target, a, manifold, r, mc or McParams(),
                              lambda_window, n_lambda, diagnostics)
    raise ValueError(f"unknown method {method!r}")


def _counting_tail(target, a, manifold, r, mc: McParams, window, n_lambda, diagnostics):
    score = _log_inv_chordal(target, a)
    h = target.level_entire(a)
    hp = h.deriv() if h is not None else None

    def grad_scale(z):
        if hp is None:
            eps = 1e-6
            val = np.abs(score(z + eps) - score(z - eps)) / (2 * eps)
            return val + 1.0
        hv = np.asarray(h(z))
        return np.abs(np.asarray(hp(z))) / np.maximum(np.abs(hv), 1e-300) + 1.0

    dt_base = min(1e-2 * r * r, 0.02)
    sups, _taus = simulate_score_suprema(manifold, r, mc.paths, mc.rng, score,
                                         grad_scale, dt_base=dt_base, target_move=0.15)
    lam = np.geomspace(window[0], window[1], n_lambda)
    p_hat = np.array([np.mean(sups > L) for L in lam])
    if np.any(p_hat < 5e-3) or np.any(p_hat > 0.995):
        raise RuntimeError("tail estimator: lambda window outside the resolvable range")
    # lambda P approaches its limit N like N lambda/(lambda + c), so the
    # reciprocal 1/(lambda P) = 1/N + (c/N)/lambda is the straight line to
    # fit; curvature of the raw lambda P in 1/lambda would bias the limit
    y = lam * p_hat
    sig_y = lam * np.sqrt(p_hat * (1 - p_hat) / mc.paths)
    w_rec = 1.0 / y
    sig = sig_y / y**2
    x = 1.0 / lam
    wts = 1.0 / sig**2
    A = np.stack([np.ones_like(x), x], axis=1)
    cov = np.linalg.inv(A.T @ (wts[:, None] * A))
    beta = cov @ (A.T @ (wts * w_rec))
    fitted = A @ beta
    chi2 = float(np.sum(((w_rec - fitted) / sig) ** 2)) / max(len(lam) - 2, 1)
    if diagnostics is not None:
        diagnostics.append(TailDiagnostics(lam, p_hat, 1.0 / fitted, chi2))
    if chi2 > 4.0:
        raise RuntimeError(f"tail estimator slope test failed (chi2/dof = {chi2:.2f})")
    alpha = float(beta[0])
    if alpha <= 0:
        raise RuntimeError("tail estimator extrapolation produced a non-positive limit")
    return 1.0 / alpha, float(math.sqrt(cov[0, 0])) / alpha**2


# ---------------------------------------------------------------------------
# singular-metric and curvature characteristics
# ---------------------------------------------------------------------------


def phi_characteristic(target: MeromorphicTarget, manifold: ModelManifold, r: float,
                       tol: float = 1e-6) -> float:
    """Green-weighted mass of the logarithmic-gradient density.

    (1/2pi) int g_r |grad psi|^2 / (|psi|^2 (1+log^2|psi|)) dV; finite for
    psi(o) off {0, inf}.  Zero and pole divisors inside the ball contribute
    1/(dist^2 log^2 dist) singularities that are integrable in the plane but
    blow up slice-wise, so the quadrature is fully adaptive in both the
    radial and the angular variable, with divisor locations passed as break
    points.
    """
    from scipy.integrate import quad

    n0 = complex(np.asarray(target.num(0j)))
    d0 = complex(np.asarray(target.den(0j)))
    if abs(n0) < 1e-12 * (abs(n0) + abs(d0)) or abs(d0) < 1e-12 * (abs(n0) + abs(d0)):
        raise ValueError("psi(o) in {0, inf}: the density is not integrable at the pole of g")

    def dens(z):
        n, d = target.pair(z)
        w = target.wronskian(z)
        nd = np.maximum(np.abs(n) * np.abs(d), 1e-280)
        with np.errstate(divide="ignore", over="ignore"):
            loga = np.log(np.abs(n)) - np.log(np.abs(d))
            val = (np.abs(w) / nd) ** 2 / (1.0 + loga**2)
        if not manifold.is_flat:
            val = val / np.asarray(manifold.conformal_factor(np.abs(z)), dtype=float) ** 2
        return np.minimum(val, 1e250)

    chart_r = float(manifold.chart_radius(r))
    div_pts = [z for a in (0.0, "inf") for z, _ in target.divisor(a, chart_r, 1e-9)]
    div_radii = sorted({float(manifold.geodesic_radius(z)) for z in div_pts})
    div_angles = sorted({float(np.angle(z)) % (2 * math.pi) for z in div_pts})

    def ang_mean(s: float) -> float:
        rho = float(manifold.chart_radius(s))
        val, _ = quad(lambda th: float(dens(rho * np.exp(1j * th))), 0.0, 2 * math.pi,
                      points=div_angles or None, limit=300,
                      epsabs=tol * 1e-2, epsrel=1e-8)
        return val / (2 * math.pi)

    def weighted(s: float) -> float:
        return ang_mean(s) * green_radial(manifold, r, s) * float(manifold.sphere_area(s))

    s_split = min(r / 8.0, *(0.5 * s for s in div_radii)) if div_radii else r / 8.0
    inner, _ = quad(lambda u: weighted(math.exp(u)) * math.exp(u),
                    math.log(r) - 50.0, math.log(s_split), limit=200,
                    epsabs=tol / 2, epsrel=1e-8)
    pts = [s for s in div_radii if s_split < s < r]
    outer, _ = quad(weighted, s_split, r, limit=300, epsabs=tol / 2, epsrel=1e-8,
                    points=pts or None)
    return (inner + outer) / (2.0 * math.pi)


def curvature_characteristic(manifold: ModelManifold, r: float,
                             method: str = "quadrature", mc: McParams | None = None,
                             ensemble: PathEnsemble | None = None, tol: float = 1e-10):
    """T(r, Ricci form) = E_o[int_0^tau s_M(X_t) dt]; zero on flat space."""
    if manifold.is_flat:
        return 0.0 if method == "quadrature" else (0.0, 0.0)
    if method == "quadrature":
        return coarea_quadrature(manifold, r, lambda s: manifold.scalar_curvature(np.maximum(s, 1e-9)),
                                 tol=tol)
    if method == "montecarlo":
        ens = ensemble if ensemble is not None else _default_ensemble(manifold, r, mc)
        phi = lambda z: np.asarray(manifold.scalar_curvature(
            np.maximum(np.asarray(manifold.geodesic_radius(z), dtype=float), 1e-9)), dtype=float)
        (est, se), = path_functionals(ens, [phi])
        return est, se
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# projective sandwich
# ---------------------------------------------------------------------------


def pn_sandwich(ptarget: ProjectiveTarget, manifold: ModelManifold, r: float,
                tol: float = 1e-10):
    """(max_j T(r, zeta_j), That_psi(r), sum_j T(r, zeta_j)) for psi into P^n."""
    comps = [ptarget.zeta(j) for j in range(1, ptarget.n + 1)]
    if any(c.is_constant() for c in comps) and all(c.is_constant() for c in comps):
        raise ValueError("projective target is constant")
    psi0 = ptarget.components[0]

    def u(z):
        s = ptarget.norms_sq(z)
        den0 = np.abs(np.asarray(psi0.num(z)) / psi0.den.coeffs[0])
        return 0.5 * np.log(s) - np.log(np.maximum(den0, 1e-300))

    sphere = _sphere_mean(manifold, r, u, tol)
    u_o = float(u(np.zeros(1, dtype=complex))[0])
    n_poles = 0.0
    if not psi0.is_constant():
        for z, mult in psi0.divisor(0.0, float(manifold.chart_radius(r)), tol):
            n_poles += mult * math.pi * green_radial(manifold, r, float(manifold.geodesic_radius(z)))
    t_hat = sphere - u_o + n_poles
    t_components = [nevanlinna_T(c, manifold, r, tol) if not c.is_constant() else 0.0
                    for c in comps]
    return max(t_components), t_hat, sum(t_components)


# ---------------------------------------------------------------------------
# tables and defects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TableRow:
    r: float
    quantity: str
    divisor: str
    method: str
    value: float
    se: float | None = None


@dataclass
class NevanlinnaTable:
    """Per-radius values of That, T, m(a), N(a), Nbar(a) with method tags."""

    target: MeromorphicTarget
    manifold: ModelManifold
    grid: np.ndarray
    divisors: tuple
    rows: list = field(default_factory=list)

    def values(self, quantity: str, divisor: str = "", method: str = "quadrature") -> np.ndarray:
        sel = [row.value for row in self.rows
               if row.quantity == quantity and row.divisor == divisor and row.method == method]
        return np.array(sel)

    def to_csv(self, fh) -> None:
        close = False
        if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
            fh = open(fh, "w", newline="")
            close = True
        try:
            fh.write("r,quantity,divisor,method,value,se\n")
            for row in self.rows:
                se = "" if row.se is None else repr(row.se)
                fh.write(f"{row.r!r},{row.quantity},{row.divisor},{row.method},{row.value!r},{se}\n")
        finally:
            if close:
                fh.close()

    def to_json(self) -> str:
        payload = {
            "target": self.target.label,
            "manifold": self.manifold.name,
            "grid": [float(r) for r in self.grid],
            "rows": [
                {"r": row.r, "quantity": row.quantity, "divisor": row.divisor,
                 "method": row.method, "value": row.value, "se": row.se}
                for row in self.rows
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=1)


def build_table(target: MeromorphicTarget, manifold: ModelManifold, grid,
                divisors: tuple = (), methods: tuple = ("quadrature",),
                mc: McParams | None = None, tol: float = 1e-10) -> NevanlinnaTable:
    """Assemble the per-radius functional table used by the suites and the CLI.

    Monotonicity of That, N, Nbar in r is asserted (1e-9 slack); the FMT
    residual is left to the verification suites.
    """
    grid = np.asarray(grid, dtype=float)
    divisors = tuple(d if isinstance(d, DivisorSpec) else DivisorSpec(d) for d in divisors)
    table = NevanlinnaTable(target=target, manifold=manifold, grid=grid, divisors=divisors)
    for r in grid:
        t_hat = characteristic(target, manifold, float(r), "quadrature", tol=tol)
        t_cls = nevanlinna_T(target, manifold, float(r), tol=tol)
        table.rows.append(TableRow(float(r), "That", "", "quadrature", t_hat))
        table.rows.append(TableRow(float(r), "T", "", "quadrature", t_cls))
        for d in divisors:
            m_hat = proximity(target, d.value, manifold, float(r), "quadrature", "chordal", tol=tol)
            m_cls = proximity(target, d.value, manifold, float(r), "quadrature", "logplus", tol=tol)
            n_full = counting(target, d, manifold, float(r), truncated=False, tol=tol)
            n_bar = counting(target, d, manifold, float(r), truncated=True, tol=tol)
            label = str(d)
            table.rows.append(TableRow(float(r), "m_hat", label, "quadrature", m_hat))
            table.rows.append(TableRow(float(r), "m", label, "quadrature", m_cls))
            table.rows.append(TableRow(float(r), "N", label, "quadrature", n_full))
            table.rows.append(TableRow(float(r), "Nbar", label, "quadrature", n_bar))
    if "montecarlo" in methods:
        mc = mc or McParams()
        for r in grid:
            ens = _default_ensemble(manifold, float(r), mc)
            est, se = characteristic(target, manifold, float(r), "montecarlo", ensemble=ens)
            table.rows.append(TableRow(float(r), "That", "", "montecarlo", est, se))
            for d in divisors:
                mh, se_mh = proximity(target, d.value, manifold, float(r), "montecarlo",
                                      "chordal", ensemble=ens)
                table.rows.append(TableRow(float(r), "m_hat", str(d), "montecarlo", mh, se_mh))
    _assert_monotone(table)
    return table


def _assert_monotone(table: NevanlinnaTable) -> None:
    for q, d in [("That", "")] + [("N", str(d)) for d in table.divisors] + \
                [("Nbar", str(d)) for d in table.divisors]:
        vals = table.values(q, d)
        if vals.size and np.any(np.diff(vals) < -1e-9 * (1 + np.abs(vals[:-1]))):
            raise AssertionError(f"{q}({d}) is not non-decreasing along the radius grid")


@dataclass(frozen=True)
class DefectReport:
    """Deficiencies per divisor, with the limsup taken over the top quartile."""

    target: str
    manifold: str
    r_max: float
    divisors: tuple
    delta: dict           # with multiplicities
    theta: dict           # truncated
    delta_raw: dict
    theta_raw: dict
    ratio_traces: dict    # divisor -> (grid, N/That, Nbar/That)
    bracket_bound: float  # (n+1)/deg for the projective-space line bundle

    def total_theta(self) -> float:
        return float(sum(self.theta.values()))


def defects(table: NevanlinnaTable, bracket_bound: float = 2.0) -> DefectReport:
    """Defects delta (with multiplicity) and Theta (truncated) from a table."""
    if table.grid.size < 8:
        raise ValueError("defect estimation needs a grid of at least 8 radii")
    t_hat = table.values("That")
    top = table.grid >= np.quantile(table.grid, 0.75)
    delta, theta, delta_raw, theta_raw, traces = {}, {}, {}, {}, {}
    for d in table.divisors:
        label = str(d)
        n_full = table.values("N", label)
        n_bar = table.values("Nbar", label)
        raw_d = 1.0 - float(np.max(n_full[top] / t_hat[top]))
        raw_t = 1.0 - float(np.max(n_bar[top] / t_hat[top]))
        delta_raw[label], theta_raw[label] = raw_d, raw_t
        delta[label] = min(max(raw_d, 0.0), 1.0)
        theta[label] = min(max(raw_t, 0.0), 1.0)
        traces[label] = (table.grid.copy(), n_full / t_hat, n_bar / t_hat)
    return DefectReport(target=table.target.label, manifold=table.manifold.name,
                        r_max=float(table.grid[-1]), divisors=tuple(str(d) for d in table.divisors),
                        delta=delta, theta=theta, delta_raw=delta_raw, theta_raw=theta_raw,
                        ratio_traces=traces, bracket_bound=bracket_bound)
