"""Model source manifolds: flat C^m and rotationally symmetric surfaces.

A model manifold is determined by its complex dimension m and, for surfaces
(m = 1), a real warp function W with W(0) = 0, W'(0) = 1: the metric in
geodesic polar coordinates is ds^2 = dsigma^2 + W(sigma)^2 dtheta^2.  Flat
space is W(s) = s; the hyperbolic plane of Gaussian curvature -c^2 is
W(s) = sinh(c s)/c.  Surfaces are also carried as a conformal chart
lambda(|z|)^2 |dz|^2 (Poincare disk for hyperbolic, a lambda(0) = 1 chart
for generic warps), which is what the diffusion simulator and the target
library evaluate on.

Curvature quantities follow the complex (Kaehler) convention
R_{i jbar} = -d^2 log det(g) / dz_i dzbar_j, under which the hyperbolic
plane has Ricci lower bound -1/2, half the Gaussian curvature.  All bound
checking against the comparison profile G (solve_warp) uses this
convention; mixing in the real-geometry normalization would silently break
every curvature-dependent estimate downstream.

Everything here is immutable after construction and safe to share across
workers; operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline, PchipInterpolator

__all__ = [
    "RadialWarp",
    "ModelManifold",
    "CurvatureProfile",
    "GreenWarp",
    "flat",
    "hyperbolic",
    "warped_from_callables",
    "warped_from_samples",
    "kappa_of",
    "solve_warp",
    "curvature_scalar_pair",
    "radial_laplacian",
    "sphere_measure",
]

_MAX_M = 4  # quadrature cost grows with sphere dimension; surfaces are m=1


def sphere_measure(m: int) -> float:
    """(2m-1)-volume of the unit sphere in R^{2m}: 2 pi^m / (m-1)!."""
    return 2.0 * math.pi**m / math.factorial(m - 1)


class RadialWarp:
    """Rotationally symmetric surface data: warp W plus a conformal chart.

    ``W``, ``Wp``, ``Wpp`` are W and its first two derivatives as callables
    of geodesic radius.  ``chart_from_geodesic`` / ``geodesic_from_chart``
    convert between geodesic radius sigma and conformal chart radius rho;
    ``conformal_factor`` is lambda(rho).  Closed forms are used when given,
    otherwise monotone interpolants are built from

        rho(sigma) = sigma * exp( int_0^sigma (1/W(u) - 1/u) du ),

    the unique conformal radial chart with lambda(0) = 1.
    """

    def __init__(self, W, Wp, Wpp, *, chart_from_geodesic=None,
                 geodesic_from_chart=None, conformal_factor=None,
                 chart_sup: float = math.inf, label: str = "warped",
                 curvature_floor_s: float = 1e-6):
        self.W = W
        self.Wp = Wp
        self.Wpp = Wpp
        self.label = label
        self.chart_sup = chart_sup  # open chart domain is |z| < chart_sup
        self.curvature_floor_s = curvature_floor_s
        self._chart = chart_from_geodesic
        self._geod = geodesic_from_chart
        self._lam = conformal_factor
        self._interp_smax = 0.0
        self._rho_of_s = None
        self._s_of_rho = None
        self._rho_top = 0.0

    # -- chart construction ------------------------------------------------

    def _ensure_interp(self, s_max: float) -> None:
        """Tabulate rho(sigma) = sigma exp(int_0^sigma (1/W - 1/u) du).

        Strongly curved warps have a finite conformal radius: rho saturates,
        so the inverse map is built only on the strictly increasing prefix.
        """
        if self._chart is not None or s_max <= self._interp_smax:
            return
        s_max = max(2.0 * s_max, 1.0)
        grid = np.concatenate([[0.0], np.geomspace(1e-8, s_max, 1600)])

        def defect(u):
            return 1.0 / self.W(u) - 1.0 / u if u > 0 else 0.0

        increments = [0.0]
        for a, b in zip(grid[:-1], grid[1:]):
            increments.append(quad(defect, a, b, limit=100)[0])
        h = np.cumsum(increments)  # h(sigma) = int_0^sigma (1/W - 1/u)
        rho = grid * np.exp(h)
        self._rho_of_s = PchipInterpolator(grid, rho)
        stalled = np.nonzero(np.diff(rho) <= 1e-14 * np.maximum(rho[1:], 1e-300))[0]
        end = stalled[0] + 1 if stalled.size else rho.size
        self._s_of_rho = PchipInterpolator(rho[:end], grid[:end])
        self._rho_top = float(rho[end - 1])
        self._interp_smax = s_max

    def chart_from_geodesic(self, s):
        if self._chart is not None:
            return self._chart(s)
        self._ensure_interp(float(np.max(s)))
        return self._rho_of_s(s)

    def geodesic_from_chart(self, rho):
        if self._geod is not None:
            return self._geod(rho)
        self._ensure_interp(1.0)
        top = float(np.max(rho))
        while top > self._rho_top:
            before = self._rho_top
            self._ensure_interp(4.0 * self._interp_smax)
            if self._rho_top <= before * (1 + 1e-12):  # conformal radius reached
                raise ValueError(f"chart radius {top:g} outside the warped chart domain "
                                 f"(conformal radius ~ {self._rho_top:g})")
        return self._s_of_rho(rho)

    def conformal_factor(self, rho):
        if self._lam is not None:
            return self._lam(rho)
        rho = np.asarray(rho, dtype=float)
        s = self.geodesic_from_chart(rho)
        out = np.where(rho > 1e-9, self.W(np.maximum(s, 1e-300)) / np.where(rho > 0, rho, 1.0), 1.0)
        return out if out.ndim else float(out)

    def gauss_curvature(self, s):
        s = np.maximum(np.asarray(s, dtype=float), self.curvature_floor_s)
        out = -self.Wpp(s) / self.W(s)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class ModelManifold:
    """Flat C^m (warp is None) or a rotationally symmetric surface (m = 1).

    The reference point o is the center of symmetry, fixed once and for all;
    geodesic balls and spheres are always centered there.
    """

    name: str
    m: int
    warp: RadialWarp | None = None

    def __post_init__(self):
        if not 1 <= self.m <= _MAX_M:
            raise ValueError(f"complex dimension m={self.m} outside supported range 1..{_MAX_M}")
        if self.warp is not None and self.m != 1:
            raise ValueError("warped surfaces are supported only for m=1")

    # -- basic geometry ----------------------------------------------------

    @property
    def is_flat(self) -> bool:
        return self.warp is None

    @property
    def chart_sup(self) -> float:
        return math.inf if self.warp is None else self.warp.chart_sup

    def geodesic_radius(self, points) -> np.ndarray:
        """Geodesic distance from o of chart points (complex, or (n,m) for m>=2)."""
        z = np.asarray(points)
        if self.m == 1:
            rho = np.abs(z)
        else:
            rho = np.sqrt(np.sum(np.abs(z) ** 2, axis=-1))
        if self.warp is None:
            return rho
        return self.warp.geodesic_from_chart(rho)

    def chart_radius(self, s):
        """Chart radius of the geodesic sphere S_o(s)."""
        if self.warp is None:
            return np.asarray(s, dtype=float) if np.ndim(s) else float(s)
        return self.warp.chart_from_geodesic(s)

    def conformal_factor(self, rho):
        """lambda(rho): metric is lambda^2 |dz|^2 on the chart (1 for flat)."""
        if self.warp is None:
            return np.ones_like(np.asarray(rho, dtype=float)) if np.ndim(rho) else 1.0
        return self.warp.conformal_factor(rho)

    def warp_value(self, s):
        if self.warp is None:
            return np.asarray(s, dtype=float) if np.ndim(s) else float(s)
        return self.warp.W(s)

    def sphere_area(self, s):
        """Riemannian (2m-1)-volume of the geodesic sphere S_o(s)."""
        if self.warp is None:
            return sphere_measure(self.m) * np.asarray(s, dtype=float) ** (2 * self.m - 1)
        return 2.0 * math.pi * self.warp.W(s)

    def ricci_lower(self, s):
        """Pointwise Ricci lower bound at geodesic radius s (complex convention)."""
        if self.warp is None:
            return np.zeros_like(np.asarray(s, dtype=float)) if np.ndim(s) else 0.0
        return 0.5 * self.warp.gauss_curvature(s)

    def scalar_curvature(self, s):
        """Ricci scalar -1/4 Delta_M log det g at geodesic radius s.

        Zero for flat space; for surfaces (m = 1) it coincides with the
        Ricci lower bound, i.e. half the Gaussian curvature.
        """
        return self.ricci_lower(s)

    def __repr__(self) -> str:  # keep ensemble/report labels short
        return self.name


def flat(m: int = 1) -> ModelManifold:
    """Flat C^m with the Euclidean metric."""
    return ModelManifold(name=f"C^{m}" if m > 1 else "C", m=m)


def hyperbolic(gauss_curvature: float = -1.0) -> ModelManifold:
    """Hyperbolic plane of constant Gaussian curvature -c^2 on the Poincare disk.

    Chart radius of the geodesic sphere S_o(s) is tanh(c s / 2) and the
    conformal factor is (2/c) / (1 - rho^2).
    """
    if gauss_curvature >= 0:
        raise ValueError("hyperbolic plane needs negative Gaussian curvature")
    c = math.sqrt(-gauss_curvature)
    warp = RadialWarp(
        W=lambda s: np.sinh(c * np.asarray(s, dtype=float)) / c,
        Wp=lambda s: np.cosh(c * np.asarray(s, dtype=float)),
        Wpp=lambda s: c * np.sinh(c * np.asarray(s, dtype=float)),
        chart_from_geodesic=lambda s: np.tanh(0.5 * c * np.asarray(s, dtype=float)),
        geodesic_from_chart=lambda rho: (2.0 / c) * np.arctanh(np.asarray(rho, dtype=float)),
        conformal_factor=lambda rho: (2.0 / c) / (1.0 - np.asarray(rho, dtype=float) ** 2),
        chart_sup=1.0,
        label=f"H(K={gauss_curvature:g})",
    )
    return ModelManifold(name=f"H(K={gauss_curvature:g})", m=1, warp=warp)


def warped_from_callables(W, Wp, Wpp, name: str = "warped") -> ModelManifold:
    """Surface from closed-form warp callables; chart built numerically."""
    warp = RadialWarp(W=W, Wp=Wp, Wpp=Wpp, label=name)
    mf = ModelManifold(name=name, m=1, warp=warp)
    _check_warp_pole(warp)
    return mf


def warped_from_samples(s: Sequence[float], w: Sequence[float], name: str = "warped") -> ModelManifold:
    """Surface from sampled warp values (s_i, W_i); monotone cubic in between."""
    s = np.asarray(s, dtype=float)
    w = np.asarray(w, dtype=float)
    if s[0] != 0.0 or w[0] != 0.0:
        raise ValueError("warp samples must start at W(0)=0")
    if np.any(w[1:] <= 0):
        raise ValueError("warp must be positive for s > 0")
    # clamped left slope W'(0)=1; C^2 spline keeps the second derivative usable
    interp = CubicSpline(s, w, bc_type=((1, 1.0), "not-a-knot"))
    d1 = interp.derivative()
    d2 = interp.derivative(2)
    warp = RadialWarp(W=interp, Wp=d1, Wpp=d2, label=name,
                      curvature_floor_s=2.0 * float(np.max(np.diff(s))))
    mf = ModelManifold(name=name, m=1, warp=warp)
    _check_warp_pole(warp)
    return mf


def _check_warp_pole(warp: RadialWarp) -> None:
    # smooth pole at the center: W(s)/s -> 1 and W > 0 nearby
    for s in (1e-4, 1e-3, 1e-2):
        ratio = float(warp.W(s)) / s
        if not 0.9 < ratio < 1.1:
            raise ValueError(f"warp violates W(s)/s -> 1 near 0 (got {ratio:.4f} at s={s})")


# ---------------------------------------------------------------------------
# curvature profile and the comparison ODE
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvatureProfile:
    """Non-positive, non-increasing radial curvature bound t -> kappa(t).

    ``source`` records whether the profile was derived from a manifold's
    metric or supplied by the user.  Monotonicity and sign are asserted on
    the evaluation grid whenever the profile is consumed by solve_warp.
    """

    kappa: Callable[[np.ndarray], np.ndarray]
    source: str = "user-supplied"
    t_max: float = math.inf

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > self.t_max * (1 + 1e-12)):
            raise ValueError(f"curvature profile sampled beyond t_max={self.t_max}")
        out = self.kappa(t)
        return out if np.ndim(out) else float(out)

    @staticmethod
    def from_manifold(manifold: ModelManifold, t_max: float, n: int = 2048) -> "CurvatureProfile":
        """kappa(t) = min over the closed ball B_o(t) of the Ricci lower bound,
        divided by 2m-1; the minimum is radial for these metrics."""
        if manifold.is_flat:
            return CurvatureProfile(kappa=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
                                    source=f"derived-from-manifold:{manifold.name}", t_max=t_max)
        grid = np.linspace(0.0, t_max, n)
        vals = np.asarray(manifold.ricci_lower(np.maximum(grid, 1e-6)), dtype=float)
        running = np.minimum.accumulate(vals) / (2 * manifold.m - 1)
        interp = PchipInterpolator(grid, running)
        return CurvatureProfile(kappa=interp, source=f"derived-from-manifold:{manifold.name}",
                                t_max=t_max)


def kappa_of(manifold: ModelManifold, t: float) -> float:
    """Radial curvature bound kappa(t) <= 0 of the manifold at radius t."""
    if t < 0:
        raise ValueError("radius must be non-negative")
    if manifold.is_flat:
        return 0.0
    profile = CurvatureProfile.from_manifold(manifold, t_max=max(t, 1e-6))
    return float(profile(t))


@dataclass(frozen=True)
class GreenWarp:
    """Solution profile of G'' + kappa G = 0, G(0)=0, G'(0)=1, on a grid.

    Used only for curvature-dependent bounds; it is a distinct object from
    the geometric warp W and coincides with it just in the flat case.
    """

    grid: np.ndarray
    G: np.ndarray
    Gprime: np.ndarray
    kappa_used: CurvatureProfile
    solver_tolerance: float
    _interp: PchipInterpolator = field(repr=False, default=None)

    def value(self, t):
        return self._interp(t)

    def inverse_power_integral(self, a: float, b: float, power: float) -> float:
        """int_a^b G(t)^power dt (power is typically 1-2m <= -1)."""
        return quad(lambda t: float(self._interp(t)) ** power, a, b, limit=200)[0]


def solve_warp(profile: CurvatureProfile, t_max: float, tol: float = 1e-10,
               n_grid: int = 513) -> GreenWarp:
    """Integrate the comparison ODE and validate the standard bounds.

    Explicit adaptive RK45 pair at local tolerance ``tol``; the solve is
    repeated at tol/100 and both must agree, otherwise the tolerance is
    declared unachievable.  On the returned grid the profile satisfies
    G(t) >= t, the exponential upper bound and G strictly increasing.  The
    upper bound is checked with the running supremum of -kappa over [0, t],
    which equals -kappa(t) itself for the usual non-increasing profiles but
    stays valid for profiles that relax toward zero.
    """
    probe = np.linspace(0.0, t_max, 257)
    kvals = np.asarray(profile(probe), dtype=float)
    if np.any(kvals > 1e-12):
        raise ValueError("curvature profile must be non-positive")

    def rhs(t, y):
        return [y[1], -float(profile(min(t, t_max))) * y[0]]

    def run(rtol):
        sol = solve_ivp(rhs, (0.0, t_max), [0.0, 1.0], method="RK45",
                        rtol=rtol, atol=rtol * 1e-3, dense_output=True)
        if not sol.success:
            raise RuntimeError(f"comparison ODE solve failed: {sol.message}")
        return sol

    sol = run(tol)
    check = run(tol * 1e-2)
    grid = np.linspace(0.0, t_max, n_grid)
    G = sol.sol(grid)[0]
    G_check = check.sol(grid)[0]
    scale = np.maximum(np.abs(G_check), 1.0)
    if np.max(np.abs(G - G_check) / scale) > 50 * tol:
        raise RuntimeError("requested tolerance unachievable for comparison ODE")
    G = check.sol(grid)[0]
    Gp = check.sol(grid)[1]

    slack = 1e3 * tol * np.maximum(np.abs(G), 1.0)
    if np.any(G < grid - slack):
        raise AssertionError("comparison profile violates G(t) >= t")
    neg_kappa_sup = np.maximum.accumulate(-np.asarray(profile(grid), dtype=float))
    upper = grid * np.exp(grid * np.sqrt(neg_kappa_sup))
    if np.any(G > upper + slack):
        raise AssertionError("comparison profile violates G(t) <= t exp(t sqrt(-kappa))")
    if np.any(np.diff(G) <= 0):
        raise AssertionError("comparison profile must be strictly increasing")
    return GreenWarp(grid=grid, G=G, Gprime=Gp, kappa_used=profile,
                     solver_tolerance=tol, _interp=PchipInterpolator(grid, G))


# ---------------------------------------------------------------------------
# pointwise curvature operations
# ---------------------------------------------------------------------------


def curvature_scalar_pair(manifold: ModelManifold, point) -> tuple[float, float]:
    """(scalar curvature s_M, bound m * R_M) at a chart point; s_M >= m R_M."""
    s = float(manifold.geodesic_radius(point))
    if manifold.warp is not None and not np.all(np.abs(np.asarray(point)) < manifold.chart_sup):
        raise ValueError("point outside chart domain")
    if manifold.is_flat:
        return 0.0, 0.0
    r_low = float(manifold.ricci_lower(max(s, 1e-6)))
    # m = 1: the scalar curvature equals the unique Ricci eigenvalue
    return r_low, manifold.m * r_low


def radial_laplacian(manifold: ModelManifold, s: float) -> float:
    """Delta_M r at geodesic radius s: (2m-1)/s flat, W'(s)/W(s) for surfaces."""
    if s <= 0:
        raise ValueError("radial Laplacian undefined at the center")
    if manifold.is_flat:
        return (2 * manifold.m - 1) / s
    return float(manifold.warp.Wp(s)) / float(manifold.warp.W(s))
