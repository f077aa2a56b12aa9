"""Green functions of -Delta/2 on geodesic balls, harmonic measure, co-area.

For the rotationally symmetric models the Dirichlet Green function with pole
at the center has the one-dimensional closed form

    g_r(o, s) = 2 int_s^r dt / (omega_{2m-1} W(t)^{2m-1}),

where omega_{2m-1} is the Euclidean volume of the unit sphere in R^{2m} and
W the radial warp (W(t) = t in the flat case).  The factor 2 matches the
-Delta/2 normalization used by the diffusion simulator: co-area reads

    E_o[ int_0^{tau_r} phi(X_t) dt ] = int_{B_o(r)} g_r(o, x) phi(x) dV(x),

which is the identity every quadrature here is checked against.  Specializing
W recovers the familiar formulas: log(r/s)/pi on C, the inverse-power form on
C^m, and log(tanh(r/2)/tanh(s/2))/pi on the hyperbolic plane.

Harmonic measure from the center is uniform in the angular variables by
symmetry; its density against induced surface measure is 1/area(S_o(r)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .manifold import ModelManifold, sphere_measure

__all__ = [
    "green_radial",
    "GreenProfile",
    "green_profile",
    "coarea_quadrature",
    "harmonic_density",
    "HarmonicDensity",
    "circle_mean",
]


def green_radial(manifold: ModelManifold, r: float, s: float) -> float:
    """Green function g_r(o, s) of -Delta_M/2 at geodesic radius s, 0 < s <= r."""
    if s <= 0.0:
        raise ValueError("Green function has its pole at s = 0")
    if s > r * (1 + 1e-12):
        raise ValueError(f"s={s} outside the ball of radius r={r}")
    if s >= r:
        return 0.0
    m = manifold.m
    if manifold.is_flat:
        if m == 1:
            return math.log(r / s) / math.pi
        return (s ** (2 - 2 * m) - r ** (2 - 2 * m)) / ((m - 1) * sphere_measure(m))
    warp = manifold.warp
    if warp.label.startswith("H(K="):
        # constant curvature -c^2: W = sinh(ct)/c integrates in closed form
        c = math.sqrt(-2.0 * float(manifold.ricci_lower(1.0)))
        return math.log(math.tanh(0.5 * c * r) / math.tanh(0.5 * c * s)) / math.pi
    val, _ = quad(lambda t: 1.0 / float(warp.W(t)), s, r, limit=200)
    return val / math.pi


@dataclass(frozen=True)
class GreenProfile:
    """Radial Green evaluator for one (manifold, r); vectorized over s."""

    manifold: ModelManifold
    r: float

    def __call__(self, s):
        if np.ndim(s) == 0:
            return green_radial(self.manifold, self.r, float(s))
        return np.array([green_radial(self.manifold, self.r, float(x)) for x in np.ravel(s)]).reshape(np.shape(s))


def green_profile(manifold: ModelManifold, r: float) -> GreenProfile:
    if r <= 0:
        raise ValueError("ball radius must be positive")
    return GreenProfile(manifold=manifold, r=r)


# ---------------------------------------------------------------------------
# angular averaging and co-area quadrature
# ---------------------------------------------------------------------------


def circle_mean(f: Callable[[np.ndarray], np.ndarray], tol: float = 1e-10,
                n0: int = 64, max_n: int = 1 << 20) -> float:
    """Mean of f over the unit circle by doubling periodic trapezoid.

    f takes a numpy array of angles and returns values; spectrally accurate
    for smooth integrands, still convergent (slowly) for integrable
    logarithmic singularities off the nodes.
    """
    n = n0
    prev = None
    while n <= max_n:
        theta = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        mean = float(np.mean(f(theta)))
        if prev is not None and abs(mean - prev) <= tol * (1.0 + abs(mean)):
            return mean
        prev = mean
        n *= 2
    raise RuntimeError("circle mean did not converge; integrand too singular on the circle")


def coarea_quadrature(manifold: ModelManifold, r: float, integrand,
                      tol: float = 1e-10, radial: bool = True,
                      break_radii: tuple = ()) -> float:
    """int_{B_o(r)} g_r(o, x) phi(x) dV(x) by radial (x angular) quadrature.

    ``integrand`` is phi as a function of geodesic radius when ``radial``,
    otherwise a function of complex chart points (surfaces and C only).
    Singularities of phi are admitted at the center up to logarithmic
    strength; interior near-singular radii can be listed in ``break_radii``.
    """
    if r <= 0:
        raise ValueError("ball radius must be positive")
    if not radial and manifold.m != 1:
        raise ValueError("chart-function co-area quadrature is limited to m = 1")

    if radial:
        phi_of_s = integrand
    else:
        def phi_of_s(s: float) -> float:
            rho = float(manifold.chart_radius(s))
            return circle_mean(lambda th: integrand(rho * np.exp(1j * th)), tol=max(tol * 1e-2, 1e-13))

    def weighted(s: float) -> float:
        val = float(phi_of_s(s)) * green_radial(manifold, r, s) * float(manifold.sphere_area(s))
        if not np.isfinite(val):
            raise ValueError(f"non-integrable singularity detected at geodesic radius {s}")
        return val

    # inner piece in u = log s: absorbs the center pole (log strength at worst)
    s_split = r / 8.0
    u_lo = math.log(r) - 60.0
    u_split = math.log(s_split)
    inner, err_in = quad(lambda u: weighted(math.exp(u)) * math.exp(u),
                         u_lo, u_split, limit=200, epsabs=tol / 2, epsrel=tol)
    # divergence guard: an integrable center singularity is cutoff-insensitive
    probe, _ = quad(lambda u: weighted(math.exp(u)) * math.exp(u),
                    u_lo + 15.0, u_split, limit=200, epsabs=tol / 2, epsrel=tol)
    if abs(inner - probe) > max(100 * tol, 1e-8 * abs(probe)):
        raise ValueError("non-integrable singularity detected at the center")
    pts = sorted(p for p in break_radii if s_split < p < r)
    outer, err_out = quad(weighted, s_split, r, limit=400, epsabs=tol / 2, epsrel=tol,
                          points=pts or None)
    if err_in + err_out > max(50 * tol, 1e-6 * abs(inner + outer)):
        raise RuntimeError(f"co-area quadrature error estimate {err_in + err_out:.2e} above budget")
    return inner + outer


@dataclass(frozen=True)
class HarmonicDensity:
    """Exit-law density on S_o(r): uniform in angle for center starts."""

    manifold: ModelManifold
    r: float
    angular_density: float        # w.r.t. normalized angular measure: always 1
    surface_density: float        # w.r.t. induced surface measure
    comparison_bound: float       # 1 / (omega_{2m-1} r^{2m-1})

    @property
    def saturates_bound(self) -> bool:
        return abs(self.surface_density - self.comparison_bound) <= 1e-12 * self.comparison_bound


def harmonic_density(manifold: ModelManifold, r: float) -> HarmonicDensity:
    """Uniform harmonic measure descriptor, with the flat comparison bound.

    For non-positively curved models, area(S_o(r)) >= area of the flat
    sphere, so the density never exceeds 1/(omega_{2m-1} r^{2m-1}); the flat
    case saturates the bound.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    area = float(manifold.sphere_area(r))
    bound = 1.0 / (sphere_measure(manifold.m) * r ** (2 * manifold.m - 1))
    dens = 1.0 / area
    if dens > bound * (1 + 1e-12):
        raise AssertionError("harmonic density exceeds the flat comparison bound")
    return HarmonicDensity(manifold=manifold, r=r, angular_density=1.0,
                           surface_density=dens, comparison_bound=bound)
