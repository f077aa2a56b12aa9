"""Brownian motion with generator Delta_M/2 on model manifolds.

Flat C^m uses exact Gaussian increments (each real coordinate an independent
standard Brownian motion).  Surfaces use the conformal-chart SDE
dZ = lambda(Z)^{-1} dB with no drift: in real dimension two the
Laplace-Beltrami operator is lambda^{-2} times the flat Laplacian, so
time-changed flat Brownian motion is exact in law and Euler-Maruyama only
discretizes the time change.

Exit from the geodesic ball B_o(r) combines two detections.  A step that
lands outside is projected back to S_o(r) along the increment with the exit
time interpolated linearly in the geodesic radius.  A step that stays inside
may still have crossed in between: the geodesic radial component diffuses
with unit coefficient, so the excursion probability of the bridge is
exp(-2 (r - s_k)(r - s_{k+1}) / dt) and is sampled with one extra uniform
per step.  Together these remove the O(sqrt(dt)) exit-time bias of naive
crossing detection.

Randomness is addressed per (path, step) through counter streams (see rng),
so ensembles are order independent, bit-reproducible, and replayable:
``path_functional`` re-traverses the trajectories to accumulate integrals
without ever storing them.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .manifold import ModelManifold
from .rng import RngSpec

__all__ = [
    "PathEnsemble",
    "BesselCouplingReport",
    "sample_exit",
    "simulate_paths",
    "path_functional",
    "path_functionals",
    "coupled_bessel_check",
    "simulate_score_suprema",
    "exit_angle_ks",
]

_DOMAIN_PATHS = 1
_DOMAIN_EXIT = 2
_DOMAIN_SUPREMA = 3

_CENSOR_WARN_FRACTION = 1e-3


@dataclass(frozen=True)
class PathEnsemble:
    """Seed-deterministic exit summaries of n diffusion paths from the center.

    Trajectories themselves are not stored (unless ``positions`` was filled
    on request): they are reproducible from (rng, path index) and replayed
    on demand by the path functionals.
    """

    manifold: ModelManifold
    r: float
    dt: float
    n: int
    rng: RngSpec
    taus: np.ndarray
    exit_points: np.ndarray
    steps: np.ndarray
    censored: np.ndarray
    max_steps: int
    positions: list | None = field(default=None, repr=False)

    @property
    def ok(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.censored] = False
        return mask

    def tau_mean_se(self) -> tuple[float, float]:
        t = self.taus[self.ok]
        return float(np.mean(t)), float(np.std(t, ddof=1) / math.sqrt(t.size))

    def exit_angles(self) -> np.ndarray:
        pts = self.exit_points[self.ok]
        if self.manifold.m == 1:
            return np.angle(pts)
        return np.angle(pts[:, 0])

    def exit_chart_radii(self) -> np.ndarray:
        pts = self.exit_points[self.ok]
        if self.manifold.m == 1:
            return np.abs(pts)
        return np.sqrt(np.sum(np.abs(pts) ** 2, axis=1))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["path", "tau", "exit_angle", "exit_chart_radius"])
            ok = self.ok
            ang = np.angle(self.exit_points if self.manifold.m == 1 else self.exit_points[:, 0])
            rad = (np.abs(self.exit_points) if self.manifold.m == 1
                   else np.sqrt(np.sum(np.abs(self.exit_points) ** 2, axis=1)))
            for i in range(self.n):
                if ok[i]:
                    writer.writerow([i, repr(float(self.taus[i])), repr(float(ang[i])),
                                     repr(float(rad[i]))])
                else:
                    writer.writerow([i, "censored", "", ""])


def sample_exit(manifold: ModelManifold, r: float, n: int, rng: RngSpec) -> np.ndarray:
    """Direct draws from the exit law on S_o(r): uniform by rotational symmetry.

    Returns chart points: complex (n,) for m = 1, complex (n, m) otherwise.
    """
    if r <= 0 or n < 1:
        raise ValueError("need r > 0 and n >= 1")
    gen = rng.generator(_DOMAIN_EXIT)
    if manifold.m == 1:
        theta = gen.uniform(0.0, 2.0 * math.pi, n)
        return float(manifold.chart_radius(r)) * np.exp(1j * theta)
    g = gen.standard_normal((n, 2 * manifold.m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g *= r
    return g[:, ::2] + 1j * g[:, 1::2]


def _to_complex(x: np.ndarray, m: int):
    return x[:, 0] + 1j * x[:, 1] if m == 1 else x[:, ::2] + 1j * x[:, 1::2]


def _radius(manifold: ModelManifold, x: np.ndarray) -> np.ndarray:
    rho = np.sqrt(np.sum(x * x, axis=1))
    if manifold.is_flat:
        return rho
    if np.isfinite(manifold.chart_sup):
        # a single overshoot step may poke past the conformal boundary
        rho = np.minimum(rho, manifold.chart_sup * (1.0 - 1e-15))
    return np.asarray(manifold.warp.geodesic_from_chart(rho), dtype=float)


def _increments(manifold: ModelManifold, x: np.ndarray, xi: np.ndarray, dt) -> np.ndarray:
    sq = np.sqrt(dt)  # scalar, or per-path array for adaptive steps
    if manifold.is_flat:
        return xi * np.atleast_1d(sq)[:, None] if np.ndim(sq) else sq * xi
    rho = np.sqrt(np.sum(x * x, axis=1))
    lam = np.asarray(manifold.conformal_factor(rho), dtype=float)
    return (sq / lam)[:, None] * xi


def _exit_update(manifold: ModelManifold, r: float, chart_r: float,
                 x: np.ndarray, sigma: np.ndarray, incr: np.ndarray,
                 u: np.ndarray, dt):
    """One step: returns (x_new, sig_new, exited, theta, exit_points).

    ``theta`` is the fraction of the step spent inside the ball (1/2 for
    bridge exits) and ``exit_points`` are projected to S_o(r); both are
    meaningful only where ``exited`` is set.
    """
    x_new = x + incr
    sig_new = _radius(manifold, x_new)
    step_cross = sig_new >= r
    d0 = np.maximum(r - sigma, 0.0)
    d1 = np.maximum(r - sig_new, 0.0)
    with np.errstate(over="ignore"):
        p_bridge = np.exp(-2.0 * d0 * d1 / dt)
    bridge = (~step_cross) & (u < p_bridge)
    exited = step_cross | bridge
    denom = sig_new - sigma
    theta = np.where(denom > 1e-300, (r - sigma) / np.where(denom > 1e-300, denom, 1.0), 1.0)
    theta = np.clip(theta, 1e-12, 1.0)
    theta = np.where(bridge, 0.5, theta)
    pts = x + theta[:, None] * incr
    norm = np.sqrt(np.sum(pts * pts, axis=1))
    pts = pts * (chart_r / np.where(norm > 0, norm, 1.0))[:, None]
    return x_new, sig_new, exited, theta, pts


def simulate_paths(manifold: ModelManifold, r: float, dt: float, n: int, rng: RngSpec,
                   max_steps: int = 10**8, store_positions: bool = False) -> PathEnsemble:
    """Run n paths to their exit from B_o(r); see the module docstring."""
    if dt > 1e-2 * r * r:
        raise ValueError(f"dt={dt} too coarse for r={r}: require dt <= 1e-2 r^2")
    if n < 1:
        raise ValueError("need at least one path")
    if store_positions and n > 2000:
        raise ValueError("position storage is limited to small ensembles")
    m = manifold.m
    dim = 2 * m
    stream = rng.stream(_DOMAIN_PATHS)
    chart_r = float(manifold.chart_radius(r))
    if not manifold.is_flat:
        manifold.chart_radius(1.5 * r)  # pre-build chart interpolants

    taus = np.zeros(n)
    steps = np.zeros(n, dtype=np.int64)
    exits = np.zeros((n, dim))
    ids = np.arange(n, dtype=np.uint64)
    x = np.zeros((n, dim))
    sigma = np.zeros(n)
    snapshots: list | None = [] if store_positions else None

    k = 0
    while ids.size and k < max_steps:
        xi, u = stream.normals_and_uniform(ids, np.uint64(k), dim)
        incr = _increments(manifold, x, xi, dt)
        x_new, sig_new, exited, theta, pts = _exit_update(manifold, r, chart_r,
                                                          x, sigma, incr, u, dt)
        if np.any(exited):
            idx = ids[exited].astype(np.int64)
            exits[idx] = pts[exited]
            taus[idx] = (k + theta[exited]) * dt
            steps[idx] = k + 1
        alive = ~exited
        ids, x, sigma = ids[alive], x_new[alive], sig_new[alive]
        k += 1
        if snapshots is not None:
            snapshots.append((k, ids.copy(), x.copy()))
    censored = ids.astype(np.int64)
    if censored.size:
        frac = censored.size / n
        if frac > _CENSOR_WARN_FRACTION:
            warnings.warn(f"{censored.size} of {n} paths exceeded the step budget "
                          f"({frac:.2%}); they are censored, not dropped")
        taus[censored] = np.nan
        steps[censored] = max_steps

    positions = None
    if snapshots is not None:
        per_path: list[list[np.ndarray]] = [[] for _ in range(n)]
        for _, alive_ids, state in snapshots:
            for j, pid in enumerate(alive_ids):
                per_path[int(pid)].append(state[j])
        positions = [np.array(chunks) if chunks else np.empty((0, dim)) for chunks in per_path]

    return PathEnsemble(manifold=manifold, r=r, dt=dt, n=n, rng=rng, taus=taus,
                        exit_points=_to_complex(exits, m), steps=steps,
                        censored=censored, max_steps=max_steps, positions=positions)


def path_functionals(ensemble: PathEnsemble, integrands) -> list[tuple[float, float]]:
    """Monte-Carlo estimates of E_o[int_0^tau phi(X_t) dt], one per integrand.

    Replays the ensemble's trajectories (same counter streams, same exit
    decisions) and accumulates a per-path trapezoidal sum including the
    partial final step, so phi = 1 reproduces the exit times exactly.  Each
    result is (estimate, standard error); censored paths are excluded.
    """
    mf, r, dt, n = ensemble.manifold, ensemble.r, ensemble.dt, ensemble.n
    m = mf.m
    dim = 2 * m
    stream = ensemble.rng.stream(_DOMAIN_PATHS)
    chart_r = float(mf.chart_radius(r))
    nfun = len(integrands)
    acc = np.zeros((nfun, n))
    ids = np.arange(n, dtype=np.uint64)
    x = np.zeros((n, dim))
    sigma = np.zeros(n)

    def evaluate(states: np.ndarray) -> list[np.ndarray]:
        pts = _to_complex(states, m)
        out = []
        for phi in integrands:
            vals = np.asarray(phi(pts), dtype=float)
            if not np.all(np.isfinite(vals)):
                bad = pts[~np.isfinite(vals)][0]
                raise ValueError(f"integrand returned a non-finite value at chart point {bad}")
            out.append(vals)
        return out

    vals = evaluate(x)
    k = 0
    while ids.size and k < ensemble.max_steps:
        xi, u = stream.normals_and_uniform(ids, np.uint64(k), dim)
        incr = _increments(mf, x, xi, dt)
        x_new, sig_new, exited, theta, pts = _exit_update(mf, r, chart_r,
                                                          x, sigma, incr, u, dt)
        vals_new = evaluate(x_new)
        if np.any(exited):
            idx = ids[exited].astype(np.int64)
            vals_exit = evaluate(pts[exited])
            for f in range(nfun):
                acc[f, idx] += 0.5 * theta[exited] * dt * (vals[f][exited] + vals_exit[f])
        alive = ~exited
        if np.any(alive):
            idx_alive = ids[alive].astype(np.int64)
            for f in range(nfun):
                acc[f, idx_alive] += 0.5 * dt * (vals[f][alive] + vals_new[f][alive])
        ids, x, sigma = ids[alive], x_new[alive], sig_new[alive]
        vals = [v[alive] for v in vals_new]
        k += 1

    ok = ensemble.ok
    out = []
    for f in range(nfun):
        a = acc[f, ok]
        out.append((float(np.mean(a)), float(np.std(a, ddof=1) / math.sqrt(a.size))))
    return out


def path_functional(ensemble: PathEnsemble, integrand) -> tuple[float, float]:
    return path_functionals(ensemble, [integrand])[0]


# ---------------------------------------------------------------------------
# Bessel comparison coupling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BesselCouplingReport:
    """Per-step dominance and exit-ordering statistics of the coupling."""

    manifold: ModelManifold
    r: float
    dt: float
    n: int
    slack: float
    total_steps: int
    violating_steps: int
    ordering_ok: int            # paths whose Bessel exit is no earlier than the manifold exit
    gap_mean: float             # mean |W - r(X)| over all steps
    gap_max: float

    @property
    def violation_fraction(self) -> float:
        return self.violating_steps / max(self.total_steps, 1)

    @property
    def ordering_fraction(self) -> float:
        return self.ordering_ok / self.n


def coupled_bessel_check(manifold: ModelManifold, r: float, dt: float, n: int,
                         rng: RngSpec, slack_factor: float = 3.0,
                         max_steps: int = 10**8) -> BesselCouplingReport:
    """Drive the 2m-dimensional Bessel SDE with the manifold's own noise.

    Both processes consume the same Gaussians: the Bessel process receives
    the radial projection of each increment, dW = dB_rad + (2m-1)/2 dt/W.
    Numerically W is advanced through its square (dW^2 = 2W dB_rad + 2m dt),
    which has no singular drift at the start.  Under non-positive curvature
    W stays below the geodesic radius pathwise up to discretization slack
    and its exit time dominates; violations are counted, never raised.
    """
    if not manifold.is_flat and manifold.m != 1:
        raise ValueError("coupling supports flat C^m and warped surfaces")
    m = manifold.m
    dim = 2 * m
    stream = rng.stream(_DOMAIN_PATHS)
    sqdt = math.sqrt(dt)
    slack = slack_factor * sqdt
    chart_r = float(manifold.chart_radius(r))
    if not manifold.is_flat:
        manifold.chart_radius(1.5 * r)

    ids = np.arange(n, dtype=np.uint64)
    x = np.zeros((n, dim))
    sigma = np.zeros(n)
    wsq = np.zeros(n)
    bessel_exited_master = np.zeros(n, dtype=bool)
    ordering_ok = np.zeros(n, dtype=bool)

    total_steps = 0
    violating = 0
    gap_sum = 0.0
    gap_max = 0.0

    k = 0
    while ids.size and k < max_steps:
        xi, u = stream.normals_and_uniform(ids, np.uint64(k), dim)
        incr = _increments(manifold, x, xi, dt)
        if k == 0:
            db = np.zeros(ids.size)
            wsq_new = dt * np.sum(xi * xi, axis=1)
        else:
            norm = np.sqrt(np.sum(x * x, axis=1))
            unit = x / np.where(norm > 0, norm, 1.0)[:, None]
            db = sqdt * np.sum(xi * unit, axis=1)
            wsq_new = np.maximum(wsq + 2.0 * np.sqrt(wsq) * db + dim * dt, 0.0)
        w_old = np.sqrt(wsq)
        w = np.sqrt(wsq_new)
        x_new, sig_new, exited, theta, _pts = _exit_update(manifold, r, chart_r,
                                                           x, sigma, incr, u, dt)
        # Bessel exit: step crossing or bridge with the same uniform; under
        # dominance its bridge probability is the smaller one, so sharing u
        # preserves the pathwise ordering of the two exit decisions
        with np.errstate(over="ignore"):
            pb = np.exp(-2.0 * np.maximum(r - w_old, 0.0) * np.maximum(r - w, 0.0) / dt)
        b_exit = (w >= r) | ((k > 0) & (u < pb))
        idx_all = ids.astype(np.int64)
        bessel_exited_master[idx_all] |= b_exit

        gaps = np.abs(w - sig_new)
        gap_sum += float(np.sum(gaps))
        if gaps.size:
            gap_max = max(gap_max, float(np.max(gaps)))
        violating += int(np.sum(w > sig_new + slack))
        total_steps += ids.size

        if np.any(exited):
            idx = ids[exited].astype(np.int64)
            # ordering holds if the Bessel process has not exited strictly earlier
            ordering_ok[idx] = ~bessel_exited_master[idx] | b_exit[exited]
        alive = ~exited
        ids, x, sigma, wsq = ids[alive], x_new[alive], sig_new[alive], wsq_new[alive]
        k += 1
    if ids.size:
        ordering_ok[ids.astype(np.int64)] = True  # censored: no violation observed

    return BesselCouplingReport(manifold=manifold, r=r, dt=dt, n=n, slack=slack,
                                total_steps=total_steps, violating_steps=violating,
                                ordering_ok=int(np.sum(ordering_ok)),
                                gap_mean=gap_sum / max(total_steps, 1), gap_max=gap_max)


# ---------------------------------------------------------------------------
# running suprema with gradient-adapted steps (tail counting estimator)
# ---------------------------------------------------------------------------


def simulate_score_suprema(manifold: ModelManifold, r: float, n: int, rng: RngSpec,
                           score, grad_scale, dt_base: float, dt_min: float = 1e-9,
                           target_move: float = 0.2, max_steps_per_path: int = 10**8):
    """Per-path suprema of a score along diffusion paths, with adaptive steps.

    ``score`` maps chart points to floats; ``grad_scale`` bounds the chart
    gradient magnitude of the score and controls refinement: the step is cut
    so one move changes the score by about ``target_move``.  On flat space
    Gaussian increments are exact in law at any step size, so adaptivity
    costs no bias; it buys resolution of the near-divisor excursions that a
    fixed step would miss.  Returns (suprema, taus), both length n.
    """
    if manifold.m != 1:
        raise ValueError("score suprema are computed on m = 1 sources")
    stream = rng.stream(_DOMAIN_SUPREMA)
    chart_r = float(manifold.chart_radius(r))
    if not manifold.is_flat:
        manifold.chart_radius(1.5 * r)

    ids = np.arange(n, dtype=np.uint64)
    kcounts = np.zeros(n, dtype=np.uint64)
    x = np.zeros((n, 2))
    sigma = np.zeros(n)
    taus = np.zeros(n)
    sups = np.full(n, float(np.asarray(score(np.zeros(1, dtype=complex)))[0]))
    t_clock = np.zeros(n)

    guard = 0
    while ids.size:
        guard += 1
        if guard > max_steps_per_path:
            raise RuntimeError("adaptive supremum simulation exceeded the step budget")
        z = x[:, 0] + 1j * x[:, 1]
        g = np.maximum(np.asarray(grad_scale(z), dtype=float), 1e-12)
        if manifold.is_flat:
            lam = np.ones(ids.size)
        else:
            lam = np.asarray(manifold.conformal_factor(np.abs(z)), dtype=float)
        # chart move is lambda^{-1} sqrt(dt): cut it so g * move ~ target_move
        dt_loc = np.clip((target_move * lam / g) ** 2, dt_min, dt_base)
        xi, u = stream.normals_and_uniform(ids, kcounts[ids.astype(np.int64)], 2)
        incr = (np.sqrt(dt_loc) / lam)[:, None] * xi
        x_new, sig_new, exited, theta, pts = _exit_update(manifold, r, chart_r,
                                                          x, sigma, incr, u, dt_loc)
        idx_all = ids.astype(np.int64)
        if np.any(exited):
            idx = ids[exited].astype(np.int64)
            taus[idx] = t_clock[idx] + theta[exited] * dt_loc[exited]
            z_exit = pts[exited, 0] + 1j * pts[exited, 1]
            sups[idx] = np.maximum(sups[idx], np.asarray(score(z_exit), dtype=float))
        t_clock[idx_all] += dt_loc
        kcounts[idx_all] += np.uint64(1)
        alive = ~exited
        if np.any(alive):
            z_new = x_new[alive, 0] + 1j * x_new[alive, 1]
            idx_alive = ids[alive].astype(np.int64)
            sups[idx_alive] = np.maximum(sups[idx_alive], np.asarray(score(z_new), dtype=float))
        ids, x, sigma = ids[alive], x_new[alive], sig_new[alive]

    return sups, taus


def exit_angle_ks(ensemble: PathEnsemble, sampler_points: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov p-value between path-exit and sampled angles."""
    a = ensemble.exit_angles()
    b = np.angle(sampler_points if ensemble.manifold.m == 1 else sampler_points[:, 0])
    return float(stats.ks_2samp(a, b).pvalue)
