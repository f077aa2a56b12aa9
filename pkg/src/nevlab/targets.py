"""Meromorphic targets into P^1 (and P^n) with exact divisor enumeration.

Targets are univariate maps evaluated on the conformal chart of an m = 1
source.  Every target carries a homogeneous representation psi = [den : num]
by a pair of entire functions drawn from two closed-form families:

* polynomials (rational maps are polynomial pairs in lowest terms),
* finite exponential sums  sum_k c_k e^{a_k z}.

Working with the pair avoids infinities at poles: the chordal distance, the
spherical derivative and the level sets psi = a are all computed from the
pair directly.  Zeros of num - a den are enumerated exactly: polynomial
companion-matrix roots, or - for exponential sums with commensurate
frequencies - reduction to a polynomial in w = e^{mu z} followed by a
logarithmic lattice scan.  Incommensurate or mixed pairs fall back to
argument-principle counting on subdivided boxes with Newton polishing, which
is also the independent oracle used by the tests against the closed forms.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .manifold import ModelManifold, flat

__all__ = [
    "INF",
    "MeromorphicTarget",
    "ProjectiveTarget",
    "DivisorSpec",
    "rational",
    "exp_affine",
    "exp_combination",
    "projective",
    "quotient_target",
    "chordal_distance",
    "chordal_from_pairs",
    "enumerate_divisor",
    "gradient_quotient",
    "ldl_density",
    "spherical_density",
    "circle_winding",
    "argument_principle_divisor",
]

INF = complex(math.inf, 0.0)


def _is_inf(a) -> bool:
    return isinstance(a, str) and a == "inf" or (not isinstance(a, str) and not np.isfinite(complex(a)))


def _fmt_c(x) -> str:
    x = complex(x)
    if x.imag == 0:
        return f"{x.real:g}"
    if x.real == 0:
        return f"{x.imag:g}j"
    return f"{x.real:g}{x.imag:+g}j"


# ---------------------------------------------------------------------------
# entire building blocks: polynomials and exponential sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Poly:
    coeffs: tuple  # descending powers, np.polyval convention

    def __call__(self, z):
        return np.polyval(np.asarray(self.coeffs, dtype=complex), z)

    def deriv(self) -> "_Poly":
        return _Poly(tuple(np.polyder(np.asarray(self.coeffs, dtype=complex))))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_constant(self) -> bool:
        return self.degree == 0


@dataclass(frozen=True)
class _ExpSum:
    terms: tuple  # ((coefficient, frequency), ...) with distinct frequencies

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for c, a in self.terms:
            out = out + c * np.exp(a * z)
        return out

    def deriv(self) -> "_ExpSum":
        return _ExpSum(tuple((c * a, a) for c, a in self.terms))


def _merge_terms(terms) -> tuple:
    acc: dict[complex, complex] = {}
    for c, a in terms:
        key = complex(a)
        acc[key] = acc.get(key, 0.0) + complex(c)
    return tuple((c, a) for a, c in acc.items() if c != 0)


def _combine(num_part, den_part, a):
    """Entire representation of num - a*den, or None when outside the families."""
    if isinstance(num_part, _Poly) and isinstance(den_part, _Poly):
        n = np.asarray(num_part.coeffs, dtype=complex)
        d = np.asarray(den_part.coeffs, dtype=complex)
        k = max(len(n), len(d))
        out = np.zeros(k, dtype=complex)
        out[k - len(n):] += n
        out[k - len(d):] -= a * d
        return _Poly(tuple(out))
    def as_terms(part):
        if isinstance(part, _ExpSum):
            return part.terms
        if isinstance(part, _Poly) and part.is_constant:
            return ((part.coeffs[0], 0.0),)
        return None
    tn, td = as_terms(num_part), as_terms(den_part)
    if tn is None or td is None:
        return None
    return _ExpSum(_merge_terms(tn + tuple((-a * c, f) for c, f in td)))


# ---------------------------------------------------------------------------
# the target types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeromorphicTarget:
    """Map to P^1 held as a reduced pair of entire functions num/den."""

    kind: str
    label: str
    num: object
    den: object
    num_prime: object = field(repr=False, default=None)
    den_prime: object = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "num_prime", self.num.deriv())
        object.__setattr__(self, "den_prime", self.den.deriv())

    # -- evaluation ---------------------------------------------------------

    def pair(self, z):
        return self.num(z), self.den(z)

    def pair_prime(self, z):
        return self.num_prime(z), self.den_prime(z)

    def value(self, z):
        n, d = self.pair(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            return n / d

    def wronskian(self, z):
        """num' den - num den' = den^2 (num/den)'."""
        n, d = self.pair(z)
        npr, dpr = self.pair_prime(z)
        return npr * d - n * dpr

    def derivative(self, z):
        n, d = self.pair(z)
        return self.wronskian(z) / d**2

    def is_constant(self) -> bool:
        probe = np.array([0.31 + 0.17j, -0.8 + 0.45j, 1.1 - 0.6j])
        v = self.value(probe)
        return bool(np.all(np.abs(v - v[0]) < 1e-13 * (1 + np.abs(v[0]))))

    # -- divisors -------------------------------------------------------------

    def level_entire(self, a):
        """Entire function whose zeros are the a-points (den for a = inf)."""
        if _is_inf(a):
            return self.den
        return _combine(self.num, self.den, complex(a))

    def divisor(self, a, chart_radius: float, tol: float = 1e-10):
        """All chart solutions of psi = a with |z| < chart_radius, with multiplicity."""
        h = self.level_entire(a)
        if h is None:
            ent = _PairCallable(self)
            level = (lambda z: ent.num(z) - complex(a) * ent.den(z)) if not _is_inf(a) else ent.den
            levelp = (lambda z: ent.nump(z) - complex(a) * ent.denp(z)) if not _is_inf(a) else ent.denp
            return argument_principle_divisor(level, levelp, chart_radius, tol)
        if isinstance(h, _Poly):
            return _poly_divisor(h, chart_radius, tol)
        pts = _expsum_divisor(h, chart_radius, tol)
        if pts is not None:
            return pts
        return argument_principle_divisor(h, h.deriv(), chart_radius, tol)


class _PairCallable:
    def __init__(self, t: MeromorphicTarget):
        self.num, self.den = t.num, t.den
        self.nump, self.denp = t.num_prime, t.den_prime


@dataclass(frozen=True)
class DivisorSpec:
    """A target value a in P^1 together with the multiplicity handling flag."""

    value: object
    truncated: bool = False

    def __post_init__(self):
        if not _is_inf(self.value):
            complex(self.value)  # must be a valid projective point

    @property
    def is_infinity(self) -> bool:
        return _is_inf(self.value)

    def __str__(self) -> str:
        return "inf" if self.is_infinity else _fmt_c(self.value)


# -- constructors ------------------------------------------------------------


def _trim(coeffs) -> tuple:
    c = np.asarray(coeffs, dtype=complex)
    nz = np.nonzero(np.abs(c) > 0)[0]
    if nz.size == 0:
        raise ValueError("zero polynomial is not a valid target component")
    return tuple(c[nz[0]:])


def rational(numer: Sequence, denom: Sequence = (1.0,), label: str | None = None) -> MeromorphicTarget:
    """P/Q with coefficient sequences in descending powers, lowest terms."""
    n, d = _trim(numer), _trim(denom)
    if len(n) > 1 and len(d) > 1:
        rn = np.roots(np.asarray(n, dtype=complex))
        rd = np.roots(np.asarray(d, dtype=complex))
        if rn.size and rd.size and np.min(np.abs(rn[:, None] - rd[None, :])) < 1e-9:
            raise ValueError("numerator and denominator share a root; reduce to lowest terms")
    return MeromorphicTarget(kind="rational", label=label or _poly_label(n, d),
                             num=_Poly(n), den=_Poly(d))


def exp_affine(a: complex, b: complex = 0.0, label: str | None = None) -> MeromorphicTarget:
    """e^{a z + b}."""
    if a == 0:
        raise ValueError("exp_affine requires a nonzero frequency")
    suffix = "" if complex(b) == 0 else f"{_fmt_c(b) if complex(b).real < 0 else '+' + _fmt_c(b)}"
    return MeromorphicTarget(kind="exp_affine", label=label or f"exp({_fmt_c(a)}z{suffix})",
                             num=_ExpSum(((cmath.exp(complex(b)), complex(a)),)), den=_Poly((1.0,)))


def exp_combination(terms: Sequence[tuple], label: str | None = None) -> MeromorphicTarget:
    """sum_k c_k e^{a_k z} over finitely many distinct frequencies."""
    merged = _merge_terms(tuple((complex(c), complex(a)) for c, a in terms))
    if not merged:
        raise ValueError("exponential combination must be nonzero")
    return MeromorphicTarget(kind="exp_combination", label=label or "expsum",
                             num=_ExpSum(merged), den=_Poly((1.0,)))


def quotient_target(num: MeromorphicTarget, den: MeromorphicTarget, label: str | None = None) -> MeromorphicTarget:
    """num/den of two entire targets (denominators of both must be constant)."""
    for t in (num, den):
        if not (isinstance(t.den, _Poly) and t.den.is_constant):
            raise ValueError("quotient components must be entire")
    scale = den.den.coeffs[0] / num.den.coeffs[0]
    kind = "rational" if isinstance(num.num, _Poly) and isinstance(den.num, _Poly) else "quotient"
    if kind == "rational":
        n = tuple(np.asarray(num.num.coeffs, dtype=complex) * scale)
        return rational(n, den.num.coeffs, label=label or f"{num.label}/{den.label}")
    num_part = num.num if scale == 1.0 else _scale_part(num.num, scale)
    return MeromorphicTarget(kind=kind, label=label or f"{num.label}/{den.label}",
                             num=num_part, den=den.num)


def _scale_part(part, scale):
    if isinstance(part, _Poly):
        return _Poly(tuple(np.asarray(part.coeffs, dtype=complex) * scale))
    return _ExpSum(tuple((c * scale, a) for c, a in part.terms))


def _poly_label(n, d) -> str:
    def one(c):
        return "(" + ",".join(_fmt_c(x) for x in np.asarray(c).tolist()) + ")"
    return one(n) if len(d) == 1 and d[0] == 1.0 else f"{one(n)}/{one(d)}"


@dataclass(frozen=True)
class ProjectiveTarget:
    """Reduced map [psi_0 : ... : psi_n] into P^n from entire components."""

    components: tuple
    label: str

    def __post_init__(self):
        if len(self.components) < 2:
            raise ValueError("projective target needs at least two components")
        for t in self.components:
            if not (isinstance(t.den, _Poly) and t.den.is_constant):
                raise ValueError("projective components must be entire")
        # reduced representation: components must not vanish simultaneously
        first = self.components[0]
        if not first.is_constant():
            for z, _ in first.divisor(0.0, chart_radius=30.0):
                others = [abs(complex(np.asarray(t.num(z)))) for t in self.components[1:]]
                if max(others) < 1e-9:
                    raise ValueError(f"components share a zero near {z}; representation not reduced")

    @property
    def n(self) -> int:
        return len(self.components) - 1

    def norms_sq(self, z):
        z = np.asarray(z, dtype=complex)
        return sum(np.abs(t.num(z) / t.den.coeffs[0]) ** 2 for t in self.components)

    def fubini_study_density(self, z):
        """(A B - |C|^2)/A^2 with A=sum|psi|^2, B=sum|psi'|^2, C=sum psi' conj(psi)."""
        z = np.asarray(z, dtype=complex)
        vals = [t.num(z) / t.den.coeffs[0] for t in self.components]
        ders = [t.num_prime(z) / t.den.coeffs[0] for t in self.components]
        A = sum(np.abs(v) ** 2 for v in vals)
        B = sum(np.abs(w) ** 2 for w in ders)
        C = sum(w * np.conj(v) for w, v in zip(ders, vals))
        return (A * B - np.abs(C) ** 2) / A**2

    def zeta(self, j: int) -> MeromorphicTarget:
        """Affine coordinate component zeta_j = psi_j / psi_0."""
        return quotient_target(self.components[j], self.components[0],
                               label=f"{self.label}[{j}]")


def projective(components: Sequence[MeromorphicTarget], label: str | None = None) -> ProjectiveTarget:
    return ProjectiveTarget(components=tuple(components),
                            label=label or "[" + ":".join(t.label for t in components) + "]")


# ---------------------------------------------------------------------------
# chordal geometry and gradient densities
# ---------------------------------------------------------------------------


def _as_pair(a):
    if _is_inf(a):
        return 0.0, 1.0
    a = complex(a)
    return 1.0, a


def chordal_from_pairs(d1, n1, d2, n2):
    """Spherical distance of [d1:n1] and [d2:n2]; diameter-1 normalization."""
    num = np.abs(np.asarray(n1) * np.asarray(d2) - np.asarray(d1) * np.asarray(n2))
    den = np.sqrt((np.abs(d1) ** 2 + np.abs(n1) ** 2) * (np.abs(d2) ** 2 + np.abs(n2) ** 2))
    return num / den


def chordal_distance(p, q) -> float:
    """|p - q| / sqrt((1+|p|^2)(1+|q|^2)) with the standard infinity limits."""
    d1, n1 = _as_pair(p)
    d2, n2 = _as_pair(q)
    return float(chordal_from_pairs(d1, n1, d2, n2))


def gradient_quotient(target: MeromorphicTarget, manifold: ModelManifold, point) -> float:
    """|grad psi| / |psi| in the source metric: lambda^{-1} |psi'/psi| on the chart."""
    z = complex(point)
    n, d = target.pair(z)
    scale = abs(n) + abs(d)
    if abs(n) < 1e-13 * scale or abs(d) < 1e-13 * scale:
        raise ValueError(f"gradient quotient undefined at a zero or pole (z={z})")
    lam = float(manifold.conformal_factor(abs(z)))
    return abs(target.wronskian(z)) / (abs(n) * abs(d)) / lam


def ldl_density(target: MeromorphicTarget, manifold: ModelManifold, point) -> float:
    """|grad psi|^2 / (|psi|^2 (1 + log^2 |psi|)) at a chart point."""
    z = complex(point)
    n, d = target.pair(z)
    scale = abs(n) + abs(d)
    if abs(n) < 1e-13 * scale or abs(d) < 1e-13 * scale:
        raise ValueError(f"density undefined at a zero or pole (z={z})")
    lam = float(manifold.conformal_factor(abs(z)))
    grad_sq = (abs(target.wronskian(z)) / (abs(n) * abs(d))) ** 2 / lam**2
    return grad_sq / (1.0 + math.log(abs(n) / abs(d)) ** 2)


def spherical_density(target: MeromorphicTarget, z):
    """Squared spherical derivative |W|^2/(|num|^2+|den|^2)^2 on the chart.

    Smooth and bounded across zeros and poles; multiply by lambda^{-2} for
    the intrinsic density on a curved surface.
    """
    n, d = target.pair(z)
    return np.abs(target.wronskian(z)) ** 2 / (np.abs(n) ** 2 + np.abs(d) ** 2) ** 2


# ---------------------------------------------------------------------------
# divisor enumeration: closed forms
# ---------------------------------------------------------------------------


def _poly_divisor(p: _Poly, R: float, tol: float):
    c = np.asarray(p.coeffs, dtype=complex)
    c = c[np.argmax(np.abs(c) > 1e-14 * np.max(np.abs(c))):]
    if len(c) <= 1:
        return []
    roots = np.roots(c)
    out = []
    used = np.zeros(len(roots), bool)
    for i in range(len(roots)):
        if used[i]:
            continue
        cluster = np.abs(roots - roots[i]) < 1e-6 * (1.0 + np.abs(roots[i]))
        cluster &= ~used
        mult = int(np.sum(cluster))
        z0 = complex(np.mean(roots[cluster]))
        used |= cluster
        z0 = _newton_polish(p, p.deriv(), z0, mult, tol)
        if mult > 5:
            raise ValueError(f"multiplicity {mult} at {z0} exceeds the supported order 5")
        if abs(z0) < R:
            out.append((z0, mult))
    return sorted(out, key=lambda t: (abs(t[0]), np.angle(t[0])))


def _commensurate_base(freqs):
    """Common complex frequency mu with freqs = n_k mu for integers n_k, or None."""
    base = min(freqs, key=abs)
    ints = []
    fracs = []
    for f in freqs:
        r = f / base
        if abs(r.imag) > 1e-9 * (1 + abs(r)):
            return None, None
        fr = Fraction(r.real).limit_denominator(24)
        if abs(float(fr) - r.real) > 1e-9 * (1 + abs(r.real)):
            return None, None
        fracs.append(fr)
    denom_lcm = math.lcm(*[f.denominator for f in fracs])
    mu = base / denom_lcm
    ints = [int(f * denom_lcm) for f in fracs]
    return mu, ints


def _expsum_divisor(h: _ExpSum, R: float, tol: float):
    terms = _merge_terms(h.terms)
    if not terms:
        raise ValueError("identically zero level function")
    freqs = [a for _, a in terms if a != 0]
    if not freqs:
        return []  # nonzero constant: no zeros
    mu, ints_nz = _commensurate_base(freqs)
    if mu is None:
        return None
    # polynomial in w = e^{mu z}: exponent n_k per term (0 for the constant)
    exps = []
    for c, a in terms:
        n_k = 0 if a == 0 else ints_nz[freqs.index(a)]
        exps.append((c, n_k))
    n_min = min(n for _, n in exps)
    deg = max(n for _, n in exps) - n_min
    coeffs = np.zeros(deg + 1, dtype=complex)
    for c, n in exps:
        coeffs[deg - (n - n_min)] += c  # descending powers
    w_roots = _poly_divisor(_Poly(tuple(coeffs)), math.inf, tol)
    out = []
    for w0, mult in w_roots:
        if w0 == 0:
            continue  # w = 0 is the e^{mu z} -> 0 end, not a chart point
        z_base = cmath.log(w0) / mu
        # lattice z = z_base + 2 pi i k / mu
        step = 2.0 * math.pi * 1j / mu
        k_max = int((R + abs(z_base)) / abs(step)) + 2
        for k in range(-k_max, k_max + 1):
            z = z_base + k * step
            if abs(z) < R:
                out.append((z, mult))
    return sorted(out, key=lambda t: (abs(t[0]), np.angle(t[0])))


def _newton_polish(h, hp, z0: complex, mult: int, tol: float) -> complex:
    z = complex(z0)
    for _ in range(60):
        val = complex(np.asarray(h(z)))
        der = complex(np.asarray(hp(z)))
        if der == 0:
            break
        step = mult * val / der
        z -= step
        if abs(step) < tol * (1.0 + abs(z)):
            break
    return z


# ---------------------------------------------------------------------------
# argument principle: winding numbers and subdivision
# ---------------------------------------------------------------------------


def circle_winding(h, radius: float, center: complex = 0.0, n0: int = 512,
                   max_n: int = 1 << 19) -> int:
    """Winding number of h along |z - center| = radius (counts enclosed zeros)."""
    n = n0
    while n <= max_n:
        th = 2.0 * np.pi * np.arange(n) / n
        vals = np.asarray(h(center + radius * np.exp(1j * th)), dtype=complex)
        if np.min(np.abs(vals)) < 1e-12 * np.median(np.abs(vals)):
            raise ValueError("zero on (or numerically on) the contour")
        rot = np.angle(np.roll(vals, -1) / vals)
        if np.max(np.abs(rot)) < 1.5:
            total = float(np.sum(rot)) / (2.0 * np.pi)
            w = round(total)
            if abs(total - w) > 0.05:
                raise RuntimeError(f"winding number failed to stabilize: {total}")
            return w
        n *= 2
    raise RuntimeError("contour refinement exhausted in winding computation")


def _rect_winding(h, x0, x1, y0, y1, n0=128, max_n=1 << 16):
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    n = n0
    while n <= max_n:
        ts = np.arange(n) / n
        pts = np.concatenate([a + (b - a) * ts for a, b in zip(corners, corners[1:] + corners[:1])])
        vals = np.asarray(h(pts), dtype=complex)
        if np.min(np.abs(vals)) < 1e-12 * max(np.median(np.abs(vals)), 1e-280):
            raise ValueError("zero on contour")
        rot = np.angle(np.roll(vals, -1) / vals)
        if np.max(np.abs(rot)) < 1.5:
            total = float(np.sum(rot)) / (2.0 * np.pi)
            w = round(total)
            if abs(total - w) > 0.05:
                raise RuntimeError("winding failed to stabilize on box")
            return w
        n *= 2
    raise RuntimeError("contour refinement exhausted on box")


def argument_principle_divisor(h, hp, R: float, tol: float = 1e-10, max_mult: int = 5):
    """Zeros of h in |z| < R by winding-count subdivision plus Newton polish.

    Children of a split tile the parent exactly; a split line that lands on
    a zero is detected (contour failure or winding leakage) and the split is
    retried at shifted offsets, so zeros are never double counted or lost.
    """

    def try_winding(x0, x1, y0, y1):
        try:
            return _rect_winding(h, x0, x1, y0, y1)
        except (ValueError, RuntimeError):
            return None

    def boxed(x0, x1, y0, y1, w, depth):
        if w == 0:
            return []
        size = max(x1 - x0, y1 - y0)
        center = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
        if w <= max_mult:
            z = _newton_polish(h, hp, center, w, tol)
            if x0 - size <= z.real <= x1 + size and y0 - size <= z.imag <= y1 + size:
                eps = max(1e-5 * size, 10 * tol * (1 + abs(z)))
                try:
                    if circle_winding(h, eps, center=z, n0=64) == w:
                        return [(z, w)]
                except (ValueError, RuntimeError):
                    pass
        if depth > 48 or size < 100 * tol:
            raise RuntimeError(f"unresolvable root cluster in box [{x0},{x1}]x[{y0},{y1}] (winding {w})")
        for ox, oy in ((0.5, 0.5), (0.531, 0.457), (0.463, 0.549), (0.415, 0.5), (0.5, 0.585)):
            xm = x0 + ox * (x1 - x0)
            ym = y0 + oy * (y1 - y0)
            cells = [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)]
            ws = [try_winding(*c) for c in cells]
            if any(v is None for v in ws) or sum(ws) != w:
                continue  # split line hit a zero; shift and retry
            out = []
            for cell, wc in zip(cells, ws):
                out.extend(boxed(*cell, wc, depth + 1))
            return out
        raise RuntimeError(f"no admissible split for box [{x0},{x1}]x[{y0},{y1}] (winding {w})")

    for pad_scale in (1e-6, 3.1e-4, 7.3e-3):
        pad = pad_scale * R
        w_total = try_winding(-R - pad, R + pad, -R - pad, R + pad)
        if w_total is not None:
            found = boxed(-R - pad, R + pad, -R - pad, R + pad, w_total, 0)
            break
    else:
        raise RuntimeError("could not establish a zero-free bounding contour")
    inside = [(z, m) for z, m in found if abs(z) < R]
    return sorted(inside, key=lambda t: (abs(t[0]), np.angle(t[0])))


# ---------------------------------------------------------------------------
# public divisor operation
# ---------------------------------------------------------------------------


def enumerate_divisor(target: MeromorphicTarget, a, r: float, tol: float = 1e-10,
                      manifold: ModelManifold | None = None):
    """Solutions of psi = a with geodesic distance < r, with multiplicities.

    The reference point must avoid the divisor (the Green pole sits there),
    so psi(o) = a is rejected.  ``manifold`` defaults to the flat plane,
    where geodesic and chart radii agree.
    """
    value = a.value if isinstance(a, DivisorSpec) else a
    manifold = manifold or flat(1)
    n0, d0 = target.pair(np.asarray(0.0 + 0.0j))
    dist0 = chordal_from_pairs(d0, n0, *_as_pair(value))
    if dist0 < 1e-12:
        raise ValueError("reference point lies on the divisor; recenter or perturb a")
    chart_r = float(manifold.chart_radius(r))
    return target.divisor(value, chart_r, tol)
