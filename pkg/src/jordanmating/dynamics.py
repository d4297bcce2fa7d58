"""Rational maps on the Riemann sphere: evaluation, roots, critical data.

Coefficient lists are ascending (``coeffs[k]`` multiplies ``z**k``).  The
point at infinity is the explicit singleton :data:`INF`, never a large
finite sentinel; evaluation swaps to the ``w = 1/z`` chart whenever
``|z| > 1`` so no intermediate quantity overflows for sane inputs.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence

__all__ = [
    "INF",
    "is_inf",
    "SpherePoint",
    "chordal",
    "poly_eval",
    "poly_derivative",
    "poly_multiply",
    "poly_roots",
    "cluster_roots",
    "RationalMap",
    "OrbitRecord",
]

MAX_DEGREE = 16          # degrees beyond this are out of scope
_TRIM_REL = 1e-13        # relative cutoff for discarding leading coefficients
_CLUSTER_TOL = 1e-6      # roots closer than this merge into one multiple root
_COMMON_ROOT_TOL = 1e-8  # num/den roots closer than this invalidate the map
_LOG_HUGE = 700.0        # ln threshold past which a value is treated as INF


class _Infinity:
    """The point at infinity; a unique singleton."""

    _instance = None
    __slots__ = ()

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"


INF = _Infinity()

#: A point of the Riemann sphere: a finite complex number or INF.
SpherePoint = "complex | _Infinity"


def is_inf(z) -> bool:
    return z is INF


def _canonical(value: complex):
    """Collapse non-finite arithmetic results to the explicit INF."""
    if isinstance(value, complex):
        if math.isfinite(value.real) and math.isfinite(value.imag):
            return value
        return INF
    if isinstance(value, (int, float)):
        if math.isfinite(value):
            return complex(value)
        return INF
    return value


def _stereographic(z):
    """Unit representative (u, v) in C^2 with z = u/v; INF -> (1, 0)."""
    if z is INF:
        return 1.0 + 0.0j, 0.0 + 0.0j
    a = abs(z)
    if a <= 1.0:
        s = math.sqrt(1.0 + a * a)
        return z / s, 1.0 / s
    w = 1.0 / z
    s = math.sqrt(1.0 + abs(w) ** 2)
    return 1.0 / s, w / s


def chordal(z, w) -> float:
    """Chordal (spherical) distance, total on the sphere, range [0, 2]."""
    u1, v1 = _stereographic(z)
    u2, v2 = _stereographic(w)
    return 2.0 * abs(u1 * v2 - v1 * u2)


def stereographic_array(z: np.ndarray):
    """Vectorized unit representatives; non-finite entries mean infinity."""
    z = np.asarray(z, dtype=complex)
    u = np.empty_like(z)
    v = np.empty_like(z)
    fin = np.isfinite(z)
    small = fin & (np.abs(z) <= 1.0)
    s = np.sqrt(1.0 + np.abs(z[small]) ** 2)
    u[small] = z[small] / s
    v[small] = 1.0 / s
    big = fin & ~small
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        w = 1.0 / z[big]
        w[~np.isfinite(w)] = 0j
    s2 = np.sqrt(1.0 + np.abs(w) ** 2)
    u[big] = 1.0 / s2
    v[big] = w / s2
    u[~fin] = 1.0
    v[~fin] = 0j
    return u, v


def chordal_array(z: np.ndarray, w) -> np.ndarray:
    """Chordal distance from each array entry to one sphere point."""
    u1, v1 = stereographic_array(z)
    u2, v2 = _stereographic(w)
    return 2.0 * np.abs(u1 * v2 - v1 * u2)


# ---------------------------------------------------------------------------
# Polynomial utilities (ascending coefficients)
# ---------------------------------------------------------------------------

def poly_eval(coeffs, z):
    """Horner evaluation; works on scalars and numpy arrays alike."""
    acc = coeffs[-1]
    if isinstance(z, np.ndarray):
        acc = np.full_like(z, acc, dtype=complex)
    for c in reversed(coeffs[:-1]):
        acc = acc * z + c
    return acc


def poly_derivative(coeffs):
    if len(coeffs) <= 1:
        return (0j,)
    return tuple(k * c for k, c in enumerate(coeffs) if k >= 1)


def poly_multiply(a, b):
    out = np.convolve(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    return tuple(out)


def _trim(coeffs, rel=_TRIM_REL):
    """Drop numerically-zero leading (highest power) coefficients."""
    c = [complex(x) for x in coeffs]
    scale = max((abs(x) for x in c), default=0.0)
    if scale == 0.0:
        return (0j,)
    while len(c) > 1 and abs(c[-1]) <= rel * scale:
        c.pop()
    return tuple(c)


def poly_roots(coeffs, tol=1e-13, max_iter=80):
    """All complex roots, with multiplicity, of an ascending-coefficient poly.

    Companion-matrix eigenvalues seed a simultaneous Aberth-Ehrlich
    iteration, followed by one Newton polish per root.  Returns a list of
    plain complex numbers (length = degree); use :func:`cluster_roots` to
    recover multiplicities.
    """
    c = _trim(coeffs)
    # roots at the origin: strip low-order zero coefficients
    scale = max(abs(x) for x in c)
    zeros_at_origin = 0
    while len(c) > 1 and abs(c[0]) <= _TRIM_REL * scale:
        c = c[1:]
        zeros_at_origin += 1
    n = len(c) - 1
    roots = [0j] * zeros_at_origin
    if n == 0:
        return roots
    if n == 1:
        return roots + [-c[0] / c[1]]

    seeds = np.roots(np.asarray(c[::-1], dtype=complex))
    z = np.asarray(seeds, dtype=complex)
    cd = poly_derivative(c)
    for _ in range(max_iter):
        pv = poly_eval(c, z)
        dv = poly_eval(cd, z)
        dv = np.where(dv == 0, 1e-300, dv)
        w = pv / dv
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        s = inv.sum(axis=1)
        denom = 1.0 - w * s
        denom = np.where(denom == 0, 1e-300, denom)
        step = w / denom
        z = z - step
        if np.max(np.abs(step) / np.maximum(1.0, np.abs(z))) < tol:
            break
    # one Newton polish per root
    pv = poly_eval(c, z)
    dv = poly_eval(cd, z)
    safe = np.abs(dv) > 0
    z = np.where(safe, z - pv / np.where(safe, dv, 1.0), z)
    z = np.where(np.isfinite(z), z, seeds)
    order = np.lexsort((z.imag, z.real))
    return roots + [complex(v) for v in z[order]]


def cluster_roots(roots, tol=_CLUSTER_TOL):
    """Group nearby roots into (center, multiplicity) pairs.

    Roots within ``tol`` of each other (transitively) form one cluster;
    the reported center is the cluster mean.  Deterministic: clusters are
    sorted by (re, im) of their centers.
    """
    pts = sorted((complex(r) for r in roots), key=lambda v: (v.real, v.imag))
    clusters = []
    for p in pts:
        for cl in clusters:
            if any(abs(p - q) <= tol for q in cl):
                cl.append(p)
                break
        else:
            clusters.append([p])
    out = [(sum(cl) / len(cl), len(cl)) for cl in clusters]
    out.sort(key=lambda t: (t[0].real, t[0].imag))
    return out


# ---------------------------------------------------------------------------
# Rational maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RationalMap:
    """A rational map num/den of the sphere, degree = max(deg num, deg den).

    Polynomials are the constant-denominator case.  Construction validates
    the leading coefficients, the degree bound, and that num and den share
    no root (numerically, to within 1e-8 chordal distance).
    """

    num: tuple = (0j, 1 + 0j)
    den: tuple = (1 + 0j,)

    def __post_init__(self):
        num = _trim(self.num)
        den = _trim(self.den)
        if max(abs(c) for c in den) == 0.0:
            raise ValueError("denominator is identically zero")
        if max(abs(c) for c in num) == 0.0:
            raise ValueError("numerator is identically zero")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        if self.degree < 1:
            raise ValueError("map must have degree >= 1")
        if self.degree > MAX_DEGREE:
            raise ValueError(f"degree {self.degree} exceeds supported bound {MAX_DEGREE}")
        if len(den) > 1:
            nroots = poly_roots(num)
            droots = poly_roots(den)
            for a in nroots:
                for b in droots:
                    if abs(a - b) < _COMMON_ROOT_TOL:
                        raise ValueError(f"num and den share a root near {a}")

    # -- basic properties ---------------------------------------------------

    @staticmethod
    def polynomial(coeffs) -> "RationalMap":
        return RationalMap(tuple(complex(c) for c in coeffs), (1 + 0j,))

    @staticmethod
    def power(d: int) -> "RationalMap":
        """The power map z -> z**d."""
        return RationalMap.polynomial([0] * d + [1])

    @property
    def deg_num(self) -> int:
        return len(self.num) - 1

    @property
    def deg_den(self) -> int:
        return len(self.den) - 1

    @property
    def degree(self) -> int:
        return max(self.deg_num, self.deg_den)

    @property
    def is_polynomial(self) -> bool:
        return self.deg_den == 0

    def __repr__(self):
        return f"RationalMap(num={self.num!r}, den={self.den!r})"

    # -- evaluation -----------------------------------------------------------

    def _revpad_num(self):
        """z**D * num(1/z) as ascending coefficients (D = degree)."""
        d = max(self.deg_num, self.deg_den)
        padded = list(self.num) + [0j] * (d - self.deg_num)
        return tuple(reversed(padded))

    def _revpad_den(self):
        d = max(self.deg_num, self.deg_den)
        padded = list(self.den) + [0j] * (d - self.deg_den)
        return tuple(reversed(padded))

    def __call__(self, z):
        return self.eval(z)

    def eval(self, z):
        """Evaluate at a sphere point; total (returns INF at poles)."""
        if z is INF:
            k = self.deg_num - self.deg_den
            if k > 0:
                return INF
            if k < 0:
                return 0j
            return _canonical(self.num[-1] / self.den[-1])
        z = complex(z)
        if abs(z) <= 1.0:
            n = poly_eval(self.num, z)
            d = poly_eval(self.den, z)
            if d == 0:
                return INF
            return _canonical(n / d)
        # |z| > 1: evaluate in the w = 1/z chart
        # num(z) = z**deg_num * RevNum(1/z), likewise den
        w = 1.0 / z
        a = poly_eval(tuple(reversed(self.num)), w)
        b = poly_eval(tuple(reversed(self.den)), w)
        k = self.deg_num - self.deg_den
        if b == 0:
            return INF
        r = a / b
        if k == 0:
            return _canonical(r)
        if k < 0:
            return _canonical(r * w ** (-k))
        if r == 0:
            return 0j
        if k * math.log(abs(z)) + math.log(abs(r)) > _LOG_HUGE:
            return INF
        return _canonical(z**k * r)

    def eval_array(self, z: np.ndarray) -> np.ndarray:
        """Vectorized evaluation on a finite complex array.

        Infinity is encoded as ``inf+0j`` in the output (and accepted in
        the input); chart swapping keeps values accurate for |z| > 1.
        """
        z = np.asarray(z, dtype=complex)
        out = np.empty_like(z)
        inf_in = ~np.isfinite(z)
        k = self.deg_num - self.deg_den
        near = np.abs(z) <= 1.0
        far = ~near & ~inf_in
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if near.any():
                zs = z[near]
                out[near] = poly_eval(self.num, zs) / poly_eval(self.den, zs)
            if far.any():
                w = 1.0 / z[far]
                r = poly_eval(tuple(reversed(self.num)), w) / poly_eval(
                    tuple(reversed(self.den)), w
                )
                if k == 0:
                    out[far] = r
                elif k < 0:
                    out[far] = r * w ** (-k)
                else:
                    out[far] = r * z[far] ** k
        if inf_in.any():
            if k > 0:
                out[inf_in] = complex(np.inf, 0)
            elif k < 0:
                out[inf_in] = 0j
            else:
                out[inf_in] = self.num[-1] / self.den[-1]
        bad = ~np.isfinite(out)
        if bad.any():
            out[bad] = complex(np.inf, 0)
        return out

    def eval_deriv(self, z: complex) -> complex:
        """Derivative at a finite point (standard chart)."""
        z = complex(z)
        n = poly_eval(self.num, z)
        d = poly_eval(self.den, z)
        nd = poly_eval(poly_derivative(self.num), z)
        dd = poly_eval(poly_derivative(self.den), z)
        if d == 0:
            return _canonical(complex(math.inf, 0))
        return _canonical((nd * d - n * dd) / (d * d))

    def inverted(self) -> "RationalMap":
        """The conjugate map 1/f(1/z) (swaps 0 and INF)."""
        return RationalMap(self._revpad_den(), self._revpad_num())

    # -- critical structure ---------------------------------------------------

    def wronskian(self):
        """num' * den - num * den', ascending coefficients, trimmed."""
        a = poly_multiply(poly_derivative(self.num), self.den)
        b = poly_multiply(self.num, poly_derivative(self.den))
        n = max(len(a), len(b))
        w = [0j] * n
        for i, c in enumerate(a):
            w[i] += c
        for i, c in enumerate(b):
            w[i] -= c
        return _trim(w)

    def critical_points(self):
        """All critical points with local degrees: list of (point, degree).

        The finite critical points are the clustered roots of the
        Wronskian (local degree = multiplicity + 1); infinity picks up the
        remaining Riemann-Hurwitz budget 2*deg - 2.  Order: finite points
        sorted by (re, im), INF last.
        """
        d = self.degree
        w = self.wronskian()
        wdeg = len(w) - 1 if max(abs(c) for c in w) > 0 else -1
        out = []
        if wdeg >= 1:
            for center, mult in cluster_roots(poly_roots(w)):
                out.append((center, mult + 1))
        mult_inf = (2 * d - 2) - (wdeg if wdeg >= 0 else 0)
        if mult_inf > 0:
            out.append((INF, mult_inf + 1))
        total = sum(m - 1 for _, m in out)
        if total != 2 * d - 2:
            raise NonConvergence(
                f"critical multiplicity budget {total} != {2 * d - 2}",
                best=out,
            )
        return out

    def preimages(self, w):
        """All degree-many preimages of w, with multiplicity.

        Degree drops at the image of infinity are restored by counting INF
        with the lost multiplicity (the 1/z-chart bookkeeping).
        """
        d = self.degree
        if w is INF:
            pts = []
            if self.deg_den >= 1:
                pts.extend(poly_roots(self.den))
            k = self.deg_num - self.deg_den
            pts.extend([INF] * max(k, 0))
            return self._sorted_points(pts, d)
        w = complex(w)
        n = max(len(self.num), len(self.den))
        c = [0j] * n
        for i, v in enumerate(self.num):
            c[i] += v
        for i, v in enumerate(self.den):
            c[i] -= w * v
        c = _trim(c)
        drop = d - (len(c) - 1)
        pts = []
        if len(c) > 1:
            pts.extend(poly_roots(c))
        pts.extend([INF] * max(drop, 0))
        return self._sorted_points(pts, d)

    @staticmethod
    def _sorted_points(pts, expected):
        finite = sorted((p for p in pts if p is not INF), key=lambda v: (v.real, v.imag))
        out = finite + [p for p in pts if p is INF]
        if len(out) != expected:
            raise NonConvergence(
                f"preimage count {len(out)} != degree {expected}", best=out
            )
        return out

    # -- multipliers ------------------------------------------------------------

    def multiplier(self, cycle, fd_step=1e-7) -> complex:
        """Multiplier of a periodic cycle, chart-aware at infinity.

        Each step's local derivative is a central finite difference of the
        map expressed between 1/z charts when an endpoint is large; the
        product over the cycle is chart-independent.
        """
        m = 1.0 + 0j
        p = len(cycle)
        for i in range(p):
            z, znext = cycle[i], cycle[(i + 1) % p]
            ci = (z is INF) or abs(z) > 2.0
            co = (znext is INF) or abs(znext) > 2.0
            w0 = 0j if z is INF else (1.0 / z if ci else complex(z))

            def local(w):
                arg = INF if (ci and w == 0) else (1.0 / w if ci else w)
                val = self.eval(arg)
                if co:
                    return 0j if val is INF else 1.0 / val
                return complex(np.inf) if val is INF else val

            h = fd_step
            m *= (local(w0 + h) - local(w0 - h)) / (2 * h)
        return m


@dataclass(frozen=True)
class OrbitRecord:
    """A finite forward orbit with its eventual cycle marked.

    ``points[preperiod + period]`` coincides with ``points[preperiod]``
    within the detection tolerance; period >= 1.
    """

    points: tuple
    preperiod: int
    period: int

    @property
    def cycle(self):
        return self.points[self.preperiod : self.preperiod + self.period]
