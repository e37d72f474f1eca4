"""Closed-form Laplace-Beltrami eigenpairs on the circle and the sphere.

Sphere eigenfunctions are evaluated through homogeneous harmonic
polynomials: the degree-l real spherical harmonic is S(x)/r^l with S a
harmonic polynomial whose monomial coefficients are assembled in exact
rational arithmetic (Legendre derivative coefficients times the real and
imaginary parts of (x+iy)^m times powers of r^2).  Values and tangential
gradients then follow from Euler's identity without any pole handling:
on the unit sphere grad_S2 Y = grad S - l S x.

Surfaces without a closed-form spectrum (torus, implicit) are served by
Richardson extrapolation in the error-analysis module instead.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt, pi, comb

import numpy as np

from .exceptions import UnsupportedSurface


@dataclass
class ExactEigenpair:
    """One exact eigenvalue with an orthonormal basis of eigenfunctions.

    ``functions`` yield values at on-surface points; ``gradients`` yield
    tangential gradients there.  The basis is L2(gamma)-orthonormal.
    """
    eigenvalue: float
    multiplicity: int
    functions: list
    gradients: list


@lru_cache(maxsize=None)
def _legendre_coeffs(l):
    """Coefficients of P_l as Fractions, index = power of the argument."""
    if l == 0:
        return (Fraction(1),)
    if l == 1:
        return (Fraction(0), Fraction(1))
    pm2, pm1 = _legendre_coeffs(l - 2), _legendre_coeffs(l - 1)
    out = [Fraction(0)] * (l + 1)
    for p, c in enumerate(pm1):
        out[p + 1] += Fraction(2 * l - 1, l) * c
    for p, c in enumerate(pm2):
        out[p] -= Fraction(l - 1, l) * c
    return tuple(out)


def _diff_poly(coeffs, m):
    """m-th derivative of a 1d polynomial given as Fraction coefficients."""
    out = list(coeffs)
    for _ in range(m):
        out = [p * c for p, c in enumerate(out)][1:]
        if not out:
            return (Fraction(0),)
    return tuple(out)


def _binom_parts(m):
    """Monomial dicts of Re((x+iy)^m) and Im((x+iy)^m) in (x, y)."""
    re, im = {}, {}
    for t in range(m + 1):
        c = Fraction(comb(m, t))
        # i^t cycles 1, i, -1, -i
        if t % 4 == 0:
            re[(m - t, t)] = re.get((m - t, t), 0) + c
        elif t % 4 == 1:
            im[(m - t, t)] = im.get((m - t, t), 0) + c
        elif t % 4 == 2:
            re[(m - t, t)] = re.get((m - t, t), 0) - c
        else:
            im[(m - t, t)] = im.get((m - t, t), 0) - c
    return re, im


def _r2_power(p):
    """Monomial dict of (x^2 + y^2 + z^2)^p."""
    out = {(0, 0, 0): Fraction(1)}
    for _ in range(p):
        nxt = {}
        for (a, b, c), v in out.items():
            for da, db, dc in ((2, 0, 0), (0, 2, 0), (0, 0, 2)):
                key = (a + da, b + db, c + dc)
                nxt[key] = nxt.get(key, Fraction(0)) + v
        out = nxt
    return out


def _mul_into(acc, poly_xy, zpow, r2pow, scale):
    for (a, b), u in poly_xy.items():
        for (p, q, s), v in r2pow.items():
            key = (a + p, b + q, zpow + s)
            acc[key] = acc.get(key, Fraction(0)) + scale * u * v


@lru_cache(maxsize=None)
def _solid_harmonic(l, m, part):
    """Monomial table of the (un-normalized) real solid harmonic.

    part: 'cos' uses Re((x+iy)^m), 'sin' uses Im; m = 0 takes the zonal
    polynomial.  Returns (exponents (n,3) int array, rational coefficients
    tuple); normalization is applied at evaluation time.
    """
    g = _diff_poly(_legendre_coeffs(l), m)
    if m == 0:
        xy = {(0, 0): Fraction(1)}
    else:
        re, im = _binom_parts(m)
        xy = re if part == "cos" else im
    acc = {}
    for j, gj in enumerate(g):
        if gj == 0:
            continue
        rem = l - m - j
        if rem % 2:
            raise AssertionError("legendre parity violated")
        _mul_into(acc, xy, j, _r2_power(rem // 2), gj)
    acc = {k: v for k, v in acc.items() if v != 0}
    exps = np.array(sorted(acc), dtype=np.int64)
    coeffs = tuple(acc[tuple(k)] for k in exps.tolist())
    return exps, coeffs


def solid_harmonic_table(l, m, part):
    """Float monomial table (exponents, coefficients) of the orthonormal
    real solid harmonic r^l Y."""
    exps, coeffs = _solid_harmonic(l, m, part)
    norm = sqrt((2 * l + 1) / (4 * pi)
                * factorial(l - m) / factorial(l + m))
    if m > 0:
        norm *= sqrt(2.0)
    return exps, np.array([float(c) for c in coeffs]) * norm


def _eval_table(exps, coeffs, pts):
    x = pts[:, :, None]                              # (n, 3, terms)
    powers = x ** exps.T[None, :, :]
    return powers.prod(axis=1) @ coeffs


def _eval_table_grad(exps, coeffs, pts):
    out = np.zeros_like(pts)
    for axis in range(3):
        e = exps[:, axis]
        mask = e > 0
        if not mask.any():
            continue
        de = exps[mask].copy()
        de[:, axis] -= 1
        out[:, axis] = _eval_table(de, coeffs[mask] * e[mask], pts)
    return out


class SphericalHarmonic:
    """Real spherical harmonic on a sphere of radius R, with its
    tangential gradient, evaluated at ambient on-surface points."""

    def __init__(self, l, m, part, radius=1.0):
        self.l = l
        self.exps, self.coeffs = solid_harmonic_table(l, m, part)
        self.radius = radius

    def __call__(self, pts):
        pts = np.atleast_2d(pts) / self.radius
        return _eval_table(self.exps, self.coeffs, pts) / self.radius

    def tangential_gradient(self, pts):
        R = self.radius
        q = np.atleast_2d(pts) / R
        S = _eval_table(self.exps, self.coeffs, q)
        dS = _eval_table_grad(self.exps, self.coeffs, q)
        return (dS - self.l * S[:, None] * q) / R ** 2


class CircleHarmonic:
    """cos/sin Fourier mode on a circle of radius R, L2-normalized."""

    def __init__(self, n, part, radius=1.0):
        self.n = n
        self.part = part
        self.radius = radius
        self.norm = 1.0 / sqrt(pi * radius)

    def __call__(self, pts):
        pts = np.atleast_2d(pts)
        th = np.arctan2(pts[:, 1], pts[:, 0])
        f = np.cos if self.part == "cos" else np.sin
        return self.norm * f(self.n * th)

    def tangential_gradient(self, pts):
        pts = np.atleast_2d(pts)
        th = np.arctan2(pts[:, 1], pts[:, 0])
        tau = np.stack([-np.sin(th), np.cos(th)], axis=1)
        df = (-np.sin(self.n * th) if self.part == "cos"
              else np.cos(self.n * th))
        return (self.norm * self.n / self.radius) * df[:, None] * tau


def exact_spectrum(surface, count):
    """First ``count`` distinct nonzero eigenvalues with eigenfunctions.

    circle radius R: n^2/R^2 with multiplicity 2 (cos, sin modes);
    sphere radius R: l(l+1)/R^2 with multiplicity 2l+1 (zonal harmonic
    first, then cos/sin pairs).  Other kinds have no closed form here.
    """
    kind = surface.kind
    if kind == "circle":
        R = surface.radius
        out = []
        for n in range(1, count + 1):
            fns = [CircleHarmonic(n, "cos", R), CircleHarmonic(n, "sin", R)]
            out.append(ExactEigenpair(
                (n / R) ** 2, 2, fns,
                [f.tangential_gradient for f in fns]))
        return out
    if kind == "sphere":
        R = surface.radius
        out = []
        for l in range(1, count + 1):
            fns = [SphericalHarmonic(l, 0, "cos", R)]
            for m in range(1, l + 1):
                fns.append(SphericalHarmonic(l, m, "cos", R))
                fns.append(SphericalHarmonic(l, m, "sin", R))
            out.append(ExactEigenpair(
                l * (l + 1) / R ** 2, 2 * l + 1, fns,
                [f.tangential_gradient for f in fns]))
        return out
    raise UnsupportedSurface(
        f"no closed-form spectrum for {kind!r}; use the Richardson "
        f"reference instead")


def laplacian_table(exps, coeffs):
    """Exact ambient Laplacian of a rational monomial table (test hook:
    harmonic polynomials must return an empty table)."""
    acc = {}
    for (a, b, c), v in zip(exps.tolist(), coeffs):
        for axis, e in enumerate((a, b, c)):
            if e >= 2:
                key = [a, b, c]
                key[axis] = e - 2
                key = tuple(key)
                acc[key] = acc.get(key, Fraction(0)) + v * e * (e - 1)
    return {k: v for k, v in acc.items() if v != 0}
