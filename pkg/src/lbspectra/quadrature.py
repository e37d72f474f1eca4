"""Quadrature rules on reference cells and the quadrature-error functional.

Exactness bookkeeping follows the rule-order convention used throughout
the eigenvalue consistency analysis: a rule has order ``ell`` when it
integrates every polynomial of degree ``ell - 1`` exactly, i.e.
``order_ell = exactness_degree + 1``.  On quads the exactness degree is
per direction (tensor degree); on segments and triangles it is the total
degree.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import Legendre
from scipy.special import roots_jacobi, roots_legendre

from .exceptions import OracleInsufficient, UnsupportedCombination
from .reference import CELL_DIM, CELL_VOLUME


@dataclass(frozen=True)
class QuadratureRule:
    cell_kind: str
    family: str
    points: np.ndarray = field(repr=False)      # (n, dim)
    weights: np.ndarray = field(repr=False)     # (n,)
    exactness_degree: int
    order_ell: int

    @property
    def n_points(self):
        return len(self.weights)

    def integrate(self, f):
        """Apply the rule to a callable of reference points or to values
        already sampled at the rule's points."""
        vals = f(self.points) if callable(f) else np.asarray(f)
        return float(self.weights @ vals)


def gauss_legendre_01(n):
    """n-point Gauss-Legendre nodes/weights on [0,1]; exact through 2n-1."""
    x, w = roots_legendre(n)
    return (x + 1.0) / 2.0, w / 2.0


def gauss_lobatto_01(n):
    """n-point Gauss-Lobatto nodes/weights on [0,1]; exact through 2n-3.

    Interior nodes are the Gauss-Jacobi(1,1) points (zeros of P'_{n-1});
    weights are 2/(n(n-1) P_{n-1}(x)^2) on [-1,1].
    """
    if n < 2:
        raise ValueError("Gauss-Lobatto needs at least 2 points")
    if n == 2:
        x = np.array([-1.0, 1.0])
    else:
        xi, _ = roots_jacobi(n - 2, 1.0, 1.0)
        x = np.concatenate([[-1.0], np.sort(xi), [1.0]])
    p = Legendre.basis(n - 1)(x)
    w = 2.0 / (n * (n - 1) * p ** 2)
    w[0] = w[-1] = 2.0 / (n * (n - 1))
    return (x + 1.0) / 2.0, w / 2.0


def lagrange_weights_01(ts):
    """Weights of the interpolatory rule induced by nodes ``ts`` on [0,1],
    i.e. the integrals of the Lagrange basis."""
    from .reference import _Lagrange1D
    xg, wg = gauss_legendre_01(len(ts) + 2)
    return wg @ _Lagrange1D(np.asarray(ts, float)).eval(xg)


def newton_cotes_01(n):
    """Closed n-point Newton-Cotes on [0,1] (equispaced, endpoints in)."""
    if n < 2:
        raise ValueError("closed Newton-Cotes needs at least 2 points")
    ts = np.linspace(0.0, 1.0, n)
    return ts, lagrange_weights_01(ts)


def conical_triangle(n):
    """Conical-product Gauss rule on the Kuhn triangle, exact for total
    degree 2n-1, using Gauss-Jacobi(1,0) in the collapsed direction."""
    xa, wa = roots_jacobi(n, 1.0, 0.0)
    a = (xa + 1.0) / 2.0
    wa = wa / 4.0                     # absorbs the (1-a) factor
    b, wb = gauss_legendre_01(n)
    A, B = np.meshgrid(a, b, indexing="ij")
    WA, WB = np.meshgrid(wa, wb, indexing="ij")
    pts = np.stack([A.ravel(), (B * (1.0 - A)).ravel()], axis=1)
    return pts, (WA * WB).ravel()


def _tensor_quad(x, w):
    X, Y = np.meshgrid(x, x, indexing="ij")
    WX, WY = np.meshgrid(w, w, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1), (WX * WY).ravel()


# Symmetric triangle rules on the Kuhn simplex (barycentric orbit data,
# weights normalized to sum to 1 before the area-1/2 scaling), keyed by
# point count.  Exactness verified by the moment suite.
_TRI_ORBITS = {
    1: (1, [("c", 1.0)]),
    3: (2, [("p3", 1.0 / 3.0, 2.0 / 3.0)]),
    4: (3, [("c", -0.5625), ("p3", 0.5208333333333333, 0.6)]),
    6: (4, [("p3", 0.223381589678011, 0.108103018168070),
            ("p3", 0.109951743655322, 0.816847572980459)]),
    7: (5, [("c", 0.225),
            ("p3", 0.132394152788506, 0.059715871789770),
            ("p3", 0.125939180544827, 0.797426985353087)]),
    12: (6, [("p3", 0.116786275726379, 0.501426509658179),
             ("p3", 0.050844906370207, 0.873821971016996),
             ("p6", 0.082851075618374,
              0.053145049844817, 0.310352451033784)]),
    13: (7, [("c", -0.149570044467682),
             ("p3", 0.175615257433208, 0.479308067841920),
             ("p3", 0.053347235608838, 0.869739794195568),
             ("p6", 0.077113760890257,
              0.048690315425316, 0.312865496004874)]),
}


def _orbit_points(kind, args):
    third = 1.0 / 3.0
    if kind == "c":
        return [(third, third, third)]
    if kind == "p3":
        a = args[0]
        b = (1.0 - a) / 2.0
        return [(a, b, b), (b, a, b), (b, b, a)]
    a, b = args
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def symmetric_triangle(n_points):
    if n_points not in _TRI_ORBITS:
        raise UnsupportedCombination(
            f"no symmetric triangle table with {n_points} points "
            f"(available: {sorted(_TRI_ORBITS)})")
    degree, orbits = _TRI_ORBITS[n_points]
    pts, wts = [], []
    for kind, w, *args in orbits:
        for lam in _orbit_points(kind, args):
            pts.append([lam[1], lam[2]])   # barycentric -> Kuhn (x, y)
            wts.append(w * 0.5)
    return degree, np.array(pts), np.array(wts)


def make_rule(cell_kind, family, n_points):
    """Construct a quadrature rule.

    Families: 'gauss_legendre' (conical product on triangles, tensor on
    quads), 'gauss_lobatto' (segments/quads), 'newton_cotes' (segments/
    quads, closed equispaced), 'symmetric_triangle' (hard-coded tables,
    ``n_points`` selects the table).  ``n_points`` counts points per
    direction on quads.
    """
    if cell_kind not in CELL_DIM:
        raise UnsupportedCombination(f"unknown cell kind {cell_kind!r}")
    if family == "symmetric_triangle":
        if cell_kind != "triangle":
            raise UnsupportedCombination("symmetric_triangle rules live on "
                                         "triangles")
        deg, pts, wts = symmetric_triangle(n_points)
        return QuadratureRule(cell_kind, family, pts, wts, deg, deg + 1)
    if family == "gauss_legendre":
        if cell_kind == "triangle":
            pts, wts = conical_triangle(n_points)
            deg = 2 * n_points - 1
        else:
            x, w = gauss_legendre_01(n_points)
            deg = 2 * n_points - 1
            if cell_kind == "segment":
                pts, wts = x[:, None], w
            else:
                pts, wts = _tensor_quad(x, w)
        return QuadratureRule(cell_kind, family, pts, wts, deg, deg + 1)
    if family in ("gauss_lobatto", "newton_cotes"):
        if cell_kind == "triangle":
            raise UnsupportedCombination(
                f"{family} rules are not defined on triangles")
        x, w = (gauss_lobatto_01(n_points) if family == "gauss_lobatto"
                else newton_cotes_01(n_points))
        if family == "gauss_lobatto":
            deg = 2 * n_points - 3
        else:
            k = n_points - 1
            deg = k + 1 if k % 2 == 0 else k
        if cell_kind == "segment":
            pts, wts = x[:, None], w
        else:
            pts, wts = _tensor_quad(x, w)
        return QuadratureRule(cell_kind, family, pts, wts, deg, deg + 1)
    raise UnsupportedCombination(f"unknown quadrature family {family!r}")


def exact_monomial_integral(cell_kind, a, b=0):
    """Analytic integral of x^a y^b over the reference cell."""
    if cell_kind == "segment":
        return 1.0 / (a + 1)
    if cell_kind == "quad":
        return 1.0 / ((a + 1) * (b + 1))
    # Kuhn triangle: a! b! / (a + b + 2)!
    from math import factorial
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def monomial_exponents(cell_kind, degree):
    """Monomials probing exactness at the given degree: total degree on
    segment/triangle, per-direction degree on quads."""
    if cell_kind == "segment":
        return [(degree, 0)]
    if cell_kind == "triangle":
        return [(a, degree - a) for a in range(degree + 1)]
    return sorted({(degree, b) for b in range(degree + 1)}
                  | {(a, degree) for a in range(degree + 1)})


def moment_defects(rule, degree):
    """Worst absolute moment error over all probing monomials of the given
    degree."""
    worst = 0.0
    x = rule.points[:, 0]
    y = rule.points[:, 1] if rule.points.shape[1] > 1 else None
    for a, b in monomial_exponents(rule.cell_kind, degree):
        vals = x ** a if y is None else x ** a * y ** b
        err = rule.weights @ vals - exact_monomial_integral(rule.cell_kind, a, b)
        worst = max(worst, abs(err))
    return worst


def scan_exactness(cell_kind, points, weights, cap=None, tol=1e-11):
    """Largest degree through which the rule's moments are exact.

    Used to attach an honest quadrature order to interpolation point sets
    whose induced rule has no textbook name (e.g. triangle lattices).
    """
    rule = QuadratureRule(cell_kind, "induced", np.atleast_2d(points),
                          np.asarray(weights, float), -1, 0)
    if cap is None:
        cap = 2 * len(rule.weights) + 4
    deg = -1
    for p in range(cap + 1):
        if moment_defects(rule, p) > tol:
            break
        deg = p
    return deg


def oracle_rule(cell_kind, exactness):
    """Gauss-type rule with at least the requested exactness degree."""
    n = exactness // 2 + 1
    return make_rule(cell_kind, "gauss_legendre", n)


def quadrature_error(rule, f, oracle_exactness=None, oracle_tol=1e-12):
    """E(f) = (exact integral of f) - (rule applied to f).

    The exact integral comes from a much higher-order Gauss oracle and is
    cross-checked against a further refined oracle; disagreement beyond
    ``oracle_tol`` (relative) raises OracleInsufficient.
    """
    if oracle_exactness is None:
        oracle_exactness = max(2 * rule.exactness_degree + 6, 25)
    o1 = oracle_rule(rule.cell_kind, oracle_exactness)
    o2 = oracle_rule(rule.cell_kind, oracle_exactness + 8)
    i1, i2 = o1.integrate(f), o2.integrate(f)
    scale = max(abs(i1), abs(i2), 1.0)
    if abs(i1 - i2) > oracle_tol * scale:
        raise OracleInsufficient(
            f"oracle integrals disagree: {i1!r} vs {i2!r}")
    return i2 - rule.integrate(f)
