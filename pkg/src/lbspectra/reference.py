"""Reference cells and nodal Lagrange bases.

Reference cells: the unit interval [0,1] (``segment``), the Kuhn simplex
{x >= 0, y >= 0, x + y <= 1} (``triangle``), and the unit square
(``quad``).  A basis is described by its nodes together with an entity
label per node (vertex / local edge / interior), which is what the global
numbering machinery keys on when gluing cells into a conforming space.

Segment and quad bases accept an arbitrary symmetric 1d node vector, so
the same code serves both the finite element space (equispaced nodes) and
the surface interpolation maps (e.g. Gauss-Lobatto nodes).  Triangle
bases use the equispaced lattice; their Lagrange coefficients are obtained
by inverting the monomial Vandermonde matrix in exact rational arithmetic,
so cardinality holds to rounding even at higher degree.
"""

from fractions import Fraction

import numpy as np

from .exceptions import UnsupportedCombination

CELL_DIM = {"segment": 1, "triangle": 2, "quad": 2}
CELL_VOLUME = {"segment": 1.0, "triangle": 0.5, "quad": 1.0}

# Local vertices and edges (as local vertex pairs), counterclockwise.
LOCAL_VERTICES = {
    "segment": np.array([[0.0], [1.0]]),
    "triangle": np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    "quad": np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
}
LOCAL_EDGES = {
    "segment": (),
    "triangle": ((0, 1), (1, 2), (2, 0)),
    "quad": ((0, 1), (1, 2), (2, 3), (3, 0)),
}


def equispaced_1d(degree):
    """Equispaced nodes on [0,1] including both endpoints."""
    if degree < 1:
        raise ValueError("degree must be >= 1")
    return np.linspace(0.0, 1.0, degree + 1)


def _check_symmetric(ts):
    ts = np.asarray(ts, dtype=float)
    if ts[0] != 0.0 or ts[-1] != 1.0:
        raise ValueError("1d node vector must include both endpoints 0 and 1")
    if not np.allclose(ts + ts[::-1], 1.0, atol=1e-14):
        raise ValueError("1d node vector must be symmetric about 1/2")
    return ts


class _Lagrange1D:
    """Nodal Lagrange basis on [0,1] at arbitrary distinct nodes."""

    def __init__(self, ts):
        self.ts = np.asarray(ts, dtype=float)
        self.n = len(self.ts)
        diff = self.ts[:, None] - self.ts[None, :]
        np.fill_diagonal(diff, 1.0)
        self.denom = diff.prod(axis=1)

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        # phi_i(x) = prod_{j != i} (x - t_j) / (t_i - t_j); exact delta at nodes.
        d = x[:, None] - self.ts[None, :]          # (npts, n)
        out = np.empty((len(x), self.n))
        for i in range(self.n):
            cols = [j for j in range(self.n) if j != i]
            out[:, i] = d[:, cols].prod(axis=1) / self.denom[i]
        return out

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        d = x[:, None] - self.ts[None, :]
        out = np.zeros((len(x), self.n))
        for i in range(self.n):
            cols = [j for j in range(self.n) if j != i]
            for m in cols:
                rest = [j for j in cols if j != m]
                out[:, i] += d[:, rest].prod(axis=1) if rest else 1.0
            out[:, i] /= self.denom[i]
        return out


def _invert_rational(rows):
    """Invert a square matrix of Fractions by Gauss-Jordan elimination."""
    n = len(rows)
    aug = [list(r) + [Fraction(int(i == j)) for j in range(n)]
           for i, r in enumerate(rows)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [v / pv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [r[n:] for r in aug]


class ReferenceElement:
    """Nodal Lagrange element on a reference cell.

    Attributes
    ----------
    cell_kind : str
        'segment', 'triangle' or 'quad'.
    degree : int
        Polynomial degree (total degree on simplices, tensor degree on
        quads).
    nodes : (n_nodes, dim) ndarray
        Reference coordinates of the Lagrange nodes.
    entities : list of tuples
        Per node: ('v', local_vertex), ('e', local_edge, position) with
        position counted from the first vertex of the local edge, or
        ('i', index) for cell-interior nodes.
    """

    def __init__(self, cell_kind, degree, nodes, entities, evaluator):
        self.cell_kind = cell_kind
        self.degree = degree
        self.nodes = nodes
        self.entities = entities
        self._evaluator = evaluator
        self.n_nodes = len(nodes)
        self.dim = CELL_DIM[cell_kind]

    def eval(self, points):
        """Basis values at reference points; shape (npts, n_nodes)."""
        return self._evaluator.eval(np.atleast_2d(points))

    def grad(self, points):
        """Basis gradients at reference points; shape (npts, n_nodes, dim)."""
        return self._evaluator.grad(np.atleast_2d(points))


class _SegmentEval:
    def __init__(self, lag):
        self.lag = lag

    def eval(self, pts):
        return self.lag.eval(pts[:, 0])

    def grad(self, pts):
        return self.lag.deriv(pts[:, 0])[:, :, None]


class _QuadEval:
    def __init__(self, lag, pairs):
        self.lag = lag
        self.pairs = pairs          # list of (i, j) 1d-node indices per node

    def eval(self, pts):
        vx = self.lag.eval(pts[:, 0])
        vy = self.lag.eval(pts[:, 1])
        return np.stack([vx[:, i] * vy[:, j] for i, j in self.pairs], axis=1)

    def grad(self, pts):
        vx, vy = self.lag.eval(pts[:, 0]), self.lag.eval(pts[:, 1])
        dx, dy = self.lag.deriv(pts[:, 0]), self.lag.deriv(pts[:, 1])
        g = np.empty((len(pts), len(self.pairs), 2))
        for a, (i, j) in enumerate(self.pairs):
            g[:, a, 0] = dx[:, i] * vy[:, j]
            g[:, a, 1] = vx[:, i] * dy[:, j]
        return g


class _TriangleEval:
    def __init__(self, coeffs, exponents):
        self.coeffs = coeffs        # (n_monomials, n_nodes)
        self.exponents = exponents  # list of (a, b)

    def _monomials(self, pts, dx=0, dy=0):
        x, y = pts[:, 0], pts[:, 1]
        cols = []
        for a, b in self.exponents:
            fa, aa = 1.0, a
            for _ in range(dx):
                fa *= aa
                aa -= 1
            fb, bb = 1.0, b
            for _ in range(dy):
                fb *= bb
                bb -= 1
            if fa == 0.0 or fb == 0.0:
                cols.append(np.zeros(len(x)))
            else:
                cols.append(fa * fb * x ** aa * y ** bb)
        return np.stack(cols, axis=1)

    def eval(self, pts):
        return self._monomials(pts) @ self.coeffs

    def grad(self, pts):
        gx = self._monomials(pts, dx=1) @ self.coeffs
        gy = self._monomials(pts, dy=1) @ self.coeffs
        return np.stack([gx, gy], axis=2)


def _segment_layout(ts):
    nodes, entities = [], []
    order = np.argsort(ts)
    for pos in order:
        t = ts[pos]
        if t == 0.0:
            entities.append(("v", 0))
        elif t == 1.0:
            entities.append(("v", 1))
        else:
            entities.append(("i", len([e for e in entities if e[0] == "i"])))
        nodes.append([t])
    return np.array(nodes), entities


def _quad_layout(ts):
    n = len(ts)
    last = n - 1
    corner = {(0, 0): 0, (last, 0): 1, (last, last): 2, (0, last): 3}
    # (i1d, j1d) -> ('e', edge, pos): pos counts interior slots from the
    # edge's first vertex, matching the counterclockwise local edges.
    nodes, entities, pairs = [], [], []
    interior = 0
    for j in range(n):
        for i in range(n):
            if (i, j) in corner:
                ent = ("v", corner[(i, j)])
            elif j == 0:
                ent = ("e", 0, i - 1)
            elif i == last:
                ent = ("e", 1, j - 1)
            elif j == last:
                ent = ("e", 2, last - 1 - i)
            elif i == 0:
                ent = ("e", 3, last - 1 - j)
            else:
                ent = ("i", interior)
                interior += 1
            nodes.append([ts[i], ts[j]])
            entities.append(ent)
            pairs.append((i, j))
    return np.array(nodes), entities, pairs


def _triangle_layout(degree):
    k = degree
    nodes, entities = [], []
    interior = 0
    for j in range(k + 1):
        for i in range(k + 1 - j):
            lam = (k - i - j, i, j)   # barycentric numerators over k
            zeros = [t == 0 for t in lam]
            if lam.count(k):
                ent = ("v", lam.index(k))
            elif zeros[2]:            # on edge (v0, v1)
                ent = ("e", 0, i - 1)
            elif zeros[0]:            # on edge (v1, v2)
                ent = ("e", 1, j - 1)
            elif zeros[1]:            # on edge (v2, v0)
                ent = ("e", 2, k - 1 - j)
            else:
                ent = ("i", interior)
                interior += 1
            nodes.append([Fraction(i, k), Fraction(j, k)])
            entities.append(ent)
    return nodes, entities


def lagrange_element(cell_kind, degree, points_1d=None):
    """Build a degree-``degree`` nodal Lagrange element.

    ``points_1d`` overrides the 1d node vector on segments and quads
    (must be symmetric and include both endpoints); triangles always use
    the equispaced lattice.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if cell_kind == "segment":
        ts = _check_symmetric(equispaced_1d(degree) if points_1d is None
                              else points_1d)
        if len(ts) != degree + 1:
            raise ValueError("need degree+1 nodes on a segment")
        nodes, entities = _segment_layout(ts)
        return ReferenceElement(cell_kind, degree, nodes, entities,
                                _SegmentEval(_Lagrange1D(nodes[:, 0])))
    if cell_kind == "quad":
        ts = _check_symmetric(equispaced_1d(degree) if points_1d is None
                              else points_1d)
        if len(ts) != degree + 1:
            raise ValueError("need degree+1 nodes per direction on a quad")
        nodes, entities, pairs = _quad_layout(ts)
        return ReferenceElement(cell_kind, degree, nodes, entities,
                                _QuadEval(_Lagrange1D(ts), pairs))
    if cell_kind == "triangle":
        if points_1d is not None:
            raise UnsupportedCombination(
                "custom node vectors are not available on triangles; "
                "only the equispaced lattice is provided")
        frac_nodes, entities = _triangle_layout(degree)
        exponents = [(a, d - a) for d in range(degree + 1)
                     for a in range(d, -1, -1)]
        vander = [[x ** a * y ** b for a, b in exponents]
                  for x, y in frac_nodes]
        coeffs = _invert_rational(vander)
        coeffs = np.array([[float(c) for c in row] for row in coeffs])
        nodes = np.array([[float(x), float(y)] for x, y in frac_nodes])
        return ReferenceElement(cell_kind, degree, nodes, entities,
                                _TriangleEval(coeffs, exponents))
    raise UnsupportedCombination(f"unknown cell kind {cell_kind!r}")
