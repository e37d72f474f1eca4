"""Degree-k polynomial surface approximations from interpolation points.

The approximate surface is defined cell by cell as the Lagrange
interpolant, at a chosen reference point set, of the closest-point
projection of the flat base cell.  The choice of points is the whole
story for eigenvalue accuracy: point sets that carry a high-order
quadrature rule (Gauss-Lobatto) buy extra orders of geometric
consistency, equispaced points carry the matching Newton-Cotes rule, and
the perturbed variants reproduce the controlled violations of exact
interpolation used to probe sharpness.

Control points are stored in a single global table shared across cells,
so continuity across facets is structural (shared entries are the same
float64 values) rather than a tolerance check.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .basemesh import metrics
from .dofmap import build_node_map
from .exceptions import (ContinuityViolation, DegenerateCell,
                         NonConvergence, ProjectionFailure,
                         UnsupportedCombination)
from .quadrature import conical_triangle, gauss_lobatto_01, scan_exactness
from .reference import equispaced_1d, lagrange_element

POINT_KINDS = ("equispaced", "gauss_lobatto", "perturbed")


@dataclass(frozen=True)
class PerturbSpec:
    """Uniform displacement (center + width*U(-1,1)) * h^{k+1} along the
    surface normal (radial on the sphere)."""
    center: float
    width: float
    seed: int
    base_kind: str = "equispaced"


@dataclass(frozen=True)
class InterpolationPointSet:
    """Reference interpolation points for a degree-k surface map."""
    kind: str
    degree: int
    cell_kind: str
    element: object = field(repr=False)
    order_ell: int
    perturb: Optional[PerturbSpec] = None

    @property
    def n_points(self):
        return self.element.n_nodes

    @property
    def reference_points(self):
        return self.element.nodes


def _segment_order_ell(ts):
    """Order of the 1d interpolatory rule induced by the node vector."""
    from .quadrature import lagrange_weights_01
    w = lagrange_weights_01(ts)
    deg = scan_exactness("segment", np.asarray(ts)[:, None], w)
    return deg + 1


def _triangle_order_ell(degree):
    el = lagrange_element("triangle", degree)
    pts, wo = conical_triangle(degree + 4)
    weights = wo @ el.eval(pts)          # integrals of the Lagrange basis
    deg = scan_exactness("triangle", el.nodes, weights)
    return deg + 1


def make_point_set(cell_kind, degree, kind="equispaced", perturb=None):
    """Build an interpolation point set.

    kind: 'equispaced', 'gauss_lobatto', or 'perturbed' (layout from
    ``perturb.base_kind``, control points later displaced at build time).
    Gauss-Lobatto layouts are tensor products and exist only on segments
    and quads.
    """
    if kind not in POINT_KINDS:
        raise UnsupportedCombination(f"unknown point kind {kind!r}")
    if kind == "perturbed":
        if perturb is None:
            raise ValueError("perturbed point sets need a PerturbSpec")
        base = make_point_set(cell_kind, degree, perturb.base_kind)
        return InterpolationPointSet("perturbed", degree, cell_kind,
                                     base.element, base.order_ell, perturb)
    if cell_kind == "triangle":
        if kind == "gauss_lobatto":
            raise UnsupportedCombination(
                "Gauss-Lobatto points are undefined on triangles; use "
                "equispaced (its induced rule order is recorded honestly)")
        element = lagrange_element("triangle", degree)
        ell = _triangle_order_ell(degree)
    else:
        ts = (gauss_lobatto_01(degree + 1)[0] if kind == "gauss_lobatto"
              else equispaced_1d(degree))
        element = lagrange_element(cell_kind, degree, points_1d=ts)
        ell = _segment_order_ell(ts)
    return InterpolationPointSet(kind, degree, cell_kind, element, ell)


class LiftedMesh:
    """Piecewise-polynomial surface over a base mesh.

    ``control_points`` is the (n_nodes, dim) global table; ``cell_nodes``
    indexes it per cell.  ``map_point``/``map_jacobian`` evaluate the
    per-cell maps; both broadcast over cells for a fixed set of reference
    points.
    """

    def __init__(self, base, point_set, control_points, cell_nodes, h):
        self.base = base
        self.surface = base.surface
        self.degree = point_set.degree
        self.point_set = point_set
        self.quadrature_order_ell = point_set.order_ell
        self.control_points = control_points
        self.cell_nodes = cell_nodes
        self.h = h                      # base-mesh size at this level
        self.cell_kind = base.cell_kind
        self.n_cells = base.n_cells
        control_points.setflags(write=False)

    def _controls(self, cells):
        cells = np.arange(self.n_cells) if cells is None else np.atleast_1d(cells)
        return self.control_points[self.cell_nodes[cells]]

    def map_point(self, xhat, cells=None):
        """Evaluate the surface maps; shape (n_cells, n_pts, dim)."""
        tab = self.point_set.element.eval(xhat)
        return np.einsum("pk,ckd->cpd", tab, self._controls(cells))

    def map_jacobian(self, xhat, cells=None):
        """Tangent matrices DF (n_cells, n_pts, dim, ref_dim) and area
        factors sqrt(det(DF^T DF)) (n_cells, n_pts)."""
        gtab = self.point_set.element.grad(xhat)
        J = np.einsum("pkr,ckd->cpdr", gtab, self._controls(cells))
        G = np.einsum("cpdr,cpds->cprs", J, J)
        det = np.linalg.det(G)
        if not np.all(det > 0.0):
            raise DegenerateCell("non-positive area factor in surface map")
        return J, np.sqrt(det)

    def normals(self, xhat, cells=None):
        """Unit normals of the approximate surface at reference points."""
        J, _ = self.map_jacobian(xhat, cells)
        if J.shape[2] == 2:              # curve in the plane
            t = J[:, :, :, 0]
            n = np.stack([t[:, :, 1], -t[:, :, 0]], axis=2)
        else:
            n = np.cross(J[:, :, :, 0], J[:, :, :, 1])
        return n / np.linalg.norm(n, axis=2, keepdims=True)


def build_lift(base, degree, point_set=None, tol_continuity=1e-9):
    """Construct the degree-k approximate surface over a base mesh.

    Unperturbed point sets interpolate the closest-point projection
    exactly at every node; the perturbed kind displaces each global node
    along the outward normal by its sampled amount (seeded, recorded in
    the point set).
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if point_set is None:
        point_set = make_point_set(base.cell_kind, degree)
    if point_set.degree != degree or point_set.cell_kind != base.cell_kind:
        raise UnsupportedCombination("point set does not match the lift "
                                     "degree or the mesh cell kind")
    element = point_set.element
    cell_nodes, n_nodes, rep = build_node_map(base, element)

    # Flat positions of the lift nodes through the straight base cells.
    # The degree-1 basis columns follow the element's own node order,
    # which on quads permutes the counterclockwise cell vertex order.
    geo = lagrange_element(base.cell_kind, 1)
    vert_order = [ent[1] for ent in geo.entities]
    tab = geo.eval(element.nodes)          # (n_loc, n_cell_verts)
    flat_all = np.einsum("pk,ckd->cpd", tab,
                         base.vertices[base.cells[:, vert_order]])
    flat = np.empty((n_nodes, base.vertices.shape[1]))
    for idx, (c, loc) in enumerate(rep):
        flat[idx] = flat_all[c, loc]

    try:
        control = base.surface.snap(flat)
    except NonConvergence as exc:
        raise ProjectionFailure(str(exc)) from exc

    h = metrics(base).h
    if point_set.perturb is not None:
        ps = point_set.perturb
        rng = np.random.default_rng(ps.seed)
        delta = (ps.center + ps.width * rng.uniform(-1.0, 1.0, n_nodes))
        control = control + (delta * h ** (degree + 1))[:, None] \
            * base.surface.normal_at(control)

    lifted = LiftedMesh(base, point_set, control, cell_nodes, h)

    # Shared control points are structurally identical; still sample the
    # maps across one interior facet per mesh as an internal check.
    _check_facet_continuity(lifted, tol_continuity)
    _check_orientation(lifted)
    return lifted


def _check_facet_continuity(lifted, tol):
    base = lifted.base
    facets = base.facets()
    key = next(iter(facets))
    pair = facets[key]
    if len(pair) != 2:
        raise ContinuityViolation("mesh is not watertight")
    (c1, f1), (c2, f2) = pair
    params = np.linspace(0.0, 1.0, 5)
    p1 = _facet_points(base, lifted, c1, f1, key, params)
    p2 = _facet_points(base, lifted, c2, f2, key, params)
    if np.abs(p1 - p2).max() > tol * (1.0 + lifted.h):
        raise ContinuityViolation(
            f"lift maps disagree across a shared facet by "
            f"{np.abs(p1 - p2).max():.3e}")


def _facet_points(base, lifted, cell, local_facet, key, params):
    from .reference import LOCAL_EDGES, LOCAL_VERTICES
    if base.cell_kind == "segment":
        # facet = vertex; evaluate at that endpoint
        xh = LOCAL_VERTICES["segment"][[local_facet]]
        return lifted.map_point(xh, cells=[cell])[0]
    a, b = LOCAL_EDGES[base.cell_kind][local_facet]
    va, vb = LOCAL_VERTICES[base.cell_kind][[a, b]]
    ga, gb = (int(base.cells[cell][i]) for i in (a, b))
    t = params if ga == min(ga, gb) else 1.0 - params
    xh = va[None, :] * (1 - t[:, None]) + vb[None, :] * t[:, None]
    return lifted.map_point(xh, cells=[cell])[0]


def _check_orientation(lifted):
    centers = {"segment": [[0.5]], "triangle": [[1 / 3, 1 / 3]],
               "quad": [[0.5, 0.5]]}
    xh = np.array(centers[lifted.cell_kind])
    N = lifted.normals(xh)[:, 0, :]
    pts = lifted.map_point(xh)[:, 0, :]
    nu = lifted.surface.normal_at(lifted.surface.snap(pts))
    if np.any((N * nu).sum(1) <= 0.0):
        raise DegenerateCell("surface map normals point inward; "
                             "base mesh orientation is inconsistent")
