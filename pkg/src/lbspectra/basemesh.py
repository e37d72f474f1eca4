"""Flat base meshes: construction, uniform refinement, and quality metrics.

The base polytope carries segment cells (polygons inscribed in a circle),
triangles (subdivided icosahedron), or quads (subdivided cube projected
radially, or a parametric torus grid).  Vertices always sit on the exact
surface: closed-form kinds are snapped analytically, implicit kinds
through the Newton projection.  Uniform refinement splits every cell into
2 (segments) or 4 (triangles, quads) children and snaps the new vertices
back to the surface, so the interpolation assumption for the lift holds
with equality at mesh vertices.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import (LbSpectraError, NonConvergence, ProjectionFailure,
                         UnsupportedCombination)

_FACETS = {
    "segment": ((0,), (1,)),
    "triangle": ((0, 1), (1, 2), (2, 0)),
    "quad": ((0, 1), (1, 2), (2, 3), (3, 0)),
}


@dataclass
class MeshMetrics:
    h: float
    h_min: float
    rho: float
    eta: float


class BaseMesh:
    """Immutable flat mesh on a surface.

    vertices: (n_v, dim) float; cells: (n_c, nv_cell) int with consistent
    outward orientation; cell_kind in {'segment','triangle','quad'}.
    """

    def __init__(self, surface, vertices, cells, cell_kind, level=0):
        self.surface = surface
        self.vertices = np.asarray(vertices, dtype=float)
        self.cells = np.asarray(cells, dtype=np.int64)
        self.cell_kind = cell_kind
        self.level = level
        self.vertices.setflags(write=False)
        self.cells.setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    def facets(self):
        """Map facet key -> list of (cell index, local facet index).

        Facets of segments are vertices; of triangles/quads, edges keyed
        by the sorted vertex pair.
        """
        table = {}
        for c, cell in enumerate(self.cells):
            for f, local in enumerate(_FACETS[self.cell_kind]):
                key = tuple(sorted(cell[i] for i in local))
                table.setdefault(key, []).append((c, f))
        return table

    def edges(self):
        """Sorted unique edge keys (segment meshes: the cells themselves)."""
        if self.cell_kind == "segment":
            return sorted(tuple(sorted(c)) for c in self.cells.tolist())
        return sorted(self.facets().keys())

    def check_watertight(self):
        bad = [k for k, v in self.facets().items() if len(v) != 2]
        if bad:
            raise LbSpectraError(
                f"{len(bad)} facets not shared by exactly 2 cells")

    def euler_characteristic(self):
        if self.cell_kind == "segment":
            return self.n_vertices - self.n_cells
        return self.n_vertices - len(self.edges()) + self.n_cells

    def oriented_facet_sum(self):
        """Divergence-theorem probe: the integral of the (flat) outward
        normal over the whole mesh, which vanishes for a consistently
        oriented closed surface."""
        v = self.vertices
        c = self.cells
        if self.cell_kind == "segment":
            t = v[c[:, 1]] - v[c[:, 0]]
            n = np.stack([t[:, 1], -t[:, 0]], axis=1)
            return n.sum(0)
        if self.cell_kind == "triangle":
            n = 0.5 * np.cross(v[c[:, 1]] - v[c[:, 0]], v[c[:, 2]] - v[c[:, 0]])
            return n.sum(0)
        # bilinear quads: 2x2 Gauss integration of du x dv
        from .quadrature import gauss_legendre_01
        x, w = gauss_legendre_01(2)
        total = np.zeros(3)
        for qx, wx in zip(x, w):
            for qy, wy in zip(x, w):
                du = ((v[c[:, 1]] - v[c[:, 0]]) * (1 - qy)
                      + (v[c[:, 2]] - v[c[:, 3]]) * qy)
                dv = ((v[c[:, 3]] - v[c[:, 0]]) * (1 - qx)
                      + (v[c[:, 2]] - v[c[:, 1]]) * qx)
                total += wx * wy * np.cross(du, dv).sum(0)
        return total


def _snap(surface, points):
    try:
        return surface.snap(points)
    except NonConvergence as exc:
        raise ProjectionFailure(str(exc)) from exc


def _icosahedron():
    p = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
        [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
        [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
    ], dtype=float)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    return verts / np.linalg.norm(verts[0]), faces


def _cube():
    verts = np.array([[x, y, z] for z in (-1, 1) for y in (-1, 1)
                      for x in (-1, 1)], dtype=float) / np.sqrt(3.0)
    faces = np.array([
        [0, 1, 3, 2],      # z = -1
        [4, 6, 7, 5],      # z = +1
        [0, 4, 5, 1],      # y = -1
        [2, 3, 7, 6],      # y = +1
        [0, 2, 6, 4],      # x = -1
        [1, 5, 7, 3],      # x = +1
    ])
    return verts, faces


def _orient_outward(verts, faces, kind):
    """Flip faces whose flat normal points inward (w.r.t. the origin)."""
    out = faces.copy()
    for i, f in enumerate(out):
        a, b = verts[f[1]] - verts[f[0]], verts[f[-1]] - verts[f[0]]
        if np.dot(np.cross(a, b), verts[f].mean(0)) < 0:
            out[i] = f[::-1]
    return out


def make_base(surface, cell_kind, level=0, initial=None):
    """Build the coarse base mesh for a surface and refine ``level`` times.

    ``initial`` tunes the coarse resolution: the polygon edge count for
    circles (default 6), or the (major, minor) grid for the torus
    (default (8, 4)).
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    kind = surface.kind
    if kind == "circle":
        if cell_kind != "segment":
            raise UnsupportedCombination("circle meshes use segment cells")
        n = int(initial or 6)
        if n < 3:
            raise ValueError("polygon needs at least 3 edges")
        th = 2 * np.pi * np.arange(n) / n
        verts = surface.radius * np.stack([np.cos(th), np.sin(th)], axis=1)
        cells = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
        mesh = BaseMesh(surface, verts, cells, "segment")
    elif kind in ("sphere", "implicit"):
        if cell_kind == "triangle":
            verts, faces = _icosahedron()
        elif cell_kind == "quad":
            verts, faces = _cube()
        else:
            raise UnsupportedCombination(
                f"{kind} meshes use triangle or quad cells")
        faces = _orient_outward(verts, faces, cell_kind)
        if kind == "sphere":
            verts = verts * surface.radius
        else:
            verts = _snap(surface, verts)
        mesh = BaseMesh(surface, verts, faces, cell_kind)
    elif kind == "torus":
        if cell_kind != "quad":
            raise UnsupportedCombination("torus meshes use quad cells")
        nu, nv = initial or (8, 4)
        R, r = surface.major_radius, surface.minor_radius
        idx = lambda i, j: (i % nu) * nv + (j % nv)
        verts = np.empty((nu * nv, 3))
        for i in range(nu):
            for j in range(nv):
                phi, th = 2 * np.pi * i / nu, 2 * np.pi * j / nv
                rho = R + r * np.cos(th)
                verts[idx(i, j)] = [rho * np.cos(phi), rho * np.sin(phi),
                                    r * np.sin(th)]
        cells = np.array([[idx(i, j), idx(i + 1, j),
                           idx(i + 1, j + 1), idx(i, j + 1)]
                          for i in range(nu) for j in range(nv)])
        mesh = BaseMesh(surface, verts, cells, "quad")
    else:
        raise UnsupportedCombination(f"no base mesh for surface {kind!r}")
    for _ in range(level):
        mesh = refine_uniform(mesh)
    return mesh


def refine_uniform(mesh):
    """Split every cell (2 segments / 4 triangles / 4 quads) and snap the
    new vertices onto the surface."""
    v = mesh.vertices
    cells = mesh.cells
    new_pts = []
    edge_ix = {}

    def midpoint(a, b):
        key = (min(a, b), max(a, b))
        if key not in edge_ix:
            edge_ix[key] = len(v) + len(new_pts)
            new_pts.append(0.5 * (v[a] + v[b]))
        return edge_ix[key]

    if mesh.cell_kind == "segment":
        kids = []
        for a, b in cells:
            m = midpoint(a, b)
            kids.extend([[a, m], [m, b]])
    elif mesh.cell_kind == "triangle":
        kids = []
        for a, b, c in cells:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            kids.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc],
                         [ab, bc, ca]])
    else:
        mids = [(midpoint(a, b), midpoint(b, c), midpoint(c, d),
                 midpoint(d, a)) for a, b, c, d in cells]
        base = len(v) + len(new_pts)
        kids = []
        for i, ((a, b, c, d), (ab, bc, cd, da)) in enumerate(zip(cells, mids)):
            ctr = base + i
            kids.extend([[a, ab, ctr, da], [ab, b, bc, ctr],
                         [ctr, bc, c, cd], [da, ctr, cd, d]])
        new_pts.extend(0.25 * (v[a] + v[b] + v[c] + v[d])
                       for a, b, c, d in cells)

    snapped = _snap(mesh.surface, np.array(new_pts)) if new_pts else \
        np.zeros((0, v.shape[1]))
    verts = np.vstack([v, snapped])
    out = BaseMesh(mesh.surface, verts, np.array(kids), mesh.cell_kind,
                   level=mesh.level + 1)
    out.check_watertight()
    return out


def _cell_singular_ratios(mesh):
    v, c = mesh.vertices, mesh.cells
    if mesh.cell_kind == "segment":
        return np.ones(len(c))
    if mesh.cell_kind == "triangle":
        M = np.stack([v[c[:, 1]] - v[c[:, 0]], v[c[:, 2]] - v[c[:, 0]]],
                     axis=2)
        s = np.linalg.svd(M, compute_uv=False)
        return s[:, -1] / s[:, 0]
    # quads: sample the bilinear Jacobian at corners and center
    ratios = np.full(len(c), np.inf)
    for qx, qy in [(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)]:
        du = (v[c[:, 1]] - v[c[:, 0]]) * (1 - qy) + (v[c[:, 2]] - v[c[:, 3]]) * qy
        dv = (v[c[:, 3]] - v[c[:, 0]]) * (1 - qx) + (v[c[:, 2]] - v[c[:, 1]]) * qx
        M = np.stack([du, dv], axis=2)
        s = np.linalg.svd(M, compute_uv=False)
        ratios = np.minimum(ratios, s[:, -1] / s[:, 0])
    return ratios


def metrics(mesh):
    """Mesh size h, minimum size, shape regularity (worst singular-value
    ratio of the reference-to-cell maps), and quasi-uniformity h/h_min."""
    v, c = mesh.vertices, mesh.cells
    nvc = c.shape[1]
    diam = np.zeros(len(c))
    for i in range(nvc):
        for j in range(i + 1, nvc):
            diam = np.maximum(diam, np.linalg.norm(v[c[:, i]] - v[c[:, j]],
                                                   axis=1))
    h, h_min = diam.max(), diam.min()
    rho = float(_cell_singular_ratios(mesh).min())
    return MeshMetrics(float(h), float(h_min), rho, float(h / h_min))


def export_off(mesh, path):
    """Write the mesh in ASCII OFF (segments become 2-vertex faces)."""
    with open(path, "w") as f:
        f.write("OFF\n")
        f.write(f"{mesh.n_vertices} {mesh.n_cells} 0\n")
        dim = mesh.vertices.shape[1]
        for p in mesh.vertices:
            coords = list(p) + [0.0] * (3 - dim)
            f.write(" ".join(f"{x:.17g}" for x in coords) + "\n")
        for cell in mesh.cells:
            f.write(f"{len(cell)} " + " ".join(str(i) for i in cell) + "\n")
