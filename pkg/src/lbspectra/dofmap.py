"""Global numbering of nodal layouts over a mesh.

Glues per-cell reference nodes into a conforming global table: vertex
nodes are keyed by the mesh vertex, edge nodes by the sorted vertex pair
plus the position along the edge (flipped when the cell traverses the
edge against the global direction; layouts are symmetric so the flip is
exact), interior nodes by the cell.  The same machinery numbers both the
surface-lift control nodes and the finite element degrees of freedom.
"""

import numpy as np

from .reference import LOCAL_EDGES


def build_node_map(mesh, element):
    """Number the element's nodes globally over the mesh.

    Returns
    -------
    cell_nodes : (n_cells, n_local) int ndarray
        Global node index per cell and local node.
    n_nodes : int
    rep : list of (cell, local) pairs
        One representative location per global node, in index order.
    """
    edges = LOCAL_EDGES[element.cell_kind]
    n_edge_nodes = max((e[2] + 1 for e in element.entities if e[0] == "e"),
                       default=0)
    table = {}
    rep = []
    cell_nodes = np.empty((mesh.n_cells, element.n_nodes), dtype=np.int64)
    for c, cell in enumerate(mesh.cells):
        for loc, ent in enumerate(element.entities):
            if ent[0] == "v":
                key = ("v", int(cell[ent[1]]))
            elif ent[0] == "e":
                a, b = (int(cell[i]) for i in edges[ent[1]])
                pos = ent[2] if a < b else n_edge_nodes - 1 - ent[2]
                key = ("e", min(a, b), max(a, b), pos)
            else:
                key = ("c", c, ent[1])
            idx = table.get(key)
            if idx is None:
                idx = len(rep)
                table[key] = idx
                rep.append((c, loc))
            cell_nodes[c, loc] = idx
    return cell_nodes, len(rep), rep
