"""Triangle meshes, quadrature and point location.

Meshes are conforming P1 triangulations of a planar domain: node
coordinates, counterclockwise element connectivity, and an explicit
boundary-node flag list.  Structured rectangle meshes are generated
directly; unstructured meshes (the unit-disk ones) are read from a
plain text format:

    # comments and blank lines are ignored
    V L B            header: node / element / boundary-node counts
    x y              V node lines
    i j k            L element lines, 0-based, counterclockwise
    i                B boundary node indices

Element areas and P1 shape-function gradients are precomputed at
construction.  Point location uses the closed-form cell formula on
structured meshes and a neighbor-walking search elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.spatial import cKDTree


class MeshFormatError(ValueError):
    """Raised for malformed mesh files; message carries the line number."""


@dataclass(frozen=True)
class QuadratureRule:
    """Symmetric triangle rule: barycentric points, weights summing to 1.

    An integral over element K is area(K) * sum_p w_p f(x_p).
    """

    degree: int
    bary: np.ndarray
    weights: np.ndarray


def _orbit3(a: float) -> list[tuple[float, float, float]]:
    c = 1.0 - 2.0 * a
    return [(c, a, a), (a, c, a), (a, a, c)]


def _orbit6(a: float, b: float) -> list[tuple[float, float, float]]:
    c = 1.0 - a - b
    return [(a, b, c), (b, a, c), (a, c, b), (c, a, b), (b, c, a), (c, b, a)]


_RULES: dict[int, tuple[list, list]] = {
    # Dunavant degree-4, 6 points
    4: (
        _orbit3(0.445948490915965) + _orbit3(0.091576213509771),
        [0.223381589678011] * 3 + [0.109951743655322] * 3,
    ),
    # Dunavant degree-6, 12 points
    6: (
        _orbit3(0.249286745170910)
        + _orbit3(0.063089014491502)
        + _orbit6(0.310352451033785, 0.636502499121399),
        [0.116786275726379] * 3 + [0.050844906370207] * 3 + [0.082851075618374] * 6,
    ),
}


def triangle_quadrature(degree: int) -> QuadratureRule:
    """Symmetric positive-weight rule exact to the given polynomial degree."""
    if degree not in _RULES:
        raise ValueError(f"no triangle rule of degree {degree}; available: {sorted(_RULES)}")
    pts, wts = _RULES[degree]
    return QuadratureRule(degree=degree,
                          bary=np.array(pts, dtype=float),
                          weights=np.array(wts, dtype=float))


@dataclass(frozen=True)
class _StructuredInfo:
    width: float
    height: float
    h: float
    nx: int
    ny: int


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation with precomputed P1 geometry.

    grads[l, a] is the constant gradient of the local shape function of
    vertex a on element l; areas are the (positive) element areas.
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_ids: np.ndarray
    interior_ids: np.ndarray = field(repr=False)
    areas: np.ndarray = field(repr=False)
    grads: np.ndarray = field(repr=False)
    structured: _StructuredInfo | None = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def mean_edge_length(self) -> float:
        if "mean_edge" not in self._cache:
            tri = self.elements
            p = self.nodes
            e = np.concatenate([p[tri[:, 1]] - p[tri[:, 0]],
                                p[tri[:, 2]] - p[tri[:, 1]],
                                p[tri[:, 0]] - p[tri[:, 2]]])
            self._cache["mean_edge"] = float(np.mean(np.hypot(e[:, 0], e[:, 1])))
        return self._cache["mean_edge"]

    def node_neighbors(self) -> list[np.ndarray]:
        """Adjacent-node lists (by shared element) for every node."""
        if "node_neighbors" not in self._cache:
            adj: list[set] = [set() for _ in range(self.n_nodes)]
            for i, j, k in self.elements:
                adj[i].update((j, k))
                adj[j].update((i, k))
                adj[k].update((i, j))
            self._cache["node_neighbors"] = [np.fromiter(sorted(s), dtype=int)
                                             for s in adj]
        return self._cache["node_neighbors"]

    def _element_neighbors(self) -> np.ndarray:
        """neighbors[l, a] = element across the edge opposite vertex a, or -1."""
        if "elem_neighbors" not in self._cache:
            tri = self.elements
            nb = -np.ones((self.n_elements, 3), dtype=int)
            edge_owner: dict[tuple[int, int], tuple[int, int]] = {}
            for l in range(self.n_elements):
                for a in range(3):
                    i, j = tri[l, (a + 1) % 3], tri[l, (a + 2) % 3]
                    key = (min(i, j), max(i, j))
                    if key in edge_owner:
                        lo, ao = edge_owner.pop(key)
                        nb[lo, ao] = l
                        nb[l, a] = lo
                    else:
                        edge_owner[key] = (l, a)
            self._cache["elem_neighbors"] = nb
        return self._cache["elem_neighbors"]

    def _centroid_tree(self) -> cKDTree:
        if "centroid_tree" not in self._cache:
            cent = self.nodes[self.elements].mean(axis=1)
            self._cache["centroid_tree"] = cKDTree(cent)
        return self._cache["centroid_tree"]


def _geometry(nodes: np.ndarray, elements: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = nodes[elements]  # (L, 3, 2)
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    # grad psi_a = (y_{a+1} - y_{a+2}, x_{a+2} - x_{a+1}) / (2 A)
    grads = np.empty((elements.shape[0], 3, 2))
    for a in range(3):
        b = p[:, (a + 1) % 3]
        c = p[:, (a + 2) % 3]
        grads[:, a, 0] = b[:, 1] - c[:, 1]
        grads[:, a, 1] = c[:, 0] - b[:, 0]
    grads /= (2.0 * areas)[:, None, None]
    return areas, grads


def _interior_from_boundary(n_nodes: int, boundary_ids: np.ndarray) -> np.ndarray:
    mask = np.ones(n_nodes, dtype=bool)
    mask[boundary_ids] = False
    return np.nonzero(mask)[0]


def structured_rect_mesh(width: float, height: float, h: float) -> Mesh:
    """Uniform right-triangle mesh of [0, width] x [0, height].

    Every grid square is split along the same diagonal (lower-left to
    upper-right), so there are 2 * (width/h) * (height/h) elements.
    h must divide both sides to 1e-9 relative.
    """
    if h <= 0 or width <= 0 or height <= 0:
        raise ValueError(f"width, height, h must be positive, got {width}, {height}, {h}")
    nx_f, ny_f = width / h, height / h
    nx, ny = round(nx_f), round(ny_f)
    if nx < 1 or abs(nx_f - nx) > 1e-9 * max(1.0, nx_f):
        raise ValueError(f"h={h} does not divide width={width}")
    if ny < 1 or abs(ny_f - ny) > 1e-9 * max(1.0, ny_f):
        raise ValueError(f"h={h} does not divide height={height}")

    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    xx, yy = np.meshgrid(xs, ys)  # row-major: node id = iy * (nx+1) + ix
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    elems = []
    for iy in range(ny):
        for ix in range(nx):
            v00 = iy * (nx + 1) + ix
            v10 = v00 + 1
            v01 = v00 + (nx + 1)
            v11 = v01 + 1
            elems.append((v00, v10, v11))
            elems.append((v00, v11, v01))
    elements = np.array(elems, dtype=int)

    ix = np.arange(nx + 1)
    iy = np.arange(ny + 1)
    gx, gy = np.meshgrid(ix, iy)
    on_bd = (gx == 0) | (gx == nx) | (gy == 0) | (gy == ny)
    boundary_ids = np.nonzero(on_bd.ravel())[0]

    areas, grads = _geometry(nodes, elements)
    return Mesh(nodes=nodes, elements=elements, boundary_ids=boundary_ids,
                interior_ids=_interior_from_boundary(nodes.shape[0], boundary_ids),
                areas=areas, grads=grads,
                structured=_StructuredInfo(width, height, h, nx, ny))


def _validate_mesh(nodes, elements, boundary_ids, elem_lines, path):
    v = nodes.shape[0]
    p = nodes[elements]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    areas2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    scale = float(np.max(np.abs(areas2))) if len(areas2) else 1.0
    bad = np.nonzero(areas2 <= 1e-14 * max(scale, 1e-30))[0]
    if len(bad):
        l = bad[0]
        raise MeshFormatError(
            f"{path}:{elem_lines[l]}: element {l} ({elements[l].tolist()}) has "
            f"non-positive area {0.5 * areas2[l]:.3e}; elements must be "
            f"counterclockwise and non-degenerate")

    # boundary flags must match the nodes of edges owned by exactly one element
    edge_count: dict[tuple[int, int], int] = {}
    for l in range(elements.shape[0]):
        for a in range(3):
            i, j = elements[l, (a + 1) % 3], elements[l, (a + 2) % 3]
            key = (min(i, j), max(i, j))
            edge_count[key] = edge_count.get(key, 0) + 1
    over = [e for e, c in edge_count.items() if c > 2]
    if over:
        raise MeshFormatError(f"{path}: edge {over[0]} is shared by more than "
                              f"two elements; mesh is not a manifold triangulation")
    bd_edge_nodes = set()
    for (i, j), c in edge_count.items():
        if c == 1:
            bd_edge_nodes.update((int(i), int(j)))
    flagged = set(int(i) for i in boundary_ids)
    if flagged != bd_edge_nodes:
        missing = sorted(bd_edge_nodes - flagged)[:5]
        extra = sorted(flagged - bd_edge_nodes)[:5]
        raise MeshFormatError(
            f"{path}: boundary flags inconsistent with single-owner edges "
            f"(unflagged boundary nodes {missing}, flagged interior nodes {extra})")


def load_mesh(path: str) -> Mesh:
    """Read a mesh text file; errors report 1-based line numbers."""
    with open(path) as f:
        raw = f.readlines()
    lines = [(n + 1, s.strip()) for n, s in enumerate(raw)]
    lines = [(n, s) for n, s in lines if s and not s.startswith("#")]
    pos = 0

    def next_line(what):
        nonlocal pos
        if pos >= len(lines):
            raise MeshFormatError(f"{path}: unexpected end of file, expected {what}")
        n, s = lines[pos]
        pos += 1
        return n, s

    n, s = next_line("header 'V L B'")
    parts = s.split()
    if len(parts) != 3:
        raise MeshFormatError(f"{path}:{n}: header must be 'V L B', got {s!r}")
    try:
        nv, nl, nb = (int(x) for x in parts)
    except ValueError:
        raise MeshFormatError(f"{path}:{n}: header counts must be integers, got {s!r}")
    if nv < 3 or nl < 1 or nb < 0:
        raise MeshFormatError(f"{path}:{n}: bad counts V={nv} L={nl} B={nb}")

    nodes = np.empty((nv, 2))
    for i in range(nv):
        n, s = next_line(f"node {i} coordinates")
        parts = s.split()
        try:
            if len(parts) != 2:
                raise ValueError
            nodes[i] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise MeshFormatError(f"{path}:{n}: node {i} must be 'x y', got {s!r}")

    elements = np.empty((nl, 3), dtype=int)
    elem_lines = np.empty(nl, dtype=int)
    for l in range(nl):
        n, s = next_line(f"element {l} connectivity")
        parts = s.split()
        try:
            if len(parts) != 3:
                raise ValueError
            ijk = [int(x) for x in parts]
        except ValueError:
            raise MeshFormatError(f"{path}:{n}: element {l} must be 'i j k', got {s!r}")
        if any(x < 0 or x >= nv for x in ijk):
            raise MeshFormatError(f"{path}:{n}: element {l} has node index out of "
                                  f"range [0, {nv}): {ijk}")
        if len(set(ijk)) != 3:
            raise MeshFormatError(f"{path}:{n}: element {l} has repeated nodes: {ijk}")
        elements[l] = ijk
        elem_lines[l] = n

    bset = set()
    boundary = np.empty(nb, dtype=int)
    for k in range(nb):
        n, s = next_line(f"boundary node index {k}")
        try:
            i = int(s)
        except ValueError:
            raise MeshFormatError(f"{path}:{n}: boundary entry must be a node index, got {s!r}")
        if i < 0 or i >= nv:
            raise MeshFormatError(f"{path}:{n}: boundary node {i} out of range [0, {nv})")
        if i in bset:
            raise MeshFormatError(f"{path}:{n}: boundary node {i} listed twice")
        bset.add(i)
        boundary[k] = i

    if pos != len(lines):
        n, s = lines[pos]
        raise MeshFormatError(f"{path}:{n}: trailing content after mesh data: {s!r}")

    boundary = np.sort(boundary)
    _validate_mesh(nodes, elements, boundary, elem_lines, path)
    areas, grads = _geometry(nodes, elements)
    return Mesh(nodes=nodes, elements=elements, boundary_ids=boundary,
                interior_ids=_interior_from_boundary(nv, boundary),
                areas=areas, grads=grads, structured=None)


def save_mesh(mesh: Mesh, path: str, comment: str = "") -> None:
    """Write a mesh in the text format accepted by load_mesh."""
    with open(path, "w") as f:
        if comment:
            for line in comment.splitlines():
                f.write(f"# {line}\n")
        f.write(f"{mesh.n_nodes} {mesh.n_elements} {len(mesh.boundary_ids)}\n")
        for x, y in mesh.nodes:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for i, j, k in mesh.elements:
            f.write(f"{i} {j} {k}\n")
        for i in mesh.boundary_ids:
            f.write(f"{i}\n")


def _barycentric(mesh: Mesh, elem: int, x: np.ndarray) -> np.ndarray:
    i, j, k = mesh.elements[elem]
    p0 = mesh.nodes[i]
    d1 = mesh.nodes[j] - p0
    d2 = mesh.nodes[k] - p0
    r = x - p0
    det = d1[0] * d2[1] - d1[1] * d2[0]
    l1 = (r[0] * d2[1] - r[1] * d2[0]) / det
    l2 = (d1[0] * r[1] - d1[1] * r[0]) / det
    return np.array([1.0 - l1 - l2, l1, l2])


def locate_point(mesh: Mesh, x, tol: float = 1e-9) -> tuple[int, np.ndarray]:
    """Find (element id, barycentric coords) of a point in the meshed domain.

    Structured meshes use the closed-form cell lookup; unstructured ones
    walk across element neighbors from the nearest centroid.  Points may
    sit on edges/vertices (barycentric entries in [-tol, 1+tol]); points
    outside the domain raise ValueError.
    """
    x = np.asarray(x, dtype=float)
    if mesh.structured is not None:
        st = mesh.structured
        if not (-tol <= x[0] <= st.width + tol and -tol <= x[1] <= st.height + tol):
            raise ValueError(f"point {x.tolist()} outside [0,{st.width}]x[0,{st.height}]")
        ix = min(max(int(x[0] / st.h), 0), st.nx - 1)
        iy = min(max(int(x[1] / st.h), 0), st.ny - 1)
        xi = x[0] / st.h - ix
        eta = x[1] / st.h - iy
        # lower triangle (v00,v10,v11) covers xi >= eta
        elem = 2 * (iy * st.nx + ix) + (0 if xi >= eta else 1)
        bary = _barycentric(mesh, elem, x)
        # guard against roundoff at cell borders
        if bary.min() < -tol:
            for cand in range(max(0, elem - 2), min(mesh.n_elements, elem + 3)):
                b = _barycentric(mesh, cand, x)
                if b.min() >= -tol:
                    return cand, b
            raise ValueError(f"point {x.tolist()} not located (roundoff at cell border)")
        return elem, bary

    nb = mesh._element_neighbors()
    _, elem = mesh._centroid_tree().query(x)
    elem = int(elem)
    visited = 0
    while visited <= mesh.n_elements:
        bary = _barycentric(mesh, elem, x)
        worst = int(np.argmin(bary))
        if bary[worst] >= -tol:
            return elem, bary
        nxt = nb[elem, worst]
        if nxt < 0:
            # crossed a boundary edge while the point is still "outside":
            # try the other negative direction before giving up
            order = np.argsort(bary)
            nxt = -1
            for a in order[1:]:
                if bary[a] < -tol and nb[elem, a] >= 0:
                    nxt = nb[elem, a]
                    break
            if nxt < 0:
                break
        elem = int(nxt)
        visited += 1

    # robust fallback: vectorized scan over all elements
    p0 = mesh.nodes[mesh.elements[:, 0]]
    d1 = mesh.nodes[mesh.elements[:, 1]] - p0
    d2 = mesh.nodes[mesh.elements[:, 2]] - p0
    r = x[None, :] - p0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    l1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    l2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    bary_all = np.column_stack([1.0 - l1 - l2, l1, l2])
    best = int(np.argmax(bary_all.min(axis=1)))
    if bary_all[best].min() >= -tol:
        return best, bary_all[best]
    raise ValueError(f"point {x.tolist()} lies outside the meshed domain")
