"""Tagged conforming triangulations of the four model geometries.

Subdomain tags follow one convention throughout the package: the pressurised
island is the lowest tag, so interface normals (lower tag -> higher tag) point
out of the island.

========== ======================================= =================
domain     region                                  tag
========== ======================================= =================
diskdisk   inner disk B(0, rho) / annulus           0 / 1
disksector sector |theta| <= pi/4 / rest of disk    0 / 1
insulation omega_1, omega_2, omega_3 (left to right) 1, 2, 3
quadrant   Q_1 .. Q_4 (counter-clockwise from x>0,y>0) 1, 2, 3, 4
========== ======================================= =================
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DOMAIN_KINDS = ("diskdisk", "disksector", "insulation", "quadrant", "polygon")


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    rho: float | None = None

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "diskdisk":
            if self.rho is None or not (0.0 < self.rho < 1.0):
                raise ValueError(f"DiskDisk requires 0 < rho < 1, got {self.rho}")

    @classmethod
    def disk_disk(cls, rho=0.5):
        return cls("diskdisk", float(rho))

    @classmethod
    def disk_sector(cls):
        return cls("disksector")

    @classmethod
    def insulation_strip(cls):
        return cls("insulation")

    @classmethod
    def quadrant_square(cls):
        return cls("quadrant")

    @property
    def curved(self):
        return self.kind in ("diskdisk", "disksector")

    @property
    def tags(self):
        return {
            "diskdisk": (0, 1),
            "disksector": (0, 1),
            "insulation": (1, 2, 3),
            "quadrant": (1, 2, 3, 4),
        }.get(self.kind, ())

    def area(self):
        if self.curved:
            return math.pi
        if self.kind == "insulation":
            return 2.0
        if self.kind == "quadrant":
            return 4.0
        raise ValueError("area unknown for a loaded polygon mesh")

    def project_boundary(self, p):
        """Snap points created on the outer boundary back onto it."""
        if not self.curved:
            return p
        return p / np.linalg.norm(p, axis=-1, keepdims=True)

    def project_interface(self, p):
        if self.kind != "diskdisk":
            return p
        return self.rho * p / np.linalg.norm(p, axis=-1, keepdims=True)

    def describe(self):
        if self.kind == "diskdisk":
            return {"kind": self.kind, "rho": self.rho}
        return {"kind": self.kind}


@dataclass(frozen=True)
class InterfaceEdge:
    nodes: tuple[int, int]
    low_element: int
    high_element: int
    low_tag: int
    high_tag: int
    normal: np.ndarray
    tangent: np.ndarray
    length: float
    midpoint: np.ndarray


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable P1 triangulation.

    ``boundary_nodes`` holds the sorted indices of nodes on the outer boundary.
    ``domain`` is kept so that refinement can put new boundary and interface
    nodes back on the exact curves.
    """

    nodes: np.ndarray
    elements: np.ndarray
    element_tag: np.ndarray
    boundary_nodes: np.ndarray
    domain: DomainSpec | None = field(default=None)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        tags = np.ascontiguousarray(self.element_tag, dtype=np.int64)
        bnodes = np.unique(np.asarray(self.boundary_nodes, dtype=np.int64))
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise ValueError("nodes must be an (n, 2) array")
        if elements.ndim != 2 or elements.shape[1] != 3:
            raise ValueError("elements must be an (m, 3) array")
        if tags.shape != (len(elements),):
            raise ValueError("one tag per element required")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("non-finite node coordinates")
        for name, arr in (("nodes", nodes), ("elements", elements),
                          ("element_tag", tags), ("boundary_nodes", bnodes)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    @cached_property
    def signed_areas(self):
        p = self.nodes[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def centroids(self):
        return self.nodes[self.elements].mean(axis=1)

    @cached_property
    def interior_nodes(self):
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    @cached_property
    def _edge_table(self):
        # local edge k joins local vertices (k, k+1)
        loc = self.elements[:, [[0, 1], [1, 2], [2, 0]]]
        srt = np.sort(loc.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(srt, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        owner = np.repeat(np.arange(self.n_elements), 3)
        order = np.argsort(inverse, kind="stable")
        inv_sorted = inverse[order]
        first = np.searchsorted(inv_sorted, np.arange(len(edges)), side="left")
        last = np.searchsorted(inv_sorted, np.arange(len(edges)), side="right")
        count = last - first
        if np.any(count > 2):
            raise ValueError("non-manifold mesh: an edge is shared by more than two elements")
        el0 = owner[order[first]]
        el1 = np.where(count == 2, owner[order[np.minimum(first + 1, len(order) - 1)]], -1)
        return edges, inverse.reshape(-1, 3), np.stack([el0, el1], axis=1)

    @property
    def edges(self):
        return self._edge_table[0]

    @property
    def element_edges(self):
        """(m, 3) indices into ``edges``; column k is the edge joining local vertices k and k+1."""
        return self._edge_table[1]

    @property
    def edge_elements(self):
        """(n_edges, 2) adjacent elements, -1 for the missing side of boundary edges."""
        return self._edge_table[2]

    @cached_property
    def boundary_edge_mask(self):
        return self.edge_elements[:, 1] < 0

    @cached_property
    def interface_edge_mask(self):
        ee = self.edge_elements
        inner = ee[:, 1] >= 0
        mask = np.zeros(len(ee), dtype=bool)
        mask[inner] = self.element_tag[ee[inner, 0]] != self.element_tag[ee[inner, 1]]
        return mask

    def interface_edges(self):
        return interface_edges(self)

    def max_diameter(self):
        p = self.nodes[self.elements]
        lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
        return float(lengths.max())

    def total_area(self):
        return float(self.signed_areas.sum())

    def fingerprint(self):
        """SHA-256 of the node, element and tag arrays (used to pair solutions with meshes)."""
        h = hashlib.sha256()
        for arr in (self.nodes, self.elements, self.element_tag, self.boundary_nodes):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def build_mesh(spec: DomainSpec, target_h: float) -> Mesh:
    """Triangulate ``spec`` with element diameters at most ``2 * target_h``.

    Disk geometries use concentric rings (one ring sits exactly on the
    interface circle for ``diskdisk``; ring nodes include the rays
    theta = +-pi/4 for ``disksector``), joined by a zipper triangulation.
    Rectangular geometries use a uniform grid aligned with the subdomains.
    """
    if not target_h > 0:
        raise ValueError(f"target_h must be positive, got {target_h}")
    if spec.kind == "diskdisk":
        return _ring_mesh(spec, target_h, radii_breaks=(spec.rho,), angle_breaks=())
    if spec.kind == "disksector":
        return _ring_mesh(spec, target_h, radii_breaks=(), angle_breaks=(-math.pi / 4, math.pi / 4))
    if spec.kind == "insulation":
        return _grid_mesh(spec, target_h, (-1.0, 1.0), (-0.5, 0.5), xbreaks=(-0.5, 0.5), ybreaks=())
    if spec.kind == "quadrant":
        return _grid_mesh(spec, target_h, (-1.0, 1.0), (-1.0, 1.0), xbreaks=(0.0,), ybreaks=(0.0,))
    raise ValueError(f"cannot generate a mesh for domain kind {spec.kind!r}")


def _ring_radii(h, breaks):
    pts = [0.0, *breaks, 1.0]
    radii = []
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, math.ceil((b - a) / h - 1e-9))
        radii.extend(a + (b - a) * np.arange(1, n + 1) / n)
    return np.array(radii)


def _ring_angles(r, h, angle_breaks):
    """Angles of the nodes on a ring of radius r, as a list of open-ended segments."""
    if not angle_breaks:
        n = max(6, math.ceil(2 * math.pi * r / h - 1e-9))
        return [(-math.pi + 2 * math.pi * np.arange(n + 1) / n)]
    b = sorted(angle_breaks)
    bounds = list(zip(b, b[1:] + [b[0] + 2 * math.pi]))
    segs = []
    for a0, a1 in bounds:
        n = max(2, math.ceil((a1 - a0) * r / h - 1e-9))
        segs.append(a0 + (a1 - a0) * np.arange(n + 1) / n)
    return segs


def _zipper(inner, outer, tri):
    """Triangulate the strip between two node chains sharing start/end angles.

    ``inner`` / ``outer`` are lists of (angle, node_id).
    """
    i = j = 0
    ni, no = len(inner) - 1, len(outer) - 1
    while i < ni or j < no:
        if i < ni and (j == no or inner[i + 1][0] <= outer[j + 1][0]):
            tri.append((inner[i][1], outer[j][1], inner[i + 1][1]))
            i += 1
        else:
            tri.append((inner[i][1], outer[j][1], outer[j + 1][1]))
            j += 1


def _ring_mesh(spec, h, radii_breaks, angle_breaks):
    radii = _ring_radii(h, radii_breaks)
    nodes = [(0.0, 0.0)]
    chains = []  # per ring: list of segments, each a list of (angle, id)
    for r in radii:
        segs = _ring_angles(r, h, angle_breaks)
        ring = []
        if not angle_breaks:
            ang = segs[0][:-1]
            ids = list(range(len(nodes), len(nodes) + len(ang)))
            nodes.extend(zip(r * np.cos(ang), r * np.sin(ang)))
            seg = list(zip(segs[0], ids + [ids[0]]))
            ring.append(seg)
        else:
            start_ids = []
            for s in segs:
                start_ids.append(len(nodes))
                ang = s[:-1]
                nodes.extend(zip(r * np.cos(ang), r * np.sin(ang)))
            for k, s in enumerate(segs):
                ids = list(range(start_ids[k], start_ids[k] + len(s) - 1))
                ids.append(start_ids[(k + 1) % len(segs)])
                ring.append(list(zip(s, ids)))
        chains.append(ring)

    tri = []
    # fan around the centre
    for seg in chains[0]:
        for (a0, i0), (a1, i1) in zip(seg[:-1], seg[1:]):
            tri.append((0, i0, i1))
    for inner, outer in zip(chains[:-1], chains[1:]):
        for sin_, sout in zip(inner, outer):
            _zipper(sin_, sout, tri)

    nodes = np.array(nodes)
    # snap the exact breakpoints so rays and circles are reproduced to round-off
    elements = np.array(tri, dtype=np.int64)
    elements = _orient(nodes, elements)
    cent = nodes[elements].mean(axis=1)
    if spec.kind == "diskdisk":
        tags = np.where(np.hypot(cent[:, 0], cent[:, 1]) < spec.rho, 0, 1)
    else:
        tags = np.where(np.abs(np.arctan2(cent[:, 1], cent[:, 0])) < math.pi / 4, 0, 1)
    outer_ids = sorted({i for seg in chains[-1] for _, i in seg})
    return Mesh(nodes, elements, tags, np.array(outer_ids), spec)


def _grid_axis(lo, hi, breaks, h):
    pts = [lo, *breaks, hi]
    out = [lo]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, math.ceil((b - a) / h - 1e-9))
        out.extend(a + (b - a) * np.arange(1, n + 1) / n)
    return np.array(out)


def _grid_mesh(spec, h, xr, yr, xbreaks, ybreaks):
    xs = _grid_axis(*xr, xbreaks, h)
    ys = _grid_axis(*yr, ybreaks, h)
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange(nx * ny).reshape(ny, nx)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    elements = np.empty((2 * len(a), 3), dtype=np.int64)
    elements[0::2] = np.column_stack([a, b, c])
    elements[1::2] = np.column_stack([a, c, d])
    cent = nodes[elements].mean(axis=1)
    if spec.kind == "insulation":
        tags = 1 + (cent[:, 0] > -0.5).astype(int) + (cent[:, 0] > 0.5).astype(int)
    else:
        right = cent[:, 0] > 0
        up = cent[:, 1] > 0
        tags = np.select([right & up, ~right & up, ~right & ~up], [1, 2, 3], default=4)
    on_bd = (np.isclose(nodes[:, 0], xr[0], atol=1e-14) | np.isclose(nodes[:, 0], xr[1], atol=1e-14)
             | np.isclose(nodes[:, 1], yr[0], atol=1e-14) | np.isclose(nodes[:, 1], yr[1], atol=1e-14))
    return Mesh(nodes, elements, tags, np.flatnonzero(on_bd), spec)


def _orient(nodes, elements):
    p = nodes[elements]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    elements = elements.copy()
    elements[neg] = elements[neg][:, [0, 2, 1]]
    return elements


# ---------------------------------------------------------------------------
# refinement
# ---------------------------------------------------------------------------

def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into four through its edge midpoints."""
    mids, nodes, bnodes = _edge_midpoints(mesh, np.ones(len(mesh.edges), dtype=bool))
    e = mesh.elements
    m = mids[mesh.element_edges]  # midpoint of edge (k, k+1)
    a, b, c = e[:, 0], e[:, 1], e[:, 2]
    mab, mbc, mca = m[:, 0], m[:, 1], m[:, 2]
    children = np.stack([
        np.column_stack([a, mab, mca]),
        np.column_stack([mab, b, mbc]),
        np.column_stack([mca, mbc, c]),
        np.column_stack([mab, mbc, mca]),
    ], axis=1).reshape(-1, 3)
    tags = np.repeat(mesh.element_tag, 4)
    return Mesh(nodes, children, tags, bnodes, mesh.domain)


def refine_toward_interface(mesh: Mesh, levels: int) -> Mesh:
    """Bisect the elements touching an interface ``levels`` times.

    Each pass marks every edge of the elements that have a vertex on an
    interface, closes the marking so every element with a marked edge also has
    its longest edge marked, then bisects longest-edge first. Interface edges
    are therefore halved on each pass and the result stays conforming.
    """
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    for _ in range(levels):
        iface = mesh.edges[mesh.interface_edge_mask]
        on_iface = np.zeros(mesh.n_nodes, dtype=bool)
        on_iface[iface.ravel()] = True
        marked_el = on_iface[mesh.elements].any(axis=1)
        if not marked_el.any():
            return mesh
        mesh = bisect(mesh, marked_el)
    return mesh


def _longest_local_edge(mesh):
    p = mesh.nodes[mesh.elements]
    lengths = np.linalg.norm(np.roll(p, -1, axis=1) - p, axis=2)  # edge (k, k+1)
    return np.argmax(lengths, axis=1)


def bisect(mesh: Mesh, marked_elements: np.ndarray) -> Mesh:
    """Conforming longest-edge bisection of all edges of the marked elements."""
    el_edges = mesh.element_edges
    longest = _longest_local_edge(mesh)
    ref_edge = el_edges[np.arange(mesh.n_elements), longest]
    marked = np.zeros(len(mesh.edges), dtype=bool)
    marked[el_edges[marked_elements].ravel()] = True
    while True:
        need = marked[el_edges].any(axis=1) & ~marked[ref_edge]
        if not need.any():
            break
        marked[ref_edge[need]] = True

    mids, nodes, bnodes = _edge_midpoints(mesh, marked)
    out_el, out_tag = [], []
    for t in range(mesh.n_elements):
        k = longest[t]
        tri = mesh.elements[t]
        # rotate so that the refinement edge is (a, b)
        a, b, c = tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]
        ea, eb, ec = el_edges[t, k], el_edges[t, (k + 1) % 3], el_edges[t, (k + 2) % 3]
        tag = mesh.element_tag[t]
        if not marked[ea]:
            out_el.append(tuple(tri))
            out_tag.append(tag)
            continue
        m = mids[ea]
        # children (a, m, c) holds edge c-a, (m, b, c) holds edge b-c
        if marked[ec]:
            k2 = mids[ec]
            out_el += [(a, m, k2), (m, c, k2)]
            out_tag += [tag, tag]
        else:
            out_el.append((a, m, c))
            out_tag.append(tag)
        if marked[eb]:
            n2 = mids[eb]
            out_el += [(m, b, n2), (m, n2, c)]
            out_tag += [tag, tag]
        else:
            out_el.append((m, b, c))
            out_tag.append(tag)
    return Mesh(nodes, np.array(out_el, dtype=np.int64), np.array(out_tag), bnodes, mesh.domain)


def _edge_midpoints(mesh, marked):
    """New node ids for the marked edges (-1 elsewhere), the enlarged node array and boundary set."""
    edges = mesh.edges
    idx = np.flatnonzero(marked)
    mid = 0.5 * (mesh.nodes[edges[idx, 0]] + mesh.nodes[edges[idx, 1]])
    dom = mesh.domain
    if dom is not None:
        bmask = mesh.boundary_edge_mask[idx]
        imask = mesh.interface_edge_mask[idx]
        if bmask.any():
            mid[bmask] = dom.project_boundary(mid[bmask])
        if imask.any():
            mid[imask] = dom.project_interface(mid[imask])
    ids = np.full(len(edges), -1, dtype=np.int64)
    ids[idx] = mesh.n_nodes + np.arange(len(idx))
    nodes = np.vstack([mesh.nodes, mid])
    new_b = ids[idx[mesh.boundary_edge_mask[idx]]]
    bnodes = np.concatenate([mesh.boundary_nodes, new_b])
    return ids, nodes, bnodes


# ---------------------------------------------------------------------------
# interfaces
# ---------------------------------------------------------------------------

J = np.array([[0.0, -1.0], [1.0, 0.0]])


def interface_edges(mesh: Mesh) -> list[InterfaceEdge]:
    """Interface edges with unit normal from the lower-tag to the higher-tag side, tangent J nu."""
    idx = np.flatnonzero(mesh.interface_edge_mask)
    out = []
    for e in idx:
        i, j = mesh.edges[e]
        e0, e1 = mesh.edge_elements[e]
        if mesh.element_tag[e0] > mesh.element_tag[e1]:
            e0, e1 = e1, e0
        p, q = mesh.nodes[i], mesh.nodes[j]
        d = q - p
        length = float(np.hypot(*d))
        nu = np.array([d[1], -d[0]]) / length
        if nu @ (mesh.centroids[e1] - mesh.centroids[e0]) < 0:
            nu = -nu
        out.append(InterfaceEdge(
            nodes=(int(i), int(j)), low_element=int(e0), high_element=int(e1),
            low_tag=int(mesh.element_tag[e0]), high_tag=int(mesh.element_tag[e1]),
            normal=nu, tangent=J @ nu, length=length, midpoint=0.5 * (p + q),
        ))
    return out


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def write_mesh(mesh: Mesh, path) -> None:
    bflag = np.zeros(mesh.n_nodes, dtype=int)
    bflag[mesh.boundary_nodes] = 1
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"nodes {mesh.n_nodes}\n")
        for (x, y), b in zip(mesh.nodes, bflag):
            fh.write(f"{x:.17g} {y:.17g} {b}\n")
        fh.write(f"elements {mesh.n_elements}\n")
        for (i, j, k), t in zip(mesh.elements, mesh.element_tag):
            fh.write(f"{i} {j} {k} {t}\n")


def read_mesh(path, domain: DomainSpec | None = None) -> Mesh:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    head = lines[0]
    if head[0] != "nodes":
        raise ValueError(f"{path}: expected 'nodes N' header")
    n = int(head[1])
    node_rows = lines[1:1 + n]
    nodes = np.array([[float(r[0]), float(r[1])] for r in node_rows])
    bflag = np.array([int(r[2]) for r in node_rows])
    head = lines[1 + n]
    if head[0] != "elements":
        raise ValueError(f"{path}: expected 'elements M' header")
    m = int(head[1])
    rows = np.array([[int(v) for v in r] for r in lines[2 + n:2 + n + m]], dtype=np.int64).reshape(m, 4)
    return Mesh(nodes, rows[:, :3], rows[:, 3], np.flatnonzero(bflag), domain)
