"""Post-processing of P1 solutions: determinants, interface jumps, residuals and errors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import assemble_K2, p1_gradients
from .geometry import J, Mesh, interface_edges
from .pressure import PressureField


def nodal_pairs(mesh: Mesh, u) -> np.ndarray:
    n = mesh.n_nodes
    u = np.asarray(u, dtype=float)
    return np.stack([u[:n], u[n:]], axis=1)


def element_gradients(mesh: Mesh, u) -> np.ndarray:
    """(m, 2, 2) constant gradient of u_h on each element."""
    _, g = p1_gradients(mesh)
    U = nodal_pairs(mesh, u)[mesh.elements]
    return np.einsum("eic,eid->ecd", U, g)


def det_per_element(mesh: Mesh, u) -> np.ndarray:
    G = element_gradients(mesh, u)
    return G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] * G[:, 1, 0]


@dataclass(frozen=True)
class JumpRecord:
    midpoint: tuple
    length: float
    low_tag: int
    high_tag: int
    det_in: float
    det_out: float
    jump: float
    dtau_norm: float
    predicted_jump: float


@dataclass(frozen=True)
class JumpReport:
    records: tuple

    @property
    def jumps(self):
        return np.array([r.jump for r in self.records])

    @property
    def predicted(self):
        return np.array([r.predicted_jump for r in self.records])

    def aggregates(self):
        if not self.records:
            return {"count": 0}
        j = self.jumps
        p = self.predicted
        return {
            "count": len(j),
            "jump_min": float(j.min()),
            "jump_max": float(j.max()),
            "jump_mean": float(j.mean()),
            "abs_jump_mean": float(np.abs(j).mean()),
            "predicted_mean": float(p.mean()),
            "law_relative_l2_misfit": float(np.linalg.norm(j - p) / max(np.linalg.norm(p), 1e-300)),
        }


def _edge_tangential_derivative(mesh, U, edge):
    """Derivative of the P1 trace along τ, from the two nodal values of the edge."""
    i, j = edge.nodes
    d = mesh.nodes[j] - mesh.nodes[i]
    sign = 1.0 if d @ edge.tangent >= 0 else -1.0
    return sign * (U[j] - U[i]) / edge.length


def interface_jump(mesh: Mesh, u, f: PressureField | None = None) -> JumpReport:
    """Determinant jump across every interface edge.

    The "in" side is the lower tag (ν points away from it). The predicted jump
    uses ((f_in − f_out)/2)|∂_τu|², which reduces to (M/2)|∂_τu|² for an island.
    """
    dets = det_per_element(mesh, u)
    U = nodal_pairs(mesh, u)
    recs = []
    for e in interface_edges(mesh):
        dt = _edge_tangential_derivative(mesh, U, e)
        df = 0.0 if f is None else f.value(e.low_tag) - f.value(e.high_tag)
        nrm2 = float(dt @ dt)
        recs.append(JumpRecord(
            midpoint=(float(e.midpoint[0]), float(e.midpoint[1])), length=e.length,
            low_tag=e.low_tag, high_tag=e.high_tag,
            det_in=float(dets[e.low_element]), det_out=float(dets[e.high_element]),
            jump=float(dets[e.high_element] - dets[e.low_element]),
            dtau_norm=float(np.sqrt(nrm2)), predicted_jump=0.5 * df * nrm2,
        ))
    return JumpReport(tuple(recs))


def jump_condition_residual(mesh: Mesh, u, f: PressureField):
    """Per-edge ‖2∂_νu|_in − 2∂_νu|_out − (f_in − f_out)J∂_τu‖ and the L²(interface) aggregate."""
    G = element_gradients(mesh, u)
    U = nodal_pairs(mesh, u)
    edges = interface_edges(mesh)
    res = np.empty(len(edges))
    lengths = np.empty(len(edges))
    for k, e in enumerate(edges):
        dt = _edge_tangential_derivative(mesh, U, e)
        df = f.value(e.low_tag) - f.value(e.high_tag)
        r = 2 * G[e.low_element] @ e.normal - 2 * G[e.high_element] @ e.normal - df * (J @ dt)
        res[k] = np.linalg.norm(r)
        lengths[k] = e.length
    agg = float(np.sqrt(np.sum(lengths * res**2))) if len(edges) else 0.0
    return res, agg


# symmetric 3-point rule, degree 2, barycentric points and weights on the reference triangle
_GAUSS_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
_GAUSS_W = np.array([1 / 3, 1 / 3, 1 / 3])


def errors_vs_oracle(mesh: Mesh, u, oracle):
    """(‖u_h − u‖_L², |u_h − u|_H¹) with the oracle branch chosen by element tag."""
    area = np.abs(mesh.signed_areas)
    X = mesh.nodes[mesh.elements]  # (m, 3, 2)
    U = nodal_pairs(mesh, u)[mesh.elements]
    Gh = element_gradients(mesh, u)
    l2 = 0.0
    h1 = 0.0
    tags = mesh.element_tag
    for q in range(3):
        bary = _GAUSS_BARY[q]
        pts = np.einsum("k,ekd->ed", bary, X)
        uh = np.einsum("k,ekd->ed", bary, U)
        ue = oracle.value(pts, tags)
        ge = oracle.gradient(pts, tags)
        l2 += _GAUSS_W[q] * np.sum(area * np.sum((uh - ue) ** 2, axis=1))
        h1 += _GAUSS_W[q] * np.sum(area * np.sum((Gh - ge) ** 2, axis=(1, 2)))
    return float(np.sqrt(l2)), float(np.sqrt(h1))


def interpolate(mesh: Mesh, oracle) -> np.ndarray:
    """Nodal interpolant of an oracle, with each node evaluated on its own region."""
    vals = oracle.value(mesh.nodes)
    return np.concatenate([vals[:, 0], vals[:, 1]])


def weighted_det_integral(mesh: Mesh, f, u, *, K2=None) -> float:
    """∫ f det∇u_h, evaluated as ½uᵀK2u."""
    K2 = assemble_K2(mesh, f) if K2 is None else K2
    u = np.asarray(u, dtype=float)
    return float(0.5 * (u @ (K2 @ u)))


def det_summary(mesh: Mesh, u) -> dict:
    d = det_per_element(mesh, u)
    return {"det_min": float(d.min()), "det_max": float(d.max())}
