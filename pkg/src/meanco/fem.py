"""P1 finite elements for F(u) = ∫|∇u|² + f det∇u on 2-vector fields.

Degrees of freedom are ordered u1 at every node followed by u2 at every node.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Mesh
from .pressure import VIOLATED, PressureField, gate_for


class DegenerateElementError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


def p1_gradients(mesh: Mesh):
    """Return (areas, grads) with grads[e, i] the gradient of the i-th hat function on element e."""
    P = mesh.nodes[mesh.elements]  # (m, 3, 2)
    d1 = P[:, 1] - P[:, 0]
    d2 = P[:, 2] - P[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    bad = np.flatnonzero(np.abs(det) <= 1e-300 + 1e-14 * (np.abs(d1).sum(1) * np.abs(d2).sum(1)))
    if bad.size:
        raise DegenerateElementError(f"degenerate element {int(bad[0])} (zero area)")
    area = 0.5 * det
    # gradient of barycentric coordinate i is rot(opposite edge) / (2 area)
    g = np.empty((len(det), 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        e = P[:, k] - P[:, j]
        g[:, i, 0] = -e[:, 1] / det
        g[:, i, 1] = e[:, 0] / det
    return area, g


def _scatter(mesh, local, row_off=0, col_off=0):
    """Build a COO triplet set from per-element 3×3 blocks in element order."""
    el = mesh.elements
    rows = np.repeat(el, 3, axis=1) + row_off
    cols = np.tile(el, (1, 3)) + col_off
    return rows.ravel(), cols.ravel(), local.reshape(len(el), 9).ravel()


def scalar_stiffness(mesh: Mesh) -> sp.csr_matrix:
    area, g = p1_gradients(mesh)
    local = area[:, None, None] * np.einsum("eid,ejd->eij", g, g)
    r, c, v = _scatter(mesh, local)
    n = mesh.n_nodes
    return sp.csr_matrix((v, (r, c)), shape=(n, n))


def assemble_K1(mesh: Mesh) -> sp.csr_matrix:
    """Block-diagonal Dirichlet stiffness; uᵀK1u = ∫|∇u_h|²."""
    A = scalar_stiffness(mesh)
    return sp.block_diag([A, A], format="csr")


def assemble_K2(mesh: Mesh, f: PressureField | np.ndarray) -> sp.csr_matrix:
    """Cofactor form ψᵀK2u = ∫ f cof∇ψ : ∇u_h, so that uᵀK2u = 2∫ f det∇u_h.

    With u = Σ u1_i φ_i e1 + u2_j φ_j e2, cof∇ψ : ∇u pairs only the u1 and u2
    blocks, with local entry f·area·(g_i × g_j).
    """
    fe = f.element_values(mesh) if isinstance(f, PressureField) else np.asarray(f, dtype=float)
    area, g = p1_gradients(mesh)
    cross = g[:, :, None, 0] * g[:, None, :, 1] - g[:, :, None, 1] * g[:, None, :, 0]
    C = (fe * area)[:, None, None] * cross
    n = mesh.n_nodes
    r1, c1, v1 = _scatter(mesh, C, 0, n)
    r2, c2, v2 = _scatter(mesh, np.transpose(C, (0, 2, 1)), n, 0)
    return sp.csr_matrix((np.concatenate([v1, v2]), (np.concatenate([r1, r2]), np.concatenate([c1, c2]))),
                         shape=(2 * n, 2 * n))


@dataclass(frozen=True)
class BoundaryData:
    nodes: np.ndarray
    values: np.ndarray  # (len(nodes), 2)

    @classmethod
    def from_function(cls, mesh: Mesh, fun):
        nodes = np.asarray(mesh.boundary_nodes, dtype=int)
        vals = np.asarray(fun(mesh.nodes[nodes]), dtype=float).reshape(len(nodes), 2)
        return cls(nodes, vals)

    @classmethod
    def identity(cls, mesh: Mesh):
        return cls.from_function(mesh, lambda p: p)

    def check(self, mesh: Mesh):
        if not np.array_equal(np.sort(self.nodes), np.sort(np.asarray(mesh.boundary_nodes))):
            raise ValueError("boundary data must be defined on exactly the mesh boundary nodes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("boundary data must be finite")


def _dofs(mesh, nodes):
    nodes = np.asarray(nodes, dtype=int)
    return np.concatenate([nodes, nodes + mesh.n_nodes])


def interior_dofs(mesh: Mesh):
    return _dofs(mesh, mesh.interior_nodes)


def boundary_dofs(mesh: Mesh):
    return _dofs(mesh, mesh.boundary_nodes)


def el_operator(mesh: Mesh, f) -> sp.csr_matrix:
    return (2.0 * assemble_K1(mesh) + assemble_K2(mesh, f)).tocsr()


def lift(mesh: Mesh, g0: BoundaryData) -> np.ndarray:
    """Nodal vector equal to g0 on the boundary and zero inside."""
    u = np.zeros(2 * mesh.n_nodes)
    u[g0.nodes] = g0.values[:, 0]
    u[g0.nodes + mesh.n_nodes] = g0.values[:, 1]
    return u


def solve_el(mesh: Mesh, f: PressureField, g0: BoundaryData, *, operator=None) -> np.ndarray:
    """Solve (2K1 + K2)u = 0 on interior rows with u = g0 on the boundary."""
    g0.check(mesh)
    if isinstance(f, PressureField) and gate_for(f).status == VIOLATED:
        warnings.warn(f"pressure {f.family} {f.params} violates mean coercivity; solving anyway",
                      RuntimeWarning, stacklevel=2)
    L = el_operator(mesh, f) if operator is None else operator
    u = lift(mesh, g0)
    I = interior_dofs(mesh)
    if I.size == 0:
        return u
    A = L[I][:, I].tocsc()
    rhs = -(L[I] @ u)
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            x = spla.spsolve(A, rhs)
        except (spla.MatrixRankWarning, RuntimeError) as exc:
            raise SolverError(f"singular interior system: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("interior solve produced non-finite values")
    u[I] = x
    scale = 1.0 + float(np.max(np.abs(g0.values), initial=0.0))
    res = el_residual(mesh, f, u, operator=L)
    if res >= 1e-8 * scale:
        raise SolverError(f"EL residual {res:.3e} above tolerance {1e-8 * scale:.3e}")
    return u


def el_residual(mesh: Mesh, f, u, *, operator=None) -> float:
    L = el_operator(mesh, f) if operator is None else operator
    I = interior_dofs(mesh)
    if I.size == 0:
        return 0.0
    return float(np.max(np.abs((L @ u)[I])))


def energy_D(mesh: Mesh, u, *, K1=None) -> float:
    K1 = assemble_K1(mesh) if K1 is None else K1
    return float(u @ (K1 @ u))


def energy_F(mesh: Mesh, f, u, *, K1=None, K2=None) -> float:
    K1 = assemble_K1(mesh) if K1 is None else K1
    K2 = assemble_K2(mesh, f) if K2 is None else K2
    return float(u @ (K1 @ u) + 0.5 * (u @ (K2 @ u)))


def bilinear_a(mesh: Mesh, f, u, phi, *, operator=None) -> float:
    """a_h(u, φ) = φᵀ(2K1 + K2)u, the first variation of F_h at u in direction φ."""
    L = el_operator(mesh, f) if operator is None else operator
    return float(phi @ (L @ u))


def min_coercivity_eig(mesh: Mesh, f, *, tol=1e-10, maxiter=5000) -> float:
    """Smallest γ with (K1 + ½K2)v = γK1v on interior dofs."""
    I = interior_dofs(mesh)
    if I.size == 0:
        raise ValueError("mesh has no interior nodes")
    K1 = assemble_K1(mesh)[I][:, I].tocsc()
    K2 = assemble_K2(mesh, f)[I][:, I].tocsc()
    fe = f.element_values(mesh) if isinstance(f, PressureField) else np.asarray(f, dtype=float)
    fmax = float(np.max(np.abs(fe), initial=0.0))
    if fmax == 0.0:
        return 1.0
    A = (K1 + 0.5 * K2).tocsc()
    # Pointwise |det F| ≤ |F|²/2, so the spectrum lies in [1 - fmax/2, 1 + fmax/2].
    sigma = 1.0 - 0.5 * fmax - 1e-3
    try:
        vals = spla.eigsh(A, k=1, M=K1, sigma=sigma, which="LM", tol=tol, maxiter=maxiter,
                          return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise SolverError(f"coercivity eigenproblem did not converge in {maxiter} iterations") from exc
    return float(np.min(vals))


@dataclass
class CrosscheckResult:
    u: np.ndarray
    energies: list
    iterations: int


def minimize_energy_crosscheck(mesh: Mesh, f, g0: BoundaryData, *, tol=1e-13, maxiter=20000,
                               callback=None) -> CrosscheckResult:
    """Minimise F_h over fields equal to g0 on ∂Ω by Jacobi-preconditioned conjugate gradients.

    Each step is an exact line search on the quadratic, so the recorded energies
    never increase. Negative curvature along a search direction means F_h is not
    convex on the discrete space and is reported as divergence.
    """
    g0.check(mesh)
    L = el_operator(mesh, f)
    K1 = assemble_K1(mesh)
    K2 = assemble_K2(mesh, f)
    u = lift(mesh, g0)
    I = interior_dofs(mesh)
    A = L[I][:, I].tocsr()
    b = -(L[I] @ u)
    x = np.zeros(I.size)
    dinv = 1.0 / A.diagonal()
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    bnorm = max(np.linalg.norm(b), 1e-300)
    energies = [energy_F(mesh, f, u, K1=K1, K2=K2)]
    it = 0
    while it < maxiter and np.linalg.norm(r) > tol * bnorm:
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0:
            raise SolverError("energy not convex along a search direction; minimisation diverges")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
        u[I] = x
        energies.append(energy_F(mesh, f, u, K1=K1, K2=K2))
        if callback is not None:
            callback(it, u)
    if np.linalg.norm(r) > tol * bnorm * 1e3:
        raise SolverError(f"crosscheck did not converge in {maxiter} iterations")
    return CrosscheckResult(u.copy(), energies, it)
