"""Closed-form solutions and algebraic constructions used as ground truth.

Every solution is region-wise smooth. Region labels follow the mesh tags of
:mod:`meanco.geometry`, so a solution can be compared element by element with
a finite-element field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DomainSpec
from .pressure import QuadrantParams

J = np.array([[0.0, -1.0], [1.0, 0.0]])
E = np.array([[1.0, 0.0], [0.0, -1.0]])


def _pts(x):
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, 2), x.ndim == 1


def _det(G):
    return G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]


@dataclass
class ClosedFormSolution:
    """An exact field given branch by branch.

    ``branches`` maps a region tag to a pair (value, gradient) of vectorised
    callables on (N, 2) point arrays. ``region_of`` assigns tags to points.
    """

    name: str
    domain: DomainSpec
    branches: dict
    region_of: object
    pressure: dict
    params: dict = field(default_factory=dict)

    def region(self, x):
        p, single = _pts(x)
        r = np.asarray(self.region_of(p), dtype=int)
        return int(r[0]) if single else r

    def _eval(self, x, region, which):
        p, single = _pts(x)
        tags = self.region_of(p) if region is None else np.broadcast_to(np.asarray(region), (len(p),))
        shape = (len(p), 2) if which == 0 else (len(p), 2, 2)
        out = np.empty(shape)
        for t in np.unique(tags):
            sel = tags == t
            out[sel] = self.branches[int(t)][which](p[sel])
        return out[0] if single else out

    def value(self, x, region=None):
        return self._eval(x, region, 0)

    def gradient(self, x, region=None):
        return self._eval(x, region, 1)

    def det(self, x, region=None):
        return _det(self.gradient(x, region))

    def f(self, region):
        return float(self.pressure[int(region)])


# ---------------------------------------------------------------------------
# interface diagnostics evaluated with exact derivatives
# ---------------------------------------------------------------------------

def jump_residual(sol: ClosedFormSolution, x, nu, side_a, side_b):
    """Residual of 2∂_νu|_a − 2∂_νu|_b − (f_a − f_b) J∂_τu at interface points.

    ``nu`` points from region ``side_a`` into region ``side_b`` and τ = Jν.
    Returns (N, 2) residual vectors.
    """
    p, _ = _pts(x)
    nu = np.broadcast_to(np.asarray(nu, dtype=float), p.shape)
    tau = nu @ J.T
    Ga = sol.gradient(p, side_a)
    Gb = sol.gradient(p, side_b)
    fa, fb = sol.f(side_a), sol.f(side_b)
    dnu_a = np.einsum("nij,nj->ni", Ga, nu)
    dnu_b = np.einsum("nij,nj->ni", Gb, nu)
    dtau = np.einsum("nij,nj->ni", Ga, tau)
    return 2 * dnu_a - 2 * dnu_b - (fa - fb) * dtau @ J.T


def jump_law_defect(sol: ClosedFormSolution, x, nu, side_a, side_b):
    """(det_b − det_a) − ((f_a − f_b)/2)|∂_τu|² at interface points, plus the measured jump."""
    p, _ = _pts(x)
    nu = np.broadcast_to(np.asarray(nu, dtype=float), p.shape)
    tau = nu @ J.T
    dtau = np.einsum("nij,nj->ni", sol.gradient(p, side_a), tau)
    jump = sol.det(p, side_b) - sol.det(p, side_a)
    pred = 0.5 * (sol.f(side_a) - sol.f(side_b)) * np.sum(dtau**2, axis=1)
    return jump - pred, jump


def laplacian_fd(sol: ClosedFormSolution, x, region, h=1e-3):
    """Fourth-order central-difference Laplacian of the branch ``region``."""
    p, _ = _pts(x)
    w = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * h * h)
    offs = np.array([-2, -1, 0, 1, 2]) * h
    lap = np.zeros((len(p), 2))
    for axis in range(2):
        for wk, o in zip(w, offs):
            q = p.copy()
            q[:, axis] += o
            lap += wk * sol.value(q, region)
    return lap


# ---------------------------------------------------------------------------
# disk-disk
# ---------------------------------------------------------------------------

def disk_disk_constants(rho, M):
    den = 4.0 + M - M * rho**2
    if abs(den) <= 1e-14 * (4.0 + abs(M)):
        raise ZeroDivisionError("4 + M - M rho^2 vanishes")
    return 4.0 / den, (4.0 + M) / den


def disk_disk_jump(rho, M):
    """Closed-form determinant jump 8M/(Mρ² − M − 4)² across |x| = ρ."""
    return 8.0 * M / (M * rho**2 - M - 4.0) ** 2


def disk_disk_solution(rho: float, M: float) -> ClosedFormSolution:
    spec = DomainSpec.disk_disk(rho)
    zeta, xi = disk_disk_constants(rho, M)

    def inner_v(p):
        return zeta * p

    def inner_g(p):
        return np.broadcast_to(zeta * np.eye(2), (len(p), 2, 2)).copy()

    def outer_v(p):
        r2 = np.sum(p * p, axis=1)
        return (xi + (1 - xi) / r2)[:, None] * p

    def outer_g(p):
        r2 = np.sum(p * p, axis=1)
        G = (xi + (1 - xi) / r2)[:, None, None] * np.eye(2)
        return G - 2 * (1 - xi) * np.einsum("ni,nj->nij", p, p) / (r2**2)[:, None, None]

    def region_of(p):
        return np.where(np.sum(p * p, axis=1) < rho * rho, 0, 1)

    return ClosedFormSolution("diskdisk", spec, {0: (inner_v, inner_g), 1: (outer_v, outer_g)},
                              region_of, {0: float(M), 1: 0.0},
                              {"rho": rho, "M": M, "zeta": zeta, "xi": xi})


# ---------------------------------------------------------------------------
# disk-sector
# ---------------------------------------------------------------------------

def _sector_region(p):
    return np.where(np.abs(p[:, 1]) <= p[:, 0], 0, 1)


def disk_sector_basic(M: float) -> ClosedFormSolution:
    """u = (1, 2x₁x₂) in the sector |θ| ≤ π/4 and (1 + (M/2)(x₁² − x₂²), 2x₁x₂) outside."""

    def s_v(p):
        return np.stack([np.ones(len(p)), 2 * p[:, 0] * p[:, 1]], axis=1)

    def s_g(p):
        G = np.zeros((len(p), 2, 2))
        G[:, 1, 0] = 2 * p[:, 1]
        G[:, 1, 1] = 2 * p[:, 0]
        return G

    def p_v(p):
        return np.stack([1 + 0.5 * M * (p[:, 0] ** 2 - p[:, 1] ** 2), 2 * p[:, 0] * p[:, 1]], axis=1)

    def p_g(p):
        G = s_g(p)
        G[:, 0, 0] = M * p[:, 0]
        G[:, 0, 1] = -M * p[:, 1]
        return G

    return ClosedFormSolution("sector", DomainSpec.disk_sector(), {0: (s_v, s_g), 1: (p_v, p_g)},
                              _sector_region, {0: float(M), 1: 0.0}, {"M": M})


@dataclass(frozen=True)
class FourierSectorCoeffs:
    """Coefficients A_{4k}, A_{4k+2}, B_{4k}, B_{4k+2} (k = 0..K−1) of the sector development."""

    A4k: np.ndarray
    A4k2: np.ndarray
    B4k: np.ndarray
    B4k2: np.ndarray
    M: float

    def __post_init__(self):
        arrs = [np.asarray(a, dtype=float).ravel() for a in (self.A4k, self.A4k2, self.B4k, self.B4k2)]
        K = max(len(a) for a in arrs)
        if K < 1:
            raise ValueError("truncation K must be at least 1")
        arrs = [np.pad(a, (0, K - len(a))) for a in arrs]
        if not all(np.all(np.isfinite(a)) for a in arrs):
            raise ValueError("coefficients must be finite")
        for name, a in zip(("A4k", "A4k2", "B4k", "B4k2"), arrs):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def K(self):
        return len(self.A4k)

    @classmethod
    def zeros(cls, K, M):
        z = np.zeros(K)
        return cls(z, z, z, z, M)

    @classmethod
    def basic(cls, M, K=1):
        """Coefficients reproducing :func:`disk_sector_basic`: A₀ = 1, B₂ = 1."""
        A4k, B4k2 = np.zeros(K), np.zeros(K)
        A4k[0] = 1.0
        B4k2[0] = 1.0
        return cls(A4k, np.zeros(K), np.zeros(K), B4k2, M)

    @classmethod
    def random(cls, K, M, rng):
        return cls(*(rng.standard_normal(K) for _ in range(4)), M)

    def coupled(self):
        """Coefficients of the complementary branch: (A4k, A4k2 + M/2 B4k2, B4k + M/2 A4k, B4k2)."""
        h = 0.5 * self.M
        return self.A4k, self.A4k2 + h * self.B4k2, self.B4k + h * self.A4k, self.B4k2

    def tail_norm(self, R=1.0):
        """Size of the last retained mode group at radius R, as a truncation indicator."""
        k = self.K - 1
        last = np.abs([self.A4k[k], self.A4k2[k], self.B4k[k], self.B4k2[k]])
        return float(np.sum(last * np.array([R ** (4 * k), R ** (4 * k + 2)] * 2)))


def _harmonic_series(p, a4k, a4k2, b4k, b4k2):
    """Value and gradient of Σ a_j Re z^j e₁ + b_j Im z^j e₂ over j ∈ {4k, 4k+2}."""
    z = p[:, 0] + 1j * p[:, 1]
    K = len(a4k)
    js = np.concatenate([4 * np.arange(K), 4 * np.arange(K) + 2])
    a = np.concatenate([a4k, a4k2])
    b = np.concatenate([b4k, b4k2])
    zj = z[:, None] ** js[None, :]
    # derivative j z^{j-1}, written to avoid 0 ** -1
    dz = np.where(js[None, :] > 0, js[None, :] * z[:, None] ** np.maximum(js - 1, 0)[None, :], 0)
    val = np.stack([zj.real @ a, zj.imag @ b], axis=1)
    G = np.empty((len(p), 2, 2))
    G[:, 0, 0] = dz.real @ a
    G[:, 0, 1] = -(dz.imag @ a)
    G[:, 1, 0] = dz.imag @ b
    G[:, 1, 1] = dz.real @ b
    return val, G


def disk_sector_series(c: FourierSectorCoeffs) -> ClosedFormSolution:
    s = (c.A4k, c.A4k2, c.B4k, c.B4k2)
    q = c.coupled()
    branches = {
        0: (lambda p: _harmonic_series(p, *s)[0], lambda p: _harmonic_series(p, *s)[1]),
        1: (lambda p: _harmonic_series(p, *q)[0], lambda p: _harmonic_series(p, *q)[1]),
    }
    return ClosedFormSolution("sector-series", DomainSpec.disk_sector(), branches, _sector_region,
                              {0: float(c.M), 1: 0.0}, {"M": c.M, "K": c.K})


@dataclass(frozen=True)
class PreparedBoundaryData:
    """Boundary values on |x| = 1 from a suitably prepared two-branch development."""

    coeffs: FourierSectorCoeffs

    def at_angle(self, theta):
        theta = np.asarray(theta, dtype=float).ravel()
        c = self.coeffs
        in_sector = np.abs(theta) <= math.pi / 4 + 1e-15
        k = np.arange(c.K)
        c4 = np.cos(np.outer(theta, 4 * k))
        c42 = np.cos(np.outer(theta, 4 * k + 2))
        s4 = np.sin(np.outer(theta, 4 * k))
        s42 = np.sin(np.outer(theta, 4 * k + 2))
        a4, a42, b4, b42 = c.A4k, c.A4k2, c.B4k, c.B4k2
        pa4, pa42, pb4, pb42 = c.coupled()
        u1 = np.where(in_sector, c4 @ a4 + c42 @ a42, c4 @ pa4 + c42 @ pa42)
        u2 = np.where(in_sector, s4 @ b4 + s42 @ b42, s4 @ pb4 + s42 @ pb42)
        return np.stack([u1, u2], axis=1)

    def __call__(self, points):
        p, _ = _pts(points)
        return self.at_angle(np.arctan2(p[:, 1], p[:, 0]))

    def on_mesh(self, mesh):
        from .fem import BoundaryData
        return BoundaryData.from_function(mesh, self)


def fit_suitably_prepared(c: FourierSectorCoeffs) -> PreparedBoundaryData:
    return PreparedBoundaryData(c)


# ---------------------------------------------------------------------------
# insulation strip
# ---------------------------------------------------------------------------

def insulation_matrices(xi, eta, f1, f2, f3):
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    A2 = np.column_stack([eta, xi])
    A1 = np.column_stack([eta - 0.5 * (f2 - f1) * (J @ xi), xi])
    A3 = np.column_stack([eta + 0.5 * (f3 - f2) * (J @ xi), xi])
    return A1, A2, A3


def insulation_affine(xi, eta, f1, f2, f3) -> ClosedFormSolution:
    A1, A2, A3 = insulation_matrices(xi, eta, f1, f2, f3)
    # offsets keep u continuous across x₁ = ∓½
    c1 = (A2 - A1) @ np.array([-0.5, 0.0])
    c3 = (A2 - A3) @ np.array([0.5, 0.0])

    def affine(A, c):
        return (lambda p: p @ A.T + c, lambda p: np.broadcast_to(A, (len(p), 2, 2)).copy())

    def region_of(p):
        return 1 + (p[:, 0] > -0.5).astype(int) + (p[:, 0] > 0.5).astype(int)

    return ClosedFormSolution("insulation", DomainSpec.insulation_strip(),
                              {1: affine(A1, c1), 2: affine(A2, np.zeros(2)), 3: affine(A3, c3)},
                              region_of, {1: float(f1), 2: float(f2), 3: float(f3)},
                              {"xi": list(map(float, xi)), "eta": list(map(float, eta)),
                               "A1": A1.tolist(), "A2": A2.tolist(), "A3": A3.tolist()})


# ---------------------------------------------------------------------------
# quadrant point contact
# ---------------------------------------------------------------------------

def alpha_of_beta(beta):
    return 2.0 * beta / math.sqrt(beta * beta + 4.0)


def quadrant_diagonals(beta):
    s = math.sqrt(beta * beta + 4.0)
    b = beta
    return [
        np.diag([-4 * b * b, -4 * b * (2 + s)]),
        np.diag([8 * b * b / s, -4 * b * (2 + s)]),
        np.diag([8 * b * b / s, -8 * b * (1 + 2 / s)]),
        np.diag([-4 * b * b, -8 * b * (1 + 2 / s)]),
    ]


def _quadrant_region(p):
    right = p[:, 0] >= 0
    up = p[:, 1] >= 0
    return np.select([right & up, ~right & up, ~right & ~up], [1, 2, 3], default=4)


def quadrant_params_for_beta(beta) -> QuadrantParams:
    return QuadrantParams.from_alpha_beta(alpha_of_beta(beta), beta)


def quadrant_building_block(n: int, beta: float) -> ClosedFormSolution:
    """u_n = D_k (Re zⁿ, Im zⁿ) on the quadrant Q_k, with the pressure from α = 2β/√(β²+4)."""
    if int(n) != n or n % 2 == 0:
        raise ValueError("n must be an odd integer")
    if beta == 0:
        raise ValueError("beta must be nonzero")
    n = int(n)
    D = quadrant_diagonals(beta)
    qp = quadrant_params_for_beta(beta)

    def make(Dk):
        def v(p):
            zn = (p[:, 0] + 1j * p[:, 1]) ** n
            return np.stack([zn.real, zn.imag], axis=1) @ Dk.T

        def g(p):
            w = n * (p[:, 0] + 1j * p[:, 1]) ** (n - 1)
            H = np.empty((len(p), 2, 2))
            H[:, 0, 0], H[:, 0, 1] = w.real, -w.imag
            H[:, 1, 0], H[:, 1, 1] = w.imag, w.real
            return np.einsum("ij,njk->nik", Dk, H)
        return v, g

    f = dict(zip((1, 2, 3, 4), qp.pressures))
    sol = ClosedFormSolution("quadrant", DomainSpec.quadrant_square(),
                             {k + 1: make(D[k]) for k in range(4)}, _quadrant_region, f,
                             {"n": n, "beta": beta, "alpha": qp.alpha, "sigma": qp.sigma, "tau": qp.tau})
    sol.polar_value = lambda R, theta, k: (R**n) * (D[k - 1] @ np.array([np.cos(n * theta), np.sin(n * theta)]))
    return sol


# interfaces of the quadrant square: (low tag, high tag, unit normal low→high, ray direction)
QUADRANT_INTERFACES = (
    (1, 2, np.array([-1.0, 0.0]), np.array([0.0, 1.0])),
    (2, 3, np.array([0.0, -1.0]), np.array([-1.0, 0.0])),
    (3, 4, np.array([1.0, 0.0]), np.array([0.0, -1.0])),
    (1, 4, np.array([0.0, -1.0]), np.array([1.0, 0.0])),
)


def _A(w):
    mu = np.array([1.0, 1.0])
    nu = np.array([-1.0, 1.0])
    return np.eye(2) + w * np.outer(nu, mu)


def quadrant_recurrence_check(alpha, beta, gamma, delta, parity):
    """Closure defect of the four-quadrant transfer around the origin."""
    if parity == "even":
        prod = _A(delta / 4) @ _A(gamma / 4) @ _A(-beta / 4) @ _A(alpha / 4)
        return float(np.linalg.norm(prod - _A((delta + gamma - beta + alpha) / 4)))
    if parity == "odd":
        C = _A(delta / 4) @ _A(gamma / 4).T @ _A(-beta / 4) @ _A(alpha / 4).T
        return float(abs(np.linalg.det(C - np.eye(2))))
    raise ValueError("parity must be 'even' or 'odd'")


def quadrant_transfer_matrix(alpha, beta, gamma, delta):
    return _A(delta / 4) @ _A(gamma / 4).T @ _A(-beta / 4) @ _A(alpha / 4).T


def quadrant_eigvectors(beta):
    """The four vectors linked by v2 = Aᵀ(α/4)v1, v3 = A(−β/4)v2, v4 = Aᵀ(γ/4)v3, v1 = A(δ/4)v4."""
    a = alpha_of_beta(beta)
    b, g, d = beta, -beta, -a
    p = b * b * a + 4 * (b + a)
    if p == 0:
        raise ValueError("p = 0: eigenvector construction requires p != 0")
    v1 = np.array([2 * b * g - p, p + 2 * b * g])
    v2 = np.array([2 * g * d - p, p + 2 * g * d])
    v3 = np.array([2 * g * d + 4 * d - 4 * b, 2 * g * d + 4 * b - 4 * d])
    v4 = np.array([2 * b * g + 4 * d - 4 * b, 2 * b * g + 4 * b - 4 * d])
    return v1, v2, v3, v4


def quadrant_link_residuals(beta):
    a = alpha_of_beta(beta)
    b, g, d = beta, -beta, -a
    v1, v2, v3, v4 = quadrant_eigvectors(beta)
    links = [
        (v2, _A(a / 4).T @ v1),
        (v3, _A(-b / 4) @ v2),
        (v4, _A(g / 4).T @ v3),
        (v1, _A(d / 4) @ v4),
    ]
    return [float(np.linalg.norm(x - y)) for x, y in links]


# ---------------------------------------------------------------------------
# 3D algebra
# ---------------------------------------------------------------------------

def cof3d(A):
    A = np.asarray(A, dtype=float)
    return np.stack([np.cross(A[..., 1, :], A[..., 2, :]),
                     np.cross(A[..., 2, :], A[..., 0, :]),
                     np.cross(A[..., 0, :], A[..., 1, :])], axis=-2)


def cof3d_margin(A):
    """|A|² − √3|cof A| from the singular values; nonnegative for every 3×3 matrix."""
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    s2 = s**2
    cof2 = s2[..., 0] * s2[..., 1] + s2[..., 1] * s2[..., 2] + s2[..., 2] * s2[..., 0]
    return s2.sum(axis=-1) - math.sqrt(3.0) * np.sqrt(cof2)


def _levi_civita():
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1.0
        eps[i, k, j] = -1.0
    return eps


_EPS = _levi_civita()


def cross_term_3d(A, B):
    """(A, B)_ij = ε_iab ε_jcd A_ac B_bd."""
    return np.einsum("iab,jcd,...ac,...bd->...ij", _EPS, _EPS, np.asarray(A, float), np.asarray(B, float))
