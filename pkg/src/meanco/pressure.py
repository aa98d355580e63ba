"""Pressure fields, sufficient mean-coercivity gates and point-contact tuning."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CERTIFIED = "Certified"
BOUNDARY = "Boundary"
UNKNOWN = "Unknown"
VIOLATED = "Violated"

EQ_TOL = 1e-12


@dataclass(frozen=True)
class PressureField:
    values_by_tag: dict
    family: str = "Custom"
    params: dict = field(default_factory=dict)

    @classmethod
    def island(cls, M, island_tag=0, outer_tag=1):
        return cls({island_tag: float(M), outer_tag: 0.0}, "Island", {"M": float(M)})

    @classmethod
    def insulation(cls, f1, f2, f3):
        return cls({1: float(f1), 2: float(f2), 3: float(f3)}, "Insulation",
                   {"f1": float(f1), "f2": float(f2), "f3": float(f3)})

    @classmethod
    def quadrant(cls, sigma, tau):
        s, t = float(sigma), float(tau)
        return cls({1: -(t + s), 2: s, 3: t - s, 4: s}, "Quadrant", {"sigma": s, "tau": t})

    @classmethod
    def constant(cls, value, tags):
        return cls({t: float(value) for t in tags}, "Custom", {"value": float(value)})

    def element_values(self, mesh):
        tags = np.unique(mesh.element_tag)
        missing = [int(t) for t in tags if int(t) not in self.values_by_tag]
        if missing:
            raise KeyError(f"pressure has no value for mesh tag(s) {missing}")
        lut = {int(k): float(v) for k, v in self.values_by_tag.items()}
        return np.array([lut[int(t)] for t in mesh.element_tag])

    def value(self, tag):
        return float(self.values_by_tag[tag])

    def max_abs(self):
        return max(abs(float(v)) for v in self.values_by_tag.values())

    def describe(self):
        return {"family": self.family, "params": dict(self.params),
                "values_by_tag": {str(k): float(v) for k, v in sorted(self.values_by_tag.items())}}


@dataclass(frozen=True)
class CoercivityVerdict:
    status: str
    gamma_lower_bound: float | None
    reason: str

    @property
    def certified(self):
        return self.status == CERTIFIED


@dataclass(frozen=True)
class QuadrantParams:
    """Differences of the point-contact pressure f = (f1, f2, f3, f4) on Q1..Q4."""

    sigma: float
    tau: float

    @property
    def pressures(self):
        s, t = self.sigma, self.tau
        return (-(t + s), s, t - s, s)

    @property
    def alpha(self):
        f1, f2, _, _ = self.pressures
        return f2 - f1

    @property
    def beta(self):
        _, f2, f3, _ = self.pressures
        return f3 - f2

    @property
    def gamma(self):
        _, _, f3, f4 = self.pressures
        return f4 - f3

    @property
    def delta(self):
        f1, _, _, f4 = self.pressures
        return f1 - f4

    @property
    def p(self):
        a, b, g, d = self.alpha, self.beta, self.gamma, self.delta
        return b * g * d + 4 * b - 4 * d

    @property
    def Delta(self):
        a, b, g, d = self.alpha, self.beta, self.gamma, self.delta
        return a * b * g * d + 4 * (b - d) * (a + g)

    @classmethod
    def from_alpha_beta(cls, alpha, beta):
        # alpha = 2 sigma + tau, beta = tau - 2 sigma
        return cls(sigma=(alpha - beta) / 4.0, tau=(alpha + beta) / 2.0)


def _cmp(x, threshold):
    if abs(x - threshold) <= EQ_TOL * max(1.0, abs(threshold)):
        return 0
    return -1 if x < threshold else 1


def gate_island(M) -> CoercivityVerdict:
    c = _cmp(abs(M), 4.0)
    if c < 0:
        return CoercivityVerdict(CERTIFIED, 1.0 - abs(M) / 4.0, "|M| < 4")
    if c == 0:
        return CoercivityVerdict(BOUNDARY, None, "|M| = 4: nonnegative, no positive gamma")
    return CoercivityVerdict(VIOLATED, None, "|M| > 4: F takes negative values")


def gate_insulation(f1, f2, f3) -> CoercivityVerdict:
    if abs(f2 - 0.5 * (f1 + f3)) > EQ_TOL * max(1.0, abs(f1), abs(f3)):
        return CoercivityVerdict(UNKNOWN, None, "f2 != (f1 + f3)/2: sufficient conditions not met")
    s = abs(f2 - f1)
    if s < 2.0:
        return CoercivityVerdict(CERTIFIED, 1.0 - s / 2.0, "f2 = (f1 + f3)/2 and |f2 - f1| < 2 < c")
    return CoercivityVerdict(UNKNOWN, None, "constant c > 2 is not quantified")


def feasibility_y(sigma, tau):
    return abs(sigma) / 2.0 + abs(tau) / math.sqrt(8.0)


def gate_quadrant(sigma, tau) -> CoercivityVerdict:
    y = feasibility_y(sigma, tau)
    c = _cmp(y, 1.0)
    if c < 0:
        return CoercivityVerdict(CERTIFIED, 1.0 - y,
                                 f"y = {y:.6g} < 1: lambda in (|sigma|/2, 1 - |tau|/sqrt 8) exists")
    if c == 0:
        return CoercivityVerdict(BOUNDARY, None, "y = 1: only nonnegativity holds")
    return CoercivityVerdict(UNKNOWN, None, f"y = {y:.6g} > 1: sufficient condition fails")


def gate_3d(T0) -> CoercivityVerdict:
    norm = float(np.linalg.norm(np.asarray(T0, dtype=float)))
    bound = 2.0 * math.sqrt(3.0)
    c = _cmp(norm, bound)
    if c < 0:
        return CoercivityVerdict(CERTIFIED, 1.0 - norm / bound, "|T0| < 2 sqrt 3")
    if c == 0:
        return CoercivityVerdict(BOUNDARY, None, "|T0| = 2 sqrt 3: nonnegative, no positive gamma")
    return CoercivityVerdict(UNKNOWN, None, "|T0| > 2 sqrt 3: sufficient condition fails")


def gate_for(pressure: PressureField) -> CoercivityVerdict:
    """Dispatch to the gate matching the pressure family."""
    p = pressure.params
    if pressure.family == "Island":
        return gate_island(p["M"])
    if pressure.family == "Insulation":
        return gate_insulation(p["f1"], p["f2"], p["f3"])
    if pressure.family == "Quadrant":
        return gate_quadrant(p["sigma"], p["tau"])
    vals = set(float(v) for v in pressure.values_by_tag.values())
    if len(vals) == 1:
        # a constant multiple of a null Lagrangian
        return CoercivityVerdict(CERTIFIED, 1.0, "constant pressure")
    return CoercivityVerdict(UNKNOWN, None, "no gate for custom pressure")


# ---------------------------------------------------------------------------
# the quartic h(sigma, tau) = 0 linking sigma and tau
# ---------------------------------------------------------------------------

def quartic_h(sigma, tau):
    return tau**4 - 8 * tau**2 * sigma**2 + 32 * tau * sigma + 16 * sigma**4


def quartic_h_sigma(sigma, tau):
    return -16 * tau**2 * sigma + 32 * tau + 64 * sigma**3


class BracketError(ValueError):
    pass


def _bisect_newton(fun, dfun, a, b, ftol):
    fa, fb = fun(a), fun(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise BracketError(f"no sign change on [{a}, {b}]: h = {fa}, {fb}")
    x = 0.5 * (a + b)
    for _ in range(200):
        x = 0.5 * (a + b)
        fx = fun(x)
        if abs(fx) < ftol or b - a < 1e-15 * max(1.0, abs(x)):
            break
        if np.sign(fx) == np.sign(fa):
            a, fa = x, fx
        else:
            b = x
    # Newton polish, kept inside the bracket
    for _ in range(5):
        d = dfun(x)
        if d == 0:
            break
        xn = x - fun(x) / d
        if not (min(a, b) - 1e-12 <= xn <= max(a, b) + 1e-12):
            break
        if xn == x:
            break
        x = xn
    return x


def tune_quadrant_branch(tau, n_scan=2000):
    """Root sigma(tau) of h(., tau) in (-tau/2, 0) closest to zero (mirrored for tau < 0)."""
    tau = float(tau)
    if tau == 0:
        raise ValueError("tau must be nonzero")
    lo_end = -tau / 2.0
    grid = np.linspace(0.0, lo_end, n_scan + 1)
    hv = quartic_h(grid, tau)
    ftol = 1e-13 * max(1.0, tau**4)
    for k in range(n_scan):
        if hv[k] == 0:
            return float(grid[k]) if k else float(grid[k])
        if np.sign(hv[k]) != np.sign(hv[k + 1]):
            a, b = sorted((grid[k], grid[k + 1]))
            return float(_bisect_newton(lambda s: quartic_h(s, tau), lambda s: quartic_h_sigma(s, tau), a, b, ftol))
    raise BracketError(
        f"no sign change of h(., {tau}) on [{min(0, lo_end)}, {max(0, lo_end)}]: "
        f"h = {hv[0]}, {hv[-1]}")


def quartic_real_roots(tau):
    """All real roots of h(., tau), ascending, polished by Newton."""
    coeffs = [16.0, 0.0, -8.0 * tau**2, 32.0 * tau, tau**4]
    roots = np.roots(coeffs)
    real = sorted(r.real for r in roots if abs(r.imag) < 1e-8 * max(1.0, abs(r)))
    out = []
    for x in real:
        for _ in range(8):
            d = quartic_h_sigma(x, tau)
            if d == 0:
                break
            x = x - quartic_h(x, tau) / d
        out.append(float(x))
    return out


def p4(sigma):
    """h(sigma, 2) / 16."""
    return 1 + 4 * sigma - 2 * sigma**2 + sigma**4
