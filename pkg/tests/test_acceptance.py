"""Acceptance criteria, one check per criterion.

Each ``criterion_N`` returns ``(passed, detail)``. Under pytest the results are
collected and printed as a PASS/FAIL block at the end of the run; running this
file directly prints the same lines.
"""
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from conftest import record_acceptance  # noqa: E402

from meanco import cli, fem, oracles as O, postproc  # noqa: E402
from meanco.geometry import DomainSpec, build_mesh, refine_uniform  # noqa: E402
from meanco.pressure import PressureField, feasibility_y, gate_for, quartic_real_roots  # noqa: E402

SEED = 20240601


def _circle(r, n, rng):
    th = rng.uniform(-math.pi, math.pi, n)
    return r * np.stack([np.cos(th), np.sin(th)], axis=1)


def _mean_value_defect(sol, centres, region, r, n=64):
    """|circle average − centre value| of one branch.

    For a harmonic map the trapezoidal circle average equals the centre value up
    to a spectrally small error, so this is a derivative-free harmonicity test.
    """
    th = 2 * math.pi * np.arange(n) / n
    ring = r * np.stack([np.cos(th), np.sin(th)], axis=1)
    out = 0.0
    for c in centres:
        avg = sol.value(c + ring, region).mean(axis=0)
        out = max(out, float(np.max(np.abs(avg - sol.value(c[None, :], region)[0]))))
    return out


def _sector_rays(n, rng):
    s = 1 / math.sqrt(2)
    for angle, nu in ((math.pi / 4, np.array([-s, s])), (-math.pi / 4, np.array([-s, -s]))):
        R = rng.uniform(1e-3, 1.0, n)
        yield R[:, None] * np.array([math.cos(angle), math.sin(angle)]), nu


def _rate(hs, errs):
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


# ---------------------------------------------------------------------------

def criterion_1():
    s = O.disk_disk_solution(0.5, 3.0)
    dz, dx = abs(s.params["zeta"] - 0.64), abs(s.params["xi"] - 1.12)
    return dz < 1e-12 and dx < 1e-12, f"zeta={s.params['zeta']:.15g} xi={s.params['xi']:.15g}"


def criterion_2():
    t0 = time.perf_counter()
    mesh, f, u, _ = cli.solve_config(dict(cli.PRESETS["diskdisk"]))
    d = postproc.det_per_element(mesh, u)
    jump = postproc.interface_jump(mesh, u, f).aggregates()["abs_jump_mean"]
    dt = time.perf_counter() - t0
    ok = (abs(d.min() - 0.4096) <= 0.02 and abs(d.max() - 1.24) <= 0.02 and abs(jump - 0.6144) <= 0.03
          and dt < 30)
    return ok, (f"{mesh.n_elements} triangles, det in [{d.min():.4f}, {d.max():.4f}], "
                f"mean jump {jump:.4f}, {dt:.1f}s")


def criterion_3():
    rng = np.random.default_rng(SEED)
    rho, M = 0.5, 3.0
    s = O.disk_disk_solution(rho, M)
    x = _circle(rho, 1000, rng)
    defect, jump = O.jump_law_defect(s, x, x / rho, 0, 1)
    worst = float(np.max(np.abs(defect)))
    closed = 8 * M / (M * rho**2 - M - 4) ** 2
    jdev = float(np.max(np.abs(jump - closed)))
    sec = O.disk_sector_basic(M)
    for xs, nu in _sector_rays(500, rng):
        d, _ = O.jump_law_defect(sec, xs, nu, 0, 1)
        worst = max(worst, float(np.max(np.abs(d))))
    return worst < 1e-10 and jdev < 1e-12, f"max law defect {worst:.2e}, disk-disk jump deviation {jdev:.2e}"


def criterion_4():
    t0 = time.perf_counter()
    mesh, f, u, _ = cli.solve_config(dict(cli.PRESETS["sector"]))
    d = postproc.det_per_element(mesh, u)
    jmax = postproc.interface_jump(mesh, u, f).aggregates()["jump_max"]
    dt = time.perf_counter() - t0
    ok = abs(d.min()) <= 0.02 and abs(d.max() - 6) <= 0.15 and abs(jmax - 6) <= 0.15 and dt < 30
    return ok, f"{mesh.n_elements} triangles, det in [{d.min():.4f}, {d.max():.4f}], max jump {jmax:.4f}, {dt:.1f}s"


def criterion_5():
    roots = quartic_real_roots(2.0)
    s1, s0 = roots[0], roots[-1]
    y = feasibility_y(s0, 2.0)
    ok = round(s0, 4) == -0.2253 and round(s1, 4) == -1.9470 and round(y, 4) == 0.8197
    return ok, f"sigma0={s0:.6f} sigma1={s1:.6f} y={y:.6f}"


def criterion_6():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    meshes = [build_mesh(DomainSpec.quadrant_square(), 0.25), build_mesh(DomainSpec.disk_disk(0.5), 0.1),
              build_mesh(DomainSpec.disk_sector(), 0.1)]
    worst = 0.0
    for m in meshes:
        tags = sorted(set(m.element_tag.tolist()))
        f = PressureField({t: float(rng.uniform(-3, 3)) for t in tags})
        K1, K2 = fem.assemble_K1(m), fem.assemble_K2(m, f)
        L = fem.el_operator(m, f)
        bd = fem.boundary_dofs(m)
        for _ in range(100):
            u = rng.standard_normal(2 * m.n_nodes)
            v = rng.standard_normal(2 * m.n_nodes)
            v[bd] = u[bd]
            Fv = fem.energy_F(m, f, v, K1=K1, K2=K2)
            rhs = (fem.energy_F(m, f, u, K1=K1, K2=K2) + fem.bilinear_a(m, f, u, v - u, operator=L)
                   + fem.energy_F(m, f, v - u, K1=K1, K2=K2))
            worst = max(worst, abs(Fv - rhs) / (1 + abs(Fv)))
    dt = time.perf_counter() - t0
    return worst < 1e-12 and dt < 5, f"max scaled defect {worst:.2e} over 300 pairs, {dt:.1f}s"


def criterion_7():
    t0 = time.perf_counter()
    disk = build_mesh(DomainSpec.disk_disk(0.5), 0.1)
    g0 = fem.min_coercivity_eig(disk, PressureField.island(0.0))
    g3 = fem.min_coercivity_eig(disk, PressureField.island(3.0))
    seq = []
    m = build_mesh(DomainSpec.disk_disk(0.5), 0.15)
    for k in range(4):
        seq.append(fem.min_coercivity_eig(m, PressureField.island(4.5)))
        if k < 3:
            m = refine_uniform(m)
    dt = time.perf_counter() - t0
    ok = (abs(g0 - 1) <= 1e-8 and 0.25 - 1e-8 <= g3 < 1 and all(a > b for a, b in zip(seq, seq[1:]))
          and dt < 60)
    return ok, f"gamma(0)={g0:.10f} gamma(3)={g3:.4f} gamma(4.5)={[round(g, 4) for g in seq]}, {dt:.1f}s"


def criterion_8():
    rng = np.random.default_rng(SEED)
    parts = {}
    # disk-disk
    s = O.disk_disk_solution(0.5, 3.0)
    x = _circle(0.5, 1000, rng)
    harm = max(_mean_value_defect(s, _circle(1.0, 50, rng) * rng.uniform(0, 0.35, (50, 1)), 0, 0.1),
               _mean_value_defect(s, _circle(1.0, 50, rng) * rng.uniform(0.65, 0.85, (50, 1)), 1, 0.1))
    parts["diskdisk"] = max(harm, float(np.max(np.abs(O.jump_residual(s, x, x / 0.5, 0, 1)))))
    # disk-sector
    s = O.disk_sector_basic(3.0)
    harm = max(_mean_value_defect(s, rng.uniform(-0.6, 0.6, (50, 2)), r, 0.3) for r in (0, 1))
    jr = max(float(np.max(np.abs(O.jump_residual(s, xs, nu, 0, 1)))) for xs, nu in _sector_rays(500, rng))
    parts["sector"] = max(harm, jr)
    # insulation
    s = O.insulation_affine([0.0, 1.0], [1.0, 0.0], 0.0, 1.0, 2.0)
    y = rng.uniform(-0.5, 0.5, 1000)
    parts["insulation"] = max(
        float(np.max(np.abs(O.jump_residual(s, np.stack([np.full_like(y, x0), y], axis=1), [1.0, 0.0], a, b))))
        for x0, a, b in ((-0.5, 1, 2), (0.5, 2, 3)))
    # quadrant, n = 1, beta = 1: one residual per interface
    s = O.quadrant_building_block(1, 1.0)
    for k, (lo, hi, nu, direction) in enumerate(O.QUADRANT_INTERFACES, start=1):
        xs = rng.uniform(1e-3, 1.0, (1000, 1)) * direction
        parts[f"quadrant Q{lo}|Q{hi}"] = float(np.max(np.abs(O.jump_residual(s, xs, nu, lo, hi))))
    bad = [k for k, v in parts.items() if not v < 1e-10]
    detail = ", ".join(f"{k} {v:.1e}" for k, v in parts.items())
    if bad:
        detail += f"; above 1e-10: {', '.join(bad)}"
    return not bad, detail


def criterion_9():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    A = rng.standard_normal((100000, 3, 3))
    cof = np.linalg.det(A)[:, None, None] * np.transpose(np.linalg.inv(A), (0, 2, 1))
    margin = np.sum(A**2, axis=(1, 2)) - math.sqrt(3) * np.sqrt(np.sum(cof**2, axis=(1, 2)))
    mmin = float(min(margin.min(), O.cof3d_margin(A).min()))
    at_id = abs(float(O.cof3d_margin(np.eye(3))))
    B = A[:100]
    cross = float(np.max(np.abs(O.cross_term_3d(B, B) - 2 * cof[:100])))
    dt = time.perf_counter() - t0
    ok = mmin >= -1e-10 and at_id < 1e-12 and cross < 1e-12 and dt < 10
    return ok, f"min margin {mmin:.3e}, margin at I {at_id:.1e}, cross-term defect {cross:.1e}, {dt:.1f}s"


def criterion_10():
    orc = O.disk_disk_solution(0.5, 3.0)
    f = PressureField.island(3.0)
    m = build_mesh(DomainSpec.disk_disk(0.5), 0.1)
    hs, l2s, h1s = [], [], []
    for k in range(4):
        u = fem.solve_el(m, f, fem.BoundaryData.identity(m))
        l2, h1 = postproc.errors_vs_oracle(m, u, orc)
        hs.append(m.max_diameter())
        l2s.append(l2)
        h1s.append(h1)
        if k < 3:
            m = refine_uniform(m)
    r2, r1 = _rate(hs, l2s), _rate(hs, h1s)
    return abs(r2 - 2) <= 0.3 and abs(r1 - 1) <= 0.3, f"L2 order {r2:.3f}, H1 order {r1:.3f}"


def criterion_11():
    rng = np.random.default_rng(SEED)
    m = build_mesh(DomainSpec.disk_disk(0.5), 0.1)
    f = PressureField.island(3.0)
    if not gate_for(f).certified:
        return False, "pressure is not certified"
    g0 = fem.BoundaryData.identity(m)
    u = fem.solve_el(m, f, g0)
    cg = fem.minimize_energy_crosscheck(m, f, g0)
    agree = float(np.max(np.abs(cg.u - u)))
    K1, K2 = fem.assemble_K1(m), fem.assemble_K2(m, f)
    W0, D0 = 0.5 * u @ K2 @ u, u @ K1 @ u
    I = fem.interior_dofs(m)
    worst_drop, worst_w = -np.inf, 0.0
    for _ in range(50):
        phi = np.zeros(2 * m.n_nodes)
        phi[I] = rng.standard_normal(I.size) * rng.uniform(0.01, 1.0)
        # W(u + tφ) − W(u) = t φᵀK2u + ½t² φᵀK2φ; take the nonzero root
        t = -2 * (phi @ K2 @ u) / (phi @ K2 @ phi)
        v = u + t * phi
        worst_w = max(worst_w, abs(0.5 * v @ K2 @ v - W0))
        worst_drop = max(worst_drop, D0 - v @ K1 @ v)
    ok = agree < 1e-6 and worst_w < 1e-8 and worst_drop <= 1e-8
    return ok, f"crosscheck gap {agree:.1e}, max constraint drift {worst_w:.1e}, max D decrease {worst_drop:.2e}"


CRITERIA = {
    1: ("disk-disk constants", criterion_1),
    2: ("disk-disk field values", criterion_2),
    3: ("jump law on oracles", criterion_3),
    4: ("disk-sector field values", criterion_4),
    5: ("quadrant tuning", criterion_5),
    6: ("discrete decomposition identity", criterion_6),
    7: ("coercivity eigen-estimates", criterion_7),
    8: ("oracle EL compliance", criterion_8),
    9: ("3D algebra", criterion_9),
    10: ("convergence orders", criterion_10),
    11: ("minimizer uniqueness proxy", criterion_11),
}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    title, fn = CRITERIA[number]
    passed, detail = fn()
    record_acceptance(number, title, passed, detail)
    assert passed, detail


if __name__ == "__main__":
    failures = 0
    for n in sorted(CRITERIA):
        title, fn = CRITERIA[n]
        passed, detail = fn()
        failures += not passed
        print(f"[{'PASS' if passed else 'FAIL'}] {n:2d}. {title}: {detail}", flush=True)
    sys.exit(1 if failures else 0)
