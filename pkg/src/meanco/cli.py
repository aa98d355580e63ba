"""Command-line entry point: ``meanco <command> ...``.

Every command writes JSON to stdout. On failure it writes a JSON error object
to stderr and exits with a nonzero status.
"""
from __future__ import annotations

import os

_threads = os.environ.get("MEANCO_THREADS", "1")
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import math  # noqa: E402
import sys  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from . import fem, io, oracles, postproc  # noqa: E402
from .geometry import DomainSpec, build_mesh, refine_toward_interface, refine_uniform, write_mesh  # noqa: E402
from .pressure import (PressureField, feasibility_y, gate_for, gate_quadrant, quartic_h,  # noqa: E402
                       quartic_real_roots, tune_quadrant_branch)

DOMAINS = {"diskdisk", "disksector", "insulation", "quadrant"}

PRESETS = {
    "diskdisk": {"domain": "diskdisk", "rho": 0.5, "pressure": "island", "M": 3.0, "bc": "identity",
                 "h": 0.028, "refine": 2, "oracle": "diskdisk"},
    "sector": {"domain": "disksector", "pressure": "island", "M": 3.0, "bc": "oracle",
               "h": 0.03, "refine": 2, "oracle": "sector"},
}


class CliError(Exception):
    def __init__(self, stage, message):
        super().__init__(message)
        self.stage = stage


# ---------------------------------------------------------------------------
# configuration helpers
# ---------------------------------------------------------------------------

def domain_spec(cfg) -> DomainSpec:
    kind = cfg["domain"]
    if kind == "diskdisk":
        return DomainSpec.disk_disk(cfg.get("rho", 0.5))
    if kind == "disksector":
        return DomainSpec.disk_sector()
    if kind == "insulation":
        return DomainSpec.insulation_strip()
    if kind == "quadrant":
        return DomainSpec.quadrant_square()
    raise CliError("config", f"unknown domain {kind!r}")


def make_mesh(cfg):
    h = cfg["h"]
    if not (h > 0):
        raise CliError("mesh", "h must be positive")
    mesh = build_mesh(domain_spec(cfg), h)
    for _ in range(cfg.get("uniform", 0) or 0):
        mesh = refine_uniform(mesh)
    if cfg.get("refine", 0):
        mesh = refine_toward_interface(mesh, cfg["refine"])
    return mesh


def make_pressure(cfg) -> PressureField:
    kind = cfg["pressure"]
    if kind == "island":
        if cfg["domain"] not in ("diskdisk", "disksector"):
            raise CliError("config", "island pressure needs a disk domain")
        return PressureField.island(cfg["M"])
    if kind == "insulation":
        return PressureField.insulation(cfg["f1"], cfg["f2"], cfg["f3"])
    if kind == "quadrant":
        return PressureField.quadrant(cfg["sigma"], cfg["tau"])
    if kind == "constant":
        tags = {"diskdisk": (0, 1), "disksector": (0, 1), "insulation": (1, 2, 3), "quadrant": (1, 2, 3, 4)}
        return PressureField.constant(cfg["value"], tags[cfg["domain"]])
    raise CliError("config", f"unknown pressure {kind!r}")


def make_oracle(name, cfg):
    if name is None:
        return None
    if name == "diskdisk":
        return oracles.disk_disk_solution(cfg.get("rho", 0.5), cfg.get("M", 0.0))
    if name == "sector":
        return oracles.disk_sector_basic(cfg.get("M", 0.0))
    if name == "insulation":
        return oracles.insulation_affine(cfg.get("xi", [0.0, 1.0]), cfg.get("eta", [1.0, 0.0]),
                                         cfg.get("f1", 0.0), cfg.get("f2", 1.0), cfg.get("f3", 2.0))
    if name == "quadrant":
        return oracles.quadrant_building_block(cfg.get("n", 1), cfg.get("beta", 1.0))
    raise CliError("config", f"unknown oracle {name!r}")


def boundary_data(mesh, cfg):
    bc = cfg["bc"]
    if bc == "identity":
        return fem.BoundaryData.identity(mesh)
    if bc == "oracle":
        orc = make_oracle(cfg.get("oracle") or _default_oracle(cfg), cfg)
        return fem.BoundaryData.from_function(mesh, orc.value)
    if bc == "file":
        data = io.read_json(cfg["bc_file"])
        return fem.BoundaryData(np.asarray(data["nodes"], dtype=int), np.asarray(data["values"], dtype=float))
    raise CliError("config", f"unknown boundary condition {bc!r}")


def _default_oracle(cfg):
    return {"diskdisk": "diskdisk", "disksector": "sector", "insulation": "insulation",
            "quadrant": "quadrant"}[cfg["domain"]]


def verification(mesh, f, u, oracle=None) -> dict:
    out = {"n_elements": mesh.n_elements, "n_nodes": mesh.n_nodes,
           "residual": fem.el_residual(mesh, f, u),
           "weighted_det_integral": postproc.weighted_det_integral(mesh, f, u)}
    out.update(postproc.det_summary(mesh, u))
    if mesh.interface_edge_mask.any():
        out["jump"] = postproc.interface_jump(mesh, u, f).aggregates()
        _, agg = postproc.jump_condition_residual(mesh, u, f)
        out["jump_condition_residual_l2"] = agg
    if oracle is not None:
        l2, h1 = postproc.errors_vs_oracle(mesh, u, oracle)
        out["oracle"] = oracle.name
        out["error_l2"] = l2
        out["error_h1_seminorm"] = h1
    return out


def full_report(mesh, f, u, oracle=None) -> dict:
    """Verification numbers plus energies, gate verdict and mesh hash."""
    ver = verification(mesh, f, u, oracle)
    ver["verdict"] = gate_for(f).status
    ver["mesh_hash"] = mesh.fingerprint()
    ver["energy_F"] = fem.energy_F(mesh, f, u)
    ver["energy_D"] = fem.energy_D(mesh, u)
    return ver


def solve_config(cfg):
    mesh = make_mesh(cfg)
    f = make_pressure(cfg)
    g0 = boundary_data(mesh, cfg)
    u = fem.solve_el(mesh, f, g0)
    K1 = fem.assemble_K1(mesh)
    K2 = fem.assemble_K2(mesh, f)
    solution = {
        "mesh_hash": mesh.fingerprint(),
        "coefficients": u,
        "energy_F": fem.energy_F(mesh, f, u, K1=K1, K2=K2),
        "energy_D": fem.energy_D(mesh, u, K1=K1),
        "residual": fem.el_residual(mesh, f, u),
        "config": cfg,
    }
    return mesh, f, u, solution


def load_solution(path):
    sol = io.read_json(path)
    cfg = sol["config"]
    mesh = make_mesh(cfg)
    if mesh.fingerprint() != sol["mesh_hash"]:
        raise CliError("verify", "mesh rebuilt from the stored config does not match mesh_hash")
    u = np.asarray(sol["coefficients"], dtype=float)
    if u.shape != (2 * mesh.n_nodes,):
        raise CliError("verify", "coefficient vector has the wrong length")
    return mesh, make_pressure(cfg), u, cfg


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cfg_from_args(a) -> dict:
    cfg = {"domain": a.domain, "h": a.h, "refine": a.refine, "uniform": a.uniform}
    if a.domain == "diskdisk":
        cfg["rho"] = a.rho
    for key in ("pressure", "M", "f1", "f2", "f3", "sigma", "tau", "value", "bc", "bc_file",
                "oracle", "seed"):
        v = getattr(a, key, None)
        if v is not None:
            cfg[key] = v
    return cfg


def cmd_mesh(a):
    mesh = make_mesh(_cfg_from_args(a))
    if a.out:
        write_mesh(mesh, a.out)
    return {"n_elements": mesh.n_elements, "n_nodes": mesh.n_nodes, "area": mesh.total_area(),
            "max_diameter": mesh.max_diameter(), "n_interface_edges": int(mesh.interface_edge_mask.sum()),
            "mesh_hash": mesh.fingerprint()}


def cmd_solve(a):
    cfg = _cfg_from_args(a)
    mesh, f, u, solution = solve_config(cfg)
    if a.out:
        io.write_json(a.out, solution)
    orc = make_oracle(cfg.get("oracle"), cfg) if cfg.get("oracle") else None
    ver = full_report(mesh, f, u, orc)
    if a.verify_out:
        io.write_json(a.verify_out, ver)
    return ver


def cmd_verify(a):
    mesh, f, u, cfg = load_solution(a.solution)
    name = a.oracle or cfg.get("oracle")
    return full_report(mesh, f, u, make_oracle(name, cfg) if name else None)


def cmd_tune(a):
    tau = a.tau
    sigma = tune_quadrant_branch(tau)
    y = feasibility_y(sigma, tau)
    out = {"tau": tau, "sigma": sigma, "h_residual": quartic_h(sigma, tau), "y": y,
           "verdict": gate_quadrant(sigma, tau).status}
    if a.all_roots:
        roots = quartic_real_roots(tau)
        out["all_roots"] = [{"sigma": s, "h_residual": quartic_h(s, tau), "y": feasibility_y(s, tau),
                             "verdict": gate_quadrant(s, tau).status} for s in roots]
    return out


def cmd_coercivity(a):
    cfg = _cfg_from_args(a)
    mesh = make_mesh(cfg)
    f = make_pressure(cfg)
    v = gate_for(f)
    return {"gamma_h": fem.min_coercivity_eig(mesh, f), "verdict": v.status,
            "gamma_lower_bound": v.gamma_lower_bound, "reason": v.reason,
            "n_elements": mesh.n_elements}


def _parse_params(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise CliError("config", f"parameter {item!r} must look like key=value")
        k, v = item.split("=", 1)
        if "," in v:
            out[k] = [float(t) for t in v.split(",")]
        else:
            out[k] = int(v) if k == "n" else float(v)
    return out


def _sample_domain(which, n, rng, cfg):
    if which in ("diskdisk", "sector"):
        r = np.sqrt(rng.uniform(0, 1, n))
        t = rng.uniform(-math.pi, math.pi, n)
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
    if which == "insulation":
        return np.stack([rng.uniform(-1, 1, n), rng.uniform(-0.5, 0.5, n)], axis=1)
    return rng.uniform(-1, 1, (n, 2))


def cmd_oracle(a):
    params = _parse_params(a.params)
    if a.which == "diskdisk":
        params.setdefault("rho", 0.5)
    orc = make_oracle(a.which, params)
    rng = np.random.default_rng(a.seed)
    pts = _sample_domain(a.which, a.sample, rng, params)
    reg = orc.region(pts)
    vals = orc.value(pts)
    dets = orc.det(pts)
    rows = [(float(p[0]), float(p[1]), float(v[0]), float(v[1]), float(d), int(r))
            for p, v, d, r in zip(pts, vals, dets, reg)]
    if a.out:
        io.write_csv(a.out, ["x", "y", "u1", "u2", "det", "region"], rows)
    return {"oracle": orc.name, "params": orc.params, "samples": len(rows),
            "det_min": float(dets.min()), "det_max": float(dets.max())}


def cmd_export(a):
    mesh, f, u, _ = load_solution(a.solution)
    det = postproc.det_per_element(mesh, u)
    if a.format == "vtk":
        io.write_vtk(a.out, mesh, u, det)
    else:
        base = Path(a.out)
        io.write_csv(base, ["element", "tag", "cx", "cy", "detgrad"],
                     [(e, int(mesh.element_tag[e]), float(c[0]), float(c[1]), float(det[e]))
                      for e, c in enumerate(mesh.centroids)])
        n = mesh.n_nodes
        io.write_csv(base.with_name(base.stem + "_nodes" + base.suffix), ["node", "x", "y", "u1", "u2"],
                     [(i, float(p[0]), float(p[1]), float(u[i]), float(u[n + i]))
                      for i, p in enumerate(mesh.nodes)])
    return {"format": a.format, "out": str(a.out), "n_elements": mesh.n_elements}


def cmd_repro(a):
    cfg = dict(PRESETS[a.preset])
    mesh, f, u, solution = solve_config(cfg)
    ver = full_report(mesh, f, u, make_oracle(cfg["oracle"], cfg))
    outdir = Path(a.outdir) if a.outdir else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
        io.write_json(outdir / f"{a.preset}_solution.json", solution)
        io.write_json(outdir / f"{a.preset}_verify.json", ver)
    ref = {"diskdisk": {"det_min": 0.4096, "det_max": 1.24, "jump": 0.6144},
           "sector": {"det_min": 0.0, "det_max": 6.0, "jump": 6.0}}[a.preset]
    ver["reference"] = ref
    return ver


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_problem_args(p, need_pressure=True, need_bc=False):
    p.add_argument("--domain", required=True, choices=sorted(DOMAINS))
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--refine", type=int, default=0, help="interface refinement levels")
    p.add_argument("--uniform", type=int, default=0, help="uniform refinements before interface refinement")
    if need_pressure:
        p.add_argument("--pressure", required=True, choices=["island", "insulation", "quadrant", "constant"])
        p.add_argument("--M", type=float)
        p.add_argument("--f1", type=float)
        p.add_argument("--f2", type=float)
        p.add_argument("--f3", type=float)
        p.add_argument("--sigma", type=float)
        p.add_argument("--tau", type=float)
        p.add_argument("--value", type=float)
    if need_bc:
        p.add_argument("--bc", required=True, choices=["identity", "oracle", "file"])
        p.add_argument("--bc-file", dest="bc_file")
        p.add_argument("--oracle", choices=["diskdisk", "sector", "insulation", "quadrant"])
        p.add_argument("--seed", type=int, default=0)


def build_parser():
    ap = argparse.ArgumentParser(prog="meanco", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="build a tagged triangulation")
    _add_problem_args(p, need_pressure=False)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("solve", help="solve the discrete Euler-Lagrange system")
    _add_problem_args(p, need_bc=True)
    p.add_argument("--out")
    p.add_argument("--verify-out", dest="verify_out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="recompute diagnostics for a stored solution")
    p.add_argument("--solution", required=True)
    p.add_argument("--oracle", choices=["diskdisk", "sector", "insulation", "quadrant"])
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("tune", help="solve h(sigma, tau) = 0 for the point-contact branch")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--all-roots", action="store_true")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("coercivity", help="discrete coercivity constant and gate verdict")
    _add_problem_args(p)
    p.set_defaults(func=cmd_coercivity)

    p = sub.add_parser("oracle", help="sample a closed-form solution")
    p.add_argument("--which", required=True, choices=["diskdisk", "sector", "insulation", "quadrant"])
    p.add_argument("--params", nargs="*", help="key=value pairs, vectors comma separated")
    p.add_argument("--sample", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("export", help="write per-element det and nodal u for plotting")
    p.add_argument("--solution", required=True)
    p.add_argument("--format", choices=["csv", "vtk"], default="vtk")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("repro", help="run a named experiment preset")
    p.add_argument("--preset", choices=sorted(PRESETS), required=True)
    p.add_argument("--outdir")
    p.set_defaults(func=cmd_repro)
    return ap


def _validate(a):
    if getattr(a, "pressure", None) == "island" and a.M is None:
        raise CliError("config", "--M is required for island pressure")
    if getattr(a, "pressure", None) == "insulation" and None in (a.f1, a.f2, a.f3):
        raise CliError("config", "--f1, --f2 and --f3 are required for insulation pressure")
    if getattr(a, "pressure", None) == "quadrant" and None in (a.sigma, a.tau):
        raise CliError("config", "--sigma and --tau are required for quadrant pressure")
    if getattr(a, "pressure", None) == "constant" and a.value is None:
        raise CliError("config", "--value is required for constant pressure")
    if getattr(a, "bc", None) == "file" and not a.bc_file:
        raise CliError("config", "--bc-file is required with --bc file")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _validate(args)
        result = args.func(args)
    except CliError as exc:
        _fail(args.command, exc.stage, exc)
        return 1
    except Exception as exc:  # module errors are reported, not raised
        _fail(args.command, "run", exc)
        return 1
    sys.stdout.write(io.dumps(result) + "\n")
    return 0


def _fail(command, stage, exc):
    sys.stderr.write(io.dumps({"error": type(exc).__name__, "message": str(exc),
                               "command": command, "stage": stage}) + "\n")


if __name__ == "__main__":
    raise SystemExit(main())
