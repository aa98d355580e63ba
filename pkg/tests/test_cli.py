import json
import subprocess
import sys

import numpy as np
import pytest

from meanco import io
from meanco.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_tune(capsys):
    code, out, _ = run(capsys, "tune", "--tau", "2")
    assert code == 0
    data = json.loads(out)
    assert round(data["sigma"], 4) == -0.2253
    assert round(data["y"], 4) == 0.8197
    assert data["verdict"] == "Certified"
    assert abs(data["h_residual"]) < 1e-10
    assert set(data) == {"tau", "sigma", "h_residual", "y", "verdict"}


def test_tune_all_roots(capsys):
    code, out, _ = run(capsys, "tune", "--tau", "2", "--all-roots")
    roots = [r["sigma"] for r in json.loads(out)["all_roots"]]
    assert [round(r, 4) for r in roots] == [-1.9470, -0.2253]


def test_coercivity_zero_pressure(capsys):
    code, out, _ = run(capsys, "coercivity", "--domain", "diskdisk", "--pressure", "island", "--M", "0",
                       "--h", "0.1")
    assert code == 0
    assert json.loads(out)["gamma_h"] == 1.0


def test_solve_verify_round_trip(tmp_path, capsys):
    sol = tmp_path / "s.json"
    code, out1, _ = run(capsys, "solve", "--domain", "diskdisk", "--rho", "0.5", "--pressure", "island",
                        "--M", "3", "--bc", "identity", "--h", "0.05", "--refine", "1", "--oracle", "diskdisk",
                        "--out", str(sol))
    assert code == 0
    stored = json.loads(sol.read_text())
    assert {"mesh_hash", "coefficients", "energy_F", "energy_D", "residual"} <= set(stored)
    code, out2, _ = run(capsys, "verify", "--solution", str(sol))
    assert code == 0
    assert out1 == out2
    v = json.loads(out2)
    assert v["det_min"] == pytest.approx(0.41, abs=0.02)
    assert v["det_max"] == pytest.approx(1.24, abs=0.02)


def test_solve_is_deterministic(tmp_path, capsys):
    outs = []
    for k in range(2):
        path = tmp_path / f"s{k}.json"
        run(capsys, "solve", "--domain", "disksector", "--pressure", "island", "--M", "3", "--bc", "oracle",
            "--h", "0.1", "--out", str(path))
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_floats_have_17_digits(tmp_path):
    path = tmp_path / "x.json"
    io.write_json(path, {"a": 0.1, "b": [1.0, 2.5e-20], "c": 3})
    text = path.read_text()
    assert "0.10000000000000001" in text
    back = io.read_json(path)
    assert back["a"] == 0.1 and back["b"][1] == 2.5e-20 and back["c"] == 3


def test_bc_file(tmp_path, capsys):
    from meanco.geometry import DomainSpec, build_mesh
    m = build_mesh(DomainSpec.quadrant_square(), 0.25)
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    bfile = tmp_path / "bc.json"
    io.write_json(bfile, {"nodes": m.boundary_nodes.tolist(), "values": (m.nodes[m.boundary_nodes] @ A.T).tolist()})
    code, out, _ = run(capsys, "solve", "--domain", "quadrant", "--pressure", "constant", "--value", "0",
                       "--bc", "file", "--bc-file", str(bfile), "--h", "0.25")
    assert code == 0
    v = json.loads(out)
    assert v["det_min"] == pytest.approx(1.0, abs=1e-12) and v["det_max"] == pytest.approx(1.0, abs=1e-12)


def test_oracle_csv(tmp_path, capsys):
    out_csv = tmp_path / "o.csv"
    code, out, _ = run(capsys, "oracle", "--which", "diskdisk", "--params", "M=3", "--sample", "20",
                       "--out", str(out_csv))
    assert code == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "x,y,u1,u2,det,region"
    assert len(lines) == 21
    dets = np.array([float(line.split(",")[4]) for line in lines[1:]])
    assert dets.min() >= 0.4096 - 1e-12 and dets.max() <= 1.24 + 1e-12


def test_export_vtk_and_csv(tmp_path, capsys):
    sol = tmp_path / "s.json"
    run(capsys, "solve", "--domain", "quadrant", "--pressure", "quadrant", "--sigma", "0.1", "--tau", "0.5",
        "--bc", "identity", "--h", "0.5", "--out", str(sol))
    vtk = tmp_path / "s.vtk"
    code, _, _ = run(capsys, "export", "--solution", str(sol), "--format", "vtk", "--out", str(vtk))
    assert code == 0
    text = vtk.read_text()
    assert "DATASET UNSTRUCTURED_GRID" in text
    assert "SCALARS detgrad double 1" in text and "VECTORS u double" in text
    code, _, _ = run(capsys, "export", "--solution", str(sol), "--format", "csv", "--out", str(tmp_path / "e.csv"))
    assert code == 0
    assert (tmp_path / "e_nodes.csv").exists()


def test_mesh_command(tmp_path, capsys):
    path = tmp_path / "q.mesh"
    code, out, _ = run(capsys, "mesh", "--domain", "quadrant", "--h", "1.0", "--out", str(path))
    data = json.loads(out)
    assert data["n_elements"] == 8 and data["n_interface_edges"] == 4
    assert path.read_text().startswith("nodes 9\n")


@pytest.mark.parametrize("argv, stage", [
    (["solve", "--domain", "diskdisk", "--pressure", "island", "--bc", "identity", "--h", "0.1"], "config"),
    (["mesh", "--domain", "quadrant", "--h", "-1"], "mesh"),
    (["solve", "--domain", "diskdisk", "--rho", "1.5", "--pressure", "island", "--M", "1", "--bc", "identity",
      "--h", "0.1"], "run"),
    (["tune", "--tau", "0"], "run"),
])
def test_errors_are_json(argv, stage, capsys):
    code, out, err = run(capsys, *argv)
    assert code != 0 and out == ""
    data = json.loads(err)
    assert data["stage"] == stage and data["command"] == argv[0] and data["message"]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "meanco", "tune", "--tau", "2"], capture_output=True, text=True,
                         check=True)
    assert round(json.loads(res.stdout)["sigma"], 4) == -0.2253
