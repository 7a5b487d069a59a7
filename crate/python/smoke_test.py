"""Smoke test for the topobohm_py extension module.

Build the module first:

    cargo build --release -p topobohm-py --features extension-module
    cp target/release/libtopobohm_py.so python/topobohm_py.so

then run `python3 python/smoke_test.py` from the repository root.
"""

import json
import math
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent
sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

import topobohm_py as tb  # noqa: E402


def check(name, ok, detail=""):
    print(f"{'ok' if ok else 'FAIL':4} {name} {detail}")
    if not ok:
        raise SystemExit(1)


def main():
    levels = tb.spectrum(n_points=256, n_levels=4, beta=math.pi)
    check("half-integer levels", all(abs(a - b) < 1e-8 for a, b in zip(levels, [0.125, 0.125, 1.125, 1.125])), levels)

    psi = tb.WaveGrid.gaussian(128, 1.0, 0.4, k0=2.0, beta=math.pi / 2)
    check("normalized", abs(psi.norm_sq() - 1.0) < 1e-12)
    later = tb.evolve(psi, 1e-3, 500)
    check("norm kept", abs(later.norm_sq() - 1.0) < 1e-10)
    check("twist kept", later.twist_residual() < 1e-12)
    coarse = tb.WaveGrid.gaussian(64, 1.0, 1.0, k0=1.0, beta=math.pi / 2)
    d = tb.evolve(coarse, 1e-3, 500).l2_distance(tb.crank_nicolson(coarse, 1e-3, 500))
    check("split-step vs Crank-Nicolson", d < 1e-6, d)

    again = tb.WaveGrid.from_json(later.to_json())
    check("json round trip", again.l2_distance(later) < 1e-14)

    trajs = tb.trajectories(psi, [0.5, 1.0, 1.5], 1e-3, 200)
    check("trajectories", len(trajs) == 3 and all(t["status"]["status"] == "completed" for t in trajs))

    report = tb.equivariance(psi, seed=1, n_samples=4000, t_final=0.2, checkpoints=2)
    check("equivariance", report["pass"], report["checkpoints"][-1]["total_variation"])

    events, final = tb.grw(psi, seed=3, t_final=1.0, dt=1e-2)
    check("grw", abs(final.norm_sq() - 1.0) < 1e-9, f"{len(events)} events")

    check("S3 characters", tb.count_characters("symmetric", 3) == 2)
    c = tb.classify_aharonov_casher(0.125, pauli=[0.0, 1.0, 0.0, 0.0])
    check("AC with sigma_x incompatible", not c["compatible"])

    try:
        tb.WaveGrid.from_chi([[1.0, 0.0]], beta=0.0)
    except ValueError as e:
        check("bad grid rejected", True, str(e)[:40])
    else:
        check("bad grid rejected", False)

    with tempfile.TemporaryDirectory() as out:
        cfg = (ROOT / "scenarios" / "free_spectrum.json").read_text()
        code, manifest = tb.run("spectrum", cfg, out)
        check("run spectrum", code == 0 and manifest["status"] == "success")
        code, manifest = tb.run("evolve", (ROOT / "scenarios" / "aharonov_casher_sigma_x.json").read_text(), out)
        check("run incompatible", code == 3 and manifest["failure"]["class"] == "physics")
        validate_schemas(pathlib.Path(out) / "manifest.json")


def validate_schemas(manifest_path):
    try:
        import jsonschema
    except ImportError:
        print("skip schema validation (jsonschema not installed)")
        return
    scenario_schema = json.loads((ROOT / "schemas" / "scenario.schema.json").read_text())
    for path in sorted((ROOT / "scenarios").glob("*.json")):
        jsonschema.validate(json.loads(path.read_text()), scenario_schema)
    manifest_schema = json.loads((ROOT / "schemas" / "manifest.schema.json").read_text())
    jsonschema.validate(json.loads(manifest_path.read_text()), manifest_schema)
    check("schemas", True)


if __name__ == "__main__":
    main()
