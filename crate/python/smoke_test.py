"""Smoke test for the nlhodge_py extension module.

Build first with `maturin develop -m crates/python/pyproject.toml`, or with
`cargo build --release -p nlhodge-py`; in the latter case the shared library
is loaded straight from target/release.
"""

import importlib.machinery
import importlib.util
import json
import math
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import nlhodge_py

        return nlhodge_py
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libnlhodge_py.so"
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("nlhodge_py", str(lib))
            spec = importlib.util.spec_from_loader("nlhodge_py", loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("nlhodge_py not built; run `cargo build --release -p nlhodge-py`")


def main():
    nh = load()

    cx = nh.Complex([8, 8])
    f = cx.cochain(0, [float(i % 5) for i in range(cx.num_cells(0))])
    assert f.d().d().max_abs() == 0.0
    ss = f.star().star()
    assert ss.values() == f.values()

    poly = nh.Density.polytropic(1.4)
    assert abs(poly.q_crit - 2.0 / 2.4) < 1e-15
    cert = json.loads(poly.certify(0.0, 0.9 * poly.q_crit))
    assert cert["pass"]

    sol = nh.solve_linear_flow(cx, poly, [0.3, 0.1])
    assert abs(sol.max_q - 0.1) < 1e-12, sol.max_q
    back = nh.Cochain.from_csv(cx, sol.phi.to_csv())
    assert back.values() == sol.phi.values()

    cube = nh.Complex([4, 4, 4])
    conn = nh.Connection.random(cube, "su2", 0.3, seed=7)
    moved = conn.transformed(2.0, seed=8)
    assert math.isclose(conn.energy(), moved.energy(), rel_tol=1e-12)
    exact, _ = conn.bianchi()
    assert exact < 1e-12
    again = nh.Connection.from_bytes(conn.to_bytes())
    assert again.energy() == conn.energy()

    s = json.loads(nh.mean_value_decomposition(poly, 1, [0.1, 0.2], [0.4, 0.5], [0.3, 0.1], [0.2, -0.2]))
    assert s["identity_residual"] < 1e-10 and s["alpha_min_eig"] > 0.0

    with tempfile.TemporaryDirectory() as out:
        ok, manifest = nh.run("[run]\nname=smoke\n[grid]\ndims=8,8\n[flow]\nslope=1,0\n", "solve-flow", out)
        assert ok and json.loads(manifest)["mode"] == "solve-flow"

    print("nlhodge_py smoke test passed")


if __name__ == "__main__":
    main()
