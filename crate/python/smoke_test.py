"""Smoke test for the detona Python extension.

    pip install maturin
    (cd crates/detona-py && maturin develop --release)
    python python/smoke_test.py
"""

import json
import math
import pathlib
import tempfile

import detona

ROOT = pathlib.Path(__file__).resolve().parent.parent

PARAMS = {
    "nu": 1.0, "kappa": 1.0, "dcoef": 1.0, "krate": 1.0, "qheat": 0.05,
    "Gamma": 1.2, "cheat": 1.0, "T_ign": 0.8672, "ign_C": 1.0, "ign_E": 0.1328,
    "s": 1.462326912834473,
}
LEFT = {"tau": 1.0, "u": 0.0, "E": 1.0, "z": 0.0}


def main():
    print("detona", detona.__version__)

    es = detona.endstates(PARAMS, LEFT)
    right = es["pair"]["right"]
    assert es["pair"]["lax_ok"] and es["pair"]["rh_residual"] < 1e-12, es["pair"]
    assert right["z"] == 1.0
    print("right state", right)

    try:
        detona.endstates(dict(PARAMS, nu=-1.0), LEFT)
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("negative viscosity accepted")

    circle = [complex(math.cos(t), math.sin(t)) for t in (2 * math.pi * k / 64 for k in range(64))]
    assert detona.winding(circle) == 1

    vals = detona.evans(PARAMS, LEFT, [2.0 + 0j, 2.0 + 1j, 2.0 - 1j])
    (d0, c0), (d1, _), (d2, _) = vals
    assert abs(d0) > 0 and c0 > 0
    assert abs(d1 - d2.conjugate()) <= 1e-8 * abs(d1), (d1, d2)
    print("D(2) =", d0, "D(2+i) =", d1)

    with tempfile.TemporaryDirectory() as out:
        summary = detona.run("endstates", str(ROOT / "configs" / "small-amplitude.toml"), out)
        manifest = json.loads((pathlib.Path(out) / "manifest.json").read_text())
        assert manifest["status"] == "ok"
        assert summary["pair"]["right"]["tau"] == right["tau"]
        print("run ok:", manifest["outputs"])

    print("smoke test passed")


if __name__ == "__main__":
    main()
