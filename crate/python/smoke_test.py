#!/usr/bin/env python3
"""Smoke test for the coevo_py extension module.

Builds the cdylib if needed, loads it from the cargo target directory, and
exercises the main entry points end to end.
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    lib = ROOT / "target" / "release" / "libcoevo_py.so"
    if not lib.exists():
        print("building coevo-py ...")
        subprocess.run(
            ["cargo", "build", "-p", "coevo-py", "--release"], cwd=ROOT, check=True
        )
    staging = Path(tempfile.mkdtemp(prefix="coevo_py_"))
    shutil.copy2(lib, staging / "coevo_py.so")
    sys.path.insert(0, str(staging))
    import coevo_py

    return coevo_py


def main():
    m = load_module()

    # closed-form threshold values
    assert abs(m.lambda_star(8, 0.5) - 0.4074074074074074) < 1e-12
    assert abs(m.lambda_star(4, 0.5) - 0.2727272727272727) < 1e-12
    assert m.lambda_star(2, 0.5) is None
    assert abs(m.best_response_threshold(0.2, 0.5, 0.5) - (-0.3)) < 1e-12
    assert m.classify_regime(0.98, 0.9) == "paradigm_shift"
    assert m.classify_regime(-0.97, 0.4) == "unpopular_norm"

    # generators are deterministic and structurally sound
    edges = m.generate_edges("rr", 100, 8, seed=7)
    assert len(edges) == 400
    assert edges == m.generate_edges("rr", 100, 8, seed=7)
    assert all(i < j for i, j in edges)
    degree = [0] * 100
    for i, j in edges:
        degree[i] += 1
        degree[j] += 1
    assert all(d == 8 for d in degree)
    try:
        m.generate_edges("ws", 10, 3, seed=1)
        raise AssertionError("odd-degree ws spec must be rejected")
    except ValueError:
        pass

    # a short simulation run with full trajectory
    sc = m.Scenario(family="rr", n=40, lambda_=0.1, mu=0.001, seed=11, horizon=4000)
    out = sc.simulate()
    assert out["t"][0] == 0 and out["t"][-1] == 4000
    assert len(out["final_x"]) == 40
    assert out["theory"]["d_star"] == 8
    assert abs(out["theory"]["lambda_star"] - 0.4074074074074074) < 1e-12
    assert all(abs(y) <= 1.0 + 1e-12 for y in out["final_y"])
    again = sc.simulate()
    assert out["avg_y"] == again["avg_y"], "simulate must be reproducible"

    # replicated runs and a coarse threshold sweep at desk scale
    sc = m.Scenario(family="rr", n=40, lambda_=0.1, mu=0.001, seed=3, replicates=6, horizon=6400)
    reps = sc.run_replicates()
    assert [r["replicate"] for r in reps] == list(range(6))
    assert len({r["seed"] for r in reps}) == 6

    sweep = sc.lambda_sweep([0.0, 0.3, 0.6])
    assert sweep["lambda_hat"] in sweep["grid"]
    assert all(v >= 0.0 for v in sweep["variance"])

    cells = sc.sweep2d([0.1, 0.5], [0.0, 0.01])
    assert len(cells) == 4
    assert {c["modal_regime"] for c in cells} <= {
        "paradigm_shift",
        "unpopular_norm",
        "popular_disadvantageous_norm",
        "undetermined",
    }

    # the fully-rational exclusion regime: nobody ever adopts
    sc = m.Scenario(
        family="rr", n=30, lambda_=0.2, mu=0.0, beta=math.inf, seed=5, horizon=20000
    )
    check = sc.theory_check()
    assert check["paradigm_shift_excluded"]
    out = sc.simulate()
    assert all(abs(x - (-1.0 + 2.0 / 30.0)) < 1e-12 for x in out["avg_x"])

    print("smoke test PASS")


if __name__ == "__main__":
    main()
