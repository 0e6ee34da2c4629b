"""Secondary acceptance: all four figure kinds render from real pipeline
outputs, produced by invoking the simulation CLI as an external tool."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from fvplots.render import FigureRequest, render

GAMMA_BRACKET = (5.27, 5.29)


def fvsim_cmd():
    exe = shutil.which("fvsim")
    return [exe] if exe else [sys.executable, "-m", "fvsim.cli"]


def run_fvsim(sub, cfg_path, out_dir):
    res = subprocess.run([*fvsim_cmd(), sub, "--config", str(cfg_path),
                          "--out", str(out_dir)], capture_output=True, text=True)
    assert res.returncode == 0, f"fvsim {sub} failed: {res.stderr}"


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    cfg = {
        "domain": {"kind": "interval", "a": -1.0, "b": 1.0},
        "drift": {"variant": "zero"},
        "N": 200,
        "dt": 5e-4,
        "T": 3.0,
        "snapshot_every": 0.05,
        "seed": 1010,
        "initial": {"sampler": "uniform"},
        "pde": {"m": 199, "dt": 1e-3},
        "qsd": {"tol": 1e-9, "guess": "flat"},
        "bifurcation": {"gamma_min": 0.0, "gamma_max": 10.0, "gamma_step": 0.1},
        "compare": {"n_ladder": [50, 100, 200], "seeds": [1, 2, 3], "t_eval": 0.5},
    }
    cfg_path = root / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    for sub in ("simulate", "qsd", "bifurcation", "compare"):
        run_fvsim(sub, cfg_path, root / sub)

    # analytic zero-drift profile for the overlay
    x = np.linspace(-1, 1, 201)
    analytic = root / "analytic.csv"
    pd.DataFrame({"x": x, "density": np.pi / 4 * np.cos(np.pi * x / 2)}).to_csv(
        analytic, index=False)
    return root


def test_criterion_10_all_four_figures(pipeline):
    figs = {
        "qsd_overlay": (pipeline / "qsd" / "qsd.csv",
                        pipeline / "simulate" / "qsd_estimate.csv",
                        pipeline / "analytic.csv"),
        "convergence": (pipeline / "compare" / "w1_vs_N.csv",),
        "killing_linearity": (pipeline / "simulate" / "trajectory.csv",),
        "bifurcation": (pipeline / "bifurcation" / "branches.csv",),
    }
    metas = {}
    for kind, inputs in figs.items():
        out = pipeline / f"{kind}.png"
        metas[kind] = render(FigureRequest(kind, inputs, out))
        assert out.exists() and out.stat().st_size > 0, kind

    # the bifurcation data behind the figure: one branch below the critical
    # bracket, three above it
    df = pd.read_csv(pipeline / "bifurcation" / "branches.csv")
    counts = df.groupby("gamma")["root"].count()
    below = counts[counts.index < GAMMA_BRACKET[0]]
    above = counts[counts.index > GAMMA_BRACKET[1]]
    assert (below == 1).all()
    assert (above == 3).all()
    assert metas["bifurcation"]["max_branches"] == 3
    ok = True
    print(f"[criterion 10] {'PASS' if ok else 'FAIL'}: all four figure kinds rendered; "
          f"branches 1 below / 3 above the critical bracket "
          f"(kill-rate fit {metas['killing_linearity']['rate']:.4f}, "
          f"convergence slope {metas['convergence']['slope']:.3f})")
