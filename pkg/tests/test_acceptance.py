"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line."""
import json
import math
import time

import numpy as np
import pytest

from aflab import cli
from aflab.experiment import refinement_study, smooth_random_profile
from aflab.flow import rhs_conformal, rhs_intrinsic
from aflab.grid import Geometry, Grid, grad_sq, inner, lap_hat
from aflab.operators import eigensolve

from conftest import geometry, record

CONFIGS = __import__("pathlib").Path(__file__).resolve().parent.parent / "configs"


def cli_run(command, config, out, *extra):
    t0 = time.perf_counter()
    code = cli.main([command, str(CONFIGS / config), "--out", str(out), *extra])
    elapsed = time.perf_counter() - t0
    rep = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, rep, elapsed


def assertion(rep, name):
    hits = [a for a in rep["assertions"] if a["name"] == name]
    assert hits, f"report has no assertion {name!r}"
    return hits[0]


@pytest.fixture(scope="module")
def blowup_run(tmp_path_factory):
    return cli_run("run", "blowup.json", tmp_path_factory.mktemp("blowup"))


@pytest.fixture(scope="module")
def large_run(tmp_path_factory):
    return cli_run("run", "large_data.json", tmp_path_factory.mktemp("large"))


@pytest.fixture(scope="module")
def bump16_modes():
    g = geometry("synthetic-bump", 16, bump_amplitude=10.0)
    sp = eigensolve(g, k=4)
    ef0 = 3.0 + 0.3 * (sp.eigenfunctions[1] + sp.eigenfunctions[2] + sp.eigenfunctions[3])
    return g, sp, ef0


REFINE_DTS = (8e-4, 4e-4, 2e-4)
REFINE_T, REFINE_SKIP = 0.04, 0.01


def _ratios(levels, attr):
    vals = np.array([np.max(getattr(lv, attr)) for lv in levels])
    return vals[:-1] / vals[1:]


# ---------------------------------------------------------------------------

def test_criterion_01_operators():
    t0 = time.perf_counter()
    errs_lap, errs_grad, sbp = [], [], 0.0
    for n in (32, 64, 128):
        grid = Grid(n, n)
        X, Y = grid.coords()
        tx, ty = 2 * np.pi * X, 2 * np.pi * Y
        gh = 1.0 + 0.3 * np.sin(tx) * np.cos(ty)
        geom = Geometry(grid, gh, np.zeros(grid.shape))
        u = np.sin(tx) * np.cos(2 * ty) + np.cos(ty)
        ux = 2 * np.pi * np.cos(tx) * np.cos(2 * ty)
        uy = -4 * np.pi * np.sin(tx) * np.sin(2 * ty) - 2 * np.pi * np.sin(ty)
        uxx = -(2 * np.pi) ** 2 * np.sin(tx) * np.cos(2 * ty)
        uyy = -(4 * np.pi) ** 2 * np.sin(tx) * np.cos(2 * ty) - (2 * np.pi) ** 2 * np.cos(ty)
        errs_lap.append(np.abs(lap_hat(u, geom) - (uxx + uyy) / (4 * gh)).max())
        errs_grad.append(np.abs(grad_sq(u, geom) - (ux * ux + uy * uy) / (4 * gh)).max())
        rng = np.random.default_rng(n)
        a, b = rng.standard_normal(grid.shape), rng.standard_normal(grid.shape)
        lhs, rhs = inner(lap_hat(a, geom), b, geom), inner(a, lap_hat(b, geom), geom)
        sbp = max(sbp, abs(lhs - rhs) / abs(lhs))
    elapsed = time.perf_counter() - t0
    r_lap = min(errs_lap[i] / errs_lap[i + 1] for i in range(2))
    r_grad = min(errs_grad[i] / errs_grad[i + 1] for i in range(2))
    ok = r_lap >= 3.7 and r_grad >= 3.7 and sbp <= 1e-10 and elapsed < 5
    record(1, ok, f"lap ratio {r_lap:.3f}, grad ratio {r_grad:.3f}, sbp {sbp:.1e}, "
                  f"{elapsed:.1f}s")
    assert ok


def test_criterion_02_spinorial(tmp_path):
    code, rep, elapsed = cli_run("verify-spinorial", "spinorial.json", tmp_path)
    ratios = {a["name"]: a["value"] for a in rep["assertions"]}
    ok = code == 0 and rep["passed"] and elapsed < 10
    record(2, ok, ", ".join(f"{k} {v:.3g}" for k, v in ratios.items()) + f", {elapsed:.1f}s")
    assert ok


def test_criterion_03_form_equivalence():
    t0 = time.perf_counter()
    worst = []
    for n in (64, 128, 256):
        g = geometry("synthetic-bump", n, bump_amplitude=10.0)
        e = 0.0
        for seed in (1, 2, 3):
            ef = 3.0 * (1.0 + 0.4 * smooth_random_profile(g.grid, seed))
            a, b = rhs_conformal(ef, g), rhs_intrinsic(ef, g)
            e = max(e, float(np.abs(a - b).max() / np.abs(a).max()))
        worst.append(e)
    elapsed = time.perf_counter() - t0
    ratio = min(worst[0] / worst[1], worst[1] / worst[2])
    ok = worst[2] <= 1e-3 and ratio >= 3.7 and elapsed < 5
    record(3, ok, f"rel diff at 256 {worst[2]:.2e}, ratio {ratio:.3f}, {elapsed:.1f}s")
    assert ok


def test_criterion_04_energy(blowup_run, large_run, bump16_modes, tmp_path):
    code, rep_flat, _ = cli_run("run", "flat_conservation.json", tmp_path)
    increases = [assertion(r, "energy_monotone")["value"] for r in
                 (blowup_run[1], large_run[1], rep_flat)]
    monotone = all(assertion(r, "energy_monotone")["passed"]
                   for r in (blowup_run[1], large_run[1], rep_flat))
    g, sp, ef0 = bump16_modes
    t0 = time.perf_counter()
    euler = refinement_study(g, sp, ef0, "euler", 2, REFINE_DTS, REFINE_T, REFINE_SKIP)
    rk4 = refinement_study(g, sp, ef0, "rk4", 4, REFINE_DTS, REFINE_T, REFINE_SKIP)
    elapsed = time.perf_counter() - t0
    re, rr = _ratios(euler, "energy"), _ratios(rk4, "energy")
    ok = (monotone and np.all((re >= 1.6) & (re <= 2.4))
          and np.all((rr >= 12.8) & (rr <= 19.2)) and elapsed < 30)
    record(4, ok, f"max dI/I per step {max(increases):.1e}; dI/dt-dissipation ratios "
                  f"euler {np.round(re, 2).tolist()}, rk4 {np.round(rr, 2).tolist()}, "
                  f"{elapsed:.1f}s")
    assert ok


def test_criterion_05_conservation(bump16_modes, tmp_path):
    t0 = time.perf_counter()
    code, rep, _ = cli_run("run", "flat_conservation.json", tmp_path)
    drift = rep["A_drift"]
    g, sp, ef0 = bump16_modes
    rk4_c2 = refinement_study(g, sp, ef0, "rk4", 2, REFINE_DTS, REFINE_T, REFINE_SKIP)
    rk4_c4 = refinement_study(g, sp, ef0, "rk4", 4, REFINE_DTS, REFINE_T, REFINE_SKIP)
    elapsed = time.perf_counter() - t0
    r2 = np.array([lv.modal for lv in rk4_c2])
    r4 = np.array([lv.modal for lv in rk4_c4])
    q2 = r2[:-1] / r2[1:]
    q4 = r4[:-1] / r4[1:]
    ok = (code == 0 and rep["t_final"] == 1.0 and drift <= 1e-12
          and np.all((q2 >= 3.2) & (q2 <= 4.8)) and np.all((q4 >= 12.8) & (q4 <= 19.2))
          and elapsed < 60)
    record(5, ok, f"flat drift {drift:.1e}; modal ratios 3-pt {q2.min():.2f}-{q2.max():.2f}, "
                  f"5-pt {q4.min():.2f}-{q4.max():.2f}, {elapsed:.1f}s")
    assert ok


def test_criterion_06_blowup(blowup_run):
    code, rep, elapsed = blowup_run
    d = rep
    bound = d["bound"]
    frac_ok = math.isclose(bound["K"] * d["A0"] ** 2, 0.5 * bound["P"], rel_tol=1e-12)
    env = assertion(rep, "envelope")
    ok = (code == 0 and d["status"] == "BlownUp" and d["t_sing"] <= bound["t_max"]
          and env["passed"] and frac_ok and elapsed < 60)
    record(6, ok, f"t_sing {d['t_sing']:.5g} <= t_max {bound['t_max']:.5g}, "
                  f"envelope slack {env['value']:.3g}, {elapsed:.1f}s")
    assert ok


def test_criterion_07_large_data(large_run):
    code, rep, elapsed = large_run
    d = rep
    names = ("completed", "positivity", "eta_fit", "v_convergence", "curvature_decay")
    res = {n: assertion(rep, n) for n in names}
    ok = code == 0 and all(a["passed"] for a in res.values()) and elapsed < 120
    record(7, ok, f"min u/max u {res['positivity']['value']:.3g}, "
                  f"eta rel err {res['eta_fit']['value']:.1e}, "
                  f"ef dist {res['v_convergence']['value']:.1e}, "
                  f"proxy exponent/eta {res['curvature_decay']['value']:.3f}, "
                  f"t_end {d['t_final']:.4g}, {elapsed:.1f}s")
    assert ok


def test_criterion_07_proxy_rate_is_twice_eta(large_run):
    # the proxy behaves like e^{-2f}, so its exponent tracks 2 eta
    ratio = assertion(large_run[1], "curvature_decay")["value"]
    assert abs(ratio - 2.0) <= 0.2 * 2.0


def test_criterion_08_twin(tmp_path):
    code, rep, elapsed = cli_run("twin", "twin.json", tmp_path)
    d = rep
    ok = (code == 0 and rep["passed"] and d["run1"]["status"] == "BlownUp"
          and d["run2"]["status"] == "Completed" and elapsed < 180)
    record(8, ok, f"run1 {d['run1']['status']}, run2 {d['run2']['status']}, "
                  f"M {d['M']:.4g}, tracked diff {assertion(rep, 'tracked_modes_agree')['value']:.1e}, "
                  f"{elapsed:.1f}s")
    assert ok


def test_criterion_09_eigensolver(tmp_path):
    t0 = time.perf_counter()
    parts, ok = [], True
    for cfg in ("spectrum_flat.json", "spectrum_constant.json"):
        out = tmp_path / cfg.split(".")[0]
        code, rep, _ = cli_run("spectrum", cfg, out)
        cf = assertion(rep, "closed_form")
        res = assertion(rep, "residuals")
        pos = assertion(rep, "q1_positive")
        ok &= code == 0 and cf["passed"] and res["passed"] and pos["passed"]
        parts.append(f"{rep['geometry']} err {cf['value']:.1e} res {res['value']:.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10
    record(9, ok, "; ".join(parts) + f", {elapsed:.1f}s")
    assert ok


def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    blobs = []
    for i in range(2):
        out = tmp_path / str(i)
        code, _, _ = cli_run("run", "medium.json", out, "--seed", "7")
        assert code == 0
        blobs.append(((out / "run.csv").read_bytes(), (out / "report.json").read_bytes()))
    elapsed = time.perf_counter() - t0
    ok = blobs[0] == blobs[1] and elapsed < 30
    record(10, ok, f"run.csv {len(blobs[0][0])} bytes identical={blobs[0][0] == blobs[1][0]}, "
                   f"report.json identical={blobs[0][1] == blobs[1][1]}, {elapsed:.1f}s")
    assert ok
