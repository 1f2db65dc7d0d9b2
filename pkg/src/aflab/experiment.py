"""Experiment drivers behind the command line: build the geometry, solve for
the low spectrum, integrate, log diagnostics and evaluate scenario checks.

Each driver returns a :class:`Report`; ``report.passed`` is False when any
assertion failed. Precondition failures raise :class:`UsageError`.
"""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from aflab import diagnostics as dg
from aflab import fieldio, spinorial
from aflab.config import ExperimentConfig
from aflab.flow import FlowState, Status, cfl_dt, step, u_from_ef, write_checkpoint
from aflab.grid import Geometry, GeometryConfig, GeometryError, build_geometry, inner
from aflab.operators import SpectralData, eigensolve

log = logging.getLogger("aflab")


class UsageError(ValueError):
    pass


@dataclass
class Assertion:
    name: str
    passed: bool
    value: object = None
    limit: object = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "value": _jsonable(self.value),
                "limit": _jsonable(self.limit), "detail": self.detail}


@dataclass
class Report:
    kind: str
    data: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, name, passed, value=None, limit=None, detail=""):
        a = Assertion(name, bool(passed), value, limit, detail)
        self.assertions.append(a)
        return a

    def as_dict(self) -> dict:
        out = {"kind": self.kind, "passed": self.passed}
        out.update({k: _jsonable(v) for k, v in self.data.items()})
        out["assertions"] = [a.as_dict() for a in self.assertions]
        return out

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True, allow_nan=True)
            fh.write("\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, Report):
        return x.as_dict()
    return x


# --------------------------------------------------------------------------
# setup

def geometry_from(cfg: ExperimentConfig, periodic_only: bool = True) -> Geometry:
    geo = cfg.geometry
    gc = GeometryConfig(
        preset=None if geo.preset == "file" else geo.preset, nx=cfg.grid.nx, ny=cfg.grid.ny,
        lx=cfg.grid.lx, ly=cfg.grid.ly, alpha_prime=cfg.alpha_prime, normalize=geo.normalize,
        kappa_level=geo.kappa_level, bump_amplitude=geo.bump_amplitude,
        g_hat_file=geo.g_hat_file, kappa_file=geo.kappa_file)
    try:
        geom = build_geometry(gc)
    except (GeometryError, fieldio.FormatError, OSError) as exc:
        raise UsageError(f"geometry: {exc}") from None
    if periodic_only and not geom.grid.periodic:
        raise UsageError("geometry.preset: the flow needs a periodic geometry "
                         f"({geo.preset} is a non-periodic patch)")
    return geom


def spectrum_from(cfg: ExperimentConfig, geom: Geometry) -> SpectralData:
    return eigensolve(geom, cfg.spectral.k, cfg.spectral.kernel_tol)


def smooth_random_profile(grid, seed: int, kmax: int = 4) -> np.ndarray:
    """Trigonometric polynomial with random coefficients, scaled to max |p| = 1."""
    rng = np.random.default_rng(seed)
    X, Y = grid.coords()
    p = np.zeros(grid.shape)
    for kx in range(-kmax, kmax + 1):
        for ky in range(0, kmax + 1):
            if ky == 0 and kx <= 0:
                continue
            a, b = rng.standard_normal(2) / (1.0 + kx * kx + ky * ky)
            ph = 2 * np.pi * (kx * X / grid.lx + ky * Y / grid.ly)
            p += a * np.cos(ph) + b * np.sin(ph)
    return p / float(np.abs(p).max())


def initial_ef(cfg: ExperimentConfig, geom: Geometry, spectral: SpectralData | None) -> np.ndarray:
    ini = cfg.initial
    if ini.kind == "constant":
        ef = np.full(geom.grid.shape, ini.value)
    elif ini.kind == "constant-plus-mode":
        ef = ini.value + ini.epsilon * spectral.eigenfunctions[ini.mode_index]
    elif ini.kind == "random-smooth":
        ef = ini.value * (1.0 + ini.epsilon * smooth_random_profile(geom.grid, cfg.seed))
    else:
        try:
            grid, ef = fieldio.read_field(ini.file)
        except (fieldio.FormatError, OSError) as exc:
            raise UsageError(f"initial.file: {exc}") from None
        if grid.shape != geom.grid.shape:
            raise UsageError("initial.file: grid does not match the geometry")
    if not np.all(ef > 0):
        raise UsageError("initial: e^f must be positive everywhere")
    if ini.scale == "u-margin":
        neg = geom.kappa < 0
        if not np.any(neg):
            raise UsageError("initial.scale: u-margin needs kappa < 0 somewhere")
        ratio = ef[neg] / np.sqrt(0.5 * geom.alpha_prime * -geom.kappa[neg])
        ef = ef * (ini.target / float(ratio.min()))
    elif ini.scale == "mass-fraction":
        P = 0.5 * geom.alpha_prime * geom.kappa_l1 ** 2
        if not (P > 0 and geom.K > 0):
            raise UsageError("initial.scale: mass-fraction needs kappa != 0")
        A = dg.mass(ef, geom)
        ef = ef * (math.sqrt(ini.target * P / geom.K) / A)
    return np.ascontiguousarray(ef, dtype=float)


def tracked_modes(cfg: ExperimentConfig, spectral: SpectralData) -> list:
    if cfg.spectral.tracked_modes is not None:
        return list(cfg.spectral.tracked_modes)
    return list(range(len(spectral.eigenvalues)))


# --------------------------------------------------------------------------
# integration with monitors

@dataclass
class RunResult:
    state: FlowState
    records: list
    max_energy_increase: float
    min_u_ratio: float
    max_mass_increase: float
    steps: int


def integrate_logged(cfg: ExperimentConfig, geom: Geometry, spectral: SpectralData,
                     ef0: np.ndarray, t_end: float) -> RunResult:
    tcfg = cfg.time
    modes = tracked_modes(cfg, spectral)
    phis = dg.kernel_functions(spectral, geom)
    state = FlowState.initial(ef0, geom)
    u = u_from_ef(state.ef, geom)
    I_prev = dg.energy(u, geom)
    A_prev = dg.mass(state.ef, geom)
    dt0 = tcfg.dt if tcfg.dt is not None else cfl_dt(state.ef, geom, tcfg.cfl_safety)
    records = [dg.snapshot(0.0, dt0, state.ef, u, geom, spectral, modes, phis)]
    max_dI = -math.inf
    max_dA = -math.inf
    min_ratio = float(u.min() / max(abs(u.max()), 1e-300))
    every = cfg.output.sample_every
    while state.status is Status.RUNNING:
        if state.step >= tcfg.max_steps:
            state = _abort(state, "max_steps reached")
            break
        state = step(state, geom, tcfg.scheme, tcfg.cfl_safety, tcfg.blowup_eps, tcfg.dt,
                     t_end, tcfg.form)
        if state.status is Status.ABORTED:
            break
        u = u_from_ef(state.ef, geom)
        I = dg.energy(u, geom)
        max_dI = max(max_dI, (I - I_prev) / max(abs(I_prev), 1e-300))
        I_prev = I
        A = dg.mass(state.ef, geom)
        max_dA = max(max_dA, (A - A_prev) / A_prev)
        A_prev = A
        umax = float(u.max())
        if umax > 0:
            min_ratio = min(min_ratio, float(u.min()) / umax)
        if state.status is not Status.RUNNING or state.step % every == 0:
            records.append(dg.snapshot(state.t, state.dt, state.ef, u, geom, spectral,
                                       modes, phis))
    dg.finalize_records(records, spectral, cfg.scenario.derivative_order,
                        cfg.scenario.fit_window)
    log.info("run finished: %s at t=%.6g after %d steps", state.status.value, state.t, state.step)
    return RunResult(state, records, max_dI, min_ratio, max_dA, state.step)


def _abort(state, reason):
    from dataclasses import replace
    return replace(state, status=Status.ABORTED, reason=reason)


def gap_time(spectral: SpectralData, v_tol: float) -> float:
    """``log(10 / v_tol) / min(gap, 2 eta)``: the slower transient has decayed
    by a factor ten below ``v_tol``."""
    rate = min(spectral.gap, 2.0 * spectral.eta) if spectral.eta > 0 else spectral.gap
    if not (rate > 0 and math.isfinite(rate)):
        raise UsageError("t_end from gap: spectrum has no positive transient rate")
    return math.log(10.0 / v_tol) / rate


def t_end_for(cfg: ExperimentConfig, spectral: SpectralData) -> float:
    if not cfg.scenario.t_end_from_gap:
        return cfg.time.t_end
    return gap_time(spectral, cfg.scenario.v_tol)


@dataclass
class RefinementLevel:
    dt: float
    modal: np.ndarray      # max balance residual per tracked mode
    energy: float          # max |dI/dt - dissipation|
    mass: float            # max |dA/dt - mass_rate|


def refinement_study(geom: Geometry, spectral: SpectralData, ef0, scheme: str, order: int,
                     dts, t_end: float, t_skip: float = 0.0, modes=None) -> list:
    """Fixed-step runs at each ``dt``; residuals of the time-differenced
    identities over samples with ``t >= t_skip``."""
    from aflab.flow import integrate_flow

    modes = list(range(len(spectral.eigenvalues))) if modes is None else list(modes)
    out = []
    for dt in dts:
        recs = []

        def cb(s, dt=dt):
            u = u_from_ef(s.ef, geom)
            recs.append(dg.snapshot(s.t, dt, s.ef, u, geom, spectral, modes))

        integrate_flow(ef0, geom, t_end, scheme, dt=dt, callback=cb)
        dg.finalize_records(recs, spectral, order)
        t = np.array([r.t for r in recs])
        keep = t >= t_skip
        modal = np.array([[r.modal[k][3] for k in range(len(modes))] for r in recs])
        eI = np.abs(dg.series_derivative(t, [r.I_u for r in recs], order)
                    - np.array([r.dissipation for r in recs]))
        lhs, rhs = dg.mass_derivative_identity(t, [r.A for r in recs],
                                               [r.mass_rate for r in recs], order)
        out.append(RefinementLevel(dt, np.nanmax(modal[keep], axis=0),
                                   float(np.nanmax(eI[keep])),
                                   float(np.nanmax(np.abs(lhs - rhs)[keep]))))
    return out


# --------------------------------------------------------------------------
# scenario checks

def check_energy(report: Report, res: RunResult, cfg: ExperimentConfig):
    report.check("energy_monotone", res.max_energy_increase <= cfg.scenario.energy_tol,
                 res.max_energy_increase, cfg.scenario.energy_tol,
                 "largest per-step relative increase of I(u)")


def check_kernel_bound(report: Report, res: RunResult):
    if not res.records or not res.records[0].V:
        return
    worst = max(float(np.linalg.norm(r.V)) - r.A for r in res.records)
    report.check("kernel_lower_bound", worst <= 1e-12 * max(1.0, res.records[0].A), worst, 0.0,
                 "max over samples of |V| - A")


def large_data_checks(report: Report, res: RunResult, cfg, spectral, t_end):
    sc = cfg.scenario
    recs = res.records
    st = res.state
    report.check("completed", st.status is Status.COMPLETED and st.t >= t_end,
                 st.status.value, "Completed")
    check_energy(report, res, cfg)
    report.check("positivity", res.min_u_ratio >= -sc.positivity_tol, res.min_u_ratio,
                 -sc.positivity_tol, "min over steps of min u / max u")
    t = [r.t for r in recs]
    eta = spectral.eta
    if len(recs) >= 10 and eta > 0:
        eta_fit = dg.growth_fit(t, [r.A for r in recs], sc.fit_window)
        rel = abs(eta_fit - eta) / eta
        report.check("eta_fit", rel <= sc.eta_tol, rel, sc.eta_tol,
                     f"eta_fit={eta_fit:.10g}, eta={eta:.10g}")
        gamma = dg.decay_fit(t, [r.curv_proxy for r in recs], sc.fit_window)
        report.check("curvature_decay", gamma >= (1.0 - sc.curv_tol) * eta, gamma / eta,
                     1.0 - sc.curv_tol,
                     f"decay exponent of the proxy over eta (gamma={gamma:.10g})")
        report.data["eta_fit"] = eta_fit
        report.data["curvature_decay_exponent"] = gamma
    else:
        report.check("eta_fit", False, None, sc.eta_tol,
                     "needs >= 10 samples and eta > 0")
    report.check("v_convergence", recs[-1].ef_dist <= sc.v_tol, recs[-1].ef_dist, sc.v_tol,
                 "max |e^f/||e^f|| - q1| at t_end")
    report.data["v_dist_final"] = recs[-1].v_dist
    report.data["harnack_final"] = recs[-1].harnack_ratio
    check_kernel_bound(report, res)


def blowup_checks(report: Report, res: RunResult, cfg, bound):
    recs = res.records
    st = res.state
    report.check("blown_up", st.status is Status.BLOWN_UP, st.status.value, "BlownUp")
    if st.t_sing is not None:
        report.check("t_sing_bound", st.t_sing <= bound.t_max, st.t_sing, bound.t_max)
    t = np.array([r.t for r in recs])
    A = np.array([r.A for r in recs])
    ok = bound.holds(t, A, cfg.scenario.envelope_inflation)
    slack = (1.0 + cfg.scenario.envelope_inflation) * bound.envelope(t) - bound.K * A * A
    report.check("envelope", bool(np.all(ok)), float(slack.min()), 0.0,
                 "min over samples of inflated envelope minus K A^2")
    report.check("mass_decreasing", res.max_mass_increase <= 1e-12, res.max_mass_increase, 1e-12,
                 "largest per-step relative increase of A while K A^2 < P")
    check_energy(report, res, cfg)
    check_kernel_bound(report, res)


# --------------------------------------------------------------------------
# drivers

def _prepare_out(path):
    os.makedirs(path, exist_ok=True)
    return path


def _flow_summary(res: RunResult) -> dict:
    st = res.state
    A0 = res.records[0].A
    drift = max(abs(r.A - A0) for r in res.records) / A0
    out = {"status": st.status.value, "steps": st.step, "A_final": res.records[-1].A,
           "A_drift": drift}
    if st.status is Status.BLOWN_UP:
        out["t_sing"] = st.t_sing
        out["location"] = list(st.location)
    else:
        out["t_final"] = st.t
    if st.reason:
        out["reason"] = st.reason
    return out


def _write_run(out, cfg, geom, spectral, res, ef0):
    dg.write_csv(res.records, os.path.join(out, "run.csv"))
    spectral.write_csv(os.path.join(out, "spectrum.csv"))
    if cfg.output.dump_fields:
        fieldio.write_field(os.path.join(out, "ef_initial.bin"), geom.grid, ef0)
        fieldio.write_field(os.path.join(out, "q1.bin"), geom.grid, spectral.q1)
        write_checkpoint(res.state, geom, os.path.join(out, "ef_final.bin"))


def precondition(cfg, geom, ef0, kind):
    """Scenario preconditions; returns the blow-up bound (or None)."""
    if kind == "large-data":
        u0 = u_from_ef(ef0, geom)
        if float(u0.min()) < 0:
            raise UsageError(f"scenario large-data: initial u is not >= 0 (min u = {u0.min():.6g})")
        return None
    if kind == "blowup":
        A0 = dg.mass(ef0, geom)
        bound = dg.blowup_bound(A0, geom)
        if not bound.applies:
            raise UsageError(f"scenario blowup: initial data not small: E <= 0 (E = {bound.E:.6g})")
        return bound
    return None


def run(cfg: ExperimentConfig, out: str) -> Report:
    geom = geometry_from(cfg)
    spectral = spectrum_from(cfg, geom)
    ef0 = initial_ef(cfg, geom, spectral)
    kind = cfg.scenario.kind
    bound = precondition(cfg, geom, ef0, kind)
    t_end = t_end_for(cfg, spectral)
    _prepare_out(out)
    res = integrate_logged(cfg, geom, spectral, ef0, t_end)
    report = Report("run")
    report.data.update({"scenario": kind, "geometry": geom.name, "eta": spectral.eta,
                        "gap": spectral.gap, "t_end": t_end, "A0": res.records[0].A})
    report.data.update(_flow_summary(res))
    if bound is not None:
        report.data["bound"] = {"P": bound.P, "E": bound.E, "K": bound.K, "t_max": bound.t_max}
    if kind == "large-data":
        large_data_checks(report, res, cfg, spectral, t_end)
    elif kind == "blowup":
        blowup_checks(report, res, cfg, bound)
    elif kind == "none":
        check_energy(report, res, cfg)
        if res.state.status is Status.ABORTED:
            report.check("not_aborted", False, res.state.reason)
    if kind != "medium" and not np.any(geom.kappa):
        report.check("mass_conserved", report.data["A_drift"] <= 1e-12, report.data["A_drift"],
                     1e-12, "max relative drift of A with kappa = 0")
    _write_run(out, cfg, geom, spectral, res, ef0)
    report.write(os.path.join(out, "report.json"))
    return report


def minimal_twin_mass(ef1, q1, geom, m_max, iters: int = 80) -> float:
    """Smallest ``M`` (to bisection accuracy, from above) with ``u(ef1 + M q1) > 0``."""
    def admissible(M):
        ef = ef1 + M * q1
        return bool(np.all(ef > 0) and np.all(u_from_ef(ef, geom) > 0))

    if admissible(0.0):
        return 0.0
    lo, hi = 0.0, 1e-6 * max(1.0, float(np.max(ef1)))
    while not admissible(hi):
        lo, hi = hi, 2.0 * hi
        if hi > m_max:
            raise UsageError(f"twin.m_max: no M <= {m_max:g} makes u2 > 0; raise the bound")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if admissible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def twin(cfg: ExperimentConfig, out: str) -> Report:
    geom = geometry_from(cfg)
    spectral = spectrum_from(cfg, geom)
    if not spectral.ground_state_positive:
        raise UsageError("twin: q1 is not positive; cannot build the second datum")
    ef1 = initial_ef(cfg, geom, spectral)
    bound = precondition(cfg, geom, ef1, "blowup")
    q1 = spectral.q1
    M_min = minimal_twin_mass(ef1, q1, geom, cfg.twin.m_max)
    M = M_min * cfg.twin.m_margin
    ef2 = ef1 + M * q1
    if not np.all(u_from_ef(ef2, geom) > 0):
        raise UsageError("twin: chosen M does not give u2 > 0")
    report = Report("twin")
    report.data.update({"geometry": geom.name, "M_min": M_min, "M": M, "eta": spectral.eta,
                        "gap": spectral.gap})

    # tracked near-kernel data: every tracked mode other than q1 itself
    modes = [j for j in tracked_modes(cfg, spectral) if j != 0]
    diffs = {str(j): abs(inner(ef1, spectral.eigenfunctions[j], geom)
                         - inner(ef2, spectral.eigenfunctions[j], geom))
             for j in modes}
    worst = max(diffs.values()) if diffs else 0.0
    report.check("tracked_modes_agree", worst <= cfg.twin.match_tol, worst, cfg.twin.match_tol,
                 "max |<e^f1, q_j> - <e^f2, q_j>| over tracked j != 1")
    phis = dg.kernel_functions(spectral, geom)
    if len(phis):
        dv = float(np.linalg.norm(dg.kernel_vector(ef1, phis, geom)
                                  - dg.kernel_vector(ef2, phis, geom)))
        report.check("kernel_vector_agree", dv <= cfg.twin.match_tol, dv, cfg.twin.match_tol)
    report.data["mode_differences"] = diffs

    d1 = _prepare_out(os.path.join(out, "run1"))
    res1 = integrate_logged(cfg, geom, spectral, ef1, cfg.time.t_end)
    r1 = Report("run")
    r1.data.update(_flow_summary(res1))
    r1.data["bound"] = {"P": bound.P, "E": bound.E, "K": bound.K, "t_max": bound.t_max}
    blowup_checks(r1, res1, cfg, bound)
    _write_run(d1, cfg, geom, spectral, res1, ef1)
    r1.write(os.path.join(d1, "report.json"))

    t2 = cfg.twin.t_end if cfg.twin.t_end is not None else gap_time(spectral, cfg.scenario.v_tol)
    d2 = _prepare_out(os.path.join(out, "run2"))
    res2 = integrate_logged(cfg, geom, spectral, ef2, t2)
    r2 = Report("run")
    r2.data.update(_flow_summary(res2))
    r2.data["t_end"] = t2
    large_data_checks(r2, res2, cfg, spectral, t2)
    _write_run(d2, cfg, geom, spectral, res2, ef2)
    r2.write(os.path.join(d2, "report.json"))

    for prefix, sub in (("run1", r1), ("run2", r2)):
        for a in sub.assertions:
            report.assertions.append(Assertion(f"{prefix}.{a.name}", a.passed, a.value,
                                               a.limit, a.detail))
    report.data["run1"] = r1.data
    report.data["run2"] = r2.data
    _prepare_out(out)
    report.write(os.path.join(out, "report.json"))
    return report


def closed_form_spectrum(geom: Geometry, k: int) -> np.ndarray | None:
    """Lowest ``k`` eigenvalues of the discrete operator for constant ghat and kappa."""
    if geom.name not in ("flat-zero", "constant-kappa"):
        return None
    g = geom.grid
    gh = float(geom.g_hat.flat[0])
    kap = float(geom.kappa.flat[0])
    p = np.arange(g.nx)
    q = np.arange(g.ny)
    sx = np.sin(np.pi * p / g.nx) ** 2 / g.hx ** 2
    sy = np.sin(np.pi * q / g.ny) ** 2 / g.hy ** 2
    lam = (sx[None, :] + sy[:, None]).ravel() / gh + kap
    return np.sort(lam)[:k]


def spectrum(cfg: ExperimentConfig, out: str) -> Report:
    geom = geometry_from(cfg)
    spectral = spectrum_from(cfg, geom)
    _prepare_out(out)
    spectral.write_csv(os.path.join(out, "spectrum.csv"))
    if cfg.output.dump_fields:
        for j, q in enumerate(spectral.eigenfunctions):
            fieldio.write_field(os.path.join(out, f"q{j + 1}.bin"), geom.grid, q)
    report = Report("spectrum")
    report.data.update({"geometry": geom.name, "eigenvalues": list(spectral.eigenvalues),
                        "residuals": list(spectral.residuals), "eta": spectral.eta,
                        "kernel_indices": spectral.kernel_indices,
                        "degenerate": spectral.degenerate, "iterations": spectral.iterations})
    report.check("residuals", float(np.max(spectral.residuals)) <= 1e-8,
                 float(np.max(spectral.residuals)), 1e-8)
    report.check("q1_positive", spectral.ground_state_positive, spectral.ground_state_positive, True)
    exact = closed_form_spectrum(geom, len(spectral.eigenvalues))
    if exact is not None:
        err = np.abs(spectral.eigenvalues - exact) / np.maximum(1.0, np.abs(exact))
        report.check("closed_form", float(err.max()) <= 1e-9, float(err.max()), 1e-9,
                     "max |lam - lam_exact| / max(1, |lam_exact|)")
        report.data["closed_form"] = list(exact)
    rq = [spectral.eigenvalues[j] - _rq(spectral.eigenfunctions[j], geom)
          for j in range(len(spectral.eigenvalues))]
    report.data["rayleigh_defect"] = [abs(x) for x in rq]
    report.write(os.path.join(out, "report.json"))
    return report


def _rq(w, geom):
    from aflab.operators import rayleigh_quotient
    return rayleigh_quotient(w, geom)


def verify_spinorial(cfg: ExperimentConfig, out: str) -> Report:
    sp = cfg.spinorial
    rows = []
    unit = 0.0
    for n in sp.resolutions:
        patch = spinorial.patch_geometry(n, alpha_prime=cfg.alpha_prime, half_width=sp.half_width)
        s = patch.sample
        unit = max(unit, float(np.abs(s.alpha ** 2 + s.beta ** 2 + s.gamma ** 2 - 1.0).max()))
        rk = spinorial.verify_kappa_identity(s, patch.geometry)
        ra, rb, rc = spinorial.verify_kernel_identity(s, patch.geometry)
        rows.append((n, rk, ra, rb, rc))
    _prepare_out(out)
    with open(os.path.join(out, "spinorial.csv"), "w", newline="") as fh:
        fh.write("n,kappa_residual,alpha_residual,beta_residual,gamma_residual\n")
        for row in rows:
            fh.write(",".join([str(row[0])] + ["%.17g" % v for v in row[1:]]) + "\n")
    report = Report("verify-spinorial")
    report.data["rows"] = [list(r) for r in rows]
    report.check("unit_norm", unit <= sp.unit_tol, unit, sp.unit_tol)
    names = ("kappa", "alpha", "beta", "gamma")
    for c, name in enumerate(names, start=1):
        ratios = [rows[i][c] / rows[i + 1][c] if rows[i + 1][c] > 0 else math.inf
                  for i in range(len(rows) - 1)]
        report.check(f"{name}_order", min(ratios) >= sp.min_ratio, min(ratios), sp.min_ratio,
                     "smallest residual ratio per refinement")
    report.write(os.path.join(out, "report.json"))
    return report
