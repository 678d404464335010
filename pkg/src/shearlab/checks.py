"""Acceptance experiments A1 to A10.

Each check is a fixed, self-contained numerical experiment returning a
CheckResult with one headline number compared against its threshold; the
supporting numbers go into ``details``.
"""
from __future__ import annotations

import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .analysis import (boundary_expansion_fit, decay_exponent, extract_interior_profiles,
                       fourier_log_check, profile_amplitude, weighted_norm)
from .density import (build_context, epsilon_extrapolate, lap_sigma_min, solve_ladder, solve_rung)
from .flow import (CutoffSet, VorticitySpec, _mollifier, build_cutoffs, build_flow, build_vorticity,
                   vorticity_pair)
from .oracle import (EllipticSolver, chebyshev_nodes, couette_reference, evolve_vorticity,
                     max_stable_dt, resample)
from .singularity import (analytic_log_coefficient_at_pole, fit_column_A, fit_log_coefficient,
                          max_boundary_coefficient, vanishing_report)
from .stream import stream_from_density, velocity_from_psi


@dataclass
class CheckResult:
    name: str
    title: str
    measured: float
    threshold: float
    comparison: str            # "<=" or ">="
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name} {status}: {self.title}: measured {self.measured:.4g} {self.comparison} {self.threshold:.4g}"


def _result(name, title, measured, threshold, comparison, details=None, passed=None) -> CheckResult:
    measured = float(measured)
    if passed is None:
        passed = measured <= threshold if comparison == "<=" else measured >= threshold
    return CheckResult(name, title, measured, float(threshold), comparison, bool(passed), details or {})


def _l2(f, y) -> float:
    return float(np.sqrt(np.trapezoid(np.abs(f) ** 2, y)))


def _psi_stack(states) -> np.ndarray:
    return np.array([s.psi for s in states])


# ----------------------------------------------------------------------- A1

def check_a1(threads: int = 1) -> CheckResult:
    k, times = 1, (0.0, 1.0, 2.0, 5.0, 10.0)
    flow = build_flow("perturbed_couette", a=0.05)
    cut = build_cutoffs(k, 0.05, flow)
    vort = build_vorticity(VorticitySpec("bump", 0.5, 0.2), flow, k)
    ctx = build_context(k, flow, cut)
    ladder = solve_ladder(ctx, vort, flow, cut, threads=threads)
    snaps = stream_from_density(ladder, times, flow, cut)
    ref = evolve_vorticity(vort, flow, k, times[-1], samples=times, n=1600)
    extrap, raw = [], []
    for s, o in zip(snaps, ref):
        r = resample(o, s.y)
        nr = np.linalg.norm(r)
        extrap.append(float(np.linalg.norm(s.psi - r) / nr))
        raw.append(float(np.linalg.norm(s.per_rung[-1] - r) / nr))
    return _result("A1", "spectral stream vs time-stepped oracle, max relative L2 error",
                   max(extrap), 5e-2, "<=",
                   {"times": list(times), "extrapolated_error": extrap, "bottom_rung_error": raw,
                    "epsilons": list(ladder.epsilons),
                    "max_solve_residual": float(max(f.residual.max() for f in ladder.minus + ladder.plus))})


# ----------------------------------------------------------------------- A2

def check_a2() -> CheckResult:
    k, t_end = 1, 10.0
    flow = build_flow("couette")
    vort = build_vorticity(VorticitySpec("bump", 0.5, 0.2), flow, k)
    dt = 0.5 * max_stable_dt(flow, k)
    errs = []
    for h in (dt, dt / 2):
        st = evolve_vorticity(vort, flow, k, t_end, dt=h, n=800)[-1]
        exact = np.exp(-1j * k * st.y * t_end) * vort(st.y)
        errs.append(float(np.max(np.abs(st.omega - exact))))
    ratio = errs[0] / errs[1]
    ok = errs[0] <= 1e-6 and abs(ratio - 16) <= 4
    return _result("A2", "Couette vorticity error at t = 10", errs[0], 1e-6, "<=",
                   {"dt": [dt, dt / 2], "errors": errs, "halving_ratio": ratio, "ratio_band": [12, 20]}, ok)


# ----------------------------------------------------------------------- A3

def check_a3() -> CheckResult:
    ts = np.geomspace(5, 50, 12)
    rows, worst = [], 0.0
    for a in (0.0, 0.05):
        flow = build_flow("perturbed_couette", a=a) if a else build_flow("couette")
        for k in (1, 2):
            vort = build_vorticity(VorticitySpec("constant"), flow, k)
            st = evolve_vorticity(vort, flow, k, 50.0, samples=ts, n=1600)
            chi = CutoffSet.chi_in(st[0].y)
            nx, ny = [], []
            for s in st:
                vel = velocity_from_psi(s.y, s.psi, k)
                nx.append(_l2(chi * vel.ux, s.y))
                ny.append(_l2(chi * vel.uy, s.y))
            sx, sy = decay_exponent(ts, nx).slope, decay_exponent(ts, ny).slope
            worst = max(worst, abs(sx + 1), abs(sy + 2))
            rows.append({"a": a, "k": k, "ux_slope": sx, "uy_slope": sy})
    return _result("A3", "worst deviation of u^x, u^y decay slopes from -1, -2", worst, 0.15, "<=",
                   {"fits": rows, "t_range": [5.0, 50.0]})


# ----------------------------------------------------------------------- A4

def check_a4() -> CheckResult:
    flow = build_flow("perturbed_couette", a=0.05)
    worst, rows = np.inf, []
    for k in (1, 2, 4):
        cut = build_cutoffs(k, 0.05, flow)
        ctx = build_context(k, flow, cut)
        w = ctx.rungs[0].w          # columns shared by every rung
        for iota in (1, -1):
            first = None
            for g in ctx.rungs:
                s = lap_sigma_min(k, g.epsilon, w, g, flow, cut, iota=iota)
                first = s if first is None else first
                ratio = float(np.min(s / first))
                worst = min(worst, ratio)
                rows.append({"k": k, "iota": iota, "epsilon": g.epsilon, "sigma_min": float(s.min()),
                             "min_ratio_to_first": ratio})
    return _result("A4", "min over columns and rungs of sigma_min / sigma_min(largest eps)", worst, 0.1, ">=",
                   {"rungs": rows})


# ----------------------------------------------------------------------- A5

def check_a5(threads: int = 1) -> CheckResult:
    k = 1
    flow = build_flow("perturbed_couette", a=0.05)
    cut = build_cutoffs(k, 0.05, flow)
    vort = build_vorticity(VorticitySpec("gaussian", 0.5, 0.25), flow, k)
    fractions, detail = [], {}
    for iota in (1, -1):
        ctx = build_context(k, flow, cut, iota=iota)
        fld, _ = solve_rung(ctx, len(ctx.rungs) - 1, vort, flow, cut, threads=threads)
        g = fld.grid
        cols = np.nonzero((g.y0 >= 0.125) & (g.y0 <= 0.875))[0]
        A = analytic_log_coefficient_at_pole(fld, vort, flow, cols)
        rel = np.array([abs(fit_column_A(fld, flow, int(j)).c1 - a) / abs(a) for j, a in zip(cols, A)])
        frac = float(np.mean(rel <= 0.1))
        fractions.append(frac)
        detail[f"iota={iota:+d}"] = {"columns": int(cols.size), "fraction_within_10pct": frac,
                                     "median_rel_error": float(np.median(rel)),
                                     "epsilon": fld.epsilon}
    return _result("A5", "fraction of interior columns with fitted log coefficient within 10%",
                   min(fractions), 0.8, ">=", detail)


# ----------------------------------------------------------------------- A6

def check_a6(threads: int = 1) -> CheckResult:
    k = 1
    flow = build_flow("perturbed_couette", a=0.05)
    cut = build_cutoffs(k, 0.05, flow)
    with_, without = vorticity_pair(flow, k, [VorticitySpec("constant", vanish=(0, 2)),
                                              VorticitySpec("constant", vanish=(2, 2))])
    ctx = build_context(k, flow, cut)
    d0 = []
    for v in (with_, without):
        fld, resp = solve_rung(ctx, len(ctx.rungs) - 1, v, flow, cut, sides=(0,), threads=threads)
        d0.append(max_boundary_coefficient(fld, resp[0], v, flow, 0))
    ts = np.geomspace(20, 200, 161)
    beta = []
    for v in (with_, without):
        st = evolve_vorticity(v, flow, k, 200.0, samples=ts, n=1600)
        dec = boundary_expansion_fit(ts, _psi_stack(st), st[0].y, k, flow, orders=4, cond_cap=np.inf)
        beta.append(profile_amplitude(dec.beta1))
    rep = vanishing_report(d0[0], d0[1], beta[0], beta[1])
    measured = min(rep.D0_ratio, rep.beta1_ratio)
    return _result("A6", "min of max|D0| and |beta_1| drop factors", measured, 10.0, ">=",
                   {"D0_max": list(rep.D0_max), "D0_ratio": rep.D0_ratio, "beta1": list(rep.beta1),
                    "beta1_ratio": rep.beta1_ratio, "epsilon": ctx.rungs[-1].epsilon,
                    "beta_fit_t_range": [20.0, 200.0]})


# ----------------------------------------------------------------------- A7

def check_a7() -> CheckResult:
    k = 1
    flow = build_flow("perturbed_couette", a=0.05)
    nonvan, van = vorticity_pair(flow, k, [VorticitySpec("constant"),
                                           VorticitySpec("constant", vanish=(2, 2))])
    ts = np.linspace(400, 600, 81)
    out = {}
    for name, v in (("nonvanishing", nonvan), ("vanishing", van)):
        st = evolve_vorticity(v, flow, k, 600.0, samples=ts, n=1600)
        dec = extract_interior_profiles(ts, _psi_stack(st), st[0].y, k, flow)
        w = dec.windows[0]
        out[name] = {"three_carrier_residual": w.residual, "single_carrier_residual": w.single_residual,
                     "alpha": profile_amplitude(dec.alpha_in),
                     "beta_plus_gamma": profile_amplitude(dec.beta_in) + profile_amplitude(dec.gamma_in),
                     "max_condition": float(np.max(w.condition))}
    res_ratio = out["nonvanishing"]["three_carrier_residual"] / out["nonvanishing"]["single_carrier_residual"]
    drop = out["nonvanishing"]["beta_plus_gamma"] / out["vanishing"]["beta_plus_gamma"]
    ok = res_ratio <= 0.1 and drop >= 10
    return _result("A7", "three-carrier / single-carrier residual (nonvanishing data)", res_ratio, 0.1, "<=",
                   {**out, "beta_gamma_drop": drop, "drop_threshold": 10.0, "t_range": [400.0, 600.0]}, ok)


# ----------------------------------------------------------------------- A8

def check_a8() -> CheckResult:
    f = lambda x: _mollifier(x / 0.5)[0]
    rows = []
    for m in (1, 2, 3):
        r = fourier_log_check(f, m, 1e-3)
        rows.append({"m": m, "sup_ratio": r.sup_ratio, "refined": r.sup_ratio_refined, "change": r.change})
    worst = max(r["change"] for r in rows)
    finite = all(np.isfinite(r["sup_ratio"]) for r in rows)
    return _result("A8", "max relative change of the Fourier-log bound under grid doubling", worst, 0.2, "<=",
                   {"per_m": rows, "epsilon": 1e-3}, finite and worst <= 0.2)


# ----------------------------------------------------------------------- A9

def _boundary_remainder_slope(ts, psi, y, k, flow) -> float:
    dec = boundary_expansion_fit(ts, psi, y, k, flow, orders=4, window=81, stride=40)
    tm = np.array([w.t_mid for w in dec.windows])
    sel = (tm >= 20) & (tm <= 200)
    return decay_exponent(tm[sel], dec.residual_N[sel], min_points=5).slope


def check_a9() -> CheckResult:
    k = 1
    flow = build_flow("perturbed_couette", a=0.05)
    vort = build_vorticity(VorticitySpec("bump", 0.5, 0.2), flow, k)
    yu = np.linspace(0, 1, 4001)
    h3 = weighted_norm(vort(yu), 3, k, yu).value
    ts = np.geomspace(5, 50, 12)
    st = evolve_vorticity(vort, flow, k, 50.0, samples=ts, n=1600)
    chi = CutoffSet.chi_in(st[0].y)
    band = np.array([(k * t) ** 2 * _l2(s.psi * chi, s.y) / h3 for t, s in zip(ts, st)])
    spread = float(band.max() / band.min())

    tb = np.arange(10, 220.001, 0.25)
    bdry = build_vorticity(VorticitySpec("constant", vanish=(0, 2)), flow, k)
    sb = evolve_vorticity(bdry, flow, k, tb[-1], samples=tb, n=1600)
    slope_pert = _boundary_remainder_slope(tb, _psi_stack(sb), sb[0].y, k, flow)
    cflow = build_flow("couette")
    cv = build_vorticity(VorticitySpec("constant", vanish=(0, 2)), cflow, k)
    yc = chebyshev_nodes(400)
    solver, om0 = EllipticSolver(yc, k, "chebyshev"), cv(yc)
    psi_c = np.array([solver(np.exp(-1j * k * yc * t) * om0) for t in tb])
    slope_c = _boundary_remainder_slope(tb, psi_c, yc, k, cflow)
    ok = spread <= 20 and slope_pert <= -2.5 and slope_c <= -2.5
    return _result("A9", "C/c of k^2 t^2 ||psi chi_in|| / ||omega0||_H3k over t in [5, 50]", spread, 20.0, "<=",
                   {"band": [float(band.min()), float(band.max())], "H3k_norm": h3,
                    "remainder_slope_perturbed": slope_pert, "remainder_slope_couette": slope_c,
                    "slope_threshold": -2.5, "remainder_window_t": [20.0, 200.0]}, ok)


# ---------------------------------------------------------------------- A10

def synthetic_recovery(seed: int = 0) -> dict[str, float]:
    """Max coefficient error of every fit on exactly realizable inputs."""
    rng = np.random.default_rng(seed)
    out = {}
    k = 1
    flow = build_flow("couette")

    ts = np.linspace(40, 80, 41)
    y = np.linspace(0, 1, 161)
    yi = y[CutoffSet.chi_in(y) > 0]
    alpha = 1.0 + 0.3 * np.sin(3 * yi)
    beta, gamma = 0.3 + 0.2 * rng.standard_normal(), 0.1j + 0.1j * rng.standard_normal()
    s = 1.0 / (k * ts[:, None]) ** 2
    model = (np.exp(-1j * k * np.outer(ts, yi)) * alpha + beta + np.exp(-1j * k * ts)[:, None] * gamma) * s
    psi = np.zeros((ts.size, y.size), complex)
    chi = CutoffSet.chi_in(y)
    psi[:, chi > 0] = model / chi[chi > 0]
    c = extract_interior_profiles(ts, psi, y, k, flow).windows[0].coefficients
    out["interior_profiles"] = float(max(np.max(np.abs(c[:, 0] - alpha)), np.max(np.abs(c[:, 1] - beta)),
                                         np.max(np.abs(c[:, 2] - gamma))))

    tb = np.geomspace(20, 200, 81)
    yb = np.linspace(0, 1, 401)
    sel = (yb >= 0.125) & (yb < 0.25)       # chi_b0 > 0 here
    a1, b1 = 1.0, 0.5 + 0.1 * rng.standard_normal()
    data = (np.exp(-1j * k * np.outer(tb, yb[sel])) * a1 + b1) / (k * tb[:, None]) ** 2
    psi_b = np.zeros((tb.size, yb.size), complex)
    psi_b[:, sel] = data / CutoffSet.chi_b0(yb[sel])
    wb = boundary_expansion_fit(tb, psi_b, yb, k, flow, orders=4, y_range=(0.125, 0.245),
                                cond_cap=np.inf).windows[0]
    cb = wb.coefficients[CutoffSet.chi_b0(wb.y) > 0]
    out["boundary_expansion"] = float(np.max(np.abs(cb - np.array([a1, 0.0, b1, 0.0])[None, :])))

    eps = 1e-3
    v = np.linspace(-12 * eps, 12 * eps, 241)
    c1, c0, c2 = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    fit = fit_log_coefficient(v, c1 * np.log(v + 1j * eps) + c0 + c2 * v, eps)
    out["log_coefficient"] = float(max(abs(fit.c1 - c1), abs(fit.c0 - c0)))

    tt = np.geomspace(1, 100, 20)
    p = -1.0 - rng.random()
    out["decay_exponent"] = abs(decay_exponent(tt, 3.0 * tt ** p).slope - p)

    ladder = np.array([0.1, 0.05, 0.025])
    q = rng.standard_normal(3)
    ex = epsilon_extrapolate([q[0] + q[1] * e + q[2] * e**2 for e in ladder], ladder, order=2)
    out["epsilon_extrapolation"] = float(abs(ex.limit - q[0]))
    return out


def determinism_probe(seed: int = 0) -> dict:
    """Run a small scenario twice and compare every emitted byte."""
    from .cli import run_pipeline
    from .config import Scenario
    sc = Scenario.model_validate({
        "name": "determinism", "seed": seed, "k": [1], "times": [0.0, 2.0, 5.0],
        "flow": {"family": "perturbed_couette", "a": 0.05},
        "grid": {"oracle_points": 400},
        "ladder": {"epsilons": [0.1, 0.05, 0.025], "order": 2},
    })
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for run in ("a", "b"):
            out = Path(tmp) / run
            run_pipeline(sc, "density", out, checks=(), threads=1, cache_dir=None)
            run_pipeline(sc, "simulate", out / "sim", checks=(), threads=1, cache_dir=None)
            blobs.append({str(p.relative_to(out)): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    same = blobs[0].keys() == blobs[1].keys() and all(blobs[0][f] == blobs[1][f] for f in blobs[0])
    return {"files": len(blobs[0]), "identical": bool(same)}


def check_a10(seed: int = 0) -> CheckResult:
    rec = synthetic_recovery(seed)
    det = determinism_probe(seed)
    vals = np.array(list(rec.values()))
    worst = float(vals.max()) if np.all(np.isfinite(vals)) else float("inf")
    return _result("A10", "max synthetic-recovery error (and bit-identical reruns)", worst, 1e-6, "<=",
                   {"recovery": rec, "determinism": det}, worst <= 1e-6 and det["identical"])


CHECKS: dict[str, Callable[..., CheckResult]] = {
    "A1": check_a1, "A2": check_a2, "A3": check_a3, "A4": check_a4, "A5": check_a5,
    "A6": check_a6, "A7": check_a7, "A8": check_a8, "A9": check_a9, "A10": check_a10,
}


def run_check(name: str, threads: int = 1, seed: int = 0) -> CheckResult:
    fn = CHECKS[name]
    if name in ("A1", "A5", "A6"):
        return fn(threads=threads)
    if name == "A10":
        return fn(seed=seed)
    return fn()
