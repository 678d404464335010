"""Command line front end: scenario pipelines, caching and report emission.

Exit codes: 0 all requested checks pass, 1 a check failed (or a numerical
error stopped the run), 2 invalid configuration, 3 scenario refused because
the eigenvalue scan flagged it, 4 resource guard tripped.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import ValidationError

from .analysis import boundary_expansion_fit, extract_interior_profiles
from .checks import CheckResult, run_check
from .config import CHECK_IDS, Scenario, config_hash, load_scenario, parse_checks
from .density import (AbsorptionContext, DensityLadder, SpectralDensityField, build_context,
                      solve_rung)
from .flow import CutoffSet, build_cutoffs, build_flow, build_vorticity
from .green import channel_kernel, extended_kernel
from .oracle import embedded_eigenvalue_scan, evolve_vorticity
from .report import build_manifest, emit_report, write_csv
from .singularity import IllConditionedFit, analytic_log_coefficient_at_pole, fit_column_A
from .stream import stream_from_density, velocity_from_psi

log = logging.getLogger("shearlab")

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_REFUSED, EXIT_MEMORY = 0, 1, 2, 3, 4
COMMANDS = ("simulate", "density", "profiles", "verify", "dump-kernel")


class ScenarioRefused(RuntimeError):
    pass


class MemoryGuardError(RuntimeError):
    pass


# ------------------------------------------------------------------ helpers

def _flow(sc: Scenario, points_per_unit: int | None = None):
    f = sc.flow
    kw = {} if points_per_unit is None else {"points_per_unit": points_per_unit}
    return build_flow(f.family, a=f.a, center=f.center, width=f.width, **kw)


def refusal_scan(sc: Scenario) -> list[dict]:
    flow = _flow(sc)
    if flow.is_couette:
        return []
    flags = []
    for k in sc.k:
        rep = embedded_eigenvalue_scan(flow, k)
        flags += [{"k": k, "re": float(z.real), "im": float(z.imag)} for z in rep.flagged]
    return flags


def density_bytes(ctx: AbsorptionContext, flow) -> float:
    """Peak storage of one ladder: fields for both signs plus the kernel blocks."""
    total = 0.0
    for g in ctx.rungs:
        s = int(np.count_nonzero(flow.d2b_of(g.y)))
        total += 2 * g.y.size * g.w.size * 16 + g.y.size * max(s, 1) * 16 * 3
    return total


def _cache_path(cache_dir: Path | None, key: str, k: int, iota: int, rung: int) -> Path | None:
    if cache_dir is None:
        return None
    return cache_dir / key / f"k{k}_iota{'p' if iota > 0 else 'm'}_r{rung}.npz"


def solve_ladder_cached(ctx: AbsorptionContext, vort, flow, cut, threads: int,
                        cache_dir: Path | None, key: str) -> DensityLadder:
    minus, plus = [], []
    for iota, store in ((-1, minus), (1, plus)):
        c = ctx.with_iota(iota)
        for r, g in enumerate(c.rungs):
            path = _cache_path(cache_dir, key, ctx.k, iota, r)
            if path is not None and path.exists():
                with np.load(path) as z:
                    store.append(SpectralDensityField(ctx.k, iota, g.epsilon, g, z["theta"], z["residual"],
                                                      z["rcond"], c))
                continue
            fld, _ = solve_rung(c, r, vort, flow, cut, threads=threads)
            store.append(fld)
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                np.savez(path, theta=fld.theta, residual=fld.residual, rcond=fld.rcond)
    return DensityLadder(ctx.k, minus, plus)


def _l2(f, y) -> float:
    return float(np.sqrt(np.trapezoid(np.abs(f) ** 2, y)))


# ---------------------------------------------------------------- pipelines

def _simulate(sc: Scenario, out: Path, files: list, grids: dict) -> None:
    flow = _flow(sc)
    n = sc.grid.oracle_points
    guard = (n + 1) * len(sc.times) * 16 * 2 * len(sc.k)
    if guard > sc.memory_cap_mb * 2**20:
        raise MemoryGuardError(f"oracle storage {guard / 2**20:.1f} MB exceeds cap {sc.memory_cap_mb} MB")
    grids["oracle_points"] = n
    for k in sc.k:
        vort = build_vorticity(sc.vorticity.spec(), flow, k)
        st = evolve_vorticity(vort, flow, k, max(sc.times), samples=sc.times, n=n,
                              method=sc.grid.oracle_method)
        chi = CutoffSet.chi_in(st[0].y)
        rows, norms = [], []
        for s in st:
            vel = velocity_from_psi(s.y, s.psi, k, s.t)
            norms.append([s.t, _l2(s.psi, s.y), _l2(chi * vel.ux, s.y), _l2(chi * vel.uy, s.y)])
            rows += [[s.t, yy, p.real, p.imag, o.real, o.imag] for yy, p, o in zip(s.y, s.psi, s.omega)]
        files.append(write_csv(out / f"oracle_k{k}.csv",
                               ["t", "y", "psi_re", "psi_im", "omega_re", "omega_im"], rows).name)
        files.append(write_csv(out / f"norms_k{k}.csv", ["t", "psi_l2", "ux_in_l2", "uy_in_l2"], norms).name)


def _density(sc: Scenario, out: Path, files: list, grids: dict, threads: int, cache_dir: Path | None) -> None:
    flow = _flow(sc)
    key = config_hash(sc)
    grids["density"] = {}
    for k in sc.k:
        cut = build_cutoffs(k, sc.grid.delta0, flow)
        vort = build_vorticity(sc.vorticity.spec(), flow, k)
        ctx = build_context(k, flow, cut, ladder=sc.ladder.epsilons, base_points=sc.grid.base_points,
                            kappa=sc.grid.kappa)
        need = density_bytes(ctx, flow)
        if need > sc.memory_cap_mb * 2**20:
            raise MemoryGuardError(f"density ladder needs {need / 2**20:.1f} MB, cap {sc.memory_cap_mb} MB")
        grids["density"][f"k{k}"] = [{"epsilon": g.epsilon, "points_per_unit": g.points_per_unit,
                                     "rows": int(g.y.size), "columns": int(g.w.size)} for g in ctx.rungs]
        ladder = solve_ladder_cached(ctx, vort, flow, cut, threads, cache_dir, key)
        snaps = stream_from_density(ladder, sc.times, flow, cut, order=sc.ladder.order)
        rows = []
        for s in snaps:
            rows += [[s.t, yy, p.real, p.imag, e] for yy, p, e in zip(s.y, s.psi, np.abs(s.epsilon_error))]
        files.append(write_csv(out / f"stream_k{k}.csv", ["t", "y", "psi_re", "psi_im", "eps_error"], rows).name)

        fld = ladder.plus[-1]
        g = fld.grid
        cols = np.nonzero((g.y0 >= 0.125) & (g.y0 <= 0.875))[0]
        A = analytic_log_coefficient_at_pole(fld, vort, flow, cols)
        rows = []
        for j, a in zip(cols, A):
            try:
                c1 = fit_column_A(fld, flow, int(j)).c1
            except IllConditionedFit:
                c1 = complex(np.nan, np.nan)
            rows.append([g.w[j], g.y0[j], a.real, a.imag, c1.real, c1.imag])
        files.append(write_csv(out / f"log_coefficient_k{k}.csv",
                               ["w", "y0", "analytic_re", "analytic_im", "fitted_re", "fitted_im"], rows).name)


def _profiles(sc: Scenario, out: Path, files: list, grids: dict) -> None:
    flow = _flow(sc)
    p = sc.profiles
    n = sc.grid.oracle_points
    grids["oracle_points"] = n
    for k in sc.k:
        vort = build_vorticity(sc.vorticity.spec(), flow, k)
        ti = np.linspace(*p.interior_window, p.interior_samples)
        tb = np.geomspace(*p.boundary_window, p.boundary_samples)
        times = np.union1d(ti, tb)
        st = evolve_vorticity(vort, flow, k, float(times[-1]), samples=times, n=n, method=sc.grid.oracle_method)
        psi = {s.t: s.psi for s in st}
        y = st[0].y
        dec = extract_interior_profiles(ti, np.array([psi[t] for t in ti]), y, k, flow)
        w = dec.windows[0]
        rows = [[yy, *(c for z in row for c in (z.real, z.imag)), cnd]
                for yy, row, cnd in zip(w.y, w.coefficients, w.condition)]
        files.append(write_csv(out / f"interior_profiles_k{k}.csv",
                               ["y", "alpha_re", "alpha_im", "beta_re", "beta_im", "gamma_re", "gamma_im",
                                "condition"], rows).name)
        bd = boundary_expansion_fit(tb, np.array([psi[t] for t in tb]), y, k, flow, orders=p.orders,
                                    cond_cap=np.inf)
        wb = bd.windows[0]
        q = p.orders - 2
        names = [f"alpha{j + 1}" for j in range(q)] + [f"beta{j + 1}" for j in range(q)]
        header = ["y"] + [f"{nm}_{part}" for nm in names for part in ("re", "im")] + ["condition"]
        rows = [[yy, *(c for z in row for c in (z.real, z.imag)), cnd]
                for yy, row, cnd in zip(wb.y, wb.coefficients, wb.condition)]
        files.append(write_csv(out / f"boundary_profiles_k{k}.csv", header, rows).name)
        files.append(write_csv(out / f"profile_fit_k{k}.csv", ["fit", "residual", "single_carrier_residual"],
                               [["interior", w.residual, w.single_residual],
                                ["boundary", wb.residual, float("nan")]]).name)


def _dump_kernel(sc: Scenario, out: Path, files: list, grids: dict) -> None:
    flow = _flow(sc)
    y = np.linspace(-0.25, 1.25, 61)
    grids["kernel_nodes"] = int(y.size)
    for k in sc.k:
        cut = build_cutoffs(k, sc.grid.delta0, flow)
        Y, Z = np.meshgrid(y, y, indexing="ij")
        inside = (Y >= 0) & (Y <= 1) & (Z >= 0) & (Z <= 1)
        G = np.where(inside, channel_kernel(k, np.clip(Y, 0, 1), np.clip(Z, 0, 1)), 0.0)
        E = extended_kernel(k, Y, Z, cut)
        rows = [[a, b, g, e] for a, b, g, e in zip(Y.ravel(), Z.ravel(), G.ravel(), E.ravel())]
        files.append(write_csv(out / f"kernel_k{k}.csv", ["y", "z", "channel", "extended"], rows).name)


def run_pipeline(sc: Scenario, command: str, out: str | Path, checks: Sequence[str] = (),
                 threads: int = 1, cache_dir: str | Path | None = None) -> list[CheckResult]:
    """Execute one subcommand and write its tables plus report.json into ``out``."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cache = Path(cache_dir) if cache_dir is not None else None
    if command != "dump-kernel":
        flags = refusal_scan(sc)
        if flags:
            raise ScenarioRefused(f"eigenvalue scan flagged {len(flags)} eigenvalue(s): {flags[:3]}")
    files: list[str] = []
    grids: dict = {}
    if command == "simulate":
        _simulate(sc, out, files, grids)
    elif command == "density":
        _density(sc, out, files, grids, threads, cache)
    elif command == "profiles":
        _profiles(sc, out, files, grids)
    elif command == "dump-kernel":
        _dump_kernel(sc, out, files, grids)
    results = []
    for name in checks:
        log.info("running %s", name)
        r = run_check(name, threads=threads, seed=sc.seed)
        log.info(r.line())
        results.append(r)
    manifest = build_manifest(config_hash(sc), command, grids, files)
    emit_report(results, out, manifest, sc.model_dump(mode="json"))
    return results


# ---------------------------------------------------------------------- CLI

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shearlab", description="Linear inviscid damping lab for channel shear flows.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML scenario file or bundled scenario name")
        p.add_argument("--out", default="shearlab-out", help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--checks", default=None,
                       help="comma list of A1..A10, 'all' or 'none' (default: scenario list; verify runs all)")
        p.add_argument("--cache-dir", default=None, help="directory for cached density fields")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        sc = load_scenario(args.config)
        if args.checks is not None:
            checks = parse_checks(args.checks)
        elif args.command == "verify":
            checks = sc.checks or CHECK_IDS
        else:
            checks = sc.checks
    except (ValidationError, ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        results = run_pipeline(sc, args.command, args.out, checks, args.threads, args.cache_dir)
    except ScenarioRefused as exc:
        print(f"scenario refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except MemoryGuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_MEMORY
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
