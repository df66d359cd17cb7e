"""Command-line front end: sweep execution, scaling analysis, reports.

Every command is idempotent given identical inputs and seeds, embeds its full
configuration in the report it writes, and renders figures next to the
delimited output.  Exit codes: 2 configuration/parse error, 3 I/O error or
missing input, 4 invalid physics parameters, 5 insufficient data.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from zenochain import __version__, collapse as clp, engine, plots
from zenochain.collapse import CollapseError, InsufficientDataError
from zenochain.engine import ConfigError, PhysicsError

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_PHYSICS = 4
EXIT_DATA = 5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zenochain",
        description="Measured fermion-chain trajectory sweeps and finite-size scaling analysis.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run the trajectory protocol over a (g, L) grid")
    p.add_argument("config", help="YAML protocol configuration")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--quick", action="store_true", help="halve n_traj and restrict L <= 10")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: ZENOCHAIN_WORKERS or all cores)")
    p.add_argument("--save-trajectories", action="store_true",
                   help="also write per-trajectory records as NDJSON")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p = sub.add_parser("collapse", help="cost-function data collapse of sweep tables")
    p.add_argument("tables", nargs="+", help="sweep.csv files (>= 3 system sizes)")
    p.add_argument("--diagnostic", choices=("entropy", "purity"), required=True)
    p.add_argument("--ansatz", choices=("1", "2", "both"), default="both")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--bootstrap", type=int, default=200,
                   help="bootstrap resamples for parameter errors (0 disables)")
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    p.add_argument("--crit-fit", choices=("log", "power"), default="log",
                   help="critical-entropy model feeding the shifted-entropy ansatz")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("peak", help="entropy-fluctuation peaks and their 1/L extrapolation")
    p.add_argument("tables", nargs="+")
    p.add_argument("--out", default="results")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("critical-fit", help="log and power-law fits of the critical entropy")
    p.add_argument("tables", nargs="+")
    p.add_argument("--out", default="results")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("phase-diagram", help="fit the critical line g_c(V)")
    p.add_argument("points", help="CSV with header 'V,g_c'")
    p.add_argument("--out", default="results")
    p.add_argument("--no-figures", action="store_true")

    sub.add_parser("selftest", help="fast algebraic property suites (seconds)")
    return parser


def _write_report(out_dir: Path, name: str, payload: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(json.dumps(payload, indent=1, sort_keys=True))
    return path


def _provenance(args_ns, **extra) -> dict:
    info = {"tool": f"zenochain {__version__}", "argv": sys.argv[1:], "created_unix": int(time.time())}
    info.update(extra)
    return info


# ---------------------------------------------------------------- sweep

def cmd_sweep(args) -> int:
    cfg = engine.load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.quick:
        sizes = tuple(L for L in cfg.L if L <= 10)
        if not sizes:
            raise ConfigError("--quick removed every system size (all L > 10)")
        cfg = replace(cfg, L=sizes, n_traj=max(1, cfg.n_traj // 2))
    out = Path(args.out)

    t0 = time.time()
    result = engine.run_sweep(
        cfg,
        workers=args.workers,
        keep_records=args.save_trajectories,
        progress=lambda msg: print(f"[sweep] {msg}", flush=True),
    )
    paths = engine.save_sweep(result, out, save_trajectories=args.save_trajectories)

    if not args.no_figures:
        rows = clp.load_sweep_table(paths["table"])
        paths["fig_entropy"] = plots.sweep_curves_figure(
            rows, "S_mean", r"$\bar{S}$  [nats]", out / "entropy_vs_g.png")
        paths["fig_fluct"] = plots.sweep_curves_figure(
            rows, "S_std", r"$\delta S$", out / "fluctuation_vs_g.png")
        paths["fig_mixedness"] = plots.sweep_curves_figure(
            rows, "mixedness_mean", r"$\overline{1-P}$", out / "mixedness_vs_g.png")
        L_big = max(cfg.L)
        series = [
            {"L": c.L, "g": c.g, "times": result.times, "S": c.mean_entropy, "mixedness": c.mean_mixedness}
            for c in result.cells
            if c.L == L_big
        ]
        paths["fig_timeseries"] = plots.timeseries_figure(
            series, cfg.T1, cfg.T2, out / f"timeseries_L{L_big}.png")

    wall = time.time() - t0
    n_traj_total = len(cfg.L) * len(cfg.g_grid) * cfg.n_traj
    print(f"[sweep] done: {n_traj_total} trajectories in {wall:.1f}s ({n_traj_total / wall:.2f} traj/s)")
    for tag, path in paths.items():
        print(f"[sweep] wrote {tag}: {path}")
    return 0


# ---------------------------------------------------------------- analysis helpers

def _load_rows(tables, min_sizes: int):
    rows = clp.load_sweep_table(tables)
    sizes = sorted({r["L"] for r in rows})
    if len(sizes) < min_sizes:
        raise InsufficientDataError(
            f"analysis needs at least {min_sizes} system sizes, tables cover {sizes}"
        )
    return rows, sizes


def _peak_pipeline(rows):
    peaks = clp.delta_s_peaks(clp.fluctuation_points(rows))
    sizes, values = clp.entropy_at_peaks(rows, peaks.per_size)
    return peaks, sizes, values


def _write_collapsed_csv(path: Path, key, ordinate, sizes) -> Path:
    lines = ["scaling_key,scaled_ordinate,L"]
    for k, x, L in zip(key, ordinate, sizes):
        lines.append(f"{k!r},{x!r},{int(L)}")
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------- collapse

def cmd_collapse(args) -> int:
    rows, sizes = _load_rows(args.tables, min_sizes=3)
    points = clp.table_points(rows, args.diagnostic)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    wanted = ("1", "2") if args.ansatz == "both" else (args.ansatz,)
    fits = {}
    report: dict = {
        "diagnostic": args.diagnostic,
        "input_tables": [str(t) for t in args.tables],
        "sizes": sizes,
        "provenance": _provenance(args, bootstrap=args.bootstrap, seed=args.seed),
        "fits": {},
    }

    for which in wanted:
        if args.diagnostic == "entropy" and which == "2":
            peaks, csizes, cvalues = _peak_pipeline(rows)
            cfit = clp.critical_entropy_fit(csizes, cvalues)
            if args.crit_fit == "log":
                ansatz = clp.make_ansatz("entropy-2", crit_fit=cfit.crit_fit)
            else:
                ansatz = clp.make_ansatz(
                    "entropy-2", crit_fit=(cfit.power_amp, cfit.power_exp), crit_model="power")
            report["critical_entropy_fit"] = {
                "g_c_per_size": peaks.per_size,
                "model": args.crit_fit,
                "log_slope": cfit.log_slope,
                "log_offset": cfit.log_offset,
                "power_amp": cfit.power_amp,
                "power_exp": cfit.power_exp,
            }
        else:
            ansatz = clp.make_ansatz(f"{args.diagnostic}-{which}")
        fit = clp.minimize_cost(points, ansatz)
        if args.bootstrap > 0:
            fit.param_errors = clp.bootstrap_param_errors(
                points, ansatz, n_boot=args.bootstrap, seed=args.seed)
        fits[which] = fit
        report["fits"][ansatz.tag] = {
            "params": fit.params,
            "cost": fit.cost,
            "param_errors": fit.param_errors,
            "diagnostics": fit.diagnostics,
        }
        key, ordinate, Ls = clp.collapsed_coordinates(points, ansatz, fit.params)
        csv_path = _write_collapsed_csv(
            out / f"collapsed_{args.diagnostic}_ansatz{which}.csv", key, ordinate, Ls)
        print(f"[collapse] {ansatz.tag}: " +
              ", ".join(f"{k}={v:.4g}" for k, v in fit.params.items()) +
              f", C={fit.cost:.4g} -> {csv_path}")
        if not args.no_figures:
            plots.collapse_figure(key, ordinate, Ls, fit,
                                  out / f"collapse_{args.diagnostic}_ansatz{which}.png")

    if len(fits) == 2:
        delta = clp.compare_ansatze(fits["1"], fits["2"])
        report["delta_C"] = delta
        print(f"[collapse] delta C = C1 - C2 = {delta:.4g} "
              f"({'second' if delta > 0 else 'first'} ansatz collapses better)")

    path = _write_report(out, f"collapse_{args.diagnostic}.json", report)
    print(f"[collapse] wrote report: {path}")
    return 0


# ---------------------------------------------------------------- peak

def cmd_peak(args) -> int:
    rows, _ = _load_rows(args.tables, min_sizes=2)
    peaks = clp.delta_s_peaks(clp.fluctuation_points(rows))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    lines = ["L,g,delta_S"]
    curves = {}
    for L in sorted({r["L"] for r in rows}):
        pts = sorted((r for r in rows if r["L"] == L), key=lambda r: r["g"])
        curves[L] = (np.array([r["g"] for r in pts]), np.array([r["S_std"] for r in pts]))
        lines.extend(f"{L},{r['g']!r},{r['S_std']!r}" for r in pts)
    (out / "fluctuation_curves.csv").write_text("\n".join(lines) + "\n")

    lines = ["L,inv_L,g_c"]
    for L in sorted(peaks.per_size):
        lines.append(f"{L},{1.0 / L!r},{peaks.per_size[L]!r}")
    (out / "peak_locations.csv").write_text("\n".join(lines) + "\n")

    report = {
        "g_inf": peaks.g_inf,
        "slope": peaks.slope,
        "g_c_per_size": peaks.per_size,
        "excluded_sizes": peaks.excluded,
        "input_tables": [str(t) for t in args.tables],
        "provenance": _provenance(args),
    }
    path = _write_report(out, "peak.json", report)
    if not args.no_figures:
        plots.peak_figure(curves, peaks.per_size, peaks.g_inf, peaks.slope, out / "peak.png")
    print(f"[peak] g_c(L) = {peaks.g_inf:.4g} + {peaks.slope:.4g}/L "
          f"from sizes {sorted(peaks.per_size)} -> {path}")
    return 0


# ---------------------------------------------------------------- critical-fit

def cmd_critical_fit(args) -> int:
    rows, _ = _load_rows(args.tables, min_sizes=3)
    peaks, sizes, values = _peak_pipeline(rows)
    if len(sizes) < 3:
        raise InsufficientDataError(f"only {len(sizes)} sizes have bracketed peaks; need 3")
    fit = clp.critical_entropy_fit(sizes, values)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    lines = ["L,g_c,S_at_gc,log_fit,power_fit"]
    for L, v in zip(sizes, values):
        lf = fit.log_slope * np.log(L) + fit.log_offset
        pf = fit.power_amp * L ** fit.power_exp
        lines.append(f"{int(L)},{peaks.per_size[int(L)]!r},{v!r},{lf!r},{pf!r}")
    (out / "critical_entropy.csv").write_text("\n".join(lines) + "\n")

    report = {
        "log_fit": {"slope": fit.log_slope, "offset": fit.log_offset, "rms": fit.log_rms},
        "power_fit": {"amplitude": fit.power_amp, "exponent": fit.power_exp, "rms": fit.power_rms},
        "sizes": [int(L) for L in sizes],
        "values": [float(v) for v in values],
        "g_c_per_size": peaks.per_size,
        "input_tables": [str(t) for t in args.tables],
        "provenance": _provenance(args),
    }
    path = _write_report(out, "critical_fit.json", report)
    if not args.no_figures:
        plots.critical_fit_figure(sizes, values, fit, out / "critical_fit.png")
    print(f"[critical-fit] {fit.log_slope:.4g} ln L + {fit.log_offset:.4g} (rms {fit.log_rms:.3g}) | "
          f"{fit.power_amp:.4g} L^{fit.power_exp:.4g} (rms {fit.power_rms:.3g}) -> {path}")
    return 0


# ---------------------------------------------------------------- phase-diagram

def cmd_phase_diagram(args) -> int:
    import csv as _csv

    with open(args.points, newline="") as fh:
        reader = _csv.DictReader(fh)
        if set(reader.fieldnames or ()) < {"V", "g_c"}:
            raise CollapseError(f"{args.points}: expected columns 'V,g_c'")
        pairs = [(float(r["V"]), float(r["g_c"])) for r in reader]
    if len(pairs) < 4:
        raise InsufficientDataError(f"need at least 4 (V, g_c) pairs, got {len(pairs)}")
    pairs.sort()
    V = np.array([p[0] for p in pairs])
    g_c = np.array([p[1] for p in pairs])
    fit = clp.phase_diagram_fit(V, g_c)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    xs = np.linspace(V.min() * 0.5, V.max() * 1.1, 200)
    lines = ["V,g_c_fit"]
    lines.extend(f"{x!r},{fit.amplitude * np.exp(-fit.rate * x ** fit.exponent)!r}" for x in xs)
    (out / "phase_boundary.csv").write_text("\n".join(lines) + "\n")

    report = {
        "amplitude": fit.amplitude,
        "rate": fit.rate,
        "exponent": fit.exponent,
        "residual_rms": fit.residual_rms,
        "converged": fit.converged,
        "points": [{"V": float(v), "g_c": float(gc)} for v, gc in pairs],
        "input": str(args.points),
        "provenance": _provenance(args),
    }
    path = _write_report(out, "phase_diagram.json", report)
    if not args.no_figures:
        plots.phase_diagram_figure(V, g_c, fit, out / "phase_diagram.png")
    print(f"[phase-diagram] g_c(V) = {fit.amplitude:.4g} exp(-{fit.rate:.4g} V^{fit.exponent:.4g}), "
          f"rms {fit.residual_rms:.3g} -> {path}")
    return 0


# ---------------------------------------------------------------- selftest

def _suite_kraus():
    from zenochain.measurement import kraus_completeness_check

    worst = max(kraus_completeness_check(eta) for eta in (0.0, 0.25, 0.37, 0.5, 0.75, 1.0))
    return worst < 1e-14, f"max completeness residual {worst:.2e}"


def _suite_propagator():
    from zenochain.dynamics import build_hamiltonian, build_propagator
    from zenochain.fockspace import build_basis

    worst_h, worst_u = 0.0, 0.0
    for L, V in ((4, 0.0), (6, 1.0), (6, 5.0)):
        basis = build_basis(L, L // 2)
        H = build_hamiltonian(basis, V)
        worst_h = max(worst_h, float(np.max(np.abs(H.mat - H.mat.T))))
        P = build_propagator(H, 0.01)
        worst_u = max(worst_u, float(np.max(np.abs(P.U.conj().T @ P.U - np.eye(basis.dim)))))
    return (worst_h < 1e-12 and worst_u < 1e-8), f"hermiticity {worst_h:.2e}, unitarity {worst_u:.2e}"


def _suite_entropy():
    from zenochain.fockspace import StateVector, build_basis
    from zenochain.observables import amplitude_matrix, reduced_density_matrix, von_neumann_entropy

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(42)))
    basis = build_basis(6, 3)
    worst = 0.0
    for _ in range(50):
        amps = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
        psi = StateVector(basis, amps).normalize()
        rho = reduced_density_matrix(psi)
        s_a = von_neumann_entropy(rho)
        mat = amplitude_matrix(psi)
        lam_b = np.linalg.eigvalsh(mat.T @ mat.conj())
        lam_b = lam_b[lam_b > 1e-12]
        s_b = float(-np.sum(lam_b * np.log(lam_b)))
        worst = max(worst, abs(s_a - s_b), abs(float(np.trace(rho.matrix).real) - 1.0))
    return worst < 1e-8, f"max cut-consistency residual {worst:.2e}"


def _suite_channel():
    from zenochain.fockspace import StateVector, build_basis
    from zenochain.measurement import apply_sweep_batch, empty_site_masks

    basis = build_basis(4, 2)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(7)))
    amps = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
    psi = StateVector(basis, amps).normalize()
    masks = empty_site_masks(basis)
    occ = (~masks).astype(float)
    before = occ @ (np.abs(psi.amps) ** 2)

    n_rep = 100_000
    eta = 0.5
    A = np.repeat(psi.amps[:, None], n_rep, axis=1)
    apply_sweep_batch(A, masks, eta, rng.random((basis.L, n_rep)))
    after = (occ @ np.abs(A) ** 2).mean(axis=1)
    worst = float(np.max(np.abs(after - before)))
    # Binomial-scale Monte-Carlo error per site
    bound = 4.0 * 0.5 / np.sqrt(n_rep)
    return worst < bound, f"occupation-mean drift {worst:.2e} (bound {bound:.2e})"


def _suite_cost():
    from zenochain.collapse import DataPoint, cost_function, make_ansatz

    ansatz = make_ansatz("entropy-2", crit_fit=(0.0, 0.0))
    params = {"g_c": 0.5, "nu": 1.0}
    pts = [DataPoint(4, 1.0, 1.0), DataPoint(4, 2.0, 2.0), DataPoint(4, 3.0, 5.0)]
    ok = abs(cost_function(pts, ansatz, params)) < 1e-15
    pts2 = [DataPoint(4, 1.0, 0.0), DataPoint(4, 2.0, 1.0), DataPoint(4, 3.0, 0.0)]
    ok &= abs(cost_function(pts2, ansatz, params) - 1.0) < 1e-15

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(3)))
    pts3 = [
        DataPoint(int(L), float(g), float(rng.standard_normal()))
        for L in (6, 8, 10)
        for g in np.linspace(0.5, 3.5, 7)
    ]
    c0 = cost_function(pts3, ansatz, {"g_c": 1.6, "nu": 1.3})
    scaled = [DataPoint(p.L, p.g, -2.5 * p.y + 7.0) for p in pts3]
    c1 = cost_function(scaled, ansatz, {"g_c": 1.6, "nu": 1.3})
    ok &= abs(c0 - c1) < 1e-12
    return ok, "monotone zero, direct formula, affine invariance"


SELFTEST_SUITES = (
    ("kraus-completeness", _suite_kraus),
    ("propagator-algebra", _suite_propagator),
    ("entropy-oracles", _suite_entropy),
    ("measurement-channel", _suite_channel),
    ("cost-identities", _suite_cost),
)


def cmd_selftest(_args) -> int:
    t0 = time.time()
    failures = 0
    for name, suite in SELFTEST_SUITES:
        ok, detail = suite()
        print(f"[selftest] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        failures += 0 if ok else 1
    print(f"[selftest] {len(SELFTEST_SUITES) - failures}/{len(SELFTEST_SUITES)} suites passed "
          f"in {time.time() - t0:.1f}s")
    return 0 if failures == 0 else 1


COMMANDS = {
    "sweep": cmd_sweep,
    "collapse": cmd_collapse,
    "peak": cmd_peak,
    "critical-fit": cmd_critical_fit,
    "phase-diagram": cmd_phase_diagram,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except PhysicsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except (ConfigError, CollapseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
