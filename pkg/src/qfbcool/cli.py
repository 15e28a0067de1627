"""Command-line entry point.

    qfbcool simulate --config run.ini [--out DIR] [--controller KIND] [...]
    qfbcool verify qutrit|heisenberg [--f0 zero] [--jx .. --jy .. --jz ..]
    qfbcool preset list | qutrit | heisenberg [--jx .. --jy .. --jz ..]

Exit codes: 0 success, 1 validation failure, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .config import emit_config, parse_config, parse_config_text
from .ensemble import run_ensemble
from .errors import SimulationError, ValidationError
from .model import build_liouvillian, check_assumptions, evolve_average
from .systems import PRESETS, get_preset

log = logging.getLogger("qfbcool")

CSV_HEADER = ["t", "mean_fidelity", "stderr_fidelity", "mean_x_estimate", "control_duty_cycle"]

# flag dest -> (section, key)
OVERRIDES = {
    "preset": ("model", "preset"),
    "jx": ("model", "jx"),
    "jy": ("model", "jy"),
    "jz": ("model", "jz"),
    "f0": ("model", "f0"),
    "mode": ("model", "mode"),
    "controller": ("controller", "kind"),
    "gamma": ("controller", "gamma"),
    "beta": ("controller", "beta"),
    "epsilon": ("controller", "epsilon"),
    "window_k": ("controller", "window_k"),
    "tau_s_override": ("controller", "tau_s_override"),
    "n_initial": ("ensemble", "n_initial"),
    "runs_per_initial": ("ensemble", "runs_per_initial"),
    "T": ("ensemble", "T"),
    "dt": ("ensemble", "dt"),
    "seed": ("ensemble", "master_seed"),
    "sample_every": ("ensemble", "sample_every"),
    "init_scheme": ("ensemble", "init_scheme"),
    "init_diag": ("ensemble", "init_diag"),
    "workers": ("ensemble", "workers"),
    "batch_size": ("ensemble", "batch_size"),
    "out": ("output", "dir"),
    "dump_trajectories": ("output", "dump_trajectories"),
    "plot_stub": ("output", "plot_stub"),
}


def fmt(v) -> str:
    return f"{float(v):.16e}"


def write_ensemble_csv(path: Path, result) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in zip(result.sample_times, result.mean_fidelity, result.stderr_fidelity,
                       result.mean_x_estimate, result.control_duty_cycle):
            w.writerow([fmt(v) for v in row])


def write_trajectory_csv(path: Path, times, traj: dict) -> None:
    cols = ["fidelity", "x_true", "x_estimate", "control", "y_cumulative"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + cols)
        for m, t in enumerate(times):
            w.writerow([fmt(t)] + [str(int(traj[c][m])) if c == "control" else fmt(traj[c][m]) for c in cols])


PLOT_STUB = """\
# gnuplot script: mean fidelity with one standard error band
set datafile separator ','
set key autotitle columnhead
set xlabel 't'
set ylabel 'mean fidelity'
plot 'ensemble.csv' using 1:($2-$3):($2+$3) with filledcurves fs transparent solid 0.3 notitle, \\
     '' using 1:2 with lines lw 2 title 'mean fidelity'
"""


def cmd_simulate(args) -> int:
    overrides = {OVERRIDES[k]: v for k, v in vars(args).items() if k in OVERRIDES and v is not None}
    if args.config:
        cfg = parse_config(args.config, overrides)
    else:
        cfg = parse_config_text("", overrides)
    spec = cfg.build_model()
    cfg = cfg.resolved(spec)
    ens = cfg.to_ensemble_config()
    e, o = cfg["ensemble"], cfg["output"]

    out = Path(o["dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(emit_config(cfg))
    tau_s = cfg.tau_s(spec)
    if tau_s is not None:
        log.info("activation delay tau_s = %.6g", tau_s)

    result = run_ensemble(ens, spec, workers=e["workers"], batch_size=e["batch_size"],
                          keep_trajectories=o["dump_trajectories"])
    write_ensemble_csv(out / "ensemble.csv", result)
    if o["dump_trajectories"]:
        tdir = out / "trajectories"
        tdir.mkdir(exist_ok=True)
        for (i, j), traj in result.trajectories.items():
            write_trajectory_csv(tdir / f"traj_{i}_{j}.csv", result.sample_times, traj)
    if o["plot_stub"]:
        (out / "plot.gp").write_text(PLOT_STUB)
    print(f"{result.n_trajectories_total} trajectories; final mean fidelity "
          f"{result.final_fidelity:.6f} +/- {result.final_stderr:.6f}; wrote {out / 'ensemble.csv'}")
    return 0


def _preset_from_args(args):
    kw = {"f0": getattr(args, "f0", None) or "default", "mode": getattr(args, "mode", None) or "cooling"}
    for name in ("jx", "jy", "jz"):
        if getattr(args, name, None) is not None:
            kw[name] = getattr(args, name)
    return get_preset(args.preset, **kw)


def cmd_verify(args) -> int:
    spec = _preset_from_args(args)
    report = check_assumptions(spec)
    print(f"preset: {spec.name}")
    print(report.format())
    sp = spec.spectrum
    print("eigenvalues: " + ", ".join(f"{v:.6g}" for v in sp.eigenvalues))
    print("multiplicities: " + ", ".join(str(m) for m in sp.multiplicities))
    print(f"delta: {spec.delta:.6g}")
    print(f"target multiplicity: {sp.multiplicities[spec.target_index]}")
    s = np.linalg.svd(build_liouvillian(spec.H0 + spec.F0, spec.L), compute_uv=False)
    print(f"liouvillian rank: {int(report.unique_equilibrium.value)} of {spec.dim ** 2} "
          f"(smallest singular values: {', '.join(f'{v:.3e}' for v in s[-2:])})")

    # worst case for the average-dynamics witness: spread over the far extremal eigenspace
    far = spec.spectrum.n_distinct - 1 - spec.target_index
    rho0 = np.array(sp.projectors[far]) / sp.multiplicities[far]
    ok = report.passed
    if report.unique_equilibrium.passed:
        avg = evolve_average(spec, 1, rho0, args.horizon, dt=args.avg_dt)
        if avg.witness_time is None:
            print(f"witness: FAIL (V stayed on the far side of delta up to T={args.horizon:g})")
            ok = False
        else:
            print(f"witness: PASS (V(sigma_t) crosses delta at t={avg.witness_time:.6g})")
    else:
        print("witness: SKIPPED (equilibrium not unique)")
    print("overall: " + ("PASS" if ok else "FAIL"))
    return 0 if ok else 1


def cmd_preset(args) -> int:
    if args.preset == "list":
        for name, desc in PRESETS.items():
            print(f"{name}: {desc}")
        return 0
    spec = _preset_from_args(args)
    np.set_printoptions(precision=4, suppress=True, linewidth=120)
    print(f"preset: {spec.name} (dim {spec.dim}, mode {spec.mode})")
    for label, op in (("H0", spec.H0), ("L", spec.L), ("F0", spec.F0)):
        print(f"{label} =\n{op}")
    print("eigenvalues of L: " + ", ".join(f"{v:.6g}" for v in spec.spectrum.eigenvalues))
    print("multiplicities: " + ", ".join(str(m) for m in spec.spectrum.multiplicities))
    return 0


def _model_flags(p):
    p.add_argument("--jx", type=float)
    p.add_argument("--jy", type=float)
    p.add_argument("--jz", type=float)
    p.add_argument("--f0", choices=("default", "zero"))
    p.add_argument("--mode", choices=("cooling", "heating"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qfbcool", description="Filter-free quantum feedback cooling simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo ensemble and write CSV output")
    sim.add_argument("--config", help="INI run configuration")
    sim.add_argument("--preset", choices=tuple(PRESETS))
    _model_flags(sim)
    sim.add_argument("--controller", choices=("free", "ideal", "ergodic", "windowed"))
    for name, typ in (("gamma", float), ("beta", float), ("epsilon", float), ("window_k", int),
                      ("tau_s_override", float), ("n_initial", int), ("runs_per_initial", int),
                      ("T", float), ("dt", float), ("seed", int), ("sample_every", int),
                      ("workers", int), ("batch_size", int)):
        sim.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ)
    sim.add_argument("--init-scheme", dest="init_scheme", choices=("haar_pure", "ginibre_mixed", "fixed"))
    sim.add_argument("--init-diag", dest="init_diag", help="comma-separated diagonal of a fixed initial state")
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--dump-trajectories", dest="dump_trajectories", action="store_const", const=True)
    sim.add_argument("--plot-stub", dest="plot_stub", action="store_const", const=True)
    sim.set_defaults(func=cmd_simulate)

    ver = sub.add_parser("verify", help="check model assumptions and equilibrium uniqueness")
    ver.add_argument("preset", choices=tuple(PRESETS))
    _model_flags(ver)
    ver.add_argument("--horizon", type=float, default=50.0, help="average-dynamics horizon for the witness")
    ver.add_argument("--avg-dt", dest="avg_dt", type=float, default=1e-3)
    ver.set_defaults(func=cmd_verify)

    pre = sub.add_parser("preset", help="list presets or show one")
    pre.add_argument("preset", choices=("list",) + tuple(PRESETS))
    _model_flags(pre)
    pre.set_defaults(func=cmd_preset)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (SimulationError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
