"""Command-line runner: ``kerrbin {rabi,calibrate,qec,zrot,selftest}``.

Each command resolves one RunConfig (JSON file + dotted overrides), writes its
CSV/JSON outputs and a manifest.json into ``<out>/<command>/``, and exits with

    0  everything ran and all gates passed
    1  outputs written but a gate (convergence, self-test check) failed
    2  usage / configuration error, or missing calibration input
    3  a propagation or numerical failure
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bincode import logical_state
from .config import OUT_ENV, load_config
from .errors import ConfigError, KerrbinError
from .hilbert import fidelity_pure
from .policy import POLICY
from .protocols import (
    STEPS,
    RecoveryCalibration,
    calibrate_chain,
    calibration_input,
    chain_at,
    crossover_time,
    least_squares_slope,
    qec_sweep,
    rabi_scan,
    z_rotation,
)
from .reporting import write_csv, write_json, write_manifest
from .selftest import run_selftest

log = logging.getLogger("kerrbin")

EXIT_OK, EXIT_GATE, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
CONVERGENCE_TOL = POLICY.convergence_tol
DRIFT_TOL = 0.05


class UsageError(Exception):
    pass


def _tag(x):
    return format(float(x), "g")


def _convergence_gate(cfg, compute):
    """Compare headline numbers at the working and the convergence cutoff."""
    if cfg.convergence_cutoff is None:
        return {"passed": True, "skipped": True}
    base = np.asarray(compute(cfg.cutoff), dtype=float)
    big = np.asarray(compute(cfg.convergence_cutoff), dtype=float)
    ok = np.isfinite(base) & np.isfinite(big)
    change = float(np.max(np.abs(base[ok] - big[ok]))) if ok.any() else 0.0
    return {
        "passed": change < CONVERGENCE_TOL,
        "max_change": change,
        "threshold": CONVERGENCE_TOL,
        "cutoffs": [cfg.cutoff, cfg.convergence_cutoff],
    }


PROPAGATION_GATE = {
    "passed": True,
    "note": "trace, Hermiticity and positivity are checked after every propagation; a violation aborts the run",
}


# --------------------------------------------------------------------------
# commands


def cmd_rabi(cfg, out):
    r = cfg.rabi
    kp, policy = cfg.kerr, cfg.policy
    files, rows, plotted = [], [], []
    scan = {}
    for scale in r.p1_scales:
        traces = rabi_scan(kp, r.p2_values, r.duration, r.samples, r.periods, scale, cfg.cutoff, policy, cfg.threads)
        scan[scale] = traces
        for tr in traces:
            name = f"rabi_{_tag(tr.p2)}.csv" if scale == 1.0 else f"rabi_{_tag(tr.p2)}_x{_tag(scale)}.csv"
            files.append(write_csv(out / name, {"t": tr.times, "pop_1L": tr.population}))
            matched = scale == 1.0
            rows.append({
                "p2": tr.p2, "p1": tr.p1, "p1_scale": scale, "file": name,
                "max_population": tr.max_population,
                # the resonant two-level model only describes the matched drive
                "max_deviation_effective": tr.max_deviation if matched else None,
            })
            plotted.append((f"p2={_tag(tr.p2)}, x{_tag(scale)}", tr.times, tr.population, tr.effective if matched else None))
    matched = sorted((row for row in rows if row["p1_scale"] == 1.0), key=lambda row: row["p2"])
    devs = [row["max_deviation_effective"] for row in matched]
    summary = {
        "traces": rows,
        "ripple_increases_with_p2": bool(all(b > a for a, b in zip(devs, devs[1:]))) if 1.0 in scan else None,
    }

    def headline(n):
        traces = rabi_scan(kp, r.p2_values, r.duration, r.samples, r.periods, 1.0, n, policy, cfg.threads)
        return np.concatenate([tr.population for tr in traces])

    gates = {"propagation": PROPAGATION_GATE}
    gates["convergence"] = _convergence_gate(cfg, headline) if 1.0 in scan else {"passed": True, "skipped": True}
    summary["gates"] = gates
    files.append(write_json(out / "summary.json", summary))
    for row in rows:
        print(f"rabi p2={_tag(row['p2'])} p1_scale={_tag(row['p1_scale'])}: max P(1_L) = {row['max_population']:.6f}")
    if cfg.figures:
        from .plotting import plot_rabi

        files.append(plot_rabi(plotted, out / "rabi.png"))
    return files, gates


def _run_chain(cfg, t_error, cutoff=None):
    cutoff = cutoff or cfg.cutoff
    rho = calibration_input(cfg.kerr, cfg.loss, t_error, cfg.alpha, cfg.beta, cutoff, cfg.policy)
    grids = {step: cfg.grid(step) for step in STEPS}
    return calibrate_chain(rho, grids, cfg.kerr, cfg.loss, cfg.alpha, cfg.beta, cfg.policy, cfg.threads, t_error)


def cmd_calibrate(cfg, out):
    c = cfg.calibrate
    run = _run_chain(cfg, c.t_error)
    files = []
    for step in STEPS:
        files.append(write_csv(out / f"sweep_{step}.csv", run.sweeps[step].columns()))
    record = run.summary()
    record.update({"chi": cfg.chi, "gamma": cfg.gamma, "cutoff": cfg.cutoff})
    files.append(write_json(out / "calibration.json", record))

    base = np.array(run.amplitudes)
    sens_rows = {"t_error": [], "lambda_32": [], "p1": [], "lambda_12": [], "F1": [], "F2": [], "F3": [],
                 "max_relative_drift": []}
    for t in c.sensitivity_t_errors:
        other = _run_chain(cfg, float(t))
        amps = np.array(other.amplitudes)
        drift = float(np.max(np.abs(amps - base) / base))
        sens_rows["t_error"].append(float(t))
        for key, v in zip(("lambda_32", "p1", "lambda_12"), amps):
            sens_rows[key].append(v)
        for key, v in zip(("F1", "F2", "F3"), other.step_fidelities):
            sens_rows[key].append(v)
        sens_rows["max_relative_drift"].append(drift)
    if c.sensitivity_t_errors:
        files.append(write_csv(out / "sensitivity.csv", sens_rows))
    worst = max(sens_rows["max_relative_drift"], default=0.0)

    def headline(n):
        rho = calibration_input(cfg.kerr, cfg.loss, c.t_error, cfg.alpha, cfg.beta, n, cfg.policy)
        return chain_at(run.calibration, rho, cfg.kerr, cfg.loss, cfg.alpha, cfg.beta, cfg.policy)

    gates = {"propagation": PROPAGATION_GATE, "convergence": _convergence_gate(cfg, headline)}
    summary = dict(record)
    summary["sensitivity"] = {
        "t_errors": sens_rows["t_error"],
        "max_relative_drift": worst,
        "stable": bool(worst < DRIFT_TOL),
        "threshold": DRIFT_TOL,
    }
    summary["gates"] = gates
    files.append(write_json(out / "summary.json", summary))
    cal = run.calibration
    print(f"calibrate: lambda_32={cal.lambda_32:.6g} p1={cal.p1:.6g} lambda_12={cal.lambda_12:.6g} "
          f"phase_theta={cal.phase_theta:.6g}")
    print("calibrate: F1={:.6f} F2={:.6f} F3={:.6f} final={:.6f}".format(*run.step_fidelities, run.final_fidelity))
    if c.sensitivity_t_errors:
        print(f"calibrate: max amplitude drift over t_error {sens_rows['t_error']} = {worst:.3%}")
    if cfg.figures:
        from .plotting import plot_calibration

        panels = [(run.sweeps[s].parameter, run.sweeps[s].values, run.sweeps[s].fidelities) for s in STEPS]
        files.append(plot_calibration(panels, out / "calibration.png"))
    return files, gates


def _load_calibration(cfg):
    path = Path(cfg.qec.calibration) if cfg.qec.calibration else Path(cfg.out_dir) / "calibrate" / "calibration.json"
    if not path.is_file():
        raise UsageError(
            f"calibration file {path} not found; run `kerrbin calibrate` first "
            "(or point qec.calibration at an existing calibration.json)"
        )
    with open(path) as fh:
        record = json.load(fh)
    try:
        cal = RecoveryCalibration.from_dict(record["calibration"])
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"calibration file {path} is malformed: {exc}") from None
    for key in ("chi", "gamma"):
        if key in record and not math.isclose(record[key], getattr(cfg, key)):
            log.warning("calibration was made at %s=%s, running at %s", key, record[key], getattr(cfg, key))
    return cal, path


def cmd_qec(cfg, out):
    cal, cal_path = _load_calibration(cfg)
    grid = cfg.qec_grid()
    rec_loss = "same" if cfg.qec.lossy_recovery else None
    loss = cfg.loss

    def sweep(n):
        return qec_sweep(grid, cfg.kerr, loss, cal, n, cfg.alpha, cfg.beta, cfg.policy, cfg.threads, rec_loss)

    rows = sweep(cfg.cutoff)
    cols = {
        "t_error": [r.t_error for r in rows],
        "fidelity_no_qec": [r.fidelity_without_qec for r in rows],
        "fidelity_qec": [r.fidelity_with_qec for r in rows],
        "parity_odd_probability": [r.parity_odd_probability for r in rows],
        "status": [r.status for r in rows],
    }
    files = [write_csv(out / "qec.csv", cols)]
    t, f_ini, f_fin = (np.array(cols[k], dtype=float) for k in ("t_error", "fidelity_no_qec", "fidelity_qec"))
    slope_ini, slope_fin = least_squares_slope(t, f_ini), least_squares_slope(t, f_fin)
    order = np.argsort(t)
    lo, hi = order[0], order[-1]
    summary = {
        "calibration_file": str(cal_path),
        "calibration": cal.to_dict(),
        "slope_no_qec": slope_ini,
        "slope_qec": slope_fin,
        "smaller_slope_with_qec": bool(abs(slope_fin) < abs(slope_ini)) if math.isfinite(slope_fin) else None,
        "crossover_t_error": crossover_time(t[order], f_ini[order], f_fin[order]),
        "qec_helps_at_largest_t": bool(f_fin[hi] > f_ini[hi]) if math.isfinite(f_fin[hi]) else None,
        "qec_costs_at_smallest_t": bool(f_fin[lo] < f_ini[lo]) if math.isfinite(f_fin[lo]) else None,
        "rows_without_support": int(sum(r.status != "ok" for r in rows)),
    }

    def headline(n):
        if n == cfg.cutoff:
            return np.concatenate([f_ini, f_fin])
        big = sweep(n)
        return np.concatenate([[r.fidelity_without_qec for r in big], [r.fidelity_with_qec for r in big]])

    gates = {"propagation": PROPAGATION_GATE, "convergence": _convergence_gate(cfg, headline)}
    summary["gates"] = gates
    files.append(write_json(out / "summary.json", summary))
    print(f"qec: slope without QEC {slope_ini:.4g}, with QEC {slope_fin:.4g}, "
          f"crossover t_error {summary['crossover_t_error']}")
    if cfg.figures:
        from .plotting import plot_qec

        files.append(plot_qec(t, f_ini, f_fin, out / "qec.png"))
    return files, gates


def cmd_zrot(cfg, out):
    kp = cfg.kerr
    phases = np.asarray(cfg.zrot.phases, dtype=float)

    def fidelities(n):
        psi = logical_state(cfg.alpha, cfg.beta, n)
        f_t, f_in = [], []
        for phi in phases:
            target = logical_state(cfg.alpha, cfg.beta * np.exp(1j * phi), n)
            rotated = z_rotation(kp, phi, psi, policy=cfg.policy)
            f_t.append(fidelity_pure(target, rotated))
            f_in.append(fidelity_pure(psi, rotated))
        return np.array(f_t), np.array(f_in)

    f_target, f_input = fidelities(cfg.cutoff)
    durations = [phi / (4 * kp.chi) if kp.detuning_delta == -4 * kp.chi else float("nan") for phi in phases]
    files = [write_csv(out / "zrot.csv", {
        "phi": phases, "duration": durations, "fidelity_target": f_target, "fidelity_input": f_input,
    })]
    gates = {
        "propagation": PROPAGATION_GATE,
        "convergence": _convergence_gate(cfg, lambda n: np.concatenate(fidelities(n))),
    }
    files.append(write_json(out / "summary.json", {
        "min_fidelity_target": float(np.min(f_target)), "gates": gates,
    }))
    for phi, f in zip(phases, f_target):
        print(f"zrot phi={phi:.6g}: fidelity to phased target {f:.12f}")
    if cfg.figures:
        from .plotting import plot_zrot

        files.append(plot_zrot(phases, f_target, f_input, out / "zrot.png"))
    return files, gates


def cmd_selftest(cfg, out):
    checks = run_selftest(cfg.kerr, cfg.gamma, cfg.cutoff, cfg.convergence_cutoff)
    for check in checks:
        print(check.line())
    gates = {check.name: {"passed": check.passed, "value": check.value, "threshold": check.threshold}
             for check in checks}
    files = [write_json(out / "selftest.json", {"checks": [c.to_dict() for c in checks]})]
    return files, gates


COMMANDS = {
    "rabi": (cmd_rabi, "Rabi oscillations of the logical X drive, one CSV per p2"),
    "calibrate": (cmd_calibrate, "chained amplitude sweeps for the three recovery drives"),
    "qec": (cmd_qec, "fidelity with and without recovery versus t_error"),
    "zrot": (cmd_zrot, "logical Z rotations by static Kerr evolution"),
    "selftest": (cmd_selftest, "oracle comparisons and invariant checks"),
}


# --------------------------------------------------------------------------
# entry point


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS,
                        help=f"output root (default: ${OUT_ENV} or ./results)")
    common.add_argument("--threads", type=int, metavar="N", default=argparse.SUPPRESS,
                        help="worker processes for grid points")
    common.add_argument("--figures", action="store_true", default=argparse.SUPPRESS,
                        help="also render PNG figures next to the data files")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="kerrbin", description=__doc__.split("\n")[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, parents=[common])
        p.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                       help="dotted config overrides, e.g. rabi.p2_values=[0.01] gamma=0")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    opts = vars(args)
    logging.basicConfig(level=logging.INFO if opts.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(opts.get("config"), opts.get("overrides", []), out_dir=opts.get("out"),
                          threads=opts.get("threads"), figures=opts.get("figures"))
    except ConfigError as exc:
        print(f"kerrbin: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = Path(cfg.out_dir) / args.command
    fn = COMMANDS[args.command][0]
    try:
        files, gates = fn(cfg, out)
    except UsageError as exc:
        print(f"kerrbin: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"kerrbin: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KerrbinError as exc:
        print(f"kerrbin: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    write_manifest(out, args.command, cfg.to_dict(), files, gates)
    failed = [name for name, g in gates.items() if not g.get("passed", False)]
    for name in failed:
        print(f"kerrbin: gate failed: {name} {gates[name]}", file=sys.stderr)
    return EXIT_GATE if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
