"""Command-line front end: experiment dispatch and artifact serialization.

Usage: ``myoarm <command> [--config PATH] [--seed N] [--out DIR]
[--preset NAME]``. Commands:

* ``curves``    — dump the normalized muscle characteristic curves as CSV;
* ``simulate``  — park on the trajectory start and hold, logging one
  open-loop trial (the null baseline every learning run starts from);
* ``ilc``       — run the iterative learning experiment, logging every
  iteration's trial and estimator state;
* ``sweep``     — learn once, then replay the converged feedforward
  open-loop under increasing tip load;
* ``compare``   — learn once, then run the task-space PID baseline from the
  same start for side-by-side metrics;
* ``lowpass``   — measure tendon-force attenuation of 1 Hz vs 50 Hz
  excitation ripple on one isometric muscle.

Every run writes, under ``<out>/<command>/``: the exact configuration used
(``config.ini``), a ``run_summary.json`` (sorted keys, no timestamps, so
identical config+seed reproduce it byte for byte), and per-condition
directories of per-trial CSV logs named ``iter_<k>.csv``. CSV files are
UTF-8 with LF line endings, ``.`` decimal separators, and a versioned
``#``-comment schema line above the column header. Failures exit nonzero
after printing a one-line machine-readable error JSON to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    ExperimentConfig,
    PRESETS,
    arm_from_config,
    ilc_config_from,
    load_config,
    parse_config,
    serialize_config,
)
from .control import DdilcController
from .harness import (
    DisturbanceSpec,
    ReplayController,
    TrialLog,
    compute_metrics,
    disturbance_sweep,
    generate_trajectory,
    joint_path,
    lowpass_attenuation_test,
    park_state,
    pid_baseline,
    run_ilc,
    run_trial,
)
from .muscle import MuscleParams, curve_samples

__all__ = ["main", "dispatch"]

_COMMANDS = {
    "curves": "dump normalized muscle curves (x, fl, fpe, fv, ft) as CSV",
    "simulate": "hold the parked posture open-loop for one logged trial",
    "ilc": "run the iterative learning experiment",
    "sweep": "replay converged feedforward under increasing tip load",
    "compare": "learning controller vs task-space PID on the same task",
    "lowpass": "tendon-force attenuation of 1 Hz vs 50 Hz drive ripple",
}


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------

def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path: Path, schema_note: str, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {schema_note}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=False)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def _write_trial_csv(path: Path, log: TrialLog) -> None:
    """Per-tick log: state at the start of each tick, inputs held over it."""
    n_joints = log.q.shape[1]
    n_muscles = log.excitations.shape[1]
    columns = (["t"]
               + [f"q{j}" for j in range(n_joints)]
               + [f"qdot{j}" for j in range(n_joints)]
               + ["tip_x", "tip_y", "tip_x_desired", "tip_y_desired"]
               + [f"drive{j}" for j in range(n_joints)]
               + [f"exc{i}" for i in range(n_muscles)]
               + [f"tendon_force{i}" for i in range(n_muscles)])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# myoarm-trial-v1: one row per physics tick; q/qdot/tip "
                 "at tick start, drive/exc/force applied over the tick\n")
        fh.write(",".join(columns) + "\n")
        for tick in range(log.excitations.shape[0]):
            row = ([log.time[tick]]
                   + list(log.q[tick]) + list(log.qdot[tick])
                   + list(log.tip[tick]) + list(log.tip_desired[tick])
                   + list(log.drives[tick // log.decimation])
                   + list(log.excitations[tick])
                   + list(log.tendon_forces[tick]))
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _write_estimator_csv(path: Path, controller: DdilcController,
                         iteration: int) -> None:
    """Long-format dump of the estimator state after one iteration."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# myoarm-estimator-v1: state after iteration "
                 f"{iteration}; phi_hat = output-increment model, xi_hat = "
                 "feedback gain, u_ff = feedforward used this iteration\n")
        fh.write("quantity,row,col,value\n")
        for name, matrix in (("phi_hat", controller.est.phi_hat),
                             ("xi_hat", controller.mem.xi_hat),
                             ("u_ff", controller.mem.u_ff)):
            for r, row in enumerate(np.atleast_2d(matrix)):
                for c, value in enumerate(row):
                    fh.write(f"{name},{r},{c},{repr(float(value))}\n")


def _metrics_dict(m) -> dict:
    return {
        "mean_abs_mm": m.mean_abs_mm,
        "mse_mm2": m.mse_mm2,
        "std_mm": m.std_mm,
        "muscle_len_mean_abs_mm": m.muscle_len_mean_abs_mm,
        "samples": m.samples,
        "diverged": m.diverged,
    }


# ---------------------------------------------------------------------------
# command runners (each returns the summary payload for run_summary.json)
# ---------------------------------------------------------------------------

def _cmd_curves(cfg: ExperimentConfig, out: Path) -> dict:
    params = MuscleParams(**cfg.muscle_overrides)
    rows = curve_samples(params)
    _write_csv(out / "curves.csv",
               "myoarm-curves-v1: fl/fpe at fiber length 0.5+x, fv at "
               "velocity 2x-1, ft at tendon strain 2x*eps0_t",
               ["x", "fl", "fpe", "fv", "ft"], rows)
    return {"rows": len(rows), "files": ["curves.csv"],
            "eps0_t": params.eps0_t}


def _active_disturbance(cfg: ExperimentConfig) -> DisturbanceSpec | None:
    dist = cfg.disturbance
    if dist.load_fraction > 0.0 or dist.noise_amplitude > 0.0:
        return dist
    return None


def _cmd_simulate(cfg: ExperimentConfig, out: Path) -> dict:
    model = arm_from_config(cfg)
    dist = _active_disturbance(cfg)
    eff = model
    if dist is not None and dist.tip_mass > 0.0:
        eff = model.with_tip_mass(model.tip_mass + dist.tip_mass)
    points = generate_trajectory(cfg.trajectory, cfg.dt)
    desired_q = joint_path(model, points)
    start, u_hold = park_state(eff, desired_q[0], cfg.dt,
                               total_time=cfg.settle_time)
    n_control = (points.shape[0] - 1) // cfg.control_decimation
    log = run_trial(model, ReplayController(np.tile(u_hold, (n_control, 1))),
                    points, cfg.dt, disturbance=dist, seed=cfg.seed,
                    start_state=start, decimation=cfg.control_decimation,
                    desired_joint_path=desired_q)
    cond = out / "hold"
    cond.mkdir(parents=True, exist_ok=True)
    _write_trial_csv(cond / "iter_0.csv", log)
    return {"conditions": ["hold"], "hold_drives": [float(u) for u in u_hold],
            "metrics": _metrics_dict(compute_metrics(log))}


def _summary_payload(s) -> dict:
    return {
        "iterations": s.iterations,
        "mean_abs_mm": list(s.mean_abs_mm),
        "mse_mm2": list(s.mse_mm2),
        "std_mm": list(s.std_mm),
        "muscle_len_mean_abs_mm": list(s.muscle_len_mean_abs_mm),
        "diverged": list(s.diverged),
        "ff_shrink_iterations": list(s.ff_shrink_iterations),
        "final_mean_abs_mm": s.mean_abs_mm[-1],
    }


def _cmd_ilc(cfg: ExperimentConfig, out: Path) -> dict:
    model = arm_from_config(cfg)
    cond = out / "train"
    cond.mkdir(parents=True, exist_ok=True)

    def on_iteration(k, log, metrics, controller):
        _write_trial_csv(cond / f"iter_{k}.csv", log)
        _write_estimator_csv(cond / f"estimator_iter_{k}.csv", controller, k)

    result = run_ilc(ilc_config_from(cfg, model), on_iteration=on_iteration)
    _write_csv(out / "feedforward.csv",
               "myoarm-feedforward-v1: converged drive table, one row per "
               "control tick",
               [f"drive{j}" for j in range(model.n_joints)],
               result.feedforward_drives)
    payload = _summary_payload(result.summary)
    payload["conditions"] = ["train"]
    payload["sensitivity_m_per_drive"] = result.sensitivity.tolist()
    return payload


def _cmd_sweep(cfg: ExperimentConfig, out: Path) -> dict:
    model = arm_from_config(cfg)
    # train on the nominal plant; the disturbance applies to the replays
    train_cfg = ilc_config_from(replace(cfg, disturbance=DisturbanceSpec()),
                                model)
    result = run_ilc(train_cfg)
    conditions = [f"load_{round(1000 * f):03d}" for f in cfg.sweep_fractions]
    dirs = [out / name for name in conditions]
    for d in dirs:
        d.mkdir(parents=True, exist_ok=True)
    sweep = disturbance_sweep(
        model, result.feedforward_drives, result.points, cfg.dt,
        cfg.sweep_fractions, decimation=cfg.control_decimation,
        settle_time=cfg.settle_time, seed=cfg.seed,
        repetitions=cfg.repetitions,
        noise_amplitude=cfg.disturbance.noise_amplitude,
        noise_frequency_hz=cfg.disturbance.noise_frequency_hz,
        desired_joint_path=result.desired_joint_path,
        on_trial=lambda fi, rep, log: _write_trial_csv(
            dirs[fi] / f"iter_{rep}.csv", log))
    table = [(p.load_fraction, p.mean_abs_mm, p.mse_mm2,
              p.std_between_reps_mm, p.diverged) for p in sweep.points]
    _write_csv(out / "sweep.csv",
               "myoarm-sweep-v1: open-loop replay error vs tip load "
               "(fraction of the 2.5 kg rated load)",
               ["load_fraction", "mean_abs_mm", "mse_mm2",
                "std_between_reps_mm", "diverged"], table)
    return {
        "conditions": conditions,
        "training_final_mean_abs_mm": result.summary.mean_abs_mm[-1],
        "repetitions": cfg.repetitions,
        "table": [
            {"load_fraction": p.load_fraction,
             "mean_abs_mm": p.mean_abs_mm,
             "mse_mm2": p.mse_mm2,
             "std_between_reps_mm": p.std_between_reps_mm,
             "diverged": p.diverged}
            for p in sweep.points],
    }


def _cmd_compare(cfg: ExperimentConfig, out: Path) -> dict:
    model = arm_from_config(cfg)
    result = run_ilc(ilc_config_from(cfg, model))
    ddilc_dir = out / "ddilc"
    pid_dir = out / "pid"
    ddilc_dir.mkdir(parents=True, exist_ok=True)
    pid_dir.mkdir(parents=True, exist_ok=True)
    _write_trial_csv(ddilc_dir / f"iter_{cfg.iterations - 1}.csv",
                     result.final_log)
    pid_log = pid_baseline(model, result.points, cfg.dt, cfg.pid,
                           start_state=result.start_state,
                           decimation=cfg.control_decimation,
                           desired_joint_path=result.desired_joint_path)
    _write_trial_csv(pid_dir / "iter_0.csv", pid_log)
    ddilc_mm = result.summary.mean_abs_mm[-1]
    pid_m = compute_metrics(pid_log)
    return {
        "conditions": ["ddilc", "pid"],
        "ddilc_final_mean_abs_mm": ddilc_mm,
        "pid": _metrics_dict(pid_m),
        "error_ratio": ddilc_mm / pid_m.mean_abs_mm,
        "improvement_percent": 100.0 * (1.0 - ddilc_mm / pid_m.mean_abs_mm),
    }


def _cmd_lowpass(cfg: ExperimentConfig, out: Path) -> dict:
    model = arm_from_config(cfg)
    points = lowpass_attenuation_test(model)
    _write_csv(out / "lowpass.csv",
               "myoarm-lowpass-v1: lock-in tendon-force response to "
               "excitation ripple on one isometric muscle",
               ["frequency_hz", "force_amplitude_n", "activation_amplitude",
                "measured_db", "activation_oracle_db"],
               [(p.frequency_hz, p.force_amplitude_n, p.activation_amplitude,
                 p.measured_db, p.activation_oracle_db) for p in points])
    return {
        "frequencies_hz": [p.frequency_hz for p in points],
        "measured_db": [p.measured_db for p in points],
        "activation_oracle_db": [p.activation_oracle_db for p in points],
        "gap_db": points[0].measured_db - points[-1].measured_db,
    }


_RUNNERS = {
    "curves": _cmd_curves,
    "simulate": _cmd_simulate,
    "ilc": _cmd_ilc,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
    "lowpass": _cmd_lowpass,
}


# ---------------------------------------------------------------------------
# dispatch and entry point
# ---------------------------------------------------------------------------

def dispatch(command: str, cfg: ExperimentConfig) -> int:
    """Run one command, writing artifacts under ``<out_dir>/<command>/``.

    The output directory always receives the exact configuration used
    (``config.ini``) and a deterministic ``run_summary.json``.
    """
    if command not in _RUNNERS:
        raise ConfigError(f"unknown command {command!r}; expected one of "
                          f"{', '.join(_RUNNERS)}")
    out = Path(cfg.out_dir) / command
    out.mkdir(parents=True, exist_ok=True)
    echo = serialize_config(cfg)
    with open(out / "config.ini", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(echo)
    payload = {"command": command, "seed": cfg.seed, "config_ini": echo}
    payload.update(_RUNNERS[command](cfg, out))
    _write_json(out / "run_summary.json", payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="INI experiment config (defaults apply if omitted)")
    common.add_argument("--seed", type=int, metavar="N",
                        help="override the experiment seed")
    common.add_argument("--out", metavar="DIR",
                        help="override the output directory")
    common.add_argument("--preset", choices=sorted(PRESETS),
                        help="override the arm preset")
    parser = argparse.ArgumentParser(
        prog="myoarm",
        description="Muscle-driven planar arm simulator with a data-driven "
                    "iterative learning controller.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")
    for name, help_text in _COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def _print_error(exc: BaseException) -> None:
    print(json.dumps({"error": {"type": type(exc).__name__,
                                "message": str(exc)}},
                     sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = (load_config(args.config) if args.config is not None
               else parse_config(""))
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)
        if args.preset is not None:
            cfg = replace(cfg, preset=args.preset)
        return dispatch(args.command, cfg)
    except ConfigError as exc:
        _print_error(exc)
        return 2
    except Exception as exc:    # CLI boundary: report, don't traceback
        _print_error(exc)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
