"""Command-line interface: ``qperiodic <command> --config run.json``.

Exit codes: 0 on success, 1 on a numerical failure, 2 on a configuration
error.  Every command writes its outputs and a ``manifest.json`` into the
configured ``output_dir``.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .channels import choi_psd_check, collision_channel, composite, fixed_point_dimension, stationary_state
from .channels import MAX_SUPEROP_DIM
from .dynamics import TrajectoryConfig, ensemble_average, run_trajectory, setup_for, trajectory_seeds
from .errors import ConfigError, NumericalError, QPeriodicError, SchemaError
from .models import CouplingParams, IsingParams, XxzParams, xi_operators
from .spectra import dominant_peak, oscillation_verdict, windowed_fourier
from .symmetry import collision_points, verify_symmetry

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}


def _obj(props: dict, **extra) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False, **extra}


SCHEMA = _obj(
    {
        "model": _obj(
            {
                "type": {"enum": ["xxz", "ising"]},
                "M": {"type": "integer", "minimum": 2, "maximum": 10},
                "omega0": _NUM,
                "delta": _NUM,
                "B": _NUM,
                "J": _NUM,
                "alpha": _POS,
            }
        ),
        "coupling": _obj({"Gamma": _NONNEG, "tau": _POS}),
        "trajectory": _obj(
            {
                "gamma": _POS,
                "n_collisions": {"type": "integer", "minimum": 1},
                "dt_out": _POS,
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "n_traj": {"type": "integer", "minimum": 1},
                "initial_state": {"enum": ["random_pure", "all_up"]},
                "observables": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "string", "pattern": r"^(s[xyz][1-9][0-9]*|imbalance|sz_total|excitations)$"},
                },
            }
        ),
        "spectrum": _obj(
            {
                "t_star": _NONNEG,
                "omega_max": _POS,
                "n_bins": {"type": "integer", "minimum": 4},
                "omega_min": {"anyOf": [_NONNEG, {"type": "null"}]},
                "k_threshold": _POS,
            }
        ),
        "symmetry": _obj(
            {
                "tau_grid": {"type": "array", "minItems": 1, "items": _POS},
                "theta": _NONNEG,
            }
        ),
        "output_dir": {"type": "string", "minLength": 1},
    }
)

_COMMON = {
    "trajectory": {"n_collisions": 400, "dt_out": 0.1, "seed": 1, "n_traj": 1, "initial_state": "random_pure"},
    "spectrum": {"omega_max": 4.0, "n_bins": 2048, "k_threshold": 10.0},
    "symmetry": {"tau_grid": [0.25, 0.5, 1.0, 2.0], "theta": 0.0},
    "output_dir": "qperiodic_out",
}

DEFAULTS = {
    "xxz": {
        "model": {"type": "xxz", "M": 4, "omega0": 1.0, "delta": 0.5},
        "coupling": {"Gamma": 6.0, "tau": 1.0},
        "trajectory": {"gamma": 0.5, "observables": ["sx1", "sx2", "sx3", "sx4"]},
        "spectrum": {"t_star": 250.0, "omega_min": None},
    },
    "ising": {
        "model": {"type": "ising", "M": 7, "B": 5.0, "J": 1.0, "alpha": 1.1},
        "coupling": {"Gamma": 4.0, "tau": 0.5},
        "trajectory": {"gamma": 1.0, "n_collisions": 1600, "observables": ["imbalance"]},
        "spectrum": {"t_star": 100.0, "omega_min": 0.5},
    },
}

_XXZ_ONLY = {"omega0", "delta"}
_ISING_ONLY = {"B", "J", "alpha"}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _schema_error(err: jsonschema.ValidationError) -> SchemaError:
    path = list(err.absolute_path)
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra:
            return SchemaError(path + [extra[0]], f"unknown key {extra[0]!r}")
    return SchemaError(path, err.message)


def validate_config(raw) -> dict:
    """Validate a raw config document and fill in model-specific defaults.

    Raises:
        SchemaError: naming the path of the first offending key.
    """
    if not isinstance(raw, dict):
        raise SchemaError([], "config must be a JSON object")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        raise _schema_error(errors[0])
    kind = raw.get("model", {}).get("type", "xxz")
    wrong = _ISING_ONLY if kind == "xxz" else _XXZ_ONLY
    for key in raw.get("model", {}):
        if key in wrong:
            raise SchemaError(["model", key], f"key {key!r} does not apply to model type {kind!r}")
    cfg = _merge(_merge(_COMMON, DEFAULTS[kind]), raw)
    if kind == "xxz" and cfg["model"]["M"] < 3:
        raise SchemaError(["model", "M"], "XXZ ring needs M >= 3")
    return cfg


def parse_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError([], f"invalid JSON: {exc}") from exc
    return validate_config(raw)


def model_params(cfg: dict):
    m = dict(cfg["model"])
    kind = m.pop("type")
    return XxzParams(**m) if kind == "xxz" else IsingParams(**m)


def trajectory_config(cfg: dict) -> TrajectoryConfig:
    tr = cfg["trajectory"]
    return TrajectoryConfig(
        model=model_params(cfg),
        coupling=CouplingParams(cfg["coupling"]["Gamma"], cfg["coupling"]["tau"]),
        gamma=tr["gamma"],
        n_collisions=tr["n_collisions"],
        dt_out=tr["dt_out"],
        seed=tr["seed"],
        initial_state=tr["initial_state"],
        observables=tuple(tr["observables"]),
    )


def _fmt(x) -> str:
    # shortest round-trip representation
    return repr(float(x))


def write_csv(path: Path, header: tuple[str, str], xs, ys) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x, y in zip(xs, ys):
            w.writerow((_fmt(x), _fmt(y)))


def read_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read input {path}: {exc}") from exc
    if not rows or len(rows[0]) != 2:
        raise ConfigError(f"{path}: expected two columns")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float).reshape(-1, 2)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return data[:, 0], data[:, 1]


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _spectrum_payload(name: str, times, values, sp: dict, out: Path) -> dict:
    spec = windowed_fourier(times, values, sp["t_star"], sp["omega_max"], sp["n_bins"])
    write_csv(out / f"spectrum_{name}.csv", ("omega", "amplitude"), spec.omegas, spec.amplitudes)
    peak = dominant_peak(spec, sp["omega_min"])
    return {
        "observable": name,
        "omega_peak": peak.omega,
        "amplitude": peak.amplitude,
        "prominence": peak.prominence,
        "oscillating": oscillation_verdict(spec, sp["omega_min"], sp["k_threshold"]),
        "bin_width": spec.bin_width,
    }


def cmd_simulate(cfg: dict, out: Path) -> dict:
    tcfg = trajectory_config(cfg)
    n_traj = cfg["trajectory"]["n_traj"]
    if n_traj == 1:
        series = run_trajectory(tcfg)
        seeds = [tcfg.seed]
    else:
        series = ensemble_average(tcfg, n_traj)
        seeds = trajectory_seeds(tcfg.seed, n_traj)
    for name, vals in series.values.items():
        write_csv(out / f"{name}.csv", ("t", "value"), series.times, vals)
    return {
        "seeds": seeds,
        "final_time": series.final_time,
        "collision_times": [list(w) for w in series.collision_times],
    }


def cmd_spectrum(cfg: dict, out: Path, input_path: Path) -> dict:
    times, values = read_csv(input_path)
    report = _spectrum_payload(input_path.stem, times, values, cfg["spectrum"], out)
    write_json(out / f"peak_{input_path.stem}.json", report)
    return {"input": str(input_path)}


def cmd_verify_symmetry(cfg: dict, out: Path) -> dict:
    params = model_params(cfg)
    if not isinstance(params, XxzParams):
        raise ConfigError("symmetry verification is available for the XXZ model only")
    setup = setup_for(trajectory_config(cfg))
    syms = xi_operators(params)
    points = collision_points(setup, cfg["symmetry"]["tau_grid"], cfg["symmetry"]["theta"])
    reports = [verify_symmetry(setup, s, points).to_dict() for s in syms]
    write_json(out / "symmetry_report.json", {"reports": reports, "all_pass": all(r["passes"] for r in reports)})
    return {}


def cmd_channel_info(cfg: dict, out: Path) -> dict:
    tcfg = trajectory_config(cfg)
    setup = setup_for(tcfg)
    channel = collision_channel(setup, tcfg.tau)
    choi = choi_psd_check(channel)
    report = {
        "dim": channel.dim,
        "n_kraus": len(channel.kraus),
        "tau": channel.tau,
        "tp_residual": channel.tp_residual(),
        "choi_min_eig": choi.min_eig,
        "completely_positive": choi.is_cp,
    }
    if channel.dim <= MAX_SUPEROP_DIM:
        cmap = composite(channel, setup.h_sys, cfg["symmetry"]["theta"])
        omega = stationary_state(cmap)
        report["theta"] = cmap.theta
        report["fixed_point_dimension"] = fixed_point_dimension(cmap)
        report["stationary_purity"] = float(np.trace(omega @ omega).real)
    write_json(out / "channel_report.json", report)
    return {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qperiodic", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "verify-symmetry", "channel-info"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--output-dir", type=Path, default=None, help="overrides output_dir in the config")
    p = sub.add_parser("spectrum")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--output-dir", type=Path, default=None, help="overrides output_dir in the config")
    return parser


def run(command: str, cfg: dict, output_dir=None, input_path=None) -> int:
    out = Path(output_dir) if output_dir is not None else Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    if command == "simulate":
        extra = cmd_simulate(cfg, out)
    elif command == "spectrum":
        extra = cmd_spectrum(cfg, out, Path(input_path))
    elif command == "verify-symmetry":
        extra = cmd_verify_symmetry(cfg, out)
    elif command == "channel-info":
        extra = cmd_channel_info(cfg, out)
    else:
        raise ConfigError(f"unknown command {command!r}")
    manifest = {
        "tool": "qperiodic",
        "version": __version__,
        "command": command,
        "config": cfg,
        "wall_time_s": time.perf_counter() - start,
        **extra,
    }
    write_json(out / "manifest.json", manifest)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        return run(args.command, cfg, args.output_dir, getattr(args, "input", None))
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (QPeriodicError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
