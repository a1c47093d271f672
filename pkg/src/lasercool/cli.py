"""Command-line front end.

Subcommands: ``simulate`` (trajectory export), ``certify`` (optimality
certification report), ``dp`` (backward-induction solve plus comparison
against the closed forms), ``equiv`` (reduced-vs-full-matrix sweeps).

Configuration comes from an optional JSON file plus flag overrides; flags
win.  Identical config and seed produce byte-identical CSV/JSON outputs, and
every output embeds the resolved-config hash and the tool version.  Exit
codes: 0 success, 1 usage or configuration error, 2 runtime invariant
violation, 3 certification or tolerance failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvariantViolation, LaserCoolError
from .hjb import ActionSetConfig, SamplerConfig, dp_solve
from .lambda_system import (
    LambdaSystem,
    equalization_time,
    greedy_policy,
    return_function,
    tau_star,
)
from .lindblad import RateMatrix
from .spectral import DoublyStochastic, build_generator, spectral_propagate
from .verify import (
    certify_lambda_system,
    dp_compare,
    equivalence_sweep,
    perturbation_sweep,
)


class ConfigError(LaserCoolError):
    pass


SIMULATE_DEFAULTS = {
    "gamma1": 2.0,
    "gamma2": 1.0,
    "rate_matrix": None,
    "lambda0": [0.5, 0.3, 0.2],
    "horizon": 3.0,
    "dt": None,
    "seed": 0,
    "policy": "greedy",
    "stride": 10,
    "out": "runs/simulate",
    "plot": False,
}

CERTIFY_DEFAULTS = {
    "gamma_pairs": [[2.0, 1.0], [1.5, 1.5]],
    "gamma1": None,
    "gamma2": None,
    "grid_m": 12,
    "taus": [0.02, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0],
    "n_haar": 64,
    "n_birkhoff": 64,
    "exchange_samples": 1000,
    "seed": 0,
    "swap_mu": False,
    "out": "runs/certify",
    "plot": False,
}

DP_DEFAULTS = {
    "gamma1": 2.0,
    "gamma2": 1.0,
    "horizon": 1.0,
    "grid_m": 60,
    "n_t": 2000,
    "n_haar": 64,
    "seed": 0,
    "max_deviation": 5e-3,
    "table_stride": 0,  # 0 means n_t // 20
    "out": "runs/dp",
    "plot": False,
}

EQUIV_DEFAULTS = {
    "samples": 500,
    "cases": 100,
    "dims": [3, 4],
    "dt": 1e-3,
    "seed": 0,
    "algebraic_threshold": 1e-9,
    "ratio_bounds": [3.5, 4.5],
    "out": "runs/equiv",
    "plot": False,
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err
    try:
        loaded = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(
            f"config file {path} is not valid JSON (line {err.lineno}, column {err.colno}: {err.msg})"
        ) from err
    if not isinstance(loaded, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return loaded


def _resolve(defaults: dict, file_config: dict, overrides: dict) -> dict:
    config = dict(defaults)
    for key, value in file_config.items():
        if key not in defaults:
            raise ConfigError(f"unknown config field '{key}'")
        config[key] = value
    for key, value in overrides.items():
        if value is not None:
            config[key] = value
    return config


def _config_hash(config: dict) -> str:
    hashed = {k: v for k, v in config.items() if k not in ("out", "plot")}
    canonical = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _csv_header(config_hash: str) -> str:
    return f"# lasercool {__version__} config={config_hash}\n"


def _parse_lambda0(value) -> np.ndarray:
    if isinstance(value, str):
        parts = [p for p in value.split(",") if p.strip()]
        try:
            value = [float(p) for p in parts]
        except ValueError as err:
            raise ConfigError(f"cannot parse lambda0 '{value}': {err}") from err
    lam = np.asarray(value, dtype=float)
    if lam.ndim != 1:
        raise ConfigError("lambda0 must be a flat list of probabilities")
    if lam.min() < 0.0 or abs(lam.sum() - 1.0) > 1e-9:
        raise ConfigError(f"lambda0 must lie on the simplex, got {lam.tolist()}")
    return np.sort(lam)[::-1]


def _schedule_policy(path: str):
    """Piecewise-constant control read from a JSON schedule file."""
    try:
        entries = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read control schedule {path}: {err}") from err
    if not isinstance(entries, list) or not entries:
        raise ConfigError("control schedule must be a non-empty JSON list")
    try:
        parsed = sorted(
            (float(e["time"]), DoublyStochastic(np.asarray(e["theta"], dtype=float)))
            for e in entries
        )
    except (KeyError, TypeError, LaserCoolError) as err:
        raise ConfigError(f"bad control schedule entry: {err}") from err

    def policy(lam, t):
        active = parsed[0][1]
        for time, theta in parsed:
            if time <= t + 1e-12:
                active = theta
            else:
                break
        return active

    return policy


def _resolve_policy(config: dict, dim: int):
    name = config["policy"]
    if name == "greedy":
        if dim != 3:
            raise ConfigError("the greedy policy is defined for 3-level systems")
        return greedy_policy
    if name == "identity":
        return lambda lam, t: DoublyStochastic.identity(dim)
    return _schedule_policy(name)


def _system_from_config(config: dict):
    """Returns (RateMatrix, LambdaSystem or None)."""
    if config.get("rate_matrix") is not None:
        rates = RateMatrix(np.asarray(config["rate_matrix"], dtype=float))
        return rates, None
    sys_ = LambdaSystem(float(config["gamma1"]), float(config["gamma2"]))
    return sys_.rate_matrix(), sys_


def cmd_simulate(config: dict) -> int:
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    config_hash = _config_hash(config)

    lam0 = _parse_lambda0(config["lambda0"])
    rates, lam_sys = _system_from_config(config)
    if lam0.shape[0] != rates.dim:
        raise ConfigError(
            f"lambda0 has {lam0.shape[0]} entries but the system has {rates.dim} levels"
        )
    gen = build_generator(rates)
    policy = _resolve_policy(config, rates.dim)

    dt = config["dt"]
    trajectory = spectral_propagate(lam0, policy, gen, float(config["horizon"]), dt)

    cross = equalization_time(trajectory, lam_sys) if lam_sys is not None else None
    stride = max(1, int(config["stride"]))
    times = [t for t, _ in trajectory]
    spectra = [lam for _, lam in trajectory]

    rows = []
    for k in range(0, len(trajectory), stride):
        t, lam = trajectory[k]
        regime = "equalized" if (cross is not None and t >= cross) else "pre_equalization"
        rows.append((t, lam, regime))
    if (len(trajectory) - 1) % stride != 0:
        t, lam = trajectory[-1]
        regime = "equalized" if (cross is not None and t >= cross) else "pre_equalization"
        rows.append((t, lam, regime))

    csv_path = out / "trajectory.csv"
    with csv_path.open("w") as fh:
        fh.write(_csv_header(config_hash))
        labels = ",".join(f"lambda{i + 1}" for i in range(rates.dim))
        fh.write(f"t,{labels},purity,regime\n")
        for t, lam, regime in rows:
            body = ",".join(repr(float(x)) for x in lam)
            fh.write(f"{t!r},{body},{float(lam[0])!r},{regime}\n")

    sums = np.array([lam.sum() for lam in spectra])
    mins = np.array([lam.min() for lam in spectra])
    final = spectra[-1]
    results = {
        "final_purity": float(final[0]),
        "final_spectrum": [float(x) for x in final],
        "equalization_time": cross,
        "invariant_maxima": {
            "max_sum_deviation": float(np.max(np.abs(sums - 1.0))),
            "min_component": float(mins.min()),
        },
        "rows_written": len(rows),
    }
    if lam_sys is not None and config["policy"] == "greedy":
        results["return_function_reference"] = return_function(
            lam0, float(config["horizon"]), lam_sys
        )
        results["tau_star_reference"] = tau_star(lam0, lam_sys) if lam0[1] > 0 else None

    _write_json(
        out / "manifest.json",
        {
            "tool": "lasercool",
            "version": __version__,
            "command": "simulate",
            "config_hash": config_hash,
            "config": config,
            "results": results,
        },
    )

    if config["plot"]:
        from .report import plot_trajectory

        plot_trajectory(
            times,
            np.array(spectra),
            out / "trajectory.png",
            tau_cross=cross,
            stamp=f"lasercool {__version__} config={config_hash}",
        )
    return 0


def cmd_certify(config: dict) -> int:
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    config_hash = _config_hash(config)

    pairs = config["gamma_pairs"]
    if config["gamma1"] is not None or config["gamma2"] is not None:
        if config["gamma1"] is None or config["gamma2"] is None:
            raise ConfigError("gamma1 and gamma2 must be given together")
        pairs = [[config["gamma1"], config["gamma2"]]]
    systems = [LambdaSystem(float(g1), float(g2)) for g1, g2 in pairs]
    sampler = SamplerConfig(
        n_haar=int(config["n_haar"]),
        n_birkhoff=int(config["n_birkhoff"]),
        seed=int(config["seed"]),
    )
    report = certify_lambda_system(
        systems,
        grid_m=int(config["grid_m"]),
        taus=tuple(float(t) for t in config["taus"]),
        sampler=sampler,
        exchange_samples=int(config["exchange_samples"]),
        swap_mu=bool(config["swap_mu"]),
    )
    payload = {
        "tool": "lasercool",
        "version": __version__,
        "command": "certify",
        "config_hash": config_hash,
        "config": config,
        "report": report.to_dict(),
    }
    _write_json(out / "certification.json", payload)
    if config["plot"]:
        from .report import plot_certification

        plot_certification(
            report.to_dict(),
            out / "certification.png",
            stamp=f"lasercool {__version__} config={config_hash}",
        )
    return 0 if report.all_pass else 3


def cmd_dp(config: dict) -> int:
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    config_hash = _config_hash(config)

    sys_ = LambdaSystem(float(config["gamma1"]), float(config["gamma2"]))
    table = dp_solve(
        sys_,
        T=float(config["horizon"]),
        n_t=int(config["n_t"]),
        m=int(config["grid_m"]),
        actions=ActionSetConfig(n_haar=int(config["n_haar"]), haar_seed=int(config["seed"])),
    )
    comparison = dp_compare(table, sys_)

    stride = int(config["table_stride"]) or max(1, table.n_times // 20)
    csv_path = out / "value_table.csv"
    with csv_path.open("w") as fh:
        fh.write(_csv_header(config_hash))
        fh.write("lambda1,lambda2,lambda3,tau,value,policy\n")
        slices = list(range(0, table.n_times, stride))
        if slices[-1] != table.n_times - 1:
            slices.append(table.n_times - 1)
        for k in slices:
            tau = float(table.horizon - table.times[k])
            pol = table.policy[k] if k < table.n_times - 1 else None
            for p in range(table.n_points):
                g = table.grid[p]
                action = int(pol[p]) if pol is not None else -1
                coords = ",".join(repr(float(x)) for x in g)
                fh.write(f"{coords},{tau!r},{float(table.values[k, p])!r},{action}\n")

    bound = float(config["max_deviation"])
    payload = {
        "tool": "lasercool",
        "version": __version__,
        "command": "dp",
        "config_hash": config_hash,
        "config": config,
        "comparison": comparison,
        "bound": bound,
        "pass": comparison["max_deviation"] <= bound,
        "action_labels": list(table.action_labels),
    }
    _write_json(out / "dp_report.json", payload)
    if config["plot"]:
        from .lambda_system import return_function as rf
        from .report import plot_dp_comparison

        analytic = np.array([rf(lam, table.horizon, sys_) for lam in table.grid])
        plot_dp_comparison(
            table,
            analytic,
            out / "dp_comparison.png",
            stamp=f"lasercool {__version__} config={config_hash}",
        )
    return 0 if payload["pass"] else 3


def cmd_equiv(config: dict) -> int:
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    config_hash = _config_hash(config)

    algebraic = equivalence_sweep(
        n_samples=int(config["samples"]),
        dims=tuple(int(d) for d in config["dims"]),
        seed=int(config["seed"]),
    )
    algebraic["threshold"] = float(config["algebraic_threshold"])
    perturbation = perturbation_sweep(
        n_cases=int(config["cases"]), seed=int(config["seed"]), dt=float(config["dt"])
    )
    lo, hi = (float(b) for b in config["ratio_bounds"])
    ok = (
        algebraic["worst_deviation"] <= algebraic["threshold"]
        and lo <= perturbation["ratio_min"]
        and perturbation["ratio_max"] <= hi
    )
    payload = {
        "tool": "lasercool",
        "version": __version__,
        "command": "equiv",
        "config_hash": config_hash,
        "config": config,
        "algebraic": algebraic,
        "perturbation": perturbation,
        "perturbation_bounds": [lo, hi],
        "pass": ok,
    }
    _write_json(out / "equiv_report.json", payload)
    if config["plot"]:
        from .report import plot_equivalence

        plot_equivalence(
            payload, out / "equiv_report.png", stamp=f"lasercool {__version__} config={config_hash}"
        )
    return 0 if ok else 3


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON config file; flags override its fields")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default=None, help="output directory")
    sp.add_argument("--plot", action="store_true", default=None, help="render figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lasercool",
        description="Optimal purity-increasing control of dissipative quantum systems",
    )
    parser.add_argument("--version", action="version", version=f"lasercool {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="integrate a controlled spectral trajectory")
    _add_common(sp)
    sp.add_argument("--gamma1", type=float, default=None)
    sp.add_argument("--gamma2", type=float, default=None)
    sp.add_argument("--lambda0", default=None, help="comma-separated initial spectrum")
    sp.add_argument("--horizon", type=float, default=None)
    sp.add_argument("--dt", type=float, default=None)
    sp.add_argument("--policy", default=None, help="greedy | identity | <schedule.json>")
    sp.add_argument("--stride", type=int, default=None, help="output row stride")

    sp = sub.add_parser("certify", help="run the optimality certification suite")
    _add_common(sp)
    sp.add_argument("--gamma1", type=float, default=None, help="override the rate-pair list")
    sp.add_argument("--gamma2", type=float, default=None)
    sp.add_argument("--grid-m", dest="grid_m", type=int, default=None)
    sp.add_argument("--n-haar", dest="n_haar", type=int, default=None)
    sp.add_argument("--n-birkhoff", dest="n_birkhoff", type=int, default=None)
    sp.add_argument("--exchange-samples", dest="exchange_samples", type=int, default=None)
    sp.add_argument(
        "--swap-mu",
        dest="swap_mu",
        action="store_true",
        default=None,
        help="negative control: reverse the co-state ordering",
    )

    sp = sub.add_parser("dp", help="backward-induction solve and comparison")
    _add_common(sp)
    sp.add_argument("--gamma1", type=float, default=None)
    sp.add_argument("--gamma2", type=float, default=None)
    sp.add_argument("--horizon", type=float, default=None)
    sp.add_argument("--grid-m", dest="grid_m", type=int, default=None)
    sp.add_argument("--n-t", dest="n_t", type=int, default=None)
    sp.add_argument("--max-deviation", dest="max_deviation", type=float, default=None)

    sp = sub.add_parser("equiv", help="reduced-vs-full-matrix equivalence sweeps")
    _add_common(sp)
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--cases", type=int, default=None)
    sp.add_argument("--dt", type=float, default=None)

    return parser


_COMMANDS = {
    "simulate": (SIMULATE_DEFAULTS, cmd_simulate),
    "certify": (CERTIFY_DEFAULTS, cmd_certify),
    "dp": (DP_DEFAULTS, cmd_dp),
    "equiv": (EQUIV_DEFAULTS, cmd_equiv),
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    defaults, runner = _COMMANDS[args.command]

    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config") and key in defaults
    }
    try:
        config = _resolve(defaults, _load_config(args.config), overrides)
        return runner(config)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except InvariantViolation as err:
        print(f"invariant violation: {err}", file=sys.stderr)
        return 2
    except LaserCoolError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
