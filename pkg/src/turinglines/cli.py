"""Command-line surface.

Subcommands: stability, construct-params, pde, simulate, fluctuations,
critical, clt-check, compensator-check.  Every run validates its JSON config
against a strict schema (unknown keys rejected), writes its outputs into the
--out directory, and finishes with a manifest recording the resolved config,
its hash, the seed, wall time, and the library version.

Exit codes: 0 success, 1 a numerical check performed by the command failed,
2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .fluctuations import (
    clt_oracle,
    compensator_variance_check,
    pattern_test,
    run_escape_ensemble,
    run_fluctuation_ensemble,
    schedule,
)
from .io import ManifestTimer, write_csv, write_json
from .kernels import ParameterError
from .microsim import SimContext, advance, init_random, observe
from .params import LatticeSpec, ModelParams
from .pde import SpectralState, integrate
from .stability import (
    DomainError,
    classify_turing,
    construct_unimodular,
    mode_matrix,
    mode_spectrum,
    tail_bound,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3

THREADS_ENV = "TURINGLINES_THREADS"


class ConfigError(Exception):
    pass


_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_PARAMS = {
    "type": "object",
    "properties": {
        "beta1": _POSITIVE,
        "beta2": _POSITIVE,
        "tau1": _POSITIVE,
        "tau2": _POSITIVE,
        "lambda": _POSITIVE,
    },
    "required": ["beta1", "beta2", "tau1", "tau2", "lambda"],
    "additionalProperties": False,
}
_SEED = {"type": "integer", "minimum": 0}
_SITES = {"type": "integer", "minimum": 2}
_KLIST = {"type": "array", "items": {"type": "integer"}, "minItems": 1}

SCHEMAS = {
    "stability": {
        "type": "object",
        "properties": {"params": _PARAMS, "k_max": {"type": "integer", "minimum": 0}},
        "required": ["params"],
        "additionalProperties": False,
    },
    "construct-params": {
        "type": "object",
        "properties": {
            "beta1": _POSITIVE,
            "beta2": _POSITIVE,
            "lambda_margin": {"type": "number", "minimum": 0},
        },
        "required": ["beta1", "beta2"],
        "additionalProperties": False,
    },
    "pde": {
        "type": "object",
        "properties": {
            "params": _PARAMS,
            "n_modes": {"type": "integer", "minimum": 1},
            "dt": _POSITIVE,
            "t_end": {"type": "number", "minimum": 0},
            "which": {"enum": ["linear", "nonlinear"]},
            "sample_stride": {"type": "integer", "minimum": 1},
            "k_list": _KLIST,
            "initial_modes": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "line": {"enum": [1, 2]},
                        "k": {"type": "integer"},
                        "re": {"type": "number"},
                        "im": {"type": "number"},
                    },
                    "required": ["line", "k", "re"],
                    "additionalProperties": False,
                },
            },
        },
        "required": ["params", "t_end"],
        "additionalProperties": False,
    },
    "simulate": {
        "type": "object",
        "properties": {
            "params": _PARAMS,
            "n_sites": _SITES,
            "t_end": {"type": "number", "minimum": 0},
            "sample_stride": _POSITIVE,
            "k_list": _KLIST,
            "seed": _SEED,
        },
        "required": ["params", "n_sites", "t_end"],
        "additionalProperties": False,
    },
    "fluctuations": {
        "type": "object",
        "properties": {
            "params": _PARAMS,
            "n_sites": _SITES,
            "theta": {"type": "number", "minimum": 0, "maximum": 1},
            "n_replicas": {"type": "integer", "minimum": 2},
            "k_list": _KLIST,
            "seed": _SEED,
        },
        "required": ["params", "n_sites", "theta", "n_replicas"],
        "additionalProperties": False,
    },
    "critical": {
        "type": "object",
        "properties": {
            "params": _PARAMS,
            "n_sites": _SITES,
            "deltas": {
                "type": "array",
                "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "minItems": 1,
            },
            "n_replicas": {"type": "integer", "minimum": 1},
            "seed": _SEED,
        },
        "required": ["params", "n_sites", "deltas", "n_replicas"],
        "additionalProperties": False,
    },
    "clt-check": {
        "type": "object",
        "properties": {
            "f": {"enum": ["cos", "sin", "const"]},
            "n_sites": _SITES,
            "n_samples": {"type": "integer", "minimum": 2},
            "seed": _SEED,
        },
        "required": ["n_sites", "n_samples"],
        "additionalProperties": False,
    },
    "compensator-check": {
        "type": "object",
        "properties": {
            "params": _PARAMS,
            "n_sites": _SITES,
            "t": {"type": "number", "minimum": 0},
            "a1re": {"type": "number"},
            "a1im": {"type": "number"},
            "a2re": {"type": "number"},
            "a2im": {"type": "number"},
            "n_replicas": {"type": "integer", "minimum": 2},
            "seed": _SEED,
        },
        "required": ["params", "n_sites", "t", "n_replicas"],
        "additionalProperties": False,
    },
}

DEFAULTS = {
    "stability": {},
    "construct-params": {"lambda_margin": 0.02},
    "pde": {
        "n_modes": 32,
        "dt": 1e-3,
        "which": "nonlinear",
        "sample_stride": 100,
        "k_list": [0, 1, 2, 3],
        "initial_modes": [{"line": 1, "k": 1, "re": 1e-4, "im": 0.0}],
    },
    "simulate": {"sample_stride": 0.1, "k_list": [0, 1, 2, 3], "seed": 0},
    "fluctuations": {"k_list": [0, 1, -1, 2, -2, 3, -3], "seed": 0},
    "critical": {"seed": 0},
    "clt-check": {"f": "cos", "seed": 0},
    "compensator-check": {
        "a1re": 1.0,
        "a1im": 0.0,
        "a2re": 0.0,
        "a2im": 0.0,
        "seed": 0,
    },
}


def resolve_config(command: str, args) -> dict:
    config = {}
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            config = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if args.seed is not None and "seed" in SCHEMAS[command]["properties"]:
        config["seed"] = args.seed
    try:
        jsonschema.validate(config, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from exc
    resolved = dict(DEFAULTS[command])
    resolved.update(config)
    missing = [k for k in SCHEMAS[command].get("required", []) if k not in resolved]
    if missing:
        raise ConfigError(f"missing required config keys: {', '.join(missing)}")
    return resolved


def _params(config: dict) -> ModelParams:
    return ModelParams.from_dict(config["params"])


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    return int(env) if env else -1


def _report_dict(report) -> dict:
    return {
        "is_turing": report.is_turing,
        "is_unimodular": report.is_unimodular,
        "unstable_modes": list(report.unstable_modes),
        "k_checked": list(report.k_checked),
        "k_tail_bound": report.k_tail_bound,
        "inconclusive": report.inconclusive,
        "tail_verified": report.tail_verified,
        "witnesses": {str(k): w for k, w in report.witnesses.items()},
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_stability(config, out: Path, threads: int) -> int:
    params = _params(config)
    k_max = config.get("k_max", tail_bound(params))
    rows = []
    for k in range(k_max + 1):
        m = mode_matrix(params, k)
        s = mode_spectrum(m)
        rows.append(
            [
                k,
                m.trace,
                m.determinant,
                m.discriminant,
                s.mu1.real,
                s.mu1.imag,
                s.mu2.real,
                s.mu2.imag,
                s.stability_class,
            ]
        )
    write_csv(
        out / "stability.csv",
        ["k", "tr", "det", "dis", "re_mu1", "im_mu1", "re_mu2", "im_mu2", "class"],
        rows,
    )
    report = classify_turing(params, k_max=config.get("k_max"))
    write_json(out / "stability_report.json", _report_dict(report))
    return EXIT_OK


def cmd_construct_params(config, out: Path, threads: int) -> int:
    params, report = construct_unimodular(
        config["beta1"], config["beta2"], config["lambda_margin"]
    )
    write_json(out / "params.json", params.to_dict())
    write_json(out / "construct_report.json", _report_dict(report))
    return EXIT_OK if report.is_unimodular else EXIT_CHECK_FAILED


def cmd_pde(config, out: Path, threads: int) -> int:
    params = _params(config)
    state = SpectralState.zero(config["n_modes"])
    for item in config["initial_modes"]:
        value = complex(item["re"], item.get("im", 0.0))
        state = state.with_mode(item["line"], item["k"], value)
    trajectory = integrate(
        state,
        params,
        t_end=config["t_end"],
        dt=config["dt"],
        which=config["which"],
        sample_stride=config["sample_stride"],
    )
    rows = []
    for s in trajectory:
        for k in config["k_list"]:
            u1, u2 = s.mode(1, k), s.mode(2, k)
            rows.append([s.time, k, u1.real, u1.imag, u2.real, u2.imag])
    write_csv(
        out / "pde.csv", ["t", "k", "re_u1", "im_u1", "re_u2", "im_u2"], rows
    )
    return EXIT_OK


def cmd_simulate(config, out: Path, threads: int) -> int:
    params = _params(config)
    lattice = LatticeSpec(config["n_sites"])
    k_list = config["k_list"]
    ctx = SimContext.build(params, lattice, k_track=max(abs(k) for k in k_list))
    state = init_random(ctx, config["seed"])
    stride = config["sample_stride"]
    n_samples = int(math.floor(config["t_end"] / stride + 1e-9))
    rows = []

    def record():
        obs = observe(state, ctx, [abs(k) for k in k_list])
        for k in k_list:
            x1, x2 = obs.modes[abs(k)]
            if k < 0:
                x1, x2 = x1.conjugate(), x2.conjugate()
            rows.append([obs.time, k, x1.real, x1.imag, x2.real, x2.imag])

    record()
    for j in range(1, n_samples + 1):
        advance(state, ctx, j * stride)
        record()
    if state.time < config["t_end"]:
        advance(state, ctx, config["t_end"])
        record()
    write_csv(
        out / "simulate.csv", ["t", "k", "re_x1", "im_x1", "re_x2", "im_x2"], rows
    )
    write_json(
        out / "simulate_report.json",
        {
            "seed": config["seed"],
            "n_sites": config["n_sites"],
            "t_end": config["t_end"],
            "events": state.events,
            "accepted": state.accepted,
            "acceptance_ratio": state.acceptance_ratio,
            "k_track": ctx.k_track,
        },
    )
    return EXIT_OK


def cmd_fluctuations(config, out: Path, threads: int) -> int:
    params = _params(config)
    gamma = 1.0 / config["n_sites"]
    stats_ = run_fluctuation_ensemble(
        params,
        gamma,
        config["theta"],
        config["n_replicas"],
        config["seed"],
        k_set=tuple(config["k_list"]),
        n_jobs=threads,
    )
    z1 = stats_.projected[:, 0] + 1j * stats_.projected[:, 1]
    phase_p = amp_p = None
    if z1.size >= 100:
        pat = pattern_test(z1, float(stats_.prediction.component_variances()[0]))
        phase_p, amp_p = pat.phase_ks_pvalue, pat.amplitude_ks_pvalue
    write_json(
        out / "fluctuations_report.json",
        {
            "gamma": gamma,
            "theta": stats_.theta,
            "t_theta": stats_.t_theta,
            "rescale": stats_.rescale,
            "n_replicas": stats_.n_replicas,
            "seed": stats_.master_seed,
            "mu": stats_.prediction.mu,
            "predicted_variances": stats_.prediction.component_variances(),
            "predicted_covariance": stats_.prediction.predicted_covariance,
            "empirical_covariance": stats_.covariance,
            "variance_ratios": stats_.variance_ratios,
            "ks_pvalues": stats_.ks_pvalues,
            "offmode_median": {str(k): v for k, v in stats_.offmode_median.items()},
            "phase_ks_pvalue": phase_p,
            "amplitude_ks_pvalue": amp_p,
        },
    )
    rows = []
    for k in stats_.k_set:
        block = stats_.samples[k]
        for r in range(block.shape[0]):
            rows.append(
                [
                    r,
                    k,
                    block[r, 0].real,
                    block[r, 0].imag,
                    block[r, 1].real,
                    block[r, 1].imag,
                ]
            )
    write_csv(
        out / "fluctuations.csv",
        ["replica", "k", "re_x1", "im_x1", "re_x2", "im_x2"],
        rows,
    )
    return EXIT_OK


def cmd_critical(config, out: Path, threads: int) -> int:
    params = _params(config)
    gamma = 1.0 / config["n_sites"]
    estimates = []
    for delta in config["deltas"]:
        # one seed across deltas: common replicas couple the estimates, which
        # sharpens the monotonicity comparison
        estimates.append(
            run_escape_ensemble(
                params, gamma, delta, config["n_replicas"], config["seed"], n_jobs=threads
            )
        )
    write_json(
        out / "critical_report.json",
        {
            "gamma": gamma,
            "n_replicas": config["n_replicas"],
            "seed": config["seed"],
            "estimates": [
                {
                    "delta": e.delta,
                    "t_evaluated": e.t_evaluated,
                    "n_escaped": e.n_escaped,
                    "p_hat": e.p_hat,
                    "ci_low": e.ci_low,
                    "ci_high": e.ci_high,
                }
                for e in estimates
            ],
        },
    )
    write_csv(
        out / "critical.csv",
        ["delta", "t_evaluated", "n_escaped", "n_replicas", "p_hat", "ci_low", "ci_high"],
        [
            [e.delta, e.t_evaluated, e.n_escaped, e.n_replicas, e.p_hat, e.ci_low, e.ci_high]
            for e in estimates
        ],
    )
    return EXIT_OK


def cmd_clt_check(config, out: Path, threads: int) -> int:
    result = clt_oracle(
        config["f"], config["n_sites"], config["n_samples"], config["seed"]
    )
    write_json(
        out / "clt_report.json",
        {
            "f": config["f"],
            "n_sites": result.n_sites,
            "n_samples": result.n_samples,
            "seed": config["seed"],
            "empirical_variance": result.empirical_variance,
            "target_variance": result.target_variance,
            "ks_stat": result.ks_stat,
            "ks_pvalue": result.ks_pvalue,
        },
    )
    write_csv(out / "clt.csv", ["y"], [[float(y)] for y in result.samples])
    return EXIT_OK


def cmd_compensator_check(config, out: Path, threads: int) -> int:
    params = _params(config)
    gamma = 1.0 / config["n_sites"]
    result = compensator_variance_check(
        params,
        gamma,
        config["t"],
        a1re=config["a1re"],
        a1im=config["a1im"],
        a2re=config["a2re"],
        a2im=config["a2im"],
        n_replicas=config["n_replicas"],
        master_seed=config["seed"],
        n_jobs=threads,
    )
    write_json(
        out / "compensator_report.json",
        {
            "gamma": gamma,
            "t": result.t,
            "n_replicas": result.n_replicas,
            "seed": result.master_seed,
            "empirical_variance": result.empirical_variance,
            "empirical_mean": result.empirical_mean,
            "h_target": result.h_target,
            "ratio": result.ratio,
        },
    )
    write_csv(out / "compensator.csv", ["i_value"], [[float(v)] for v in result.values])
    return EXIT_OK


COMMANDS = {
    "stability": cmd_stability,
    "construct-params": cmd_construct_params,
    "pde": cmd_pde,
    "simulate": cmd_simulate,
    "fluctuations": cmd_fluctuations,
    "critical": cmd_critical,
    "clt-check": cmd_clt_check,
    "compensator-check": cmd_compensator_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a JSON config file")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument(
        "--threads",
        type=int,
        help=f"worker count for ensembles (default: ${THREADS_ENV} or all cores)",
    )
    parser = argparse.ArgumentParser(
        prog="turinglines",
        description="Two-line spin system: stability analysis, PDE, simulation, fluctuation tests",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args.command, args)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_IO
    timer = ManifestTimer(args.command, config, config.get("seed"))
    try:
        code = COMMANDS[args.command](config, out, _threads(args))
        timer.write(out)
    except (ParameterError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
