"""Command-line driver: identify, synthesize, evaluate, experiment, pipeline.

Exit codes: 0 success, 1 configuration error, 2 solver error, 3 a certified
bound was violated on realized data.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .analysis import certify_stabilization, closed_loop_cost, sherman_morrison_response
from .experiments import (
    BoundViolationError,
    ExperimentConfig,
    run_experiment,
    render_pipeline_json,
    gen_random_plant,
)
from .fir import FirMimo, FirSiso
from .plant import PlantKind, build_plant
from .rng import make_rng
from .sdp import SolverFailure
from .synthesis import BracketExhaustedError, SystemResponse, nominal_synthesis, robust_synthesis
from .sysid import IdentConfig, RadiusMethod, identify


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); config errors are 1
        raise ConfigError(message)


def _parse_taps(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",") if x.strip() != ""])
    except ValueError as exc:
        raise ConfigError(f"cannot parse taps {text!r}") from exc


def _read_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"bad config line: {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _config_from_args(args, experiment: str) -> ExperimentConfig:
    mapping: dict[str, str] = {}
    if args.config:
        mapping.update(_read_config_file(args.config))
    mapping["experiment"] = experiment
    overrides = {
        "r-list": args.r_list,
        "m-list": args.m_list,
        "sigma": args.sigma,
        "eta": args.eta,
        "rho": args.rho,
        "n-plants": args.n_plants,
        "n-noise-seeds": args.n_noise_seeds,
        "T": args.T,
        "grid-points": args.grid_points,
        "kind": args.kind,
        "seed": args.seed,
        "outdir": args.outdir,
        "jobs": args.jobs,
    }
    for key, value in overrides.items():
        if value is not None:
            mapping[key] = str(value)
    if args.full:
        mapping["full"] = "true"
    try:
        return ExperimentConfig.from_mapping(mapping)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _add_config_flags(sub):
    sub.add_argument("--r-list", help="comma-separated plant orders")
    sub.add_argument("--m-list", help="comma-separated experiment counts")
    sub.add_argument("--sigma", type=float)
    sub.add_argument("--eta", type=float)
    sub.add_argument("--rho", type=float)
    sub.add_argument("--n-plants", type=int)
    sub.add_argument("--n-noise-seeds", type=int)
    sub.add_argument("--T", type=int, help="synthesis horizon (0 = auto)")
    sub.add_argument("--grid-points", type=int)
    sub.add_argument("--kind", choices=[k.value for k in PlantKind])


def _response_to_json(theta: SystemResponse) -> dict:
    return {
        "R": theta.R.blocks.tolist(),
        "M": theta.M.blocks.tolist(),
        "N": theta.N.blocks.tolist(),
        "L": theta.L.blocks.tolist(),
    }


def _response_from_json(obj: dict) -> SystemResponse:
    return SystemResponse(
        R=FirMimo(np.array(obj["R"])),
        M=FirMimo(np.array(obj["M"])),
        N=FirMimo(np.array(obj["N"])),
        L=FirMimo(np.array(obj["L"])),
    )


def _emit(obj: dict, output: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_identify(args) -> int:
    if args.taps:
        taps = _parse_taps(args.taps)
        g = FirSiso(np.concatenate([[0.0], taps]))
    elif args.order:
        g = gen_random_plant(args.order, make_rng(args.seed or 0, 100, args.order, 0))
    else:
        raise ConfigError("identify needs --taps or --order")
    cfg = IdentConfig(
        m=args.m, T=g.horizon, p=args.p, sigma=args.sigma, seed=args.seed or 0
    )
    method = RadiusMethod.ANALYTIC if args.analytic else RadiusMethod.SIMULATED_TAIL
    result = identify(g, cfg, eta=args.eta, method=method)
    _emit(
        {
            "g": g.taps.tolist(),
            "g_hat": result.g_hat.tolist(),
            "eps": result.eps,
            "eta": result.eta,
            "method": result.method.value,
            "delta_norm": float(np.linalg.norm(g.taps - result.g_hat)),
        },
        args.output,
    )
    return 0


def _cmd_synthesize(args) -> int:
    g_hat = _parse_taps(args.taps)
    kind = PlantKind(args.kind)
    if args.eps > 0:
        res = robust_synthesis(g_hat, kind, args.rho, args.eps, args.T or None)
        payload = {
            "response": _response_to_json(res.theta),
            "alpha": res.alpha,
            "objective_Q": res.objective_Q,
            "J_design": res.nominal_J,
            "norms": {
                "norm_N": res.norm_N,
                "norm_stack": res.norm_stack,
                "norm_RB_ND": res.norm_RB_ND,
            },
            "eps": res.eps,
        }
    else:
        theta, J = nominal_synthesis(build_plant(g_hat, kind, args.rho), args.T or None)
        payload = {"response": _response_to_json(theta), "J_design": J, "eps": 0.0}
    _emit(payload, args.output)
    return 0


def _cmd_evaluate(args) -> int:
    g_true = _parse_taps(args.true_taps)
    with open(args.response, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    theta = _response_from_json(obj.get("response", obj))
    kind = PlantKind(args.kind)
    g_hat_design = _parse_taps(args.design_taps) if args.design_taps else None
    if g_hat_design is None or np.array_equal(g_hat_design, g_true):
        J = closed_loop_cost(g_true, theta, kind, args.rho)
        verdict = "certified-stable"
    else:
        delta = g_true - g_hat_design
        hat = sherman_morrison_response(
            theta, delta, _default_eval_grid(theta)
        )
        J = closed_loop_cost(g_true, hat, kind, args.rho)
        verdict = certify_stabilization(theta, delta).value
    _emit({"J_achieved": J, "stability": verdict}, args.output)
    return 0


def _default_eval_grid(theta: SystemResponse):
    from .fir import default_grid

    return default_grid(theta.horizon)


def main(argv=None) -> int:
    parser = _Parser(prog="slsid", description=__doc__)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=None)
    parser.add_argument("--outdir", default=None)
    parser.add_argument("--config", default=None, help="flat key = value file")
    parser.add_argument("--full", action="store_true", help="full-scale experiment settings")
    subs = parser.add_subparsers(dest="command", required=True)

    p_id = subs.add_parser("identify", help="estimate taps from noisy experiments")
    p_id.add_argument("--taps", help="true coefficients at lags 1.. (comma list)")
    p_id.add_argument("--order", type=int, help="draw a random plant of this order")
    p_id.add_argument("--m", type=int, default=25)
    p_id.add_argument("--sigma", type=float, default=0.1)
    p_id.add_argument("--eta", type=float, default=0.1)
    p_id.add_argument("--p", type=float, default=2)
    p_id.add_argument("--analytic", action="store_true")
    p_id.add_argument("--output", "-o")

    p_syn = subs.add_parser("synthesize", help="synthesize a controller for estimated taps")
    p_syn.add_argument("--taps", required=True, help="estimated coefficients at lags 1..")
    p_syn.add_argument("--eps", type=float, default=0.0)
    p_syn.add_argument("--rho", type=float, default=1.0)
    p_syn.add_argument("--kind", default=PlantKind.DISTURBANCE_REJECTION.value,
                       choices=[k.value for k in PlantKind])
    p_syn.add_argument("--T", type=int, default=0)
    p_syn.add_argument("--output", "-o")

    p_ev = subs.add_parser("evaluate", help="evaluate a stored response on the true plant")
    p_ev.add_argument("--true-taps", required=True)
    p_ev.add_argument("--design-taps", help="taps the response was designed for")
    p_ev.add_argument("--response", required=True, help="JSON file from synthesize")
    p_ev.add_argument("--rho", type=float, default=1.0)
    p_ev.add_argument("--kind", default=PlantKind.DISTURBANCE_REJECTION.value,
                      choices=[k.value for k in PlantKind])
    p_ev.add_argument("--output", "-o")

    p_exp = subs.add_parser("experiment", help="run a batch experiment")
    p_exp.add_argument("which", choices=["fig-approx", "fig-swarm", "fig-bound"])
    _add_config_flags(p_exp)

    p_pipe = subs.add_parser("pipeline", help="one end-to-end run")
    _add_config_flags(p_pipe)

    try:
        args = parser.parse_args(argv)
        if args.command == "identify":
            return _cmd_identify(args)
        if args.command == "synthesize":
            return _cmd_synthesize(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "experiment":
            cfg = _config_from_args(args, args.which)
            run_experiment(cfg)
            return 0
        cfg = _config_from_args(args, "pipeline")
        report = run_experiment(cfg)
        sys.stdout.write(render_pipeline_json(report))
        return 0
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except BoundViolationError as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        return 3
    except (SolverFailure, BracketExhaustedError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
