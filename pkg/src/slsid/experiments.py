"""Batch experiments: truncation sweep, Monte Carlo swarm, bound verification.

One shared trial engine drives both the improvement swarm and the bound
scatter (they consume the same records): identify the plant from noisy
experiments, synthesize the radius-robust controller and the estimate-based
nominal baseline, evaluate both on the true plant, and attach the certified
suboptimality bounds. Records are deterministic given (config, seed): every
trial owns a counter-based substream and rows are sorted by trial id before
writing, so worker-pool scheduling cannot perturb the output.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import datetime
import json
import math
import multiprocessing
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import svgplot
from .analysis import (
    SmallGainViolation,
    StabilityVerdict,
    certify_stabilization,
    closed_loop_cost,
    proposition_bound,
    sherman_morrison_response,
    simulate_closed_loop,
    theorem_bound,
)
from .analysis import OutOfRegimeError
from .fir import FirSiso, FrequencyGrid, hinf_norm_grid
from .plant import PlantKind, build_plant
from .rng import make_rng
from .sysid import IdentConfig, RadiusMethod, error_bound_analytic, identify
from .synthesis import (
    SearchParams,
    nominal_synthesis,
    robust_synthesis,
)

EXPERIMENTS = ("fig-approx", "fig-swarm", "fig-bound", "pipeline")

# desk-scale cap on the synthesis horizon; --full lifts it (see README)
DESK_T_CAP = 16

_KINDS = {k.value: k for k in PlantKind}


@dataclass
class ExperimentConfig:
    """Batch run description; mirrors the flat config-file keys."""

    experiment: str = "pipeline"
    r_list: tuple[int, ...] = (4, 8)
    m_list: tuple[int, ...] = (15, 25)
    sigma: float = 0.1
    eta: float = 0.1
    rho: float = 1.0
    n_plants: int = 4
    n_noise_seeds: int = 5
    T: int = 0  # 0 = auto: 4r, capped at DESK_T_CAP unless full
    grid_points: int = 1024
    seed: int = 0
    outdir: str = "results"
    full: bool = False
    jobs: int = 0  # 0 = logical cores
    kind: str = "disturbance-rejection"
    reject_delta: bool = False  # redraw noise until ||delta|| <= eps

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.kind not in _KINDS:
            raise ValueError(f"unknown plant kind {self.kind!r}")
        self.r_list = tuple(int(r) for r in self.r_list)
        self.m_list = tuple(int(m) for m in self.m_list)
        if min(self.r_list, default=1) < 2:
            raise ValueError("plant order r must be at least 2")
        if any(
            v < 1 for v in (self.n_plants, self.n_noise_seeds, self.grid_points, *self.m_list)
        ):
            raise ValueError("counts must be at least 1")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not (0.0 < self.eta < 1.0):
            raise ValueError("eta must lie in (0, 1)")

    def horizon_for(self, r: int) -> int:
        if self.T > 0:
            return self.T
        T = 4 * r
        return T if self.full else min(T, max(DESK_T_CAP, r + 1))

    def plant_kind(self) -> PlantKind:
        return _KINDS[self.kind]

    def effective_jobs(self) -> int:
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)

    def to_flat(self) -> dict[str, str]:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            out[f.name.replace("_", "-")] = str(v)
        return out

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "ExperimentConfig":
        kwargs = {}
        fields = {f.name: f for f in dataclasses.fields(cls)}
        for key, raw in mapping.items():
            name = key.replace("-", "_")
            if name not in fields:
                raise ValueError(f"unknown config key {key!r}")
            ftype = fields[name].type
            if name in ("r_list", "m_list"):
                kwargs[name] = tuple(int(x) for x in str(raw).split(",") if x != "")
            elif ftype == "bool" or isinstance(getattr(cls, name, None), bool):
                kwargs[name] = str(raw).lower() in ("1", "true", "yes", "on")
            elif ftype == "int":
                kwargs[name] = int(raw)
            elif ftype == "float":
                kwargs[name] = float(raw)
            else:
                kwargs[name] = str(raw)
        return cls(**kwargs)


TRIAL_CSV_HEADER = [
    "trial_id", "plant_id", "seed", "r", "m",
    "J_nominal", "J_hat", "J_opt", "delta_J",
    "prop_bound", "thm_bound", "actual_gap", "eps",
    "objective_Q", "prop_bound_analytic",
    "stability", "status", "solve_time",
]


@dataclass
class TrialRecord:
    """One Monte Carlo trial of the identify-synthesize-evaluate loop."""

    trial_id: int
    plant_id: int
    seed: int
    r: int
    m: int
    J_nominal: float
    J_hat: float
    J_opt: float
    delta_J: float
    prop_bound: float
    thm_bound: float
    actual_gap: float
    eps: float
    objective_Q: float
    prop_bound_analytic: float
    stability: str
    status: str
    solve_time: float

    def to_row(self) -> list[str]:
        out = []
        for name in TRIAL_CSV_HEADER:
            v = getattr(self, name)
            out.append(f"{v:.12g}" if isinstance(v, float) else str(v))
        return out


def format_csv(header: list[str], rows: list[list[str]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def gen_random_plant(r: int, rng: np.random.Generator, normalize: bool = True) -> FirSiso:
    """Random strictly proper FIR plant of order r.

    Tap 0 is the structural zero; taps 1..r-1 are i.i.d. uniform on [-1, 1].
    With ``normalize`` the taps are scaled to unit peak gain (the norm is
    peak-refined, so the result is exact to float precision).
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    taps = np.zeros(r)
    for _ in range(100):
        taps[1:] = rng.uniform(-1.0, 1.0, r - 1)
        if r == 1 or np.any(taps != 0.0):
            break
    fir = FirSiso(taps)
    if normalize and r > 1:
        norm = hinf_norm_grid(fir.to_mimo())
        fir = FirSiso(taps / norm)
    return fir


def _child_seed(master: int, *path: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(path))
    return int(ss.generate_state(1, np.uint64)[0])


def _eval_grid(cfg: ExperimentConfig, horizon: int) -> FrequencyGrid:
    return FrequencyGrid(max(cfg.grid_points, 8 * horizon))


# ----------------------------------------------------------------------
# shared Monte Carlo trial engine (fig-swarm and fig-bound consume these)

def _reference_optimum(args) -> tuple[tuple[int, int], dict]:
    """Nominal synthesis on the true plant at the reference horizon 8r."""
    cfg_d, r, plant_id = args
    cfg = ExperimentConfig(**cfg_d)
    g_fir = gen_random_plant(r, make_rng(cfg.seed, 100, r, plant_id))
    plant = build_plant(g_fir.taps[1:], cfg.plant_kind(), cfg.rho)
    t0 = time.time()
    theta0, J_opt = nominal_synthesis(plant, T=8 * r)
    from .synthesis import response_norms

    return (r, plant_id), {
        "g": g_fir.taps,
        "theta0": theta0,
        "J_opt": J_opt,
        "norms": response_norms(theta0, plant.control_rescaled()),
        "solve_time": time.time() - t0,
    }


def _bound_trial(args) -> TrialRecord:
    cfg_d, trial_id, r, plant_id, noise_seed, m, ref = args
    cfg = ExperimentConfig(**cfg_d)
    kind, rho = cfg.plant_kind(), cfg.rho
    g_full = ref["g"]
    g_ctrl = g_full[1:]
    plant_true = build_plant(g_ctrl, kind, rho)
    T = cfg.horizon_for(r)
    grid = _eval_grid(cfg, T)
    t0 = time.time()
    status = "ok"
    stability = "not-run"

    ident = None
    for attempt in range(64):
        ident_seed = _child_seed(cfg.seed, 200, r, plant_id, noise_seed, m, attempt)
        candidate = identify(
            FirSiso(g_full),
            IdentConfig(m=m, T=r, p=2, sigma=cfg.sigma, seed=ident_seed),
            eta=cfg.eta,
            method=RadiusMethod.SIMULATED_TAIL,
        )
        ident = candidate
        if not cfg.reject_delta:
            break
        if np.linalg.norm(g_full - candidate.g_hat) <= candidate.eps:
            break
    else:
        status = "rejection-exhausted"

    delta_ctrl = g_ctrl - ident.g_hat[1:]
    J_hat = math.nan
    J_nominal = math.nan
    objective_Q = math.nan

    # desk-scale search tolerance: every asserted inequality holds at any
    # feasible (theta, alpha), so a coarser weight search only trades a
    # negligible amount of objective, not validity
    search = SearchParams(tol=1e-3 if cfg.full else 1e-2)
    try:
        res = robust_synthesis(ident.g_hat[1:], kind, rho, ident.eps, T, search)
        objective_Q = res.objective_Q
        theta_hat = sherman_morrison_response(res.theta, delta_ctrl, grid)
        J_hat = closed_loop_cost(g_ctrl, theta_hat, kind, rho)
        if J_hat > res.objective_Q + 1e-5 and np.linalg.norm(
            g_full - ident.g_hat
        ) <= ident.eps:
            status = "bound-violation"
        stability = certify_stabilization(res.theta, delta_ctrl).value
    except SmallGainViolation:
        status = "robust-small-gain"
    except Exception as exc:  # infeasible/solver breakdown recorded, not raised
        status = f"robust-failed:{type(exc).__name__}"

    try:
        theta_nom, _ = nominal_synthesis(build_plant(ident.g_hat[1:], kind, rho), T)
        nominal_hat = sherman_morrison_response(theta_nom, delta_ctrl, grid)
        J_nominal = closed_loop_cost(g_ctrl, nominal_hat, kind, rho)
    except SmallGainViolation:
        status = status if status != "ok" else "nominal-small-gain"
    except Exception as exc:
        status = status if status != "ok" else f"nominal-failed:{type(exc).__name__}"

    try:
        prop = proposition_bound(ident.eps, ref["theta0"], plant_true)
    except OutOfRegimeError:
        prop = math.nan
    try:
        thm = theorem_bound(cfg.sigma, r, m, 2, cfg.eta, ref["theta0"], plant_true)
    except OutOfRegimeError:
        thm = math.nan
    # the a-priori bound evaluated at the analytic radius; only meaningful in
    # the quarter-margin regime where the sample-complexity chain applies
    eps_analytic = error_bound_analytic(cfg.sigma, r, m, 2, cfg.eta)
    if eps_analytic < 0.25 / ref["norms"]["norm_N"]:
        prop_analytic = proposition_bound(eps_analytic, ref["theta0"], plant_true)
    else:
        prop_analytic = math.nan

    delta_J = (
        (J_nominal - J_hat) / J_nominal
        if math.isfinite(J_nominal) and math.isfinite(J_hat) and J_nominal > 0
        else math.nan
    )
    return TrialRecord(
        trial_id=trial_id,
        plant_id=plant_id,
        seed=noise_seed,
        r=r,
        m=m,
        J_nominal=J_nominal,
        J_hat=J_hat,
        J_opt=ref["J_opt"],
        delta_J=delta_J,
        prop_bound=prop,
        thm_bound=thm,
        actual_gap=J_hat - ref["J_opt"],
        eps=ident.eps,
        objective_Q=objective_Q,
        prop_bound_analytic=prop_analytic,
        stability=stability,
        status=status,
        solve_time=time.time() - t0,
    )


def _pool_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    # spawn, not fork: the parent has run threaded solver code by the time a
    # pool is needed, and forking live rayon/BLAS thread pools deadlocks
    ctx = multiprocessing.get_context("spawn")
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
        return list(pool.map(fn, items, chunksize=1))


def run_trials(cfg: ExperimentConfig) -> list[TrialRecord]:
    """The full (r, plant, noise seed, m) trial grid, sorted by trial id."""
    cfg_d = dataclasses.asdict(cfg)
    jobs = cfg.effective_jobs()
    ref_args = [(cfg_d, r, pid) for r in cfg.r_list for pid in range(cfg.n_plants)]
    refs = dict(_pool_map(_reference_optimum, ref_args, jobs))
    trial_args = []
    trial_id = 0
    for r in cfg.r_list:
        for pid in range(cfg.n_plants):
            for ns in range(cfg.n_noise_seeds):
                for m in cfg.m_list:
                    trial_args.append(
                        (cfg_d, trial_id, r, pid, ns, m, refs[(r, pid)])
                    )
                    trial_id += 1
    records = _pool_map(_bound_trial, trial_args, jobs)
    return sorted(records, key=lambda rec: rec.trial_id)


# ----------------------------------------------------------------------
# truncation-length experiment

APPROX_CSV_HEADER = [
    "trial_id", "plant_id", "r", "T_min", "J_ref", "J_at_T_min",
    "rel_err", "n_solves", "censored", "status", "solve_time",
]


def _approx_case(args) -> dict:
    cfg_d, trial_id, r, plant_id = args
    cfg = ExperimentConfig(**cfg_d)
    g_fir = gen_random_plant(r, make_rng(cfg.seed, 100, r, plant_id))
    plant = build_plant(g_fir.taps[1:], cfg.plant_kind(), cfg.rho)
    t0 = time.time()
    cache: dict[int, float] = {}

    def J(T: int) -> float:
        if T not in cache:
            cache[T] = nominal_synthesis(plant, T=T)[1]
        return cache[T]

    T_ref = 8 * r
    J_ref = J(T_ref)
    ok = lambda T: abs(J(T) - J_ref) <= 0.02 * J_ref
    schedule = []
    T = max(r, 2)
    while T < T_ref:
        schedule.append(T)
        T *= 2
    schedule.append(T_ref)
    lo, hi = None, None
    for T in schedule:
        if ok(T):
            hi = T
            break
        lo = T
    censored = hi is None
    if not censored and lo is not None:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid
    T_min = hi if hi is not None else T_ref
    path = sorted(cache.items())
    return {
        "trial_id": trial_id,
        "plant_id": plant_id,
        "r": r,
        "T_min": T_min,
        "J_ref": J_ref,
        "J_at_T_min": cache[T_min],
        "rel_err": abs(cache[T_min] - J_ref) / J_ref if J_ref > 0 else 0.0,
        "n_solves": len(cache),
        "censored": censored,
        "status": "censored" if censored else "ok",
        "solve_time": time.time() - t0,
        "J_path": [(int(t), float(v)) for t, v in path],
    }


def run_fig_approx(cfg: ExperimentConfig, write: bool = True):
    """Smallest horizon reaching 2% of the high-truncation reference solve.

    The reference value is the nominal program at 8r (the stand-in for an
    exact synthesis baseline); the search doubles the horizon and then
    bisects, exploiting that the optimal value is non-increasing in T.
    """
    cfg_d = dataclasses.asdict(cfg)
    args = [
        (cfg_d, i, r, pid)
        for i, (r, pid) in enumerate(
            (r, pid) for r in cfg.r_list for pid in range(cfg.n_plants)
        )
    ]
    cases = _pool_map(_approx_case, args, cfg.effective_jobs())
    cases.sort(key=lambda c: c["trial_id"])
    rows = [
        [
            f"{c[k]:.12g}" if isinstance(c[k], float) else str(c[k])
            for k in APPROX_CSV_HEADER
        ]
        for c in cases
    ]
    csv_text = format_csv(APPROX_CSV_HEADER, rows)
    groups = [
        (f"r={r}", [c["T_min"] for c in cases if c["r"] == r and not c["censored"]])
        for r in cfg.r_list
    ]
    svg = svgplot.box_svg(
        groups,
        title="horizon required for 2% relative accuracy",
        xlabel="plant order",
        ylabel="minimal horizon T",
    )
    summary = {
        "config": cfg.to_flat(),
        "aggregate": {
            f"r={r}": {
                "T_min_quartiles": _quartiles(
                    [c["T_min"] for c in cases if c["r"] == r]
                ),
                "censored_fraction": float(
                    np.mean([c["censored"] for c in cases if c["r"] == r])
                ),
            }
            for r in cfg.r_list
        },
        "status_counts": _status_counts(c["status"] for c in cases),
        "trials": [
            {k: c[k] for k in ("trial_id", "r", "plant_id", "T_min", "censored", "J_path")}
            for c in cases
        ],
    }
    if write:
        _write_outputs(cfg, "fig-approx", csv_text, summary, svg)
    return cases, summary


# ----------------------------------------------------------------------
# swarm and bound experiments share run_trials

def _records_csv(records: list[TrialRecord]) -> str:
    return format_csv(TRIAL_CSV_HEADER, [rec.to_row() for rec in records])


def _quartiles(values) -> list[float]:
    vals = [v for v in values if isinstance(v, (int, float)) and math.isfinite(v)]
    if not vals:
        return []
    return [float(q) for q in np.percentile(vals, [0, 25, 50, 75, 100])]


def _status_counts(statuses) -> dict[str, int]:
    out: dict[str, int] = {}
    for s in statuses:
        out[s] = out.get(s, 0) + 1
    return dict(sorted(out.items()))


def run_fig_swarm(cfg: ExperimentConfig, write: bool = True):
    """Relative improvement of the robust procedure over the nominal baseline."""
    records = run_trials(cfg)
    series = []
    for r in cfg.r_list:
        for m in cfg.m_list:
            pts = [
                rec.delta_J
                for rec in records
                if rec.r == r and rec.m == m and math.isfinite(rec.delta_J)
            ]
            series.append((f"r={r}, m={m}", list(range(len(pts))), pts))
    svg = svgplot.scatter_svg(
        series,
        title="relative improvement of robust synthesis",
        xlabel="trial (within group)",
        ylabel="delta J",
    )
    summary = {
        "config": cfg.to_flat(),
        "aggregate": {
            f"r={r}, m={m}": {
                "delta_J_quartiles": _quartiles(
                    rec.delta_J for rec in records if rec.r == r and rec.m == m
                ),
                "n": sum(1 for rec in records if rec.r == r and rec.m == m),
            }
            for r in cfg.r_list
            for m in cfg.m_list
        },
        "status_counts": _status_counts(rec.status for rec in records),
    }
    if write:
        _write_outputs(cfg, "fig-swarm", _records_csv(records), summary, svg)
    return records, summary


def run_fig_bound(cfg: ExperimentConfig, write: bool = True):
    """A-priori bound versus realized suboptimality gap, trial by trial."""
    records = run_trials(cfg)
    in_regime = [
        rec
        for rec in records
        if math.isfinite(rec.prop_bound) and math.isfinite(rec.actual_gap)
    ]
    out_regime = [rec for rec in records if not math.isfinite(rec.prop_bound)]
    svg = svgplot.scatter_svg(
        [
            (
                "in-regime",
                [rec.prop_bound for rec in in_regime],
                [rec.actual_gap for rec in in_regime],
            ),
            (
                "out-of-regime",
                [rec.thm_bound for rec in out_regime],
                [rec.actual_gap for rec in out_regime],
            ),
        ],
        title="suboptimality: a-priori bound vs realized gap",
        xlabel="bound",
        ylabel="realized gap",
        diagonal=True,
    )
    looseness = [
        rec.prop_bound / rec.actual_gap
        for rec in in_regime
        if rec.actual_gap > 1e-12
    ]
    summary = {
        "config": cfg.to_flat(),
        "aggregate": {
            "n_in_regime": len(in_regime),
            "n_out_of_regime": len(out_regime),
            "dominated_fraction": float(
                np.mean([rec.actual_gap <= rec.prop_bound + 1e-6 for rec in in_regime])
            )
            if in_regime
            else math.nan,
            "looseness_quartiles": _quartiles(looseness),
        },
        "status_counts": _status_counts(rec.status for rec in records),
    }
    if write:
        _write_outputs(cfg, "fig-bound", _records_csv(records), summary, svg)
    return records, summary


# ----------------------------------------------------------------------
# single end-to-end pipeline run

class BoundViolationError(RuntimeError):
    """A certified inequality failed on realized data."""


def run_pipeline(cfg: ExperimentConfig, write: bool = True):
    """One identify -> synthesize -> evaluate -> certify run, as JSON.

    The report is fully deterministic for a fixed (config, seed): it carries
    no timing and all floats come from seeded computations.
    """
    r = cfg.r_list[0]
    m = cfg.m_list[0]
    kind, rho = cfg.plant_kind(), cfg.rho
    g_fir = gen_random_plant(r, make_rng(cfg.seed, 100, r, 0))
    g_full = g_fir.taps
    g_ctrl = g_full[1:]
    plant_true = build_plant(g_ctrl, kind, rho)
    T = cfg.horizon_for(r)
    grid = _eval_grid(cfg, T)

    ident = identify(
        g_fir,
        IdentConfig(m=m, T=r, p=2, sigma=cfg.sigma, seed=_child_seed(cfg.seed, 200, r, 0, 0, m, 0)),
        eta=cfg.eta,
        method=RadiusMethod.SIMULATED_TAIL,
    )
    res = robust_synthesis(ident.g_hat[1:], kind, rho, ident.eps, T)
    delta_ctrl = g_ctrl - ident.g_hat[1:]
    if np.linalg.norm(delta_ctrl) == 0.0:
        J_achieved = closed_loop_cost(g_ctrl, res.theta, kind, rho, grid)
    else:
        theta_hat = sherman_morrison_response(res.theta, delta_ctrl, grid)
        J_achieved = closed_loop_cost(g_ctrl, theta_hat, kind, rho)
    theta0, J_opt = nominal_synthesis(plant_true, T=8 * r)
    try:
        prop = proposition_bound(ident.eps, theta0, plant_true)
    except OutOfRegimeError:
        prop = math.nan
    thm = theorem_bound(cfg.sigma, r, m, 2, cfg.eta, theta0, plant_true)
    verdict = certify_stabilization(res.theta, delta_ctrl)
    z = simulate_closed_loop(g_ctrl, res.theta, kind, rho)
    half = len(z) // 2
    report = {
        "config": cfg.to_flat(),
        "g": [float(x) for x in g_full],
        "g_hat": [float(x) for x in ident.g_hat],
        "eps": float(ident.eps),
        "alpha_star": float(res.alpha),
        "theta_star": {
            "R": res.theta.R.blocks.tolist(),
            "M": res.theta.M.blocks.tolist(),
            "N": res.theta.N.blocks.tolist(),
            "L": res.theta.L.blocks.tolist(),
        },
        "J_design": float(res.nominal_J),
        "objective_Q": float(res.objective_Q),
        "J_achieved": float(J_achieved),
        "J_opt": float(J_opt),
        "bounds": {
            "proposition": float(prop) if math.isfinite(prop) else None,
            "theorem": float(thm),
            "actual_gap": float(J_achieved - J_opt),
        },
        "norms": {
            "norm_N": float(res.norm_N),
            "norm_stack": float(res.norm_stack),
            "norm_RB_ND": float(res.norm_RB_ND),
        },
        "stability": verdict.value,
        "impulse_tail_max": float(np.abs(z[half:]).max()),
        "delta_norm": float(np.linalg.norm(g_full - ident.g_hat)),
    }
    violation = (
        np.linalg.norm(g_full - ident.g_hat) <= ident.eps
        and J_achieved > res.objective_Q + 1e-5
    )
    if write:
        _write_pipeline(cfg, report)
    if violation:
        raise BoundViolationError(
            f"achieved cost {J_achieved:.9f} exceeds certificate "
            f"{res.objective_Q:.9f} despite ||delta|| <= eps"
        )
    return report


def render_pipeline_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


# ----------------------------------------------------------------------
# output layout: <outdir>/<experiment>/<timestamp>/{records.csv, summary.json,
# plot.svg, config.echo}

def _timestamp() -> str:
    return datetime.datetime.now().strftime("%Y%m%d-%H%M%S-%f")


def _config_echo(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.to_flat().items())


def _write_outputs(cfg, experiment: str, csv_text: str, summary: dict, svg: str) -> str:
    run_dir = os.path.join(cfg.outdir, experiment, _timestamp())
    os.makedirs(run_dir, exist_ok=True)
    with open(os.path.join(run_dir, "records.csv"), "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    with open(os.path.join(run_dir, "summary.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    with open(os.path.join(run_dir, "plot.svg"), "w", encoding="utf-8") as fh:
        fh.write(svg)
    with open(os.path.join(run_dir, "config.echo"), "w", encoding="utf-8") as fh:
        fh.write(_config_echo(cfg))
    return run_dir


def _write_pipeline(cfg: ExperimentConfig, report: dict) -> str:
    run_dir = os.path.join(cfg.outdir, "pipeline", _timestamp())
    os.makedirs(run_dir, exist_ok=True)
    with open(os.path.join(run_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(render_pipeline_json(report))
    with open(os.path.join(run_dir, "config.echo"), "w", encoding="utf-8") as fh:
        fh.write(_config_echo(cfg))
    return run_dir


def run_experiment(cfg: ExperimentConfig, write: bool = True):
    if cfg.experiment == "fig-approx":
        return run_fig_approx(cfg, write)
    if cfg.experiment == "fig-swarm":
        return run_fig_swarm(cfg, write)
    if cfg.experiment == "fig-bound":
        return run_fig_bound(cfg, write)
    return run_pipeline(cfg, write)
