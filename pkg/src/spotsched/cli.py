"""Experiment harness and command-line surface.

Subcommands: ingest, simulate, sweep, verify-bounds, opt, stats. Results are
written as a versioned CSV whose column order is fixed so downstream plotting
binds by name; certificates are JSON with explicit pass/fail verdicts.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from . import adversary as adv_mod
from . import ingest as ingest_mod
from . import oracle as oracle_mod
from .core import CostModel, Job, SpotTrace, critical_threshold
from .engine import SimConfig, run, run_monte_carlo, write_log_csv
from .policies import POLICY_IDS, make_policy

RESULTS_VERSION = "spotsched-results v1"
RESULT_COLUMNS = ("trace_id", "policy", "K", "L", "D", "mean_cost", "cost_stddev",
                  "opt_cost", "cost_savings_pct", "overhead_to_opt_pct", "runs", "seed")


def cost_savings_pct(alg_cost: float, cost_ratio: float, compute_steps: int,
                     changeover_steps: int, billed: bool) -> float:
    """Percent saved relative to running purely on-demand."""
    on_demand = cost_ratio * compute_steps
    if billed:
        on_demand += cost_ratio * changeover_steps
    return 100.0 * (1.0 - alg_cost / on_demand)


def overhead_to_opt_pct(alg_cost: float, opt_cost: float) -> float:
    """Percent extra cost over the hindsight optimum."""
    if opt_cost <= 0:
        raise ValueError("opt_cost must be positive")
    return 100.0 * (alg_cost / opt_cost - 1.0)


@dataclass(slots=True)
class ExperimentConfig:
    traces: list[str] = field(default_factory=list)
    policies: list[str] = field(default_factory=lambda: list(POLICY_IDS))
    k_grid: list[float] = field(default_factory=lambda: [round(1 + 0.9 * i, 10) for i in range(1, 11)])
    ld_grid: list[float] = field(default_factory=list)  # empty: derive from trace fraction
    job_steps: int = 200
    changeover_steps: int = -1  # -1: default to ceil(1% of job_steps)
    bill_changeover: bool = True
    runs: int = 100
    seed: int = 0
    out_dir: str = "results"
    opt_delay_free: bool = False  # report overhead against the delay-free optimum

    def __post_init__(self) -> None:
        if any(k <= 1 for k in self.k_grid):
            raise ValueError(f"cost ratios must exceed 1, got {self.k_grid}")
        if any(not 0 < r <= 1 for r in self.ld_grid):
            raise ValueError(f"L/D values must lie in (0, 1], got {self.ld_grid}")
        if self.job_steps < 1:
            raise ValueError("job_steps must be positive")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if "SPOTSCHED_SEED" in os.environ:
            self.seed = int(os.environ["SPOTSCHED_SEED"])

    def effective_changeover(self) -> int:
        if self.changeover_steps >= 0:
            return self.changeover_steps
        return CostModel.changeover_steps_for(self.job_steps)

    _LIST_FIELDS = {"traces": str, "policies": str, "k_grid": float, "ld_grid": float}
    _BOOL_FIELDS = ("bill_changeover", "opt_delay_free")

    def to_file(self, path) -> None:
        lines = ["# spotsched experiment config"]
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, list):
                lines.append(f"{f.name} = {', '.join(str(v) for v in value)}")
            else:
                lines.append(f"{f.name} = {value}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        kwargs = {}
        with open(path) as fh:
            for ln in fh:
                ln = ln.strip()
                if not ln or ln.startswith("#"):
                    continue
                key, _, value = ln.partition("=")
                key, value = key.strip(), value.strip()
                if key in cls._LIST_FIELDS:
                    cast = cls._LIST_FIELDS[key]
                    kwargs[key] = [cast(v.strip()) for v in value.split(",") if v.strip()]
                elif key in cls._BOOL_FIELDS:
                    kwargs[key] = value.lower() in ("1", "true", "yes")
                elif key in ("job_steps", "changeover_steps", "runs", "seed"):
                    kwargs[key] = int(value)
                elif key == "out_dir":
                    kwargs[key] = value
                else:
                    raise ValueError(f"unknown config key {key!r}")
        return cls(**kwargs)


@dataclass(frozen=True, slots=True)
class ResultRow:
    trace_id: str
    policy: str
    K: float
    L: int
    D: int
    mean_cost: float
    cost_stddev: float
    opt_cost: float
    cost_savings_pct: float
    overhead_to_opt_pct: float
    runs: int
    seed: int

    def as_csv(self) -> str:
        return ",".join([
            self.trace_id, self.policy, repr(self.K), str(self.L), str(self.D),
            repr(self.mean_cost), repr(self.cost_stddev), repr(self.opt_cost),
            repr(self.cost_savings_pct), repr(self.overhead_to_opt_pct),
            str(self.runs), str(self.seed),
        ])


def write_results_csv(rows: list[ResultRow], path) -> None:
    lines = [f"# {RESULTS_VERSION}: {','.join(RESULT_COLUMNS)}", ",".join(RESULT_COLUMNS)]
    lines.extend(r.as_csv() for r in rows)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _trace_id(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def sweep(config: ExperimentConfig, traces: dict[str, SpotTrace] | None = None
          ) -> tuple[list[ResultRow], list[dict]]:
    """Run the full (trace, policy, K, L/D) grid; per-cell failures are
    recorded and skipped, never fatal. Deterministic for a fixed seed."""
    if traces is None:
        traces = {_trace_id(p): ingest_mod.read_canonical(p) for p in config.traces}
    d = config.effective_changeover()
    L = config.job_steps
    rows: list[ResultRow] = []
    failures: list[dict] = []

    for trace_id in sorted(traces):
        trace = traces[trace_id]
        ld_grid = config.ld_grid
        if not ld_grid:
            frac = max(0.05, ingest_mod.trace_stats(trace).fraction_available)
            ld_grid = [round(x, 6) for x in np.linspace(min(frac, 0.9), 0.9, 6)]
        for policy_id in config.policies:
            for K in config.k_grid:
                cm = CostModel(K, d, config.bill_changeover)
                for ld in ld_grid:
                    D = int(round(L / ld))
                    try:
                        job = Job(L, D)
                        opt = (oracle_mod.opt_cost_delay_free(trace, job, K)
                               if config.opt_delay_free
                               else oracle_mod.opt_cost_with_delays(trace, job, cm))
                        sim = SimConfig(trace.step_seconds, config.runs, config.seed)
                        stats = run_monte_carlo(make_policy(policy_id), trace, job, cm, sim)
                        rows.append(ResultRow(
                            trace_id=trace_id, policy=policy_id, K=K, L=L, D=D,
                            mean_cost=stats.mean_cost, cost_stddev=stats.cost_stddev,
                            opt_cost=opt,
                            cost_savings_pct=cost_savings_pct(
                                stats.mean_cost, K, L, d, config.bill_changeover),
                            overhead_to_opt_pct=overhead_to_opt_pct(stats.mean_cost, opt),
                            runs=config.runs, seed=config.seed,
                        ))
                    except Exception as exc:  # cell failure: record and continue
                        failures.append({"trace": trace_id, "policy": policy_id,
                                         "K": K, "L": L, "D": D, "error": str(exc)})
    rows.sort(key=lambda r: (r.trace_id, r.policy, r.K, r.L, r.D))
    return rows, failures


def _jsonable(value):
    """Coerce numpy scalars (and containers of them) to plain Python types."""
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _fit_line(xs, ys) -> tuple[float, float]:
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = np.polyval([slope, intercept], xs)
    ss_res = float(((np.asarray(ys) - pred) ** 2).sum())
    ss_tot = float(((np.asarray(ys) - np.mean(ys)) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def verify_bounds(k_grid: list[float], tolerance: float = 0.05,
                  compute_steps: int = 200, mc_runs: int = 2000, seed: int = 0) -> dict:
    """Run the four bound-verification campaigns and emit one certificate set.

    1. Linear-in-K ratios for the deterministic baselines under the adaptive
       construction, with the randomized policy staying near sqrt(K).
    2. The parametric supplier grid pinning E[ratio] to sqrt(K).
    3. Minimax grid search against the closed-form saddle.
    4. Fluid lower-bound minimization.
    """
    if any(k <= 1 for k in k_grid):
        raise ValueError(f"cost ratios must exceed 1: {k_grid}")
    certs: dict = {"inputs": {"k_grid": k_grid, "tolerance": tolerance,
                              "compute_steps": compute_steps, "mc_runs": mc_runs}}
    L = compute_steps
    sim = SimConfig(1.0, 1, seed)

    killer_ks = [2, 4, 6, 8, 10]
    killer = {"k_grid": killer_ks, "policies": {}}
    for policy_id in ("greedy", "uniform-progress"):
        ratios = []
        for K in killer_ks:
            res = adv_mod.run_adaptive_killer(
                make_policy(policy_id), Job(L, 2 * L), CostModel(K), sim, seed)
            ratios.append(res.ratio)
        slope, r2 = _fit_line(killer_ks, ratios)
        killer["policies"][policy_id] = {
            "ratios": ratios, "slope": slope, "r2": r2,
            "pass": slope >= 0.4 and r2 >= 0.95,
        }
    ross_excess = []
    for K in killer_ks:
        res = adv_mod.run_adaptive_cosim(
            make_policy("ross-greedy"), Job(L, 2 * L), CostModel(K), seed)
        ross_excess.append(res.ratio / math.sqrt(K))
    killer["ross_ratio_over_sqrtK"] = ross_excess
    killer["ross_pass"] = all(x <= 1.1 for x in ross_excess)
    killer["pass"] = killer["ross_pass"] and all(
        p["pass"] for p in killer["policies"].values())
    certs["adaptive_killer"] = killer

    parametric = {}
    for K in k_grid:
        job = Job(L, 2 * L)
        cm = CostModel(K)
        delta = math.ceil(L / (1 + math.sqrt(K)))
        ratios = []
        for alpha in np.linspace(0, L, 21).round().astype(int):
            for gamma in (0.0, delta * (1 - alpha / L)):
                spec = adv_mod.ParametricAdversary(z=L, alpha=int(alpha), gamma=float(gamma))
                ratios.append(adv_mod.parametric_expected_ratio(
                    spec, job, cm, seed, mc_runs, crosscheck=0))
        root = math.sqrt(K)
        parametric[str(K)] = {
            "max_ratio": max(ratios), "min_of_max": max(ratios) / root,
            "upper_ok": max(ratios) <= root * (1 + tolerance),
            "reaches_lower": max(ratios) >= root * (1 - tolerance),
            "pass": max(ratios) <= root * (1 + tolerance)
                    and max(ratios) >= root * (1 - tolerance),
        }
    certs["parametric_sqrtK"] = parametric
    certs["parametric_pass"] = all(v["pass"] for v in parametric.values())

    minimax = {}
    for K in k_grid:
        cert = oracle_mod.minimax_search(K, float(L), 2.0 * L, resolution=0.02 * L)
        ok_value = cert["value_rel_err"] <= 0.02
        ok_z = abs(cert["argmin"]["z"] - L) <= 0.05 * L
        ok_delta = abs(cert["argmin"]["delta"] - cert["theory_delta"]) <= 0.05 * L
        cert["pass"] = ok_value and ok_z and ok_delta
        minimax[str(K)] = cert
    certs["minimax"] = minimax
    certs["minimax_pass"] = all(v["pass"] for v in minimax.values())

    fluid = {}
    for K in k_grid:
        D = 2 * L
        best = math.inf
        for s in np.linspace(0.0, 1.0, 401):
            p_flat = min(1.0, s * L / D)
            profile = oracle_mod.OnDemandProfile(tuple([p_flat] * D), T=D)
            best = min(best, oracle_mod.fluid_lower_bound(profile, K, L, D))
        root = math.sqrt(K)
        fluid[str(K)] = {"min_bound": best, "target": root,
                         "pass": abs(best - root) / root <= tolerance}
    certs["fluid"] = fluid
    certs["fluid_pass"] = all(v["pass"] for v in fluid.values())

    certs["pass"] = (certs["adaptive_killer"]["pass"] and certs["parametric_pass"]
                     and certs["minimax_pass"] and certs["fluid_pass"])
    return _jsonable(certs)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="spotsched",
                                     description="spot/on-demand deadline scheduling simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a dataset file into a canonical trace")
    p.add_argument("kind", choices=["spotlake", "skypilot-availability", "skypilot-preemption"])
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--step-seconds", type=float, default=None)
    p.add_argument("--provider"), p.add_argument("--region")
    p.add_argument("--zone"), p.add_argument("--instance")

    p = sub.add_parser("simulate", help="run one policy on one trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--policy", required=True, choices=POLICY_IDS)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--L", type=int, required=True, help="job length in steps")
    p.add_argument("--D", type=int, required=True, help="deadline in steps")
    p.add_argument("--delay", type=int, default=0, help="changeover in steps")
    p.add_argument("--bill-delay", action="store_true", default=True)
    p.add_argument("--no-bill-delay", dest="bill_delay", action="store_false")
    p.add_argument("--runs", type=int, default=1)
    _add_common(p)

    p = sub.add_parser("sweep", help="run the metric sweep from a config file")
    p.add_argument("--config", required=True)
    _add_common(p)

    p = sub.add_parser("verify-bounds", help="verify the theoretical bounds numerically")
    p.add_argument("--K", type=float, nargs="+", default=[2.0, 4.0, 9.0])
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--runs", type=int, default=2000)
    p.add_argument("--L", type=int, default=200)
    _add_common(p)

    p = sub.add_parser("opt", help="hindsight-optimal cost for a trace and job")
    p.add_argument("--trace", required=True)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--D", type=int, required=True)
    p.add_argument("--delay", type=int, default=0)
    p.add_argument("--bill-delay", action="store_true", default=True)
    p.add_argument("--no-bill-delay", dest="bill_delay", action="store_false")
    _add_common(p)

    p = sub.add_parser("stats", help="availability statistics of a trace")
    p.add_argument("--trace", required=True)
    _add_common(p)

    args = parser.parse_args(argv)

    if args.command == "ingest":
        if args.kind == "spotlake":
            selector = ingest_mod.SpotlakeSelector(args.provider, args.region,
                                                   args.zone, args.instance)
            trace = ingest_mod.parse_spotlake(args.input, selector,
                                              step_seconds=args.step_seconds)
        elif args.kind == "skypilot-availability":
            trace = ingest_mod.parse_skypilot_availability(args.input)
        else:
            trace = ingest_mod.parse_skypilot_preemption(
                args.input, step_seconds=args.step_seconds or 600.0)
        ingest_mod.write_canonical(trace, args.output)
        print(f"wrote {args.output}: {len(trace)} steps, "
              f"fraction {ingest_mod.trace_stats(trace).fraction_available:.3f}")
        return 0

    if args.command == "simulate":
        trace = ingest_mod.read_canonical(args.trace)
        job = Job(args.L, args.D)
        cm = CostModel(args.K, args.delay, args.bill_delay)
        sim = SimConfig(trace.step_seconds, args.runs, args.seed)
        if args.runs > 1:
            stats = run_monte_carlo(make_policy(args.policy), trace, job, cm, sim)
            payload = dataclasses.asdict(stats) | {"seeds": list(stats.seeds)}
            print(json.dumps(payload, indent=2))
        else:
            log = run(make_policy(args.policy), trace, job, cm, sim, seed=args.seed)
            if args.out:
                write_log_csv(log, args.out)
            print(json.dumps(log.totals_dict(), indent=2))
        return 0

    if args.command == "sweep":
        config = ExperimentConfig.from_file(args.config)
        rows, failures = sweep(config)
        os.makedirs(config.out_dir, exist_ok=True)
        out = args.out or os.path.join(config.out_dir, "results.csv")
        write_results_csv(rows, out)
        if failures:
            with open(os.path.join(config.out_dir, "failures.json"), "w") as fh:
                json.dump(failures, fh, indent=2)
        print(f"wrote {out}: {len(rows)} rows, {len(failures)} failed cells")
        return 0

    if args.command == "verify-bounds":
        certs = verify_bounds(list(args.K), args.tol, args.L, args.runs, args.seed)
        out = args.out or "certificates.json"
        with open(out, "w") as fh:
            json.dump(certs, fh, indent=2, sort_keys=True)
        print(f"wrote {out}: overall {'PASS' if certs['pass'] else 'FAIL'}")
        return 0 if certs["pass"] else 1

    if args.command == "opt":
        trace = ingest_mod.read_canonical(args.trace)
        job = Job(args.L, args.D)
        cm = CostModel(args.K, args.delay, args.bill_delay)
        result = {
            "opt_delay_free": oracle_mod.opt_cost_delay_free(trace, job, args.K),
            "opt_with_delays": oracle_mod.opt_cost_with_delays(trace, job, cm),
        }
        print(json.dumps(result, indent=2))
        return 0

    if args.command == "stats":
        trace = ingest_mod.read_canonical(args.trace)
        print(json.dumps(dataclasses.asdict(ingest_mod.trace_stats(trace)), indent=2))
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
