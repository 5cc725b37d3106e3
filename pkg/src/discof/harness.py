"""Benchmark harness, renderers, and the command line interface.

The benchmark mirrors a randomized obstacle-density sweep: square grids
filled with a fixed fraction of obstacle cells, robots dropped on distinct
free starts with distinct free goals, both coordination modes run on the
same instances, and per-density summaries comparing steps and approximate
run times.  The renderers turn a trace into step-indexed text frames or a
standalone SVG overview.
"""
from __future__ import annotations

import argparse
import random
import statistics
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .coordination import SensingConfig
from .executor import MODES, SafetyViolationError, Trace, run
from .model import OracleCapacityError, oracle_solve
from .world import Scenario, ScenarioError, WorldError, WorldGraph, load_scenario

SECONDS_PER_MOVE = 5.0


def approx_run_time(comp_time: float, steps_max: int, seconds_per_move: float = SECONDS_PER_MOVE) -> float:
    """Estimated wall time of a physical run: planning plus driving."""
    return comp_time + seconds_per_move * steps_max


# -------- instance generation --------


def generate_instance(
    seed: int,
    width: int = 20,
    height: int = 20,
    n_robots: int = 30,
    obstacle_rate: float = 0.10,
) -> Scenario:
    """Random solvable instance: distinct starts, distinct goals, room to move.

    Components hosting two or more robots must keep at least two spare
    cells and contain a junction cell, which rules out the corridor-only
    layouts where two robots can never pass each other.
    """
    if not 0 <= obstacle_rate < 1:
        raise ValueError(f"obstacle_rate must be in [0, 1), got {obstacle_rate}")
    rng = random.Random(seed)
    all_cells = [(x, y) for x in range(width) for y in range(height)]
    n_obstacles = int(obstacle_rate * width * height + 0.5)
    for _ in range(1000):
        obstacles = frozenset(rng.sample(all_cells, n_obstacles))
        g = WorldGraph(width=width, height=height, obstacles=obstacles)
        free = sorted(g.vertices)
        if len(free) < n_robots + 2:
            continue
        starts = rng.sample(free, n_robots)
        goals = rng.sample(free, n_robots)
        if any(g.distance(s, t) is None for s, t in zip(starts, goals)):
            continue
        comps = g.components()
        comp_of = {c: i for i, comp in enumerate(comps) for c in comp}
        load = {i: 0 for i in range(len(comps))}
        for s in starts:
            load[comp_of[s]] += 1
        ok = True
        for i, comp in enumerate(comps):
            if load[i] >= 2:
                if len(comp) - load[i] < 2:
                    ok = False
                    break
                if not any(g.degree(c) >= 3 for c in comp):
                    ok = False
                    break
        if not ok:
            continue
        return Scenario(
            graph=g,
            starts={r + 1: starts[r] for r in range(n_robots)},
            goals={r + 1: goals[r] for r in range(n_robots)},
            seed=seed,
        )
    raise WorldError(
        f"no solvable instance found for seed={seed} rate={obstacle_rate} "
        f"size={width}x{height} robots={n_robots}"
    )


# -------- the experiment --------


@dataclass(frozen=True)
class ExperimentConfig:
    width: int = 20
    height: int = 20
    n_robots: int = 30
    obstacle_rates: tuple[float, ...] = (0.05, 0.10, 0.15, 0.20)
    instances: int = 100
    seed: int = 0
    modes: tuple[str, ...] = ("discof", "discof_plus")
    sensing_range: int = 3
    beta: int | None = None
    step_duration_model: str = "uniform:1:5"
    sync_only_on_conflict: bool = False
    step_budget: int | None = None
    seconds_per_move: float = SECONDS_PER_MOVE


@dataclass(frozen=True)
class InstanceResult:
    rate: float
    index: int
    seed: int
    mode: str
    completed: bool
    steps_max: int | None
    steps_sum: int | None
    comp_time: float
    approx_time: float | None
    launches: int


def instance_seed(base_seed: int, rate: float, index: int) -> int:
    return base_seed * 1_000_003 + int(round(rate * 100)) * 10_007 + index


def _run_one(scenario: Scenario, config: ExperimentConfig, mode: str, seed: int) -> InstanceResult:
    cfg = SensingConfig(sensing_range=config.sensing_range, beta=config.beta)
    trace = run(
        scenario,
        cfg=cfg,
        mode=mode,
        step_duration_model=config.step_duration_model,
        seed=seed,
        step_budget=config.step_budget,
        sync_only_on_conflict=config.sync_only_on_conflict,
    )
    steps_max = trace.max_steps() if trace.completed else None
    steps_sum = trace.sum_steps() if trace.completed else None
    return InstanceResult(
        rate=0.0,
        index=0,
        seed=seed,
        mode=mode,
        completed=trace.completed,
        steps_max=steps_max,
        steps_sum=steps_sum,
        comp_time=trace.comp_time,
        approx_time=(
            approx_run_time(trace.comp_time, steps_max, config.seconds_per_move)
            if steps_max is not None
            else None
        ),
        launches=trace.launches,
    )


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    progress=None,
) -> tuple[list[InstanceResult], list[dict]]:
    """Run every (rate, instance, mode) cell; return rows and summaries."""
    results: list[InstanceResult] = []
    for rate in config.obstacle_rates:
        for index in range(config.instances):
            seed = instance_seed(config.seed, rate, index)
            scenario = generate_instance(
                seed, config.width, config.height, config.n_robots, rate
            )
            for mode in config.modes:
                try:
                    row = _run_one(scenario, config, mode, seed)
                except SafetyViolationError:
                    print(
                        f"safety violation: rate={rate} index={index} seed={seed} mode={mode}",
                        file=sys.stderr,
                    )
                    raise
                row = replace(row, rate=rate, index=index)
                results.append(row)
            if progress is not None:
                progress(rate, index)
    summaries = summarize(results, config)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "instances.csv").write_text(results_csv(results))
        (out / "summary.csv").write_text(summary_csv(summaries))
    return results, summaries


def summarize(results: list[InstanceResult], config: ExperimentConfig) -> list[dict]:
    """Per-density comparison of the two modes over shared instances."""
    base_mode = config.modes[0]
    plus_mode = config.modes[-1]
    out = []
    for rate in config.obstacle_rates:
        cell = [r for r in results if r.rate == rate]
        by_key = {(r.mode, r.index): r for r in cell}
        shared = [
            i
            for i in range(config.instances)
            if all(
                by_key.get((m, i)) is not None and by_key[(m, i)].completed
                for m in (base_mode, plus_mode)
            )
        ]
        row: dict = {"rate": rate, "instances": config.instances, "compared": len(shared)}
        for m in (base_mode, plus_mode):
            rows = [by_key[(m, i)] for i in shared]
            steps = [r.steps_max for r in rows]
            times = [r.approx_time for r in rows]
            done = sum(1 for r in cell if r.mode == m and r.completed)
            row[f"{m}_completed"] = done
            row[f"{m}_steps_avg"] = statistics.fmean(steps) if steps else None
            row[f"{m}_steps_std"] = statistics.pstdev(steps) if len(steps) > 1 else 0.0
            row[f"{m}_time_avg"] = statistics.fmean(times) if times else None
        if shared and row[f"{base_mode}_steps_avg"]:
            row["steps_ratio"] = row[f"{plus_mode}_steps_avg"] / row[f"{base_mode}_steps_avg"]
            row["time_ratio"] = row[f"{plus_mode}_time_avg"] / row[f"{base_mode}_time_avg"]
            wins = sum(
                1
                for i in shared
                if by_key[(plus_mode, i)].steps_max < by_key[(base_mode, i)].steps_max
            )
            row["plus_wins"] = wins / len(shared)
        else:
            row["steps_ratio"] = None
            row["time_ratio"] = None
            row["plus_wins"] = None
        out.append(row)
    return out


def results_csv(results: list[InstanceResult]) -> str:
    lines = ["rate,index,seed,mode,completed,steps_max,steps_sum,comp_time,approx_time,launches"]
    for r in results:
        lines.append(
            f"{r.rate},{r.index},{r.seed},{r.mode},{int(r.completed)},"
            f"{'' if r.steps_max is None else r.steps_max},"
            f"{'' if r.steps_sum is None else r.steps_sum},"
            f"{r.comp_time:.6f},"
            f"{'' if r.approx_time is None else f'{r.approx_time:.3f}'},"
            f"{r.launches}"
        )
    return "\n".join(lines) + "\n"


def summary_csv(summaries: list[dict]) -> str:
    if not summaries:
        return "\n"
    keys = list(summaries[0].keys())
    lines = [",".join(keys)]
    for row in summaries:
        vals = []
        for k in keys:
            v = row[k]
            if v is None:
                vals.append("")
            elif isinstance(v, float):
                vals.append(f"{v:.4f}")
            else:
                vals.append(str(v))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def summary_table(summaries: list[dict]) -> str:
    lines = []
    for row in summaries:
        ratio = row.get("steps_ratio")
        wins = row.get("plus_wins")
        ratio_s = "n/a" if ratio is None else f"{ratio:.3f}"
        wins_s = "n/a" if wins is None else f"{wins:.2f}"
        lines.append(
            f"rate={row['rate']:.2f} compared={row['compared']}/{row['instances']} "
            f"steps_ratio={ratio_s} plus_wins={wins_s}"
        )
    return "\n".join(lines)


# -------- rendering --------

_SYMBOLS = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def _symbol(i: int) -> str:
    return _SYMBOLS[i % len(_SYMBOLS)]


def render(trace: Trace) -> str:
    """Step-indexed text frames with closure and group annotations."""
    g = trace.scenario.graph
    robots = trace.scenario.robots
    legend = [
        f"robot {r} '{_symbol(i)}' start={trace.positions[r][0]} goal={trace.scenario.goals[r]}"
        for i, r in enumerate(robots)
    ]
    last = {r: len(trace.positions[r]) - 1 for r in robots}
    n_frames = max(last.values()) + 1 if robots else 0
    frames = []
    for s in range(n_frames):
        cells: dict[tuple[int, int], list[int]] = {}
        for i, r in enumerate(robots):
            cells.setdefault(trace.positions[r][min(s, last[r])], []).append(i)
        rows = []
        for y in range(g.height):
            row = []
            for x in range(g.width):
                if not g.is_free((x, y)):
                    row.append("#")
                elif (x, y) in cells:
                    who = cells[(x, y)]
                    row.append(_symbol(who[0]) if len(who) == 1 else "*")
                else:
                    row.append(".")
            rows.append("".join(row))
        ocs: dict[int, list[int]] = {}
        grps: dict[int, list[int]] = {}
        for r in robots:
            j = min(s, last[r])
            ocs.setdefault(trace.oc_ids[r][j], []).append(r)
            if trace.group_ids[r][j] >= 0:
                grps.setdefault(trace.group_ids[r][j], []).append(r)
        notes = ["ocs " + " ".join(f"{k}:{v}" for k, v in sorted(ocs.items()))]
        if grps:
            notes.append("groups " + " ".join(f"{k}:{v}" for k, v in sorted(grps.items())))
        frames.append("\n".join([f"step {s}", *rows, *notes]))
    return "\n".join(legend) + "\n\n" + "\n\n".join(frames) + "\n"


_PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#17becf", "#e377c2", "#8c564b", "#bcbd22", "#7f7f7f",
]


def render_svg(trace: Trace, cell_px: int = 24) -> str:
    """Single-image overview: obstacle map plus one polyline per robot."""
    g = trace.scenario.graph
    robots = trace.scenario.robots
    w, h = g.width * cell_px, g.height * cell_px
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
    ]
    for x, y in sorted(g.obstacles):
        parts.append(
            f'<rect x="{x * cell_px}" y="{y * cell_px}" width="{cell_px}" '
            f'height="{cell_px}" fill="#333"/>'
        )
    for k in range(g.width + 1):
        parts.append(
            f'<line x1="{k * cell_px}" y1="0" x2="{k * cell_px}" y2="{h}" '
            f'stroke="#ddd" stroke-width="1"/>'
        )
    for k in range(g.height + 1):
        parts.append(
            f'<line x1="0" y1="{k * cell_px}" x2="{w}" y2="{k * cell_px}" '
            f'stroke="#ddd" stroke-width="1"/>'
        )

    def center(c: tuple[int, int], i: int) -> tuple[float, float]:
        dx = ((i % 3) - 1) * 0.15
        dy = ((i // 3 % 3) - 1) * 0.15
        return ((c[0] + 0.5 + dx) * cell_px, (c[1] + 0.5 + dy) * cell_px)

    for i, r in enumerate(robots):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in (center(c, i) for c in trace.positions[r]))
        sx, sy = center(trace.positions[r][0], i)
        gx, gy = center(trace.scenario.goals[r], i)
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="2" opacity="0.8"/>'
        )
        parts.append(f'<circle cx="{sx:.1f}" cy="{sy:.1f}" r="4" fill="{color}"/>')
        parts.append(
            f'<rect x="{gx - 4:.1f}" y="{gy - 4:.1f}" width="8" height="8" '
            f'fill="none" stroke="{color}" stroke-width="2"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# -------- command line --------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="discof",
        description="Distributed cooperative pathfinding simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario")
    sim.add_argument("--scenario", required=True, help="scenario file path")
    sim.add_argument("--mode", choices=MODES, default="discof_plus")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--sensing-range", type=int, default=3)
    sim.add_argument("--beta", type=int, default=None)
    sim.add_argument("--sync-only-on-conflict", action="store_true")
    sim.add_argument("--step-durations", default="uniform:1:5")
    sim.add_argument("--step-budget", type=int, default=None)
    sim.add_argument("--trace-out", default=None, help="write the trace CSV here")
    sim.add_argument("--events-out", default=None, help="write the event log here")
    sim.add_argument("--render-out", default=None, help="write text frames here")
    sim.add_argument("--svg-out", default=None, help="write an SVG overview here")

    bench = sub.add_parser("bench", help="run the benchmark sweep")
    bench.add_argument("--width", type=int, default=20)
    bench.add_argument("--height", type=int, default=20)
    bench.add_argument("--robots", type=int, default=30)
    bench.add_argument("--obstacle-rates", default="0.05,0.10,0.15,0.20")
    bench.add_argument("--instances", type=int, default=100)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--sensing-range", type=int, default=3)
    bench.add_argument("--beta", type=int, default=None)
    bench.add_argument("--step-durations", default="uniform:1:5")
    bench.add_argument("--sync-only-on-conflict", action="store_true")
    bench.add_argument("--out", default=None, help="directory for result CSVs")

    orc = sub.add_parser("oracle", help="jointly optimal plan for a scenario")
    orc.add_argument("--scenario", required=True, help="scenario file path")
    orc.add_argument("--horizon", type=int, default=None)
    return parser


def _cmd_simulate(args) -> int:
    scenario = load_scenario(Path(args.scenario).read_text())
    cfg = SensingConfig(sensing_range=args.sensing_range, beta=args.beta)
    trace = run(
        scenario,
        cfg=cfg,
        mode=args.mode,
        step_duration_model=args.step_durations,
        seed=args.seed,
        step_budget=args.step_budget,
        sync_only_on_conflict=args.sync_only_on_conflict,
    )
    if args.trace_out:
        Path(args.trace_out).write_text(trace.to_csv())
    if args.events_out:
        Path(args.events_out).write_text(trace.event_log_text())
    if args.render_out:
        Path(args.render_out).write_text(render(trace))
    if args.svg_out:
        Path(args.svg_out).write_text(render_svg(trace))
    if trace.completed:
        end = max(ts[-1] for ts in trace.times.values())
        print(
            f"status=completed steps_max={trace.max_steps()} steps_sum={trace.sum_steps()} "
            f"sim_time={end} launches={trace.launches} comp_time={trace.comp_time:.3f}s"
        )
    else:
        why = trace.events[-1].kind if trace.events else "unknown"
        print(f"status=incomplete reason={why} launches={trace.launches}")
    return 0


def _cmd_bench(args) -> int:
    rates = tuple(float(x) for x in args.obstacle_rates.split(",") if x)
    config = ExperimentConfig(
        width=args.width,
        height=args.height,
        n_robots=args.robots,
        obstacle_rates=rates,
        instances=args.instances,
        seed=args.seed,
        sensing_range=args.sensing_range,
        beta=args.beta,
        step_duration_model=args.step_durations,
        sync_only_on_conflict=args.sync_only_on_conflict,
    )
    _, summaries = run_experiment(config, out_dir=args.out)
    print(summary_table(summaries))
    return 0


def _cmd_oracle(args) -> int:
    scenario = load_scenario(Path(args.scenario).read_text())
    try:
        plan = oracle_solve(scenario, horizon=args.horizon)
    except OracleCapacityError as exc:
        print(f"oracle capacity exceeded: {exc}", file=sys.stderr)
        return 1
    if plan is None:
        print("no joint plan")
        return 0
    print(f"makespan={plan.makespan}")
    for step, state in enumerate(plan.steps):
        cells = " ".join(f"{r}:{c}" for r, c in zip(plan.robot_ids, state))
        print(f"step {step}: {cells}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "bench":
            return _cmd_bench(args)
        return _cmd_oracle(args)
    except (ScenarioError, WorldError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
