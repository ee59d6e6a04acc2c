"""Benchmark harness: test sets, head-to-head runs, MC sweeps, data export.

Reports are exact and reproducible: per-scenario costs are integers, means
are computed from integer sums, and every artifact (JSON report, CSV tables,
figures) is a pure function of (map, scenarios, policy specs, seed), byte
identical across reruns and worker counts.
"""
from __future__ import annotations

import json
import statistics
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import figures
from .config import ConfigError, RunConfig
from .demand import DemandModel, Scenario, load_scenario, sample_scenario, save_scenario
from .fleet import Policy, ReplayPolicy, SimulationError, local_controls, simulate
from .llm.client import LlmConfig, MockChatClient
from .llm.policy import LlmPolicy
from .llm.prompts import build_system_prompt, build_user_prompt, render_action
from .policies import GreedyPolicy, IaRaPolicy, StayPolicy
from .roadgraph import RoadGraph
from .rollout import RolloutConfig, RolloutPolicy
from .seeding import NS_BENCH, derive_seed

METHOD_LABELS = {"greedy": "Greedy", "ia-ra": "IA-RA", "stay": "Stay"}


def _level_tag(load_level: str) -> int:
    return zlib.crc32(load_level.encode()) & 0xFFFF


def parse_policy_spec(spec: str) -> tuple[str, str]:
    """Split a policy spec into (method label, version)."""
    if spec.startswith("rollout:"):
        method, _ = parse_policy_spec(spec[len("rollout:"):])
        return method, "Rollout"
    if spec.startswith("llm:"):
        return spec, "Base"
    if spec in METHOD_LABELS:
        return METHOD_LABELS[spec], "Base"
    raise ConfigError(
        f"unknown policy spec {spec!r}; expected greedy | ia-ra | stay | "
        "llm:<strategy> | rollout:<base>"
    )


def make_llm_client(llm_cfg: LlmConfig):
    """HTTP client, or a scripted mock for mock:// endpoints."""
    if not llm_cfg.endpoint:
        raise ConfigError(
            "LLM policy requested but no endpoint configured; set llm.endpoint "
            "to an HTTP chat-completions URL or mock://<script>"
        )
    if llm_cfg.endpoint.startswith("mock://"):
        ref = llm_cfg.endpoint[len("mock://"):]
        path = Path(ref)
        if path.exists():
            return MockChatClient.from_file(path)
        from .config import bundled_mock_script

        try:
            doc = json.loads(bundled_mock_script(ref))
        except FileNotFoundError:
            raise ConfigError(
                f"mock script {ref!r} is neither a file nor a bundled script"
            ) from None
        return MockChatClient.from_rules(
            [(r["pattern"], r["replies"]) for r in doc.get("rules", [])],
            default_reply=doc.get("default_reply"),
        )
    from .llm.client import HttpChatClient

    return HttpChatClient(llm_cfg)


def make_policy(spec: str, run_cfg: RunConfig, load_level: str) -> Policy:
    """Build a fresh policy instance for one benchmark cell."""
    if spec == "greedy":
        return GreedyPolicy()
    if spec == "ia-ra":
        return IaRaPolicy()
    if spec == "stay":
        return StayPolicy()
    if spec.startswith("llm:"):
        strategy = spec[len("llm:"):]
        llm_cfg = LlmConfig(
            **{**vars(run_cfg.llm), "strategy": strategy}
        )
        return LlmPolicy(llm_cfg, make_llm_client(llm_cfg))
    if spec.startswith("rollout:"):
        base = make_policy(spec[len("rollout:"):], run_cfg, load_level)
        cfg = RolloutConfig(
            base=base,
            model=DemandModel(arrival_rate=run_cfg.rate_for(load_level)),
            mc_samples=run_cfg.mc_samples,
            t_h=run_cfg.t_h,
        )
        return RolloutPolicy(cfg)
    parse_policy_spec(spec)  # raises with the helpful message
    raise AssertionError("unreachable")


@dataclass
class BenchRow:
    spec: str
    policy: str
    version: str
    per_scenario_costs: list[int | None]
    per_scenario_hallucinations: list[int | None]
    errors: dict[int, str] = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.errors)

    def _ok_costs(self) -> list[int]:
        return [c for c in self.per_scenario_costs if c is not None]

    @property
    def mean_cost(self) -> float:
        ok = self._ok_costs()
        return sum(ok) / len(ok) if ok else float("nan")

    @property
    def std_cost(self) -> float:
        ok = self._ok_costs()
        return statistics.stdev(ok) if len(ok) > 1 else 0.0

    @property
    def mean_hallucinations(self) -> float:
        ok = [h for h in self.per_scenario_hallucinations if h is not None]
        return sum(ok) / len(ok) if ok else 0.0

    def as_dict(self) -> dict:
        return {
            "spec": self.spec,
            "policy": self.policy,
            "version": self.version,
            "mean_cost": self.mean_cost,
            "std_cost": self.std_cost,
            "mean_hallucinations": self.mean_hallucinations,
            "per_scenario_costs": self.per_scenario_costs,
            "per_scenario_hallucinations": self.per_scenario_hallucinations,
            "partial": self.partial,
            "errors": {str(k): v for k, v in sorted(self.errors.items())},
        }


@dataclass
class BenchReport:
    metadata: dict
    rows: list[BenchRow]

    def as_dict(self) -> dict:
        return {"metadata": self.metadata, "rows": [r.as_dict() for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2) + "\n"

    def summary_csv(self) -> str:
        lines = ["policy,version,mean_cost,std_cost,mean_hallucinations,scenarios"]
        for r in self.rows:
            lines.append(
                f"{r.policy},{r.version},{r.mean_cost:.4f},{r.std_cost:.4f},"
                f"{r.mean_hallucinations:.4f},{len(r.per_scenario_costs)}"
            )
        return "\n".join(lines) + "\n"

    def per_scenario_csv(self) -> str:
        lines = ["policy,version,scenario_index,scenario_seed,cost,hallucinations"]
        seeds = self.metadata.get("scenario_seeds", [])
        for r in self.rows:
            for i, (c, h) in enumerate(
                zip(r.per_scenario_costs, r.per_scenario_hallucinations)
            ):
                seed = seeds[i] if i < len(seeds) else ""
                cost = "" if c is None else c
                hall = "" if h is None else h
                lines.append(f"{r.policy},{r.version},{i},{seed},{cost},{hall}")
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        """Human-readable fixed-width summary, one line per policy row."""
        out = [
            f"{'policy':<22}{'version':<10}{'mean cost':>10}{'std':>9}"
            f"{'mean halluc.':>14}"
        ]
        for r in self.rows:
            flag = " (partial)" if r.partial else ""
            out.append(
                f"{r.policy:<22}{r.version:<10}{r.mean_cost:>10.2f}"
                f"{r.std_cost:>9.2f}{r.mean_hallucinations:>14.2f}{flag}"
            )
        return "\n".join(out)

    def write(self, out_dir: str | Path, stem: str = "report") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [
            out / f"{stem}.json",
            out / f"{stem}.csv",
            out / f"{stem}_per_scenario.csv",
        ]
        paths[0].write_text(self.to_json())
        paths[1].write_text(self.summary_csv())
        paths[2].write_text(self.per_scenario_csv())
        title = (
            f"{self.metadata.get('load_level', '?')} load, "
            f"{len(self.metadata.get('scenario_seeds', []))} scenarios"
        )
        paths.append(
            figures.save_cost_bars(
                [r.as_dict() for r in self.rows], title, out / f"{stem}_costs.png"
            )
        )
        return paths


def build_test_set(
    load_level: str,
    n: int,
    g: RoadGraph,
    model: DemandModel,
    seed: int,
    horizon: int,
    out_dir: str | Path | None = None,
) -> list[Scenario]:
    """n scenarios with deterministic per-index seeds, optionally persisted
    under <out_dir>/<load>/scenario_##.json."""
    if n < 1:
        raise ValueError(f"test set size must be >= 1: {n}")
    scenarios = [
        sample_scenario(
            model,
            g,
            horizon,
            seed=derive_seed(NS_BENCH, seed, _level_tag(load_level), i),
            load_level=load_level,
        )
        for i in range(n)
    ]
    if out_dir is not None:
        target = Path(out_dir) / load_level
        target.mkdir(parents=True, exist_ok=True)
        for i, sc in enumerate(scenarios):
            (target / f"scenario_{i:02d}.json").write_bytes(save_scenario(sc))
    return scenarios


def load_test_set(directory: str | Path, g: RoadGraph | None = None) -> list[Scenario]:
    files = sorted(Path(directory).glob("scenario_*.json"))
    if not files:
        raise ConfigError(f"no scenario_*.json files under {directory}")
    return [load_scenario(f.read_bytes(), g) for f in files]


def hardest_scenarios(
    scenarios: list[Scenario], g: RoadGraph, k: int, num_agents: int, seed: int
) -> list[Scenario]:
    """Top-k scenarios by greedy-policy cost (the hardest-case protocol)."""
    costs = [
        (
            simulate(sc, GreedyPolicy(), g, num_agents, seed=derive_seed(seed, i))
            .total_cost,
            i,
        )
        for i, sc in enumerate(scenarios)
    ]
    ranked = sorted(costs, key=lambda t: (-t[0], t[1]))
    return [scenarios[i] for _, i in ranked[:k]]


def run_benchmark(
    policy_specs: list[str],
    scenarios: list[Scenario],
    g: RoadGraph,
    run_cfg: RunConfig,
    workers: int | None = None,
) -> BenchReport:
    """Simulate every (policy, scenario) pair and aggregate exact metrics.

    Each cell gets a fresh policy instance and a seed derived from (run seed,
    policy index, scenario index), so results do not depend on execution
    order or the worker count.
    """
    if not scenarios:
        raise ValueError("benchmark needs at least one scenario")
    for spec in policy_specs:
        parse_policy_spec(spec)
        # configuration problems (bad spec, missing endpoint/script) abort
        # the run up front; only runtime failures become partial rows
        make_policy(spec, run_cfg, scenarios[0].load_level)

    cells = [
        (pi, si) for pi in range(len(policy_specs)) for si in range(len(scenarios))
    ]

    def run_cell(cell: tuple[int, int]):
        pi, si = cell
        sc = scenarios[si]
        policy = make_policy(policy_specs[pi], run_cfg, sc.load_level)
        sim_seed = derive_seed(NS_BENCH, run_cfg.seed, pi, si)
        try:
            res = simulate(sc, policy, g, run_cfg.agents, seed=sim_seed)
            return cell, res.total_cost, res.hallucination_count, None
        except SimulationError as exc:
            return cell, None, None, str(exc)

    n_workers = workers if workers is not None else run_cfg.workers
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(c) for c in cells]

    by_cell = {cell: (cost, hall, err) for cell, cost, hall, err in results}
    rows = []
    for pi, spec in enumerate(policy_specs):
        label, version = parse_policy_spec(spec)
        row = BenchRow(
            spec=spec,
            policy=label,
            version=version,
            per_scenario_costs=[],
            per_scenario_hallucinations=[],
        )
        for si in range(len(scenarios)):
            cost, hall, err = by_cell[(pi, si)]
            row.per_scenario_costs.append(cost)
            row.per_scenario_hallucinations.append(hall)
            if err is not None:
                row.errors[si] = err
        rows.append(row)

    levels = sorted({sc.load_level for sc in scenarios})
    metadata = {
        "map_id": g.map_id,
        "load_level": levels[0] if len(levels) == 1 else levels,
        "horizon": scenarios[0].horizon,
        "agents": run_cfg.agents,
        "seed": run_cfg.seed,
        "mc_samples": run_cfg.mc_samples,
        "t_h": run_cfg.t_h,
        "scenario_seeds": [sc.seed for sc in scenarios],
        "policies": list(policy_specs),
    }
    return BenchReport(metadata=metadata, rows=rows)


def mc_sweep(
    base_spec: str,
    scenarios: list[Scenario],
    mc_list: list[int],
    g: RoadGraph,
    run_cfg: RunConfig,
    out_dir: str | Path | None = None,
) -> list[tuple[int, float]]:
    """Mean rollout cost per MC sample count, with common scenario seeds.

    Cell seeds do not depend on the sample count, so smaller-mc runs share
    their futures with larger ones (nested common random numbers).
    """
    if mc_list != sorted(mc_list) or len(set(mc_list)) != len(mc_list):
        raise ValueError(f"mc_list must be strictly ascending: {mc_list}")
    curve: list[tuple[int, float]] = []
    for mc in mc_list:
        costs = []
        for si, sc in enumerate(scenarios):
            cfg_run = _with_mc(run_cfg, mc)
            policy = make_policy(f"rollout:{base_spec}", cfg_run, sc.load_level)
            sim_seed = derive_seed(NS_BENCH, run_cfg.seed, 0, si)
            costs.append(
                simulate(sc, policy, g, run_cfg.agents, seed=sim_seed).total_cost
            )
        curve.append((mc, sum(costs) / len(costs)))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        doc = {
            "base": base_spec,
            "map_id": g.map_id,
            "t_h": run_cfg.t_h,
            "seed": run_cfg.seed,
            "scenario_seeds": [sc.seed for sc in scenarios],
            "curve": [{"mc_samples": mc, "mean_cost": cost} for mc, cost in curve],
        }
        (out / "sweep.json").write_text(json.dumps(doc, indent=2) + "\n")
        (out / "sweep.csv").write_text(
            "mc_samples,mean_cost\n"
            + "".join(f"{mc},{cost:.4f}\n" for mc, cost in curve)
        )
        figures.save_mc_curve(
            curve, f"rollout:{base_spec} cost vs MC futures", out / "sweep.png"
        )
    return curve


def _with_mc(run_cfg: RunConfig, mc: int) -> RunConfig:
    import dataclasses

    return dataclasses.replace(run_cfg, mc_samples=mc)


def export_finetune_data(
    scenarios: list[Scenario],
    base_spec: str,
    g: RoadGraph,
    run_cfg: RunConfig,
    out_path: str | Path,
) -> int:
    """Write one chat record per (decision step, non-forced agent).

    The user turn renders the state plus other agents' actions exactly as the
    live prompt builder does (known actions for earlier agents, base-policy
    expectations for later ones); the assistant turn is the serialized
    one-at-a-time rollout control for that agent.
    """
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    system = build_system_prompt(g)
    count = 0
    with out_path.open("w") as fh:
        for si, sc in enumerate(scenarios):
            policy = make_policy(f"rollout:{base_spec}", run_cfg, sc.load_level)
            assert isinstance(policy, RolloutPolicy)
            sim_seed = derive_seed(NS_BENCH, run_cfg.seed, 0, si)
            result = simulate(sc, policy, g, run_cfg.agents, seed=sim_seed)
            base = policy.cfg.base
            for state, joint in result.trace:
                suffix = base.joint_decide(state, g)
                for agent in range(state.num_agents):
                    if len(local_controls(state, g, agent)) <= 1:
                        continue  # forced control, nothing to learn
                    user = build_user_prompt(
                        state, g, agent,
                        fixed=joint[:agent],
                        suggested=suffix[agent + 1:],
                    )
                    record = {
                        "messages": [
                            {"role": "system", "content": system.content},
                            {"role": "user", "content": user.content},
                            {
                                "role": "assistant",
                                "content": render_action(joint[agent]),
                            },
                        ],
                        "map_id": g.map_id,
                        "load_level": sc.load_level,
                        "scenario_seed": sc.seed,
                        "scenario_index": si,
                        "sim_seed": sim_seed,
                        "step": state.clock,
                        "agent": agent,
                        "base": base_spec,
                        "mc_samples": run_cfg.mc_samples,
                        "t_h": run_cfg.t_h,
                    }
                    fh.write(json.dumps(record) + "\n")
                    count += 1
    return count


def verify_trace_file(
    trace_path: str | Path, scenario: Scenario, g: RoadGraph, num_agents: int
) -> int:
    """Replay an exported trace against the scenario; returns steps verified.

    Raises SimulationError on any digest, action, or cost mismatch.
    """
    from .fleet import AgentAction

    records = [
        json.loads(line)
        for line in Path(trace_path).read_text().splitlines()
        if line.strip()
    ]
    header = records[0]
    steps = [r for r in records if "action" in r]
    summary = records[-1]
    if header.get("map_id") != g.map_id:
        raise SimulationError(
            f"trace is for map {header.get('map_id')!r}, got {g.map_id!r}"
        )
    actions = {
        r["k"]: tuple(AgentAction(p, bool(f)) for p, f in r["action"]) for r in steps
    }
    digests = {r["k"]: r["state"] for r in steps}

    class _TraceReplay(ReplayPolicy):
        def __init__(self):
            self.name = "replay"
            self._by_clock = actions

    result = simulate(scenario, _TraceReplay(), g, num_agents)
    for state, _ in result.trace:
        want = digests.get(state.clock)
        if want is not None and want != state.digest():
            raise SimulationError(f"state digest mismatch at step {state.clock}")
    if summary.get("total_cost") != result.total_cost:
        raise SimulationError(
            f"trace cost {summary.get('total_cost')} != replayed "
            f"{result.total_cost}"
        )
    return len(steps)
