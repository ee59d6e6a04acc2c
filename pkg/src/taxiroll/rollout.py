"""One-at-a-time rollout with certainty-equivalence Monte Carlo lookahead.

Each decision draws a single set of sampled futures shared by every agent and
candidate (common random numbers), then optimizes agents sequentially:
earlier agents' chosen actions stay fixed, later agents follow the base
policy.  Candidate Q values are exact integer sums over the shared futures,
so comparisons and tie-breaks never touch floating point.

Online play is the same machinery with an externally supplied (e.g. learned)
policy as the base; it gets its own entry point so benchmarks can label the
"Base" and "Rollout" versions of a method separately.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._kernels import BASE_GREEDY, BASE_IARA, lookahead_total
from .demand import CeFutureSampler, DemandModel, Request, shift_future
from .fleet import (
    AgentAction,
    FleetState,
    JointAction,
    Policy,
    local_controls,
    stage_cost,
    step,
)
from .policies import BasePolicy, PolicyIncident
from .roadgraph import RoadGraph
from .seeding import derive_seed

#: Synthetic req_id offset for lookahead-injected future requests.
FUTURE_ID_BASE = 1_000_000

_KERNEL_BASE_IDS = {"greedy": BASE_GREEDY, "ia-ra": BASE_IARA}


@dataclass
class RolloutConfig:
    """Knobs for one-at-a-time rollout.

    ``cost_scale`` multiplies every stage cost inside the lookahead; the
    chosen actions are invariant to it (argmin scale-invariance) and it
    exists so that property can be exercised.  ``use_kernel=None`` selects
    the compiled path automatically whenever the base policy has a kernel
    implementation.
    """

    base: Policy
    model: DemandModel
    mc_samples: int = 200
    t_h: int = 10
    agent_order: tuple[int, ...] | None = None
    cost_scale: int = 1
    use_kernel: bool | None = None

    def __post_init__(self) -> None:
        if self.mc_samples < 1:
            raise ValueError(f"mc_samples must be >= 1: {self.mc_samples}")
        if self.t_h < 1:
            raise ValueError(f"t_h must be >= 1: {self.t_h}")
        if self.cost_scale < 1:
            raise ValueError(f"cost_scale must be >= 1: {self.cost_scale}")


@dataclass(frozen=True)
class QEstimate:
    """Mean lookahead cost of one candidate action over the shared futures."""

    action: AgentAction
    mean_cost: Fraction
    sample_count: int


@dataclass
class DecisionStats:
    """Instrumentation for a single rollout decision."""

    q_calls: int = 0
    q_tables: dict[int, list[QEstimate]] = field(default_factory=dict)
    incidents: list[PolicyIncident] = field(default_factory=list)


def _compose(
    num_agents: int,
    chosen: dict[int, AgentAction],
    agent: int,
    candidate: AgentAction,
    suffix: JointAction,
) -> JointAction:
    return tuple(
        chosen[j]
        if j in chosen
        else (candidate if j == agent else suffix[j])
        for j in range(num_agents)
    )


def _futures_arrays(
    futures: list[tuple[Request, ...]],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    n_fut = len(futures)
    width = max((len(f) for f in futures), default=0)
    fut_entry = np.zeros((n_fut, width), dtype=np.int32)
    fut_pick = np.zeros((n_fut, width), dtype=np.int32)
    fut_drop = np.zeros((n_fut, width), dtype=np.int32)
    fut_len = np.zeros(n_fut, dtype=np.int32)
    return fut_entry, fut_pick, fut_drop, fut_len


class _KernelContext:
    """Dense-array view of one decision state plus its shared futures."""

    def __init__(
        self,
        state: FleetState,
        futures: list[tuple[Request, ...]],
        g: RoadGraph,
    ) -> None:
        idx = g.index_of
        m = state.num_agents
        self.index_of = idx
        self.dist = g.paths.dist
        self.nxt = g.paths.next_hop
        self.pos = np.array([idx[a.position] for a in state.agents], dtype=np.int32)
        self.rem = np.array([a.remaining_time for a in state.agents], dtype=np.int32)
        self.dest = np.array(
            [idx[a.destination] if a.destination is not None else -1 for a in state.agents],
            dtype=np.int32,
        )
        self.opick = np.array(
            [idx[r.pickup] for r in state.outstanding], dtype=np.int32
        )
        self.odrop = np.array(
            [idx[r.dropoff] for r in state.outstanding], dtype=np.int32
        )
        self.n_out = len(state.outstanding)
        fe, fp, fd, fl = _futures_arrays(futures)
        for i, future in enumerate(futures):
            fl[i] = len(future)
            for k, r in enumerate(future):
                fe[i, k] = r.entry_time
                fp[i, k] = idx[r.pickup]
                fd[i, k] = idx[r.dropoff]
        self.fut_entry, self.fut_pick, self.fut_drop, self.fut_len = fe, fp, fd, fl
        self.fpos = np.empty(m, dtype=np.int32)
        self.fflag = np.empty(m, dtype=np.int32)

    def total(self, composed: JointAction, cfg: RolloutConfig, base_id: int) -> int:
        for j, act in enumerate(composed):
            self.fpos[j] = self.index_of[act.next_position]
            self.fflag[j] = 1 if act.pickup else 0
        return int(
            lookahead_total(
                self.dist,
                self.nxt,
                self.pos,
                self.rem,
                self.dest,
                self.opick,
                self.odrop,
                self.n_out,
                self.fpos,
                self.fflag,
                self.fut_entry,
                self.fut_pick,
                self.fut_drop,
                self.fut_len,
                cfg.t_h,
                base_id,
                cfg.cost_scale,
            )
        )


def _lookahead_total_reference(
    state: FleetState,
    composed: JointAction,
    future: tuple[Request, ...],
    cfg: RolloutConfig,
    g: RoadGraph,
) -> int:
    """Pure-Python lookahead for arbitrary base policies."""
    injected = shift_future(future, state.clock, FUTURE_ID_BASE)
    by_time: dict[int, list[Request]] = {}
    for r in injected:
        by_time.setdefault(r.entry_time, []).append(r)
    cur = step(state, composed, by_time.get(state.clock + 1, []), g)
    total = stage_cost(cur)
    for _ in range(cfg.t_h - 1):
        action = cfg.base.joint_decide(cur, g)
        cur = step(cur, action, by_time.get(cur.clock + 1, []), g)
        total += stage_cost(cur)
    return total * cfg.cost_scale


def _kernel_eligible(cfg: RolloutConfig) -> bool:
    has_kernel = getattr(cfg.base, "kernel_id", None) in (BASE_GREEDY, BASE_IARA)
    if cfg.use_kernel is None:
        return has_kernel
    if cfg.use_kernel and not has_kernel:
        raise ValueError(
            f"base policy {getattr(cfg.base, 'name', cfg.base)!r} has no "
            "kernel implementation; use_kernel must be False or None"
        )
    return cfg.use_kernel


def decision_futures(
    state: FleetState, cfg: RolloutConfig, g: RoadGraph, seed: int
) -> list[tuple[Request, ...]]:
    """The shared certainty-equivalence futures for one decision."""
    sampler = CeFutureSampler(cfg.model, g, cfg.t_h, family_seed=seed)
    return [sampler.sample(i) for i in range(cfg.mc_samples)]


def q_estimate(
    state: FleetState,
    agent: int,
    action: AgentAction,
    fixed: tuple[AgentAction, ...],
    cfg: RolloutConfig,
    futures: list[tuple[Request, ...]],
    g: RoadGraph,
    suffix: JointAction | None = None,
) -> QEstimate:
    """Mean truncated cost of taking ``action`` as agent ``agent``.

    Agents before ``agent`` play ``fixed``; later agents play the base
    policy's own joint decision at the current state (pass ``suffix`` to
    reuse one already computed).
    """
    if suffix is None:
        suffix = cfg.base.joint_decide(state, g)
    chosen = {j: fixed[j] for j in range(len(fixed))}
    composed = _compose(state.num_agents, chosen, agent, action, suffix)
    if _kernel_eligible(cfg):
        ctx = _KernelContext(state, futures, g)
        total = ctx.total(composed, cfg, getattr(cfg.base, "kernel_id"))
    else:
        total = sum(
            _lookahead_total_reference(state, composed, f, cfg, g) for f in futures
        )
    return QEstimate(
        action=action,
        mean_cost=Fraction(total, len(futures)),
        sample_count=len(futures),
    )


def rollout_decide(
    state: FleetState,
    cfg: RolloutConfig,
    g: RoadGraph,
    seed: int,
    stats: DecisionStats | None = None,
) -> JointAction:
    """One-at-a-time rollout decision at one state.

    A single futures set is drawn per decision and shared by all agents and
    candidates; agents with a forced (singleton) control set are fixed
    without any Monte Carlo evaluation.  Candidate ties break toward the
    earlier entry in the local control ordering.
    """
    m = state.num_agents
    order = cfg.agent_order if cfg.agent_order is not None else tuple(range(m))
    if sorted(order) != list(range(m)):
        raise ValueError(f"agent_order must be a permutation of 0..{m - 1}: {order}")

    base = cfg.base
    base.drain_incidents()
    suffix = base.joint_decide(state, g)
    kept_incidents = list(base.drain_incidents())

    futures = decision_futures(state, cfg, g, seed)
    use_kernel = _kernel_eligible(cfg)
    ctx = _KernelContext(state, futures, g) if use_kernel else None
    base_id = getattr(base, "kernel_id", -1)

    chosen: dict[int, AgentAction] = {}
    for agent in order:
        controls = local_controls(state, g, agent)
        if len(controls) == 1:
            chosen[agent] = controls[0]
            continue
        totals: list[int] = []
        for candidate in controls:
            composed = _compose(m, chosen, agent, candidate, suffix)
            if ctx is not None:
                total = ctx.total(composed, cfg, base_id)
            else:
                total = sum(
                    _lookahead_total_reference(state, composed, f, cfg, g)
                    for f in futures
                )
            totals.append(total)
        best = min(range(len(controls)), key=lambda c: (totals[c], c))
        chosen[agent] = controls[best]
        if stats is not None:
            stats.q_calls += len(controls)
            stats.q_tables[agent] = [
                QEstimate(controls[c], Fraction(totals[c], len(futures)), len(futures))
                for c in range(len(controls))
            ]
    base.drain_incidents()  # discard lookahead-internal noise
    if stats is not None:
        stats.incidents.extend(kept_incidents)
    return tuple(chosen[j] for j in range(m))


def online_play_decide(
    state: FleetState,
    cfg: RolloutConfig,
    g: RoadGraph,
    seed: int,
    stats: DecisionStats | None = None,
) -> JointAction:
    """Rollout over an externally supplied (learned/adapter) base policy.

    Identical machinery to :func:`rollout_decide`; named separately so
    benchmark reports can distinguish "Base" from "Rollout" rows.
    """
    return rollout_decide(state, cfg, g, seed, stats)


class RolloutPolicy(BasePolicy):
    """Policy wrapper running one rollout decision per simulation step.

    Per-decision futures are seeded from (policy seed, state clock), which
    makes trajectories reproducible regardless of when or where decisions
    are evaluated.  Hallucination/incident reports from the base policy are
    kept only for the real-state suffix computation, never for lookahead
    simulations.
    """

    def __init__(self, cfg: RolloutConfig, seed: int = 0, record_q: bool = False):
        self.cfg = cfg
        self.name = f"rollout:{cfg.base.name}"
        self._seed = seed
        self.record_q = record_q
        self.q_calls = 0
        self.decision_log: list[tuple[int, DecisionStats]] = []
        self._incidents: list[PolicyIncident] = []

    def reseed(self, seed: int) -> None:
        self._seed = seed
        self.cfg.base.reseed(seed)

    def joint_decide(self, state: FleetState, g: RoadGraph) -> JointAction:
        stats = DecisionStats()
        action = rollout_decide(
            state, self.cfg, g, derive_seed(self._seed, state.clock), stats
        )
        self.q_calls += stats.q_calls
        self._incidents.extend(stats.incidents)
        if self.record_q:
            self.decision_log.append((state.clock, stats))
        return action

    def drain_incidents(self) -> list[PolicyIncident]:
        out = self._incidents
        self._incidents = []
        return out
