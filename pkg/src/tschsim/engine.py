"""Slot-frame cycle simulation, throughput averages and regret."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .channel import (ChannelModel, ChannelStateSpace, LinkChannelDistribution,
                      RadioParams, generate_distributions)
from .matching import Assignment, hungarian_max_weight
from .schedulers import (POLICY_KINDS, CMABScheduler, PolicyConfig,
                         SchedulingProblem)
from .topology import (build_collision_graph, enumerate_independent_sets,
                       generate_topology, load_topology)
from .validation import as_generator, check_positive

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass
class SimulationConfig:
    n_nodes: int = 35
    area: tuple[float, float] = (100.0, 100.0)
    comm_range: float = 20.0
    interference_range: float = 100.0
    n_slots: int = 8
    n_channels: int = 3
    power_mw: float = 10.0
    beta_n0: float = 2.0
    packet_bits: float = 5000.0
    beta: float | None = None
    slot_ms: float = 15.0
    policies: tuple[str, ...] = POLICY_KINDS
    error_sigma: float | None = None
    exploration: float | None = None
    n_cycles: int = 1000
    n_replications: int = 10
    seed: int = 0
    catalog_cap: int = 8192
    topology_path: str | None = None
    distributions_path: str | None = None

    def __post_init__(self):
        self.policies = tuple(self.policies)
        self.area = tuple(float(a) for a in self.area)
        self.validate()

    def validate(self):
        try:
            for name in ("n_nodes", "n_slots", "n_channels", "n_cycles", "n_replications",
                         "catalog_cap"):
                check_positive(getattr(self, name), name, integer=True)
            for name in ("comm_range", "interference_range", "power_mw", "beta_n0",
                         "packet_bits", "slot_ms"):
                check_positive(getattr(self, name), name)
            if self.beta is not None:
                check_positive(self.beta, "beta")
            if len(self.area) != 2:
                raise ValueError("area must be (width, height)")
            for a in self.area:
                check_positive(a, "area")
            if self.n_nodes < 2:
                raise ValueError("n_nodes must be >= 2")
            if self.error_sigma is not None:
                check_positive(self.error_sigma, "error_sigma", allow_zero=True)
            if self.exploration is not None:
                check_positive(self.exploration, "exploration", allow_zero=True)
            if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
                raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")
            if not self.policies:
                raise ValueError("need at least one policy")
            for p in self.policies:
                if p not in POLICY_KINDS:
                    raise ValueError(f"unknown policy {p!r}")
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def radio(self):
        return RadioParams(power_mw=self.power_mw, beta_n0=self.beta_n0,
                           packet_bits=self.packet_bits, beta=self.beta,
                           slot_ms=self.slot_ms, n_frequencies=self.n_channels,
                           n_slots=self.n_slots)

    def with_(self, **changes):
        return replace(self, **changes)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class Scenario:
    """Everything fixed across replications: network, catalog, channels."""

    topology: object
    collision: object
    catalog: object
    model: ChannelModel
    problem: SchedulingProblem
    membership: np.ndarray
    optimal_mean: float

    @property
    def n_edges(self):
        return self.problem.n_edges


def build_scenario(config, space=None):
    """Topology, catalog and channel model derived from ``config.seed``."""
    topo_ss, dist_ss, _ = np.random.SeedSequence(config.seed).spawn(3)
    space = space or ChannelStateSpace()
    if config.topology_path:
        topo = load_topology(config.topology_path)
    else:
        topo = generate_topology(config.n_nodes, config.area, config.comm_range,
                                 config.interference_range, seed=topo_ss)
    q = build_collision_graph(topo)
    catalog = enumerate_independent_sets(q, max(config.catalog_cap, topo.n_links))
    params = config.radio()
    if config.distributions_path:
        dist = LinkChannelDistribution.load(config.distributions_path)
        if dist.n_links != topo.n_links or dist.n_frequencies != config.n_channels:
            raise ConfigError(
                f"distribution file has {dist.n_links} links x {dist.n_frequencies} "
                f"frequencies, scenario needs {topo.n_links} x {config.n_channels}")
    else:
        dist = generate_distributions(topo.n_links, space, config.n_channels, seed=dist_ss)
    model = ChannelModel(dist, space, params)
    member = catalog.membership()
    set_means = member.astype(float) @ model.link_means()
    u_max = model.max_capacity() * catalog.max_size
    problem = SchedulingProblem(len(catalog), config.n_slots, config.n_channels, u_max, set_means)
    u_star = compute_optimal_mean(problem.graph())
    return Scenario(topo, q, catalog, model, problem, member, u_star)


def compute_optimal_mean(graph):
    """Best expected throughput per slot-frame: the matching optimum on mean weights."""
    return hungarian_max_weight(graph.weights).total_weight


@dataclass
class MetricsSeries:
    """Per-cycle throughput and regret of one policy.

    Throughputs are packets per slot-frame (summed over the cells of one
    slot-frame repetition).
    """

    optimal_mean: float
    slot_ms: float = 15.0
    n_slots: int = 8
    cycle: list = field(default_factory=list)
    overall_throughput: list = field(default_factory=list)
    avg_throughput: list = field(default_factory=list)
    cumulative_regret: list = field(default_factory=list)
    avg_regret: list = field(default_factory=list)
    link_throughput: np.ndarray | None = None

    def __len__(self):
        return len(self.cycle)

    def arrays(self):
        return {k: np.asarray(getattr(self, k), dtype=float) for k in
                ("cycle", "overall_throughput", "avg_throughput", "cumulative_regret", "avg_regret")}

    def packets_per_second(self):
        """Average throughput in packets per second (``avg_throughput`` per slot-frame time)."""
        frame_s = self.n_slots * self.slot_ms / 1000.0
        return np.asarray(self.avg_throughput) / frame_s


def update_metrics(series, tau, overall, optimal_mean=None):
    """Append cycle ``tau`` using the running-average recursion."""
    u_star = series.optimal_mean if optimal_mean is None else optimal_mean
    if tau != len(series) + 1:
        raise ValueError(f"expected cycle {len(series) + 1}, got {tau}")
    prev_avg = series.avg_throughput[-1] if series.avg_throughput else 0.0
    prev_reg = series.cumulative_regret[-1] if series.cumulative_regret else 0.0
    avg = (1.0 - 1.0 / tau) * prev_avg + overall / tau
    reg = prev_reg + u_star - overall
    series.cycle.append(tau)
    series.overall_throughput.append(float(overall))
    series.avg_throughput.append(avg)
    series.cumulative_regret.append(reg)
    series.avg_regret.append(reg / tau)
    return series


def edge_weights(scenario, realization):
    """Realized packets per slot for every (set, cell) edge, plus link-level rates."""
    link_rate = scenario.model.link_capacity(realization)          # (links, slots)
    set_rate = scenario.membership @ link_rate                      # (sets, slots)
    cell_slot = np.arange(scenario.problem.n_cells) // scenario.problem.n_channels
    return set_rate[:, cell_slot], link_rate


def evaluate_cycle(assignment, weights, normalization_max):
    """Normalized per-edge rewards of ``assignment`` and their total."""
    rewards = np.asarray(weights)[assignment.sets, assignment.cells] / normalization_max
    return rewards, float(rewards.sum())


def link_deliveries(scenario, assignment, link_rate):
    """Packets each physical link delivered under ``assignment`` this cycle."""
    if len(assignment) == 0:
        return np.zeros(scenario.model.n_links)
    slots = assignment.cells // scenario.problem.n_channels
    return (scenario.membership[assignment.sets] * link_rate[:, slots].T).sum(axis=0)


def run_cycle(scenario, scheduler, rng):
    """Sample one cycle, apply ``scheduler`` and feed back its rewards.

    Returns the throughput in packets per slot-frame and the normalized
    per-edge rewards.
    """
    realization = scenario.model.sample_cycle(rng)
    w, link_rate = edge_weights(scenario, realization)
    a = scheduler.predict(w if scheduler.needs_realization else None)
    rewards, _ = evaluate_cycle(a, w, scenario.problem.normalization_max)
    if scheduler.learns:
        scheduler.partial_fit(a, rewards)
    return float(link_deliveries(scenario, a, link_rate).sum()), rewards


@dataclass
class SimulationResult:
    """Replication-averaged series plus per-replication throughput traces."""

    config: SimulationConfig
    scenario: Scenario
    series: dict
    overall: dict
    learners: list = field(default_factory=list)

    def mean_throughput(self, policy, last=None):
        """Per-replication mean throughput over all cycles (or the ``last`` ones)."""
        x = self.overall[policy]
        return x[:, -last:].mean(axis=1) if last else x.mean(axis=1)


def _make_policies(config, scenario, rng_noise, record):
    out = {}
    for kind in config.policies:
        pc = PolicyConfig(kind, error_sigma=config.error_sigma,
                          normalization_max=scenario.problem.normalization_max,
                          exploration=config.exploration)
        sched = pc.build(random_state=rng_noise)
        if isinstance(sched, CMABScheduler):
            sched.set_params(record_rewards=record)
        out[kind] = sched.fit(scenario.problem)
    return out


def run_replication(config, scenario, seed, record=False):
    """One independent run of every configured policy on shared channel draws."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    ch_ss, noise_ss = seed.spawn(2)
    rng = as_generator(ch_ss)
    policies = _make_policies(config, scenario, as_generator(noise_ss), record)
    K = config.n_cycles
    u_max = scenario.problem.normalization_max
    overall = {k: np.empty(K) for k in policies}
    links = {k: np.zeros(scenario.model.n_links) for k in policies}
    for tau in range(K):
        realization = scenario.model.sample_cycle(rng)
        w, link_rate = edge_weights(scenario, realization)
        for kind, sched in policies.items():
            a = sched.predict(w if sched.needs_realization else None)
            rewards, _ = evaluate_cycle(a, w, u_max)
            if sched.learns:
                sched.partial_fit(a, rewards)
            per_link = link_deliveries(scenario, a, link_rate)
            links[kind] += per_link
            overall[kind][tau] = per_link.sum()
    learners = {k: s for k, s in policies.items() if s.learns}
    return overall, {k: v / K for k, v in links.items()}, learners


def run_simulation(config, *, record=False, scenario=None):
    """Replicate ``config`` and average the per-cycle metrics across runs."""
    scenario = scenario or build_scenario(config)
    if "cmab_llr" in config.policies and config.n_cycles < scenario.n_edges:
        raise ConfigError(
            f"cmab_llr needs n_cycles >= {scenario.n_edges} (one initialization cycle per "
            f"bipartite edge: {scenario.problem.n_sets} sets x {scenario.problem.n_cells} cells); "
            f"got {config.n_cycles}")
    log.info("scenario: %d links, %d sets, %d edges, U*=%.4f", scenario.model.n_links,
             scenario.problem.n_sets, scenario.n_edges, scenario.optimal_mean)
    _, _, rep_root = np.random.SeedSequence(config.seed).spawn(3)
    R, K = config.n_replications, config.n_cycles
    overall = {k: np.empty((R, K)) for k in config.policies}
    links = {k: np.zeros(scenario.model.n_links) for k in config.policies}
    learners = []
    for r, rep_ss in enumerate(rep_root.spawn(R)):
        o, l, lrn = run_replication(config, scenario, rep_ss, record=record)
        for k in config.policies:
            overall[k][r] = o[k]
            links[k] += l[k]
        learners.append(lrn)
    series = {}
    u_star = scenario.optimal_mean
    for k in config.policies:
        mean_overall = overall[k].mean(axis=0)
        s = MetricsSeries(u_star, config.slot_ms, config.n_slots)
        for tau, x in enumerate(mean_overall, 1):
            update_metrics(s, tau, x)
        s.link_throughput = links[k] / R
        series[k] = s
    return SimulationResult(config, scenario, series, overall, learners)


def desk_scale(**overrides):
    """Small scenario (8 nodes, 2 channels, 3 slots) whose catalog stays <= 64 sets."""
    base = dict(n_nodes=8, comm_range=40.0, interference_range=60.0, n_slots=3,
                n_channels=2, catalog_cap=64, n_cycles=5000, n_replications=20, seed=2)
    base.update(overrides)
    return SimulationConfig(**base)
