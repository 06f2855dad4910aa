import numpy as np
import pytest

from tschsim.channel import LinkChannelDistribution
from tschsim.engine import (ConfigError, MetricsSeries, SimulationConfig, build_scenario,
                            compute_optimal_mean, desk_scale, edge_weights, evaluate_cycle,
                            link_deliveries, run_cycle, run_replication, run_simulation,
                            update_metrics)
from tschsim.matching import Assignment, build_bipartite
from tschsim.schedulers import PerfectCSIScheduler, StatisticalScheduler

from oracles import brute_force_max_matching


def small(**kw):
    kw.setdefault("n_cycles", 300)
    kw.setdefault("n_replications", 2)
    return desk_scale(**kw)


@pytest.fixture(scope="module")
def scenario():
    return build_scenario(small())


def test_metrics_closed_forms():
    s = MetricsSeries(optimal_mean=5.0)
    update_metrics(s, 1, 3.0)
    assert s.avg_throughput == [3.0] and s.cumulative_regret == [2.0]
    for tau in range(2, 51):
        update_metrics(s, tau, 3.0)
    np.testing.assert_allclose(s.avg_throughput, 3.0)
    np.testing.assert_allclose(s.cumulative_regret, 2.0 * np.arange(1, 51))
    np.testing.assert_allclose(s.avg_regret, 2.0)
    with pytest.raises(ValueError):
        update_metrics(s, 99, 1.0)


def test_running_average_identity():
    rng = np.random.default_rng(0)
    x = rng.random(2000) * 10
    s = MetricsSeries(optimal_mean=4.0)
    for tau, v in enumerate(x, 1):
        update_metrics(s, tau, v)
    a = s.arrays()
    tau = np.arange(1, 2001)
    np.testing.assert_allclose(a["avg_throughput"], np.cumsum(x) / tau, atol=1e-9)
    np.testing.assert_allclose(a["cumulative_regret"], 4.0 * tau - np.cumsum(x), atol=1e-9)
    assert s.packets_per_second()[0] == pytest.approx(x[0] / 0.12)


def test_optimal_mean_matches_brute_force():
    rng = np.random.default_rng(2)
    for n_sets in range(1, 8):
        means = rng.random(n_sets) * 3
        g = build_bipartite(n_sets, 2, 2, means)
        assert compute_optimal_mean(g) == pytest.approx(brute_force_max_matching(g.weights))
    assert compute_optimal_mean(build_bipartite(1, 1, 1, [2.0])) == 2.0


def test_scenario_shape(scenario):
    assert scenario.model.n_links == 18
    assert scenario.problem.n_sets == len(scenario.catalog) <= 64
    assert scenario.n_edges == scenario.problem.n_sets * 6
    np.testing.assert_allclose(scenario.problem.set_means,
                               scenario.membership @ scenario.model.link_means())
    assert scenario.problem.normalization_max == pytest.approx(
        scenario.model.max_capacity() * scenario.catalog.max_size)


def test_desk_scale_seeds_and_scenario_overflow():
    from tschsim.topology import CatalogOverflow
    with pytest.raises(CatalogOverflow):
        build_scenario(desk_scale(seed=0))


def test_cycle_reward_matches_link_deliveries(scenario):
    rng = np.random.default_rng(1)
    sched = PerfectCSIScheduler().fit(scenario.problem)
    u_max = scenario.problem.normalization_max
    for _ in range(50):
        real = scenario.model.sample_cycle(rng)
        w, link_rate = edge_weights(scenario, real)
        a = sched.predict(w)
        rewards, total = evaluate_cycle(a, w, u_max)
        assert total == pytest.approx(rewards.sum())
        assert total * u_max == pytest.approx(link_deliveries(scenario, a, link_rate).sum())
        assert total * u_max == pytest.approx(a.total_weight)


def test_run_cycle_paths_agree(scenario):
    sched = StatisticalScheduler().fit(scenario.problem)
    thr, rewards = run_cycle(scenario, sched, np.random.default_rng(4))
    assert thr == pytest.approx(rewards.sum() * scenario.problem.normalization_max)
    assert link_deliveries(scenario, Assignment.empty(), None).sum() == 0.0


def test_link_rewards_average_to_means(scenario):
    rng = np.random.default_rng(6)
    n = 10_000
    draws = np.stack([scenario.model.link_capacity(scenario.model.sample_cycle(rng))
                      for _ in range(n)])                      # (cycles, links, slots)
    x = draws.transpose(0, 2, 1).reshape(-1, scenario.model.n_links)
    se = x.std(axis=0, ddof=1) / np.sqrt(len(x))
    assert np.all(np.abs(x.mean(axis=0) - scenario.model.link_means()) <= 3 * se)
    # set rates are sums of member links, so their means follow
    w, _ = edge_weights(scenario, scenario.model.sample_cycle(rng))
    assert w.shape == (scenario.problem.n_sets, scenario.problem.n_cells)


def test_point_mass_channels_give_zero_regret(tmp_path):
    cfg = small(policies=("statistical", "perfect_csi"))
    base = build_scenario(cfg)
    pmf = np.zeros((base.model.n_links, 2, 8))
    pmf[:, :, 4] = 1.0
    p = tmp_path / "pmf.txt"
    LinkChannelDistribution(pmf).save(p)
    res = run_simulation(cfg.with_(distributions_path=str(p), n_cycles=20, n_replications=1))
    for k in ("statistical", "perfect_csi"):
        np.testing.assert_allclose(res.series[k].cumulative_regret, 0.0, atol=1e-9)
    link = res.scenario.model.state_capacity[4]
    assert res.series["statistical"].overall_throughput[0] == pytest.approx(
        link * res.scenario.optimal_mean / link)


def test_distribution_file_dimension_check(tmp_path):
    p = tmp_path / "pmf.txt"
    LinkChannelDistribution(np.full((3, 2, 8), 1 / 8)).save(p)
    with pytest.raises(ConfigError):
        build_scenario(small(distributions_path=str(p)))


def test_optimal_mean_bounds_non_oracle_policies():
    cfg = small(policies=("statistical", "static_csi", "perfect_csi"), n_cycles=200,
                n_replications=50)
    res = run_simulation(cfg)
    u_star = res.scenario.optimal_mean
    for k in ("statistical", "static_csi"):
        m = res.mean_throughput(k)
        assert m.mean() <= u_star + 3 * m.std(ddof=1) / np.sqrt(len(m))
    # knowing the realization beats the mean-optimal matching
    assert res.mean_throughput("perfect_csi").mean() > u_star


def test_single_replication_series_is_the_run(scenario):
    cfg = small(n_replications=1, policies=("statistical", "erroneous_csi"))
    res = run_simulation(cfg, scenario=scenario)
    _, _, rep_root = np.random.SeedSequence(cfg.seed).spawn(3)
    overall, _, _ = run_replication(cfg, scenario, rep_root.spawn(1)[0])
    for k in cfg.policies:
        np.testing.assert_array_equal(res.series[k].overall_throughput, overall[k])


def test_simulation_is_deterministic(scenario):
    cfg = small()
    a = run_simulation(cfg, scenario=scenario)
    b = run_simulation(cfg, scenario=scenario)
    for k in cfg.policies:
        np.testing.assert_array_equal(a.overall[k], b.overall[k])


def test_common_random_numbers_across_policy_sets(scenario):
    a = run_simulation(small(policies=("statistical",)), scenario=scenario)
    b = run_simulation(small(policies=("statistical", "erroneous_csi")), scenario=scenario)
    np.testing.assert_array_equal(a.overall["statistical"], b.overall["statistical"])


def test_learner_needs_enough_cycles(scenario):
    with pytest.raises(ConfigError, match="n_cycles"):
        run_simulation(small(n_cycles=100), scenario=scenario)


def test_link_throughput_sums_to_mean(scenario):
    res = run_simulation(small(policies=("statistical",)), scenario=scenario)
    s = res.series["statistical"]
    assert s.link_throughput.shape == (18,)
    assert s.link_throughput.sum() == pytest.approx(s.avg_throughput[-1])


@pytest.mark.parametrize("bad", [dict(n_nodes=1), dict(n_slots=0), dict(seed=-1),
                                 dict(policies=()), dict(policies=("bogus",)),
                                 dict(area=(10.0,)), dict(power_mw=0.0),
                                 dict(error_sigma=-0.1)])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        SimulationConfig(**bad)


def test_config_defaults():
    c = SimulationConfig()
    assert (c.n_nodes, c.n_slots, c.n_channels, c.power_mw, c.packet_bits, c.slot_ms) == \
        (35, 8, 3, 10.0, 5000.0, 15.0)
    assert c.radio().beta == 5000.0
    assert "seed" in SimulationConfig.field_names()
