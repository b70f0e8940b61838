import numpy as np
import pytest

from schedtune import cluster as cl
from schedtune import scheduler as sched
from schedtune import simengine as se
from schedtune import workload as wl
from schedtune.errors import ConfigError, UnschedulableError
from tests.conftest import make_function


def _two_xeon_cluster():
    # cloud_cpu at total=2 apportions both nodes to xeon_cpu
    c = cl.build_cluster(cl.ClusterSpec("cloud_cpu", 2, "internet"))
    assert all(n.device.name == "xeon_cpu" for n in c.nodes)
    return c


def _mini_workload(seed=0, rps=3.0, duration=100.0):
    fns = (make_function(name="alpha", base_exec_s=0.5),
           make_function(name="beta", base_exec_s=0.2))
    return wl.WorkloadSpec(functions=tuple((f, rps) for f in fns),
                           duration_s=duration, seed=seed)


def test_compute_score_midpoint_example():
    metrics = se.BenchmarkMetrics({
        "f": se.FunctionMetrics(mu_fet_s=15.0, mu_wait_s=0.0, n_success=10, n_total=10),
    })
    assert se.compute_score(metrics) == pytest.approx((0.5 + 1.0 + 1.0) / 3.0, abs=1e-12)


def test_compute_score_caps_and_zero_requests():
    metrics = se.BenchmarkMetrics({
        "f": se.FunctionMetrics(mu_fet_s=300.0, mu_wait_s=300.0, n_success=0, n_total=0),
    })
    # capped terms flip to 0; zero totals leave the ratio at 0
    assert se.compute_score(metrics) == 0.0
    assert se.compute_score(se.BenchmarkMetrics({
        "f": se.FunctionMetrics(0.0, 0.0, 5, 5)})) == 1.0


def test_compute_score_averages_over_functions():
    metrics = se.BenchmarkMetrics({
        "a": se.FunctionMetrics(0.0, 0.0, 1, 1),
        "b": se.FunctionMetrics(30.0, 30.0, 0, 4),
    })
    assert se.compute_score(metrics) == pytest.approx((1.0 + 0.0) / 2.0, abs=1e-12)


def test_three_request_golden_trace():
    """Hand-simulated two-node, one-function, three-request timeline."""
    c = _two_xeon_cluster()
    fn = make_function(name="f", cpu=1.0, mem=1024.0,
                       image_bytes=1.25e8, dataset_bytes=6.25e7, base_exec_s=1.0)
    reqs = [wl.Request(fn, 0.0), wl.Request(fn, 0.1), wl.Request(fn, 5.0)]
    opts = se.SimOptions(min_replicas=1, max_replicas=1)
    res = se.simulate_requests(c, [fn], reqs, sched.FIXED_WEIGHTS, opts)

    pull = (0.001 + 0.001) + 1.25e8 / 1.25e8
    fetch = (0.001 + 0.001) + 6.25e7 / 1.25e8
    s1 = 1.0 + pull + fetch          # first touch pays the registry pull
    s2 = 1.0 + fetch
    # request 2 waits for request 1; request 3 arrives at an idle replica
    expected_fet = ((s1 + s2) + s2) / 3
    expected_wait = ((0.0 + (s1 - 0.1)) + 0.0) / 3

    fm = res.metrics.per_function["f"]
    assert fm.n_total == 3
    assert fm.n_success == 3
    assert fm.mu_fet_s == expected_fet
    assert fm.mu_wait_s == expected_wait
    assert res.placements == [se.Placement("f-0", 0, 0.0)]

    m1 = 1.0 - min(max(expected_fet / 30.0, 0.0), 1.0)
    m2 = 1.0 - min(max(expected_wait / 30.0, 0.0), 1.0)
    assert res.score == ((m1 + m2 + 1.0) / 3.0)


def test_requests_after_horizon_do_not_complete():
    c = _two_xeon_cluster()
    fn = make_function(name="f", image_bytes=0.0, dataset_bytes=0.0, base_exec_s=10.0)
    reqs = [wl.Request(fn, 95.0)]
    res = se.simulate_requests(c, [fn], reqs, sched.FIXED_WEIGHTS,
                               se.SimOptions(min_replicas=1, max_replicas=1))
    fm = res.metrics.per_function["f"]
    assert fm.n_total == 1
    assert fm.n_success == 0
    assert fm.mu_fet_s == 0.0


def test_warmup_places_min_replicas_and_commits():
    c = cl.build_cluster(cl.ClusterSpec("cloud_cpu", 10))
    spec = _mini_workload()
    res = se.run_benchmark(c, spec, sched.FIXED_WEIGHTS,
                           se.SimOptions(min_replicas=3, max_replicas=3))
    warm = [p for p in res.placements if p.time_s == 0.0]
    assert len(warm) == 6
    # the input cluster is never mutated
    assert all(n.alloc_cpu == 0.0 for n in c.nodes)


def test_warmup_unschedulable_raises_with_function_name():
    c = cl.build_cluster(cl.ClusterSpec("edge_sbc", 3))
    giant = make_function(name="giant", cpu=1e6, mem=1e9)
    spec = wl.WorkloadSpec(functions=((giant, 1.0),), duration_s=100.0, seed=0)
    with pytest.raises(UnschedulableError) as err:
        se.run_benchmark(c, spec, sched.FIXED_WEIGHTS, se.SimOptions())
    assert err.value.function_name == "giant"


def test_conservation_success_plus_failed_equals_arrivals():
    c = cl.build_cluster(cl.ClusterSpec("edge_cloudlet", 20, seed=4))
    spec = _mini_workload(seed=9, rps=5.0)
    arrivals = wl.generate_arrivals(spec)
    res = se.run_benchmark(c, spec, sched.FIXED_WEIGHTS, se.SimOptions(seed=1))
    per_fn_arrivals = {}
    for r in arrivals:
        per_fn_arrivals[r.function.name] = per_fn_arrivals.get(r.function.name, 0) + 1
    for name, fm in res.metrics.per_function.items():
        assert fm.n_total == per_fn_arrivals.get(name, 0)
        assert 0 <= fm.n_success <= fm.n_total
    assert sum(f.n_total for f in res.metrics.per_function.values()) == len(arrivals)


def test_benchmark_replays_bit_identically():
    c = cl.build_cluster(cl.ClusterSpec("hybrid_balanced", 25, "urban", seed=8))
    spec = _mini_workload(seed=13, rps=8.0)
    opts = se.SimOptions(seed=3, scale_factor=2)
    w = np.array([0.2, 0.8, 0.1, 0.6, 0.9, 0.4, 0.7, 0.3])
    a = se.run_benchmark(c, spec, w, opts)
    b = se.run_benchmark(c, spec, w, opts)
    assert a.score == b.score
    assert a.placements == b.placements
    for name in a.metrics.per_function:
        fa, fb = a.metrics.per_function[name], b.metrics.per_function[name]
        assert (fa.mu_fet_s, fa.mu_wait_s, fa.n_success, fa.n_total) == \
               (fb.mu_fet_s, fb.mu_wait_s, fb.n_success, fb.n_total)


def test_autoscaler_adds_replicas_under_backlog():
    c = cl.build_cluster(cl.ClusterSpec("cloud_cpu", 10))
    fn = make_function(name="slow", image_bytes=0.0, dataset_bytes=0.0, base_exec_s=30.0)
    # a burst of arrivals forces queue > 5x replicas quickly
    reqs = [wl.Request(fn, 0.01 * i) for i in range(1, 30)]
    opts = se.SimOptions(min_replicas=1, max_replicas=8, scale_factor=2)
    res = se.simulate_requests(c, [fn], reqs, sched.FIXED_WEIGHTS, opts)
    scaled = [p for p in res.placements if p.time_s > 0.0]
    assert scaled, "backlog must trigger the autoscaler"
    assert len(res.placements) <= 8


def test_autoscaler_respects_max_replicas():
    c = cl.build_cluster(cl.ClusterSpec("cloud_cpu", 10))
    fn = make_function(name="slow", image_bytes=0.0, dataset_bytes=0.0, base_exec_s=1000.0)
    reqs = [wl.Request(fn, 0.001 * i) for i in range(1, 500)]
    opts = se.SimOptions(min_replicas=1, max_replicas=3, scale_factor=5)
    res = se.simulate_requests(c, [fn], reqs, sched.FIXED_WEIGHTS, opts)
    assert len(res.placements) == 3


def test_score_recomputable_from_metrics():
    c = cl.build_cluster(cl.ClusterSpec("edge_gpu", 15, seed=2))
    spec = _mini_workload(seed=20, rps=4.0)
    opts = se.SimOptions(seed=5)
    res = se.run_benchmark(c, spec, sched.FIXED_WEIGHTS, opts)
    assert res.score == se.compute_score(res.metrics, opts.norm)
    assert 0.0 <= res.score <= 1.0


def test_sim_options_validation():
    with pytest.raises(ConfigError):
        se.SimOptions(min_replicas=0)
    with pytest.raises(ConfigError):
        se.SimOptions(min_replicas=5, max_replicas=4)
    with pytest.raises(ConfigError):
        se.SimOptions(scale_factor=0)
    with pytest.raises(ConfigError):
        se.SimOptions(duration_s=0.0)
    with pytest.raises(ConfigError):
        se.ScoreNorm(fet_cap_s=0.0)


def test_mismatched_horizons_rejected():
    c = _two_xeon_cluster()
    spec = _mini_workload(duration=50.0)
    with pytest.raises(ConfigError):
        se.run_benchmark(c, spec, sched.FIXED_WEIGHTS, se.SimOptions(duration_s=100.0))
