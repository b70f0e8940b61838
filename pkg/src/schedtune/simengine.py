"""Discrete-event benchmark engine for the placement weights.

One benchmark run plays a request trace against a cluster copy:

* Warm-up places ``min_replicas`` pods per function and commits their
  allocations.  Warm-up happens outside the measurement window (placements
  are logged at t=0) but leaves node image caches cold, so the first request
  a replica's node serves still pays the registry pull.
* Each arriving request joins the shortest queue among its function's
  replicas (in-service request counts toward the load, ties go to the oldest
  replica).  Replicas serve strictly FIFO, one request at a time.
* Service time is compute time on the device, plus the image pull on first
  touch of the node, plus the dataset fetch from the nearest data store.
* After a request is enqueued, the autoscaler adds ``scale_factor`` replicas
  for a function whenever its waiting requests (excluding those in service)
  exceed five times its replica count, capped by ``max_replicas`` and by
  feasibility.
* A request is successful iff it completes strictly before ``duration_s``.

The resulting per-function metrics feed a score in [0, 1]: the mean over
functions of the mean of three terms -- capped-and-flipped mean execution
time, capped-and-flipped mean queue wait, and the success ratio.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .cluster import Cluster
from .errors import ConfigError, UnschedulableError
from .scheduler import SchedulerOptions, place, validate_weights
from .workload import (FunctionSpec, Request, WorkloadSpec, execution_seconds,
                       generate_arrivals)

QUEUE_SCALE_FACTOR = 5.0


@dataclass(frozen=True)
class ScoreNorm:
    fet_cap_s: float = 30.0
    wait_cap_s: float = 30.0

    def __post_init__(self):
        if self.fet_cap_s <= 0 or self.wait_cap_s <= 0:
            raise ConfigError("score caps must be positive")


@dataclass(frozen=True)
class SimOptions:
    duration_s: float = 100.0
    min_replicas: int = 1
    max_replicas: int = 100
    scale_factor: int = 1
    scheduler: SchedulerOptions = field(default_factory=SchedulerOptions)
    norm: ScoreNorm = field(default_factory=ScoreNorm)
    seed: int = 0

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be positive")
        if not 1 <= self.min_replicas <= self.max_replicas:
            raise ConfigError("need 1 <= min_replicas <= max_replicas")
        if self.scale_factor < 1:
            raise ConfigError("scale_factor must be >= 1")


@dataclass
class FunctionMetrics:
    mu_fet_s: float
    mu_wait_s: float
    n_success: int
    n_total: int


@dataclass
class BenchmarkMetrics:
    per_function: dict[str, FunctionMetrics]


@dataclass(frozen=True)
class Placement:
    pod: str
    node: int
    time_s: float


@dataclass
class SimResult:
    metrics: BenchmarkMetrics
    score: float
    placements: list[Placement]


def compute_score(metrics: BenchmarkMetrics, norm: ScoreNorm = ScoreNorm()) -> float:
    """Aggregate benchmark score in [0, 1]; higher is better."""
    if not metrics.per_function:
        raise ConfigError("metrics cover no functions")
    per = []
    for fm in metrics.per_function.values():
        m_fet = 1.0 - min(max(fm.mu_fet_s / norm.fet_cap_s, 0.0), 1.0)
        m_wait = 1.0 - min(max(fm.mu_wait_s / norm.wait_cap_s, 0.0), 1.0)
        m_success = fm.n_success / max(fm.n_total, 1)
        per.append((m_fet + m_wait + m_success) / 3.0)
    return sum(per) / len(per)


class _Replica:
    __slots__ = ("pod", "function_name", "node_id", "queue", "serving")

    def __init__(self, pod: str, function_name: str, node_id: int):
        self.pod = pod
        self.function_name = function_name
        self.node_id = node_id
        self.queue: deque[Request] = deque()
        self.serving: Request | None = None

    @property
    def load(self) -> int:
        return len(self.queue) + (1 if self.serving is not None else 0)


class _Engine:
    def __init__(self, cluster: Cluster, functions: list[FunctionSpec],
                 weights: np.ndarray, options: SimOptions):
        self.cluster = cluster.clone()
        self.functions = functions
        self.weights = validate_weights(weights)
        self.options = options
        self.rng = np.random.default_rng(options.seed)
        self.replicas: dict[str, list[_Replica]] = {fn.name: [] for fn in functions}
        self.placements: list[Placement] = []
        self.heap: list[tuple] = []
        self.seq = 0
        self.fet: dict[str, list[float]] = {fn.name: [] for fn in functions}
        self.wait: dict[str, list[float]] = {fn.name: [] for fn in functions}
        self.n_total: dict[str, int] = {fn.name: 0 for fn in functions}

    def add_replica(self, fn: FunctionSpec, time_s: float) -> bool:
        nid = place(fn, self.cluster, self.weights, self.options.scheduler, self.rng)
        if nid is None:
            return False
        self.cluster.commit(nid, fn.req_cpu, fn.req_mem)
        reps = self.replicas[fn.name]
        pod = f"{fn.name}-{len(reps)}"
        reps.append(_Replica(pod, fn.name, nid))
        self.placements.append(Placement(pod, nid, time_s))
        return True

    def warm_up(self):
        for fn in self.functions:
            for _ in range(self.options.min_replicas):
                if not self.add_replica(fn, 0.0):
                    raise UnschedulableError(fn.name)

    def push(self, time_s: float, kind: str, payload):
        self.seq += 1
        heapq.heappush(self.heap, (time_s, self.seq, kind, payload))

    def start_service(self, rep: _Replica, now: float):
        req = rep.queue.popleft()
        rep.serving = req
        fn = req.function
        node = self.cluster.nodes[rep.node_id]
        service = execution_seconds(fn, node.device)
        if fn.image_name and not self.cluster.has_image(rep.node_id, fn.image_name):
            service += self.cluster.image_pull_time(rep.node_id, fn.image_bytes)
            self.cluster.add_image(rep.node_id, fn.image_name)
        service += self.cluster.data_fetch_time(rep.node_id, fn.dataset_bytes)
        self.push(now + service, "complete", (rep, req.arrival_s, now, service))

    def maybe_scale(self, fn: FunctionSpec, now: float):
        # Waiting = queued but not in service; the trigger is a strict >.
        reps = self.replicas[fn.name]
        waiting = sum(len(r.queue) for r in reps)
        if waiting <= QUEUE_SCALE_FACTOR * len(reps):
            return
        for _ in range(self.options.scale_factor):
            if len(reps) >= self.options.max_replicas:
                break
            if not self.add_replica(fn, now):
                break

    def on_arrival(self, req: Request, now: float):
        reps = self.replicas[req.function.name]
        self.n_total[req.function.name] += 1
        target = min(enumerate(reps), key=lambda pair: (pair[1].load, pair[0]))[1]
        target.queue.append(req)
        if target.serving is None:
            self.start_service(target, now)
        self.maybe_scale(req.function, now)

    def run(self, requests: list[Request]) -> SimResult:
        self.warm_up()
        for i, req in enumerate(requests):
            if req.arrival_s >= self.options.duration_s:
                raise ConfigError("request trace extends past the horizon")
            heapq.heappush(self.heap, (req.arrival_s, -len(requests) + i, "arrival", req))
        last = 0.0
        while self.heap and self.heap[0][0] < self.options.duration_s:
            now, _, kind, payload = heapq.heappop(self.heap)
            assert now >= last, "event times must be nondecreasing"
            last = now
            if kind == "arrival":
                self.on_arrival(payload, now)
            else:
                rep, arrival_s, start_s, service_s = payload
                rep.serving = None
                self.fet[rep.function_name].append(service_s)
                self.wait[rep.function_name].append(start_s - arrival_s)
                if rep.queue:
                    self.start_service(rep, now)

        per = {}
        for fn in self.functions:
            fets, waits = self.fet[fn.name], self.wait[fn.name]
            per[fn.name] = FunctionMetrics(
                mu_fet_s=sum(fets) / len(fets) if fets else 0.0,
                mu_wait_s=sum(waits) / len(waits) if waits else 0.0,
                n_success=len(fets),
                n_total=self.n_total[fn.name],
            )
        metrics = BenchmarkMetrics(per)
        return SimResult(metrics, compute_score(metrics, self.options.norm), self.placements)


def simulate_requests(cluster: Cluster, functions: list[FunctionSpec],
                      requests: list[Request], weights: np.ndarray,
                      options: SimOptions) -> SimResult:
    """Run an explicit request trace.  The input cluster is not mutated."""
    return _Engine(cluster, functions, weights, options).run(requests)


def run_benchmark(cluster: Cluster, workload: WorkloadSpec, weights: np.ndarray,
                  options: SimOptions) -> SimResult:
    """Generate the workload's trace and simulate it."""
    if abs(workload.duration_s - options.duration_s) > 1e-12:
        raise ConfigError("workload and simulation horizons disagree")
    functions = [fn for fn, _ in workload.functions]
    return simulate_requests(cluster, functions, generate_arrivals(workload), weights, options)
