"""Two-phase pod placement: feasibility filter, then weighted scoring.

Every scoring function maps a (pod, node) pair into [0, 1]; the placement
score of a node is the dot product of the eight scores with a weight vector
in [0, 1]^8.  Utilization-style scores are computed *as if* the pod were
already placed, but placement itself never mutates the cluster: committing
allocations is the simulation engine's job.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cluster import ACCELERATORS, Cluster
from .errors import ConfigError
from .workload import FunctionSpec

SCORING_FUNCTIONS = (
    "least_allocated",
    "most_allocated",
    "rtc_ratio",
    "locality_type",
    "data_locality",
    "capability",
    "balanced_resource",
    "latency_aware_image_locality",
)

N_WEIGHTS = len(SCORING_FUNCTIONS)

# Production default: everything on except the spread-vs-pack pair's spread
# side and the requested-to-capacity curve.
FIXED_WEIGHTS = np.array([0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0])

DEFAULT_RTC_POINTS = ((0.0, 0.0), (1.0, 1.0))


@dataclass(frozen=True)
class SchedulerOptions:
    percent_nodes_to_score: float = 1.0
    rtc_points: tuple[tuple[float, float], ...] = DEFAULT_RTC_POINTS
    data_time_cap_s: float = 60.0
    image_time_cap_s: float = 60.0

    def __post_init__(self):
        if not 0.0 < self.percent_nodes_to_score <= 1.0:
            raise ConfigError("percent_nodes_to_score must lie in (0, 1]")
        if len(self.rtc_points) < 2:
            raise ConfigError("rtc_points needs at least two breakpoints")
        xs = [x for x, _ in self.rtc_points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ConfigError("rtc_points x-coordinates must be strictly increasing")
        if self.data_time_cap_s <= 0 or self.image_time_cap_s <= 0:
            raise ConfigError("time caps must be positive")


def validate_weights(weights: np.ndarray) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (N_WEIGHTS,):
        raise ConfigError(f"weight vector must have shape ({N_WEIGHTS},), got {w.shape}")
    if np.any(w < 0.0) or np.any(w > 1.0):
        raise ConfigError("weights must lie in [0, 1]")
    return w


def piecewise_linear(u, points) -> np.ndarray:
    """Linear interpolation through breakpoints, clamped at the endpoints."""
    xs = np.array([x for x, _ in points])
    ys = np.array([y for _, y in points])
    return np.interp(u, xs, ys)


def feasible_mask(fn: FunctionSpec, cluster: Cluster) -> np.ndarray:
    free_cpu = cluster.capacity_cpu - cluster.alloc_cpu
    free_mem = cluster.capacity_mem - cluster.alloc_mem
    mask = (free_cpu >= fn.req_cpu) & (free_mem >= fn.req_mem)
    if fn.accelerator_required:
        mask &= cluster.accel_code == ACCELERATORS.index(fn.preferred_accelerator)
    return mask


def filter_feasible(fn: FunctionSpec, cluster: Cluster) -> list[int]:
    """Node ids that can hold the pod, ascending."""
    return [int(i) for i in np.nonzero(feasible_mask(fn, cluster))[0]]


def score_nodes(fn: FunctionSpec, node_ids: np.ndarray, cluster: Cluster,
                options: SchedulerOptions) -> np.ndarray:
    """Matrix of the eight scores, one row per node id.

    Rows follow SCORING_FUNCTIONS order.  Callers must pass feasible ids;
    utilizations then stay within [0, 1] by construction.
    """
    ids = np.asarray(node_ids, dtype=int)
    u_cpu = (cluster.alloc_cpu[ids] + fn.req_cpu) / cluster.capacity_cpu[ids]
    u_mem = (cluster.alloc_mem[ids] + fn.req_mem) / cluster.capacity_mem[ids]
    u = (u_cpu + u_mem) / 2.0

    least_allocated = 1.0 - u
    most_allocated = u
    rtc_ratio = piecewise_linear(u, options.rtc_points)

    if fn.preferred_locality == "any":
        locality_type = np.ones(len(ids))
    else:
        want = 0 if fn.preferred_locality == "cloud" else 1
        locality_type = (cluster.locality_code[ids] == want).astype(float)

    fetch = (cluster.store_latency[:, ids] + fn.dataset_bytes / cluster.store_bw[:, ids]).min(axis=0)
    data_locality = 1.0 - np.clip(fetch / options.data_time_cap_s, 0.0, 1.0)

    if fn.preferred_accelerator == "none":
        capability = np.full(len(ids), 0.5)
    else:
        want = ACCELERATORS.index(fn.preferred_accelerator)
        capability = (cluster.accel_code[ids] == want).astype(float)

    # Population stddev of two utilizations collapses to half their gap.
    balanced_resource = 1.0 - np.abs(u_cpu - u_mem) / 2.0

    pull = cluster.registry_latency[ids] + fn.image_bytes / cluster.registry_bw[ids]
    cached = np.array([cluster.has_image(int(i), fn.image_name) for i in ids])
    latency_aware = np.where(
        cached, 1.0, 1.0 - np.clip(pull / options.image_time_cap_s, 0.0, 1.0))

    return np.column_stack([
        least_allocated, most_allocated, rtc_ratio, locality_type,
        data_locality, capability, balanced_resource, latency_aware,
    ])


def score_node(fn: FunctionSpec, node_id: int, cluster: Cluster,
               options: SchedulerOptions) -> np.ndarray:
    """Score vector for a single node (row of :func:`score_nodes`)."""
    return score_nodes(fn, np.array([node_id]), cluster, options)[0]


def place(fn: FunctionSpec, cluster: Cluster, weights: np.ndarray,
          options: SchedulerOptions, rng: np.random.Generator) -> int | None:
    """Pick the best node for the pod, or None when nothing is feasible.

    When percent_nodes_to_score < 1, a uniform subset of the feasible set is
    scored (at least one node).  Ties on the total score go to the lowest
    node id.  The cluster is left untouched.
    """
    w = validate_weights(weights)
    ids = np.nonzero(feasible_mask(fn, cluster))[0]
    if len(ids) == 0:
        return None
    k = max(1, int(math.floor(options.percent_nodes_to_score * len(ids))))
    if k < len(ids):
        ids = np.sort(rng.choice(ids, size=k, replace=False))
    totals = score_nodes(fn, ids, cluster, options) @ w
    return int(ids[int(np.argmax(totals))])
