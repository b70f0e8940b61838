"""Heterogeneous cluster inventories and network topologies.

A cluster is built from a preset distribution over nine device classes
(largest-remainder rounding turns fractions into node counts) and wired into
one of two network topologies:

* ``internet``: every node hangs off a single core switch, uniform link
  bandwidth and latency.
* ``urban``: three layers (cloud, metro, edge) with strictly decreasing
  bandwidth and increasing latency towards the edge.  Cloud devices attach to
  the cloud switch; edge devices are split between the metro and edge
  switches by the build seed.

Each topology carries one data-store vertex per layer and a single image
registry vertex attached to the top layer.  Transfer time between two
vertices is the summed link latency along the (unique) path plus the payload
size divided by the bottleneck bandwidth.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import data as _data
from .errors import ConfigError, TopologyError

ACCELERATORS = ("none", "gpu", "tpu")
LOCALITIES = ("cloud", "edge")
TOPOLOGY_KINDS = ("internet", "urban")

PRESETS = (
    "cloud_cpu",
    "cloud_gpu",
    "edge_cloudlet",
    "edge_gpu",
    "edge_sbc",
    "edge_tpu",
    "hybrid_balanced",
    "hybrid_balanced_jetson",
)

# Broad class of a preset, used as a coarse observation feature.
PRESET_CLASS = {
    "cloud_cpu": "cloud",
    "cloud_gpu": "cloud",
    "edge_cloudlet": "edge",
    "edge_gpu": "edge",
    "edge_sbc": "edge",
    "edge_tpu": "edge",
    "hybrid_balanced": "hybrid",
    "hybrid_balanced_jetson": "hybrid",
}

INTERNET_BANDWIDTH_BPS = 1.25e8
INTERNET_LATENCY_S = 1e-3

URBAN_LAYERS = ("cloud", "metro", "edge")
URBAN_BANDWIDTH_BPS = {"cloud": 1.25e8, "metro": 2.5e7, "edge": 1.25e7}
URBAN_LATENCY_S = {"cloud": 1e-3, "metro": 5e-3, "edge": 1e-2}


@dataclass(frozen=True)
class DeviceClass:
    """Hardware profile shared by all nodes of one class."""

    name: str
    cpu_cores: int
    speed_factor: float
    memory_mb: int
    accelerator: str = "none"
    locality: str = "cloud"

    def __post_init__(self):
        if self.cpu_cores < 1:
            raise ConfigError(f"{self.name}: cpu_cores must be >= 1")
        if self.memory_mb <= 0:
            raise ConfigError(f"{self.name}: memory_mb must be > 0")
        if not 1.0 <= self.speed_factor <= 12.0:
            raise ConfigError(f"{self.name}: speed_factor must lie in [1, 12]")
        if self.accelerator not in ACCELERATORS:
            raise ConfigError(f"{self.name}: unknown accelerator {self.accelerator!r}")
        if self.locality not in LOCALITIES:
            raise ConfigError(f"{self.name}: unknown locality {self.locality!r}")


@dataclass
class Node:
    """One schedulable machine with live allocation state."""

    id: int
    device: DeviceClass
    capacity_cpu: float
    capacity_mem: float
    alloc_cpu: float = 0.0
    alloc_mem: float = 0.0
    image_cache: set = field(default_factory=set)
    vertex: int = -1


@dataclass(frozen=True)
class ClusterSpec:
    preset: str
    total_nodes: int
    topology_kind: str = "internet"
    seed: int = 0

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}, expected one of {PRESETS}")
        if self.total_nodes < 1:
            raise ConfigError("total_nodes must be >= 1")
        if self.topology_kind not in TOPOLOGY_KINDS:
            raise ConfigError(
                f"unknown topology_kind {self.topology_kind!r}, expected one of {TOPOLOGY_KINDS}"
            )


class NetworkTopology:
    """Undirected link graph over node vertices plus infrastructure vertices.

    Vertices 0..n_nodes-1 are the cluster nodes; the remaining vertices are
    switches, data stores and the image registry.  Both shipped topologies
    are trees, so the path between any two vertices is unique.
    """

    def __init__(self, kind: str, n_vertices: int):
        self.kind = kind
        self.n_vertices = n_vertices
        self._adj: dict[int, list[tuple[int, float, float]]] = {i: [] for i in range(n_vertices)}
        self.registry_vertex = -1
        self.store_vertices: tuple[int, ...] = ()
        self.layer_of: dict[int, str] = {}

    def add_link(self, a: int, b: int, bandwidth_bps: float, latency_s: float) -> None:
        if bandwidth_bps <= 0 or latency_s < 0:
            raise TopologyError("links need positive bandwidth and nonnegative latency")
        self._adj[a].append((b, bandwidth_bps, latency_s))
        self._adj[b].append((a, bandwidth_bps, latency_s))

    def path_params(self, a: int, b: int) -> tuple[float, float]:
        """Summed latency and bottleneck bandwidth along the a->b path."""
        if a == b:
            return 0.0, math.inf
        prev: dict[int, tuple[int, float, float]] = {a: (-1, 0.0, 0.0)}
        frontier = deque([a])
        while frontier:
            v = frontier.popleft()
            if v == b:
                break
            for w, bw, lat in self._adj[v]:
                if w not in prev:
                    prev[w] = (v, bw, lat)
                    frontier.append(w)
        if b not in prev:
            raise TopologyError(f"vertices {a} and {b} are not connected")
        latency = 0.0
        min_bw = math.inf
        v = b
        while v != a:
            v, bw, lat = prev[v]
            latency += lat
            min_bw = min(min_bw, bw)
        return latency, min_bw

    def transfer_time(self, nbytes: float, a: int, b: int) -> float:
        """Seconds to move ``nbytes`` between two vertices; 0 on the same vertex."""
        if nbytes < 0:
            raise ConfigError("nbytes must be nonnegative")
        if a == b:
            return 0.0
        latency, min_bw = self.path_params(a, b)
        return latency + nbytes / min_bw


@dataclass
class Cluster:
    """A built inventory: nodes, topology, and vectorized scheduling state.

    The numpy mirrors of per-node state exist so that scoring an entire
    feasible set is a handful of array operations.  All mutation goes through
    :meth:`commit` and :meth:`add_image` to keep them in sync with the Node
    objects.
    """

    spec: ClusterSpec
    nodes: list[Node]
    topology: NetworkTopology = field(compare=False)
    capacity_cpu: np.ndarray = field(compare=False, repr=False)
    capacity_mem: np.ndarray = field(compare=False, repr=False)
    alloc_cpu: np.ndarray = field(compare=False, repr=False)
    alloc_mem: np.ndarray = field(compare=False, repr=False)
    locality_code: np.ndarray = field(compare=False, repr=False)
    accel_code: np.ndarray = field(compare=False, repr=False)
    speed_factor: np.ndarray = field(compare=False, repr=False)
    # Per-node path parameters to the registry and to each data store.
    registry_latency: np.ndarray = field(compare=False, repr=False)
    registry_bw: np.ndarray = field(compare=False, repr=False)
    store_latency: np.ndarray = field(compare=False, repr=False)
    store_bw: np.ndarray = field(compare=False, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def commit(self, node_id: int, cpu: float, mem: float) -> None:
        """Reserve resources on a node (warm-up and autoscale placements)."""
        node = self.nodes[node_id]
        node.alloc_cpu += cpu
        node.alloc_mem += mem
        self.alloc_cpu[node_id] += cpu
        self.alloc_mem[node_id] += mem

    def add_image(self, node_id: int, image_name: str) -> None:
        self.nodes[node_id].image_cache.add(image_name)

    def has_image(self, node_id: int, image_name: str) -> bool:
        return image_name in self.nodes[node_id].image_cache

    def data_fetch_time(self, node_id: int, nbytes: float) -> float:
        """Transfer time from the nearest data store to a node."""
        times = self.store_latency[:, node_id] + nbytes / self.store_bw[:, node_id]
        return float(times.min())

    def image_pull_time(self, node_id: int, nbytes: float) -> float:
        """Transfer time from the registry to a node."""
        return float(self.registry_latency[node_id] + nbytes / self.registry_bw[node_id])

    def clone(self) -> "Cluster":
        """Independent copy; the topology is immutable and stays shared."""
        nodes = [
            Node(n.id, n.device, n.capacity_cpu, n.capacity_mem,
                 n.alloc_cpu, n.alloc_mem, set(n.image_cache), n.vertex)
            for n in self.nodes
        ]
        return Cluster(
            spec=self.spec,
            nodes=nodes,
            topology=self.topology,
            capacity_cpu=self.capacity_cpu,
            capacity_mem=self.capacity_mem,
            alloc_cpu=self.alloc_cpu.copy(),
            alloc_mem=self.alloc_mem.copy(),
            locality_code=self.locality_code,
            accel_code=self.accel_code,
            speed_factor=self.speed_factor,
            registry_latency=self.registry_latency,
            registry_bw=self.registry_bw,
            store_latency=self.store_latency,
            store_bw=self.store_bw,
        )


def load_device_catalog(data_dir=None) -> dict[str, DeviceClass]:
    payload = _data.load_json("devices.json", data_dir)
    catalog = {}
    for entry in payload["devices"]:
        dev = DeviceClass(
            name=entry["name"],
            cpu_cores=entry["cpu_cores"],
            speed_factor=entry["speed_factor"],
            memory_mb=entry["memory_mb"],
            accelerator=entry["accelerator"],
            locality=entry["locality"],
        )
        catalog[dev.name] = dev
    return catalog


def preset_distribution(preset: str, data_dir=None) -> dict[str, float]:
    """Fraction of each device class for a named preset; fractions sum to 1."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}, expected one of {PRESETS}")
    payload = _data.load_json("presets.json", data_dir)
    try:
        dist = payload["presets"][preset]
    except KeyError as exc:
        raise ConfigError(f"preset {preset!r} missing from presets.json") from exc
    devices = load_device_catalog(data_dir)
    total = 0.0
    for name, frac in dist.items():
        if name not in devices:
            raise ConfigError(f"preset {preset!r} references unknown device {name!r}")
        if not 0.0 <= frac <= 1.0:
            raise ConfigError(f"preset {preset!r}: fraction for {name!r} outside [0, 1]")
        total += frac
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"preset {preset!r}: fractions sum to {total}, expected 1")
    return dict(dist)


def largest_remainder_counts(fractions: list[float], total: int) -> list[int]:
    """Integer apportionment of ``total`` by the largest-remainder method.

    Ties in the fractional remainders are broken by position, so the result
    is deterministic for a fixed input order.
    """
    quotas = [f * total for f in fractions]
    counts = [int(math.floor(q)) for q in quotas]
    short = total - sum(counts)
    order = sorted(range(len(fractions)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def _build_internet(nodes: list[Node]) -> NetworkTopology:
    n = len(nodes)
    core, registry, store = n, n + 1, n + 2
    topo = NetworkTopology("internet", n + 3)
    for node in nodes:
        node.vertex = node.id
        topo.add_link(node.id, core, INTERNET_BANDWIDTH_BPS, INTERNET_LATENCY_S)
    topo.add_link(registry, core, INTERNET_BANDWIDTH_BPS, INTERNET_LATENCY_S)
    topo.add_link(store, core, INTERNET_BANDWIDTH_BPS, INTERNET_LATENCY_S)
    topo.registry_vertex = registry
    topo.store_vertices = (store,)
    return topo


def _build_urban(nodes: list[Node], rng: np.random.Generator) -> NetworkTopology:
    n = len(nodes)
    switches = {"cloud": n, "metro": n + 1, "edge": n + 2}
    registry = n + 3
    stores = {"cloud": n + 4, "metro": n + 5, "edge": n + 6}
    topo = NetworkTopology("urban", n + 7)
    # Chain the layer switches; each inter-layer link runs at the lower
    # layer's speed, so any cross-layer path is strictly slower than an
    # intra-layer path within the faster layer.
    topo.add_link(switches["cloud"], switches["metro"],
                  URBAN_BANDWIDTH_BPS["metro"], URBAN_LATENCY_S["metro"])
    topo.add_link(switches["metro"], switches["edge"],
                  URBAN_BANDWIDTH_BPS["edge"], URBAN_LATENCY_S["edge"])
    for node in nodes:
        if node.device.locality == "cloud":
            layer = "cloud"
        else:
            layer = "metro" if rng.integers(2) == 0 else "edge"
        node.vertex = node.id
        topo.layer_of[node.id] = layer
        topo.add_link(node.id, switches[layer],
                      URBAN_BANDWIDTH_BPS[layer], URBAN_LATENCY_S[layer])
    topo.add_link(registry, switches["cloud"],
                  URBAN_BANDWIDTH_BPS["cloud"], URBAN_LATENCY_S["cloud"])
    for layer in URBAN_LAYERS:
        topo.add_link(stores[layer], switches[layer],
                      URBAN_BANDWIDTH_BPS[layer], URBAN_LATENCY_S[layer])
    topo.registry_vertex = registry
    topo.store_vertices = (stores["cloud"], stores["metro"], stores["edge"])
    return topo


def build_cluster(spec: ClusterSpec, data_dir=None) -> Cluster:
    """Materialize a cluster from a spec.  Pure function of the spec."""
    devices = load_device_catalog(data_dir)
    dist = preset_distribution(spec.preset, data_dir)
    names = list(dist.keys())
    counts = largest_remainder_counts([dist[n] for n in names], spec.total_nodes)

    nodes = []
    for name, count in zip(names, counts):
        dev = devices[name]
        for _ in range(count):
            nid = len(nodes)
            nodes.append(Node(nid, dev, float(dev.cpu_cores), float(dev.memory_mb)))

    rng = np.random.default_rng(spec.seed)
    if spec.topology_kind == "internet":
        topo = _build_internet(nodes)
    else:
        topo = _build_urban(nodes, rng)

    n = len(nodes)
    reg_lat = np.empty(n)
    reg_bw = np.empty(n)
    n_stores = len(topo.store_vertices)
    store_lat = np.empty((n_stores, n))
    store_bw = np.empty((n_stores, n))
    for node in nodes:
        lat, bw = topo.path_params(topo.registry_vertex, node.vertex)
        reg_lat[node.id], reg_bw[node.id] = lat, bw
        for s, sv in enumerate(topo.store_vertices):
            lat, bw = topo.path_params(sv, node.vertex)
            store_lat[s, node.id], store_bw[s, node.id] = lat, bw

    return Cluster(
        spec=spec,
        nodes=nodes,
        topology=topo,
        capacity_cpu=np.array([nd.capacity_cpu for nd in nodes]),
        capacity_mem=np.array([nd.capacity_mem for nd in nodes]),
        alloc_cpu=np.zeros(n),
        alloc_mem=np.zeros(n),
        locality_code=np.array([LOCALITIES.index(nd.device.locality) for nd in nodes]),
        accel_code=np.array([ACCELERATORS.index(nd.device.accelerator) for nd in nodes]),
        speed_factor=np.array([nd.device.speed_factor for nd in nodes]),
        registry_latency=reg_lat,
        registry_bw=reg_bw,
        store_latency=store_lat,
        store_bw=store_bw,
    )
