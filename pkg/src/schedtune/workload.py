"""Function catalog and Poisson request-trace generation.

The catalog covers five training workloads used for agent training plus
three extra functions reserved for held-out evaluation.  Arrival traces are
Poisson per function: exponential inter-arrival gaps drawn with the trace
seed, then merged into one time-ordered stream.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import data as _data
from .cluster import ACCELERATORS, DeviceClass
from .errors import ConfigError

# Preference "any" means the function is indifferent to cloud vs edge.
LOCALITY_PREFERENCES = ("any", "cloud", "edge")

# Exec-time discount when a node carries the function's preferred accelerator.
ACCELERATOR_SPEEDUP = 0.2

TRAIN_FUNCTION_NAMES = (
    "resnet50_training",
    "resnet50_preprocessing",
    "resnet50_inference",
    "mobilenet_inference",
    "speech_inference",
)


@dataclass(frozen=True)
class FunctionSpec:
    """Resource demands and data dependencies of one deployable function."""

    name: str
    req_cpu: float
    req_mem: float
    preferred_accelerator: str = "none"
    preferred_locality: str = "any"
    image_name: str = ""
    image_bytes: float = 0.0
    dataset_bytes: float = 0.0
    base_exec_s: float = 1.0
    # Set when the function cannot run at all without its accelerator; the
    # catalog ships with preferences only so every preset stays schedulable.
    accelerator_required: bool = False

    def __post_init__(self):
        if self.req_cpu <= 0 or self.req_mem <= 0:
            raise ConfigError(f"{self.name}: resource requests must be positive")
        if self.preferred_accelerator not in ACCELERATORS:
            raise ConfigError(f"{self.name}: unknown accelerator {self.preferred_accelerator!r}")
        if self.preferred_locality not in LOCALITY_PREFERENCES:
            raise ConfigError(f"{self.name}: unknown locality {self.preferred_locality!r}")
        if self.image_bytes < 0 or self.dataset_bytes < 0:
            raise ConfigError(f"{self.name}: byte sizes must be nonnegative")
        if self.base_exec_s <= 0:
            raise ConfigError(f"{self.name}: base_exec_s must be positive")
        if self.accelerator_required and self.preferred_accelerator == "none":
            raise ConfigError(f"{self.name}: cannot require accelerator 'none'")


@dataclass(frozen=True)
class WorkloadSpec:
    """Mix of functions with per-function arrival rates and a trace seed."""

    functions: tuple[tuple[FunctionSpec, float], ...]
    duration_s: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if not self.functions:
            raise ConfigError("workload needs at least one function")
        names = [fn.name for fn, _ in self.functions]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate function in workload")
        for fn, rps in self.functions:
            if rps <= 0:
                raise ConfigError(f"{fn.name}: rps must be positive")
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be positive")


@dataclass(frozen=True)
class Request:
    function: FunctionSpec
    arrival_s: float


def catalog(data_dir=None) -> list[FunctionSpec]:
    """All eight functions, training ones first in file order."""
    payload = _data.load_json("functions.json", data_dir)
    out = []
    for entry in payload["functions"]:
        out.append(FunctionSpec(
            name=entry["name"],
            req_cpu=entry["req_cpu"],
            req_mem=float(entry["req_mem_mb"]),
            preferred_accelerator=entry["preferred_accelerator"],
            preferred_locality=entry["preferred_locality"],
            image_name=entry["image_name"],
            image_bytes=float(entry["image_bytes"]),
            dataset_bytes=float(entry["dataset_bytes"]),
            base_exec_s=entry["base_exec_s"],
        ))
    return out


def train_catalog(data_dir=None) -> list[FunctionSpec]:
    return [fn for fn in catalog(data_dir) if fn.name in TRAIN_FUNCTION_NAMES]


def execution_seconds(fn: FunctionSpec, device: DeviceClass) -> float:
    """Pure compute time of one request on one device class."""
    t = fn.base_exec_s * device.speed_factor
    if fn.preferred_accelerator != "none" and device.accelerator == fn.preferred_accelerator:
        t *= ACCELERATOR_SPEEDUP
    return t


def generate_arrivals(spec: WorkloadSpec) -> list[Request]:
    """Merged Poisson trace over [0, duration_s), sorted by arrival time.

    Each function gets its own stream of exponential gaps; the generator is
    seeded from the spec so identical specs replay identical traces.
    """
    rng = np.random.default_rng(spec.seed)
    requests = []
    for fn, rps in spec.functions:
        t = 0.0
        scale = 1.0 / rps
        while True:
            t += float(rng.exponential(scale))
            if t >= spec.duration_s:
                break
            requests.append(Request(fn, t))
    requests.sort(key=lambda r: r.arrival_s)
    return requests
