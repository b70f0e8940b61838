"""Multi-step tuning environments over benchmark runs.

An episode is one tuning session on a frozen scenario: the reset evaluates
the fixed initial weights to obtain the reference score r0, then the agent
gets ``n_steps`` trials, each a full benchmark run with its proposed weight
vector.  The reward is sparse: zero everywhere except the terminal step,
which pays the relative improvement of the best trial over r0.

Observations concatenate a normalized static description of the scenario,
``n_steps + 1`` frames of (action, raw score, valid) triples -- frame 0 is
reserved for the initial (fixed weights, r0) pair -- and the normalized step
index.  Reset returns all-zero frames; trial history appears from the first
step onward.  Static features come in fine and coarse variants so that
masking can hide exact scenario parameters during training.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cluster import PRESET_CLASS, PRESETS, TOPOLOGY_KINDS, ClusterSpec, build_cluster
from .errors import ConfigError, ProtocolError, UnschedulableError
from .scheduler import FIXED_WEIGHTS, N_WEIGHTS, SCORING_FUNCTIONS, SchedulerOptions
from .simengine import ScoreNorm, SimOptions, run_benchmark
from .workload import WorkloadSpec, catalog, train_catalog

EPS_REWARD = 1e-6
DEFAULT_N_STEPS = 4
MASK_LEVELS = ("full", "coarse", "none")
MODES = ("train", "test")

TRAIN_PRESETS = ("cloud_cpu", "cloud_gpu", "edge_cloudlet")

# Node-count bucket edges for the coarse cluster-size descriptor.
NODE_BUCKETS = (60, 120, 240)


@dataclass(frozen=True)
class SpaceVar:
    """Named closed interval; [min, max] may collapse for fixed parameters."""

    name: str
    min: float
    max: float

    def __post_init__(self):
        if not self.name:
            raise ConfigError("space variable needs a name")
        if self.min > self.max:
            raise ConfigError(f"{self.name}: min must not exceed max")

    def normalize(self, x: float) -> float:
        if self.min == self.max:
            raise ConfigError(f"{self.name}: cannot normalize a degenerate range")
        return float(np.clip((x - self.min) / (self.max - self.min), 0.0, 1.0))

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.min, self.max))

    def sample_int(self, rng: np.random.Generator) -> int:
        return int(rng.integers(int(self.min), int(self.max) + 1))

    def to_json(self) -> list:
        return [self.name, self.min, self.max]

    @classmethod
    def from_json(cls, triple) -> "SpaceVar":
        if len(triple) != 3:
            raise ConfigError(f"space variable must be [name, min, max], got {triple!r}")
        return cls(str(triple[0]), float(triple[1]), float(triple[2]))


@dataclass
class SpaceSet:
    """The six spaces describing one tuning problem."""

    static: tuple[SpaceVar, ...]
    domain_train: tuple[SpaceVar, ...]
    domain_test: tuple[SpaceVar, ...]
    initial_action: np.ndarray
    reward: SpaceVar
    actions: tuple[SpaceVar, ...]

    def __post_init__(self):
        self.initial_action = np.asarray(self.initial_action, dtype=float)
        if self.initial_action.shape != (len(self.actions),):
            raise ConfigError("initial_action length must match the action space")
        for var in self.actions + (self.reward,) + self.static:
            if var.min == var.max:
                raise ConfigError(f"{var.name}: normalization range must not collapse")
        for a, var in zip(self.initial_action, self.actions):
            if not var.min <= a <= var.max:
                raise ConfigError(f"initial action outside bounds for {var.name}")

    def domain(self, mode: str) -> dict[str, SpaceVar]:
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}, expected one of {MODES}")
        space = self.domain_train if mode == "train" else self.domain_test
        return {v.name: v for v in space}

    def to_dict(self) -> dict:
        return {
            "static": [v.to_json() for v in self.static],
            "domain_train": [v.to_json() for v in self.domain_train],
            "domain_test": [v.to_json() for v in self.domain_test],
            "initial_action": [float(a) for a in self.initial_action],
            "reward": self.reward.to_json(),
            "actions": [v.to_json() for v in self.actions],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SpaceSet":
        try:
            return cls(
                static=tuple(SpaceVar.from_json(v) for v in payload["static"]),
                domain_train=tuple(SpaceVar.from_json(v) for v in payload["domain_train"]),
                domain_test=tuple(SpaceVar.from_json(v) for v in payload["domain_test"]),
                initial_action=np.array(payload["initial_action"], dtype=float),
                reward=SpaceVar.from_json(payload["reward"]),
                actions=tuple(SpaceVar.from_json(v) for v in payload["actions"]),
            )
        except KeyError as exc:
            raise ConfigError(f"space set is missing key {exc.args[0]!r}") from exc


def default_space_set() -> SpaceSet:
    """Spaces for the cluster-scheduling problem.

    Train and test domains differ deliberately: training sees three cluster
    presets, a fixed request rate and small-to-medium clusters, while test
    scenarios span all presets, larger clusters and wider knob ranges.
    """
    actions = tuple(SpaceVar(f"w_{name}", 0.0, 1.0) for name in SCORING_FUNCTIONS)
    static = (
        SpaceVar("num_nodes", 30, 400),
        SpaceVar("num_functions", 1, 8),
        SpaceVar("requests_per_second", 5, 30),
        SpaceVar("percent_nodes_to_score", 0.1, 1.0),
        SpaceVar("min_replicas", 1, 10),
        SpaceVar("max_replicas", 50, 100),
        SpaceVar("scale_factor", 1, 5),
    )
    domain_train = (
        SpaceVar("cluster_preset", 0, len(TRAIN_PRESETS) - 1),
        SpaceVar("topology", 0, 1),
        SpaceVar("num_nodes", 30, 180),
        SpaceVar("num_functions", 1, 5),
        SpaceVar("requests_per_second", 10, 10),
        SpaceVar("percent_nodes_to_score", 1.0, 1.0),
        SpaceVar("min_replicas", 1, 1),
        SpaceVar("max_replicas", 100, 100),
        SpaceVar("scale_factor", 1, 1),
    )
    domain_test = (
        SpaceVar("cluster_preset", 0, len(PRESETS) - 1),
        SpaceVar("topology", 0, 1),
        SpaceVar("num_nodes", 200, 400),
        SpaceVar("num_functions", 1, 8),
        SpaceVar("requests_per_second", 5, 30),
        SpaceVar("percent_nodes_to_score", 0.1, 1.0),
        SpaceVar("min_replicas", 1, 10),
        SpaceVar("max_replicas", 50, 100),
        SpaceVar("scale_factor", 1, 5),
    )
    return SpaceSet(
        static=static,
        domain_train=domain_train,
        domain_test=domain_test,
        initial_action=FIXED_WEIGHTS.copy(),
        reward=SpaceVar("score", 0.0, 1.0),
        actions=actions,
    )


@dataclass(frozen=True)
class Scenario:
    """One frozen benchmark configuration shared by all trials of an episode."""

    cluster_spec: ClusterSpec
    workload: WorkloadSpec
    options: SimOptions

    def describe(self) -> dict:
        return {
            "preset": self.cluster_spec.preset,
            "topology": self.cluster_spec.topology_kind,
            "num_nodes": self.cluster_spec.total_nodes,
            "cluster_seed": self.cluster_spec.seed,
            "functions": [fn.name for fn, _ in self.workload.functions],
            "rps": [rps for _, rps in self.workload.functions],
            "workload_seed": self.workload.seed,
            "duration_s": self.workload.duration_s,
            "percent_nodes_to_score": self.options.scheduler.percent_nodes_to_score,
            "min_replicas": self.options.min_replicas,
            "max_replicas": self.options.max_replicas,
            "scale_factor": self.options.scale_factor,
            "sim_seed": self.options.seed,
        }

    def digest(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()[:12]


def sample_scenario(space: SpaceSet, mode: str, rng: np.random.Generator,
                    duration_s: float = 100.0, norm: ScoreNorm = ScoreNorm(),
                    data_dir=None) -> Scenario:
    """Draw one scenario uniformly from the mode's domain space."""
    dom = space.domain(mode)

    def var(name: str) -> SpaceVar:
        try:
            return dom[name]
        except KeyError as exc:
            raise ConfigError(f"domain space lacks variable {name!r}") from exc

    presets = TRAIN_PRESETS if mode == "train" else PRESETS
    preset = presets[var("cluster_preset").sample_int(rng)]
    topology = TOPOLOGY_KINDS[var("topology").sample_int(rng)]
    num_nodes = var("num_nodes").sample_int(rng)
    pool = train_catalog(data_dir) if mode == "train" else catalog(data_dir)
    num_functions = min(var("num_functions").sample_int(rng), len(pool))
    chosen = sorted(rng.choice(len(pool), size=num_functions, replace=False))
    rps_total = var("requests_per_second").sample(rng)
    rps_each = rps_total / num_functions
    percent = var("percent_nodes_to_score").sample(rng)
    min_replicas = var("min_replicas").sample_int(rng)
    max_replicas = var("max_replicas").sample_int(rng)
    scale_factor = var("scale_factor").sample_int(rng)
    cluster_seed = int(rng.integers(2**63 - 1))
    workload_seed = int(rng.integers(2**63 - 1))
    sim_seed = int(rng.integers(2**63 - 1))

    return Scenario(
        cluster_spec=ClusterSpec(preset, num_nodes, topology, cluster_seed),
        workload=WorkloadSpec(
            functions=tuple((pool[i], rps_each) for i in chosen),
            duration_s=duration_s,
            seed=workload_seed,
        ),
        options=SimOptions(
            duration_s=duration_s,
            min_replicas=min_replicas,
            max_replicas=max_replicas,
            scale_factor=scale_factor,
            scheduler=SchedulerOptions(percent_nodes_to_score=percent),
            norm=norm,
            seed=sim_seed,
        ),
    )


@dataclass
class TuningEpisode:
    """Outcome of one tuning session: reference score plus the trials."""

    r0: float
    initial_action: np.ndarray
    trials: list[tuple[np.ndarray, float]] = field(default_factory=list)
    scenario_digest: str = ""

    @property
    def best_score(self) -> float:
        if not self.trials:
            raise ConfigError("episode has no trials yet")
        return max(score for _, score in self.trials)

    @property
    def improvement(self) -> float:
        if not self.trials:
            return 0.0
        return (self.best_score - self.r0) / max(self.r0, EPS_REWARD)


def mask_static(features: np.ndarray, level: str,
                coarse_indices: tuple[int, ...]) -> np.ndarray:
    """Zero out static entries the given masking level hides."""
    if level not in MASK_LEVELS:
        raise ConfigError(f"unknown mask level {level!r}, expected one of {MASK_LEVELS}")
    out = np.array(features, dtype=float)
    if level == "none":
        out[:] = 0.0
    elif level == "coarse":
        keep = np.zeros(len(out), dtype=bool)
        keep[list(coarse_indices)] = True
        out[~keep] = 0.0
    return out


class TuningEnv:
    """Shared episode mechanics; subclasses supply scenarios and evaluation.

    Protocol: ``reset(seed) -> obs`` then exactly ``n_steps`` calls of
    ``step(action) -> (obs, reward, done, info)``.  Stepping a finished or
    unreset episode raises ProtocolError.
    """

    def __init__(self, action_dim: int, static_dim: int,
                 coarse_indices: tuple[int, ...], initial_action: np.ndarray,
                 n_steps: int = DEFAULT_N_STEPS, mask_level: str = "full",
                 max_reset_retries: int = 10):
        if n_steps < 1:
            raise ConfigError("n_steps must be >= 1")
        if mask_level not in MASK_LEVELS:
            raise ConfigError(f"unknown mask level {mask_level!r}")
        self.action_dim = action_dim
        self.static_dim = static_dim
        self.coarse_indices = coarse_indices
        self.initial_action = np.asarray(initial_action, dtype=float)
        if self.initial_action.shape != (action_dim,):
            raise ConfigError("initial action has the wrong dimension")
        self.n_steps = n_steps
        self.n_frames = n_steps + 1
        self.frame_width = action_dim + 2
        self.mask_level = mask_level
        self.max_reset_retries = max_reset_retries
        self.benchmark_calls = 0
        self.episode: TuningEpisode | None = None
        self._static: np.ndarray | None = None
        self._evaluate = None
        self._done = True

    @property
    def observation_dim(self) -> int:
        return self.static_dim + self.n_frames * self.frame_width + 1

    # -- subclass hook -------------------------------------------------
    def _begin_episode(self, rng: np.random.Generator):
        """Return (static_features, evaluate, digest) for a fresh scenario."""
        raise NotImplementedError

    # -- protocol ------------------------------------------------------
    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        last_error = None
        for _ in range(self.max_reset_retries):
            static, evaluate, digest = self._begin_episode(rng)
            try:
                r0 = float(evaluate(self.initial_action))
            except UnschedulableError as exc:
                last_error = exc
                continue
            break
        else:
            raise ConfigError(
                f"could not find a schedulable scenario in "
                f"{self.max_reset_retries} attempts: {last_error}")
        self.benchmark_calls += 1
        if static.shape != (self.static_dim,):
            raise ConfigError("static features have the wrong dimension")
        self._static = mask_static(static, self.mask_level, self.coarse_indices)
        self._evaluate = evaluate
        self.episode = TuningEpisode(r0=r0, initial_action=self.initial_action.copy(),
                                     scenario_digest=digest)
        self._done = False
        return self._observation(zero_frames=True)

    def step(self, action) -> tuple[np.ndarray, float, bool, dict]:
        if self.episode is None or self._done:
            raise ProtocolError("step called on a finished or unreset episode")
        a = np.asarray(action, dtype=float).reshape(-1)
        if a.shape != (self.action_dim,):
            raise ConfigError(f"action must have dimension {self.action_dim}")
        if np.any(a < -1e-9) or np.any(a > 1.0 + 1e-9):
            raise ConfigError("action outside the unit box")
        a = np.clip(a, 0.0, 1.0)
        score = float(self._evaluate(a))
        self.benchmark_calls += 1
        self.episode.trials.append((a.copy(), score))
        k = len(self.episode.trials)
        self._done = k >= self.n_steps
        reward = float(self.episode.improvement) if self._done else 0.0
        info = {
            "score": score,
            "r0": self.episode.r0,
            "trial_index": k,
            "scenario_digest": self.episode.scenario_digest,
        }
        if self._done:
            info["best_score"] = self.episode.best_score
            info["improvement"] = self.episode.improvement
        return self._observation(zero_frames=False), reward, self._done, info

    def _observation(self, zero_frames: bool) -> np.ndarray:
        frames = np.zeros((self.n_frames, self.frame_width))
        k = 0
        if not zero_frames:
            ep = self.episode
            frames[0, :self.action_dim] = ep.initial_action
            frames[0, self.action_dim] = ep.r0
            frames[0, self.action_dim + 1] = 1.0
            k = len(ep.trials)
            for i, (a, s) in enumerate(ep.trials, start=1):
                frames[i, :self.action_dim] = a
                frames[i, self.action_dim] = s
                frames[i, self.action_dim + 1] = 1.0
        step_index = np.array([k / self.n_steps])
        return np.concatenate([self._static, frames.reshape(-1), step_index])


# Static feature layout of the cluster-scheduling environment: preset and
# exact knobs are fine-grained; the broad cluster class, topology flag,
# node-count bucket and function count survive coarse masking.
FAAS_STATIC_NAMES = tuple(
    [f"preset_{p}" for p in PRESETS]
    + ["class_cloud", "class_edge", "class_hybrid", "topology_urban",
       "num_nodes", "num_nodes_bucket", "num_functions",
       "requests_per_second", "percent_nodes_to_score",
       "min_replicas", "max_replicas", "scale_factor"]
)
FAAS_COARSE_INDICES = tuple(
    FAAS_STATIC_NAMES.index(n) for n in
    ("class_cloud", "class_edge", "class_hybrid", "topology_urban",
     "num_nodes_bucket", "num_functions")
)


class FaasTuningEnv(TuningEnv):
    """Weight tuning over full cluster benchmark runs."""

    def __init__(self, space: SpaceSet | None = None, mode: str = "train",
                 mask_level: str = "full", n_steps: int = DEFAULT_N_STEPS,
                 duration_s: float = 100.0, norm: ScoreNorm = ScoreNorm(),
                 max_reset_retries: int = 10, data_dir=None):
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}, expected one of {MODES}")
        self.space = space if space is not None else default_space_set()
        if len(self.space.actions) != N_WEIGHTS:
            raise ConfigError("action space must cover the eight scoring weights")
        self.mode = mode
        self.duration_s = duration_s
        self.norm = norm
        self.data_dir = data_dir
        self.scenario: Scenario | None = None
        super().__init__(
            action_dim=N_WEIGHTS,
            static_dim=len(FAAS_STATIC_NAMES),
            coarse_indices=FAAS_COARSE_INDICES,
            initial_action=self.space.initial_action,
            n_steps=n_steps,
            mask_level=mask_level,
            max_reset_retries=max_reset_retries,
        )

    def _static_features(self, scenario: Scenario) -> np.ndarray:
        by_name = {v.name: v for v in self.space.static}
        spec = scenario.cluster_spec
        feats = np.zeros(len(FAAS_STATIC_NAMES))
        feats[PRESETS.index(spec.preset)] = 1.0
        cls = PRESET_CLASS[spec.preset]
        feats[FAAS_STATIC_NAMES.index(f"class_{cls}")] = 1.0
        feats[FAAS_STATIC_NAMES.index("topology_urban")] = \
            1.0 if spec.topology_kind == "urban" else 0.0
        feats[FAAS_STATIC_NAMES.index("num_nodes")] = \
            by_name["num_nodes"].normalize(spec.total_nodes)
        bucket = sum(spec.total_nodes >= b for b in NODE_BUCKETS)
        feats[FAAS_STATIC_NAMES.index("num_nodes_bucket")] = bucket / len(NODE_BUCKETS)
        feats[FAAS_STATIC_NAMES.index("num_functions")] = \
            by_name["num_functions"].normalize(len(scenario.workload.functions))
        rps_total = sum(rps for _, rps in scenario.workload.functions)
        feats[FAAS_STATIC_NAMES.index("requests_per_second")] = \
            by_name["requests_per_second"].normalize(rps_total)
        feats[FAAS_STATIC_NAMES.index("percent_nodes_to_score")] = \
            by_name["percent_nodes_to_score"].normalize(
                scenario.options.scheduler.percent_nodes_to_score)
        feats[FAAS_STATIC_NAMES.index("min_replicas")] = \
            by_name["min_replicas"].normalize(scenario.options.min_replicas)
        feats[FAAS_STATIC_NAMES.index("max_replicas")] = \
            by_name["max_replicas"].normalize(scenario.options.max_replicas)
        feats[FAAS_STATIC_NAMES.index("scale_factor")] = \
            by_name["scale_factor"].normalize(scenario.options.scale_factor)
        return feats

    def _begin_episode(self, rng: np.random.Generator):
        scenario = sample_scenario(self.space, self.mode, rng,
                                   duration_s=self.duration_s, norm=self.norm,
                                   data_dir=self.data_dir)
        cluster = build_cluster(scenario.cluster_spec, self.data_dir)
        self.scenario = scenario

        def evaluate(weights: np.ndarray) -> float:
            return run_benchmark(cluster, scenario.workload, weights,
                                 scenario.options).score

        return self._static_features(scenario), evaluate, scenario.digest()


class VectorEnv:
    """Drives k environment instances in lockstep with auto-reset.

    Auto-reset seeds come from a per-instance generator seeded at reset,
    so batched output i is identical to running instance i alone.
    """

    def __init__(self, envs: list[TuningEnv]):
        if not envs:
            raise ConfigError("vector env needs at least one instance")
        dims = {(e.observation_dim, e.action_dim, e.n_steps) for e in envs}
        if len(dims) != 1:
            raise ConfigError("all instances must share dimensions")
        self.envs = envs
        self._reseed: list[np.random.Generator] = []

    @property
    def num_envs(self) -> int:
        return len(self.envs)

    @property
    def observation_dim(self) -> int:
        return self.envs[0].observation_dim

    @property
    def action_dim(self) -> int:
        return self.envs[0].action_dim

    def reset(self, seeds: list[int]) -> np.ndarray:
        if len(seeds) != self.num_envs:
            raise ConfigError("need one seed per instance")
        self._reseed = [np.random.default_rng(int(s) + 1) for s in seeds]
        return np.stack([env.reset(int(s)) for env, s in zip(self.envs, seeds)])

    def step(self, actions: np.ndarray):
        actions = np.asarray(actions, dtype=float)
        if actions.shape != (self.num_envs, self.action_dim):
            raise ConfigError("actions must be a (num_envs, action_dim) array")
        obs_out, rewards, dones, infos = [], [], [], []
        for i, env in enumerate(self.envs):
            obs, reward, done, info = env.step(actions[i])
            if done:
                info["terminal_observation"] = obs
                obs = env.reset(int(self._reseed[i].integers(2**63 - 1)))
            obs_out.append(obs)
            rewards.append(reward)
            dones.append(done)
            infos.append(info)
        return (np.stack(obs_out), np.array(rewards),
                np.array(dones, dtype=bool), infos)
