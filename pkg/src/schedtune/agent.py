"""Soft actor-critic over the tuning environments.

The policy is a tanh-squashed diagonal Gaussian and the twin critics take
tanh-space actions in (-1, 1); the environment boundary maps actions to the
unit box via (a + 1) / 2.  Temperature is learned against a target entropy.
All learning math is explicit numpy; gradients flow through the critics'
action inputs for the actor update, so no autodiff framework is needed.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CheckpointError, ConfigError
from .nn import Adam, Mlp, polyak_update
from .tunenv import TuningEnv, TuningEpisode, VectorEnv

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-6
LOG_2PI = float(np.log(2.0 * np.pi))

CHECKPOINT_MAGIC = b"STCK"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class SacConfig:
    obs_dim: int
    act_dim: int
    hidden: tuple[int, ...] = (512, 512, 512)
    gamma: float = 0.99
    tau: float = 0.005
    lr: float = 3e-4
    batch_size: int = 256
    replay_capacity: int = 100_000
    start_steps: int = 1000
    updates_per_step: int = 1
    target_entropy: float | None = None

    def __post_init__(self):
        if self.obs_dim < 1 or self.act_dim < 1:
            raise ConfigError("observation and action dimensions must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError("tau must lie in [0, 1]")
        if self.batch_size < 1 or self.replay_capacity < self.batch_size:
            raise ConfigError("replay capacity must hold at least one batch")
        if self.lr <= 0.0 or self.updates_per_step < 0 or self.start_steps < 0:
            raise ConfigError("invalid training hyperparameters")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def entropy_target(self) -> float:
        if self.target_entropy is not None:
            return float(self.target_entropy)
        return -float(self.act_dim)


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        if capacity < 1:
            raise ConfigError("replay capacity must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, act_dim))
        self.rew = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.idx = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, act, rew, next_obs, done) -> None:
        i = self.idx
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.idx = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int):
        if self.size < 1:
            raise ConfigError("cannot sample from an empty buffer")
        idx = rng.integers(0, self.size, size=batch_size)
        return (self.obs[idx], self.act[idx], self.rew[idx],
                self.next_obs[idx], self.done[idx])


def env_action(tanh_action: np.ndarray) -> np.ndarray:
    """Map tanh-space actions in (-1, 1) to the environment's unit box."""
    return (np.asarray(tanh_action, dtype=float) + 1.0) / 2.0


def tanh_action(env_act: np.ndarray) -> np.ndarray:
    return 2.0 * np.asarray(env_act, dtype=float) - 1.0


class SacAgent:
    def __init__(self, config: SacConfig, seed: int = 0):
        self.config = config
        self.rng = np.random.default_rng(seed)
        sizes = (config.obs_dim,) + config.hidden
        self.policy = Mlp(sizes + (2 * config.act_dim,), self.rng)
        critic_sizes = (config.obs_dim + config.act_dim,) + config.hidden + (1,)
        self.q1 = Mlp(critic_sizes, self.rng)
        self.q2 = Mlp(critic_sizes, self.rng)
        self.q1_target = self.q1.clone()
        self.q2_target = self.q2.clone()
        self.log_alpha = np.zeros(1)
        self.opt_policy = Adam(self.policy.parameters, lr=config.lr)
        self.opt_critic = Adam(self.q1.parameters + self.q2.parameters,
                               lr=config.lr)
        self.opt_alpha = Adam([self.log_alpha], lr=config.lr)
        self.env_steps = 0
        self.grad_steps = 0

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    # -- policy heads ----------------------------------------------------
    def _heads(self, obs: np.ndarray):
        out = self.policy.forward(obs)
        mean = out[:, : self.config.act_dim]
        raw = out[:, self.config.act_dim:]
        log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
        return mean, raw, log_std

    def sample_action(self, obs: np.ndarray, deterministic: bool = False,
                      rng: np.random.Generator | None = None):
        """Tanh-space actions and their log-probabilities for a batch."""
        rng = self.rng if rng is None else rng
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        mean, _, log_std = self._heads(obs)
        std = np.exp(log_std)
        eps = (np.zeros_like(mean) if deterministic
               else rng.standard_normal(mean.shape))
        u = mean + std * eps
        a = np.tanh(u)
        logp = (-0.5 * eps**2 - log_std - 0.5 * LOG_2PI).sum(axis=1)
        logp -= np.log(1.0 - a**2 + SQUASH_EPS).sum(axis=1)
        return a, logp

    def log_prob(self, obs: np.ndarray, tanh_actions: np.ndarray) -> np.ndarray:
        """Log-density of given tanh-space actions under the current policy."""
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        a = np.atleast_2d(np.asarray(tanh_actions, dtype=float))
        mean, _, log_std = self._heads(obs)
        u = np.arctanh(np.clip(a, -1.0 + 1e-12, 1.0 - 1e-12))
        eps = (u - mean) / np.exp(log_std)
        logp = (-0.5 * eps**2 - log_std - 0.5 * LOG_2PI).sum(axis=1)
        return logp - np.log(1.0 - a**2 + SQUASH_EPS).sum(axis=1)

    def act(self, obs: np.ndarray, deterministic: bool = True) -> np.ndarray:
        """Single-observation action in the environment's unit box."""
        a, _ = self.sample_action(np.atleast_2d(obs), deterministic=deterministic)
        return env_action(a[0])

    def act_batch(self, obs: np.ndarray, deterministic: bool = False) -> np.ndarray:
        """Tanh-space actions for a batch of observations."""
        a, _ = self.sample_action(obs, deterministic=deterministic)
        return a

    # -- gradient computations ---------------------------------------------
    def critic_targets(self, rew, next_obs, done,
                       rng: np.random.Generator | None = None) -> np.ndarray:
        """Entropy-regularized TD targets from the frozen twin critics."""
        next_a, next_logp = self.sample_action(next_obs, rng=rng)
        next_in = np.concatenate([next_obs, next_a], axis=1)
        qt = np.minimum(self.q1_target.forward(next_in)[:, 0],
                        self.q2_target.forward(next_in)[:, 0])
        return rew + self.config.gamma * (1.0 - done) * (qt - self.alpha * next_logp)

    def critic_gradients(self, obs, act, target) -> float:
        """Accumulate gradients of the summed twin MSE losses; return loss."""
        n = len(obs)
        critic_in = np.concatenate([obs, act], axis=1)
        q1_pred = self.q1.forward(critic_in)[:, 0]
        self.q1.zero_grads()
        self.q1.backward((2.0 * (q1_pred - target) / n)[:, None])
        q2_pred = self.q2.forward(critic_in)[:, 0]
        self.q2.zero_grads()
        self.q2.backward((2.0 * (q2_pred - target) / n)[:, None])
        return float(np.mean((q1_pred - target) ** 2)
                     + np.mean((q2_pred - target) ** 2))

    def actor_gradients(self, obs, eps) -> tuple[float, np.ndarray]:
        """Accumulate policy gradients of mean(alpha * logp - min_q).

        ``eps`` is the fixed reparameterization noise.  Gradients reach the
        policy directly through the entropy terms and through the critics'
        action inputs; critic weight gradients picked up along the way are
        cleared before returning.
        """
        n = len(obs)
        alpha = self.alpha
        mean, raw, log_std = self._heads(obs)
        std = np.exp(log_std)
        u = mean + std * eps
        a_new = np.tanh(u)
        logp = (-0.5 * eps**2 - log_std - 0.5 * LOG_2PI).sum(axis=1)
        logp -= np.log(1.0 - a_new**2 + SQUASH_EPS).sum(axis=1)

        actor_in = np.concatenate([obs, a_new], axis=1)
        q1_new = self.q1.forward(actor_in)[:, 0]
        q2_new = self.q2.forward(actor_in)[:, 0]
        use_q1 = (q1_new <= q2_new).astype(float)
        q_min = np.where(use_q1 > 0, q1_new, q2_new)
        self.q1.zero_grads()
        self.q2.zero_grads()
        gin1 = self.q1.backward((-use_q1 / n)[:, None])
        gin2 = self.q2.backward((-(1.0 - use_q1) / n)[:, None])
        # d(loss)/d(action), already scaled by -1/n through the output grads.
        dq_da = (gin1 + gin2)[:, self.config.obs_dim:]
        self.q1.zero_grads()
        self.q2.zero_grads()

        one_minus_sq = 1.0 - a_new**2
        squash_grad = 2.0 * a_new * one_minus_sq / (one_minus_sq + SQUASH_EPS)
        d_u = (alpha / n) * squash_grad + dq_da * one_minus_sq
        d_mean = d_u
        d_log_std = -(alpha / n) * np.ones_like(log_std) + d_u * std * eps
        clamp_mask = (raw > LOG_STD_MIN) & (raw < LOG_STD_MAX)
        d_raw = d_log_std * clamp_mask
        self.policy.zero_grads()
        self.policy.backward(np.concatenate([d_mean, d_raw], axis=1))
        loss = float(np.mean(alpha * logp - q_min))
        return loss, logp

    # -- one gradient step -----------------------------------------------
    def update(self, batch) -> dict:
        obs, act, rew, next_obs, done = batch
        cfg = self.config

        target = self.critic_targets(rew, next_obs, done)
        critic_loss = self.critic_gradients(obs, act, target)
        self.opt_critic.step(self.q1.gradients + self.q2.gradients)

        eps = self.rng.standard_normal((len(obs), cfg.act_dim))
        actor_loss, logp = self.actor_gradients(obs, eps)
        self.opt_policy.step(self.policy.gradients)

        # Temperature: loss -log_alpha * mean(logp + entropy_target).
        entropy_gap = float(np.mean(logp) + cfg.entropy_target)
        self.opt_alpha.step([np.array([-entropy_gap])])
        alpha_loss = float(-self.log_alpha[0] * entropy_gap)

        polyak_update(self.q1_target, self.q1, cfg.tau)
        polyak_update(self.q2_target, self.q2, cfg.tau)
        self.grad_steps += 1
        return {
            "critic_loss": critic_loss,
            "actor_loss": actor_loss,
            "alpha_loss": alpha_loss,
            "alpha": self.alpha,
            "entropy": float(-np.mean(logp)),
        }

    # -- persistence -------------------------------------------------------
    def _named_arrays(self) -> list[tuple[str, np.ndarray]]:
        out: list[tuple[str, np.ndarray]] = []
        nets = (("policy", self.policy), ("q1", self.q1), ("q2", self.q2),
                ("q1_target", self.q1_target), ("q2_target", self.q2_target))
        for name, net in nets:
            for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                out.append((f"{name}.w{i}", w))
                out.append((f"{name}.b{i}", b))
        out.append(("log_alpha", self.log_alpha))
        opts = (("opt_policy", self.opt_policy), ("opt_critic", self.opt_critic),
                ("opt_alpha", self.opt_alpha))
        for name, opt in opts:
            for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                out.append((f"{name}.m{i}", m))
                out.append((f"{name}.v{i}", v))
        return out

    def save(self, path) -> None:
        arrays = self._named_arrays()
        payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                           for _, a in arrays)
        header = {
            "config": asdict(self.config),
            "arrays": [[name, list(a.shape)] for name, a in arrays],
            "env_steps": self.env_steps,
            "grad_steps": self.grad_steps,
            "adam_steps": {"opt_policy": self.opt_policy.t,
                           "opt_critic": self.opt_critic.t,
                           "opt_alpha": self.opt_alpha.t},
            "payload_sha256": hashlib.sha256(payload).hexdigest(),
        }
        blob = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", CHECKPOINT_VERSION))
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            fh.write(payload)

    @classmethod
    def load(cls, path, seed: int = 0) -> "SacAgent":
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
        if len(raw) < 16 or raw[:4] != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path} is not an agent checkpoint")
        version = struct.unpack("<I", raw[4:8])[0]
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"unsupported checkpoint version {version}, "
                f"expected {CHECKPOINT_VERSION}")
        header_len = struct.unpack("<Q", raw[8:16])[0]
        if len(raw) < 16 + header_len:
            raise CheckpointError(f"{path} is truncated inside the header")
        try:
            header = json.loads(raw[16:16 + header_len].decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path} has a corrupt header: {exc}") from exc
        payload = raw[16 + header_len:]
        expected = sum(int(np.prod(shape)) * 8 for _, shape in header["arrays"])
        if len(payload) != expected:
            raise CheckpointError(
                f"{path} payload is {len(payload)} bytes, expected {expected}")
        if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
            raise CheckpointError(f"{path} payload does not match its digest")

        config_dict = dict(header["config"])
        config_dict["hidden"] = tuple(config_dict["hidden"])
        agent = cls(SacConfig(**config_dict), seed=seed)
        offset = 0
        targets = dict(agent._named_arrays())
        for name, shape in header["arrays"]:
            if name not in targets:
                raise CheckpointError(f"{path} holds unknown array {name!r}")
            dst = targets[name]
            if list(dst.shape) != list(shape):
                raise CheckpointError(
                    f"{path}: array {name!r} has shape {shape}, "
                    f"expected {list(dst.shape)}")
            count = dst.size
            values = np.frombuffer(payload, dtype="<f8", count=count,
                                   offset=offset)
            dst[:] = values.reshape(dst.shape)
            offset += count * 8
        agent.env_steps = int(header["env_steps"])
        agent.grad_steps = int(header["grad_steps"])
        agent.opt_policy.t = int(header["adam_steps"]["opt_policy"])
        agent.opt_critic.t = int(header["adam_steps"]["opt_critic"])
        agent.opt_alpha.t = int(header["adam_steps"]["opt_alpha"])
        return agent


def evaluate_policy(agent: SacAgent, env: TuningEnv,
                    seeds) -> list[TuningEpisode]:
    """Run deterministic episodes on the given seeds and collect them."""
    episodes = []
    for seed in seeds:
        obs = env.reset(int(seed))
        done = False
        while not done:
            obs, _, done, _ = env.step(agent.act(obs))
        episodes.append(env.episode)
    return episodes


@dataclass
class TrainResult:
    history: list[dict] = field(default_factory=list)
    eval_history: list[dict] = field(default_factory=list)


def train_agent(agent: SacAgent, vec_env: VectorEnv, total_env_steps: int,
                seed: int, eval_env: TuningEnv | None = None,
                eval_seeds=(), eval_every: int = 0,
                checkpoint_path=None, log_every: int = 500) -> TrainResult:
    """Standard off-policy loop: uniform warm-up actions until
    ``start_steps``, then one gradient step per environment step."""
    cfg = agent.config
    if vec_env.observation_dim != cfg.obs_dim or vec_env.action_dim != cfg.act_dim:
        raise ConfigError("agent and environment dimensions differ")
    rng = np.random.default_rng(seed)
    buffer = ReplayBuffer(cfg.replay_capacity, cfg.obs_dim, cfg.act_dim)
    result = TrainResult()
    k = vec_env.num_envs
    obs = vec_env.reset([int(rng.integers(2**63 - 1)) for _ in range(k)])
    terminal_rewards: list[float] = []
    stats: dict = {}
    next_log = log_every
    next_eval = eval_every

    while agent.env_steps < total_env_steps:
        if agent.env_steps < cfg.start_steps:
            actions = rng.uniform(-1.0, 1.0, size=(k, cfg.act_dim))
        else:
            actions = agent.act_batch(obs)
        next_obs, rewards, dones, infos = vec_env.step(env_action(actions))
        for i in range(k):
            true_next = infos[i].get("terminal_observation", next_obs[i])
            buffer.add(obs[i], actions[i], rewards[i], true_next, dones[i])
            if dones[i]:
                terminal_rewards.append(float(rewards[i]))
        obs = next_obs
        agent.env_steps += k

        if agent.env_steps >= cfg.start_steps and len(buffer) >= cfg.batch_size:
            for _ in range(cfg.updates_per_step * k):
                stats = agent.update(buffer.sample(agent.rng, cfg.batch_size))

        if log_every and agent.env_steps >= next_log:
            next_log += log_every
            recent = terminal_rewards[-50:]
            entry = {"env_steps": agent.env_steps,
                     "episodes": len(terminal_rewards),
                     "mean_terminal_reward":
                         float(np.mean(recent)) if recent else 0.0}
            entry.update(stats)
            result.history.append(entry)

        if eval_every and eval_env is not None and agent.env_steps >= next_eval:
            next_eval += eval_every
            episodes = evaluate_policy(agent, eval_env, eval_seeds)
            result.eval_history.append({
                "env_steps": agent.env_steps,
                "mean_best_score":
                    float(np.mean([e.best_score for e in episodes])),
                "mean_improvement":
                    float(np.mean([e.improvement for e in episodes])),
            })
            if checkpoint_path is not None:
                agent.save(checkpoint_path)

    if checkpoint_path is not None:
        agent.save(checkpoint_path)
    return result
