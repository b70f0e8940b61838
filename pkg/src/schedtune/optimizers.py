"""Sample-efficient weight optimizers for the tuning environments.

Every optimizer proposes points in the unit box [0, 1]^d.  They all see the
same evaluation budget: the environment's reset evaluates the fixed initial
weights (giving r0), then the optimizer supplies one suggestion per step.
``run_tuning`` drives a full episode and returns its TuningEpisode record.

The Bayesian optimizer keeps a Gaussian-process surrogate with a squared
exponential kernel over centered scores and suggests the maximizer of an
upper confidence bound over uniform candidates.  The TPE optimizer splits
observations into good and bad fractions, fits per-dimension Parzen windows
(truncated normals on [0, 1]) to each, and suggests the candidate with the
best good-to-bad density ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ProtocolError
from .scheduler import FIXED_WEIGHTS
from .tunenv import TuningEnv, TuningEpisode

_SQRT2 = math.sqrt(2.0)


def suggest_fixed(dim: int = 8) -> np.ndarray:
    """The hand-tuned default weights, independent of history."""
    if dim == FIXED_WEIGHTS.shape[0]:
        return FIXED_WEIGHTS.copy()
    return np.full(dim, 0.5)


def suggest_random(rng: np.random.Generator, dim: int = 8) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=dim)


@dataclass(frozen=True)
class GpParams:
    """Surrogate and acquisition settings for the Bayesian optimizer."""

    lengthscale: float = 0.5
    signal_var: float = 1.0
    noise_var: float = 1e-6
    ucb_beta: float = 0.5
    n_candidates: int = 2048

    def __post_init__(self):
        if self.lengthscale <= 0 or self.signal_var <= 0 or self.noise_var <= 0:
            raise ConfigError("kernel parameters must be positive")
        if self.n_candidates < 1:
            raise ConfigError("need at least one acquisition candidate")


def se_kernel(a: np.ndarray, b: np.ndarray, params: GpParams) -> np.ndarray:
    """Squared-exponential Gram matrix between row sets a and b."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    sq = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return params.signal_var * np.exp(-sq / (2.0 * params.lengthscale**2))


def gp_posterior(x_obs: np.ndarray, y_obs: np.ndarray, x_query: np.ndarray,
                 params: GpParams = GpParams()) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at query points, via Cholesky solves.

    Scores are centered on their mean before conditioning, so the returned
    mean is relative to that baseline; the acquisition only needs ranking.
    With no observations this degenerates to the prior (zero mean,
    signal variance).
    """
    x_query = np.atleast_2d(np.asarray(x_query, dtype=float))
    y_obs = np.asarray(y_obs, dtype=float).reshape(-1)
    if y_obs.size == 0:
        return np.zeros(len(x_query)), np.full(len(x_query), params.signal_var)
    x_obs = np.atleast_2d(np.asarray(x_obs, dtype=float))
    if x_obs.shape[0] != y_obs.shape[0]:
        raise ConfigError("x_obs and y_obs must have matching lengths")
    gram = se_kernel(x_obs, x_obs, params)
    gram[np.diag_indices_from(gram)] += params.noise_var
    chol = np.linalg.cholesky(gram)
    centered = y_obs - y_obs.mean()
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, centered))
    cross = se_kernel(x_query, x_obs, params)
    mean = cross @ alpha
    half = np.linalg.solve(chol, cross.T)
    var = np.maximum(params.signal_var - (half**2).sum(axis=0), 0.0)
    return mean, var


def suggest_bo(x_obs: np.ndarray, y_obs: np.ndarray, rng: np.random.Generator,
               dim: int = 8, params: GpParams = GpParams()) -> np.ndarray:
    """Maximize mean + beta * std over uniform candidates in the unit box."""
    candidates = rng.uniform(0.0, 1.0, size=(params.n_candidates, dim))
    mean, var = gp_posterior(x_obs, y_obs, candidates, params)
    ucb = mean + params.ucb_beta * np.sqrt(var)
    return candidates[int(np.argmax(ucb))]


@dataclass(frozen=True)
class TpeParams:
    gamma: float = 0.25
    n_candidates: int = 24
    n_startup: int = 1
    bandwidth_floor: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (0, 1)")
        if self.n_candidates < 1 or self.n_startup < 0:
            raise ConfigError("candidate and startup counts must be sensible")


def _parzen_components(locs: np.ndarray, floor: float) -> tuple[np.ndarray, np.ndarray]:
    """Component centers and bandwidths for a 1-D Parzen window on [0, 1].

    Each component's bandwidth is the larger distance to its neighboring
    components; a lone component spans the whole interval.
    """
    mus = np.sort(np.asarray(locs, dtype=float))
    if mus.size == 1:
        sigmas = np.array([1.0])
    else:
        gaps = np.diff(mus)
        left = np.concatenate([[gaps[0]], gaps])
        right = np.concatenate([gaps, [gaps[-1]]])
        sigmas = np.maximum(left, right)
    return mus, np.clip(sigmas, floor, 1.0)


def _truncnorm_z(mus: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """Probability mass each component keeps inside [0, 1]."""
    z = np.empty(len(mus))
    for i, (mu, sigma) in enumerate(zip(mus, sigmas)):
        upper = 0.5 * (1.0 + math.erf((1.0 - mu) / (sigma * _SQRT2)))
        lower = 0.5 * (1.0 + math.erf((0.0 - mu) / (sigma * _SQRT2)))
        z[i] = max(upper - lower, 1e-12)
    return z


def _parzen_pdf(x: np.ndarray, mus: np.ndarray, sigmas: np.ndarray,
                z: np.ndarray) -> np.ndarray:
    """Mixture density of truncated normals, evaluated inside [0, 1]."""
    diff = (x[:, None] - mus[None, :]) / sigmas[None, :]
    dens = np.exp(-0.5 * diff**2) / (sigmas[None, :] * math.sqrt(2.0 * math.pi))
    return (dens / z[None, :]).mean(axis=1)


def _parzen_sample(rng: np.random.Generator, mus: np.ndarray, sigmas: np.ndarray,
                   count: int) -> np.ndarray:
    """Rejection-sample the truncated mixture; falls back to clipping."""
    picks = rng.integers(0, len(mus), size=count)
    out = np.empty(count)
    pending = np.arange(count)
    for _ in range(1000):
        draw = rng.normal(mus[picks[pending]], sigmas[picks[pending]])
        ok = (draw >= 0.0) & (draw <= 1.0)
        out[pending[ok]] = draw[ok]
        pending = pending[~ok]
        if pending.size == 0:
            break
    else:
        out[pending] = np.clip(
            rng.normal(mus[picks[pending]], sigmas[picks[pending]]), 0.0, 1.0)
    return out


def suggest_tpe(x_obs: np.ndarray, y_obs: np.ndarray, rng: np.random.Generator,
                dim: int = 8, params: TpeParams = TpeParams()) -> np.ndarray:
    """Propose the candidate maximizing the good/bad density ratio.

    The top ceil(gamma * n) observations by score form the good set.  With
    no bad observations the bad density is uniform, so the ratio reduces to
    the good density alone.
    """
    y_obs = np.asarray(y_obs, dtype=float).reshape(-1)
    n = y_obs.size
    if n < max(params.n_startup, 1):
        return suggest_random(rng, dim)
    x_obs = np.atleast_2d(np.asarray(x_obs, dtype=float))
    if x_obs.shape != (n, dim):
        raise ConfigError("x_obs must be an (n, dim) array matching y_obs")
    n_good = math.ceil(params.gamma * n)
    order = np.argsort(-y_obs, kind="stable")
    good = x_obs[order[:n_good]]
    bad = x_obs[order[n_good:]]

    candidates = np.empty((params.n_candidates, dim))
    log_ratio = np.zeros(params.n_candidates)
    for d in range(dim):
        g_mus, g_sig = _parzen_components(good[:, d], params.bandwidth_floor)
        g_z = _truncnorm_z(g_mus, g_sig)
        col = _parzen_sample(rng, g_mus, g_sig, params.n_candidates)
        candidates[:, d] = col
        log_ratio += np.log(np.maximum(_parzen_pdf(col, g_mus, g_sig, g_z), 1e-300))
        if len(bad) > 0:
            b_mus, b_sig = _parzen_components(bad[:, d], params.bandwidth_floor)
            b_z = _truncnorm_z(b_mus, b_sig)
            log_ratio -= np.log(np.maximum(_parzen_pdf(col, b_mus, b_sig, b_z), 1e-300))
    return candidates[int(np.argmax(log_ratio))]


class Optimizer:
    """History-tracking wrapper with a common suggest/observe interface."""

    def __init__(self, dim: int = 8):
        if dim < 1:
            raise ConfigError("dimension must be positive")
        self.dim = dim
        self._x: list[np.ndarray] = []
        self._y: list[float] = []

    @property
    def history(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._y:
            return np.empty((0, self.dim)), np.empty(0)
        return np.stack(self._x), np.array(self._y)

    def observe(self, action: np.ndarray, score: float) -> None:
        a = np.asarray(action, dtype=float).reshape(-1)
        if a.shape != (self.dim,):
            raise ConfigError(f"observed action must have dimension {self.dim}")
        self._x.append(a.copy())
        self._y.append(float(score))

    def suggest(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


class FixedOptimizer(Optimizer):
    def suggest(self, rng: np.random.Generator) -> np.ndarray:
        return suggest_fixed(self.dim)


class RandomSearchOptimizer(Optimizer):
    def suggest(self, rng: np.random.Generator) -> np.ndarray:
        return suggest_random(rng, self.dim)


class BoOptimizer(Optimizer):
    def __init__(self, dim: int = 8, params: GpParams = GpParams()):
        super().__init__(dim)
        self.params = params

    def suggest(self, rng: np.random.Generator) -> np.ndarray:
        x, y = self.history
        return suggest_bo(x, y, rng, self.dim, self.params)


class TpeOptimizer(Optimizer):
    def __init__(self, dim: int = 8, params: TpeParams = TpeParams()):
        super().__init__(dim)
        self.params = params

    def suggest(self, rng: np.random.Generator) -> np.ndarray:
        x, y = self.history
        return suggest_tpe(x, y, rng, self.dim, self.params)


OPTIMIZERS = {
    "fixed": FixedOptimizer,
    "random": RandomSearchOptimizer,
    "bo": BoOptimizer,
    "tpe": TpeOptimizer,
}


def make_optimizer(method: str, dim: int = 8) -> Optimizer:
    try:
        return OPTIMIZERS[method](dim)
    except KeyError:
        raise ConfigError(
            f"unknown method {method!r}, expected one of {sorted(OPTIMIZERS)}"
        ) from None


def run_tuning(optimizer: Optimizer, env: TuningEnv, seed: int,
               rng: np.random.Generator | None = None) -> TuningEpisode:
    """One full episode: reset (evaluates the fixed initial weights), then
    one suggestion per environment step.  Total benchmark runs: n_steps + 1.
    """
    if optimizer.dim != env.action_dim:
        raise ConfigError("optimizer and environment dimensions differ")
    if rng is None:
        rng = np.random.default_rng(seed)
    env.reset(seed)
    optimizer.observe(env.initial_action, env.episode.r0)
    done = False
    for _ in range(env.n_steps):
        action = optimizer.suggest(rng)
        _, _, done, info = env.step(action)
        optimizer.observe(action, info["score"])
    if not done:
        raise ProtocolError("episode did not finish in n_steps steps")
    return env.episode
