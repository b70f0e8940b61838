"""Episode protocol, reward shape, observation layout, scenario sampling."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schedtune.cluster import PRESETS
from schedtune.errors import ConfigError, ProtocolError
from schedtune.scheduler import FIXED_WEIGHTS, SCORING_FUNCTIONS
from schedtune.tunenv import (
    EPS_REWARD,
    FAAS_COARSE_INDICES,
    FAAS_STATIC_NAMES,
    FaasTuningEnv,
    SpaceSet,
    SpaceVar,
    TRAIN_PRESETS,
    TuningEnv,
    TuningEpisode,
    VectorEnv,
    default_space_set,
    mask_static,
    sample_scenario,
)


class ScriptedEnv(TuningEnv):
    """Returns a fixed r0 followed by scripted per-step scores."""

    def __init__(self, r0, scores, n_steps=4, static=(0.5,), mask_level="full",
                 coarse=()):
        self._script = [float(r0)] + [float(s) for s in scores]
        self._static_raw = np.asarray(static, dtype=float)
        super().__init__(action_dim=2, static_dim=len(self._static_raw),
                         coarse_indices=coarse,
                         initial_action=np.array([0.5, 0.5]),
                         n_steps=n_steps, mask_level=mask_level)

    def _begin_episode(self, rng):
        it = iter(self._script)

        def evaluate(action):
            return next(it)

        return self._static_raw.copy(), evaluate, "scripted"


def run_scripted(r0, scores):
    env = ScriptedEnv(r0, scores, n_steps=len(scores))
    env.reset(0)
    rewards = []
    for _ in scores:
        _, reward, done, _ = env.step(np.array([0.5, 0.5]))
        rewards.append(reward)
    assert done
    return env, rewards


def test_reward_zero_until_terminal():
    _, rewards = run_scripted(0.5, [0.4, 0.7, 0.6, 0.5])
    assert rewards[:-1] == [0.0, 0.0, 0.0]


def test_terminal_reward_is_relative_improvement():
    _, rewards = run_scripted(0.5, [0.4, 0.7, 0.6, 0.5])
    assert rewards[-1] == pytest.approx((0.7 - 0.5) / 0.5, abs=1e-12)


def test_terminal_reward_negative_when_no_trial_beats_reference():
    _, rewards = run_scripted(0.5, [0.45, 0.45, 0.45, 0.45])
    assert rewards[-1] == pytest.approx(-0.1, abs=1e-12)


def test_terminal_reward_zero_reference_uses_epsilon_floor():
    _, rewards = run_scripted(0.0, [0.0, 0.0, 0.0, 0.0])
    assert rewards[-1] == 0.0
    _, rewards = run_scripted(0.0, [0.0, 1e-7, 0.0, 0.0])
    assert rewards[-1] == pytest.approx(1e-7 / EPS_REWARD, rel=1e-12)


@pytest.mark.parametrize("c", [0.1, 10.0])
def test_terminal_reward_invariant_to_score_scaling(c):
    base = [0.41, 0.62, 0.55, 0.47]
    _, rewards = run_scripted(0.5, base)
    _, scaled = run_scripted(0.5 * c, [s * c for s in base])
    assert scaled[-1] == pytest.approx(rewards[-1], abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(
    r0=st.floats(0.0, 1.0),
    scores=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6),
)
def test_terminal_reward_formula_property(r0, scores):
    _, rewards = run_scripted(r0, scores)
    expected = (max(scores) - r0) / max(r0, EPS_REWARD)
    assert rewards[-1] == pytest.approx(expected, rel=1e-9, abs=1e-12)
    assert all(r == 0.0 for r in rewards[:-1])


def test_reset_returns_zero_frames_and_zero_step_index():
    env = ScriptedEnv(0.5, [0.6] * 4, static=(0.25, 0.75))
    obs = env.reset(0)
    static, frames, step = np.split(obs, [2, 2 + env.n_frames * env.frame_width])
    assert np.array_equal(static, [0.25, 0.75])
    assert np.all(frames == 0.0)
    assert step[0] == 0.0


def test_frame_zero_carries_initial_pair_after_first_step():
    env = ScriptedEnv(0.5, [0.6] * 4)
    env.reset(0)
    action = np.array([0.1, 0.9])
    obs, _, _, _ = env.step(action)
    frames = obs[env.static_dim:-1].reshape(env.n_frames, env.frame_width)
    assert np.array_equal(frames[0], [0.5, 0.5, 0.5, 1.0])
    assert np.array_equal(frames[1], [0.1, 0.9, 0.6, 1.0])
    assert np.all(frames[2:] == 0.0)
    assert obs[-1] == pytest.approx(0.25)


def test_step_index_counts_completed_trials():
    env = ScriptedEnv(0.5, [0.6] * 4)
    env.reset(0)
    for k in range(1, 5):
        obs, _, _, _ = env.step(np.array([0.5, 0.5]))
        assert obs[-1] == pytest.approx(k / 4)


def test_step_after_done_raises():
    env, _ = run_scripted(0.5, [0.6] * 4)
    with pytest.raises(ProtocolError):
        env.step(np.array([0.5, 0.5]))


def test_step_before_reset_raises():
    env = ScriptedEnv(0.5, [0.6] * 4)
    with pytest.raises(ProtocolError):
        env.step(np.array([0.5, 0.5]))


def test_action_validation():
    env = ScriptedEnv(0.5, [0.6] * 4)
    env.reset(0)
    with pytest.raises(ConfigError):
        env.step(np.array([0.5]))
    with pytest.raises(ConfigError):
        env.step(np.array([0.5, 1.5]))
    with pytest.raises(ConfigError):
        env.step(np.array([-0.5, 0.5]))


def test_benchmark_calls_one_reset_plus_one_per_step():
    env, _ = run_scripted(0.5, [0.6] * 4)
    assert env.benchmark_calls == 5


def test_episode_improvement_empty_trials_is_zero():
    ep = TuningEpisode(r0=0.5, initial_action=np.zeros(2))
    assert ep.improvement == 0.0
    with pytest.raises(ConfigError):
        _ = ep.best_score


def test_mask_static_levels():
    feats = np.arange(1.0, 6.0)
    assert np.array_equal(mask_static(feats, "full", (1, 3)), feats)
    assert np.array_equal(mask_static(feats, "coarse", (1, 3)), [0, 2, 0, 4, 0])
    assert np.array_equal(mask_static(feats, "none", (1, 3)), np.zeros(5))
    with pytest.raises(ConfigError):
        mask_static(feats, "partial", ())


def test_mask_static_does_not_mutate_input():
    feats = np.arange(1.0, 6.0)
    mask_static(feats, "none", ())
    assert np.array_equal(feats, np.arange(1.0, 6.0))


def test_space_var_validation_and_normalize():
    with pytest.raises(ConfigError):
        SpaceVar("x", 2.0, 1.0)
    v = SpaceVar("x", 10.0, 10.0)
    with pytest.raises(ConfigError):
        v.normalize(10.0)
    v = SpaceVar("x", 0.0, 4.0)
    assert v.normalize(1.0) == 0.25
    assert v.normalize(9.0) == 1.0
    assert v.normalize(-3.0) == 0.0


def test_space_var_degenerate_sampling():
    v = SpaceVar("x", 10.0, 10.0)
    rng = np.random.default_rng(0)
    assert v.sample(rng) == 10.0
    assert v.sample_int(rng) == 10


def test_space_set_round_trip():
    space = default_space_set()
    clone = SpaceSet.from_dict(space.to_dict())
    assert clone.static == space.static
    assert clone.domain_train == space.domain_train
    assert clone.domain_test == space.domain_test
    assert clone.reward == space.reward
    assert clone.actions == space.actions
    assert np.array_equal(clone.initial_action, space.initial_action)


def test_space_set_rejects_initial_action_outside_bounds():
    space = default_space_set()
    payload = space.to_dict()
    payload["initial_action"][0] = 2.0
    with pytest.raises(ConfigError):
        SpaceSet.from_dict(payload)


def test_default_space_actions_match_scoring_functions():
    space = default_space_set()
    assert tuple(v.name for v in space.actions) == tuple(
        f"w_{n}" for n in SCORING_FUNCTIONS)
    assert np.array_equal(space.initial_action, FIXED_WEIGHTS)
    train = space.domain("train")
    assert train["requests_per_second"].min == train["requests_per_second"].max == 10
    assert train["percent_nodes_to_score"].min == 1.0


def test_sampled_scenarios_respect_domain_bounds():
    space = default_space_set()
    rng = np.random.default_rng(0)
    for mode, presets, node_lo, node_hi in (
        ("train", TRAIN_PRESETS, 30, 180),
        ("test", PRESETS, 200, 400),
    ):
        dom = space.domain(mode)
        for _ in range(50):
            sc = sample_scenario(space, mode, rng)
            assert sc.cluster_spec.preset in presets
            assert node_lo <= sc.cluster_spec.total_nodes <= node_hi
            rps_total = sum(r for _, r in sc.workload.functions)
            assert dom["requests_per_second"].min - 1e-9 <= rps_total \
                <= dom["requests_per_second"].max + 1e-9
            names = [fn.name for fn, _ in sc.workload.functions]
            assert len(set(names)) == len(names)
            assert dom["min_replicas"].min <= sc.options.min_replicas \
                <= dom["min_replicas"].max
            assert sc.options.min_replicas <= sc.options.max_replicas
            pct = sc.options.scheduler.percent_nodes_to_score
            assert dom["percent_nodes_to_score"].min - 1e-9 <= pct \
                <= dom["percent_nodes_to_score"].max + 1e-9


def test_scenario_rps_split_evenly_across_functions():
    space = default_space_set()
    rng = np.random.default_rng(3)
    sc = sample_scenario(space, "train", rng)
    per_fn = [r for _, r in sc.workload.functions]
    assert all(r == pytest.approx(per_fn[0]) for r in per_fn)
    assert sum(per_fn) == pytest.approx(10.0)


def test_scenario_digest_deterministic():
    space = default_space_set()
    a = sample_scenario(space, "test", np.random.default_rng(11))
    b = sample_scenario(space, "test", np.random.default_rng(11))
    c = sample_scenario(space, "test", np.random.default_rng(12))
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()


def test_faas_observation_dimension():
    env = FaasTuningEnv()
    assert env.static_dim == len(FAAS_STATIC_NAMES) == 20
    assert env.observation_dim == 20 + 5 * 10 + 1 == 71


def test_faas_static_features_well_formed():
    env = FaasTuningEnv(mode="train", mask_level="full")
    obs = env.reset(9)
    static = obs[:20]
    assert np.all(static >= 0.0) and np.all(static <= 1.0)
    assert static[:8].sum() == 1.0
    assert static[8:11].sum() == 1.0
    preset = PRESETS[int(np.argmax(static[:8]))]
    assert preset in TRAIN_PRESETS


def test_faas_coarse_mask_hides_fine_features():
    env = FaasTuningEnv(mode="train", mask_level="coarse")
    obs = env.reset(9)
    static = obs[:20]
    fine = [i for i in range(20) if i not in FAAS_COARSE_INDICES]
    assert np.all(static[fine] == 0.0)
    assert static[list(FAAS_COARSE_INDICES)].sum() > 0.0
    assert FAAS_COARSE_INDICES == (8, 9, 10, 11, 13, 14)


def test_faas_reset_deterministic():
    env_a = FaasTuningEnv(mode="train")
    env_b = FaasTuningEnv(mode="train")
    obs_a = env_a.reset(21)
    obs_b = env_b.reset(21)
    assert np.array_equal(obs_a, obs_b)
    assert env_a.episode.r0 == env_b.episode.r0
    a = np.full(8, 0.5)
    sa = env_a.step(a)[3]["score"]
    sb = env_b.step(a)[3]["score"]
    assert sa == sb


def test_vector_env_matches_single_instance():
    from schedtune.synthfuncs import SyntheticTuningEnv

    single = SyntheticTuningEnv("rastrigin")
    vec = VectorEnv([SyntheticTuningEnv("rastrigin"),
                     SyntheticTuningEnv("rastrigin")])
    obs_s = single.reset(5)
    obs_v = vec.reset([5, 77])
    assert np.array_equal(obs_v[0], obs_s)
    rng = np.random.default_rng(1)
    for _ in range(4):
        a = rng.uniform(0, 1, 2)
        obs_s, rew_s, done_s, _ = single.step(a)
        obs_v, rew_v, done_v, infos = vec.step(np.stack([a, a]))
        assert rew_v[0] == rew_s
        assert done_v[0] == done_s
        if done_s:
            assert np.array_equal(infos[0]["terminal_observation"], obs_s)
        else:
            assert np.array_equal(obs_v[0], obs_s)


def test_vector_env_auto_resets_finished_instances():
    from schedtune.synthfuncs import SyntheticTuningEnv

    vec = VectorEnv([SyntheticTuningEnv("ackley", n_steps=2)])
    vec.reset([3])
    actions = np.array([[0.4, 0.4]])
    vec.step(actions)
    obs, rewards, dones, infos = vec.step(actions)
    assert dones[0]
    assert infos[0]["terminal_observation"][-1] == 1.0
    # The returned observation is already a fresh episode.
    assert obs[0][-1] == 0.0
    frames = obs[0][3:-1]
    assert np.all(frames == 0.0)
    # The fresh episode accepts further steps without protocol errors.
    vec.step(actions)


def test_vector_env_validation():
    from schedtune.synthfuncs import SyntheticTuningEnv

    with pytest.raises(ConfigError):
        VectorEnv([])
    with pytest.raises(ConfigError):
        VectorEnv([SyntheticTuningEnv("ackley", n_steps=2),
                   SyntheticTuningEnv("ackley", n_steps=3)])
    vec = VectorEnv([SyntheticTuningEnv("ackley")])
    with pytest.raises(ConfigError):
        vec.reset([1, 2])


def test_faas_env_rejects_bad_configuration():
    with pytest.raises(ConfigError):
        FaasTuningEnv(mode="validation")
    with pytest.raises(ConfigError):
        FaasTuningEnv(mask_level="blurry")
    with pytest.raises(ConfigError):
        ScriptedEnv(0.5, [0.6], n_steps=0)
