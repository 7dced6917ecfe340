import numpy as np
import pytest

from softlimb.environment import (CONTINUOUS_CAP, EnvConfig, LimbEnv, Mode, decode_discrete,
                                  encode_observation)
from softlimb.errors import ConfigError, InvalidInputError, UsageError
from softlimb.kinematics import forward_kinematics
from softlimb.vision import detect


def make_env(parser, model, rig, mode="ContinuousCap5", setting="Kill0", seed=0, **kw):
    cfg = EnvConfig.from_config(parser, mode, setting, seed, **kw)
    return LimbEnv(cfg, model, rig, np.random.default_rng(seed))


def visible_pose_target(model, rig, joints=(0.0, 0.0, 0.0, 0.0)):
    """A target 0.5 m down the tip_a optical axis at the given pose."""
    from softlimb.vision import camera_poses
    pose = camera_poses(forward_kinematics(np.asarray(joints), model), rig)[0]
    return pose.position + 0.5 * pose.orientation[:, 0]


def test_encode_observation_examples(model):
    live = np.ones(4, dtype=bool)
    np.testing.assert_allclose(encode_observation(model.lower, live, model), [-1] * 4 + [1] * 4)
    mid = model.joint_limits.mean(axis=1)
    np.testing.assert_allclose(encode_observation(mid, live, model)[:4], 0, atol=1e-15)
    q = mid.copy()
    q[0], q[3] = 45, 180
    np.testing.assert_allclose(encode_observation(q, live, model)[:4], [1, 0, 0, 1], atol=1e-15)
    mask = np.array([True, False, True, False])
    np.testing.assert_array_equal(encode_observation(mid, mask, model)[4:], [1, 0, 1, 0])


@pytest.mark.parametrize("index, servo, sign", [(0, 0, 1), (1, 0, -1), (5, 2, -1), (6, 3, 1)])
def test_decode_discrete(index, servo, sign):
    expected = np.zeros(4)
    expected[servo] = sign * 22.5
    np.testing.assert_array_equal(decode_discrete(index), expected)


@pytest.mark.parametrize("bad", [-1, 8, 2.5, True])
def test_decode_discrete_rejects_bad_index(bad):
    with pytest.raises(InvalidInputError):
        decode_discrete(bad)


def test_reset_is_deterministic_per_seed(parser, model, rig):
    a = make_env(parser, model, rig, seed=4).reset()
    b = make_env(parser, model, rig, seed=4).reset()
    np.testing.assert_array_equal(a, b)


def test_kill0_observation_tail(parser, model, rig):
    env = make_env(parser, model, rig)
    for _ in range(20):
        np.testing.assert_array_equal(env.reset()[4:], [1, 1, 1, 1])


def test_resets_never_start_detected(parser, model, rig):
    env = make_env(parser, model, rig, setting="Kill1or2", seed=1)
    live = np.ones(4, dtype=bool)
    for _ in range(1000):
        env.reset()
        assert not detect(env.joints, live, env.cfg.target, model, rig).detected
        assert np.all(env.joints >= model.lower) and np.all(env.joints <= model.upper)


def test_trivially_visible_target_is_config_error(model, rig):
    # cameras fixed to the base with a near-180 degree view see the target from every pose
    from softlimb.kinematics import CameraMount, Frame
    from softlimb.vision import Camera, CameraIntrinsics, CameraRig
    wide = CameraIntrinsics(horizontal_fov=179.0, far=10.0)
    base_cam = Camera(CameraMount("base", 0, Frame.identity()), wide)
    rig_all = CameraRig((base_cam,) * 4)
    cfg = EnvConfig("ContinuousCap5", "Kill0", [1.0, 0.0, 0.0], 5, reset_attempts=100)
    env = LimbEnv(cfg, model, rig_all, np.random.default_rng(0))
    with pytest.raises(ConfigError, match="trivially visible"):
        env.reset()


def test_continuous_action_is_clipped(parser, model, rig):
    env = make_env(parser, model, rig, seed=2)
    env.reset()
    env.joints = np.zeros(4)
    env.step_continuous([100, 0, 0, 0])
    assert env.log.actions[0] == [36.0, 0.0, 0.0, 0.0]
    assert env.joints[0] == 36.0


def test_five_misses_truncate(parser, model, rig):
    env = make_env(parser, model, rig, seed=3)
    env.reset()
    results = []
    while not env.done:
        results.append(env.step_continuous(np.zeros(4)))
    # a zero action never changes the undetected start pose
    assert len(results) == CONTINUOUS_CAP
    assert [r.truncated for r in results] == [False] * 4 + [True]
    assert all(r.reward == 0 and not r.terminated for r in results)
    with pytest.raises(UsageError):
        env.step_continuous(np.zeros(4))


def test_moving_onto_target_terminates(parser, model, rig):
    env = make_env(parser, model, rig, seed=5)
    env.reset()
    env.cfg = EnvConfig(Mode.CONTINUOUS, "Kill0", visible_pose_target(model, rig, (10, 0, 0, 0)), 5)
    env.joints = np.array([-20.0, 0.0, 0.0, 0.0])
    env.mask = np.ones(4, dtype=bool)
    r = env.step_continuous([30, 0, 0, 0])
    assert r.terminated and r.reward == 1.0 and not r.truncated and env.done


def test_mode_is_enforced(parser, model, rig):
    env = make_env(parser, model, rig)
    env.reset()
    with pytest.raises(UsageError):
        env.step_discrete(0)
    denv = make_env(parser, model, rig, mode="DiscreteUncapped")
    denv.reset()
    with pytest.raises(UsageError):
        denv.step_continuous(np.zeros(4))


def test_step_before_reset_is_usage_error(parser, model, rig):
    with pytest.raises(UsageError):
        make_env(parser, model, rig).step_continuous(np.zeros(4))


def test_discrete_step_moves_one_servo(parser, model, rig):
    env = make_env(parser, model, rig, mode="DiscreteUncapped", seed=6)
    env.reset()
    env.joints = np.zeros(4)
    env.step_discrete(0)
    np.testing.assert_array_equal(env.joints, [22.5, 0, 0, 0])
    if not env.done:
        env.step_discrete(5)
        np.testing.assert_array_equal(env.joints, [22.5, 0, -22.5, 0])


def test_discrete_episode_runs_until_detection(parser, model, rig):
    env = make_env(parser, model, rig, mode="DiscreteUncapped", setting="Kill1", seed=7)
    rng = np.random.default_rng(0)
    for _ in range(20):
        env.reset()
        results = []
        while not env.done:
            results.append(env.step_discrete(int(rng.integers(8))))
        assert 1 <= len(results) <= env.max_steps
        assert all(r.reward == 0 for r in results[:-1])
        last = results[-1]
        assert last.reward == (1.0 if last.terminated else 0.0)
        assert last.terminated != last.truncated
        assert env.log.length == len(results)


def test_episode_contract_and_constant_mask(parser, model, rig):
    env = make_env(parser, model, rig, setting="Kill1or2", seed=8)
    rng = np.random.default_rng(1)
    for _ in range(300):
        tail = env.reset()[4:]
        while True:
            r = env.step_continuous(rng.uniform(-50, 50, 4))
            np.testing.assert_array_equal(r.observation[4:], tail)
            assert np.all(np.abs(r.observation[:4]) <= 1)
            assert not (r.terminated and r.truncated)
            assert (r.reward == 1.0) == r.terminated
            if r.terminated or r.truncated:
                break
        assert 1 <= env.log.length <= 5


def test_replay_reproduces_results(parser, model, rig):
    def play(actions=None):
        env = make_env(parser, model, rig, setting="Kill1", seed=9)
        rng = np.random.default_rng(2)
        out, taken = [], []
        for ep in range(10):
            env.reset()
            while not env.done:
                a = rng.uniform(-36, 36, 4) if actions is None else actions[len(taken)]
                taken.append(a)
                r = env.step_continuous(a)
                out.append((r.observation.tolist(), r.reward, r.terminated, r.truncated))
        return out, taken

    first, actions = play()
    second, _ = play(actions)
    assert first == second


def test_uncapped_continuous_mode_uses_safety_cap(parser):
    capped = EnvConfig.from_config(parser, "ContinuousCap5", "Kill0")
    uncapped = EnvConfig.from_config(parser, "ContinuousCap5", "Kill0", uncapped=True)
    assert capped.max_steps == 5
    assert uncapped.max_steps == parser.getint("env", "safety_cap") == 500


def test_record_layout(parser, model, rig):
    env = make_env(parser, model, rig, seed=10)
    env.reset()
    while not env.done:
        env.step_continuous(np.full(4, 10.0))
    rec = env.log.as_record()
    assert set(rec) == {"episode", "kill_mask", "start_joints", "actions", "length", "reward",
                        "detected", "truncated"}
    assert len(rec["actions"]) == rec["length"]
