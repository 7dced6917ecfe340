import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softlimb.errors import ConfigError, InvalidInputError
from softlimb.kinematics import (LimbModel, apply_delta, clip_joints, forward_kinematics, rot_z,
                                 soft_section_frames, tip_position)
from softlimb.oracles import integrated_tip


def joint_states(model):
    return st.tuples(*[st.floats(lo, hi) for lo, hi in model.joint_limits]).map(np.array)


DEFAULT_LIMITS = np.array([[-45, 45], [-45, 45], [-75, 75], [-90, 180]], dtype=float)


@pytest.fixture(scope="module")
def limb():
    return LimbModel(0.2, 0.15, 0.3, 4, DEFAULT_LIMITS)


def test_default_config_matches_documented_limits(model):
    np.testing.assert_array_equal(model.joint_limits, DEFAULT_LIMITS)
    assert (model.base_height, model.rigid_link_length, model.soft_section_length) == (0.2, 0.15, 0.3)
    assert model.num_soft_hinges == 4


@pytest.mark.parametrize("raw, expected", [
    ([0, 0, 0, 0], [0, 0, 0, 0]),
    ([100, 0, 0, 0], [45, 0, 0, 0]),
    ([-50, 50, -80, 200], [-45, 45, -75, 180]),
])
def test_clip_joints_examples(limb, raw, expected):
    np.testing.assert_array_equal(clip_joints(raw, limb), expected)


@pytest.mark.parametrize("bad", [[np.nan, 0, 0, 0], [0, np.inf, 0, 0], [0, 0, 0]])
def test_clip_joints_rejects_bad_input(limb, bad):
    with pytest.raises(InvalidInputError):
        clip_joints(bad, limb)


@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4))
def test_clip_is_idempotent_and_within_limits(raw):
    limb = LimbModel(0.2, 0.15, 0.3, 4, DEFAULT_LIMITS)
    once = clip_joints(raw, limb)
    np.testing.assert_array_equal(clip_joints(once, limb), once)
    assert np.all(once >= limb.lower) and np.all(once <= limb.upper)


@pytest.mark.parametrize("joints, delta, expected", [
    ([0, 0, 0, 0], [36, -36, 0, 0], [36, -36, 0, 0]),
    ([40, 0, 0, 0], [36, 0, 0, 0], [45, 0, 0, 0]),
    ([-45, 45, -75, 180], [-36, 36, -36, 36], [-45, 45, -75, 180]),
])
def test_apply_delta_examples(limb, joints, delta, expected):
    np.testing.assert_array_equal(apply_delta(joints, delta, limb), expected)


def test_apply_delta_rejects_non_finite(limb):
    with pytest.raises(InvalidInputError):
        apply_delta([0, 0, 0, 0], [0, np.nan, 0, 0], limb)


@pytest.mark.parametrize("kwargs", [
    dict(base_height=0.0), dict(num_soft_hinges=1),
    dict(joint_limits=[[45, -45], [-45, 45], [-75, 75], [-90, 180]]),
    dict(joint_limits=[[-45, 45], [-45, 45], [-75, 75], [-90, 270]]),
])
def test_invalid_models_are_config_errors(kwargs):
    base = dict(base_height=0.2, rigid_link_length=0.15, soft_section_length=0.3,
                num_soft_hinges=4, joint_limits=DEFAULT_LIMITS)
    with pytest.raises(ConfigError):
        LimbModel(**{**base, **kwargs})


def test_straight_soft_section():
    frames = soft_section_frames(0.0, 0.3, 4)
    assert len(frames) == 5
    np.testing.assert_allclose(frames[-1].position, [0.3, 0, 0], atol=1e-15)
    np.testing.assert_allclose(frames[-1].orientation, np.eye(3), atol=1e-15)


def test_half_turn_curl_closed_form():
    L = 0.3
    tip = soft_section_frames(180.0, L, 4)[-1]
    assert abs(np.linalg.norm(tip.position) - 2 * L / math.pi) < 1e-9
    np.testing.assert_allclose(tip.orientation[:, 0], [-1, 0, 0], atol=1e-12)


def test_quarter_turn_curl_closed_form():
    L = 0.3
    theta = math.pi / 2
    tip = soft_section_frames(90.0, L, 4)[-1]
    assert abs(np.linalg.norm(tip.position) - 2 * (L / theta) * math.sin(theta / 2)) < 1e-12
    # circle of radius L/theta centred at (0, 0, L/theta)
    np.testing.assert_allclose(tip.position, [L / theta, 0, L / theta], atol=1e-12)


@pytest.mark.parametrize("curl", [-90.0, -30.0, 45.0, 120.0, 180.0])
def test_soft_frames_lie_on_arc_with_equal_spacing(curl):
    L, n = 0.3, 6
    theta = math.radians(curl)
    r = L / theta
    frames = soft_section_frames(curl, L, n)
    centre = np.array([0.0, 0.0, r])
    for k, f in enumerate(frames):
        assert abs(np.linalg.norm(f.position - centre) - abs(r)) < 1e-12
        # heading turned by theta * k / n
        phi = theta * k / n
        np.testing.assert_allclose(f.orientation[:, 0], [math.cos(phi), 0, math.sin(phi)], atol=1e-12)
    chords = [np.linalg.norm(b.position - a.position) for a, b in zip(frames, frames[1:])]
    np.testing.assert_allclose(chords, chords[0], rtol=1e-12)


def test_arc_length_preserved_as_hinges_grow():
    L = 0.3
    for curl in (60.0, 180.0):
        frames = soft_section_frames(curl, L, 256)
        total = sum(np.linalg.norm(b.position - a.position) for a, b in zip(frames, frames[1:]))
        assert total <= L
        assert (L - total) / L < 1e-3


def test_straight_limit_continuity():
    straight = soft_section_frames(0.0, 0.3, 4)[-1].position
    nearly = soft_section_frames(1e-6, 0.3, 4)[-1].position
    assert np.linalg.norm(straight - nearly) < 1e-6


def test_soft_section_rejects_out_of_range_curl():
    with pytest.raises(InvalidInputError):
        soft_section_frames(181.0, 0.3, 4)


def test_zero_pose_tip(limb):
    np.testing.assert_allclose(tip_position(np.zeros(4), limb), [0.45, 0, 0.2], atol=1e-15)
    assert len(forward_kinematics(np.zeros(4), limb)) == limb.num_frames == 7


def test_yaw_rotates_zero_pose_tip(limb):
    expected = rot_z(math.radians(45)) @ (tip_position(np.zeros(4), limb))
    np.testing.assert_allclose(tip_position([45, 0, 0, 0], limb), expected, atol=1e-15)


def test_worked_pose_matches_hand_composition_and_oracle(limb):
    joints = [10.0, 20.0, -30.0, 120.0]
    yaw, pitch, wrist, curl = np.radians(joints)
    # hand composition: heading after pitch is tipped up by `pitch`, wrist adds `wrist`
    heading = lambda elev: rot_z(yaw) @ np.array([math.cos(elev), 0, math.sin(elev)])
    p = np.array([0, 0, 0.2]) + 0.15 * heading(pitch)
    r = 0.3 / curl
    chord_local = np.array([r * math.sin(curl), 0, r * (1 - math.cos(curl))])
    base_elev = pitch + wrist
    # rotate the chord by the soft base elevation then by yaw
    c, s = math.cos(base_elev), math.sin(base_elev)
    chord = rot_z(yaw) @ np.array([c * chord_local[0] - s * chord_local[2], 0,
                                   s * chord_local[0] + c * chord_local[2]])
    expected = p + chord
    np.testing.assert_allclose(tip_position(joints, limb), expected, atol=1e-12)
    assert np.linalg.norm(tip_position(joints, limb) - integrated_tip(joints, limb)) < 1e-6


def test_fk_matches_integration_oracle_on_random_states(limb):
    rng = np.random.default_rng(7)
    for q in rng.uniform(limb.lower, limb.upper, size=(50, 4)):
        assert np.linalg.norm(tip_position(q, limb) - integrated_tip(q, limb)) < 1e-6


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_fk_structural_invariants(data):
    limb = LimbModel(0.2, 0.15, 0.3, 4, DEFAULT_LIMITS)
    q = data.draw(joint_states(limb))
    frames = forward_kinematics(q, limb)
    for f in frames:
        np.testing.assert_allclose(f.orientation.T @ f.orientation, np.eye(3), atol=1e-9)
        assert abs(np.linalg.det(f.orientation) - 1) < 1e-9
    assert abs(np.linalg.norm(frames[2].position - frames[1].position) - 0.15) < 1e-9
    # yaw equivariance
    q0 = q.copy()
    q0[0] = 0.0
    np.testing.assert_allclose(tip_position(q, limb),
                               rot_z(math.radians(q[0])) @ tip_position(q0, limb), atol=1e-12)


def test_fk_is_deterministic(limb):
    q = [12.5, -3.0, 40.0, 77.0]
    a, b = forward_kinematics(q, limb), forward_kinematics(q, limb)
    for fa, fb in zip(a, b):
        assert np.array_equal(fa.position, fb.position) and np.array_equal(fa.orientation, fb.orientation)
