import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softlimb.errors import ConfigError
from softlimb.kinematics import CameraMount, Frame, forward_kinematics, offset_frame
from softlimb.oracles import rasterized_visible
from softlimb.vision import (Camera, CameraIntrinsics, CameraRig, KillSetting, camera_poses, detect,
                            project, sample_kill_mask, visible_cameras)

INTR = CameraIntrinsics()
ORIGIN = Frame.identity()


def test_intrinsics_defaults():
    assert (INTR.image_width, INTR.image_height, INTR.horizontal_fov) == (100, 100, 60.0)
    assert abs(INTR.focal_length - 50 / math.tan(math.radians(30))) < 1e-12


@pytest.mark.parametrize("kwargs", [dict(near=0.0), dict(near=2.0, far=1.0), dict(horizontal_fov=180),
                                    dict(image_width=0)])
def test_invalid_intrinsics(kwargs):
    with pytest.raises(ConfigError):
        CameraIntrinsics(**kwargs)


def test_project_on_axis_hits_centre():
    assert project(ORIGIN, INTR, [1, 0, 0]) == (50.0, 50.0, 1.0)


def test_project_outside_half_fov():
    # atan(0.6) = 30.96 deg exceeds the 30 deg half angle
    assert math.degrees(math.atan2(0.6, 1)) > 30
    assert project(ORIGIN, INTR, [1, 0.6, 0]) is None


def test_project_behind_camera():
    assert project(ORIGIN, INTR, [-1, 0, 0]) is None


def test_range_gate_is_half_open():
    assert project(ORIGIN, INTR, [INTR.far, 0, 0]) is not None
    assert project(ORIGIN, INTR, [INTR.far + 1e-9, 0, 0]) is None
    assert project(ORIGIN, INTR, [INTR.near, 0, 0]) is None


def test_image_axes_orientation():
    # left of the optical axis (+y) appears on the left (small u); up (+z) appears at the top (small v)
    p = project(ORIGIN, INTR, [1, 0.1, 0.1])
    assert p.u < 50 and p.v < 50


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-np.pi, np.pi), min_size=3, max_size=3),
       st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.floats(0.06, 1.499))
def test_optical_axis_maps_to_centre_for_any_pose(angles, position, depth):
    # depths stay clear of the far plane, where pose round-off decides the range gate
    pose = offset_frame(position, np.degrees(angles))
    target = pose.position + depth * pose.orientation[:, 0]
    p = project(pose, INTR, target)
    assert p is not None
    assert abs(p.u - 50) < 1e-9 and abs(p.v - 50) < 1e-9


def _single_mount_rig(model, mount):
    return CameraRig(tuple(Camera(mount, INTR) for _ in range(4)))


def test_identity_mount_equals_tip_frame(model):
    rig = _single_mount_rig(model, CameraMount("t", -1, Frame.identity()))
    frames = forward_kinematics([10, 20, -5, 60], model)
    pose = camera_poses(frames, rig)[0]
    np.testing.assert_array_equal(pose.position, frames[-1].position)
    np.testing.assert_array_equal(pose.orientation, frames[-1].orientation)


def test_translated_mount(model):
    rig = _single_mount_rig(model, CameraMount("t", -1, Frame(np.array([0, 0, 0.01]), np.eye(3))))
    frames = forward_kinematics([10, 20, -5, 60], model)
    pose = camera_poses(frames, rig)[0]
    np.testing.assert_allclose(pose.position, frames[-1].position + frames[-1].orientation @ [0, 0, 0.01],
                               atol=1e-15)


def test_default_rig_at_zero_pose_by_hand(rig, model):
    """Optical axes and positions composed by hand from the packaged mount table."""
    assert rig.names == ["tip_a", "tip_b", "connecting", "extension"]
    poses = camera_poses(forward_kinematics(np.zeros(4), model), rig)
    c30, s30, c60, s60 = math.cos(math.pi / 6), 0.5, 0.5, math.sin(math.pi / 3)
    expected = [
        ([0.46, 0, 0.2], [0, c30, -s30]),       # yawed 90 left, tilted 30 down
        ([0.46, 0, 0.2], [0, 0, 1]),            # looking straight up
        ([0.375, 0, 0.21], [0, 0, -1]),         # third hinge, looking down
        ([0.225, 0, 0.19], [c60, -s60, 0]),     # first hinge, yawed 60 right
    ]
    for pose, (pos, axis) in zip(poses, expected):
        np.testing.assert_allclose(pose.position, pos, atol=1e-12)
        np.testing.assert_allclose(pose.orientation[:, 0], axis, atol=1e-12)


def test_bad_segment_is_config_error(model):
    rig = _single_mount_rig(model, CameraMount("t", 9, Frame.identity()))
    with pytest.raises(ConfigError):
        camera_poses(forward_kinematics(np.zeros(4), model), rig)


def test_rig_needs_four_cameras():
    cam = Camera(CameraMount("t", -1, Frame.identity()), INTR)
    with pytest.raises(ConfigError):
        CameraRig((cam, cam, cam))


def test_detect_examples(rig, model):
    zero = np.zeros(4)
    target = np.array([0.46, 0, 0.7])  # 0.5 m along tip_b's axis
    live = np.ones(4, dtype=bool)
    res = detect(zero, live, target, model, rig)
    assert res.detected and res.detecting_camera == 1 and res.per_camera[1]

    tips_dead = np.array([False, False, True, True])
    res = detect(zero, tips_dead, target, model, rig)
    assert not res.detected and res.detecting_camera is None and res.per_camera[1]

    beyond = np.array([0.46, 0, 0.2 + INTR.far + 1e-6])
    assert not detect(zero, live, beyond, model, rig).detected


def test_detecting_camera_is_lowest_index(model):
    rig = _single_mount_rig(model, CameraMount("t", -1, Frame.identity()))
    target = forward_kinematics(np.zeros(4), model)[-1].position + [0.5, 0, 0]
    res = detect(np.zeros(4), np.array([False, True, True, True]), target, model, rig)
    assert res.detecting_camera == 1


@settings(max_examples=100, deadline=None)
@given(data=st.data())
def test_mask_monotonicity_and_independence(data, model, rig):
    q = np.array([data.draw(st.floats(lo, hi)) for lo, hi in model.joint_limits])
    target = np.array([data.draw(st.floats(0.0, 0.7)), data.draw(st.floats(-0.4, 0.4)),
                       data.draw(st.floats(0.0, 0.6))])
    small = np.array(data.draw(st.lists(st.booleans(), min_size=4, max_size=4)))
    extra = np.array(data.draw(st.lists(st.booleans(), min_size=4, max_size=4)))
    large = small | extra
    a, b = detect(q, small, target, model, rig), detect(q, large, target, model, rig)
    assert a.per_camera == b.per_camera == visible_cameras(q, target, model, rig)
    assert not a.detected or b.detected
    assert a.detected == any(p and l for p, l in zip(a.per_camera, small))


def test_kill0_keeps_everything_live(rng):
    for _ in range(100):
        assert sample_kill_mask(KillSetting.KILL0, rng).all()


def test_kill1_is_uniform_over_cameras(rng):
    masks = np.array([sample_kill_mask("Kill1", rng) for _ in range(40_000)])
    assert np.all((~masks).sum(axis=1) == 1)
    np.testing.assert_allclose((~masks).mean(axis=0), 0.25, atol=0.01)


def test_kill1or2_mixes_one_and_two(rng):
    masks = np.array([sample_kill_mask("Kill1or2", rng) for _ in range(40_000)])
    dead = (~masks).sum(axis=1)
    assert set(np.unique(dead)) == {1, 2}
    assert abs(np.mean(dead == 1) - 0.5) < 0.01
    np.testing.assert_allclose((~masks).mean(axis=0), 0.375, atol=0.015)


def test_kill_masks_are_reproducible():
    a = [sample_kill_mask("Kill1or2", np.random.default_rng(3)) for _ in range(5)]
    b = [sample_kill_mask("Kill1or2", np.random.default_rng(3)) for _ in range(5)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_kill_setting_parse():
    assert KillSetting.parse("kill1OR2") is KillSetting.KILL1OR2
    with pytest.raises(ConfigError):
        KillSetting.parse("Kill3")


def test_projection_agrees_with_rasterization_on_rig_poses(rig, model, rng):
    """Random limb poses and targets, each camera-local point checked against the ray oracle."""
    for _ in range(300):
        q = rng.uniform(model.lower, model.upper)
        target = rng.uniform([-0.2, -0.6, -0.2], [0.9, 0.6, 0.9])
        for pose, cam in zip(camera_poses(forward_kinematics(q, model), rig), rig.cameras):
            local = pose.to_local(target)
            assert (project(pose, cam.intrinsics, target) is not None) == rasterized_visible(local, cam.intrinsics)
