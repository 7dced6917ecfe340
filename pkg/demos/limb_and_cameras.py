"""A tour of the simulated limb: pose it, place the cameras, ask who sees the target.

    python3 demos/limb_and_cameras.py
"""
import numpy as np

from softlimb.config import get_section, get_vector, load_config
from softlimb.kinematics import LimbModel, forward_kinematics
from softlimb.vision import CameraRig, camera_poses, detect, project, sample_kill_mask, KillSetting

parser = load_config()
model = LimbModel.from_config(parser)
rig = CameraRig.from_config(parser, model)
target = get_vector(get_section(parser, "env"), "target", 3)

for joints in ([0, 0, 0, 0], [10, 20, -30, 120], [15, -20, -20, 90]):
    frames = forward_kinematics(joints, model)
    print(f"joints {joints}: tip at {np.round(frames[-1].position, 3)}")
    for cam, pose in zip(rig.cameras, camera_poses(frames, rig)):
        hit = project(pose, cam.intrinsics, target)
        where = "out of view" if hit is None else f"pixel ({hit.u:.0f}, {hit.v:.0f}) depth {hit.depth:.2f} m"
        print(f"  {cam.name:>10}: axis {np.round(pose.orientation[:, 0], 2)}  target {where}")

# A kill mask blinds some cameras for a whole episode.
rng = np.random.default_rng(3)
mask = sample_kill_mask(KillSetting.KILL1, rng)
print("live cameras under Kill1:", [c.name for c, live in zip(rig.cameras, mask) if live])
print("detected with that mask at the last pose:", detect([15, -20, -20, 90], mask, target, model, rig))
