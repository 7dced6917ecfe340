"""Simulated camera rig: mount poses, pinhole visibility and camera-kill masks.

A camera looks along its local +x axis with local y to the left and z up.
Detection of the target is purely geometric: the target point must project
inside the image and lie within the camera's depth range.
"""
from __future__ import annotations

import configparser
import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .config import get_float, get_int, get_section
from .errors import ConfigError
from .kinematics import CameraMount, Frame, LimbModel, forward_kinematics

NUM_CAMERAS = 4


@dataclass(frozen=True)
class CameraIntrinsics:
    image_width: int = 100
    image_height: int = 100
    horizontal_fov: float = 60.0
    near: float = 0.05
    far: float = 1.5

    def __post_init__(self):
        if self.image_width <= 0 or self.image_height <= 0:
            raise ConfigError("image dimensions must be positive")
        if not 0 < self.near < self.far:
            raise ConfigError("camera range needs 0 < near < far")
        if not 0 < self.horizontal_fov < 180:
            raise ConfigError("horizontal_fov must lie in (0, 180) degrees")

    @property
    def focal_length(self) -> float:
        """Focal length in pixels (square pixels)."""
        return 0.5 * self.image_width / np.tan(np.radians(self.horizontal_fov) / 2)

    @property
    def principal_point(self) -> tuple[float, float]:
        return 0.5 * self.image_width, 0.5 * self.image_height


@dataclass(frozen=True)
class Camera:
    mount: CameraMount
    intrinsics: CameraIntrinsics

    @property
    def name(self) -> str:
        return self.mount.name


@dataclass(frozen=True)
class CameraRig:
    cameras: tuple[Camera, ...]

    def __post_init__(self):
        if len(self.cameras) != NUM_CAMERAS:
            raise ConfigError(f"the rig needs exactly {NUM_CAMERAS} cameras, got {len(self.cameras)}")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.cameras]

    @classmethod
    def from_config(cls, parser: configparser.ConfigParser, model: LimbModel) -> "CameraRig":
        rig = get_section(parser, "rig")
        order = rig.get("cameras", "").split()
        mounts = {m.name: m for m in model.camera_mounts}
        cameras = []
        for name in order:
            if name not in mounts:
                raise ConfigError(f"rig lists camera {name!r} but there is no [camera.{name}] section")
            sec = parser[f"camera.{name}"]
            intr = CameraIntrinsics(
                image_width=get_int(sec, "width") if "width" in sec else get_int(rig, "width"),
                image_height=get_int(sec, "height") if "height" in sec else get_int(rig, "height"),
                horizontal_fov=get_float(sec, "fov") if "fov" in sec else get_float(rig, "fov"),
                near=get_float(sec, "near") if "near" in sec else get_float(rig, "near"),
                far=get_float(sec, "far") if "far" in sec else get_float(rig, "far"),
            )
            cameras.append(Camera(mounts[name], intr))
        return cls(tuple(cameras))


class Projection(NamedTuple):
    u: float
    v: float
    depth: float


class DetectionResult(NamedTuple):
    detected: bool
    per_camera: tuple[bool, ...]
    detecting_camera: int | None


class KillSetting(str, enum.Enum):
    KILL0 = "Kill0"
    KILL1 = "Kill1"
    KILL1OR2 = "Kill1or2"

    @classmethod
    def parse(cls, text: str) -> "KillSetting":
        for member in cls:
            if member.value.lower() == str(text).strip().lower():
                return member
        raise ConfigError(f"unknown kill setting {text!r}; expected one of {[m.value for m in cls]}")


def camera_poses(frames: list[Frame], rig: CameraRig) -> list[Frame]:
    poses = []
    for cam in rig.cameras:
        seg = cam.mount.segment
        if not -len(frames) <= seg < len(frames):
            raise ConfigError(f"camera {cam.name!r} mounts on segment {seg}, "
                              f"but the limb has only {len(frames)} frames")
        poses.append(frames[seg].compose(cam.mount.offset))
    return poses


def project(pose: Frame, intr: CameraIntrinsics, target) -> Projection | None:
    """Pixel coordinates of ``target`` seen from ``pose``, or None when not in view."""
    x, y, z = pose.to_local(target)
    if not intr.near < x <= intr.far:
        return None
    f = intr.focal_length
    cx, cy = intr.principal_point
    u = cx - f * y / x
    v = cy - f * z / x
    if 0.0 <= u < intr.image_width and 0.0 <= v < intr.image_height:
        return Projection(float(u), float(v), float(x))
    return None


def visible_cameras(joints, target, model: LimbModel, rig: CameraRig) -> tuple[bool, ...]:
    poses = camera_poses(forward_kinematics(joints, model), rig)
    return tuple(project(p, c.intrinsics, target) is not None for p, c in zip(poses, rig.cameras))


def detect(joints, mask, target, model: LimbModel, rig: CameraRig) -> DetectionResult:
    per_camera = visible_cameras(joints, target, model, rig)
    hits = [i for i, (seen, live) in enumerate(zip(per_camera, mask)) if seen and live]
    return DetectionResult(bool(hits), per_camera, hits[0] if hits else None)


def sample_kill_mask(setting: KillSetting, rng: np.random.Generator) -> np.ndarray:
    """Boolean live-mask over the rig's cameras (True = feed active)."""
    setting = KillSetting(setting)
    live = np.ones(NUM_CAMERAS, dtype=bool)
    if setting is KillSetting.KILL0:
        return live
    if setting is KillSetting.KILL1:
        n_dead = 1
    else:
        n_dead = 1 if rng.random() < 0.5 else 2
    live[rng.choice(NUM_CAMERAS, size=n_dead, replace=False)] = False
    return live
