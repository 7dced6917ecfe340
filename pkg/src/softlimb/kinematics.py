"""Forward kinematics of the hybrid rigid/soft limb.

World frame: x forward, y left, z up.  The chain is

    base (tower foot) -> shoulder (yaw about z, then pitch) -> rigid link
    -> wrist (pitch) -> constant-curvature soft section -> tip

Every "bending" joint (pitch, wrist, curl) rotates the local heading (+x)
toward local +z for positive angles.  Angles are in degrees at the API
boundary and radians internally.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .config import get_float, get_int, get_section, get_vector
from .errors import ConfigError, InvalidInputError

JOINT_NAMES = ("yaw", "pitch", "wrist", "curl")


@dataclass(frozen=True)
class Frame:
    position: np.ndarray
    orientation: np.ndarray

    def compose(self, offset: "Frame") -> "Frame":
        """Express ``offset`` (given in this frame's coordinates) in the parent frame."""
        return Frame(
            self.position + self.orientation @ offset.position,
            self.orientation @ offset.orientation,
        )

    def to_local(self, point: np.ndarray) -> np.ndarray:
        return self.orientation.T @ (np.asarray(point, dtype=float) - self.position)

    @staticmethod
    def identity() -> "Frame":
        return Frame(np.zeros(3), np.eye(3))


@dataclass(frozen=True)
class CameraMount:
    """Where a camera sits: a segment index into the FK frame list plus a local offset."""

    name: str
    segment: int
    offset: Frame


@dataclass(frozen=True)
class LimbModel:
    base_height: float
    rigid_link_length: float
    soft_section_length: float
    num_soft_hinges: int
    joint_limits: np.ndarray  # (4, 2) degrees
    camera_mounts: tuple[CameraMount, ...] = field(default=())

    def __post_init__(self):
        limits = np.asarray(self.joint_limits, dtype=float)
        object.__setattr__(self, "joint_limits", limits)
        if min(self.base_height, self.rigid_link_length, self.soft_section_length) <= 0:
            raise ConfigError("limb lengths must be positive")
        if self.num_soft_hinges < 2:
            raise ConfigError("num_soft_hinges must be >= 2")
        if limits.shape != (4, 2) or not np.all(limits[:, 0] < limits[:, 1]):
            raise ConfigError("joint_limits must be 4 (min, max) pairs with min < max")
        if abs(limits[3]).max() > 180:
            raise ConfigError("curl limits must lie within [-180, 180] degrees")

    @property
    def lower(self) -> np.ndarray:
        return self.joint_limits[:, 0]

    @property
    def upper(self) -> np.ndarray:
        return self.joint_limits[:, 1]

    @property
    def num_frames(self) -> int:
        """base, shoulder, wrist, interior hinges, tip."""
        return self.num_soft_hinges + 3

    @classmethod
    def from_config(cls, parser: configparser.ConfigParser) -> "LimbModel":
        geo = get_section(parser, "geometry")
        limits = np.array([get_vector(get_section(parser, f"joint.{name}"), "limits", 2)
                           for name in JOINT_NAMES])
        mounts = []
        for section_name in parser.sections():
            if section_name.startswith("camera."):
                sec = parser[section_name]
                mounts.append(CameraMount(
                    name=section_name.split(".", 1)[1],
                    segment=get_int(sec, "segment"),
                    offset=offset_frame(get_vector(sec, "offset", 3), get_vector(sec, "rotation", 3)),
                ))
        return cls(
            base_height=get_float(geo, "base_height"),
            rigid_link_length=get_float(geo, "rigid_link_length"),
            soft_section_length=get_float(geo, "soft_section_length"),
            num_soft_hinges=get_int(geo, "num_soft_hinges"),
            joint_limits=limits,
            camera_mounts=tuple(mounts),
        )


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def bend(angle: float) -> np.ndarray:
    """Rotation about local y that tips the heading (+x) toward +z for angle > 0."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def offset_frame(translation, rotation_deg) -> Frame:
    """Local mount offset; ``rotation_deg`` is (roll, bend, yaw) applied as Rz @ bend @ Rx."""
    roll, pitch, yaw = np.radians(rotation_deg)
    return Frame(np.asarray(translation, dtype=float), rot_z(yaw) @ bend(pitch) @ rot_x(roll))


def _check_finite(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (4,):
        raise InvalidInputError(f"{what} must have 4 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} must be finite: {arr}")
    return arr


def clip_joints(raw, model: LimbModel) -> np.ndarray:
    """Clamp [yaw, pitch, wrist, curl] (deg) into the model's joint limits."""
    arr = _check_finite(raw, "joint angles")
    return np.clip(arr, model.lower, model.upper)


def apply_delta(joints, delta, model: LimbModel) -> np.ndarray:
    delta = _check_finite(delta, "joint delta")
    return clip_joints(np.asarray(joints, dtype=float) + delta, model)


def soft_section_frames(curl: float, length: float, n: int) -> list[Frame]:
    """Frames at ``n + 1`` equally spaced arc-length stations of a constant-curvature arc.

    Coordinates are local to the section base; the first frame is the identity
    and the last is the tip.  ``curl`` is the total bend in degrees.
    """
    if not np.isfinite(curl) or abs(curl) > 180:
        raise InvalidInputError(f"curl must lie in [-180, 180] degrees, got {curl}")
    if length <= 0 or n < 2:
        raise InvalidInputError("soft section needs length > 0 and n >= 2")
    theta = np.radians(curl)
    frames = []
    for k in range(n + 1):
        s = length * k / n
        phi = theta * k / n
        # sin(phi)/kappa and (1 - cos(phi))/kappa written to stay exact as theta -> 0
        along = s * _sinc(phi)
        lift = s * 0.5 * phi * _sinc(phi / 2) ** 2
        frames.append(Frame(np.array([along, 0.0, lift]), bend(phi)))
    return frames


def _sinc(x: float) -> float:
    """Unnormalized sinc, sin(x)/x."""
    return float(np.sinc(x / np.pi))


def forward_kinematics(joints, model: LimbModel) -> list[Frame]:
    """World frames: base, shoulder, wrist, interior soft hinges, tip.

    Index 2 (wrist) is also the base of the soft section; the tip is index -1.
    """
    yaw, pitch, wrist, curl = np.radians(np.asarray(joints, dtype=float))
    base = Frame.identity()
    shoulder = Frame(np.array([0.0, 0.0, model.base_height]), rot_z(yaw) @ bend(pitch))
    wrist_frame = shoulder.compose(
        Frame(np.array([model.rigid_link_length, 0.0, 0.0]), bend(wrist)))
    soft = soft_section_frames(np.degrees(curl), model.soft_section_length, model.num_soft_hinges)
    return [base, shoulder] + [wrist_frame.compose(f) for f in soft]


def tip_position(joints, model: LimbModel) -> np.ndarray:
    return forward_kinematics(joints, model)[-1].position
