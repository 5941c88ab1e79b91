"""Rigid probe pose math: quaternions, local frames, and the six standard movements.

The probe frame convention used everywhere in this package:

* local X = lateral (image width)
* local Y = elevational (the image plane normal)
* local Z = depth (image height, pointing into the volume)

Quaternions are stored as ``[w, x, y, z]`` and map probe-local vectors into
world coordinates: ``v_world = q * v_local * q^-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

QUAT_NORM_TOL = 1e-9


class MovementType(IntEnum):
    """The six standard probe movements.

    Rotations about the local X/Y/Z axes come first, then translations along
    the same axes; this ordering is also the tie-break order used by the
    planner and the movement classifier.
    """

    FAN = 0     # rotate about local X
    ROCK = 1    # rotate about local Y
    ROTATE = 2  # rotate about local Z
    SLIDE = 3   # translate along local X
    SWEEP = 4   # translate along local Y
    PRESS = 5   # translate along local Z

    @property
    def is_rotation(self) -> bool:
        return self.value < 3

    @property
    def axis(self) -> int:
        """Local axis index (0=X, 1=Y, 2=Z) the movement acts on."""
        return self.value % 3

    @property
    def label(self) -> str:
        return self.name.capitalize()


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = math.sqrt(float(q @ q))
    if n == 0.0:
        raise ValueError("cannot normalize zero quaternion")
    return q / n


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_about_axis(axis: int, angle: float) -> np.ndarray:
    """Unit quaternion rotating by ``angle`` radians about local axis 0/1/2."""
    half = 0.5 * angle
    q = np.zeros(4)
    q[0] = math.cos(half)
    q[1 + axis] = math.sin(half)
    return q


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix; columns are the local X/Y/Z axes in world coords."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return quat_to_matrix(q) @ np.asarray(v, dtype=np.float64)


def quat_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic angle in radians between two orientations (sign-invariant)."""
    rel = quat_multiply(quat_conjugate(a), b)
    # atan2 form stays accurate near zero, unlike acos of the dot product
    return 2.0 * math.atan2(float(np.linalg.norm(rel[1:])), abs(float(rel[0])))


def quat_slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Constant-speed geodesic interpolation, shortest arc."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dot = float(np.dot(a, b))
    if dot < 0.0:
        b = -b
        dot = -dot
    if dot > 1.0 - 1e-12:
        return quat_normalize(a + t * (b - a))
    theta = math.acos(min(1.0, dot))
    s = math.sin(theta)
    return (math.sin((1.0 - t) * theta) / s) * a + (math.sin(t * theta) / s) * b


def quat_from_euler_xyz(rx: float, ry: float, rz: float) -> np.ndarray:
    """Quaternion for intrinsic rotations about X, then new Y, then new Z."""
    return quat_multiply(
        quat_multiply(quat_about_axis(0, rx), quat_about_axis(1, ry)),
        quat_about_axis(2, rz),
    )


def euler_intrinsic_xyz(q: np.ndarray) -> tuple[float, float, float, bool]:
    """Decompose into intrinsic X-Y-Z angles so R = Rx(a) @ Ry(b) @ Rz(c).

    Returns ``(rx, ry, rz, gimbal)``; ``gimbal`` is set when ``|ry|`` is within
    1e-3 rad of +-90 deg, where the decomposition is ill-conditioned (rz is
    then fixed to 0 and rx absorbs the remaining rotation).
    """
    r = quat_to_matrix(q)
    sy = min(1.0, max(-1.0, float(r[0, 2])))
    ry = math.asin(sy)
    gimbal = abs(abs(ry) - 0.5 * math.pi) < 1e-3
    if abs(sy) < 1.0 - 1e-12:
        rx = math.atan2(-r[1, 2], r[2, 2])
        rz = math.atan2(-r[0, 1], r[0, 0])
    else:
        # only rx +- rz is observable at the singularity
        rz = 0.0
        rx = math.atan2(math.copysign(1.0, sy) * r[1, 0], r[1, 1])
    return rx, ry, rz, gimbal


@dataclass(frozen=True)
class ProbePose:
    """Rigid pose of the virtual probe: tip position plus orientation.

    ``position`` is the top-center of the image plane in normalized volume
    units; ``orientation`` is a unit quaternion (checked to 1e-9).
    """

    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64).reshape(3).copy()
        q = np.asarray(self.orientation, dtype=np.float64).reshape(4).copy()
        n = float(np.linalg.norm(q))
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"orientation quaternion norm {n} too far from 1")
        if abs(n - 1.0) > QUAT_NORM_TOL:
            q = q / n
        pos.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", q)

    @staticmethod
    def identity() -> "ProbePose":
        return ProbePose(np.zeros(3))

    def local_axes(self) -> np.ndarray:
        """3x3 matrix whose columns are the local X/Y/Z axes in world coords."""
        return quat_to_matrix(self.orientation)

    def approx_equal(self, other: "ProbePose", pos_tol: float = 1e-9, rot_tol: float = 1e-9) -> bool:
        return (
            float(np.linalg.norm(self.position - other.position)) <= pos_tol
            and quat_angle(self.orientation, other.orientation) <= rot_tol
        )

    def to_dict(self) -> dict:
        return {"position": self.position.tolist(), "orientation": self.orientation.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "ProbePose":
        return ProbePose(np.asarray(d["position"]), np.asarray(d["orientation"]))


def apply_movement(pose: ProbePose, m: MovementType, amount: float) -> ProbePose:
    """One standard movement relative to the pose's own current frame.

    Rotations compose intrinsically (about the current local axis); amounts
    are radians. Translations move along the current local axis; amounts are
    normalized volume units. ``apply_movement(apply_movement(p, m, a), m, -a)``
    recovers ``p`` to within 1e-9.
    """
    if m.is_rotation:
        q = quat_normalize(quat_multiply(pose.orientation, quat_about_axis(m.axis, amount)))
        return ProbePose(pose.position, q)
    axis_world = quat_to_matrix(pose.orientation)[:, m.axis]
    return ProbePose(pose.position + amount * axis_world, pose.orientation)


def relative_movement_components(anchor: ProbePose, current: ProbePose) -> tuple[np.ndarray, np.ndarray, bool]:
    """Express the anchor->current delta in the anchor's local frame.

    Returns ``(translation_xyz, rotation_xyz, gimbal)``: translation components
    along the anchor's local axes (normalized units) and the intrinsic X-Y-Z
    angles (radians) of the relative orientation.
    """
    r_anchor = quat_to_matrix(anchor.orientation)
    t_local = r_anchor.T @ (current.position - anchor.position)
    q_rel = quat_multiply(quat_conjugate(anchor.orientation), current.orientation)
    rx, ry, rz, gimbal = euler_intrinsic_xyz(quat_normalize(q_rel))
    return t_local, np.array([rx, ry, rz]), gimbal
