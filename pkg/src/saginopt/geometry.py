"""Coordinate frames and angle extraction for array/link geometry.

A ``Frame`` maps local coordinates to global ones via ``global = R @ local + t``,
so its rotation columns are the local axes expressed in the global system.
Elevation is measured from the local z-axis (array boresight) and folded into
[0, pi/2]; azimuth is ``atan2`` in the local x-y plane.
"""

from dataclasses import dataclass

import numpy as np

ORTHONORMALITY_TOL = 1e-9


class ZeroVector(ValueError):
    """Direction requested for a point coincident with the frame origin."""


@dataclass(frozen=True)
class EulerAngles:
    """Rotation angles (radians) about the x, y and z axes, applied in that order."""

    beta_x: float
    beta_y: float
    beta_z: float


@dataclass(frozen=True)
class DirectionAngles:
    """Elevation from boresight in [0, pi/2] and azimuth in [-pi, pi]."""

    elevation: float
    azimuth: float


@dataclass(frozen=True)
class Frame:
    """Rigid placement of a local coordinate system in the global one."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))

    def is_valid(self, tol=ORTHONORMALITY_TOL):
        r = self.rotation
        if r.shape != (3, 3) or self.translation.shape != (3,):
            return False
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(self.translation)):
            return False
        if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
            return False
        return abs(np.linalg.det(r) - 1.0) <= tol


def identity_frame(translation=(0.0, 0.0, 0.0)):
    return Frame(np.eye(3), np.asarray(translation, dtype=float))


def _rot_x(b):
    c, s = np.cos(b), np.sin(b)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(b):
    c, s = np.cos(b), np.sin(b)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(b):
    c, s = np.cos(b), np.sin(b)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_from_euler(angles):
    """Compose R_x(beta_x) @ R_y(beta_y) @ R_z(beta_z).

    Any finite angles produce a proper rotation (orthonormal, det 1).
    """
    return _rot_x(angles.beta_x) @ _rot_y(angles.beta_y) @ _rot_z(angles.beta_z)


def to_local(frame, point):
    """Express a global point in the frame's local coordinates: R^T (p - t)."""
    return frame.rotation.T @ (np.asarray(point, dtype=float) - frame.translation)


def to_global(frame, point):
    """Inverse of :func:`to_local`."""
    return frame.rotation @ np.asarray(point, dtype=float) + frame.translation


def direction_angles(frame, target):
    """Elevation/azimuth of a global target as seen from the frame.

    Elevation is the angle from the local z-axis folded into [0, pi/2], so a
    target behind the panel maps onto the same steering angles as its mirror
    image; azimuth is atan2 over the local x-y components and defined as 0 at
    boresight where it would otherwise be arbitrary.

    Raises
    ------
    ZeroVector
        If the target lies within 1e-12 of the frame origin.
    """
    v = to_local(frame, target)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ZeroVector("target coincides with frame origin")
    elevation = np.arccos(np.clip(abs(v[2]) / n, -1.0, 1.0))
    if abs(v[0]) < 1e-15 and abs(v[1]) < 1e-15:
        azimuth = 0.0
    else:
        azimuth = np.arctan2(v[1], v[0])
    return DirectionAngles(float(elevation), float(azimuth))


def forward_halfspace(frame, point):
    """True iff the point lies strictly on the positive local-z side of the frame."""
    return to_local(frame, point)[2] > 0.0
