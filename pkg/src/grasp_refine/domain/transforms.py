"""Rigid transforms and axis-angle rotation helpers."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.transform import Rotation

_SMALL_ANGLE = 1e-12


def rotvec_to_matrix(rotvec: np.ndarray) -> np.ndarray:
    """Rotation matrix of an axis-angle vector; batched over leading axes."""
    rotvec = np.asarray(rotvec, dtype=np.float64)
    flat = rotvec.reshape(-1, 3)
    matrices = Rotation.from_rotvec(flat).as_matrix()
    return matrices.reshape(rotvec.shape[:-1] + (3, 3))


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix [v]x."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotvec_derivatives(rotvec: np.ndarray) -> np.ndarray:
    """(3, 3, 3) partial derivatives dR/dr_i of the rotation matrix.

    Uses the closed form dR/dr_i = (r_i [r]x + [r x (I - R) e_i]x) R / |r|^2,
    falling back to [e_i]x at the identity.
    """
    r = np.asarray(rotvec, dtype=np.float64)
    theta2 = float(r @ r)
    eye = np.eye(3)
    if theta2 < _SMALL_ANGLE:
        return np.stack([skew(eye[i]) for i in range(3)])

    R = rotvec_to_matrix(r)
    rx = skew(r)
    out = np.empty((3, 3, 3))
    for i in range(3):
        out[i] = (r[i] * rx + skew(np.cross(r, (eye - R) @ eye[i]))) @ R / theta2
    return out


def orthonormalize(matrix: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (determinant +1) by SVD."""
    u, _, vt = np.linalg.svd(matrix)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def geodesic_angle(first: np.ndarray, second: np.ndarray) -> float:
    """Angle in radians of the relative rotation first * second^T."""
    relative = first @ second.T
    cos = (np.trace(relative) - 1.0) / 2.0
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


@dataclass(frozen=True)
class RigidTransform:
    """x -> R x + t with R = rotvec(increment) * base.

    The base matrix stays orthonormal; `folded` moves the increment into it.
    """

    base: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    increment: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))
        object.__setattr__(self, "increment", np.asarray(self.increment, dtype=np.float64).reshape(3))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_rotvec(cls, rotvec, translation=None) -> "RigidTransform":
        translation = np.zeros(3) if translation is None else translation
        return cls(rotvec_to_matrix(np.asarray(rotvec, dtype=np.float64)), translation)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "RigidTransform":
        matrix = np.asarray(matrix, dtype=np.float64)
        return cls(orthonormalize(matrix[:3, :3]), matrix[:3, 3])

    @property
    def rotation(self) -> np.ndarray:
        if not np.any(self.increment):
            return self.base
        return rotvec_to_matrix(self.increment) @ self.base

    @property
    def rotvec(self) -> np.ndarray:
        return Rotation.from_matrix(self.rotation).as_rotvec()

    def as_matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def folded(self) -> "RigidTransform":
        """Fold the increment into the base and re-orthonormalize."""
        return RigidTransform(orthonormalize(self.rotation), self.translation.copy())

    def compose(self, inner: "RigidTransform") -> "RigidTransform":
        """self after inner."""
        return RigidTransform(
            orthonormalize(self.rotation @ inner.rotation),
            self.rotation @ inner.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        R = self.rotation
        return RigidTransform(R.T.copy(), -R.T @ self.translation)

    def perturbed(self, delta_rotvec: np.ndarray, delta_translation: np.ndarray,
                  pivot: Optional[np.ndarray] = None) -> "RigidTransform":
        """Rotate by `delta_rotvec` about `pivot` (camera frame), then translate.

        The result is folded, so its increment is zero.
        """
        pivot = np.zeros(3) if pivot is None else np.asarray(pivot, dtype=np.float64)
        dR = rotvec_to_matrix(np.asarray(delta_rotvec, dtype=np.float64))
        rotation = orthonormalize(dR @ self.rotation)
        translation = dR @ (self.translation - pivot) + pivot + np.asarray(delta_translation, dtype=np.float64)
        return RigidTransform(rotation, translation)
