"""Skinned parametric hand: forward kinematics, linear blend skinning and Jacobians.

Parameters follow the MANO layout: a 6-number global pose (axis-angle then
translation), 45 articulation numbers (axis-angle for joints 1..15) and 10
shape coefficients. The global rotation turns the skinned hand about the rig
origin before the translation is added.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .exceptions import EmptyContactSet, InvalidParams
from .mesh import TriMesh
from .sampling import SampleSource, SurfaceSamples
from .transforms import rotvec_derivatives, rotvec_to_matrix

JOINT_COUNT = 16
GLOBAL_DOF = 6
JOINT_DOF = 45
SHAPE_DOF = 10
PARAM_DOF = GLOBAL_DOF + JOINT_DOF

MANO_PARENTS = (-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 0, 10, 11, 0, 13, 14)
MANO_JOINT_NAMES = (
    "wrist",
    "index1", "index2", "index3",
    "middle1", "middle2", "middle3",
    "pinky1", "pinky2", "pinky3",
    "ring1", "ring2", "ring3",
    "thumb1", "thumb2", "thumb3",
)
CONTACT_REGIONS = (
    "thumb_tip", "index_tip", "middle_tip", "ring_tip", "pinky_tip",
    "thumb_middle", "index_middle", "middle_middle", "ring_middle", "pinky_middle",
    "palm",
)


@dataclass(frozen=True)
class HandParams:
    """MANO-compatible hand parameters."""

    global_pose: np.ndarray = field(default_factory=lambda: np.zeros(GLOBAL_DOF))
    joint_pose: np.ndarray = field(default_factory=lambda: np.zeros(JOINT_DOF))
    shape: np.ndarray = field(default_factory=lambda: np.zeros(SHAPE_DOF))

    def __post_init__(self):
        for name, size in (("global_pose", GLOBAL_DOF), ("joint_pose", JOINT_DOF), ("shape", SHAPE_DOF)):
            value = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1)
            if value.shape != (size,):
                raise InvalidParams(f"{name} must have length {size}, got {value.size}")
            if not np.all(np.isfinite(value)):
                raise InvalidParams(f"{name} must be finite")
            object.__setattr__(self, name, value)

    @classmethod
    def zeros(cls) -> "HandParams":
        return cls()

    @property
    def global_rotvec(self) -> np.ndarray:
        return self.global_pose[:3]

    @property
    def translation(self) -> np.ndarray:
        return self.global_pose[3:]

    def as_vector(self) -> np.ndarray:
        """The 51 optimized numbers: global pose then joint pose."""
        return np.concatenate([self.global_pose, self.joint_pose])

    def with_vector(self, vector: np.ndarray) -> "HandParams":
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (PARAM_DOF,):
            raise InvalidParams(f"parameter vector must have length {PARAM_DOF}")
        return HandParams(vector[:GLOBAL_DOF].copy(), vector[GLOBAL_DOF:].copy(), self.shape.copy())


@dataclass(frozen=True, eq=False)
class HandRig:
    """Rest mesh, skeleton, skinning weights, shape blendshapes and contact sites."""

    rest_mesh: TriMesh
    parents: np.ndarray
    joints: np.ndarray
    weights: np.ndarray
    shape_dirs: np.ndarray
    contact_sites: Dict[str, np.ndarray]
    joint_names: Tuple[str, ...] = MANO_JOINT_NAMES

    def __post_init__(self):
        object.__setattr__(self, "parents", np.asarray(self.parents, dtype=np.int64))
        object.__setattr__(self, "joints", np.asarray(self.joints, dtype=np.float64).reshape(-1, 3))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        object.__setattr__(self, "shape_dirs", np.asarray(self.shape_dirs, dtype=np.float64))
        object.__setattr__(self, "contact_sites",
                           {k: np.asarray(v, dtype=np.int64) for k, v in self.contact_sites.items()})
        self.validate()
        object.__setattr__(self, "_subtree", self._build_subtree())

    def validate(self) -> None:
        """Check the rig invariants.

        Raises:
            InvalidParams: If the skeleton, weights or contact sites are inconsistent
        """
        n_joints = len(self.parents)
        n_vertices = self.rest_mesh.vertex_count
        if n_joints != JOINT_COUNT or self.joints.shape != (JOINT_COUNT, 3):
            raise InvalidParams(f"rig must have {JOINT_COUNT} joints")
        if self.parents[0] != -1:
            raise InvalidParams("root joint must have no parent")
        # Parents precede children, which also rules out cycles
        for j in range(1, n_joints):
            if not (0 <= self.parents[j] < j):
                raise InvalidParams(f"joint {j} has invalid parent {self.parents[j]}")
        if self.weights.shape != (n_vertices, n_joints):
            raise InvalidParams("skinning weights must be (vertices, joints)")
        if np.any(self.weights < 0) or not np.allclose(self.weights.sum(axis=1), 1.0, atol=1e-6):
            raise InvalidParams("skinning weights must be nonnegative with rows summing to 1")
        if self.shape_dirs.shape != (n_vertices, 3, SHAPE_DOF):
            raise InvalidParams(f"shape blendshapes must be (vertices, 3, {SHAPE_DOF})")
        for name, ids in self.contact_sites.items():
            if len(ids) == 0 or ids.min() < 0 or ids.max() >= n_vertices:
                raise InvalidParams(f"contact site '{name}' has invalid vertex ids")

    def _build_subtree(self) -> np.ndarray:
        subtree = np.eye(JOINT_COUNT, dtype=bool)
        for j in range(JOINT_COUNT - 1, 0, -1):
            subtree[self.parents[j]] |= subtree[j]
        return subtree

    @property
    def subtree(self) -> np.ndarray:
        """subtree[k, j] is true when joint j is k or a descendant of k."""
        return self._subtree

    @property
    def dominant_joint(self) -> np.ndarray:
        """Joint with the largest skinning weight for every vertex."""
        return np.argmax(self.weights, axis=1)

    def shaped_vertices(self, shape: np.ndarray, ids: Optional[np.ndarray] = None) -> np.ndarray:
        if ids is None:
            return self.rest_mesh.vertices + self.shape_dirs @ shape
        return self.rest_mesh.vertices[ids] + self.shape_dirs[ids] @ shape


@dataclass(frozen=True)
class ContactDesignation:
    """Active contact regions of the hand."""

    regions: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(dict.fromkeys(self.regions)))

    def vertices(self, rig: HandRig) -> np.ndarray:
        """Sorted union of the active regions' vertex ids.

        Raises:
            EmptyContactSet: If no region is active
            InvalidParams: If a region is not in the rig's contact table
        """
        if not self.regions:
            raise EmptyContactSet()
        missing = [name for name in self.regions if name not in rig.contact_sites]
        if missing:
            raise InvalidParams(f"unknown contact region(s): {', '.join(missing)}")
        return np.unique(np.concatenate([rig.contact_sites[name] for name in self.regions]))


def forward_kinematics(rig: HandRig, joint_pose: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """World rotations and positions of every joint before the global transform.

    Returns:
        (local rotations, world rotations, world positions), shapes (16,3,3), (16,3,3), (16,3)
    """
    local = np.empty((JOINT_COUNT, 3, 3))
    local[0] = np.eye(3)
    local[1:] = rotvec_to_matrix(np.asarray(joint_pose).reshape(JOINT_COUNT - 1, 3))

    world_rot = np.empty_like(local)
    world_pos = np.empty((JOINT_COUNT, 3))
    world_rot[0] = local[0]
    world_pos[0] = rig.joints[0]
    for j in range(1, JOINT_COUNT):
        p = rig.parents[j]
        world_rot[j] = world_rot[p] @ local[j]
        world_pos[j] = world_pos[p] + world_rot[p] @ (rig.joints[j] - rig.joints[p])
    return local, world_rot, world_pos


def _joint_images(rig: HandRig, world_rot: np.ndarray, world_pos: np.ndarray, shaped: np.ndarray) -> np.ndarray:
    """(n, 16, 3) positions of every vertex carried rigidly by every joint."""
    offsets = shaped[:, None, :] - rig.joints[None, :, :]
    return np.einsum("jab,njb->nja", world_rot, offsets) + world_pos[None]


def pose_vertices(rig: HandRig, params: HandParams, ids: Optional[np.ndarray] = None) -> np.ndarray:
    """Posed positions of the selected vertices (all when `ids` is None)."""
    _, world_rot, world_pos = forward_kinematics(rig, params.joint_pose)
    shaped = rig.shaped_vertices(params.shape, ids)
    weights = rig.weights if ids is None else rig.weights[ids]
    skinned = np.einsum("nj,nja->na", weights, _joint_images(rig, world_rot, world_pos, shaped))
    return skinned @ rotvec_to_matrix(params.global_rotvec).T + params.translation


def pose_hand(rig: HandRig, params: HandParams) -> TriMesh:
    """Posed hand mesh: blendshapes, forward kinematics, skinning, then the global transform."""
    vertices = pose_vertices(rig, params)
    return TriMesh.create(vertices, rig.rest_mesh.triangles, drop_degenerate=False)


def posed_with_jacobian(rig: HandRig, params: HandParams, ids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Posed positions and their derivatives with respect to the 51 pose parameters.

    Column order: global rotation (3), global translation (3), joints 1..15 (3 each).
    Shape is held fixed.

    Returns:
        positions (n, 3) and Jacobian (n, 3, 51)
    """
    ids = np.asarray(ids, dtype=np.int64)
    local, world_rot, world_pos = forward_kinematics(rig, params.joint_pose)
    shaped = rig.shaped_vertices(params.shape, ids)
    weights = rig.weights[ids]
    images = _joint_images(rig, world_rot, world_pos, shaped)
    skinned = np.einsum("nj,nja->na", weights, images)

    global_rot = rotvec_to_matrix(params.global_rotvec)
    positions = skinned @ global_rot.T + params.translation

    n = len(ids)
    jac = np.zeros((n, 3, PARAM_DOF))
    for i, dR in enumerate(rotvec_derivatives(params.global_rotvec)):
        jac[:, :, i] = skinned @ dR.T
    jac[:, :, 3:6] = np.eye(3)[None]

    # u_k = sum over j in subtree(k) of w_j (A_j v - p_k)
    subtree = rig.subtree.astype(np.float64)
    sub_weighted = np.einsum("nj,kj,nja->nka", weights, subtree, images)
    sub_weight = weights @ subtree.T
    lever = sub_weighted - sub_weight[:, :, None] * world_pos[None]

    for k in range(1, JOINT_COUNT):
        parent_rot = world_rot[rig.parents[k]]
        rotvec = params.joint_pose[3 * (k - 1):3 * k]
        for i, dR in enumerate(rotvec_derivatives(rotvec)):
            M = global_rot @ parent_rot @ dR @ local[k].T @ parent_rot.T
            jac[:, :, GLOBAL_DOF + 3 * (k - 1) + i] = lever[:, k] @ M.T

    return positions, jac


def vertex_jacobian(rig: HandRig, params: HandParams, ids: Sequence[int]) -> np.ndarray:
    """(3*|ids|, 51) Jacobian of posed vertex positions; rows are x, y, z per vertex."""
    _, jac = posed_with_jacobian(rig, params, np.asarray(ids, dtype=np.int64))
    return jac.reshape(-1, PARAM_DOF)


def contact_points(rig: HandRig, params: HandParams, designation: ContactDesignation) -> SurfaceSamples:
    """Posed positions of the designated contact vertices.

    Raises:
        EmptyContactSet: If the designation is empty
    """
    ids = designation.vertices(rig)
    return SurfaceSamples(pose_vertices(rig, params, ids), SampleSource.HAND_CONTACT, vertices=ids)


def palm_frame(rig: HandRig, params: HandParams, region: str = "palm") -> Tuple[np.ndarray, np.ndarray]:
    """Center and outward unit normal of a posed contact region.

    The normal averages the area-weighted vertex normals of the region.
    """
    mesh = pose_hand(rig, params)
    ids = rig.contact_sites[region]
    corners = mesh.corners
    weighted = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    vertex_normals = np.zeros_like(mesh.vertices)
    for i in range(3):
        np.add.at(vertex_normals, mesh.triangles[:, i], weighted)
    normal = vertex_normals[ids].sum(axis=0)
    return mesh.vertices[ids].mean(axis=0), normal / np.linalg.norm(normal)
