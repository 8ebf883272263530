"""Procedural capsule hand with MANO skeleton topology.

Rest pose: right hand, fingers along +y, palm facing -z, thumb on the -x side,
wrist joint at the origin. The palm is a subdivided box and every digit is a
separate closed tube with a flat base and a hemispherical tip, so the rest mesh
is watertight and free of self-intersections.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import trimesh

from .hand import CONTACT_REGIONS, JOINT_COUNT, MANO_PARENTS, SHAPE_DOF, HandRig
from .mesh import TriMesh

PALM_HALF_WIDTH = 0.047
PALM_LENGTH = 0.09
PALM_HALF_THICKNESS = 0.012
FINGER_BASE_Y = 0.092
PALM_NORMAL = np.array([0.0, 0.0, -1.0])

RING_SEGMENTS = 12
RING_SPACING = 0.004
CAP_RINGS = 4
BLEND_HALF_WIDTH = 0.004
PAD_RADIUS = 0.006


@dataclass(frozen=True)
class DigitSpec:
    name: str
    joints: Tuple[int, int, int]
    base: Tuple[float, float, float]
    direction: Tuple[float, float, float]
    radius: float
    lengths: Tuple[float, float, float]


DIGITS = (
    DigitSpec("index", (1, 2, 3), (-0.0405, FINGER_BASE_Y, 0.0), (0.0, 1.0, 0.0), 0.008, (0.040, 0.025, 0.022)),
    DigitSpec("middle", (4, 5, 6), (-0.0135, FINGER_BASE_Y, 0.0), (0.0, 1.0, 0.0), 0.008, (0.044, 0.028, 0.024)),
    DigitSpec("pinky", (7, 8, 9), (0.0405, FINGER_BASE_Y, 0.0), (0.0, 1.0, 0.0), 0.0075, (0.034, 0.021, 0.021)),
    DigitSpec("ring", (10, 11, 12), (0.0135, FINGER_BASE_Y, 0.0), (0.0, 1.0, 0.0), 0.008, (0.041, 0.027, 0.023)),
    DigitSpec("thumb", (13, 14, 15), (-0.057, 0.015, 0.0), (-0.6, 0.8, 0.0), 0.0095, (0.040, 0.032, 0.028)),
)


def _tube(spec: DigitSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed tube along the digit axis.

    Returns:
        vertices, triangles and the axial coordinate of every vertex
    """
    base = np.asarray(spec.base)
    axis = np.asarray(spec.direction) / np.linalg.norm(spec.direction)
    side = np.cross(PALM_NORMAL, axis)
    r = spec.radius
    total = float(sum(spec.lengths))
    straight = total - r

    stations = list(np.linspace(0.0, straight, int(np.ceil(straight / RING_SPACING)) + 1))
    radii = [r] * len(stations)
    for k in range(1, CAP_RINGS):
        phi = 0.5 * np.pi * k / CAP_RINGS
        stations.append(straight + r * np.sin(phi))
        radii.append(r * np.cos(phi))

    alpha = 2.0 * np.pi * np.arange(RING_SEGMENTS) / RING_SEGMENTS
    around = np.cos(alpha)[:, None] * side + np.sin(alpha)[:, None] * PALM_NORMAL

    vertices = [base[None]]
    axial = [0.0]
    for t, rho in zip(stations, radii):
        vertices.append(base + t * axis + rho * around)
        axial.extend([t] * RING_SEGMENTS)
    vertices.append((base + total * axis)[None])
    axial.append(total)
    vertices = np.concatenate(vertices)

    n_rings = len(stations)
    tip = len(vertices) - 1
    ring = lambda i, a: 1 + i * RING_SEGMENTS + a % RING_SEGMENTS
    triangles = []
    for a in range(RING_SEGMENTS):
        triangles.append((0, ring(0, a + 1), ring(0, a)))
        for i in range(n_rings - 1):
            triangles.append((ring(i, a), ring(i, a + 1), ring(i + 1, a + 1)))
            triangles.append((ring(i, a), ring(i + 1, a + 1), ring(i + 1, a)))
        triangles.append((ring(n_rings - 1, a), ring(n_rings - 1, a + 1), tip))
    return vertices, np.asarray(triangles), np.asarray(axial)


def _digit_weights(spec: DigitSpec, axial: np.ndarray) -> np.ndarray:
    """Piecewise-linear skinning along the digit axis, blended around each joint."""
    weights = np.zeros((len(axial), JOINT_COUNT))
    j1, j2, j3 = spec.joints
    b1 = spec.lengths[0]
    b2 = b1 + spec.lengths[1]
    h = BLEND_HALF_WIDTH

    # Base of the digit is shared with the wrist
    near_base = np.clip(axial / h, 0.0, 1.0)
    first = np.clip((axial - (b1 - h)) / (2 * h), 0.0, 1.0)
    second = np.clip((axial - (b2 - h)) / (2 * h), 0.0, 1.0)

    weights[:, 0] = 0.5 * (1.0 - near_base)
    weights[:, j1] = (0.5 + 0.5 * near_base) * (1.0 - first)
    weights[:, j2] = first * (1.0 - second)
    weights[:, j3] = second
    return weights


def tip_station(spec: DigitSpec) -> float:
    """Distance along the digit axis from its base to the center of the fingertip pad."""
    return float(sum(spec.lengths)) - spec.radius - 0.004


def _pad_vertices(vertices: np.ndarray, spec: DigitSpec, station: float) -> np.ndarray:
    axis = np.asarray(spec.direction) / np.linalg.norm(spec.direction)
    pad = np.asarray(spec.base) + station * axis + spec.radius * PALM_NORMAL
    return np.flatnonzero(np.linalg.norm(vertices - pad, axis=1) <= PAD_RADIUS)


def _palm() -> Tuple[np.ndarray, np.ndarray]:
    box = trimesh.creation.box(extents=(2 * PALM_HALF_WIDTH, PALM_LENGTH, 2 * PALM_HALF_THICKNESS))
    vertices, faces = box.vertices, box.faces
    for _ in range(3):
        vertices, faces = trimesh.remesh.subdivide(vertices, faces)
    vertices = np.asarray(vertices) + np.array([0.0, 0.5 * PALM_LENGTH, 0.0])
    return vertices, np.asarray(faces)


def builtin_capsule_hand() -> HandRig:
    """Build the procedural right-hand rig.

    Returns:
        A HandRig whose rest mesh is watertight, with 16 joints in MANO order
        and all 11 contact regions populated
    """
    parts: List[TriMesh] = []
    weights: List[np.ndarray] = []
    radial: List[np.ndarray] = []
    sites: Dict[str, np.ndarray] = {}
    joints = np.zeros((JOINT_COUNT, 3))
    offset = 0

    palm_vertices, palm_faces = _palm()
    palm = TriMesh.create(palm_vertices, palm_faces).oriented_outward()
    parts.append(palm)
    palm_weights = np.zeros((palm.vertex_count, JOINT_COUNT))
    palm_weights[:, 0] = 1.0
    weights.append(palm_weights)
    radial.append(np.zeros((palm.vertex_count, 3)))
    v = palm.vertices
    sites["palm"] = np.flatnonzero(
        np.isclose(v[:, 2], -PALM_HALF_THICKNESS)
        & (np.abs(v[:, 0]) < 0.035) & (v[:, 1] > 0.02) & (v[:, 1] < 0.08)
    )
    offset += palm.vertex_count

    for spec in DIGITS:
        vertices, triangles, axial = _tube(spec)
        tube = TriMesh.create(vertices, triangles, drop_degenerate=False).oriented_outward()
        parts.append(tube)
        weights.append(_digit_weights(spec, axial))

        axis = np.asarray(spec.direction) / np.linalg.norm(spec.direction)
        base = np.asarray(spec.base)
        along = np.clip(axial, 0.0, sum(spec.lengths) - spec.radius)
        outward = vertices - (base + along[:, None] * axis)
        radial.append(outward / spec.radius)

        for j, station in zip(spec.joints, (0.0, spec.lengths[0], spec.lengths[0] + spec.lengths[1])):
            joints[j] = base + station * axis
        tip = tip_station(spec)
        middle_station = spec.lengths[0] + 0.5 * spec.lengths[1]
        sites[f"{spec.name}_tip"] = offset + _pad_vertices(vertices, spec, tip)
        sites[f"{spec.name}_middle"] = offset + _pad_vertices(vertices, spec, middle_station)
        offset += tube.vertex_count

    rest = TriMesh.concatenate(parts)

    # Coefficient 0 thickens every digit by 1 mm, coefficient 1 thickens the palm
    # by 1 mm per face; the remaining coefficients are inert.
    shape_dirs = np.zeros((rest.vertex_count, 3, SHAPE_DOF))
    shape_dirs[:, :, 0] = 0.001 * np.concatenate(radial)
    palm_z = np.sign(palm.vertices[:, 2]) * np.isclose(np.abs(palm.vertices[:, 2]), PALM_HALF_THICKNESS)
    shape_dirs[:palm.vertex_count, 2, 1] = 0.001 * palm_z

    return HandRig(
        rest_mesh=rest,
        parents=np.asarray(MANO_PARENTS),
        joints=joints,
        weights=np.concatenate(weights),
        shape_dirs=shape_dirs,
        contact_sites={name: sites[name] for name in CONTACT_REGIONS},
    )


def flexion_axis(spec: DigitSpec) -> np.ndarray:
    """Rotation axis that curls a digit of the rest pose toward the palm side."""
    axis = np.asarray(spec.direction) / np.linalg.norm(spec.direction)
    side = np.cross(PALM_NORMAL, axis)
    return -side / np.linalg.norm(side)


def curl_pose(finger_angle: float, thumb_angle: Optional[float] = None) -> np.ndarray:
    """45-vector flexing every joint of every digit by the given angle in radians."""
    thumb_angle = finger_angle if thumb_angle is None else thumb_angle
    theta = np.zeros(45)
    for spec in DIGITS:
        angle = thumb_angle if spec.name == "thumb" else finger_angle
        for j in spec.joints:
            theta[3 * (j - 1):3 * j] = angle * flexion_axis(spec)
    return theta
