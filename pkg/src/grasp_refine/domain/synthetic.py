"""Synthetic test scenes: primitive objects, rendered masks and a builtin-hand grasp."""

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Literal, Optional, Tuple

import numpy as np
import trimesh
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from ..utils.logging import get_logger
from .alignment import DetectionBoxes, ObjectPlacement
from .camera import CameraIntrinsics, MaskImage, project_camera_points, rasterize_mask
from .capsule_hand import DIGITS, PALM_NORMAL, DigitSpec, builtin_capsule_hand, flexion_axis, tip_station
from .events import SynthEvent
from .exceptions import EmptyMask
from .hand import ContactDesignation, HandParams, HandRig, forward_kinematics, palm_frame, pose_hand
from .mesh import TriMesh
from .transforms import RigidTransform, rotvec_to_matrix

logger = get_logger(__name__)

PrimitiveKind = Literal["sphere", "box", "cylinder", "lathe-mug"]

TIP_REGIONS = ("thumb_tip", "index_tip", "middle_tip", "ring_tip", "pinky_tip")
DEFAULT_DIMENSIONS = {
    "sphere": [0.04],
    "box": [0.08, 0.05, 0.03],
    "cylinder": [0.03, 0.1],
    "lathe-mug": [0.04, 0.09],
}
DIMENSION_COUNTS = {"sphere": 1, "box": 3, "cylinder": 2, "lathe-mug": 2}
PALM_GAP = 0.01
LATHE_SECTIONS = 32


class SyntheticSpec(BaseModel):
    """Recipe for a synthetic scene."""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    kind: PrimitiveKind = "box"
    dimensions: Optional[List[float]] = Field(default=None, description="sphere: r; box: x y z; cylinder and mug: r h")
    rotation: List[float] = Field(default_factory=lambda: [0.3, -0.4, 0.2], min_length=3, max_length=3,
                                  description="Ground-truth object rotation (axis-angle, radians)")
    translation: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.5], min_length=3, max_length=3,
                                     description="Ground-truth object position in the camera frame (m)")
    perturb_rotation_deg: float = Field(default=0.0, ge=0)
    perturb_translation: float = Field(default=0.0, ge=0, description="Meters")
    perturb_scale: float = Field(default=1.0, gt=0)
    seed: int = 0
    width: int = Field(default=256, gt=0)
    height: int = Field(default=256, gt=0)
    focal: float = Field(default=300.0, gt=0)

    @model_validator(mode="after")
    def _check_dimensions(self) -> "SyntheticSpec":
        if self.dimensions is None:
            self.dimensions = list(DEFAULT_DIMENSIONS[self.kind])
        if len(self.dimensions) != DIMENSION_COUNTS[self.kind]:
            raise ValueError(f"{self.kind} needs {DIMENSION_COUNTS[self.kind]} dimensions")
        if any(d <= 0 for d in self.dimensions):
            raise ValueError("dimensions must be positive")
        if self.kind == "lathe-mug" and self.dimensions[1] <= 0.3 * self.dimensions[0]:
            raise ValueError("mug height must exceed its wall thickness")
        return self

    def camera(self) -> CameraIntrinsics:
        return CameraIntrinsics(fx=self.focal, fy=self.focal, cx=self.width / 2.0, cy=self.height / 2.0,
                                width=self.width, height=self.height)


def _lathe(profile: np.ndarray, sections: int = LATHE_SECTIONS) -> Tuple[np.ndarray, np.ndarray]:
    """Revolve a (radius, z) polyline about +z; end points must lie on the axis."""
    alpha = 2.0 * np.pi * np.arange(sections) / sections
    vertices = [np.array([[0.0, 0.0, profile[0, 1]]])]
    for rho, z in profile[1:-1]:
        vertices.append(np.stack([rho * np.cos(alpha), rho * np.sin(alpha), np.full(sections, z)], axis=1))
    vertices.append(np.array([[0.0, 0.0, profile[-1, 1]]]))
    vertices = np.concatenate(vertices)

    n_rings = len(profile) - 2
    last = len(vertices) - 1
    ring = lambda i, a: 1 + i * sections + a % sections
    faces = []
    for a in range(sections):
        faces.append((0, ring(0, a + 1), ring(0, a)))
        for i in range(n_rings - 1):
            faces.append((ring(i, a), ring(i, a + 1), ring(i + 1, a + 1)))
            faces.append((ring(i, a), ring(i + 1, a + 1), ring(i + 1, a)))
        faces.append((ring(n_rings - 1, a), ring(n_rings - 1, a + 1), last))
    return vertices, np.asarray(faces)


def make_primitive(kind: PrimitiveKind, dimensions: List[float]) -> TriMesh:
    """Watertight primitive centered near its own origin."""
    if kind == "sphere":
        shape = trimesh.creation.icosphere(subdivisions=3, radius=dimensions[0])
        vertices, faces = shape.vertices, shape.faces
    elif kind == "box":
        shape = trimesh.creation.box(extents=dimensions)
        vertices, faces = shape.vertices, shape.faces
    elif kind == "cylinder":
        shape = trimesh.creation.cylinder(radius=dimensions[0], height=dimensions[1], sections=LATHE_SECTIONS)
        vertices, faces = shape.vertices, shape.faces
    else:
        r, h = dimensions
        wall = 0.15 * r
        profile = np.array([(0.0, 0.0), (r, 0.0), (r, h), (r - wall, h), (r - wall, wall), (0.0, wall)])
        vertices, faces = _lathe(profile)
        vertices = vertices - np.array([0.0, 0.0, 0.5 * h])
    return TriMesh.create(np.asarray(vertices), np.asarray(faces)).oriented_outward()


@lru_cache(maxsize=1)
def shared_capsule_hand() -> HandRig:
    return builtin_capsule_hand()


def _bounding_box(points: np.ndarray, K: CameraIntrinsics) -> Tuple[float, float, float, float]:
    projected = project_camera_points(points, K)
    uv = projected.visible_points
    if len(uv) == 0:
        raise EmptyMask("projected box")
    u0, v0 = np.clip(uv.min(axis=0), 0.0, [K.width, K.height])
    u1, v1 = np.clip(uv.max(axis=0), 0.0, [K.width, K.height])
    return (float(u0), float(v0), float(max(u1, u0 + 1.0)), float(max(v1, v0 + 1.0)))


def _random_direction(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def synth_scene(spec: SyntheticSpec) -> Tuple["GraspScene", MaskImage]:
    """Build a scene whose mask is rendered at a known object pose.

    The builtin hand sits beside the object at its depth with the palm facing it.
    The object starts at the true pose perturbed about its center by a seeded
    rotation and translation of the requested sizes, then rescaled.

    Returns:
        The scene (ground truth recorded separately from the initial pose) and its mask
    """
    from .scene import GraspScene

    rng = np.random.default_rng(spec.seed)
    K = spec.camera()
    obj = make_primitive(spec.kind, spec.dimensions)
    truth = ObjectPlacement(RigidTransform.from_rotvec(spec.rotation, spec.translation), 1.0)
    mask = rasterize_mask(obj, truth.transform, K)

    # Draw both directions unconditionally so the stream does not depend on magnitudes
    rotation_dir = _random_direction(rng)
    translation_dir = _random_direction(rng)
    center = truth.apply(obj.centroid)
    start = truth.transform.perturbed(np.deg2rad(spec.perturb_rotation_deg) * rotation_dir,
                                      spec.perturb_translation * translation_dir, pivot=center)
    initial = ObjectPlacement(start, 1.0).rescaled(spec.perturb_scale, obj.centroid)

    rig = shared_capsule_hand()
    params = HandParams()
    palm_center, palm_normal = palm_frame(rig, params)
    radius = float(np.max(np.linalg.norm(obj.vertices - obj.centroid, axis=1)))
    # Turn the palm from -z to -x so the hand stands on the +x side of the object at its depth
    turn = rotvec_to_matrix(np.array([0.0, 0.5 * np.pi, 0.0]))
    facing = turn @ palm_normal
    hand_to_camera = RigidTransform(turn, center - (radius + PALM_GAP) * facing - turn @ palm_center)
    hand_world = pose_hand(rig, params).transformed(hand_to_camera.rotation, hand_to_camera.translation)

    boxes = DetectionBoxes(_bounding_box(hand_world.vertices, K),
                           _bounding_box(truth.world_mesh(obj).vertices, K))
    scene = GraspScene(
        rig=rig,
        hand_params=params,
        hand_to_camera=hand_to_camera,
        object_mesh=obj,
        object_placement=initial,
        camera=K,
        mask=mask,
        designation=ContactDesignation(TIP_REGIONS),
        reference_theta=params.joint_pose.copy(),
        boxes=boxes,
        image_size=(spec.width, spec.height),
        ground_truth=truth,
    )
    scene.record("synth", spec, SynthEvent(primitive=spec.kind, seed=spec.seed))
    return scene, mask


@dataclass(frozen=True)
class TipTarget:
    """Where a digit's fingertip pad should rest on the sphere.

    `azimuth` is measured about the palm normal from the finger direction toward
    the little finger and `polar` from the palm-side pole of the sphere, both in radians.
    """

    digit: DigitSpec
    azimuth: float
    polar: float

    def direction(self) -> np.ndarray:
        s = np.sin(self.polar)
        return s * np.array([np.sin(self.azimuth), np.cos(self.azimuth), 0.0]) - np.cos(self.polar) * PALM_NORMAL


TOY_CENTER = np.array([0.0, 0.105, -0.062])
TOY_POLAR = np.deg2rad(60.0)
TOY_AZIMUTHS = {"index": -54.0, "middle": -16.0, "ring": 16.0, "pinky": 54.0, "thumb": 212.0}


def _digit_pose(v: np.ndarray, spec: DigitSpec) -> np.ndarray:
    """45-vector with a free base rotation and two flexion angles on one digit."""
    theta = np.zeros(45)
    j1, j2, j3 = spec.joints
    flex = flexion_axis(spec)
    theta[3 * (j1 - 1):3 * j1] = v[:3]
    theta[3 * (j2 - 1):3 * j2] = v[3] * flex
    theta[3 * (j3 - 1):3 * j3] = v[4] * flex
    return theta


def _solve_digit(rig: HandRig, target: TipTarget, center: np.ndarray, radius: float) -> np.ndarray:
    """Joint angles that put the fingertip pad tangent to the sphere, facing its center.

    Returns:
        The digit's base rotation vector and its two flexion angles
    """
    spec = target.digit
    axis = np.asarray(spec.direction) / np.linalg.norm(spec.direction)
    base = np.asarray(spec.base)
    j3 = spec.joints[2]
    pad_axis = base + tip_station(spec) * axis - rig.joints[j3]
    w = target.direction()
    goal = center + (radius + spec.radius) * w

    def residual(v):
        _, world_rot, world_pos = forward_kinematics(rig, _digit_pose(v, spec))
        pad = world_pos[j3] + world_rot[j3] @ pad_axis
        normal = world_rot[j3] @ PALM_NORMAL
        return np.concatenate([pad - goal, radius * (normal + w)])

    chord = (goal - base) / np.linalg.norm(goal - base)
    start, _ = Rotation.align_vectors([chord, -w], [axis, PALM_NORMAL], weights=[1.0, 0.5])
    lower = np.array([-np.inf, -np.inf, -np.inf, 0.0, 0.0])
    upper = np.array([np.inf, np.inf, np.inf, 2.0, 2.0])
    best = None
    for bend in (0.2, 0.5, 0.8):
        v0 = np.concatenate([start.as_rotvec(), [bend, bend]])
        fit = least_squares(residual, v0, bounds=(lower, upper), xtol=1e-12, ftol=1e-12, gtol=1e-12)
        if best is None or fit.cost < best.cost:
            best = fit
    error = float(np.linalg.norm(best.fun[:3]))
    if error > 1e-4:
        logger.warning(f"{spec.name} pad misses its target by {error * 1000:.2f} mm")
    return best.x


def toy_grasp_scene(seed: int = 0, radius: float = 0.04, float_distance: float = 0.02,
                    depth: float = 0.5) -> "GraspScene":
    """Builtin hand holding a sphere in a fingertip cup, with the sphere pulled out of the grip.

    Each digit is solved so its tip pad touches the sphere and faces its center,
    all pads sitting on the palm side of the equator. The sphere is then moved
    along the palm normal until every pad floats `float_distance` off its
    surface. The hand is turned palm-up so gravity settles the sphere back into
    the cup, and the object transform is frozen. The solved pose is also the
    reference pose.
    """
    from .scene import GraspScene

    rng = np.random.default_rng(seed)
    rig = shared_capsule_hand()
    center = TOY_CENTER + 0.003 * rng.uniform(-1.0, 1.0, size=3)
    polar = TOY_POLAR + np.deg2rad(3.0) * rng.uniform(-1.0, 1.0)

    theta = np.zeros(45)
    for spec in DIGITS:
        azimuth = np.deg2rad(TOY_AZIMUTHS[spec.name] + 5.0 * rng.uniform(-1.0, 1.0))
        v = _solve_digit(rig, TipTarget(spec, azimuth, polar), center, radius)
        theta += _digit_pose(v, spec)
    params = HandParams(joint_pose=theta)

    # Gap grows as sqrt(r^2 + d^2 + 2 r d cos(polar)) - r when the sphere moves d along the normal
    c = np.cos(polar)
    push = -radius * c + np.sqrt((radius * c) ** 2 + 2.0 * radius * float_distance + float_distance ** 2)
    floated = center + push * PALM_NORMAL

    # Palm normal to camera +y (against gravity), then a small seeded tilt
    palm_up = rotvec_to_matrix(np.array([0.5 * np.pi, 0.0, 0.0]))
    hand_rotation = rotvec_to_matrix(0.05 * rng.normal(size=3)) @ palm_up
    hand_to_camera = RigidTransform(hand_rotation, np.array([0.0, 0.0, depth]) - hand_rotation @ floated)

    K = CameraIntrinsics(fx=300.0, fy=300.0, cx=128.0, cy=128.0, width=256, height=256)
    obj = make_primitive("sphere", [radius])
    placement = ObjectPlacement(RigidTransform(np.eye(3), hand_to_camera.apply(floated)), 1.0)
    mask = rasterize_mask(obj, placement.transform, K)
    hand_world = pose_hand(rig, params).transformed(hand_to_camera.rotation, hand_to_camera.translation)

    scene = GraspScene(
        rig=rig,
        hand_params=params,
        hand_to_camera=hand_to_camera,
        object_mesh=obj,
        object_placement=placement,
        camera=K,
        mask=mask,
        designation=ContactDesignation(TIP_REGIONS),
        reference_theta=theta.copy(),
        boxes=DetectionBoxes(_bounding_box(hand_world.vertices, K),
                             _bounding_box(placement.world_mesh(obj).vertices, K)),
        image_size=(K.width, K.height),
        object_frozen=True,
        ground_truth=placement,
    )
    scene.record("synth", {"seed": seed, "radius": radius, "float_distance": float_distance, "depth": depth},
                 SynthEvent(primitive="sphere", seed=seed))
    return scene
