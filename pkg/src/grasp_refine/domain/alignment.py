"""Hand-object scale alignment, initial placement and distance/scale candidates."""

from dataclasses import dataclass, field, replace
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from .bvh import build_bvh, nearest_surface
from .config import CandidateConfig
from .exceptions import InvalidBox, ObjectAtCameraOrigin
from .mesh import TriMesh
from .sampling import SurfaceSamples
from .transforms import RigidTransform
from .volume import convex_hull_volume

CENTER_EPS = 1e-6
TIE_TOLERANCE = 1e-12

Box = Tuple[float, float, float, float]


def _check_box(name: str, box: Sequence[float]) -> Box:
    if len(box) != 4:
        raise InvalidBox(name, "expected (u_min, v_min, u_max, v_max)")
    u0, v0, u1, v1 = (float(x) for x in box)
    if not np.all(np.isfinite([u0, v0, u1, v1])):
        raise InvalidBox(name, "coordinates must be finite")
    if u1 <= u0 or v1 <= v0:
        raise InvalidBox(name, "box has zero area")
    return (u0, v0, u1, v1)


@dataclass(frozen=True)
class DetectionBoxes:
    """Hand and object detection boxes in pixels."""

    hand: Box
    object: Box

    def __post_init__(self):
        object.__setattr__(self, "hand", _check_box("hand", self.hand))
        object.__setattr__(self, "object", _check_box("object", self.object))

    @staticmethod
    def area(box: Box) -> float:
        return (box[2] - box[0]) * (box[3] - box[1])

    def check_within(self, width: int, height: int) -> None:
        """Raises InvalidBox when either box leaves the image."""
        for name, box in (("hand", self.hand), ("object", self.object)):
            if box[0] < 0 or box[1] < 0 or box[2] > width or box[3] > height:
                raise InvalidBox(name, f"box {box} leaves the {width}x{height} image")


def initial_scale_align(hand: TriMesh, obj: TriMesh, boxes: DetectionBoxes) -> float:
    """Object rescale factor that matches the 3D size ratio to the 2D one.

    k_2D = sqrt(area(hand box) / area(object box)),
    k_3D = cbrt(V(hull(hand)) / V(hull(object))), and the result is k_3D / k_2D.

    Raises:
        DegenerateHull: If either mesh spans no volume
    """
    k_2d = np.sqrt(DetectionBoxes.area(boxes.hand) / DetectionBoxes.area(boxes.object))
    k_3d = np.cbrt(convex_hull_volume(hand.vertices) / convex_hull_volume(obj.vertices))
    return float(k_3d / k_2d)


@dataclass(frozen=True)
class ObjectPlacement:
    """Object-to-camera map x -> R (s x) + t with the scale about the object origin."""

    transform: RigidTransform = field(default_factory=RigidTransform)
    scale: float = 1.0

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.transform.apply(self.scale * np.asarray(points, dtype=np.float64))

    def world_mesh(self, mesh: TriMesh) -> TriMesh:
        return mesh.scaled(self.scale).transformed(self.transform.rotation, self.transform.translation)

    def rescaled(self, factor: float, about: np.ndarray) -> "ObjectPlacement":
        """Scale the object by `factor` about an object-frame point, keeping that point fixed."""
        about = np.asarray(about, dtype=np.float64)
        fixed = self.apply(about)
        scale = self.scale * factor
        moved = self.transform.rotation @ (scale * about) + self.transform.translation
        return ObjectPlacement(RigidTransform(self.transform.rotation, self.transform.translation + fixed - moved), scale)

    def about_camera(self, factor: float) -> "ObjectPlacement":
        """Scale the posed object by `factor` about the camera origin."""
        return ObjectPlacement(RigidTransform(self.transform.rotation, self.transform.translation * factor),
                               self.scale * factor)


def init_object_pose(
    hand: TriMesh,
    obj: TriMesh,
    boxes: Optional[DetectionBoxes] = None,
    image_size: Optional[Tuple[int, int]] = None,
    mode: Literal["centroid", "palm_ray"] = "centroid",
    palm: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> RigidTransform:
    """Identity-rotation transform placing the (already rescaled) object at the hand.

    In `centroid` mode the object centroid lands on the hand centroid. In
    `palm_ray` mode it lands on the ray leaving the palm center along the palm
    normal, one bounding radius away.

    Args:
        hand: Hand mesh in the camera frame
        obj: Object mesh in its own frame with the alignment scale applied
        boxes: Detection boxes, validated against `image_size` when both are given
        image_size: (width, height) of the source image
        mode: Placement rule
        palm: (center, normal) of the posed palm, required for `palm_ray`

    Raises:
        InvalidBox: If a box leaves the image
    """
    if boxes is not None and image_size is not None:
        boxes.check_within(*image_size)

    center = obj.centroid
    if mode == "palm_ray":
        if palm is None:
            raise ValueError("palm_ray placement needs the palm center and normal")
        radius = float(np.max(np.linalg.norm(obj.vertices - center, axis=1)))
        target = np.asarray(palm[0]) + radius * np.asarray(palm[1])
    else:
        target = hand.centroid
    return RigidTransform(np.eye(3), target - center)


def candidate_distances(center_distance: float, cfg: CandidateConfig) -> np.ndarray:
    """Log-spaced candidate distances around the current object distance."""
    if cfg.count == 1:
        return np.array([center_distance * np.sqrt(cfg.min_factor * cfg.max_factor)])
    return center_distance * np.geomspace(cfg.min_factor, cfg.max_factor, cfg.count)


@dataclass(frozen=True, eq=False)
class Candidate:
    distance: float
    factor: float
    mesh: TriMesh
    placement: Optional[ObjectPlacement] = None
    score: float = float("nan")


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Candidates ordered by strictly increasing distance."""

    candidates: Tuple[Candidate, ...]
    center: np.ndarray
    base_mesh: TriMesh

    def __len__(self) -> int:
        return len(self.candidates)

    def __getitem__(self, i: int) -> Candidate:
        return self.candidates[i]

    @property
    def distances(self) -> np.ndarray:
        return np.array([c.distance for c in self.candidates])

    @property
    def scores(self) -> np.ndarray:
        return np.array([c.score for c in self.candidates])


def generate_candidates(
    obj: TriMesh,
    distances: Sequence[float],
    placement: Optional[ObjectPlacement] = None,
) -> CandidateSet:
    """Rescale the posed object about the camera center so its center sits at each distance.

    Candidate i is every camera-frame vertex times d_i / ||x_c||, which keeps the
    silhouette unchanged.

    Args:
        obj: Object mesh in the camera frame
        distances: Target center distances in meters
        placement: Placement that produced `obj`; carried along scaled when given

    Raises:
        ObjectAtCameraOrigin: If the object center is within 1e-6 m of the camera
    """
    distances = np.unique(np.asarray(distances, dtype=np.float64))
    if len(distances) == 0 or np.any(distances <= 0):
        raise ValueError("candidate distances must be positive")

    center = obj.centroid
    norm = float(np.linalg.norm(center))
    if norm < CENTER_EPS:
        raise ObjectAtCameraOrigin(norm)

    candidates = []
    for d in distances:
        factor = float(d / norm)
        candidates.append(Candidate(
            distance=float(d),
            factor=factor,
            mesh=obj.scaled(factor),
            placement=None if placement is None else placement.about_camera(factor),
        ))
    return CandidateSet(tuple(candidates), center, obj)


def select_candidate(candidates: CandidateSet, contacts: SurfaceSamples) -> Tuple[CandidateSet, int]:
    """Score every candidate by mean unsigned distance from the contacts to its surface.

    The distance to a candidate scaled by f about the origin is f times the
    distance from q / f to the unscaled mesh, so one index serves all candidates.

    Returns:
        The scored candidate set and the index of the winner; ties within 1e-12
        go to the smaller distance
    """
    if len(candidates) == 0 or len(contacts) == 0:
        raise ValueError("need at least one candidate and one contact point")

    index = build_bvh(candidates.base_mesh)
    points = contacts.positions
    scored: List[Candidate] = []
    for c in candidates.candidates:
        hits = nearest_surface(index, points / c.factor)
        scored.append(replace(c, score=float(c.factor * hits.distances.mean())))

    scores = np.array([c.score for c in scored])
    winner = int(np.flatnonzero(scores <= scores.min() + TIE_TOLERANCE)[0])
    return CandidateSet(tuple(scored), candidates.center, candidates.base_mesh), winner
