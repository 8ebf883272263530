"""The GraspScene container and its versioned JSON document schema."""

import json
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .. import __version__
from .alignment import DetectionBoxes, ObjectPlacement
from .camera import CameraIntrinsics, MaskImage
from .contact import ContactProblem, HandFrame
from .events import EventData, ProvenanceEvent, stages_run
from .exceptions import SceneParseError, StageOrderError
from .hand import ContactDesignation, HandParams, HandRig, contact_points, pose_hand
from .mesh import TriMesh
from .sampling import SurfaceSamples
from .transforms import RigidTransform

SCHEMA = "grasp-scene/1"
BUILTIN_RIG = "builtin"
MIRROR_X = np.diag([-1.0, 1.0, 1.0])
ROTATION_TOLERANCE = 1e-6


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class TransformBlock(_Block):
    """Rotation matrix rows and translation in meters."""

    rotation: List[List[float]] = Field(default_factory=lambda: np.eye(3).tolist())
    translation: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0], min_length=3, max_length=3)

    @field_validator("rotation")
    @classmethod
    def _orthonormal(cls, value: List[List[float]]) -> List[List[float]]:
        matrix = np.asarray(value, dtype=np.float64)
        if matrix.shape != (3, 3):
            raise ValueError("rotation must be a 3x3 matrix")
        if not np.allclose(matrix @ matrix.T, np.eye(3), atol=ROTATION_TOLERANCE) \
                or abs(np.linalg.det(matrix) - 1.0) > ROTATION_TOLERANCE:
            raise ValueError("rotation must be orthonormal with determinant +1")
        return value

    @classmethod
    def from_transform(cls, transform: RigidTransform) -> "TransformBlock":
        folded = transform.folded()
        return cls(rotation=folded.base.tolist(), translation=folded.translation.tolist())

    def to_transform(self) -> RigidTransform:
        return RigidTransform(np.asarray(self.rotation), np.asarray(self.translation))


class PlacementBlock(TransformBlock):
    scale: float = Field(default=1.0, gt=0)

    @classmethod
    def from_placement(cls, placement: ObjectPlacement) -> "PlacementBlock":
        folded = placement.transform.folded()
        return cls(rotation=folded.base.tolist(), translation=folded.translation.tolist(), scale=placement.scale)

    def to_placement(self) -> ObjectPlacement:
        return ObjectPlacement(self.to_transform(), self.scale)


class HandBlock(_Block):
    """Hand estimate as delivered by an upstream regressor."""

    rig: str = Field(default=BUILTIN_RIG, min_length=1, description="'builtin' or a rig header path")
    side: Literal["right", "left"] = "right"
    global_pose: List[float] = Field(default_factory=lambda: [0.0] * 6, min_length=6, max_length=6)
    joint_pose: List[float] = Field(default_factory=lambda: [0.0] * 45, min_length=45, max_length=45)
    shape: List[float] = Field(default_factory=lambda: [0.0] * 10, min_length=10, max_length=10)
    reference_joint_pose: Optional[List[float]] = Field(default=None, min_length=45, max_length=45)
    to_camera: TransformBlock = Field(default_factory=TransformBlock)


class ObjectBlock(PlacementBlock):
    mesh: str = Field(min_length=1)
    unit_scale: float = Field(default=1.0, gt=0, description="Multiplier converting file units to meters")
    frozen: bool = False


class BoxesBlock(_Block):
    hand: List[float] = Field(min_length=4, max_length=4)
    object: List[float] = Field(min_length=4, max_length=4)


class SceneDocument(_Block):
    """Top-level scene file."""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False, populate_by_name=True)

    schema_: Literal["grasp-scene/1"] = Field(default=SCHEMA, alias="schema")
    camera: CameraIntrinsics
    hand: HandBlock
    object: ObjectBlock
    mask: str = Field(min_length=1)
    image_size: Optional[Tuple[int, int]] = None
    boxes: Optional[BoxesBlock] = None
    contacts: List[str] = Field(default_factory=list)
    ground_truth: Optional[PlacementBlock] = None
    provenance: List[ProvenanceEvent] = Field(default_factory=list)


def parse_document(text: str) -> SceneDocument:
    """Parse and validate scene JSON.

    Raises:
        SceneParseError: With the dotted path of the first offending field
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneParseError("document", str(e))
    try:
        return SceneDocument.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(part) for part in first.get("loc", ())) or "document"
        raise SceneParseError(loc, first.get("msg"))


def dump_document(document: SceneDocument) -> str:
    """UTF-8 JSON text with floats in shortest round-trip form."""
    data = document.model_dump(mode="json", by_alias=True, exclude_none=True)
    return json.dumps(data, indent=2, sort_keys=False) + "\n"


@dataclass
class GraspScene:
    """Full hand-object state: hand estimate, object placement, camera evidence and provenance."""

    rig: HandRig
    hand_params: HandParams
    hand_to_camera: RigidTransform
    object_mesh: TriMesh
    object_placement: ObjectPlacement
    camera: CameraIntrinsics
    mask: MaskImage
    designation: ContactDesignation
    reference_theta: np.ndarray = field(default_factory=lambda: np.zeros(45))
    side: Literal["right", "left"] = "right"
    boxes: Optional[DetectionBoxes] = None
    image_size: Optional[Tuple[int, int]] = None
    object_frozen: bool = False
    ground_truth: Optional[ObjectPlacement] = None
    provenance: List[ProvenanceEvent] = field(default_factory=list)
    rig_ref: str = BUILTIN_RIG
    object_ref: Optional[str] = None
    object_unit_scale: float = 1.0
    mask_ref: Optional[str] = None

    def copy(self) -> "GraspScene":
        return replace(self, provenance=list(self.provenance))

    @property
    def stages(self) -> List[str]:
        return stages_run(self.provenance)

    def hand_frame(self) -> HandFrame:
        """Hand-to-camera map; a left hand is the x-mirrored right rig."""
        linear = self.hand_to_camera.rotation
        if self.side == "left":
            linear = linear @ MIRROR_X
        return HandFrame(linear, self.hand_to_camera.translation.copy())

    def hand_mesh(self, params: Optional[HandParams] = None) -> TriMesh:
        """Posed hand in the camera frame."""
        return self.hand_frame().apply_mesh(pose_hand(self.rig, params or self.hand_params))

    def contact_samples(self, params: Optional[HandParams] = None) -> SurfaceSamples:
        """Designated contact points in the camera frame."""
        local = contact_points(self.rig, params or self.hand_params, self.designation)
        return replace(local, positions=self.hand_frame().apply(local.positions))

    def object_world_mesh(self, placement: Optional[ObjectPlacement] = None) -> TriMesh:
        return (placement or self.object_placement).world_mesh(self.object_mesh)

    def scaled_object(self) -> TriMesh:
        """Object in its own frame with the current scale applied."""
        return self.object_mesh.scaled(self.object_placement.scale)

    def contact_problem(self) -> ContactProblem:
        """Inputs of the contact stage.

        Raises:
            StageOrderError: If the object transform is not frozen
        """
        if not self.object_frozen:
            raise StageOrderError("refine", "object transform is not frozen")
        return ContactProblem(
            rig=self.rig,
            params=self.hand_params,
            frame=self.hand_frame(),
            object_mesh=self.object_world_mesh(),
            designation=self.designation,
            reference_theta=self.reference_theta,
        )

    def record(self, stage: str, config: Union[BaseModel, Dict[str, Any], None], data: EventData) -> ProvenanceEvent:
        """Append a provenance event."""
        if isinstance(config, BaseModel):
            config = config.model_dump(mode="json")
        event = ProvenanceEvent(sequence=len(self.provenance) + 1, stage=stage, version=__version__,
                                config=config or {}, data=data)
        self.provenance.append(event)
        return event

    def to_document(self, object_ref: str, mask_ref: str, rig_ref: str) -> SceneDocument:
        boxes = None
        if self.boxes is not None:
            boxes = BoxesBlock(hand=list(self.boxes.hand), object=list(self.boxes.object))
        block = PlacementBlock.from_placement(self.object_placement)
        return SceneDocument(
            camera=self.camera,
            hand=HandBlock(
                rig=rig_ref,
                side=self.side,
                global_pose=self.hand_params.global_pose.tolist(),
                joint_pose=self.hand_params.joint_pose.tolist(),
                shape=self.hand_params.shape.tolist(),
                reference_joint_pose=np.asarray(self.reference_theta).tolist(),
                to_camera=TransformBlock.from_transform(self.hand_to_camera),
            ),
            object=ObjectBlock(mesh=object_ref, unit_scale=self.object_unit_scale, rotation=block.rotation,
                               translation=block.translation, scale=block.scale, frozen=self.object_frozen),
            mask=mask_ref,
            image_size=self.image_size,
            boxes=boxes,
            contacts=list(self.designation.regions),
            ground_truth=None if self.ground_truth is None else PlacementBlock.from_placement(self.ground_truth),
            provenance=list(self.provenance),
        )

    @classmethod
    def from_document(
        cls,
        document: SceneDocument,
        load_mesh: Callable[[str, float], TriMesh],
        load_mask: Callable[[str], MaskImage],
        load_rig: Callable[[str], HandRig],
    ) -> "GraspScene":
        """Build a scene from a validated document and asset loaders keyed by reference."""
        hand = document.hand
        reference = hand.reference_joint_pose if hand.reference_joint_pose is not None else hand.joint_pose
        boxes = None
        if document.boxes is not None:
            boxes = DetectionBoxes(tuple(document.boxes.hand), tuple(document.boxes.object))
        mask = load_mask(document.mask)
        if (mask.width, mask.height) != (document.camera.width, document.camera.height):
            raise SceneParseError("mask", f"mask is {mask.width}x{mask.height} but the camera is "
                                          f"{document.camera.width}x{document.camera.height}")
        return cls(
            rig=load_rig(hand.rig),
            hand_params=HandParams(np.asarray(hand.global_pose), np.asarray(hand.joint_pose), np.asarray(hand.shape)),
            hand_to_camera=hand.to_camera.to_transform(),
            object_mesh=load_mesh(document.object.mesh, document.object.unit_scale),
            object_placement=document.object.to_placement(),
            camera=document.camera,
            mask=mask,
            designation=ContactDesignation(tuple(document.contacts)),
            reference_theta=np.asarray(reference, dtype=np.float64),
            side=hand.side,
            boxes=boxes,
            image_size=document.image_size,
            object_frozen=document.object.frozen,
            ground_truth=None if document.ground_truth is None else document.ground_truth.to_placement(),
            provenance=list(document.provenance),
            rig_ref=hand.rig,
            object_ref=document.object.mesh,
            object_unit_scale=document.object.unit_scale,
            mask_ref=document.mask,
        )
