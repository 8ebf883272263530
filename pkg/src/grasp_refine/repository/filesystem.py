"""Filesystem-based repository implementation for scenes and their assets."""

import csv
from pathlib import Path
from typing import Dict, List, Sequence

import cv2
import numpy as np
import trimesh
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..domain.camera import MaskImage
from ..domain.exceptions import InvalidMesh, MissingAsset, SceneParseError
from ..domain.hand import JOINT_COUNT, SHAPE_DOF, HandRig
from ..domain.mesh import TriMesh
from ..domain.scene import BUILTIN_RIG, GraspScene, dump_document, parse_document
from ..domain.synthetic import shared_capsule_hand
from ..utils.logging import get_logger
from .base import SceneRepository

logger = get_logger(__name__)

RIG_FORMAT = "grasp-rig/1"
MESH_DIGITS = 17


class RigHeader(BaseModel):
    """JSON header of a rig container; arrays live in the little-endian binary file it names.

    Binary layout, in order: vertices f8 (V, 3), triangles i4 (T, 3),
    skinning weights f4 (V, 16), shape blendshapes f4 (V, 3, 10).
    """

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    format: str = Field(default=RIG_FORMAT, pattern=r"^grasp-rig/1$")
    data: str = Field(min_length=1, description="Binary file relative to the header")
    vertex_count: int = Field(gt=0)
    triangle_count: int = Field(gt=0)
    parents: List[int] = Field(min_length=JOINT_COUNT, max_length=JOINT_COUNT)
    joints: List[List[float]] = Field(min_length=JOINT_COUNT, max_length=JOINT_COUNT)
    contact_sites: Dict[str, List[int]]


def _rig_layout(header: RigHeader) -> List[tuple]:
    v, t = header.vertex_count, header.triangle_count
    return [
        ("vertices", "<f8", (v, 3)),
        ("triangles", "<i4", (t, 3)),
        ("weights", "<f4", (v, JOINT_COUNT)),
        ("shape_dirs", "<f4", (v, 3, SHAPE_DOF)),
    ]


class FileSystemSceneRepository(SceneRepository):
    """File-based implementation of the scene repository.

    References resolve against `root`; assets named by a scene document
    resolve against the directory of that scene file.
    """

    def __init__(self, root: Path = Path(".")):
        """Initialize filesystem repository.

        Args:
            root: Directory that relative references resolve against
        """
        self.root = Path(root)

    def _path(self, ref: str) -> Path:
        path = Path(ref)
        return path if path.is_absolute() else self.root / path

    def _existing(self, ref: str) -> Path:
        path = self._path(ref)
        if not path.is_file():
            raise MissingAsset(str(path))
        return path

    def at(self, directory: Path) -> "FileSystemSceneRepository":
        return FileSystemSceneRepository(directory)

    def load_scene(self, ref: str) -> GraspScene:
        path = self._existing(ref)
        document = parse_document(path.read_text(encoding="utf-8"))
        assets = self.at(path.parent)
        logger.debug(f"loading scene {path}")
        return GraspScene.from_document(document, assets.load_mesh, assets.load_mask, assets.load_rig)

    def save_scene(self, scene: GraspScene, ref: str) -> None:
        path = self._path(ref)
        path.parent.mkdir(parents=True, exist_ok=True)
        assets = self.at(path.parent)
        stem = path.stem

        # Assets that already resolve next to the scene are kept; the rest are written beside it
        if scene.object_ref is None or not assets._path(scene.object_ref).is_file():
            scene.object_ref = f"{stem}_object.obj"
            scene.object_unit_scale = 1.0
            assets.save_mesh(scene.object_mesh, scene.object_ref)
        if scene.mask_ref is None or not assets._path(scene.mask_ref).is_file():
            scene.mask_ref = f"{stem}_mask.png"
            assets.save_mask(scene.mask, scene.mask_ref)
        if scene.rig_ref != BUILTIN_RIG and not assets._path(scene.rig_ref).is_file():
            scene.rig_ref = f"{stem}_rig.json"
            assets.save_rig(scene.rig, scene.rig_ref)

        document = scene.to_document(scene.object_ref, scene.mask_ref, scene.rig_ref)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(dump_document(document))

    def load_mesh(self, ref: str, unit_scale: float = 1.0) -> TriMesh:
        path = self._existing(ref)
        try:
            loaded = trimesh.load(str(path), force="mesh", process=False)
        except Exception as e:
            raise InvalidMesh(f"cannot read {path.name}: {e}")
        if len(loaded.faces) == 0:
            raise InvalidMesh(f"{path.name} has no triangles")
        return TriMesh.create(np.asarray(loaded.vertices) * unit_scale, np.asarray(loaded.faces))

    def save_mesh(self, mesh: TriMesh, ref: str) -> None:
        path = self._path(ref)
        path.parent.mkdir(parents=True, exist_ok=True)
        shape = trimesh.Trimesh(vertices=mesh.vertices, faces=mesh.triangles, process=False)
        if path.suffix.lower() == ".obj":
            shape.export(str(path), file_type="obj", digits=MESH_DIGITS, include_normals=False)
        else:
            shape.export(str(path))

    def load_mask(self, ref: str) -> MaskImage:
        path = self._existing(ref)
        image = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if image is None:
            raise SceneParseError("mask", f"cannot decode {path.name}")
        if image.ndim == 3:
            image = image.max(axis=2)
        return MaskImage(image != 0)

    def save_mask(self, mask: MaskImage, ref: str) -> None:
        path = self._path(ref)
        path.parent.mkdir(parents=True, exist_ok=True)
        cv2.imwrite(str(path), mask.bitmap.astype(np.uint8) * 255)

    def load_rig(self, ref: str) -> HandRig:
        if ref == BUILTIN_RIG:
            return shared_capsule_hand()
        path = self._existing(ref)
        try:
            header = RigHeader.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as e:
            loc = ".".join(str(part) for part in e.errors()[0].get("loc", ()))
            raise SceneParseError(f"rig.{loc}" if loc else "rig", e.errors()[0].get("msg"))

        raw = self._existing(str(path.parent / header.data)).read_bytes()
        arrays = {}
        offset = 0
        for name, dtype, shape in _rig_layout(header):
            count = int(np.prod(shape))
            size = count * np.dtype(dtype).itemsize
            if offset + size > len(raw):
                raise SceneParseError(f"rig.{name}", "binary file is truncated")
            arrays[name] = np.frombuffer(raw, dtype=dtype, count=count, offset=offset).reshape(shape)
            offset += size

        weights = arrays["weights"].astype(np.float64)
        weights /= np.maximum(weights.sum(axis=1, keepdims=True), 1e-12)
        return HandRig(
            rest_mesh=TriMesh.create(arrays["vertices"], arrays["triangles"], drop_degenerate=False),
            parents=header.parents,
            joints=header.joints,
            weights=weights,
            shape_dirs=arrays["shape_dirs"].astype(np.float64),
            contact_sites=header.contact_sites,
        )

    def save_rig(self, rig: HandRig, ref: str) -> None:
        path = self._path(ref)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = RigHeader(
            data=path.with_suffix(".bin").name,
            vertex_count=rig.rest_mesh.vertex_count,
            triangle_count=rig.rest_mesh.triangle_count,
            parents=rig.parents.tolist(),
            joints=rig.joints.tolist(),
            contact_sites={name: ids.tolist() for name, ids in rig.contact_sites.items()},
        )
        arrays = {
            "vertices": rig.rest_mesh.vertices,
            "triangles": rig.rest_mesh.triangles,
            "weights": rig.weights,
            "shape_dirs": rig.shape_dirs,
        }
        blob = b"".join(np.ascontiguousarray(arrays[name], dtype=dtype).tobytes()
                        for name, dtype, _ in _rig_layout(header))
        path.with_suffix(".bin").write_bytes(blob)
        path.write_text(header.model_dump_json(indent=2) + "\n", encoding="utf-8")

    def write_trace(self, ref: str, header: Sequence[str], rows: List[Sequence]) -> None:
        path = self._path(ref)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows([[repr(v) if isinstance(v, float) else v for v in row] for row in rows])
