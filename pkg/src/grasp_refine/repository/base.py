"""Abstract repository interface for scene persistence."""

from abc import ABC, abstractmethod
from typing import List, Sequence

from ..domain.camera import MaskImage
from ..domain.hand import HandRig
from ..domain.mesh import TriMesh
from ..domain.scene import GraspScene


class SceneRepository(ABC):
    """Abstract repository for scenes and the assets they reference.

    Asset references are strings as they appear in a scene document; each
    implementation decides how a reference maps to storage.
    """

    @abstractmethod
    def load_scene(self, ref: str) -> GraspScene:
        """Load a scene and every asset it references.

        Args:
            ref: Scene reference

        Returns:
            The scene with meshes, mask and rig resolved

        Raises:
            SceneParseError: If the document violates the schema
            MissingAsset: If the scene or a referenced asset does not exist
        """
        pass

    @abstractmethod
    def save_scene(self, scene: GraspScene, ref: str) -> None:
        """Save a scene, writing any asset that has no reference yet.

        Args:
            scene: Scene to persist
            ref: Scene reference
        """
        pass

    @abstractmethod
    def load_mesh(self, ref: str, unit_scale: float = 1.0) -> TriMesh:
        """Load a triangle mesh, converting file units to meters."""
        pass

    @abstractmethod
    def save_mesh(self, mesh: TriMesh, ref: str) -> None:
        """Save a triangle mesh."""
        pass

    @abstractmethod
    def load_mask(self, ref: str) -> MaskImage:
        """Load a binary mask; nonzero pixels are foreground."""
        pass

    @abstractmethod
    def save_mask(self, mask: MaskImage, ref: str) -> None:
        """Save a binary mask as 0/255 pixels."""
        pass

    @abstractmethod
    def load_rig(self, ref: str) -> HandRig:
        """Load a hand rig; the reference 'builtin' names the procedural capsule hand."""
        pass

    @abstractmethod
    def save_rig(self, rig: HandRig, ref: str) -> None:
        """Save a hand rig container."""
        pass

    @abstractmethod
    def write_trace(self, ref: str, header: Sequence[str], rows: List[Sequence]) -> None:
        """Write a loss trace with a header row.

        Args:
            ref: Trace reference
            header: Column names
            rows: One sequence of values per row
        """
        pass
