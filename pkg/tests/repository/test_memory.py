"""Tests for in-memory repository implementation."""

import numpy as np
import pytest

from grasp_refine.domain.exceptions import MissingAsset
from tests.memory_repository import InMemorySceneRepository


class TestInMemorySceneRepository:
    """Tests for InMemorySceneRepository implementation."""

    @pytest.fixture
    def repository(self):
        """Create an InMemorySceneRepository instance."""
        return InMemorySceneRepository()

    def test_scene_round_trip(self, repository, toy_scene):
        """Test that a stored scene loads back through the document schema."""
        repository.save_scene(toy_scene.copy(), "toy")
        loaded = repository.load_scene("toy")

        assert loaded.object_frozen
        assert loaded.object_ref == "toy/object"
        np.testing.assert_allclose(loaded.hand_params.as_vector(), toy_scene.hand_params.as_vector())

    def test_document_is_json(self, repository, toy_scene):
        """Test that the stored document is schema-tagged JSON text."""
        repository.save_scene(toy_scene.copy(), "toy")
        assert '"schema": "grasp-scene/1"' in repository.document("toy")

    def test_missing_scene(self, repository):
        """Test that an unknown reference raises MissingAsset."""
        with pytest.raises(MissingAsset):
            repository.load_scene("unknown")

    def test_missing_mesh(self, repository):
        """Test that an unknown mesh reference raises MissingAsset."""
        with pytest.raises(MissingAsset):
            repository.load_mesh("unknown")

    def test_mesh_unit_scale(self, repository, unit_cube):
        """Test that meshes are rescaled on load."""
        repository.save_mesh(unit_cube, "cube")
        assert repository.load_mesh("cube", unit_scale=0.1).signed_volume == pytest.approx(1e-3)

    def test_traces_are_kept(self, repository):
        """Test that written traces are kept by reference."""
        repository.write_trace("t", ["iteration", "loss"], [(0, 1.0)])
        assert repository.traces["t"] == (["iteration", "loss"], [[0, 1.0]])
