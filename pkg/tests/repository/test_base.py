"""Tests for abstract repository interface."""

from typing import List, Sequence

import pytest

from grasp_refine.repository.base import SceneRepository


class TestSceneRepository:
    """Tests for SceneRepository abstract interface."""

    def test_repository_is_abstract(self):
        """Test that SceneRepository cannot be instantiated directly."""
        with pytest.raises(TypeError):
            SceneRepository()

    def test_repository_has_required_abstract_methods(self):
        """Test that repository has all required abstract methods."""
        expected_methods = {
            "load_scene",
            "save_scene",
            "load_mesh",
            "save_mesh",
            "load_mask",
            "save_mask",
            "load_rig",
            "save_rig",
            "write_trace",
        }

        assert SceneRepository.__abstractmethods__ == expected_methods

    def test_repository_subclass_must_implement_all_methods(self):
        """Test that subclass must implement all abstract methods."""

        class IncompleteRepository(SceneRepository):
            def load_scene(self, ref: str):
                pass

            def write_trace(self, ref: str, header: Sequence[str], rows: List[Sequence]) -> None:
                pass

            # Missing asset methods

        with pytest.raises(TypeError):
            IncompleteRepository()
