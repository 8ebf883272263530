"""Tests for the exception hierarchy and its exit codes."""

import pytest

from grasp_refine.domain.exceptions import (
    DegenerateHull,
    DivergedOptimization,
    EmptyContactSet,
    GraspRefineError,
    InvalidMesh,
    MissingAsset,
    OptimizationFailure,
    SceneParseError,
    SignRequiresWatertight,
    SimulationDiverged,
    StageOrderError,
    ValidationFailure,
)
from grasp_refine.main import EXIT_DIVERGED, EXIT_VALIDATION, _exit_code


class TestExceptionHierarchy:
    """Tests for how errors are classified."""

    @pytest.mark.parametrize("error", [
        InvalidMesh("empty"),
        SignRequiresWatertight(),
        DegenerateHull("flat"),
        EmptyContactSet(),
        SceneParseError("camera"),
        MissingAsset("object.obj"),
        StageOrderError("opa", "frozen"),
    ])
    def test_validation_errors(self, error):
        """Test that input errors are validation failures with exit code 2."""
        assert isinstance(error, ValidationFailure)
        assert isinstance(error, GraspRefineError)
        assert _exit_code(error) == EXIT_VALIDATION

    @pytest.mark.parametrize("error", [DivergedOptimization("opa", 7), SimulationDiverged(3)])
    def test_divergence_errors(self, error):
        """Test that numerical failures map to exit code 3."""
        assert isinstance(error, OptimizationFailure)
        assert _exit_code(error) == EXIT_DIVERGED


class TestExceptionMessages:
    """Tests for exception attributes and messages."""

    def test_scene_parse_error_names_field(self):
        """Test that the failing field is kept and shown."""
        error = SceneParseError("hand.joint_pose", "too short")
        assert error.field == "hand.joint_pose"
        assert "hand.joint_pose" in str(error)
        assert "too short" in str(error)

    def test_diverged_optimization_names_stage(self):
        """Test that divergence reports the stage and iteration."""
        error = DivergedOptimization("refine", 12)
        assert error.stage == "refine"
        assert error.iteration == 12
        assert "refine" in str(error)

    def test_missing_asset_keeps_path(self):
        """Test that a missing asset keeps its path."""
        assert MissingAsset("a/b.obj").path == "a/b.obj"
