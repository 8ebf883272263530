"""Tests for the scene container and its JSON document."""

import json

import numpy as np
import pytest

from grasp_refine.domain.exceptions import SceneParseError, StageOrderError
from grasp_refine.domain.scene import SCHEMA, GraspScene, dump_document, parse_document


@pytest.fixture
def document_text(box_scene):
    return dump_document(box_scene.to_document("object.obj", "mask.png", "builtin"))


def _reload(scene, text):
    return GraspScene.from_document(
        parse_document(text),
        load_mesh=lambda ref, unit_scale: scene.object_mesh,
        load_mask=lambda ref: scene.mask,
        load_rig=lambda ref: scene.rig,
    )


class TestParseDocument:
    """Tests for scene document validation."""

    def test_schema_key_uses_alias(self, document_text):
        """Test that the schema tag is written under the key 'schema'."""
        data = json.loads(document_text)
        assert data["schema"] == SCHEMA
        assert "schema_" not in data

    def test_missing_camera_names_field(self, document_text):
        """Test that a missing camera is reported by field name."""
        data = json.loads(document_text)
        del data["camera"]
        with pytest.raises(SceneParseError) as exc_info:
            parse_document(json.dumps(data))
        assert exc_info.value.field == "camera"

    def test_bad_json(self):
        """Test that malformed JSON raises a parse error for the document."""
        with pytest.raises(SceneParseError) as exc_info:
            parse_document("{not json")
        assert exc_info.value.field == "document"

    def test_unknown_schema_rejected(self, document_text):
        """Test that another schema version is refused."""
        data = json.loads(document_text)
        data["schema"] = "grasp-scene/2"
        with pytest.raises(SceneParseError) as exc_info:
            parse_document(json.dumps(data))
        assert exc_info.value.field == "schema"

    def test_non_orthonormal_rotation_rejected(self, document_text):
        """Test that a scaled rotation matrix fails validation."""
        data = json.loads(document_text)
        data["object"]["rotation"] = [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        with pytest.raises(SceneParseError) as exc_info:
            parse_document(json.dumps(data))
        assert exc_info.value.field.startswith("object")

    def test_short_joint_pose_rejected(self, document_text):
        """Test that a joint pose of the wrong length fails validation."""
        data = json.loads(document_text)
        data["hand"]["joint_pose"] = [0.0] * 44
        with pytest.raises(SceneParseError) as exc_info:
            parse_document(json.dumps(data))
        assert exc_info.value.field.startswith("hand.joint_pose")

    def test_extra_key_rejected(self, document_text):
        """Test that unknown top-level keys are refused."""
        data = json.loads(document_text)
        data["colour"] = "red"
        with pytest.raises(SceneParseError):
            parse_document(json.dumps(data))


class TestGraspSceneDocument:
    """Tests for converting scenes to and from documents."""

    def test_round_trip(self, box_scene, document_text):
        """Test that a scene survives a document round trip."""
        restored = _reload(box_scene, document_text)
        np.testing.assert_allclose(restored.object_placement.transform.as_matrix(),
                                   box_scene.object_placement.transform.as_matrix(), atol=1e-12)
        np.testing.assert_allclose(restored.hand_params.as_vector(), box_scene.hand_params.as_vector())
        assert restored.object_placement.scale == box_scene.object_placement.scale
        assert restored.designation == box_scene.designation
        assert restored.stages == box_scene.stages
        assert restored.ground_truth is not None

    def test_dump_is_stable(self, box_scene, document_text):
        """Test that dumping a reloaded scene reproduces the text."""
        restored = _reload(box_scene, document_text)
        again = dump_document(restored.to_document("object.obj", "mask.png", "builtin"))
        assert json.loads(again)["provenance"] == json.loads(document_text)["provenance"]

    def test_mask_size_must_match_camera(self, box_scene, document_text):
        """Test that a mask of another size is rejected."""
        data = json.loads(document_text)
        data["camera"]["width"] = 128
        data["camera"]["cx"] = 64.0
        with pytest.raises(SceneParseError) as exc_info:
            _reload(box_scene, json.dumps(data))
        assert exc_info.value.field == "mask"


class TestGraspScene:
    """Tests for derived scene state."""

    def test_contact_problem_requires_frozen_object(self, box_scene):
        """Test that the contact stage refuses an unfrozen object."""
        assert not box_scene.object_frozen
        with pytest.raises(StageOrderError):
            box_scene.contact_problem()

    def test_contact_problem_of_frozen_scene(self, toy_scene):
        """Test that a frozen scene yields a contact problem in the camera frame."""
        problem = toy_scene.contact_problem()
        np.testing.assert_allclose(problem.object_mesh.bounds, toy_scene.object_world_mesh().bounds)

    def test_left_hand_is_mirrored(self, toy_scene):
        """Test that a left hand is the x-mirror of the right one in the hand frame."""
        left = toy_scene.copy()
        left.side = "left"
        right_local = toy_scene.hand_to_camera.inverse().apply(toy_scene.hand_mesh().vertices)
        left_local = toy_scene.hand_to_camera.inverse().apply(left.hand_mesh().vertices)
        np.testing.assert_allclose(left_local, right_local * np.array([-1.0, 1.0, 1.0]), atol=1e-9)
        assert left.hand_mesh().signed_volume > 0

    def test_record_appends_sequence(self, toy_scene):
        """Test that recorded events are numbered in order."""
        from grasp_refine.domain.events import FreezeEvent

        scene = toy_scene.copy()
        event = scene.record("freeze", None, FreezeEvent(reason="explicit"))
        assert event.sequence == len(toy_scene.provenance) + 1
        assert scene.stages[-1] == "freeze"
        assert len(toy_scene.provenance) == event.sequence - 1

    def test_contact_samples_lie_on_hand(self, toy_scene):
        """Test that contact samples are hand mesh vertices in the camera frame."""
        samples = toy_scene.contact_samples()
        hand = toy_scene.hand_mesh()
        np.testing.assert_allclose(samples.positions, hand.vertices[samples.vertices], atol=1e-12)
