"""Tests for scale alignment, initial placement and candidate selection."""

from dataclasses import replace

import numpy as np
import pytest

from grasp_refine.domain.alignment import (
    CandidateSet,
    DetectionBoxes,
    ObjectPlacement,
    candidate_distances,
    generate_candidates,
    init_object_pose,
    initial_scale_align,
    select_candidate,
)
from grasp_refine.domain.camera import project_camera_points
from grasp_refine.domain.config import CandidateConfig
from grasp_refine.domain.exceptions import InvalidBox, ObjectAtCameraOrigin
from grasp_refine.domain.sampling import SampleSource, SurfaceSamples
from grasp_refine.domain.transforms import RigidTransform


@pytest.fixture
def small_sphere(unit_sphere):
    """Sphere of radius 0.1 centered one meter in front of the camera."""
    return unit_sphere.scaled(0.1).transformed(np.eye(3), np.array([0.0, 0.0, 1.0]))


class TestDetectionBoxes:
    """Tests for detection box validation."""

    def test_zero_area_raises(self):
        """Test that a box with no width is rejected."""
        with pytest.raises(InvalidBox):
            DetectionBoxes(hand=(10, 10, 10, 20), object=(0, 0, 5, 5))

    def test_box_outside_image_raises(self):
        """Test that a box leaving the image is rejected."""
        boxes = DetectionBoxes(hand=(0, 0, 300, 20), object=(0, 0, 5, 5))
        with pytest.raises(InvalidBox):
            boxes.check_within(256, 256)


class TestInitialScaleAlign:
    """Tests for the hull-volume and box-area scale ratio."""

    def test_symmetric_case_is_one(self, unit_cube):
        """Test that equal boxes and volumes need no rescale."""
        boxes = DetectionBoxes(hand=(0, 0, 10, 10), object=(20, 20, 30, 30))
        assert initial_scale_align(unit_cube, unit_cube, boxes) == pytest.approx(1.0)

    def test_larger_hand_box_halves_scale(self, unit_cube):
        """Test that a hand box four times larger gives a factor of one half."""
        boxes = DetectionBoxes(hand=(0, 0, 20, 20), object=(0, 0, 10, 10))
        assert initial_scale_align(unit_cube, unit_cube, boxes) == pytest.approx(0.5)

    def test_doubling_object_halves_scale(self, unit_cube, unit_sphere):
        """Test that a twice larger object gets half the factor."""
        boxes = DetectionBoxes(hand=(0, 0, 12, 10), object=(0, 0, 10, 7))
        single = initial_scale_align(unit_cube, unit_sphere, boxes)
        double = initial_scale_align(unit_cube, unit_sphere.scaled(2.0), boxes)
        assert double == pytest.approx(single / 2, abs=1e-9)

    def test_half_cube_gives_two(self, unit_cube):
        """Test that an object with half the edge length is scaled up by two."""
        boxes = DetectionBoxes(hand=(0, 0, 10, 10), object=(0, 0, 10, 10))
        assert initial_scale_align(unit_cube, unit_cube.scaled(0.5), boxes) == pytest.approx(2.0)


class TestObjectPlacement:
    """Tests for the scaled object placement."""

    def test_rescaled_keeps_point_fixed(self):
        """Test that rescaling about an object-frame point keeps its camera position."""
        placement = ObjectPlacement(RigidTransform.from_rotvec([0.1, 0.2, 0.3], [0.0, 0.0, 0.5]), 1.5)
        about = np.array([0.01, -0.02, 0.03])
        rescaled = placement.rescaled(0.7, about)
        np.testing.assert_allclose(rescaled.apply(about[None])[0], placement.apply(about[None])[0], atol=1e-15)
        assert rescaled.scale == pytest.approx(1.05)

    def test_about_camera_scales_positions(self):
        """Test that scaling about the camera multiplies every camera-frame point."""
        placement = ObjectPlacement(RigidTransform.from_rotvec([0.1, 0.0, 0.0], [0.1, 0.0, 0.5]), 1.0)
        points = np.array([[0.01, 0.02, 0.03], [-0.02, 0.0, 0.01]])
        np.testing.assert_allclose(placement.about_camera(2.0).apply(points), 2.0 * placement.apply(points))


class TestInitObjectPose:
    """Tests for the initial object placement."""

    def test_centroid_lands_on_hand_centroid(self, unit_cube, unit_sphere):
        """Test that centroid mode moves the object centroid onto the hand centroid."""
        hand = unit_cube.scaled(0.1).transformed(np.eye(3), np.array([0.0, 0.0, 0.5]))
        obj = unit_sphere.scaled(0.05).transformed(np.eye(3), np.array([0.3, 0.1, -0.2]))
        pose = init_object_pose(hand, obj)
        np.testing.assert_allclose(pose.apply(obj.centroid[None])[0], [0.0, 0.0, 0.5], atol=1e-9)
        np.testing.assert_array_equal(pose.rotation, np.eye(3))

    def test_centered_object_is_not_moved(self, unit_cube):
        """Test that an object already on the hand keeps a zero translation."""
        pose = init_object_pose(unit_cube, unit_cube)
        np.testing.assert_allclose(pose.translation, np.zeros(3), atol=1e-12)

    def test_palm_ray_places_object_along_normal(self, unit_cube, unit_sphere):
        """Test that palm-ray mode offsets the object one bounding radius along the palm normal."""
        palm = (np.array([0.0, 0.0, 0.5]), np.array([0.0, 0.0, -1.0]))
        obj = unit_sphere.scaled(0.05)
        pose = init_object_pose(unit_cube, obj, mode="palm_ray", palm=palm)
        radius = np.max(np.linalg.norm(obj.vertices - obj.centroid, axis=1))
        np.testing.assert_allclose(pose.apply(obj.centroid[None])[0], [0.0, 0.0, 0.5 - radius], atol=1e-12)


class TestCandidates:
    """Tests for distance and scale candidates."""

    def test_distances_are_log_spaced(self):
        """Test that candidate distances span the configured factor range."""
        distances = candidate_distances(0.5, CandidateConfig(count=5, min_factor=0.25, max_factor=4.0))
        np.testing.assert_allclose(distances, 0.5 * np.array([0.25, 0.5, 1.0, 2.0, 4.0]))

    def test_centers_sit_at_requested_distances(self, small_sphere):
        """Test that each candidate center is at its distance from the camera."""
        candidates = generate_candidates(small_sphere, [0.3, 0.5, 0.7])
        for candidate in candidates:
            assert np.linalg.norm(candidate.mesh.centroid) == pytest.approx(candidate.distance, abs=1e-9)

    def test_current_distance_is_identity(self, small_sphere):
        """Test that the current center distance reproduces the object."""
        d = np.linalg.norm(small_sphere.centroid)
        candidate = generate_candidates(small_sphere, [d])[0]
        assert candidate.factor == pytest.approx(1.0)
        np.testing.assert_allclose(candidate.mesh.vertices, small_sphere.vertices, atol=1e-12)

    def test_silhouette_is_unchanged(self, small_sphere, camera):
        """Test that every candidate projects onto the same pixels."""
        reference = project_camera_points(small_sphere.vertices, camera).points
        for candidate in generate_candidates(small_sphere, [0.5, 2.0, 3.0]):
            np.testing.assert_allclose(project_camera_points(candidate.mesh.vertices, camera).points,
                                       reference, atol=1e-9)

    def test_object_at_origin_raises(self, unit_cube):
        """Test that an object centered on the camera cannot be rescaled."""
        with pytest.raises(ObjectAtCameraOrigin):
            generate_candidates(unit_cube, [1.0])

    def test_placement_is_carried(self, small_sphere):
        """Test that a supplied placement is scaled with the candidate."""
        placement = ObjectPlacement(RigidTransform(np.eye(3), np.array([0.0, 0.0, 1.0])), 0.1)
        candidate = generate_candidates(small_sphere, [2.0], placement)[0]
        assert candidate.placement.scale == pytest.approx(0.2)


class TestSelectCandidate:
    """Tests for the contact-distance candidate choice."""

    def test_picks_candidate_touching_contacts(self, small_sphere):
        """Test that the candidate whose surface holds the contacts wins."""
        candidates = generate_candidates(small_sphere, [0.5, 1.0, 2.0, 3.0])
        contacts = SurfaceSamples(candidates[2].mesh.vertices[:40], SampleSource.HAND_CONTACT)
        scored, winner = select_candidate(candidates, contacts)
        assert scored[winner].distance == pytest.approx(2.0)
        assert scored[winner].score == pytest.approx(0.0, abs=1e-12)

    def test_single_candidate(self, small_sphere):
        """Test that a lone candidate is selected."""
        contacts = SurfaceSamples(np.array([[0.0, 0.0, 0.7]]), SampleSource.HAND_CONTACT)
        _, winner = select_candidate(generate_candidates(small_sphere, [1.0]), contacts)
        assert winner == 0

    def test_tie_goes_to_smaller_distance(self, small_sphere):
        """Test that equal scores prefer the nearer candidate."""
        same = generate_candidates(small_sphere, [1.0])[0]
        candidates = CandidateSet(
            (replace(same, distance=1.0), replace(same, distance=1.5)),
            small_sphere.centroid,
            small_sphere,
        )
        contacts = SurfaceSamples(np.array([[0.0, 0.0, 0.7]]), SampleSource.HAND_CONTACT)
        scored, winner = select_candidate(candidates, contacts)
        assert scored.scores[0] == scored.scores[1]
        assert winner == 0
