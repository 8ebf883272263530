"""Tests for nearest-surface queries, winding numbers and signed distances."""

import numpy as np
import pytest

from grasp_refine.domain.bvh import (
    FEATURE_EDGE_AB,
    FEATURE_FACE,
    FEATURE_VERTEX_A,
    build_bvh,
    closest_point_on_triangles,
    nearest_surface,
)
from grasp_refine.domain.exceptions import InvalidMesh, SignRequiresWatertight
from grasp_refine.domain.mesh import TriMesh
from grasp_refine.domain.sdf import SignedDistanceField, contains, winding_numbers

# Icosphere (3 subdivisions) of radius 1 deviates from the true sphere by less than this
SPHERE_CHORD = 0.01


class TestClosestPoint:
    """Tests for the point-triangle region classification."""

    @pytest.fixture
    def corners(self):
        return np.array([[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]])

    def test_vertex_region(self, corners):
        """Test that a query beyond corner a snaps to a."""
        point, feature = closest_point_on_triangles(corners, np.array([[-1.0, -1.0, 0.0]]))
        np.testing.assert_allclose(point[0], [0.0, 0.0, 0.0])
        assert feature[0] == FEATURE_VERTEX_A

    def test_face_region(self, corners):
        """Test that a query above the interior projects onto the face."""
        point, feature = closest_point_on_triangles(corners, np.array([[0.25, 0.25, 1.0]]))
        np.testing.assert_allclose(point[0], [0.25, 0.25, 0.0])
        assert feature[0] == FEATURE_FACE

    def test_edge_region(self, corners):
        """Test that a query beside edge ab projects onto that edge."""
        point, feature = closest_point_on_triangles(corners, np.array([[0.5, -1.0, 0.0]]))
        np.testing.assert_allclose(point[0], [0.5, 0.0, 0.0])
        assert feature[0] == FEATURE_EDGE_AB


class TestNearestSurface:
    """Tests for the accelerated nearest-surface search."""

    def test_matches_brute_force(self, unit_sphere, rng):
        """Test that the indexed search agrees with checking every triangle."""
        queries = rng.uniform(-2.0, 2.0, size=(50, 3))
        hits = nearest_surface(build_bvh(unit_sphere), queries)

        n_tri = unit_sphere.triangle_count
        corners = np.repeat(unit_sphere.corners[None], len(queries), axis=0).reshape(-1, 3, 3)
        points, _ = closest_point_on_triangles(corners, np.repeat(queries, n_tri, axis=0))
        brute = np.linalg.norm(points - np.repeat(queries, n_tri, axis=0), axis=1).reshape(len(queries), n_tri)
        np.testing.assert_allclose(hits.distances, brute.min(axis=1), atol=1e-12)

    def test_empty_mesh_cannot_be_indexed(self):
        """Test that an empty mesh is rejected by the index builder."""
        with pytest.raises(InvalidMesh):
            build_bvh(TriMesh.create(np.zeros((0, 3)), np.zeros((0, 3), dtype=int)))


class TestWindingNumbers:
    """Tests for the generalized winding number."""

    def test_inside_and_outside_of_cube(self, unit_cube):
        """Test that winding numbers are one inside and zero outside."""
        w = winding_numbers(unit_cube, np.array([[0.1, -0.2, 0.3], [2.0, 0.0, 0.0]]))
        assert w[0] == pytest.approx(1.0, abs=1e-9)
        assert w[1] == pytest.approx(0.0, abs=1e-9)

    def test_contains_requires_watertight(self, unit_cube):
        """Test that the inside test refuses an open mesh."""
        opened = TriMesh.create(unit_cube.vertices, unit_cube.triangles[2:])
        with pytest.raises(SignRequiresWatertight):
            contains(opened, np.zeros((1, 3)))


class TestSignedDistanceField:
    """Tests for signed distances against analytic oracles."""

    def test_box_oracle(self, unit_cube):
        """Test signed distances of a box against its closed form."""
        sdf = SignedDistanceField(unit_cube)
        queries = np.array([[2.0, 0.0, 0.0], [0.1, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0, 0.0, -0.45]])
        expected = [1.5, -0.4, np.sqrt(3) * 0.5, -0.05]
        np.testing.assert_allclose(sdf(queries).values, expected, atol=1e-9)

    def test_sphere_oracle(self, unit_sphere, rng):
        """Test signed distances of an icosphere against |x| - r within the chordal error."""
        queries = rng.uniform(-1.8, 1.8, size=(200, 3))
        values = SignedDistanceField(unit_sphere)(queries).values
        np.testing.assert_allclose(values, np.linalg.norm(queries, axis=1) - 1.0, atol=SPHERE_CHORD + 1e-6)

    def test_gradient_points_away_outside_and_inward_inside(self, unit_cube):
        """Test the gradient direction on both sides of the surface."""
        batch = SignedDistanceField(unit_cube)(np.array([[2.0, 0.0, 0.0], [0.3, 0.0, 0.0]]))
        np.testing.assert_allclose(batch.gradients[0], [1.0, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(batch.gradients[1], [1.0, 0.0, 0.0], atol=1e-12)

    def test_point_on_surface_is_zero(self, unit_cube):
        """Test that a surface point has distance zero and a unit pseudo-normal."""
        batch = SignedDistanceField(unit_cube)(np.array([[0.5, 0.1, 0.2]]))
        assert batch.values[0] == 0.0
        assert np.linalg.norm(batch.gradients[0]) == pytest.approx(1.0)

    def test_signed_query_on_open_mesh_raises(self, unit_cube):
        """Test that signed queries need a watertight mesh while unsigned ones do not."""
        opened = TriMesh.create(unit_cube.vertices, unit_cube.triangles[2:])
        sdf = SignedDistanceField(opened)
        with pytest.raises(SignRequiresWatertight):
            sdf(np.zeros((1, 3)))
        assert sdf.unsigned(np.array([[2.0, 0.0, 0.0]])).values[0] == pytest.approx(1.5)

    def test_banded_signs_only_near_points(self, unit_cube):
        """Test that the banded query signs points in the band and leaves far points unsigned."""
        sdf = SignedDistanceField(unit_cube)
        batch = sdf.banded(np.array([[0.45, 0.0, 0.0], [3.0, 0.0, 0.0]]), band=0.1)
        assert batch.values[0] == pytest.approx(-0.05)
        assert batch.values[1] == pytest.approx(2.5)
