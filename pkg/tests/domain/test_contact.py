"""Tests for the contact energy terms and the hand refinement loop."""

from dataclasses import replace

import numpy as np
import pytest

from grasp_refine.domain.config import ContactConfig
from grasp_refine.domain.contact import (
    ContactEnergy,
    exemption_matrix,
    loss_dis,
    loss_pen,
    loss_spen,
    loss_sup,
    optimize_contacts,
    refine_grasp,
    term_weights,
)
from grasp_refine.domain.exceptions import InvalidParams, StageOrderError
from grasp_refine.domain.hand import MANO_PARENTS, PARAM_DOF, contact_points
from grasp_refine.domain.sdf import SignedDistanceField
from grasp_refine.domain.synthetic import make_primitive, toy_grasp_scene
from grasp_refine.domain.transforms import rotvec_to_matrix

TERM_FLAGS = ("use_dis", "use_pen", "use_spen", "use_sup")


@pytest.fixture
def cube_sdf(unit_cube):
    return SignedDistanceField(unit_cube)


@pytest.fixture(scope="module")
def pressed_problem():
    """Toy grasp with the sphere moved onto the fingertip centroid so every term is active."""
    problem = toy_grasp_scene(seed=1).contact_problem()
    tips = problem.frame.apply(contact_points(problem.rig, problem.params, problem.designation).positions)
    sphere = make_primitive("sphere", [0.04]).transformed(np.eye(3), tips.mean(axis=0))
    return replace(problem, object_mesh=sphere)


def _fd_gradient(energy: ContactEnergy, vector: np.ndarray, h: float = 1e-6) -> np.ndarray:
    grad = np.zeros(PARAM_DOF)
    for k in range(PARAM_DOF):
        step = np.zeros(PARAM_DOF)
        step[k] = h
        plus, _ = energy.evaluate(vector + step)
        minus, _ = energy.evaluate(vector - step)
        grad[k] = (plus.total - minus.total) / (2 * h)
    return grad


class TestEnergyTerms:
    """Tests for the individual loss terms."""

    def test_loss_dis_is_absolute_distance(self, cube_sdf):
        """Test that contacts 5 mm outside or inside both cost 5 mm."""
        assert loss_dis(np.array([[0.505, 0.0, 0.0]]), cube_sdf) == pytest.approx(0.005)
        assert loss_dis(np.array([[0.495, 0.0, 0.0]]), cube_sdf) == pytest.approx(0.005)

    def test_loss_dis_on_surface_is_zero(self, cube_sdf):
        """Test that contacts on the surface cost nothing."""
        assert loss_dis(np.array([[0.5, 0.1, 0.2], [-0.5, 0.0, 0.3]]), cube_sdf) == pytest.approx(0.0, abs=1e-9)

    def test_loss_pen_averages_depth(self, cube_sdf):
        """Test that one point 3 mm inside among ten costs 0.3 mm."""
        points = np.tile([[2.0, 0.0, 0.0]], (10, 1))
        points[0] = [0.497, 0.0, 0.0]
        assert loss_pen(points, cube_sdf) == pytest.approx(0.0003)

    def test_loss_pen_outside_is_zero(self, cube_sdf):
        """Test that points outside do not penetrate."""
        assert loss_pen(np.array([[0.6, 0.0, 0.0], [0.5, 0.0, 0.0]]), cube_sdf) == 0.0

    def test_loss_spen_two_points(self):
        """Test the hinge for two samples on unrelated segments."""
        points = np.array([[0.0, 0.0, 0.0], [0.004, 0.0, 0.0]])
        assert loss_spen(points, np.array([1, 4]), np.asarray(MANO_PARENTS), 0.01) == pytest.approx(0.006)

    def test_loss_spen_exempts_adjacent_segments(self):
        """Test that parent and child segments never penalize each other."""
        points = np.array([[0.0, 0.0, 0.0], [0.004, 0.0, 0.0]])
        assert loss_spen(points, np.array([1, 2]), np.asarray(MANO_PARENTS), 0.01) == 0.0

    def test_loss_spen_separated_is_zero(self):
        """Test that samples farther apart than the threshold cost nothing."""
        points = np.array([[0.0, 0.0, 0.0], [0.02, 0.0, 0.0]])
        assert loss_spen(points, np.array([1, 4]), np.asarray(MANO_PARENTS), 0.01) == 0.0

    def test_loss_spen_is_rigid_invariant(self, rng):
        """Test that moving all samples rigidly keeps the loss."""
        points = 0.02 * rng.random((60, 3))
        segments = rng.integers(0, 16, size=60)
        moved = points @ rotvec_to_matrix(np.array([0.4, -0.2, 0.9])).T + np.array([0.1, 0.2, 0.3])
        parents = np.asarray(MANO_PARENTS)
        assert loss_spen(moved, segments, parents, 0.01) == pytest.approx(loss_spen(points, segments, parents, 0.01),
                                                                          abs=1e-9)

    def test_loss_sup_is_euclidean(self):
        """Test the articulation deviation norm and its symmetry."""
        theta = np.zeros(45)
        reference = np.zeros(45)
        reference[:2] = [0.3, 0.4]
        assert loss_sup(theta, reference) == pytest.approx(0.5)
        assert loss_sup(reference, theta) == pytest.approx(0.5)

    def test_loss_sup_dimension_mismatch_raises(self):
        """Test that a short articulation vector is rejected."""
        with pytest.raises(InvalidParams):
            loss_sup(np.zeros(44), np.zeros(45))

    def test_exemption_matrix(self):
        """Test that same, parent and child segments are exempt while siblings are not."""
        exempt = exemption_matrix(np.asarray(MANO_PARENTS))
        assert exempt[1, 1] and exempt[1, 2] and exempt[2, 1] and exempt[0, 13]
        assert not exempt[1, 4]
        assert not exempt[3, 6]

    def test_term_weights_zero_disabled_terms(self):
        """Test that ablated terms weigh nothing."""
        cfg = ContactConfig(use_pen=False, use_sup=False)
        np.testing.assert_allclose(term_weights(cfg), [1.0, 0.0, 0.75, 0.0])


class TestContactEnergy:
    """Tests for the combined energy and its analytic gradient."""

    def test_breakdown_recomposes_total(self, pressed_problem):
        """Test that the total equals the weighted term sum."""
        cfg = ContactConfig(hand_samples=128)
        energy = ContactEnergy(pressed_problem, cfg)
        row, _ = energy.evaluate(pressed_problem.params.as_vector())
        w = term_weights(cfg)
        assert row.total == pytest.approx(w @ [row.l_dis, row.l_pen, row.l_spen, row.l_sup], abs=1e-9)
        assert row.l_pen > 0

    def test_gradient_matches_finite_differences(self, pressed_problem):
        """Test the analytic gradient of the total energy over all 51 parameters."""
        energy = ContactEnergy(pressed_problem, ContactConfig(hand_samples=128))
        vector = pressed_problem.params.as_vector()
        vector[:3] += 0.01
        vector[6:] += 0.02
        _, analytic = energy.evaluate(vector)
        numeric = _fd_gradient(energy, vector)
        assert np.linalg.norm(analytic - numeric) <= 1e-3 * np.linalg.norm(numeric) + 1e-8

    @pytest.mark.parametrize("flag", TERM_FLAGS)
    def test_each_term_gradient(self, pressed_problem, flag):
        """Test the analytic gradient of every term on its own."""
        only = {name: name == flag for name in TERM_FLAGS}
        energy = ContactEnergy(pressed_problem, ContactConfig(hand_samples=128, **only))
        vector = pressed_problem.params.as_vector()
        vector[6:] += 0.03
        _, analytic = energy.evaluate(vector)
        numeric = _fd_gradient(energy, vector)
        assert np.linalg.norm(analytic - numeric) <= 1e-3 * np.linalg.norm(numeric) + 1e-8

    def test_disabled_terms_are_still_logged(self, pressed_problem):
        """Test that an ablated term keeps its value in the breakdown but not in the total."""
        cfg = ContactConfig(hand_samples=128, use_dis=False)
        row, _ = ContactEnergy(pressed_problem, cfg).evaluate(pressed_problem.params.as_vector())
        assert row.l_dis > 0
        assert row.total == pytest.approx(cfg.lambda_pen * row.l_pen + cfg.lambda_spen * row.l_spen
                                          + cfg.lambda_sup * row.l_sup)


class TestOptimizeContacts:
    """Tests for the refinement loop."""

    def test_zero_iterations_returns_input(self, toy_scene):
        """Test that no iterations leaves the parameters untouched."""
        params, trace = optimize_contacts(toy_scene.contact_problem(), ContactConfig(iterations=0, hand_samples=64))
        np.testing.assert_array_equal(params.as_vector(), toy_scene.hand_params.as_vector())
        assert len(trace) == 1

    def test_all_terms_disabled_keeps_params(self, toy_scene):
        """Test that a zero objective never moves the hand."""
        cfg = ContactConfig(iterations=5, hand_samples=64, use_dis=False, use_pen=False, use_spen=False,
                            use_sup=False)
        params, trace = optimize_contacts(toy_scene.contact_problem(), cfg)
        np.testing.assert_array_equal(params.as_vector(), toy_scene.hand_params.as_vector())
        assert all(row.total == 0.0 for row in trace)

    def test_best_total_not_above_initial(self, toy_scene):
        """Test that the returned iterate is at least as good as the input."""
        cfg = ContactConfig(iterations=50, hand_samples=128)
        params, trace = optimize_contacts(toy_scene.contact_problem(), cfg)
        assert len(trace) == 51
        assert min(row.total for row in trace) <= trace[0].total
        row, _ = ContactEnergy(toy_scene.contact_problem(), cfg).evaluate(params.as_vector())
        assert row.total == pytest.approx(min(r.total for r in trace))

    def test_contacts_move_toward_surface(self, toy_scene):
        """Test that a short run already pulls the floating fingertips in."""
        cfg = ContactConfig(iterations=200, hand_samples=128)
        _, trace = optimize_contacts(toy_scene.contact_problem(), cfg)
        assert trace[-1].l_dis < trace[0].l_dis

    def test_shape_is_never_changed(self, toy_scene):
        """Test that the shape coefficients are held fixed."""
        params, _ = optimize_contacts(toy_scene.contact_problem(), ContactConfig(iterations=5, hand_samples=64))
        np.testing.assert_array_equal(params.shape, toy_scene.hand_params.shape)

    def test_refine_requires_frozen_object(self, toy_scene):
        """Test that refinement refuses an object whose pose is still free."""
        scene = toy_scene.copy()
        scene.object_frozen = False
        with pytest.raises(StageOrderError):
            refine_grasp(scene, ContactConfig(iterations=0))

    def test_floating_hand_stays_without_distance_term(self, toy_scene):
        """Test that pose and self-penetration terms alone leave a floating hand where it is."""
        cfg = ContactConfig(iterations=100, hand_samples=64, use_dis=False)
        params, trace = optimize_contacts(toy_scene.contact_problem(), cfg)
        assert trace[0].l_pen == 0.0
        np.testing.assert_allclose(params.translation, toy_scene.hand_params.translation, atol=1e-8)
        np.testing.assert_allclose(params.global_rotvec, toy_scene.hand_params.global_rotvec, atol=1e-8)

    def test_penetration_alone_pushes_hand_out(self):
        """Test that without the distance term a pressed grip still backs off the sphere."""
        scene = toy_grasp_scene(seed=0, float_distance=-0.005)
        cfg = ContactConfig(iterations=200, hand_samples=128, use_dis=False)
        params, trace = optimize_contacts(scene.contact_problem(), cfg)
        assert trace[0].l_pen > 0.0
        assert min(row.l_pen for row in trace) < trace[0].l_pen
        assert not np.allclose(params.as_vector(), scene.hand_params.as_vector())
