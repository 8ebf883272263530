"""Hand contact optimization with the object held fixed.

Energy: L = L_dis + λ_pen L_pen + λ_spen L_spen + λ_sup L_sup, minimized over
the 51 hand pose parameters with analytic gradients chained through the
skinning Jacobian.
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from ..utils.logging import get_logger
from .config import ContactConfig
from .exceptions import DivergedOptimization, InvalidParams
from .hand import (
    GLOBAL_DOF, JOINT_DOF, PARAM_DOF, ContactDesignation, HandParams, HandRig, posed_with_jacobian,
)
from .mesh import TriMesh
from .optim import Adam, ParamGroup
from .sampling import SampleSource, SurfaceSamples, farthest_point_sample
from .sdf import SignedDistanceField

if TYPE_CHECKING:
    from .scene import GraspScene

logger = get_logger(__name__)

Points = Union[SurfaceSamples, np.ndarray]


def _positions(points: Points) -> np.ndarray:
    if isinstance(points, SurfaceSamples):
        return points.positions
    return np.asarray(points, dtype=np.float64).reshape(-1, 3)


@dataclass(frozen=True)
class HandFrame:
    """Hand-to-camera map x -> A x + b; A is a rotation, or a rotation times an x-mirror for left hands."""

    linear: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.linear.T + self.translation

    def apply_mesh(self, mesh: TriMesh) -> TriMesh:
        return mesh.transformed(self.linear, self.translation)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Per-term energies at one iterate; disabled terms are logged but weigh 0 in `total`."""

    iteration: int
    l_dis: float
    l_pen: float
    l_spen: float
    l_sup: float
    total: float


def term_weights(cfg: ContactConfig) -> np.ndarray:
    """Weights of (dis, pen, spen, sup) with ablated terms zeroed."""
    return np.array([
        1.0 if cfg.use_dis else 0.0,
        cfg.lambda_pen if cfg.use_pen else 0.0,
        cfg.lambda_spen if cfg.use_spen else 0.0,
        cfg.lambda_sup if cfg.use_sup else 0.0,
    ])


def loss_dis(contacts: Points, sdf: SignedDistanceField) -> float:
    """Mean |SDF| over the contact points."""
    values = sdf(_positions(contacts)).values
    return float(np.abs(values).mean())


def loss_pen(points: Points, sdf: SignedDistanceField) -> float:
    """Mean penetration depth, -min(SDF, 0), over the points."""
    values = sdf(_positions(points)).values
    return float(np.maximum(-values, 0.0).mean())


def exemption_matrix(parents: np.ndarray) -> np.ndarray:
    """exempt[a, b] is true for the same segment or a parent-child pair."""
    n = len(parents)
    exempt = np.eye(n, dtype=bool)
    for j in range(1, n):
        exempt[j, parents[j]] = exempt[parents[j], j] = True
    return exempt


def _spen_pairs(points: np.ndarray, segments: np.ndarray, exempt: np.ndarray, delta: float) -> np.ndarray:
    pairs = cKDTree(points).query_pairs(delta, output_type="ndarray")
    if len(pairs) == 0:
        return pairs.reshape(0, 2)
    keep = ~exempt[segments[pairs[:, 0]], segments[pairs[:, 1]]]
    return pairs[keep]


def spen_pair_count(segments: np.ndarray, exempt: np.ndarray) -> int:
    """Number of ordered non-exempt sample pairs."""
    counts = np.bincount(segments, minlength=len(exempt))
    allowed = counts[:, None] * counts[None, :] * ~exempt
    return int(allowed.sum())


def loss_spen(points: Points, segments: np.ndarray, parents: np.ndarray, delta: float) -> float:
    """Self-penetration hinge, sum over ordered pairs of max(δ - ||x - y||, 0) / pair count.

    Args:
        points: Hand surface samples
        segments: Skinning-dominant joint of every sample
        parents: Joint parent table; same-segment and parent-child pairs are exempt
        delta: Distance threshold in meters
    """
    x = _positions(points)
    if len(x) < 2:
        raise ValueError("self-penetration needs at least two samples")
    segments = np.asarray(segments, dtype=np.int64)
    exempt = exemption_matrix(np.asarray(parents))
    n_pairs = spen_pair_count(segments, exempt)
    if n_pairs == 0:
        return 0.0
    pairs = _spen_pairs(x, segments, exempt, delta)
    d = np.linalg.norm(x[pairs[:, 0]] - x[pairs[:, 1]], axis=1)
    return float(2.0 * np.maximum(delta - d, 0.0).sum() / n_pairs)


def loss_sup(theta: np.ndarray, reference: np.ndarray) -> float:
    """Euclidean distance between articulation vectors.

    Raises:
        InvalidParams: If either vector is not 45 long
    """
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    reference = np.asarray(reference, dtype=np.float64).reshape(-1)
    if theta.shape != (JOINT_DOF,) or reference.shape != (JOINT_DOF,):
        raise InvalidParams(f"articulation vectors must have length {JOINT_DOF}")
    return float(np.linalg.norm(theta - reference))


@dataclass(frozen=True, eq=False)
class ContactProblem:
    """Everything the contact stage needs, with the object already frozen in the camera frame."""

    rig: HandRig
    params: HandParams
    frame: HandFrame
    object_mesh: TriMesh
    designation: ContactDesignation
    reference_theta: np.ndarray

    @property
    def contact_ids(self) -> np.ndarray:
        return self.designation.vertices(self.rig)


class ContactEnergy:
    """Evaluates the energy and its analytic gradient over the 51 pose parameters."""

    def __init__(self, problem: ContactProblem, cfg: ContactConfig, sdf: Optional[SignedDistanceField] = None):
        self.problem = problem
        self.cfg = cfg
        self.weights = term_weights(cfg)
        self.sdf = sdf if sdf is not None else SignedDistanceField(problem.object_mesh)
        self.contact_ids = problem.contact_ids
        self.reference = np.asarray(problem.reference_theta, dtype=np.float64)
        if self.reference.shape != (JOINT_DOF,):
            raise InvalidParams(f"reference articulation must have length {JOINT_DOF}")

        rig = problem.rig
        rest = TriMesh.create(rig.shaped_vertices(problem.params.shape), rig.rest_mesh.triangles,
                              drop_degenerate=False)
        self.samples = farthest_point_sample(rest, cfg.hand_samples, cfg.seed, source=SampleSource.HAND_SURFACE)
        corner_ids = rig.rest_mesh.triangles[self.samples.triangles]
        blended = np.einsum("sc,scj->sj", self.samples.barycentric, rig.weights[corner_ids])
        self.segments = np.argmax(blended, axis=1)
        self.exempt = exemption_matrix(rig.parents)
        self.pair_count = spen_pair_count(self.segments, self.exempt)

        # One skinning pass covers contacts and sample corners
        self.vertex_ids, inverse = np.unique(np.concatenate([self.contact_ids, corner_ids.reshape(-1)]),
                                             return_inverse=True)
        self.contact_rows = inverse[:len(self.contact_ids)]
        self.corner_rows = inverse[len(self.contact_ids):].reshape(-1, 3)

    def _posed(self, params: HandParams) -> Tuple[np.ndarray, np.ndarray]:
        positions, jac = posed_with_jacobian(self.problem.rig, params, self.vertex_ids)
        A = self.problem.frame.linear
        return self.problem.frame.apply(positions), np.einsum("ab,nbk->nak", A, jac)

    def evaluate(self, vector: np.ndarray, iteration: int = -1) -> Tuple[EnergyBreakdown, np.ndarray]:
        """Energy breakdown and total-energy gradient at a 51-vector."""
        params = self.problem.params.with_vector(vector)
        positions, jac = self._posed(params)

        contact_x = positions[self.contact_rows]
        contact_j = jac[self.contact_rows]
        bary = self.samples.barycentric
        sample_x = np.einsum("sc,sca->sa", bary, positions[self.corner_rows])
        sample_j = np.einsum("sc,scak->sak", bary, jac[self.corner_rows])

        contact_sdf = self.sdf(contact_x)
        v, g = contact_sdf.values, contact_sdf.gradients
        n = len(v)
        l_dis = float(np.abs(v).mean())
        grad_dis = np.einsum("na,nak->k", np.sign(v)[:, None] * g / n, contact_j)

        if self.cfg.penetration_points == "hand":
            pen_sdf = self.sdf(sample_x)
            pv, pg, pen_j = pen_sdf.values, pen_sdf.gradients, sample_j
        else:
            pv, pg, pen_j = v, g, contact_j
        inside = pv < 0
        l_pen = float(np.maximum(-pv, 0.0).mean())
        grad_pen = np.einsum("na,nak->k", -(pg * inside[:, None]) / len(pv), pen_j)

        l_spen, grad_spen = self._spen(sample_x, sample_j)

        theta = params.joint_pose
        diff = theta - self.reference
        l_sup = float(np.linalg.norm(diff))
        grad_sup = np.zeros(PARAM_DOF)
        if l_sup > 0:
            grad_sup[GLOBAL_DOF:] = diff / l_sup

        w = self.weights
        total = float(w[0] * l_dis + w[1] * l_pen + w[2] * l_spen + w[3] * l_sup)
        grad = w[0] * grad_dis + w[1] * grad_pen + w[2] * grad_spen + w[3] * grad_sup
        return EnergyBreakdown(iteration, l_dis, l_pen, l_spen, l_sup, total), grad

    def _spen(self, x: np.ndarray, jac: np.ndarray) -> Tuple[float, np.ndarray]:
        if self.pair_count == 0:
            return 0.0, np.zeros(PARAM_DOF)
        pairs = _spen_pairs(x, self.segments, self.exempt, self.cfg.delta)
        diff = x[pairs[:, 0]] - x[pairs[:, 1]]
        d = np.linalg.norm(diff, axis=1)
        active = (d < self.cfg.delta) & (d > 0)
        pairs, diff, d = pairs[active], diff[active], d[active]
        value = float(2.0 * (self.cfg.delta - d).sum() / self.pair_count)

        direction = -2.0 * diff / d[:, None] / self.pair_count
        point_grad = np.zeros_like(x)
        np.add.at(point_grad, pairs[:, 0], direction)
        np.add.at(point_grad, pairs[:, 1], -direction)
        return value, np.einsum("na,nak->k", point_grad, jac)


def optimize_contacts(problem: ContactProblem, cfg: ContactConfig) -> Tuple[HandParams, List[EnergyBreakdown]]:
    """Adam over (global rotation, global translation, joint axis-angles) with their own learning rates.

    Returns:
        The lowest-energy iterate and the per-iteration breakdown (iteration 0 is the input)

    Raises:
        EmptyContactSet: If the designation is empty
        DivergedOptimization: If the energy or its gradient becomes non-finite
    """
    energy = ContactEnergy(problem, cfg)
    vector = problem.params.as_vector()
    row, grad = energy.evaluate(vector, 0)
    if not np.isfinite(row.total):
        raise DivergedOptimization("refine", 0)

    trace = [row]
    best_vector, best_total = vector.copy(), row.total
    optimizer = Adam(PARAM_DOF, [
        ParamGroup("rotation", 0, 3, cfg.lr_rotation),
        ParamGroup("translation", 3, GLOBAL_DOF, cfg.lr_translate),
        ParamGroup("axis", GLOBAL_DOF, PARAM_DOF, cfg.lr_axis),
    ], beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)

    for it in range(1, cfg.iterations + 1):
        if not np.all(np.isfinite(grad)):
            raise DivergedOptimization("refine", it)
        vector = vector + optimizer.step(grad)
        try:
            row, grad = energy.evaluate(vector, it)
        except InvalidParams:
            raise DivergedOptimization("refine", it)
        if not np.isfinite(row.total):
            raise DivergedOptimization("refine", it)
        trace.append(row)
        if row.total < best_total:
            best_vector, best_total = vector.copy(), row.total
        if it % cfg.log_every == 0:
            logger.debug(f"refine iteration {it}: dis={row.l_dis:.6g} pen={row.l_pen:.6g} "
                         f"spen={row.l_spen:.6g} sup={row.l_sup:.6g} total={row.total:.6g}")

    return problem.params.with_vector(best_vector), trace


def refine_grasp(scene: "GraspScene", cfg: ContactConfig) -> Tuple[HandParams, List[EnergyBreakdown]]:
    """Refine the hand of a scene whose object transform is frozen.

    Raises:
        StageOrderError: If the object transform is not frozen yet
        EmptyContactSet: If the designation is empty
        DivergedOptimization: If the energy becomes non-finite
    """
    return optimize_contacts(scene.contact_problem(), cfg)
