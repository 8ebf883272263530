"""Object Pose Approximator: fit the object's rigid transform to its mask."""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.spatial import cKDTree

from ..utils.logging import get_logger
from .camera import CameraIntrinsics, MaskImage, chamfer_2d, mask_foreground_points, project_points
from .config import OpaConfig
from .exceptions import DivergedOptimization, NoVisiblePoints, ObjectOutsideFrustum
from .mesh import TriMesh
from .optim import Adam, ParamGroup
from .sampling import farthest_point_sample
from .transforms import RigidTransform

logger = get_logger(__name__)


@dataclass(frozen=True)
class OpaTraceRow:
    iteration: int
    chamfer: float
    depth: float
    total: float


@dataclass(frozen=True)
class OpaResult:
    transform: RigidTransform
    trace: List[OpaTraceRow]
    best_iteration: int

    @property
    def initial_loss(self) -> float:
        return self.trace[0].total

    @property
    def best_loss(self) -> float:
        return self.trace[self.best_iteration].total


class PoseObjective:
    """λ_cam · chamfer(projected samples, mask points) + λ_dep · (z_object - z_hand)^2."""

    def __init__(self, samples: np.ndarray, center: np.ndarray, mask_points: np.ndarray,
                 K: CameraIntrinsics, cfg: OpaConfig, hand_depth: Optional[float] = None):
        self.samples = samples
        self.center = center
        self.mask_points = mask_points
        self.mask_tree = cKDTree(mask_points)
        self.K = K
        self.cfg = cfg
        self.hand_depth = hand_depth

    def terms(self, pose: RigidTransform) -> OpaTraceRow:
        """Loss terms at `pose`; iteration is left at -1.

        Raises:
            NoVisiblePoints: If no sample projects into the image
        """
        projected = project_points(self.samples, pose, self.K, self.cfg.z_near)
        chamfer = chamfer_2d(projected, self.mask_points, tree_b=self.mask_tree)
        depth = 0.0
        if self.hand_depth is not None:
            depth = float((pose.apply(self.center)[2] - self.hand_depth) ** 2)
        total = self.cfg.lambda_cam * chamfer + self.cfg.lambda_dep * depth
        return OpaTraceRow(-1, chamfer, depth, total)

    def __call__(self, pose: RigidTransform) -> float:
        return self.terms(pose).total


def _fd_gradient(objective: PoseObjective, pose: RigidTransform, pivot: np.ndarray,
                 step: float, translation_only: bool) -> np.ndarray:
    """Central differences over (rotation increment about the pivot, translation)."""
    grad = np.zeros(6)
    for i in range(3 if translation_only else 0, 6):
        delta = np.zeros(6)
        delta[i] = step
        plus = objective(pose.perturbed(delta[:3], delta[3:], pivot))
        minus = objective(pose.perturbed(-delta[:3], -delta[3:], pivot))
        grad[i] = (plus - minus) / (2.0 * step)
    return grad


def optimize_object_pose(
    obj: TriMesh,
    mask: MaskImage,
    K: CameraIntrinsics,
    init: RigidTransform,
    cfg: OpaConfig,
    hand_depth: Optional[float] = None,
) -> OpaResult:
    """Minimize the mask Chamfer loss plus depth prior over the object's rigid transform.

    Every step evaluates the loss 12 times for a central finite-difference
    gradient, takes an Adam step on (rotation increment, translation) and
    folds the rotation into the base. The rotation turns about the object
    center in the camera frame.

    Args:
        obj: Object mesh in its own frame with its scale applied
        mask: Object mask
        K: Camera intrinsics
        init: Initial object-to-camera transform
        cfg: Optimizer settings
        hand_depth: Camera-frame depth of the hand center; disables the depth prior when None

    Returns:
        Best iterate and the per-iteration loss trace (iteration 0 is the initial pose)

    Raises:
        ObjectOutsideFrustum: If nothing is visible at the initial pose
        DivergedOptimization: If an iterate loses all visible points or the loss is non-finite
    """
    samples = farthest_point_sample(obj, cfg.samples, cfg.seed).positions
    mask_points = mask_foreground_points(mask, cfg.mask_budget, cfg.seed, cfg.mask_mode)
    objective = PoseObjective(samples, obj.centroid, mask_points, K, cfg, hand_depth)

    pose = init.folded()
    try:
        row = objective.terms(pose)
    except NoVisiblePoints:
        raise ObjectOutsideFrustum()
    if not np.isfinite(row.total):
        raise DivergedOptimization("opa", 0)

    trace = [OpaTraceRow(0, row.chamfer, row.depth, row.total)]
    best_pose, best_iteration = pose, 0
    groups = [ParamGroup("rotation", 0, 3, cfg.lr_rotation), ParamGroup("translation", 3, 6, cfg.learning_rate)]
    optimizer = Adam(6, groups, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    stalled = 0

    for it in range(1, cfg.iterations + 1):
        pivot = pose.apply(objective.center)
        try:
            grad = _fd_gradient(objective, pose, pivot, cfg.fd_step, cfg.translation_only)
            update = optimizer.step(grad)
            pose = pose.perturbed(update[:3], update[3:], pivot)
            row = objective.terms(pose)
        except NoVisiblePoints:
            raise DivergedOptimization("opa", it)
        if not (np.isfinite(row.total) and np.all(np.isfinite(grad))):
            raise DivergedOptimization("opa", it)

        previous = trace[-1].total
        trace.append(OpaTraceRow(it, row.chamfer, row.depth, row.total))
        if row.total < trace[best_iteration].total:
            best_pose, best_iteration = pose, it
        if it % cfg.log_every == 0:
            logger.debug(f"opa iteration {it}: chamfer={row.chamfer:.6g} depth={row.depth:.6g} total={row.total:.6g}")

        stalled = stalled + 1 if abs(previous - row.total) < cfg.tolerance else 0
        if stalled >= cfg.patience:
            logger.debug(f"opa converged after {it} iterations")
            break

    return OpaResult(best_pose, trace, best_iteration)
