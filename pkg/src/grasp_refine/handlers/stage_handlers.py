"""Stage handlers: each runs one refinement stage on a scene and appends its provenance event."""

from typing import Optional

import numpy as np

from ..domain.alignment import (
    ObjectPlacement,
    candidate_distances,
    generate_candidates,
    init_object_pose,
    initial_scale_align,
    select_candidate,
)
from ..domain.config import PipelineConfig
from ..domain.contact import refine_grasp
from ..domain.events import AlignEvent, FreezeEvent, OpaEvent, RefineEvent, SelectEvent
from ..domain.exceptions import InvalidBox, StageOrderError
from ..domain.hand import palm_frame
from ..domain.pose_approximator import optimize_object_pose
from ..domain.scene import GraspScene
from ..repository.base import SceneRepository
from ..utils.logging import get_logger

logger = get_logger(__name__)

OPA_TRACE_HEADER = ("iteration", "chamfer", "depth", "total")
REFINE_TRACE_HEADER = ("iteration", "l_dis", "l_pen", "l_spen", "l_sup", "total")


def _require_unfrozen(scene: GraspScene, stage: str) -> None:
    if scene.object_frozen:
        raise StageOrderError(stage, "object transform is already frozen")


def camera_palm(scene: GraspScene):
    """Palm center and unit normal of the current hand in the camera frame."""
    center, normal = palm_frame(scene.rig, scene.hand_params)
    frame = scene.hand_frame()
    normal = frame.linear @ normal
    return frame.apply(center[None])[0], normal / np.linalg.norm(normal)


def handle_align(scene: GraspScene, config: PipelineConfig) -> AlignEvent:
    """Rescale the object to the hand and place it at the hand.

    Args:
        scene: Scene to update in place
        config: Pipeline configuration; `opa.init_mode` picks the placement rule

    Returns:
        The recorded align event

    Raises:
        StageOrderError: If the object transform is frozen
        InvalidBox: If the scene has no detection boxes or a box leaves the image
        DegenerateHull: If the hand or the object spans no volume
    """
    _require_unfrozen(scene, "align")
    if scene.boxes is None:
        raise InvalidBox("boxes", "scene has no detection boxes")
    logger.info("align: start")

    hand = scene.hand_mesh()
    k_scale = initial_scale_align(hand, scene.scaled_object(), scene.boxes)
    scale = scene.object_placement.scale * k_scale
    palm = camera_palm(scene) if config.opa.init_mode == "palm_ray" else None
    transform = init_object_pose(hand, scene.object_mesh.scaled(scale), scene.boxes, scene.image_size,
                                 config.opa.init_mode, palm)
    scene.object_placement = ObjectPlacement(transform, scale)

    event = AlignEvent(k_scale=k_scale, object_scale=scale, init_mode=config.opa.init_mode)
    scene.record("align", {"init_mode": config.opa.init_mode}, event)
    logger.info(f"align: k_scale={k_scale:.6g} object_scale={scale:.6g}")
    return event


def handle_opa(scene: GraspScene, config: PipelineConfig, repository: Optional[SceneRepository] = None,
               trace_ref: Optional[str] = None) -> OpaEvent:
    """Fit the object's rigid transform to the mask.

    Raises:
        StageOrderError: If the object transform is frozen
        ObjectOutsideFrustum: If the object is invisible at its current pose
        DivergedOptimization: If the optimizer leaves the image or produces non-finite values
    """
    _require_unfrozen(scene, "opa")
    logger.info("opa: start")

    hand_depth = float(scene.hand_mesh().centroid[2])
    result = optimize_object_pose(scene.scaled_object(), scene.mask, scene.camera,
                                  scene.object_placement.transform, config.opa, hand_depth)
    scene.object_placement = ObjectPlacement(result.transform.folded(), scene.object_placement.scale)

    if repository is not None and trace_ref is not None:
        repository.write_trace(trace_ref, OPA_TRACE_HEADER,
                               [(r.iteration, r.chamfer, r.depth, r.total) for r in result.trace])
    event = OpaEvent(iterations_run=len(result.trace) - 1, initial_loss=result.initial_loss,
                     best_loss=result.best_loss, best_iteration=result.best_iteration, trace=trace_ref)
    scene.record("opa", config.opa, event)
    logger.info(f"opa: loss {result.initial_loss:.6g} -> {result.best_loss:.6g} "
                f"(best at iteration {result.best_iteration})")
    return event


def handle_select(scene: GraspScene, config: PipelineConfig) -> SelectEvent:
    """Pick the camera distance whose rescaled object lies closest to the hand contacts, then freeze.

    Raises:
        StageOrderError: If the object transform is already frozen
        ObjectAtCameraOrigin: If the object center sits at the camera
        EmptyContactSet: If the scene designates no contacts
    """
    _require_unfrozen(scene, "select")
    logger.info("select: start")

    posed = scene.object_world_mesh()
    distances = candidate_distances(float(np.linalg.norm(posed.centroid)), config.candidates)
    candidates = generate_candidates(posed, distances, scene.object_placement)
    scored, winner = select_candidate(candidates, scene.contact_samples())
    chosen = scored[winner]

    scene.object_placement = chosen.placement
    scene.object_frozen = True
    event = SelectEvent(distance=chosen.distance, factor=chosen.factor, score=chosen.score, candidates=len(scored))
    scene.record("select", config.candidates, event)
    logger.info(f"select: distance={chosen.distance:.6g} factor={chosen.factor:.6g} score={chosen.score:.6g}")
    return event


def handle_freeze(scene: GraspScene, reason: str) -> FreezeEvent:
    """Freeze the object transform without selecting a distance."""
    scene.object_frozen = True
    event = FreezeEvent(reason=reason)
    scene.record("freeze", None, event)
    return event


def handle_refine(scene: GraspScene, config: PipelineConfig, repository: Optional[SceneRepository] = None,
                  trace_ref: Optional[str] = None) -> RefineEvent:
    """Optimize the hand parameters against the frozen object.

    A scene whose object is not frozen yet is frozen first, with a warning
    and a freeze event in its provenance.

    Raises:
        EmptyContactSet: If the scene designates no contacts
        DivergedOptimization: If the energy becomes non-finite
    """
    if not scene.object_frozen:
        logger.warning("refine: object transform was not frozen; freezing it at its current pose")
        handle_freeze(scene, "implicit before refine")
    logger.info("refine: start")

    params, trace = refine_grasp(scene, config.contact)
    scene.hand_params = params

    if repository is not None and trace_ref is not None:
        repository.write_trace(trace_ref, REFINE_TRACE_HEADER,
                               [(r.iteration, r.l_dis, r.l_pen, r.l_spen, r.l_sup, r.total) for r in trace])
    best = min(row.total for row in trace)
    event = RefineEvent(iterations_run=len(trace) - 1, initial_total=trace[0].total, best_total=best, trace=trace_ref)
    scene.record("refine", config.contact, event)
    logger.info(f"refine: energy {trace[0].total:.6g} -> {best:.6g}")
    return event
