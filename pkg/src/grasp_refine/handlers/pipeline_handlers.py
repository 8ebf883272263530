"""Pipeline orchestration: stage ordering, synthetic scene creation and multi-stage runs."""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..domain.camera import MaskImage
from ..domain.config import PipelineConfig
from ..domain.events import OpaEvent, RefineEvent, SelectEvent
from ..domain.exceptions import StageOrderError
from ..domain.scene import GraspScene
from ..domain.synthetic import SyntheticSpec, synth_scene
from ..repository.base import SceneRepository
from ..utils.logging import get_logger
from .stage_handlers import handle_align, handle_opa, handle_refine, handle_select

logger = get_logger(__name__)

STAGE_ORDER = ("align", "opa", "select", "refine")
FULL_PIPELINE = STAGE_ORDER


@dataclass
class PipelineReport:
    """Stage events of one run, keyed by stage name."""

    stages: List[str] = field(default_factory=list)
    events: Dict[str, object] = field(default_factory=dict)
    traces: Dict[str, str] = field(default_factory=dict)

    @property
    def opa(self) -> Optional[OpaEvent]:
        return self.events.get("opa")

    @property
    def select(self) -> Optional[SelectEvent]:
        return self.events.get("select")

    @property
    def refine(self) -> Optional[RefineEvent]:
        return self.events.get("refine")


def check_stage_order(requested: Sequence[str], completed: Iterable[str] = ()) -> List[str]:
    """Validate a stage request against the fixed order and the stages a scene already ran.

    Requested stages must be known, unique and in pipeline order. None may
    come before the latest pipeline stage already in the scene's provenance;
    repeating that latest stage is allowed.

    Returns:
        The requested stages as a list

    Raises:
        StageOrderError: If the request breaks the order
    """
    requested = list(requested)
    if not requested:
        raise StageOrderError("", "no stage requested")
    for stage in requested:
        if stage not in STAGE_ORDER:
            raise StageOrderError(stage, f"unknown stage; expected one of {', '.join(STAGE_ORDER)}")
    positions = [STAGE_ORDER.index(stage) for stage in requested]
    for before, after, stage in zip(positions, positions[1:], requested[1:]):
        if after <= before:
            raise StageOrderError(stage, f"stages run in the order {' -> '.join(STAGE_ORDER)}, once each")

    done = [STAGE_ORDER.index(stage) for stage in completed if stage in STAGE_ORDER]
    if done and positions[0] < max(done):
        raise StageOrderError(requested[0], f"scene has already run '{STAGE_ORDER[max(done)]}'")
    return requested


def run_pipeline(
    scene: GraspScene,
    stages: Sequence[str],
    config: PipelineConfig,
    repository: Optional[SceneRepository] = None,
    trace_stem: Optional[str] = None,
) -> Tuple[GraspScene, PipelineReport]:
    """Run the requested stages in the order align, opa, select, refine on a copy of the scene.

    Skipping stages realizes the ablations: without opa the silhouette loss
    never acts; without refine no contact optimization happens.

    Args:
        scene: Input scene, left unchanged
        stages: Stages to run
        config: Pipeline configuration
        repository: Where traces are written, if anywhere
        trace_stem: Trace references become '<stem>_opa.csv' and '<stem>_refine.csv'

    Returns:
        The updated scene and the per-stage report

    Raises:
        StageOrderError: If the request is out of order or conflicts with the scene's history
    """
    requested = check_stage_order(stages, scene.stages)
    scene = scene.copy()
    report = PipelineReport()

    def trace_ref(stage: str) -> Optional[str]:
        if repository is None or trace_stem is None:
            return None
        ref = f"{trace_stem}_{stage}.csv"
        report.traces[stage] = ref
        return ref

    for stage in requested:
        if stage == "align":
            event = handle_align(scene, config)
        elif stage == "opa":
            event = handle_opa(scene, config, repository, trace_ref("opa"))
        elif stage == "select":
            event = handle_select(scene, config)
        else:
            event = handle_refine(scene, config, repository, trace_ref("refine"))
        report.stages.append(stage)
        report.events[stage] = event

    logger.info(f"pipeline finished: {' -> '.join(report.stages)}")
    return scene, report


def handle_synth(spec: SyntheticSpec, repository: Optional[SceneRepository] = None,
                 ref: Optional[str] = None) -> Tuple[GraspScene, MaskImage]:
    """Generate a synthetic scene and save it when a repository and reference are given."""
    scene, mask = synth_scene(spec)
    if repository is not None and ref is not None:
        repository.save_scene(scene, ref)
        logger.info(f"synth: wrote {spec.kind} scene to {ref}")
    return scene, mask
