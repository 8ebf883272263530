"""Evaluation, ablation and export handlers."""

from typing import Dict, List, Optional, Sequence, Tuple

from ..domain.config import PipelineConfig
from ..domain.metrics import SIV_TABLE_UNIT_CM3, MetricReport, contact_ratio, ipi, reconstruction_metrics, \
    solid_intersection_volume
from ..domain.mesh import TriMesh
from ..domain.scene import GraspScene
from ..domain.sdf import SignedDistanceField
from ..domain.simulation import simulate_drop
from ..repository.base import SceneRepository
from ..utils.logging import get_logger
from .pipeline_handlers import FULL_PIPELINE, run_pipeline

logger = get_logger(__name__)

# Variant name -> (stages, contact config overrides)
ABLATIONS: Dict[str, Tuple[Tuple[str, ...], Dict[str, bool]]] = {
    "full": (FULL_PIPELINE, {}),
    "no_dis": (FULL_PIPELINE, {"use_dis": False}),
    "no_pen": (FULL_PIPELINE, {"use_pen": False}),
    "no_spen": (FULL_PIPELINE, {"use_spen": False}),
    "no_sup": (FULL_PIPELINE, {"use_sup": False}),
    "no_cd": (("align", "select", "refine"), {}),
    "no_contact": (("align", "opa", "select"), {}),
}
TABLE_COLUMNS = ("sd", "ipi", "cr", "siv")
EVAL_COLUMNS = ("f5", "f10", "cd", "siv", "sd", "ipi", "cr")


def evaluate_scene(scene: GraspScene, config: PipelineConfig, gt_mesh: Optional[TriMesh] = None) -> MetricReport:
    """Interaction metrics of a scene, plus reconstruction metrics against a ground truth.

    Args:
        scene: Scene to evaluate
        config: Pipeline configuration (metrics, simulation and geometry sections)
        gt_mesh: Ground-truth object in the camera frame; defaults to the scene's
            synthetic ground truth when it has one

    Raises:
        SignRequiresWatertight: If the hand or the object is not closed
        GridTooLarge: If the intersection grid exceeds the cell budget
        SimulationDiverged: If the drop test blows up
    """
    metrics = config.metrics
    hand = scene.hand_mesh()
    obj = scene.object_world_mesh()

    siv = solid_intersection_volume(hand, obj, metrics.voxel_size, config.geometry.cell_budget)
    cr = contact_ratio(scene.contact_samples(), SignedDistanceField(obj), metrics.contact_tolerance)
    sd = simulate_drop(hand, obj, config.simulation).displacement_cm
    siv_table = siv / SIV_TABLE_UNIT_CM3
    values = {"siv": siv, "siv_table": siv_table, "cr": cr, "sd": sd, "ipi": ipi(cr, siv_table)}

    if gt_mesh is None and scene.ground_truth is not None:
        gt_mesh = scene.ground_truth.world_mesh(scene.object_mesh)
    if gt_mesh is not None:
        recon = reconstruction_metrics(obj, gt_mesh, metrics.fscore_thresholds_mm, metrics.samples, metrics.seed)
        values.update({key: recon[key] for key in ("f5", "f10", "cd") if key in recon})

    report = MetricReport(**values)
    logger.info(f"eval: siv={report.siv:.4g}cm3 cr={report.cr:.3f} sd={report.sd:.4g}cm ipi={report.ipi:.4g}")
    return report


def variant_config(config: PipelineConfig, overrides: Dict[str, bool]) -> PipelineConfig:
    if not overrides:
        return config
    return config.model_copy(update={"contact": config.contact.model_copy(update=overrides)})


def handle_ablate(scene: GraspScene, config: PipelineConfig,
                  variants: Sequence[str] = tuple(ABLATIONS)) -> Dict[str, MetricReport]:
    """Run each ablation variant on a copy of the scene and evaluate it.

    On a scene whose object is already frozen only the refine stage of a
    variant runs; a variant left with no stage is evaluated as is.

    Returns:
        Reports keyed by variant, in the requested order

    Raises:
        ValueError: If a variant name is unknown
    """
    unknown = [name for name in variants if name not in ABLATIONS]
    if unknown:
        raise ValueError(f"unknown ablation variant(s): {', '.join(unknown)}")

    reports = {}
    for name in variants:
        stages, overrides = ABLATIONS[name]
        if scene.object_frozen:
            stages = tuple(stage for stage in stages if stage == "refine")
        logger.info(f"ablate: variant {name}")
        if stages:
            refined, _ = run_pipeline(scene, stages, variant_config(config, overrides))
        else:
            refined = scene.copy()
        reports[name] = evaluate_scene(refined, config)
    return reports


def _cell(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"


def format_table(reports: Dict[str, MetricReport], columns: Sequence[str] = TABLE_COLUMNS) -> str:
    """Aligned plain-text table, one row per report."""
    header = ["variant"] + [c.upper() for c in columns]
    rows: List[List[str]] = [header]
    for name, report in reports.items():
        rows.append([name] + [_cell(getattr(report, c)) for c in columns])
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths)))
             for row in rows]
    return "\n".join(lines)


def handle_export(scene: GraspScene, repository: SceneRepository, hand_ref: str, object_ref: str) -> None:
    """Write the posed hand and object meshes in camera coordinates."""
    repository.save_mesh(scene.hand_mesh(), hand_ref)
    repository.save_mesh(scene.object_world_mesh(), object_ref)
    logger.info(f"export: wrote {hand_ref} and {object_ref}")
