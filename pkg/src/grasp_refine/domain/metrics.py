"""Reconstruction and interaction metrics."""

from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .bvh import build_bvh, nearest_surface
from .mesh import TriMesh
from .sampling import SurfaceSamples, area_sample
from .sdf import SignedDistanceField
from .volume import intersection_occupancy

M3_TO_CM3 = 1e6
SIV_TABLE_UNIT_CM3 = 100.0


class MetricReport(BaseModel):
    """Flat metric record; reconstruction fields are absent without a ground truth mesh."""

    model_config = ConfigDict(extra="forbid")

    f5: Optional[float] = Field(default=None, ge=0, le=1)
    f10: Optional[float] = Field(default=None, ge=0, le=1)
    cd: Optional[float] = Field(default=None, ge=0, description="Chamfer distance in mm")
    siv: float = Field(ge=0, description="Solid intersection volume in cm^3")
    siv_table: float = Field(ge=0, description="Solid intersection volume in units of 100 cm^3")
    cr: float = Field(ge=0, le=1)
    sd: float = Field(ge=0, description="Simulation displacement in cm")
    ipi: float = Field(ge=0)

    @model_validator(mode="after")
    def _fscore_order(self) -> "MetricReport":
        if self.f5 is not None and self.f10 is not None and self.f5 > self.f10:
            raise ValueError("f5 must not exceed f10")
        return self


def _surface_distances(pred: TriMesh, gt: TriMesh, samples: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Unsigned distances pred samples -> gt surface and gt samples -> pred surface."""
    rng = np.random.default_rng(seed)
    pred_points = area_sample(pred, samples, rng).positions
    gt_points = area_sample(gt, samples, rng).positions
    to_gt = nearest_surface(build_bvh(gt), pred_points).distances
    to_pred = nearest_surface(build_bvh(pred), gt_points).distances
    return to_gt, to_pred


def _fscore_from(to_gt: np.ndarray, to_pred: np.ndarray, threshold_mm: float) -> float:
    tau = threshold_mm / 1000.0
    precision = float(np.mean(to_gt <= tau))
    recall = float(np.mean(to_pred <= tau))
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def fscore(pred: TriMesh, gt: TriMesh, threshold: float, samples: int = 10_000, seed: int = 0) -> float:
    """F-score at `threshold` millimeters between seeded uniform surface samples."""
    to_gt, to_pred = _surface_distances(pred, gt, samples, seed)
    return _fscore_from(to_gt, to_pred, threshold)


def chamfer_3d(pred: TriMesh, gt: TriMesh, samples: int = 10_000, seed: int = 0) -> float:
    """Mean of the two directed mean point-to-surface distances, in millimeters."""
    to_gt, to_pred = _surface_distances(pred, gt, samples, seed)
    return float(0.5 * (to_gt.mean() + to_pred.mean()) * 1000.0)


def reconstruction_metrics(pred: TriMesh, gt: TriMesh, thresholds_mm: Sequence[float],
                           samples: int = 10_000, seed: int = 0) -> Dict[str, float]:
    """F-scores at every threshold and the Chamfer distance from one shared sample draw."""
    to_gt, to_pred = _surface_distances(pred, gt, samples, seed)
    out = {f"f{threshold:g}": _fscore_from(to_gt, to_pred, threshold) for threshold in thresholds_mm}
    out["cd"] = float(0.5 * (to_gt.mean() + to_pred.mean()) * 1000.0)
    return out


def solid_intersection_volume(hand: TriMesh, obj: TriMesh, voxel_size: float,
                              cell_budget: int = 8_000_000) -> float:
    """Overlap volume of two watertight solids in cm^3.

    Raises:
        SignRequiresWatertight: If either mesh is open
        GridTooLarge: If the shared grid exceeds `cell_budget`
    """
    return intersection_occupancy(hand, obj, voxel_size, cell_budget).volume * M3_TO_CM3


def contact_ratio(contacts, sdf: SignedDistanceField, tau: float = 0.005) -> float:
    """Fraction of contact points with |SDF| <= tau."""
    points = contacts.positions if isinstance(contacts, SurfaceSamples) else np.asarray(contacts).reshape(-1, 3)
    if len(points) == 0:
        raise ValueError("contact ratio needs at least one contact point")
    values = sdf(points).values
    return float(np.mean(np.abs(values) <= tau))


def ipi(cr: float, siv_table_units: float) -> float:
    """CR / exp(SIV) with SIV in units of 100 cm^3."""
    return float(cr / np.exp(siv_table_units))
