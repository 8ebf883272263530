"""Hyperparameter schemas for every refinement stage using Pydantic validation."""

from typing import List, Literal, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class GeometryConfig(BaseModel):
    """Limits for the geometric kernels."""

    model_config = ConfigDict(extra="forbid")

    cell_budget: int = Field(default=8_000_000, gt=0, description="Maximum voxel count of one occupancy grid")
    presample_factor: int = Field(default=50, gt=0, description="Dense pre-sample size per requested FPS point")
    presample_min: int = Field(default=20_000, gt=0, description="Lower bound on the dense pre-sample size")
    winding_chunk: int = Field(default=1_000_000, gt=0, description="Point-triangle pairs evaluated per winding-number batch")


class OpaConfig(BaseModel):
    """Object Pose Approximator hyperparameters."""

    model_config = ConfigDict(extra="forbid")

    iterations: int = Field(default=200, ge=0, description="Optimizer steps")
    learning_rate: float = Field(default=1e-3, gt=0, description="Adam step for the translation")
    lr_rotation: float = Field(default=5e-3, gt=0, description="Adam step for the rotation increment in radians")
    samples: int = Field(default=1000, gt=0, description="Farthest-point samples on the object surface")
    lambda_cam: float = Field(default=1000.0, gt=0, description="Weight of the normalized mask Chamfer loss")
    lambda_dep: float = Field(default=0.1, gt=0, description="Weight of the object-to-hand depth prior")
    beta1: float = Field(default=0.9, gt=0, lt=1)
    beta2: float = Field(default=0.999, gt=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    tolerance: float = Field(default=1e-12, gt=0, description="Stop once the loss changes less than this for `patience` steps")
    patience: int = Field(default=20, gt=0)
    fd_step: float = Field(default=1e-4, gt=0, description="Central finite-difference step for pose gradients")
    mask_budget: int = Field(default=4096, gt=0, description="Maximum mask points used by the Chamfer loss")
    mask_mode: Literal["interior", "boundary"] = "interior"
    translation_only: bool = False
    init_mode: Literal["centroid", "palm_ray"] = "centroid"
    z_near: float = Field(default=1e-4, gt=0)
    seed: int = 0
    log_every: int = Field(default=20, gt=0)


class CandidateConfig(BaseModel):
    """Distance and scale candidate grid."""

    model_config = ConfigDict(extra="forbid")

    count: int = Field(default=32, gt=0)
    min_factor: float = Field(default=0.25, gt=0, description="Smallest candidate distance as a multiple of the current one")
    max_factor: float = Field(default=4.0, gt=0, description="Largest candidate distance as a multiple of the current one")

    @model_validator(mode="after")
    def _check_range(self) -> "CandidateConfig":
        if self.max_factor < self.min_factor:
            raise ValueError("max_factor must not be smaller than min_factor")
        if self.count > 1 and self.max_factor == self.min_factor:
            raise ValueError("several candidates need a non-empty distance range")
        return self


class ContactConfig(BaseModel):
    """Hand contact optimization hyperparameters."""

    model_config = ConfigDict(extra="forbid")

    lambda_pen: float = Field(default=1.0, ge=0)
    lambda_spen: float = Field(default=0.75, ge=0)
    lambda_sup: float = Field(default=0.3, ge=0)
    delta: float = Field(default=0.01, gt=0, description="Self-penetration distance threshold in meters")
    iterations: int = Field(default=2000, ge=0)
    lr_translate: float = Field(default=1e-4, gt=0)
    lr_rotation: float = Field(default=1e-3, gt=0)
    lr_axis: float = Field(default=8e-4, gt=0)
    use_dis: bool = True
    use_pen: bool = True
    use_spen: bool = True
    use_sup: bool = True
    hand_samples: int = Field(default=512, ge=2, description="Hand surface samples for self-penetration")
    penetration_points: Literal["contacts", "hand"] = "contacts"
    beta1: float = Field(default=0.9, gt=0, lt=1)
    beta2: float = Field(default=0.999, gt=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    seed: int = 0
    log_every: int = Field(default=100, gt=0)


class MetricsConfig(BaseModel):
    """Evaluation settings."""

    model_config = ConfigDict(extra="forbid")

    samples: int = Field(default=10_000, gt=0, description="Surface samples per mesh for F-score and Chamfer")
    fscore_thresholds_mm: List[float] = Field(default_factory=lambda: [5.0, 10.0])
    contact_tolerance: float = Field(default=0.005, gt=0, description="Contact ratio distance tolerance in meters")
    voxel_size: float = Field(default=0.0025, gt=0, description="Voxel edge for solid intersection volume")
    seed: int = 0


class SimulationConfig(BaseModel):
    """Drop-test constants."""

    model_config = ConfigDict(extra="forbid")

    gravity: Tuple[float, float, float] = (0.0, -9.81, 0.0)
    duration: float = Field(default=1.0, ge=0)
    dt: float = Field(default=1e-3, gt=0)
    stiffness: float = Field(default=1e4, gt=0, description="Penalty stiffness per penetrating sample (N/m)")
    damping: float = Field(default=10.0, ge=0, description="Penalty damping per penetrating sample (N*s/m)")
    samples: int = Field(default=256, gt=0)
    escape_radius_cm: float = Field(default=500.0, gt=0)
    density: float = Field(default=1000.0, gt=0, description="Object density in kg/m^3")
    voxel_size: float = Field(default=0.005, gt=0, description="Voxel edge for mass properties")
    contact_band: float = Field(default=0.03, gt=0, description="Samples farther than this from the hand are treated as outside")
    max_substeps: int = Field(default=64, gt=0)
    seed: int = 0


class PipelineConfig(BaseModel):
    """All stage configurations bundled for the CLI."""

    model_config = ConfigDict(extra="forbid")

    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    opa: OpaConfig = Field(default_factory=OpaConfig)
    candidates: CandidateConfig = Field(default_factory=CandidateConfig)
    contact: ContactConfig = Field(default_factory=ContactConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
