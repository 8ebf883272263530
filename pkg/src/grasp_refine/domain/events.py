"""Provenance event schemas for pipeline stages using Pydantic validation."""

from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field


class SynthEvent(BaseModel):
    """Event data for a generated synthetic scene."""

    kind: Literal["synth"] = "synth"
    primitive: str = Field(description="Primitive kind of the object")
    seed: int = Field(description="Seed of the generator")


class AlignEvent(BaseModel):
    """Event data for the hand-object scale alignment."""

    kind: Literal["align"] = "align"
    k_scale: float = Field(gt=0, description="Factor applied to the object scale")
    object_scale: float = Field(gt=0, description="Object scale after alignment")
    init_mode: str = Field(description="Initial placement rule")


class OpaEvent(BaseModel):
    """Event data for the Object Pose Approximator."""

    kind: Literal["opa"] = "opa"
    iterations_run: int = Field(ge=0)
    initial_loss: float = Field(ge=0)
    best_loss: float = Field(ge=0)
    best_iteration: int = Field(ge=0)
    trace: Optional[str] = Field(default=None, description="Trace CSV written for this stage")


class SelectEvent(BaseModel):
    """Event data for distance and scale selection."""

    kind: Literal["select"] = "select"
    distance: float = Field(gt=0, description="Camera distance of the chosen candidate center")
    factor: float = Field(gt=0, description="Scale factor applied about the camera origin")
    score: float = Field(ge=0, description="Mean contact distance to the chosen candidate")
    candidates: int = Field(ge=1)


class FreezeEvent(BaseModel):
    """Event data for freezing the object transform."""

    kind: Literal["freeze"] = "freeze"
    reason: str = Field(min_length=1)


class RefineEvent(BaseModel):
    """Event data for hand contact optimization."""

    kind: Literal["refine"] = "refine"
    iterations_run: int = Field(ge=0)
    initial_total: float = Field(ge=0)
    best_total: float = Field(ge=0)
    trace: Optional[str] = Field(default=None, description="Trace CSV written for this stage")


EventData = Union[SynthEvent, AlignEvent, OpaEvent, SelectEvent, FreezeEvent, RefineEvent]


class ProvenanceEvent(BaseModel):
    """Common envelope for all stage events; the log is append-only."""

    sequence: int = Field(ge=1, description="Position in the scene's provenance log")
    stage: str = Field(description="Stage that produced the event")
    version: str = Field(description="grasp-refine version that ran the stage")
    config: Dict[str, Any] = Field(default_factory=dict, description="Every setting that affected the stage")
    data: EventData = Field(discriminator="kind", description="Stage-specific results")


def stages_run(events: List[ProvenanceEvent]) -> List[str]:
    """Stage names in the order they ran."""
    return [event.stage for event in events]
