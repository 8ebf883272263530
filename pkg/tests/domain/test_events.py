"""Tests for provenance event schemas."""

import pytest
from pydantic import ValidationError

from grasp_refine.domain.events import (
    AlignEvent,
    FreezeEvent,
    OpaEvent,
    ProvenanceEvent,
    RefineEvent,
    SelectEvent,
    SynthEvent,
    stages_run,
)


class TestEventData:
    """Tests for the stage-specific event models."""

    def test_kind_defaults(self):
        """Test that each event carries its stage kind."""
        assert SynthEvent(primitive="box", seed=0).kind == "synth"
        assert AlignEvent(k_scale=1.2, object_scale=1.2, init_mode="palm").kind == "align"
        assert FreezeEvent(reason="explicit").kind == "freeze"

    def test_scale_must_be_positive(self):
        """Test that an alignment event rejects a non-positive scale."""
        with pytest.raises(ValidationError):
            AlignEvent(k_scale=0.0, object_scale=1.0, init_mode="palm")

    def test_select_needs_a_candidate(self):
        """Test that a selection event needs at least one candidate."""
        with pytest.raises(ValidationError):
            SelectEvent(distance=0.5, factor=1.0, score=0.01, candidates=0)

    def test_negative_loss_rejected(self):
        """Test that losses are non-negative."""
        with pytest.raises(ValidationError):
            OpaEvent(iterations_run=3, initial_loss=-1.0, best_loss=0.0, best_iteration=0)

    def test_empty_freeze_reason_rejected(self):
        """Test that a freeze event needs a reason."""
        with pytest.raises(ValidationError):
            FreezeEvent(reason="")


class TestProvenanceEvent:
    """Tests for the provenance envelope and its discriminator."""

    def test_discriminator_selects_model(self):
        """Test that raw data is parsed into the model named by its kind."""
        event = ProvenanceEvent.model_validate({
            "sequence": 1,
            "stage": "refine",
            "version": "0.1.0",
            "data": {"kind": "refine", "iterations_run": 10, "initial_total": 2.0, "best_total": 1.5},
        })
        assert isinstance(event.data, RefineEvent)
        assert event.data.best_total == 1.5
        assert event.config == {}

    def test_unknown_kind_rejected(self):
        """Test that an unknown event kind fails validation."""
        with pytest.raises(ValidationError):
            ProvenanceEvent.model_validate({
                "sequence": 1, "stage": "x", "version": "0.1.0", "data": {"kind": "teleport"},
            })

    def test_sequence_starts_at_one(self):
        """Test that sequence numbers are positive."""
        with pytest.raises(ValidationError):
            ProvenanceEvent(sequence=0, stage="synth", version="0.1.0",
                            data=SynthEvent(primitive="box", seed=0))

    def test_json_round_trip_keeps_kind(self):
        """Test that a dumped event validates back to the same data model."""
        event = ProvenanceEvent(sequence=2, stage="opa", version="0.1.0", config={"iterations": 5},
                                data=OpaEvent(iterations_run=5, initial_loss=3.0, best_loss=1.0,
                                              best_iteration=4, trace="opa_trace.csv"))
        restored = ProvenanceEvent.model_validate_json(event.model_dump_json())
        assert restored == event
        assert isinstance(restored.data, OpaEvent)


class TestStagesRun:
    """Tests for reading the stage order from a log."""

    def test_order_is_preserved(self):
        """Test that stages are listed in log order."""
        events = [
            ProvenanceEvent(sequence=1, stage="synth", version="0.1.0", data=SynthEvent(primitive="box", seed=0)),
            ProvenanceEvent(sequence=2, stage="freeze", version="0.1.0", data=FreezeEvent(reason="explicit")),
        ]
        assert stages_run(events) == ["synth", "freeze"]

    def test_empty_log(self):
        """Test that an empty log has no stages."""
        assert stages_run([]) == []
