"""Shared fixtures for grasp-refine tests."""

import tempfile
from pathlib import Path

import numpy as np
import pytest
import trimesh

from grasp_refine.domain.camera import CameraIntrinsics
from grasp_refine.domain.config import PipelineConfig
from grasp_refine.domain.mesh import TriMesh
from grasp_refine.domain.synthetic import SyntheticSpec, make_primitive, shared_capsule_hand, synth_scene, \
    toy_grasp_scene


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def unit_cube():
    """Axis-aligned unit cube centered at the origin."""
    box = trimesh.creation.box(extents=(1.0, 1.0, 1.0))
    return TriMesh.create(box.vertices, box.faces).oriented_outward()


@pytest.fixture
def unit_sphere():
    """Icosphere of radius 1 centered at the origin."""
    return make_primitive("sphere", [1.0])


@pytest.fixture
def camera():
    """256x256 pinhole camera with a 300 px focal length."""
    return CameraIntrinsics(fx=300.0, fy=300.0, cx=128.0, cy=128.0, width=256, height=256)


@pytest.fixture(scope="session")
def rig():
    """The builtin capsule hand."""
    return shared_capsule_hand()


@pytest.fixture
def box_scene():
    """Synthetic box scene with a small known perturbation."""
    spec = SyntheticSpec(kind="box", perturb_rotation_deg=5.0, perturb_translation=0.01, seed=3)
    scene, _ = synth_scene(spec)
    return scene


@pytest.fixture
def toy_scene():
    """Builtin hand curled around a sphere floating off the fingertips."""
    return toy_grasp_scene(seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fast_config():
    """Pipeline configuration with short optimizations and a short drop test."""
    return PipelineConfig.model_validate({
        "opa": {"iterations": 10, "samples": 100, "learning_rate": 2e-3},
        "candidates": {"count": 8},
        "contact": {"iterations": 20, "hand_samples": 64},
        "metrics": {"samples": 500, "voxel_size": 0.005},
        "simulation": {"duration": 0.05, "samples": 64},
    })
