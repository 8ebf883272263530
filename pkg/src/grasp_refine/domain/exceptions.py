"""Custom exceptions for grasp-refine."""

from typing import Optional


class GraspRefineError(Exception):
    """Base exception for grasp-refine related errors."""
    pass


class ValidationFailure(GraspRefineError):
    """Raised when inputs violate a precondition of an operation."""
    pass


class OptimizationFailure(GraspRefineError):
    """Raised when a numerical procedure leaves the finite domain."""
    pass


class InvalidMesh(ValidationFailure):
    """Raised when a mesh is empty or structurally broken."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"Invalid mesh: {reason}")


class SignRequiresWatertight(ValidationFailure):
    """Raised when an inside/outside query is made against an open mesh."""

    def __init__(self, what: str = "signed distance"):
        self.what = what
        super().__init__(f"{what} requires a watertight mesh")


class SampleBudgetExceeded(ValidationFailure):
    """Raised when more samples are requested than the dense pre-sample holds."""

    def __init__(self, requested: int, available: int):
        self.requested = requested
        self.available = available
        super().__init__(f"Requested {requested} samples but only {available} are available")


class DegenerateHull(ValidationFailure):
    """Raised when a point set spans no volume."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"Degenerate convex hull: {reason}")


class GridTooLarge(ValidationFailure):
    """Raised when a voxel grid would exceed the configured cell budget."""

    def __init__(self, cells: int, budget: int):
        self.cells = cells
        self.budget = budget
        super().__init__(f"Voxel grid of {cells} cells exceeds budget of {budget}")


class NoVisiblePoints(ValidationFailure):
    """Raised when no projected point lies in front of the camera and inside the frame."""

    def __init__(self, count: int = 0):
        self.count = count
        super().__init__(f"None of {count} projected points is visible")


class EmptyMask(ValidationFailure):
    """Raised when a mask has no foreground pixel."""

    def __init__(self, source: str = "mask"):
        self.source = source
        super().__init__(f"{source} has no foreground pixels")


class EmptyContactSet(ValidationFailure):
    """Raised when a contact designation selects no hand vertex."""

    def __init__(self):
        super().__init__("Contact designation is empty")


class InvalidParams(ValidationFailure):
    """Raised when hand parameters have the wrong shape or non-finite values."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"Invalid hand parameters: {reason}")


class InvalidBox(ValidationFailure):
    """Raised when a detection box has no area or leaves the image."""

    def __init__(self, name: str, reason: str):
        self.name = name
        self.reason = reason
        super().__init__(f"Invalid {name} box: {reason}")


class ObjectOutsideFrustum(ValidationFailure):
    """Raised when the initial object pose projects nothing into the image."""

    def __init__(self):
        super().__init__("Object is outside the camera frustum at the initial pose")


class ObjectAtCameraOrigin(ValidationFailure):
    """Raised when the object center coincides with the camera center."""

    def __init__(self, distance: float):
        self.distance = distance
        super().__init__(f"Object center is {distance:.3g} m from the camera origin")


class SceneParseError(ValidationFailure):
    """Raised when a scene document or configuration violates its schema."""

    def __init__(self, field: str, reason: Optional[str] = None):
        self.field = field
        self.reason = reason
        message = f"Scene field '{field}' is invalid"
        if reason:
            message += f": {reason}"
        super().__init__(message)


class MissingAsset(ValidationFailure):
    """Raised when a file referenced by a scene is not found."""

    def __init__(self, path: str):
        self.path = path
        super().__init__(f"Required asset not found: {path}")


class StageOrderError(ValidationFailure):
    """Raised when pipeline stages are requested out of order."""

    def __init__(self, requested: str, reason: str):
        self.requested = requested
        self.reason = reason
        super().__init__(f"Cannot run stage '{requested}': {reason}")


class DivergedOptimization(OptimizationFailure):
    """Raised when an optimizer produces a non-finite loss."""

    def __init__(self, stage: str, iteration: int):
        self.stage = stage
        self.iteration = iteration
        super().__init__(f"{stage} diverged at iteration {iteration}")


class SimulationDiverged(OptimizationFailure):
    """Raised when the drop-test state becomes non-finite."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"Simulation state became non-finite at step {step}")
