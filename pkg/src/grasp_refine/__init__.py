"""grasp-refine - refines reconstructed hand and object models into a plausible grasp."""

__version__ = "0.1.0"

def main() -> None:
    """Entry point for the grasp-refine CLI."""
    from .main import main as cli_main
    raise SystemExit(cli_main())
