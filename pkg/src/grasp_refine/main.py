"""Command-line entry point for grasp-refine."""

import argparse
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional, Sequence

from pydantic import ValidationError

from .domain.config import PipelineConfig
from .domain.exceptions import GraspRefineError, OptimizationFailure, SceneParseError, ValidationFailure
from .domain.scene import GraspScene
from .domain.synthetic import SyntheticSpec
from .handlers.evaluation_handlers import ABLATIONS, EVAL_COLUMNS, evaluate_scene, format_table, handle_ablate, handle_export
from .handlers.pipeline_handlers import STAGE_ORDER, handle_synth, run_pipeline
from .repository.filesystem import FileSystemSceneRepository
from .utils.config import apply_overrides, get_thread_count, load_pipeline_config
from .utils.logging import configure_logging, get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGED = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--log-level", default="info", help="debug, info, warn, error or critical")
    parser.add_argument("--config", type=Path, default=None, help="JSON file with configuration sections")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.FIELD=VALUE",
                        help="Override one configuration field; repeatable")


def _add_scenes(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("scenes", nargs="+", type=Path, help="Scene files")
    parser.add_argument("--out-dir", type=Path, default=None,
                        help="Write results here under the input file names (default: overwrite in place)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grasp-refine",
                                     description="Refine reconstructed hand and object models into a plausible grasp")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="Generate a synthetic scene with a known object pose")
    _add_common(synth)
    synth.add_argument("output", type=Path, help="Scene file to write")
    synth.add_argument("--kind", choices=("sphere", "box", "cylinder", "lathe-mug"), default="box")
    synth.add_argument("--dims", type=float, nargs="+", default=None, help="Primitive dimensions in meters")
    synth.add_argument("--rotation", type=float, nargs=3, default=None, help="True rotation, axis-angle radians")
    synth.add_argument("--translation", type=float, nargs=3, default=None, help="True position in meters")
    synth.add_argument("--perturb-rotation", type=float, default=0.0, help="Degrees")
    synth.add_argument("--perturb-translation", type=float, default=0.0, help="Meters")
    synth.add_argument("--perturb-scale", type=float, default=1.0)
    synth.add_argument("--seed", type=int, default=0)

    for stage in STAGE_ORDER:
        stage_parser = sub.add_parser(stage, help=f"Run the {stage} stage")
        _add_common(stage_parser)
        _add_scenes(stage_parser)

    run = sub.add_parser("run", help="Run several stages in pipeline order")
    _add_common(run)
    _add_scenes(run)
    run.add_argument("--stages", default=",".join(STAGE_ORDER),
                     help="Comma-separated subset of " + ",".join(STAGE_ORDER))

    evaluate = sub.add_parser("eval", help="Compute the interaction and reconstruction metrics of a scene")
    _add_common(evaluate)
    evaluate.add_argument("scene", type=Path)
    evaluate.add_argument("--gt", type=Path, default=None, help="Ground-truth object mesh in camera coordinates")
    evaluate.add_argument("--json", type=Path, default=None, help="Write the metric report here")

    ablate = sub.add_parser("ablate", help="Evaluate the ablation variants on copies of a scene")
    _add_common(ablate)
    ablate.add_argument("scene", type=Path)
    ablate.add_argument("--variants", nargs="+", choices=tuple(ABLATIONS), default=list(ABLATIONS))
    ablate.add_argument("--json", type=Path, default=None, help="Write the list of reports here")

    export = sub.add_parser("export", help="Write the posed hand and object meshes")
    _add_common(export)
    export.add_argument("scene", type=Path)
    export.add_argument("--hand", type=Path, required=True, help="OBJ or PLY file for the hand")
    export.add_argument("--object", type=Path, required=True, help="OBJ or PLY file for the object")
    return parser


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    return apply_overrides(load_pipeline_config(args.config), args.overrides)


def _exit_code(error: GraspRefineError) -> int:
    return EXIT_DIVERGED if isinstance(error, OptimizationFailure) else EXIT_VALIDATION


def _process_scenes(paths: Sequence[Path], out_dir: Optional[Path], stages: Sequence[str],
                    config: PipelineConfig) -> int:
    """Run the stages on every scene, one scene per worker; returns the worst exit code."""
    repository = FileSystemSceneRepository()

    def process(path: Path) -> int:
        target = (out_dir / path.name) if out_dir is not None else path
        try:
            scene = repository.load_scene(str(path))
            refined, _ = run_pipeline(scene, stages, config, repository, str(target.with_suffix("")))
            repository.save_scene(refined, str(target))
        except GraspRefineError as e:
            logger.error(f"{path}: {e}")
            return _exit_code(e)
        logger.info(f"{path}: wrote {target}")
        return EXIT_OK

    workers = max(1, min(get_thread_count(), len(paths)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        codes = list(pool.map(process, paths))
    return max(codes)


def _run_synth(args: argparse.Namespace, config: PipelineConfig) -> int:
    fields = {
        "kind": args.kind,
        "dimensions": args.dims,
        "perturb_rotation_deg": args.perturb_rotation,
        "perturb_translation": args.perturb_translation,
        "perturb_scale": args.perturb_scale,
        "seed": args.seed,
    }
    if args.rotation is not None:
        fields["rotation"] = args.rotation
    if args.translation is not None:
        fields["translation"] = args.translation
    try:
        spec = SyntheticSpec(**fields)
    except ValidationError as e:
        first = e.errors()[0]
        raise SceneParseError(".".join(str(p) for p in first.get("loc", ())) or "synth", first.get("msg"))
    handle_synth(spec, FileSystemSceneRepository(), str(args.output))
    return EXIT_OK


def _run_eval(args: argparse.Namespace, config: PipelineConfig) -> int:
    repository = FileSystemSceneRepository()
    scene = repository.load_scene(str(args.scene))
    gt = repository.load_mesh(str(args.gt)) if args.gt is not None else None
    report = evaluate_scene(scene, config, gt)
    print(format_table({args.scene.stem: report}, EVAL_COLUMNS))
    if args.json is not None:
        args.json.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _run_ablate(args: argparse.Namespace, config: PipelineConfig) -> int:
    repository = FileSystemSceneRepository()
    scene: GraspScene = repository.load_scene(str(args.scene))
    reports = handle_ablate(scene, config, args.variants)
    print(format_table(reports))
    if args.json is not None:
        rows = [{"variant": name, **report.model_dump(exclude_none=True)} for name, report in reports.items()]
        args.json.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _run_export(args: argparse.Namespace, config: PipelineConfig) -> int:
    repository = FileSystemSceneRepository()
    scene = repository.load_scene(str(args.scene))
    handle_export(scene, repository, str(args.hand), str(args.object))
    return EXIT_OK


def _dispatch(args: argparse.Namespace, config: PipelineConfig) -> int:
    commands: dict[str, Callable[[argparse.Namespace, PipelineConfig], int]] = {
        "synth": _run_synth,
        "eval": _run_eval,
        "ablate": _run_ablate,
        "export": _run_export,
    }
    if args.command in commands:
        return commands[args.command](args, config)
    if args.command == "run":
        stages: List[str] = [s.strip() for s in args.stages.split(",") if s.strip()]
    else:
        stages = [args.command]
    return _process_scenes(args.scenes, args.out_dir, stages, config)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the command and map failures to exit codes.

    Returns:
        0 on success, 2 on validation errors, 3 on optimization divergence
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        config = _load_config(args)
        return _dispatch(args, config)
    except ValidationFailure as e:
        logger.error(str(e))
        return EXIT_VALIDATION
    except OptimizationFailure as e:
        logger.error(str(e))
        return EXIT_DIVERGED


if __name__ == "__main__":
    raise SystemExit(main())
