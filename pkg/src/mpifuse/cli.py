"""Command-line orchestration: capture planning, MPI construction, path
rendering, evaluation, epipolar slicing, and web viewer export.

Distances are meters and angles degrees on the flag surface (radians
internally).  Frame files are zero-padded 4-digit 8-bit PNGs.  Exit codes:
0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from . import build as scene_build
from . import bundle, evaluate, fusion, planner, webexport
from .geometry import Camera, Intrinsics, Pose, load_cameras, save_cameras
from .images import load_png, save_png
from .mpi import Mpi


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 1, not argparse's 2
        raise UsageError(message)


@dataclass(frozen=True)
class ViewPath:
    """Camera keyframes with linear translation and slerped orientation."""

    keyframes: tuple[Camera, ...]
    samples_per_segment: int

    def __post_init__(self):
        if not self.keyframes:
            raise ValueError("need at least one keyframe")
        if self.samples_per_segment < 1:
            raise ValueError("samples_per_segment must be >= 1")

    def cameras(self) -> list[Camera]:
        keys = self.keyframes
        if len(keys) == 1:
            return [keys[0]]
        out = []
        intr = keys[0].intrinsics
        for a, b in zip(keys, keys[1:]):
            rots = Rotation.from_matrix(np.stack([a.pose.rotation, b.pose.rotation]))
            slerp = Slerp([0.0, 1.0], rots)
            for s in range(self.samples_per_segment):
                t = s / self.samples_per_segment
                trans = (1.0 - t) * a.pose.translation + t * b.pose.translation
                rot = slerp([t]).as_matrix()[0]
                out.append(Camera(intr, Pose(rot, trans)))
        out.append(keys[-1])
        return out


def _blend_mode(name: str) -> str:
    return {"grid": fusion.GRID_BILINEAR, "irregular": fusion.IRREGULAR_EXPONENTIAL}[name]


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _load_bundles(mpi_dir: Path) -> tuple[list[Mpi], list[dict]]:
    paths = sorted(mpi_dir.glob("*.mpib"))
    if not paths:
        raise FileNotFoundError(f"no .mpib bundles in {mpi_dir}")
    mpis = [bundle.import_mpi(p) for p in paths]
    metas = [bundle.read_meta(p) for p in paths]
    return mpis, metas


def _load_frames(frame_dir: Path) -> list[np.ndarray]:
    paths = sorted(frame_dir.glob("*.png"))
    if not paths:
        raise FileNotFoundError(f"no .png frames in {frame_dir}")
    return [load_png(p)[..., :3] for p in paths]


def _grid_cameras(plan: planner.CapturePlan, intr: Intrinsics) -> list[Camera]:
    return [Camera(intr, Pose.at(x, y, 0.0)) for x, y in plan.positions]


# --- subcommands ---------------------------------------------------------------


def _cmd_plan(args) -> int:
    req = planner.CapturePlanRequest(
        fov_x_rad=math.radians(args.theta_deg), side_m=args.s, z_min=args.zmin,
        width_px=args.width, num_views=args.n, max_views=args.max_views)
    try:
        plan = planner.capture_plan(req, max_disparity_px=args.max_empirical_disparity)
    except planner.PlanInfeasibleError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        print(f"minimal_views={e.minimal_views}", file=sys.stderr)
        return 2
    report = {
        "num_views": plan.num_views,
        "per_side": plan.per_side,
        "spacing_m": plan.spacing_m,
        "width_px": plan.width_px,
        "num_planes": plan.num_planes,
        "max_disparity_px": plan.max_disparity_px,
        "render_ops_per_mpi": plan.render_ops_per_mpi,
        "storage_samples": plan.storage_samples,
    }
    text = "".join(f"{k}={v}\n" for k, v in report.items())
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_atomic(out / "plan.txt", text)
        csv = "".join(f"{x:.9g},{y:.9g}\n" for x, y in plan.positions)
        _write_atomic(out / "positions.csv", csv)
        height = args.height or max(1, round(plan.width_px * 3 / 4))
        intr = Intrinsics.from_fov(math.radians(args.theta_deg), plan.width_px, height)
        save_cameras(out / "cameras.txt", _grid_cameras(plan, intr))
    return 0


def _cmd_synth(args) -> int:
    rng = np.random.default_rng(args.seed)
    depths = [float(d) for d in args.depths.split(",")] if args.depths else \
        list(np.geomspace(args.zmin, args.zmax, args.layers))
    scene = scene_build.make_random_scene(
        rng, len(depths), depths, math.radians(args.theta_deg),
        args.width, args.height, camera_span=args.span)
    scene_build.save_scene(scene, args.out)
    print(f"wrote {len(depths)}-layer scene to {args.out}")
    return 0


def _cmd_build(args) -> int:
    cams = load_cameras(args.poses)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.ground_truth:
        if not args.scene:
            raise UsageError("--ground-truth requires --scene")
        scene = scene_build.load_scene(args.scene)
        z_min = args.zmin or min(layer.depth for layer in scene.layers)
        z_max = args.zmax or max(layer.depth for layer in scene.layers)
        for i, cam in enumerate(cams):
            mpi = scene_build.build_mpi_groundtruth(scene, cam, args.planes, z_min, z_max)
            bundle.export_mpi(mpi, out / f"mpi_{i:03d}.mpib", z_min=z_min, z_max=z_max,
                              source_id=f"scene:{args.scene}#view{i}")
    else:
        if not args.images:
            raise UsageError("need --images (or --ground-truth with --scene)")
        if not (args.zmin and args.zmax):
            raise UsageError("--images mode requires --zmin and --zmax")
        image_paths = sorted(Path(args.images).glob("*.png"))
        if len(image_paths) != len(cams):
            raise FileNotFoundError(
                f"{len(image_paths)} images for {len(cams)} poses in {args.images}")
        images = [load_png(p)[..., :3] for p in image_paths]
        centers = np.stack([c.pose.translation for c in cams])
        for i, cam in enumerate(cams):
            dist = np.linalg.norm(centers - centers[i], axis=1)
            order = np.lexsort((np.arange(len(cams)), dist))
            take = order[:min(scene_build.NUM_PSV_SOURCES, len(cams))]
            sources = [(cams[j], images[j]) for j in take]
            psv = scene_build.build_psv(cam, sources, args.planes, args.zmin, args.zmax,
                                        allow_fewer=args.allow_fewer)
            mpi = scene_build.build_mpi_photoconsistency(psv, temperature=args.tau)
            bundle.export_mpi(mpi, out / f"mpi_{i:03d}.mpib", z_min=args.zmin,
                              z_max=args.zmax, source_id=image_paths[i].name)
    print(f"wrote {len(cams)} MPI bundles to {out}")
    return 0


def _cmd_render(args) -> int:
    mpis, _ = _load_bundles(Path(args.mpis))
    keyframes = load_cameras(args.path)
    path = ViewPath(tuple(keyframes), args.samples)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mode = _blend_mode(args.mode)
    for i, cam in enumerate(path.cameras()):
        view = fusion.render_novel_view(mpis, cam, mode, neighbors=args.neighbors)
        save_png(out / f"frame_{i:04d}.png", view.rgb, bit_depth=8)
    print(f"rendered {i + 1} frames to {out}")
    return 0


def _cmd_eval(args) -> int:
    mpis, metas = _load_bundles(Path(args.mpis))
    targets = load_cameras(args.targets)
    mode = _blend_mode(args.blend)

    if args.scene:
        scene = scene_build.load_scene(args.scene)
        reference = [scene_build.render_layered_scene(scene, cam) for cam in targets]
    elif args.gt:
        reference = _load_frames(Path(args.gt))
        if len(reference) != len(targets):
            raise FileNotFoundError(f"{len(reference)} reference frames "
                                    f"for {len(targets)} targets")
    else:
        raise UsageError("need --scene or --gt for reference frames")

    if args.mode == "lfi":
        z_min = float(metas[0].get("z_min", 1.0 / mpis[0].depth_planes[-1]))
        z_max_s = metas[0].get("z_max", "inf")
        z_max = math.inf if z_max_s in ("inf", "") else float(z_max_s)
        mean_disp = evaluate.mean_scene_disparity(z_min, z_max)
        if args.scene:
            sources = [(m.camera, scene_build.render_layered_scene(scene, m.camera))
                       for m in mpis]
        elif args.images:
            image_paths = sorted(Path(args.images).glob("*.png"))
            if len(image_paths) != len(mpis):
                raise FileNotFoundError(f"{len(image_paths)} images for {len(mpis)} MPIs")
            sources = [(m.camera, load_png(p)[..., :3]) for m, p in zip(mpis, image_paths)]
        else:
            raise UsageError("lfi mode needs --scene or --images for source views")
        rendered = [evaluate.lfi_render(sources, cam, mean_disp, mode,
                                        num_planes=mpis[0].num_planes, z_min=z_min,
                                        neighbors=args.neighbors)
                    for cam in targets]
    else:
        rendered = [evaluate.ablation_render(mpis, cam, args.mode, mode,
                                             neighbors=args.neighbors)
                    for cam in targets]

    if args.save_frames:
        frames_dir = Path(args.save_frames)
        frames_dir.mkdir(parents=True, exist_ok=True)
        for i, frame in enumerate(rendered):
            save_png(frames_dir / f"frame_{i:04d}.png", frame, bit_depth=8)

    report = evaluate.MetricReport.from_frames(rendered, reference)
    evaluate.write_metrics_csv(report, args.out)
    print(f"mode={args.mode} psnr={report.psnr:.4f} ssim={report.ssim:.6f}")
    return 0


def _cmd_slice(args) -> int:
    frames = _load_frames(Path(args.frames))
    image = evaluate.epipolar_slice(frames, args.row)
    save_png(args.out, image, bit_depth=8)
    print(f"wrote {image.shape[0]}x{image.shape[1]} epipolar slice to {args.out}")
    return 0


def _cmd_export_web(args) -> int:
    mpis, _ = _load_bundles(Path(args.mpis))
    manifest = webexport.write_web_bundle(mpis, args.out, _blend_mode(args.mode),
                                          neighbors=args.neighbors)
    print(f"wrote viewer bundle manifest to {manifest}")
    return 0


# --- parser --------------------------------------------------------------------


def _build_parser() -> _Parser:
    p = _Parser(prog="mpifuse", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plan", help="solve a capture plan")
    sp.add_argument("--theta-deg", type=float, required=True, help="horizontal FOV, degrees")
    sp.add_argument("--s", type=float, required=True, help="view plane side length, meters")
    sp.add_argument("--zmin", type=float, required=True, help="closest scene depth, meters")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--width", type=int, help="fix image width (px), solve view count")
    g.add_argument("--n", type=int, help="fix view count, solve image width")
    sp.add_argument("--max-views", type=int, default=None)
    sp.add_argument("--max-empirical-disparity", type=int,
                    default=planner.DEFAULT_DISPARITY_CAP_PX)
    sp.add_argument("--height", type=int, default=None, help="image height for cameras.txt")
    sp.add_argument("--out", default=None, help="directory for plan.txt/positions.csv/cameras.txt")
    sp.set_defaults(func=_cmd_plan)

    sp = sub.add_parser("synth", help="generate a layered test scene")
    sp.add_argument("--layers", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--depths", default=None, help="comma-separated layer depths (m)")
    sp.add_argument("--zmin", type=float, default=1.0)
    sp.add_argument("--zmax", type=float, default=5.0)
    sp.add_argument("--theta-deg", type=float, default=64.0)
    sp.add_argument("--width", type=int, default=96)
    sp.add_argument("--height", type=int, default=72)
    sp.add_argument("--span", type=float, default=1.0, help="camera span to cover, meters")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_synth)

    sp = sub.add_parser("build", help="build MPI bundles for input views")
    sp.add_argument("--poses", required=True)
    sp.add_argument("--planes", type=int, required=True)
    sp.add_argument("--zmin", type=float, default=None)
    sp.add_argument("--zmax", type=float, default=None)
    sp.add_argument("--ground-truth", action="store_true")
    sp.add_argument("--scene", default=None)
    sp.add_argument("--images", default=None)
    sp.add_argument("--tau", type=float, default=scene_build.DEFAULT_TEMPERATURE)
    sp.add_argument("--allow-fewer", action="store_true",
                    help="accept 2-4 source views per sweep")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_build)

    sp = sub.add_parser("render", help="render a camera path from MPI bundles")
    sp.add_argument("--mpis", required=True)
    sp.add_argument("--path", required=True, help="pose file of keyframes")
    sp.add_argument("--samples", type=int, default=8, help="samples per segment")
    sp.add_argument("--mode", choices=["grid", "irregular"], default="irregular")
    sp.add_argument("--neighbors", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_render)

    sp = sub.add_parser("eval", help="score a pipeline against reference frames")
    sp.add_argument("--mpis", required=True)
    sp.add_argument("--targets", required=True, help="pose file of target views")
    sp.add_argument("--mode", choices=["full", "single", "average", "lfi"], default="full")
    sp.add_argument("--blend", choices=["grid", "irregular"], default="irregular")
    sp.add_argument("--neighbors", type=int, default=None)
    sp.add_argument("--scene", default=None, help="scene dir for analytic reference")
    sp.add_argument("--gt", default=None, help="directory of reference frames")
    sp.add_argument("--images", default=None, help="source images for lfi mode")
    sp.add_argument("--save-frames", default=None)
    sp.add_argument("--out", required=True, help="metrics CSV path")
    sp.set_defaults(func=_cmd_eval)

    sp = sub.add_parser("slice", help="extract an epipolar slice from rendered frames")
    sp.add_argument("--frames", required=True)
    sp.add_argument("--row", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_slice)

    sp = sub.add_parser("export-web", help="emit a browser viewer bundle")
    sp.add_argument("--mpis", required=True)
    sp.add_argument("--mode", choices=["grid", "irregular"], default="irregular")
    sp.add_argument("--neighbors", type=int, default=5)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_export_web)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
