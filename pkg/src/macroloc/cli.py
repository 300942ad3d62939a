"""Command-line interface: ``macroloc {preprocess,localize,generate,reconstruct,eval}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .descriptor import InsufficientNeighborsError, format_descriptor
from .evaluation import evaluate
from .geometry import RigidTransform
from .matching import Correspondence
from .pipeline import LocalizationError, build_index, localize
from .reconstruction import (InsufficientDepthError, SideNotFoundError, join_segments,
                             merge_duplicate_features, reconstruct_feature)
from .registration import RansacConfig
from .scenegen import (SceneSpec, default_intrinsics, generate_observed, generate_reference,
                       look_at_pose, render_depth_scene)


class CommandError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def _emit(args, report: dict, text: str) -> None:
    if args.json:
        print(json.dumps(report, sort_keys=True))
    else:
        print(text)


def cmd_preprocess(args) -> None:
    try:
        model = io.load_features(args.model)
    except io.FormatError as exc:
        raise CommandError("parse", str(exc))
    try:
        index = build_index(model)
    except (InsufficientNeighborsError, ValueError) as exc:
        raise CommandError("descriptor", str(exc))
    io.save_index(args.out, index)
    report = {
        "features": len(model),
        "descriptors": len(index.descriptors),
        "skipped": len(index.skipped),
        "distance_bins": index.distance_table.bin_count,
        "angle_bins": index.angle_table.bin_count,
    }
    _emit(args, report, (
        f"features: {report['features']}\n"
        f"descriptors: {report['descriptors']} (skipped {report['skipped']})\n"
        f"distance bins: {report['distance_bins']}\n"
        f"angle bins: {report['angle_bins']}"))


def cmd_localize(args) -> None:
    try:
        index = io.load_index(args.index)
        observed = io.load_features(args.observed)
        cfg = RansacConfig(success_probability=args.p, inlier_ratio=args.omega,
                           inlier_threshold=args.inlier_threshold, rng_seed=args.seed)
    except (io.FormatError, ValueError) as exc:
        raise CommandError("parse", str(exc))
    try:
        loc = localize(index, observed, cfg, max_hamming=args.max_hamming,
                       refine=not args.no_refine)
    except LocalizationError as exc:
        raise CommandError(exc.stage, str(exc))
    res = loc.result
    io.save_transform(args.out, res.transform)
    report = {
        "observed_features": len(observed),
        "observed_descriptors": len(loc.descriptors),
        "matches": len(loc.correspondences),
        "inliers": len(res.inliers),
        "rmse": res.rmse,
        "hypotheses": res.hypotheses_used,
        "refined": res.refined,
        "wall_time_s": loc.wall_time,
        "correspondences": [[c.observed_id, c.reference_id, c.hamming] for c in loc.correspondences],
        "inlier_ids": [c.observed_id for c in res.inliers],
        "descriptors": {str(k): format_descriptor(v) for k, v in loc.descriptors.items()},
    }
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    _emit(args, report, (
        f"matches: {report['matches']} (from {report['observed_descriptors']} observed descriptors)\n"
        f"inliers: {report['inliers']}\n"
        f"rmse: {res.rmse:.6f} m{' (corner-refined)' if res.refined else ''}\n"
        f"hypotheses: {res.hypotheses_used}\n"
        f"wall time: {loc.wall_time * 1e3:.2f} ms"))


def _fixture_pose(feature, building_center) -> RigidTransform:
    lt, lb, rt, _ = feature.corners
    up = lt - lb
    normal = np.cross(rt - lt, up)
    normal /= np.linalg.norm(normal)
    if np.dot(building_center - feature.centroid, normal) < 0:
        normal = -normal
    return look_at_pose(feature.centroid + 3.0 * normal, feature.centroid, up)


def cmd_generate(args) -> None:
    try:
        spec = SceneSpec(layout=args.layout, door_count=args.doors, window_count=args.windows,
                         extent=tuple(args.extent), noise_sigma=args.noise,
                         dropout_rate=args.dropout, spurious_rate=args.spurious,
                         rng_seed=args.seed)
        reference = generate_reference(spec)
        observed, truth = generate_observed(reference, spec)
    except ValueError as exc:
        raise CommandError("generate", str(exc))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.save_features(out / "reference.features", reference)
    io.save_features(out / "observed.features", observed)
    io.save_transform(out / "truth.transform", truth)
    written = ["reference.features", "observed.features", "truth.transform"]
    if args.depth_fixtures:
        K = default_intrinsics()
        center = observed.centroids.mean(axis=0)
        for f in observed:
            if f.corners is None:
                continue
            pose = _fixture_pose(f, center)
            depth, box, segments = render_depth_scene(f, K, pose, split_pieces=args.split_pieces)
            d = out / "fixtures" / f"feature_{f.id}"
            d.mkdir(parents=True, exist_ok=True)
            io.save_depth(d / "depth.mrdepth", depth)
            io.save_detections(d / "detections.json", [box])
            io.save_segments(d / "segments.json", segments)
            io.save_intrinsics(d / "intrinsics.json", K)
            io.save_transform(d / "pose.transform", pose)
            written.append(str(d.relative_to(out)))
    report = {"reference_features": len(reference), "observed_features": len(observed),
              "files": written}
    _emit(args, report, (
        f"reference features: {len(reference)}\n"
        f"observed features: {len(observed)}\n"
        f"wrote {len(written)} outputs to {out}"))


def cmd_reconstruct(args) -> None:
    try:
        boxes = io.load_detections(args.detections)
        segments = io.load_segments(args.segments)
        depth = io.load_depth(args.depth)
        K = io.load_intrinsics(args.intrinsics)
        pose = io.load_transform(args.pose)
    except io.FormatError as exc:
        raise CommandError("parse", str(exc))
    joined = join_segments(segments)
    features, failures = [], []
    for i, box in enumerate(boxes):
        try:
            features.append(reconstruct_feature(box, joined, depth, K, pose, feature_id=i))
        except (SideNotFoundError, InsufficientDepthError, ValueError) as exc:
            failures.append({"detection": i, "error": str(exc)})
    merged = merge_duplicate_features(features)
    io.save_features(args.out, _feature_set(merged))
    report = {"detections": len(boxes), "features": len(merged), "failures": failures}
    lines = [f"detections: {len(boxes)}", f"features written: {len(merged)}"]
    lines += [f"detection {f['detection']} skipped: {f['error']}" for f in failures]
    _emit(args, report, "\n".join(lines))


def _feature_set(features):
    from .geometry import FeatureSet
    return FeatureSet(features)


def cmd_eval(args) -> None:
    try:
        truth = io.load_transform(args.truth)
        estimate = io.load_transform(args.estimate)
        corr = None
        if args.matches:
            rep = json.loads(Path(args.matches).read_text())
            corr = [Correspondence(int(o), int(r), int(h)) for o, r, h in rep["correspondences"]]
    except (io.FormatError, OSError, KeyError, ValueError) as exc:
        raise CommandError("parse", str(exc))
    report = evaluate(estimate, truth, goal=args.goal, trajectory_length=args.trajectory_length,
                      correspondences=corr)
    _emit(args, report.as_dict(), str(report))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="macroloc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        p.add_argument("--json", action="store_true", help="print the machine-readable report")
        return p

    p = add("preprocess", cmd_preprocess, "build lookup tables and descriptors for a reference model")
    p.add_argument("model")
    p.add_argument("out")

    p = add("localize", cmd_localize, "register observed features against a preprocessed index")
    p.add_argument("index")
    p.add_argument("observed")
    p.add_argument("out")
    p.add_argument("--p", type=float, default=0.99, help="RANSAC success probability")
    p.add_argument("--omega", type=float, default=0.5, help="assumed inlier ratio")
    p.add_argument("--inlier-threshold", type=float, default=0.3, help="metres")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-hamming", type=int, default=63)
    p.add_argument("--no-refine", action="store_true", help="skip the corner refinement")
    p.add_argument("--report", help="also write the diagnostics JSON here")

    p = add("generate", cmd_generate, "write a synthetic reference/observed/truth triple")
    p.add_argument("out_dir")
    p.add_argument("--layout", default="corridor", choices=["corridor", "grid", "ring", "wall"])
    p.add_argument("--doors", type=int, default=20)
    p.add_argument("--windows", type=int, default=10)
    p.add_argument("--extent", type=float, nargs=3, default=list(SceneSpec.extent),
                   metavar=("L", "W", "H"))
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--spurious", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--depth-fixtures", action="store_true",
                   help="render a depth/detection fixture for every observed feature")
    p.add_argument("--split-pieces", type=int, default=1,
                   help="break fixture edges into this many segments")

    p = add("reconstruct", cmd_reconstruct, "3D features from detections, segments and depth")
    for name in ("detections", "segments", "depth", "intrinsics", "pose", "out"):
        p.add_argument(name)

    p = add("eval", cmd_eval, "compare an estimated transform with the truth")
    p.add_argument("truth")
    p.add_argument("estimate")
    p.add_argument("--goal", type=float, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("--trajectory-length", type=float)
    p.add_argument("--matches", help="localize --report file, for match accuracy")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CommandError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
