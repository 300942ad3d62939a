"""Text file formats (JSON documents) and the binary depth-map format.

Every real number is written as decimal text rounded to 12 significant
digits, and documents are serialised with sorted keys so repeated writes
are byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .binning import LookupTable
from .descriptor import format_descriptor, parse_descriptor
from .geometry import FeatureSet, Kind, MacroFeature, RigidTransform
from .pipeline import INDEX_VERSION, PreprocessedIndex
from .reconstruction import CameraIntrinsics, DepthMap, DetectionBox, Segment2D

FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def num(x) -> float:
    return float(f"{float(x):.12g}")


def nums(a) -> list:
    return np.vectorize(num, otypes=[float])(np.asarray(a, dtype=float)).tolist()


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _write(path, doc: dict) -> None:
    Path(path).write_text(dumps(doc))


def _read(path, fmt: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != fmt:
        raise FormatError(f"{path}: not a {fmt} document")
    if doc.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {doc.get('version')!r}")
    return doc


def _wrap(fmt: str, **body) -> dict:
    return {"format": fmt, "version": FORMAT_VERSION, **body}


# feature sets

def feature_record(f: MacroFeature) -> dict:
    rec: dict[str, Any] = {"id": f.id, "kind": f.kind.value, "centroid": nums(f.centroid)}
    if f.corners is not None:
        rec["corners"] = nums(f.corners)
    return rec


def feature_from_record(rec: dict) -> MacroFeature:
    try:
        return MacroFeature(int(rec["id"]), Kind(rec["kind"]), rec["centroid"], rec.get("corners"))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad feature record {rec!r}") from exc


def features_doc(fs: FeatureSet) -> dict:
    return _wrap("macroloc.features",
                 features=[feature_record(f) for f in sorted(fs, key=lambda f: f.id)])


def save_features(path, fs: FeatureSet) -> None:
    _write(path, features_doc(fs))


def load_features(path) -> FeatureSet:
    doc = _read(path, "macroloc.features")
    try:
        return FeatureSet(feature_from_record(r) for r in doc["features"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


# transforms

def transform_doc(T: RigidTransform) -> dict:
    return _wrap("macroloc.transform", rotation=nums(T.rotation), translation=nums(T.translation))


def transform_from_doc(doc: dict) -> RigidTransform:
    try:
        return RigidTransform(doc["rotation"], doc["translation"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad transform: {exc}") from exc


def save_transform(path, T: RigidTransform) -> None:
    _write(path, transform_doc(T))


def load_transform(path) -> RigidTransform:
    return transform_from_doc(_read(path, "macroloc.transform"))


# preprocessed index

def table_record(t: LookupTable) -> dict:
    return {"value_kind": t.value_kind, "boundaries": [num(b) for b in t.boundaries]}


def table_from_record(rec: dict) -> LookupTable:
    return LookupTable(tuple(rec["boundaries"]), rec["value_kind"])


def save_index(path, index: PreprocessedIndex) -> None:
    doc = _wrap(
        "macroloc.index",
        index_version=index.version,
        distance_table=table_record(index.distance_table),
        angle_table=table_record(index.angle_table),
        descriptors={str(k): format_descriptor(v) for k, v in sorted(index.descriptors.items())},
        skipped={str(k): v for k, v in sorted(index.skipped.items())},
        features=features_doc(index.reference)["features"],
    )
    _write(path, doc)


def load_index(path) -> PreprocessedIndex:
    doc = _read(path, "macroloc.index")
    if doc.get("index_version") != INDEX_VERSION:
        raise FormatError(f"{path}: unrecognised index version {doc.get('index_version')!r}")
    try:
        reference = FeatureSet(feature_from_record(r) for r in doc["features"])
        descriptors = {int(k): parse_descriptor(v) for k, v in doc["descriptors"].items()}
        skipped = {int(k): v for k, v in doc.get("skipped", {}).items()}
        return PreprocessedIndex(reference, table_from_record(doc["distance_table"]),
                                 table_from_record(doc["angle_table"]), descriptors, skipped)
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


# reconstruction inputs

def save_depth(path, depth: DepthMap) -> None:
    Path(path).write_bytes(depth.to_bytes())


def load_depth(path) -> DepthMap:
    try:
        return DepthMap.from_bytes(Path(path).read_bytes())
    except (OSError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_detections(path, boxes: list[DetectionBox]) -> None:
    _write(path, _wrap("macroloc.detections", detections=[
        {"kind": b.kind.value, "box": nums([b.x_min, b.y_min, b.x_max, b.y_max]),
         "confidence": num(b.confidence)} for b in boxes]))


def load_detections(path) -> list[DetectionBox]:
    doc = _read(path, "macroloc.detections")
    try:
        return [DetectionBox(Kind(d["kind"]), *d["box"], d.get("confidence", 1.0))
                for d in doc["detections"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_segments(path, segments: list[Segment2D]) -> None:
    _write(path, _wrap("macroloc.segments", segments=[
        nums([s.start[0], s.start[1], s.end[0], s.end[1]]) for s in segments]))


def load_segments(path) -> list[Segment2D]:
    doc = _read(path, "macroloc.segments")
    try:
        return [Segment2D(s[:2], s[2:]) for s in doc["segments"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_intrinsics(path, K: CameraIntrinsics) -> None:
    _write(path, _wrap("macroloc.intrinsics", fx=num(K.fx), fy=num(K.fy), cx=num(K.cx), cy=num(K.cy)))


def load_intrinsics(path) -> CameraIntrinsics:
    doc = _read(path, "macroloc.intrinsics")
    try:
        return CameraIntrinsics(doc["fx"], doc["fy"], doc["cx"], doc["cy"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
