"""Frames to per-frame feature rows, offline and incrementally."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import encode_graph, normalize_motion, motion_width
from .graph_builder import build_scene_graph
from .scene_model import (
    HandObservation, KinematicState, ObjectCatalog, ObjectObservation, SceneFrame,
    kinematic_radius, kinematics_arrays, validate_frame,
)
from .segmenter import ActivityEnded, IuCompleted, OnlineSegmenter, SegmentationResult, segment


class StreamError(ValueError):
    """A frame or stream violates the catalog or timing constraints."""


@dataclass
class FeatureSeries:
    timestamps: np.ndarray
    rows: np.ndarray          # raw integer [x_m | x_c] per frame
    depth: int

    @property
    def x_m(self) -> np.ndarray:
        return self.rows[:, :motion_width(self.depth)]

    @property
    def x_c(self) -> np.ndarray:
        return self.rows[:, motion_width(self.depth):]


def planarize(frame: SceneFrame) -> SceneFrame:
    """Zero every z component; orientations must already be yaw angles."""
    hands = []
    for h in frame.hands:
        lm = np.array(h.landmarks)
        lm[:, 2] = 0.0
        hands.append(HandObservation(h.id, lm))
    objs = []
    for o in frame.objects:
        if len(o.orientation) != 1:
            raise StreamError(f"planar mode needs yaw orientation for object {o.id}")
        p = np.array(o.position)
        p[2] = 0.0
        objs.append(ObjectObservation(o.id, p, o.orientation))
    return SceneFrame(frame.t, hands, objs)


def check_frame(frame: SceneFrame, catalog: ObjectCatalog, prev_t=None) -> SceneFrame:
    report = validate_frame(frame, catalog)
    if report:
        raise StreamError(f"invalid frame at t={frame.t}: " + "; ".join(report))
    if prev_t is not None:
        if frame.t <= prev_t:
            raise StreamError(f"non-monotonic time: {frame.t} after {prev_t}")
        if frame.t - prev_t > catalog.params.max_gap:
            raise StreamError(f"gap of {frame.t - prev_t:.3f}s exceeds max_gap")
    return planarize(frame) if catalog.params.planar else frame


def _track_positions(frames, catalog: ObjectCatalog):
    first = frames[0]
    hand_ids = sorted(h.id for h in first.hands)
    obj_ids = sorted(o.id for o in first.objects)
    for f in frames:
        if sorted(h.id for h in f.hands) != hand_ids or sorted(o.id for o in f.objects) != obj_ids:
            raise StreamError(f"tracked set changes at t={f.t}; every id must be present in every frame")
    tracks = {}
    for hid in hand_ids:
        ref = catalog.hands[hid].ref_index
        tracks[first.hand(hid).vid] = [f.hand(hid).landmarks[ref] for f in frames]
    for oid in obj_ids:
        tracks[first.object(oid).vid] = [f.object(oid).position for f in frames]
    return {k: np.array(v) for k, v in tracks.items()}


def _encode_block(frames, catalog: ObjectCatalog, hand_id: int, idx) -> list:
    p = catalog.params
    t = np.array([f.t for f in frames])
    kin = {}
    for vid, pos in _track_positions(frames, catalog).items():
        v, s, a, g = kinematics_arrays(pos, t, p.smooth_window, p.eps_v, p.eps_a)
        kin[vid] = (v, s, a, g)
    rows = []
    for i in idx:
        states = {vid: KinematicState(v[i], float(s[i]), float(a[i]), int(g[i]))
                  for vid, (v, s, a, g) in kin.items()}
        graph = build_scene_graph(frames[i], states, hand_id, catalog)
        fc = encode_graph(graph, p.depth)
        rows.append(fc.x_m + fc.x_c)
    return rows


def default_hand(frames_or_catalog) -> int:
    if isinstance(frames_or_catalog, ObjectCatalog):
        return min(frames_or_catalog.hands)
    return min(h.id for h in frames_or_catalog[0].hands)


def encode_stream(frames, catalog: ObjectCatalog, hand_id: int | None = None) -> FeatureSeries:
    frames = list(frames)
    checked, prev = [], None
    for f in frames:
        checked.append(check_frame(f, catalog, prev))
        prev = f.t
    if len(checked) < 3:
        raise StreamError("insufficient samples: need at least 3 frames")
    if hand_id is None:
        hand_id = default_hand(checked)
    rows = _encode_block(checked, catalog, hand_id, range(len(checked)))
    return FeatureSeries(np.array([f.t for f in checked]), np.array(rows, dtype=int),
                         catalog.params.depth)


def segment_stream(frames, catalog: ObjectCatalog, hand_id=None) -> tuple[FeatureSeries, SegmentationResult]:
    fs = encode_stream(frames, catalog, hand_id)
    return fs, segment(fs.rows, catalog.params, fs.timestamps)


class StreamEncoder:
    """Incremental encoder: a row is emitted once its kinematics are final."""

    def __init__(self, catalog: ObjectCatalog, hand_id: int | None = None):
        self.catalog = catalog
        self.hand_id = hand_id
        self.radius = kinematic_radius(catalog.params.smooth_window)
        self.frames: list[SceneFrame] = []
        self.emitted = 0

    def push(self, frame: SceneFrame) -> list:
        prev = self.frames[-1].t if self.frames else None
        self.frames.append(check_frame(frame, self.catalog, prev))
        if self.hand_id is None:
            self.hand_id = default_hand(self.frames)
        return self._emit(len(self.frames) - self.radius)

    def close(self) -> list:
        if len(self.frames) < 3:
            raise StreamError("insufficient samples: need at least 3 frames")
        return self._emit(len(self.frames))

    def _emit(self, upto: int) -> list:
        n = len(self.frames)
        if upto <= self.emitted or n < 3:
            return []
        lo = max(0, self.emitted - self.radius)
        block = self.frames[lo:n]
        if len(block) < 3:
            return []
        rows = _encode_block(block, self.catalog, self.hand_id,
                             range(self.emitted - lo, upto - lo))
        self.emitted = upto
        return rows


def online_events(frames, catalog: ObjectCatalog, hand_id=None):
    """Yield segmenter events (IU completions, activity ends) as frames arrive."""
    enc = StreamEncoder(catalog, hand_id)
    seg = OnlineSegmenter(catalog.params)
    for f in frames:
        for row in enc.push(f):
            yield from seg.push(row)
    for row in enc.close():
        yield from seg.push(row)
    yield from seg.close()


__all__ = [
    "ActivityEnded", "FeatureSeries", "IuCompleted", "StreamEncoder", "StreamError",
    "encode_stream", "normalize_motion", "online_events", "segment_stream",
]
