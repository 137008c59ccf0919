"""Event hierarchy: ERUs, interaction units and activities.

Works on raw integer feature rows ``[x_m | x_c]`` per frame. Rows are
morphologically filtered first; normalization of x_m happens when an IU is
assembled.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .features import motion_width, normalize_motion
from .scene_model import NONE_ID, Params


def morpho_filter(series, length: int) -> np.ndarray:
    """Opening followed by closing with a flat element of ``length`` frames,
    applied to each column independently."""
    if length < 1 or length % 2 == 0:
        raise ValueError(f"filter length must be odd and >= 1, got {length}")
    x = np.asarray(series)
    if length == 1 or len(x) == 0:
        return x.copy()
    size = (length,) + (1,) * (x.ndim - 1)
    opened = ndimage.grey_opening(x, size=size, mode="nearest")
    return ndimage.grey_closing(opened, size=size, mode="nearest")


def filter_radius(length: int) -> int:
    """Frames on either side that can influence one filtered sample."""
    return 2 * (length - 1)


@dataclass
class Eru:
    start: int
    end: int
    value: tuple[int, ...]


@dataclass
class InteractionUnit:
    start: int
    end: int
    x_c: tuple[int, ...]
    erus: list[Eru]
    x_m_raw: np.ndarray
    motion: np.ndarray
    timestamps: tuple[float, float] | None = None

    @property
    def anchor(self) -> int:
        return self.x_c[1] if len(self.x_c) > 1 else NONE_ID

    def __len__(self):
        return self.end - self.start


@dataclass
class ActivitySegment:
    start: int
    end: int
    ius: list[InteractionUnit]
    anchor: int


@dataclass
class SegmentationResult:
    erus: list[Eru]
    ius: list[InteractionUnit]
    activities: list[ActivitySegment]
    # IUs before the hand first touches anything belong to no activity
    lead_in: list[InteractionUnit] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)


def segment_erus(series) -> list[Eru]:
    x = np.asarray(series)
    if len(x) == 0:
        return []
    if x.ndim == 1:
        x = x[:, None]
    change = np.any(x[1:] != x[:-1], axis=1)
    cuts = [0] + list(np.flatnonzero(change) + 1) + [len(x)]
    return [Eru(int(a), int(b), tuple(int(v) for v in x[a])) for a, b in zip(cuts[:-1], cuts[1:])]


def _make_iu(erus: list[Eru], dm: int, params: Params) -> InteractionUnit:
    raw = np.array([e.value[:dm] for e in erus for _ in range(e.end - e.start)], dtype=int)
    return InteractionUnit(erus[0].start, erus[-1].end, erus[0].value[dm:], list(erus),
                           raw, normalize_motion(raw, params))


def segment_ius(erus: list[Eru], params: Params = Params()) -> list[InteractionUnit]:
    dm = motion_width(params.depth)
    ius, run = [], []
    for e in erus:
        if run and e.value[dm:] != run[0].value[dm:]:
            ius.append(_make_iu(run, dm, params))
            run = []
        run.append(e)
    if run:
        ius.append(_make_iu(run, dm, params))
    return ius


def segment_activities(ius: list[InteractionUnit]):
    """Group IUs into activities; returns ``(activities, lead_in)``.

    A new activity opens at an IU whose first linked object is set and
    differs from the current anchor. IUs with no hand-object link stay with
    the current activity, or go to ``lead_in`` if none has started yet.
    """
    acts: list[ActivitySegment] = []
    lead_in = []
    for iu in ius:
        a = iu.anchor
        if a != NONE_ID and (not acts or a != acts[-1].anchor):
            acts.append(ActivitySegment(iu.start, iu.end, [iu], a))
        elif acts:
            acts[-1].ius.append(iu)
            acts[-1].end = iu.end
        else:
            lead_in.append(iu)
    return acts, lead_in


def segment(rows, params: Params = Params(), timestamps=None) -> SegmentationResult:
    """Filter raw ``[x_m | x_c]`` rows and build the full hierarchy."""
    rows = np.asarray(rows, dtype=int)
    filtered = morpho_filter(rows, params.filter_len)
    erus = segment_erus(filtered)
    ius = segment_ius(erus, params)
    if timestamps is not None:
        for iu in ius:
            iu.timestamps = (float(timestamps[iu.start]), float(timestamps[iu.end - 1]))
    acts, lead_in = segment_activities(ius)
    return SegmentationResult(erus, ius, acts, lead_in,
                              {"filter_len": params.filter_len, "depth": params.depth,
                               "d_contact": params.d_contact, "frames": len(rows)})


@dataclass
class IuCompleted:
    iu: InteractionUnit
    in_activity: bool
    detected_at: int


@dataclass
class ActivityEnded:
    activity: ActivitySegment
    detected_at: int


class OnlineSegmenter:
    """Incremental version of :func:`segment`.

    Rows are pushed one at a time; a filtered row becomes final once
    ``filter_radius`` later rows have arrived, so boundary events trail the
    true boundary by that many frames. Events match the offline result.
    """

    def __init__(self, params: Params = Params()):
        self.params = params
        self.dm = motion_width(params.depth)
        self.radius = filter_radius(params.filter_len)
        self.raw: list[np.ndarray] = []
        self.final: list[tuple[int, ...]] = []
        self._eru: Eru | None = None
        self._run: list[Eru] = []
        self._activity: ActivitySegment | None = None
        self.closed = False

    def push(self, row) -> list:
        if self.closed:
            raise RuntimeError("segmenter already closed")
        self.raw.append(np.asarray(row, dtype=int))
        n = len(self.raw)
        upto = n - self.radius
        return self._finalize(upto, n - 1)

    def close(self) -> list:
        events = self._finalize(len(self.raw), len(self.raw) - 1)
        if self._eru is not None:
            self._run.append(self._eru)
            self._eru = None
        if self._run:
            events += self._close_iu(None, len(self.raw) - 1)
        if self._activity is not None:
            events.append(ActivityEnded(self._activity, len(self.raw) - 1))
            self._activity = None
        self.closed = True
        return events

    def _finalize(self, upto: int, now: int) -> list:
        f0 = len(self.final)
        if upto <= f0:
            return []
        lo = max(0, f0 - self.radius)
        block = morpho_filter(np.array(self.raw[lo:]), self.params.filter_len)
        events = []
        for k in range(f0, upto):
            value = tuple(int(v) for v in block[k - lo])
            self.final.append(value)
            events += self._feed(k, value, now)
        return events

    def _feed(self, k: int, value, now: int) -> list:
        if self._eru is not None and value == self._eru.value:
            self._eru.end = k + 1
            return []
        events = []
        if self._eru is not None:
            self._run.append(self._eru)
            if value[self.dm:] != self._run[0].value[self.dm:]:
                events = self._close_iu(value[self.dm:], now)
        self._eru = Eru(k, k + 1, value)
        return events

    def _close_iu(self, next_ctx, now: int) -> list:
        iu = _make_iu(self._run, self.dm, self.params)
        self._run = []
        events = []
        act = self._activity
        if act is None and iu.anchor != NONE_ID:
            act = self._activity = ActivitySegment(iu.start, iu.end, [], iu.anchor)
        if act is not None:
            act.ius.append(iu)
            act.end = iu.end
        events.append(IuCompleted(iu, act is not None, now))
        if act is not None and next_ctx is not None:
            nxt = next_ctx[1] if len(next_ctx) > 1 else NONE_ID
            if nxt != NONE_ID and nxt != act.anchor:
                events.append(ActivityEnded(act, now))
                self._activity = None
        return events
