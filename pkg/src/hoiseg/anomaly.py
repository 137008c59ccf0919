"""Nominal job training and online anomaly monitoring of activity executions."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .scene_model import ObjectCatalog
from .segmenter import ActivityEnded, InteractionUnit, IuCompleted, SegmentationResult
from .similarity import dtw_barycenter, dtw_distance

logger = logging.getLogger(__name__)

MODEL_FORMAT = "hoiseg.nominal"
MODEL_VERSION = 1


@dataclass
class NominalIu:
    index: int
    context: tuple[int, ...]
    barycenter: np.ndarray
    threshold: float
    mu: float = 0.0
    sigma: float = 0.0


@dataclass
class NominalJob:
    activities: list[list[NominalIu]]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, act in enumerate(self.activities):
            if not act:
                raise ValueError(f"nominal activity {k} is empty")

    @property
    def n_ius(self) -> int:
        return sum(len(a) for a in self.activities)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "params": self.params,
            "activities": [[{
                "index": u.index, "context": list(u.context), "threshold": u.threshold,
                "mu": u.mu, "sigma": u.sigma, "barycenter": np.asarray(u.barycenter).tolist(),
            } for u in act] for act in self.activities],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NominalJob":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a nominal job model (format={d.get('format')!r})")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        acts = [[NominalIu(u["index"], tuple(u["context"]), np.array(u["barycenter"], dtype=float),
                           float(u["threshold"]), float(u["mu"]), float(u["sigma"]))
                 for u in act] for act in d["activities"]]
        return cls(acts, d.get("params", {}))


class SkeletonMismatch(ValueError):
    pass


def _skeleton(seg: SegmentationResult):
    return [[iu.x_c for iu in act.ius] for act in seg.activities]


def train_nominal(executions: list[SegmentationResult], window=None, dba_iters: int = 10) -> NominalJob:
    """Barycenter and ``mu + 2 sigma`` DTW threshold for every IU position.

    All executions must share the same activity/IU/context skeleton.
    """
    if len(executions) < 2:
        raise ValueError("need at least 2 correct executions")
    ref = _skeleton(executions[0])
    for e, seg in enumerate(executions[1:], start=1):
        sk = _skeleton(seg)
        if len(sk) != len(ref):
            raise SkeletonMismatch(f"execution {e}: {len(sk)} activities, expected {len(ref)}")
        for a, (got, want) in enumerate(zip(sk, ref)):
            if len(got) != len(want):
                raise SkeletonMismatch(f"execution {e}, activity {a}: {len(got)} IUs, expected {len(want)}")
            for i, (cg, cw) in enumerate(zip(got, want)):
                if cg != cw:
                    raise SkeletonMismatch(f"execution {e}, activity {a}, IU {i}: context {cg} != {cw}")
    acts = []
    for a, act_ctx in enumerate(ref):
        nominal = []
        for i, ctx in enumerate(act_ctx):
            seqs = [seg.activities[a].ius[i].motion for seg in executions]
            bary = dtw_barycenter(seqs, iters=dba_iters, window=window)
            d = np.array([dtw_distance(s, bary, window) for s in seqs])
            mu, sigma = float(d.mean()), float(d.std())
            nominal.append(NominalIu(i, ctx, bary, mu + 2 * sigma, mu, sigma))
        acts.append(nominal)
    return NominalJob(acts)


class EventKind(enum.Enum):
    CONTEXT_MISMATCH_ALL = "ContextMismatchAllCandidates"
    MOTION_EXCEEDED_ALL = "MotionExceededAllCandidates"
    NO_CANDIDATE = "NoCandidateActivity"
    NOT_COMPLETED = "ActivityNotCompleted"
    CORRECT = "ActivityCorrect"


@dataclass
class AnomalyEvent:
    kind: EventKind
    iu_index: int | None = None
    span: tuple[int, int] | None = None
    distances: dict = field(default_factory=dict)
    detected_at: int | None = None
    boundary: int | None = None

    @property
    def is_anomaly(self) -> bool:
        return self.kind is not EventKind.CORRECT

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "iu_index": self.iu_index,
                "span": list(self.span) if self.span else None,
                "distances": {str(k): v for k, v in self.distances.items()},
                "detected_at": self.detected_at, "boundary": self.boundary}


@dataclass
class MonitorState:
    eliminated: set = field(default_factory=set)       # L
    completed: list = field(default_factory=list)      # C
    in_j: bool = True
    events: list = field(default_factory=list)
    # one row per evaluated IU: (activity number, position, surviving candidates)
    checks: list = field(default_factory=list)
    activity_no: int = 0

    @property
    def i(self) -> int:
        return len(self.completed)

    def begin_activity(self):
        self.eliminated = set()
        self.completed = []
        self.in_j = True
        self.activity_no += 1


class MonitorError(RuntimeError):
    pass


def evaluate_iu(state: MonitorState, nominal: NominalJob, motion, context, window=None,
                span=None, detected_at=None) -> list[AnomalyEvent]:
    """Check one completed IU against the ``i``-th IU of every candidate."""
    if not state.in_j:
        raise MonitorError("no candidate activity left; call begin_activity() first")
    i = state.i
    state.completed.append((tuple(context), motion))
    context = tuple(context)
    dists = {}
    for a, act in enumerate(nominal.activities):
        if a in state.eliminated:
            continue
        if i >= len(act):
            dists[a] = None
            state.eliminated.add(a)
            continue
        ref = act[i]
        if context != ref.context:
            dists[a] = None
            state.eliminated.add(a)
            continue
        d = dtw_distance(motion, ref.barycenter, window)
        dists[a] = d
        if d > ref.threshold:
            state.eliminated.add(a)
    survivors = [a for a in range(len(nominal.activities)) if a not in state.eliminated]
    state.checks.append((state.activity_no, i, survivors))
    events = []
    if not survivors:
        state.in_j = False
        bound = span[1] if span else None
        kind = (EventKind.MOTION_EXCEEDED_ALL if any(v is not None for v in dists.values())
                else EventKind.CONTEXT_MISMATCH_ALL)
        events.append(AnomalyEvent(kind, i, span, dists, detected_at, bound))
        events.append(AnomalyEvent(EventKind.NO_CANDIDATE, i, span, dists, detected_at, bound))
    state.events += events
    return events


def finalize_activity(state: MonitorState, nominal: NominalJob, span=None,
                      detected_at=None) -> AnomalyEvent | None:
    """Verdict at an activity boundary. ``None`` when a no-candidate alert
    was already raised for this activity."""
    if not state.in_j:
        return None
    for a in range(len(nominal.activities)):
        if a not in state.eliminated and len(nominal.activities[a]) == len(state.completed):
            ev = AnomalyEvent(EventKind.CORRECT, state.i - 1, span, {"activity": a},
                              detected_at, span[1] if span else None)
            state.eliminated = set()
            state.completed = []
            state.events.append(ev)
            return ev
    ev = AnomalyEvent(EventKind.NOT_COMPLETED, state.i - 1, span, {}, detected_at,
                      span[1] if span else None)
    state.events.append(ev)
    return ev


def monitor_events(events, nominal: NominalJob, window=None) -> MonitorState:
    """Run the monitor over a sequence of segmenter events."""
    state = MonitorState()
    active = False
    for ev in events:
        if isinstance(ev, IuCompleted):
            if not ev.in_activity:
                continue
            if not active:
                state.begin_activity()
                active = True
            iu: InteractionUnit = ev.iu
            if state.in_j:
                evaluate_iu(state, nominal, iu.motion, iu.x_c, window,
                            (iu.start, iu.end), ev.detected_at)
            else:
                state.completed.append((iu.x_c, iu.motion))
                state.checks.append((state.activity_no, state.i - 1, []))
        elif isinstance(ev, ActivityEnded):
            finalize_activity(state, nominal, (ev.activity.start, ev.activity.end), ev.detected_at)
            active = False
    return state


def monitor_segmentation(seg: SegmentationResult, nominal: NominalJob, window=None) -> MonitorState:
    """Offline replay of a finished segmentation through the monitor."""
    def replay():
        for act in seg.activities:
            for iu in act.ius:
                yield IuCompleted(iu, True, iu.end - 1)
            yield ActivityEnded(act, act.end - 1)
    return monitor_events(replay(), nominal, window)


def run_monitor(frames, catalog: ObjectCatalog, nominal: NominalJob, hand_id=None) -> list[AnomalyEvent]:
    from .pipeline import online_events
    state = monitor_events(online_events(frames, catalog, hand_id), nominal,
                           catalog.params.dtw_window)
    return state.events
