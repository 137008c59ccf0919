"""Frames, hands, objects, catalog and finite-difference kinematics."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace

import numpy as np

NONE_ID = 0


class Kind(enum.Enum):
    HAND = "hand"
    OBJECT = "object"


@dataclass(frozen=True)
class VideoObjectId:
    kind: Kind
    id: int

    def _key(self):
        return (self.kind is Kind.OBJECT, self.id)

    def __hash__(self):
        # hot in per-frame dict lookups; the enum's own hash is slow
        return hash((self.kind is Kind.OBJECT, self.id))

    def __lt__(self, other: "VideoObjectId"):
        return self._key() < other._key()

    def __post_init__(self):
        if self.id <= NONE_ID:
            raise ValueError(f"id must be positive, got {self.id} (0 is the NONE sentinel)")

    def __str__(self):
        return f"{self.kind.value}:{self.id}"


@dataclass(frozen=True)
class Params:
    """Tunable constants shared by the whole pipeline.

    Lengths are meters, times seconds, windows frames.
    """
    d_contact: float = 0.02
    bins_theta: int = 4
    bins_phi: int = 8
    depth: int = 2
    eps_v: float = 0.01
    eps_a: float = 0.05
    smooth_window: int = 5
    filter_len: int = 5
    planar: bool = False
    max_gap: float = 1.0
    dtw_window: int | None = None
    dba_iters: int = 10
    kmeans_restarts: int = 10
    k_max: int = 10

    @classmethod
    def from_dict(cls, d: dict) -> "Params":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown params: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def updated(self, **kw) -> "Params":
        return replace(self, **kw)


@dataclass(frozen=True)
class HandSpec:
    name: str
    n_landmarks: int = 21
    ip_indices: tuple[int, ...] = (8, 12, 16)
    ref_index: int = 9

    def __post_init__(self):
        if not self.ip_indices:
            raise ValueError("hand needs at least one interaction point")
        if len(set(self.ip_indices)) != len(self.ip_indices):
            raise ValueError("duplicate interaction point index")
        for i in (*self.ip_indices, self.ref_index):
            if not 0 <= i < self.n_landmarks:
                raise ValueError(f"landmark index {i} out of range")


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    ips_local: np.ndarray

    def __post_init__(self):
        ips = np.asarray(self.ips_local, dtype=float).reshape(-1, 3)
        if len(ips) == 0:
            raise ValueError(f"object {self.name!r} has no interaction points")
        ips.setflags(write=False)
        object.__setattr__(self, "ips_local", ips)


@dataclass(frozen=True)
class ObjectCatalog:
    hands: dict[int, HandSpec]
    objects: dict[int, ObjectSpec]
    params: Params = field(default_factory=Params)

    def __post_init__(self):
        clash = set(self.hands) & set(self.objects)
        # x_c stores bare ids, so hand and object ids must not overlap
        if clash:
            raise ValueError(f"ids used by both hands and objects: {sorted(clash)}")
        for i in (*self.hands, *self.objects):
            if i <= NONE_ID:
                raise ValueError(f"catalog id {i} must be positive")

    def name_of(self, vid: VideoObjectId) -> str:
        table = self.hands if vid.kind is Kind.HAND else self.objects
        return table[vid.id].name


def _frozen(a, shape_tail=(3,)) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(-1, *shape_tail)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HandObservation:
    id: int
    landmarks: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "landmarks", _frozen(self.landmarks))

    @property
    def vid(self) -> VideoObjectId:
        return VideoObjectId(Kind.HAND, self.id)


@dataclass(frozen=True)
class ObjectObservation:
    """Object pose. ``orientation`` is a unit quaternion (w, x, y, z) or a
    1-tuple holding the planar yaw angle."""
    id: int
    position: np.ndarray
    orientation: tuple[float, ...]

    def __post_init__(self):
        pos = np.array(self.position, dtype=float).reshape(3)
        pos.setflags(write=False)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", tuple(float(q) for q in self.orientation))

    @property
    def vid(self) -> VideoObjectId:
        return VideoObjectId(Kind.OBJECT, self.id)

    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.orientation)


@dataclass(frozen=True)
class SceneFrame:
    t: float
    hands: tuple[HandObservation, ...] = ()
    objects: tuple[ObjectObservation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "hands", tuple(self.hands))
        object.__setattr__(self, "objects", tuple(self.objects))

    def hand(self, hid: int) -> HandObservation:
        for h in self.hands:
            if h.id == hid:
                return h
        raise KeyError(f"hand {hid} not in frame at t={self.t}")

    def object(self, oid: int) -> ObjectObservation:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(f"object {oid} not in frame at t={self.t}")


def rotation_matrix(orientation) -> np.ndarray:
    q = tuple(orientation)
    if len(q) == 1:
        c, s = np.cos(q[0]), np.sin(q[0])
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    if len(q) != 4:
        raise ValueError(f"orientation must be a yaw angle or a quaternion, got {q}")
    w, x, y, z = q
    n = w * w + x * x + y * y + z * z
    if abs(n - 1.0) > 1e-9:
        raise ValueError(f"quaternion not unit norm (|q|^2={n})")
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def validate_frame(frame: SceneFrame, catalog: ObjectCatalog) -> list[str]:
    """Return every problem found in ``frame``; an empty list means valid."""
    report = []
    seen = set()
    for h in frame.hands:
        if h.vid in seen:
            report.append(f"duplicate id {h.vid}")
        seen.add(h.vid)
        spec = catalog.hands.get(h.id)
        if spec is None:
            report.append(f"unknown id {h.vid}")
        elif len(h.landmarks) != spec.n_landmarks:
            report.append(f"landmark count mismatch for {h.vid}: "
                          f"{len(h.landmarks)} != {spec.n_landmarks}")
    for o in frame.objects:
        if o.vid in seen:
            report.append(f"duplicate id {o.vid}")
        seen.add(o.vid)
        if o.id not in catalog.objects:
            report.append(f"unknown id {o.vid}")
        q = o.orientation
        if len(q) == 4:
            n = float(np.sqrt(sum(c * c for c in q)))
            if abs(n - 1.0) > 1e-9:
                report.append(f"non-unit quaternion for {o.vid} (|q|={n:.12g})")
        elif len(q) != 1:
            report.append(f"bad orientation for {o.vid}: {len(q)} components")
    return report


@dataclass(frozen=True)
class KinematicState:
    velocity: np.ndarray
    speed: float
    tangential_accel: float
    accel_sign: int

    @property
    def moving(self) -> bool:
        return self.speed > 0.0


REST = KinematicState(np.zeros(3), 0.0, 0.0, 0)


def _smooth(x: np.ndarray, w: int) -> np.ndarray:
    # centered moving average, window shrinks symmetrically at the ends;
    # explicit window sums keep the result independent of where x was sliced
    if w <= 1:
        return x.copy()
    h = w // 2
    n = len(x)
    out = np.empty_like(x)
    for i in range(n):
        r = min(h, i, n - 1 - i)
        out[i] = x[i - r:i + r + 1].sum(axis=0) / (2 * r + 1)
    return out


def _gradient(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    out[1:-1] = (y[2:] - y[:-2]) / (t[2:] - t[:-2]).reshape((-1,) + (1,) * (y.ndim - 1))
    out[0] = (y[1] - y[0]) / (t[1] - t[0])
    out[-1] = (y[-1] - y[-2]) / (t[-1] - t[-2])
    return out


def kinematics_arrays(positions, timestamps, window=5, eps_v=0.01, eps_a=0.05):
    """Vectorised core of :func:`estimate_kinematics`.

    Returns ``(velocity, speed, accel, sign)`` arrays; speeds under
    ``eps_v`` are zeroed together with their velocity.
    """
    p = np.asarray(positions, dtype=float)
    t = np.asarray(timestamps, dtype=float)
    if len(p) < 3:
        raise ValueError("insufficient samples: need at least 3")
    if len(t) != len(p):
        raise ValueError("positions and timestamps differ in length")
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ValueError("non-monotonic time")
    v = _gradient(_smooth(p, window), t)
    speed = np.linalg.norm(v, axis=1)
    accel = _gradient(speed, t)
    sign = np.where(accel > eps_a, 1, np.where(accel < -eps_a, -1, 0))
    still = speed < eps_v
    v[still] = 0.0
    speed[still] = 0.0
    return v, speed, accel, sign.astype(int)


def estimate_kinematics(positions, timestamps, window=5, eps_v=0.01, eps_a=0.05) -> list[KinematicState]:
    v, s, a, g = kinematics_arrays(positions, timestamps, window, eps_v, eps_a)
    return [KinematicState(v[i], float(s[i]), float(a[i]), int(g[i])) for i in range(len(s))]


def kinematic_radius(window: int) -> int:
    """Frames of look-ahead needed before a kinematic sample is final."""
    return window // 2 + 2
