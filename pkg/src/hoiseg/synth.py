"""Deterministic synthetic manipulation scenarios.

Every template scripts a hand and a few rigid objects on the tabletop plane
with minimum-jerk moves. The generator also emits a sidecar holding the
ground-truth IU/activity spans, computed from the noise-free scene.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .features import encode_graph
from .graph_builder import build_scene_graph
from .scene_model import (
    REST, HandObservation, HandSpec, ObjectCatalog, ObjectObservation, ObjectSpec, Params,
    SceneFrame,
)

TEMPLATES = ("box_filling", "boxing", "measuring", "assembly", "disassembly",
             "polishing", "drilling", "polish_measure_job")

CONFIGURATIONS = {
    "C1": (0.0, 0.0, 0.0),
    "C2": (math.radians(30.0), 0.25, -0.10),
    "C3": (math.radians(-45.0), -0.15, 0.30),
}

HAND = 1
PROFILE, CORNER, METER, BOX, POLISHER, BRICK, DRILL, STORAGE, TOOLBOX = 2, 3, 4, 5, 6, 7, 8, 9, 15
TOOLS = (10, 11, 12, 13, 14)

# approach directions sit at azimuth bin centers so they never straddle a bin edge
APPROACH = math.radians(22.5)
# polisher and drill point up at the brick's surface, the hand trails behind;
# the tilt keeps motion along the approach at a bin center in the tool frame
TOOL_YAW = math.pi / 2
CHANNEL_POINTS = 5
CHANNEL = 0.015 * (CHANNEL_POINTS - 1)
SLOT_X = tuple(0.1 * i for i in range(5))


def _line(n, step, angle):
    u = np.array([math.cos(angle), math.sin(angle), 0.0])
    return [tuple(u * step * (k - (n - 1) / 2)) for k in range(n)]


def _ray(n, step, angle):
    u = np.array([math.cos(angle), math.sin(angle), 0.0])
    return [tuple(u * step * k) for k in range(n)]


def default_catalog(params: Params | None = None) -> ObjectCatalog:
    """Catalog shared by all templates (planar mode)."""
    p = params or Params(planar=True)
    objs = {
        PROFILE: ObjectSpec("profile", [(0, 0, 0), (0.12, 0, 0)]),
        # receiving objects: a channel the profile slides along
        CORNER: ObjectSpec("corner_joint", _ray(CHANNEL_POINTS, 0.015, APPROACH)),
        METER: ObjectSpec("meter", _ray(CHANNEL_POINTS, 0.015, APPROACH)),
        BOX: ObjectSpec("box", _ray(CHANNEL_POINTS, 0.015, APPROACH)),
        POLISHER: ObjectSpec("polisher", [(0, 0, 0), (0.08, 0, 0)]),
        # polishing surface: dense line of points along the stroke axis
        BRICK: ObjectSpec("brick", _line(21, 0.01, APPROACH) + [(0.0, 0.12, 0.0), (0.16, 0.12, 0.0)]),
        DRILL: ObjectSpec("drill", [(0, 0, 0), (0.10, 0, 0)]),
        STORAGE: ObjectSpec("storage", [(x - 0.2, 0, 0) for x in SLOT_X]),
        TOOLBOX: ObjectSpec("toolbox", [(x - 0.2, 0, 0) for x in SLOT_X]),
    }
    for k, tid in enumerate(TOOLS):
        objs[tid] = ObjectSpec(f"tool{k + 1}", [(0, 0, 0), (0, -0.06, 0)])
    return ObjectCatalog({HAND: HandSpec("right")}, objs, p)


def _hand_offsets() -> np.ndarray:
    # MediaPipe-like layout around fingertip 12; knuckle 9 sits 4 cm behind
    off = np.zeros((21, 3))
    off[0] = (0.0, 0.10, 0)
    fingers = {1: -0.04, 5: -0.015, 9: 0.0, 13: 0.015, 17: 0.03}
    for base, x in fingers.items():
        for k in range(4):
            off[base + k] = (x, 0.07 - 0.022 * k, 0)
    off[4] = (-0.045, 0.02, 0)
    off[8] = (-0.012, 0.0, 0)
    off[12] = (0.0, 0.0, 0)
    off[16] = (0.012, 0.0, 0)
    off[9] = (0.0, 0.04, 0)
    off[20] = (0.03, 0.01, 0)
    return off


HAND_OFFSETS = _hand_offsets()


@dataclass
class Flaw:
    activity: int      # 1-based
    iu: int            # 1-based
    mode: str          # halt_halfway | skip


@dataclass
class ScenarioSpec:
    template: str
    configuration: str | tuple = "C1"
    repetitions: int = 5
    noise: float = 0.0
    seed: int = 0
    fps: float = 30.0
    subject: int | None = None
    flaw: Flaw | None = None

    def __post_init__(self):
        if isinstance(self.flaw, dict):
            self.flaw = Flaw(**self.flaw)

    def to_dict(self):
        d = asdict(self)
        if isinstance(self.configuration, tuple):
            d["configuration"] = list(self.configuration)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if isinstance(d.get("configuration"), list):
            d["configuration"] = tuple(d["configuration"])
        return cls(**d)


@dataclass
class Style:
    """Per-subject execution style; ``Style()`` is the nominal performer."""
    tempo: float = 1.0
    hold: float = 1.0
    reach: float = 1.0
    angle: float = 0.0
    stroke: float = 1.0

    @classmethod
    def draw(cls, rng: np.random.Generator, scale: float = 1.0):
        return cls(tempo=1.0 + scale * rng.uniform(-0.15, 0.15),
                   hold=1.0 + scale * rng.uniform(-0.25, 0.25),
                   reach=1.0 + scale * rng.uniform(-0.12, 0.12),
                   angle=scale * math.radians(rng.uniform(-8.0, 8.0)),
                   stroke=1.0 + scale * rng.uniform(-0.15, 0.15))

    def combined(self, other: "Style") -> "Style":
        return Style(self.tempo * other.tempo, self.hold * other.hold, self.reach * other.reach,
                     self.angle + other.angle, self.stroke * other.stroke)


def min_jerk(s):
    s = np.clip(s, 0.0, 1.0)
    return s ** 3 * (10 - 15 * s + 6 * s ** 2)


@dataclass
class _Pose:
    xy: np.ndarray
    yaw: float = 0.0


class Choreography:
    """Frame-by-frame script of the hand and the objects it moves."""

    def __init__(self, fps: float, style: Style):
        self.fps = fps
        self.style = style
        self.hand = np.zeros(2)
        self.objects: dict[int, _Pose] = {}
        self.held: int | None = None
        self.samples = []     # (hand xy, {id: (xy, yaw)}, role)

    def place(self, oid, xy, yaw=0.0):
        self.objects[oid] = _Pose(np.array(xy, dtype=float), yaw)

    def ip(self, oid, k, catalog):
        pose = self.objects[oid]
        loc = catalog.objects[oid].ips_local[k][:2]
        c, s = math.cos(pose.yaw), math.sin(pose.yaw)
        return pose.xy + np.array([c * loc[0] - s * loc[1], s * loc[0] + c * loc[1]])

    def _frames(self, seconds):
        return max(2, int(round(seconds * self.style.tempo * self.fps)))

    def _record(self, role):
        self.samples.append((self.hand.copy(),
                             {k: (p.xy.copy(), p.yaw) for k, p in self.objects.items()}, role))

    def grasp(self, oid):
        self.held = oid

    def release(self):
        self.held = None

    def hold(self, seconds, role):
        for _ in range(max(1, int(round(seconds * self.style.hold * self.fps)))):
            self._record(role)

    def path(self, offsets, role):
        """Drive the hand along per-frame offsets from its current position."""
        start = self.hand.copy()
        held0 = self.objects[self.held].xy.copy() if self.held is not None else None
        for off in offsets:
            self.hand = start + off
            if held0 is not None:
                self.objects[self.held].xy = held0 + off
            self._record(role)

    def move(self, target, seconds, role):
        n = self._frames(seconds)
        delta = np.asarray(target, dtype=float) - self.hand
        s = min_jerk(np.arange(1, n + 1) / n)
        self.path(s[:, None] * delta[None, :], role)

    def move_by(self, delta, seconds, role):
        self.move(self.hand + np.asarray(delta, dtype=float), seconds, role)

    def drift(self, oid, delta, seconds, role):
        """Move a free object on its own while the hand stays put."""
        n = self._frames(seconds)
        start = self.objects[oid].xy.copy()
        for k in min_jerk(np.arange(1, n + 1) / n):
            self.objects[oid].xy = start + k * np.asarray(delta, dtype=float)
            self._record(role)

    def oscillate(self, axis, amplitude, cycles, seconds, role):
        """Back-and-forth strokes along ``axis`` starting and ending at rest."""
        n = self._frames(seconds)
        s = np.arange(1, n + 1) / n
        u = np.array([math.cos(axis), math.sin(axis)])
        # forward half stroke then symmetric swings, returns to the start
        x = amplitude * 0.5 * (1 - np.cos(2 * math.pi * cycles * s))
        self.path(x[:, None] * u[None, :], role)


def _unit(angle):
    return np.array([math.cos(angle), math.sin(angle)])


GRASP_GAP = 0.005


class _Builder:
    def __init__(self, spec: ScenarioSpec, catalog: ObjectCatalog, style: Style):
        self.spec = spec
        self.cat = catalog
        self.c = Choreography(spec.fps, style)
        self.style = style
        self.activity = 0
        self.iu = 0

    # helpers -----------------------------------------------------------
    def start_activity(self):
        self.activity += 1
        self.iu = 0

    def next_iu(self):
        self.iu += 1
        f = self.spec.flaw
        return f.mode if f and f.activity == self.activity and f.iu == self.iu else None

    def touch(self, oid, k=0):
        """Hand position that puts fingertip 12 just short of IP ``k``."""
        return self.c.ip(oid, k, self.cat) + np.array([0.0, GRASP_GAP])

    def hand_to(self, oid, seconds, role, k=0, via=None):
        for w in via or []:
            self.c.move(w, seconds * 0.5, role)
        self.c.move(self.touch(oid, k), seconds, role)

    # composite moves ---------------------------------------------------
    def approach(self, tip_xy, target_xy, angle, seconds, role, stop_gap=GRASP_GAP, reach=0.08,
                 final_seconds=0.6):
        """Carry the held object to a point ``reach`` before ``target_xy``, then
        come in along ``angle`` until ``tip_xy`` is ``stop_gap`` short of it."""
        u = _unit(angle)
        pre = target_xy - reach * self.style.reach * u
        self.c.move(self.c.hand + (pre - tip_xy), seconds, role[0])
        final_tip = target_xy - stop_gap * u
        self.c.move(self.c.hand + (final_tip - pre), final_seconds, role[1])


def _put_template(b: _Builder, target: int, name: str):
    c, cat, st = b.c, b.cat, b.style
    c.place(PROFILE, (0.0, 0.0))
    angle = APPROACH + st.angle
    tgt = np.array([0.40, 0.22])
    c.place(target, tgt)
    b.start_activity()
    c.hand = b.touch(PROFILE)
    c.grasp(PROFILE)
    b.next_iu()
    c.hold(0.4, "grasp")
    tip = c.ip(PROFILE, 1, cat)
    # seat the tip at the channel mouth, then push it in to the far end
    b.approach(tip, c.ip(target, 0, cat), angle, 1.0, ("grasp", name))
    c.hold(0.3, name)
    c.move_by(CHANNEL * st.reach * _unit(angle), 0.8, name)
    b.next_iu()
    c.hold(0.1, name)
    c.release()
    b.next_iu()
    # quick lift-off, then withdraw
    c.move_by((0.0, 0.08), 0.25, "leave")
    c.move_by(-0.15 * _unit(angle), 0.6, "leave")
    c.hold(0.3, "leave")


def _disassembly(b: _Builder):
    c, cat, st = b.c, b.cat, b.style
    angle = APPROACH + st.angle
    c.place(CORNER, (0.40, 0.22))
    u = _unit(angle)
    # profile starts fully inserted at the far end of the channel
    tip = c.ip(CORNER, CHANNEL_POINTS - 1, cat) - GRASP_GAP * u
    tip_local = cat.objects[PROFILE].ips_local[1][:2]
    c.place(PROFILE, tip - tip_local)
    b.start_activity()
    c.hand = b.touch(PROFILE)
    c.grasp(PROFILE)
    b.next_iu()
    c.hold(0.4, "disassemble")
    c.move_by(-(CHANNEL + 0.08) * st.reach * u, 1.2, "disassemble")
    c.hold(0.4, "move_away")


def _polish_block(b: _Builder, flaw=None):
    c, cat, st = b.c, b.cat, b.style
    axis = APPROACH
    # pad comes up onto the surface perpendicular to the stroke axis
    normal = axis + math.pi / 2
    surface = c.ip(BRICK, 6, cat)
    pad = c.ip(POLISHER, 1, cat)
    b.approach(pad, surface, normal + st.angle * 0.5, 1.0, ("grasp", "polish"), reach=0.07)
    cycles = 1.5
    secs = 1.2
    if flaw == "halt_halfway":
        cycles, secs = 0.75, 0.6
    c.oscillate(axis, 0.08 * st.stroke, cycles, secs, "polish")
    c.hold(0.2, "polish")
    return normal


def _polishing(b: _Builder):
    c = b.c
    c.place(POLISHER, (0.25, -0.05), TOOL_YAW)
    c.place(BRICK, (0.35, 0.30))
    b.start_activity()
    c.hand = b.touch(POLISHER)
    c.grasp(POLISHER)
    b.next_iu()
    c.hold(0.4, "grasp")
    normal = _polish_block(b, b.next_iu())
    b.next_iu()
    c.move_by(-0.12 * _unit(normal), 0.7, "move_away")
    c.hold(0.4, "move_away")


def _drilling(b: _Builder):
    c, cat, st = b.c, b.cat, b.style
    c.place(DRILL, (0.25, -0.05), TOOL_YAW)
    c.place(BRICK, (0.35, 0.30))
    b.start_activity()
    c.hand = b.touch(DRILL)
    c.grasp(DRILL)
    b.next_iu()
    c.hold(0.4, "grasp")
    normal = APPROACH + math.pi / 2
    bit = c.ip(DRILL, 1, cat)
    b.approach(bit, c.ip(BRICK, 10, cat), normal + st.angle * 0.5, 1.0, ("grasp", "drill"), reach=0.07)
    b.next_iu()
    # steady push with vibration for five seconds
    n = c._frames(5.0)
    s = np.arange(1, n + 1) / n
    u = _unit(normal)
    push = 0.004 * min_jerk(s)
    vib = 0.0015 * np.sin(2 * math.pi * 6.0 * s * n / c.fps)
    c.path((push + vib)[:, None] * u[None, :], "drill")
    c.hold(0.3, "drill")
    b.next_iu()
    c.move_by(-0.12 * u, 0.7, "move_away")
    c.hold(0.4, "move_away")


def _polish_measure_job(b: _Builder):
    c, cat, st = b.c, b.cat, b.style
    c.place(POLISHER, (0.25, -0.05), TOOL_YAW)
    c.place(BRICK, (0.35, 0.30))
    c.place(METER, (0.78, 0.50))
    # activity I: polishing
    b.start_activity()
    c.hand = b.touch(POLISHER)
    c.grasp(POLISHER)
    b.next_iu()
    c.hold(0.4, "grasp_polisher")
    normal = _polish_block(b, b.next_iu())
    # let go with the pad still on the brick; the polisher then tips back onto the table
    c.release()
    b.next_iu()
    c.move_by(-0.15 * _unit(normal), 0.6, "release")
    c.drift(POLISHER, -0.04 * _unit(normal), 0.3, "release")
    c.hold(0.2, "release")
    # below the parked polisher, around the brick's left end, in from above
    b.hand_to(BRICK, 1.0, "release", k=21, via=[(0.42, -0.12), (0.12, -0.12), (0.12, 0.50), (0.30, 0.50)])
    # activity II: measuring the brick
    b.start_activity()
    c.grasp(BRICK)
    b.next_iu()
    c.hold(0.4, "grasp_brick")
    c.move_by((0.0, 0.05), 0.5, "grasp_brick")
    flaw = b.next_iu()
    edge = c.ip(BRICK, 22, cat)
    if flaw == "skip":
        c.move_by((0.12, 0.0), 1.0, "grasp_brick")
        c.hold(0.8, "grasp_brick")
        return
    b.approach(edge, c.ip(METER, 0, cat), APPROACH + st.angle, 1.0, ("grasp_brick", "measure"))
    c.hold(0.8, "measure")


def _box_filling(b: _Builder):
    c, cat, st = b.c, b.cat, b.style
    n = b.spec.repetitions
    if not 1 <= n <= len(TOOLS):
        raise ValueError(f"box_filling supports 1..{len(TOOLS)} tools, got {n}")
    c.place(STORAGE, (0.2, 0.0))
    c.place(TOOLBOX, (0.2, 0.5))
    for k, tid in enumerate(TOOLS[:n]):
        c.place(tid, (SLOT_X[k], 0.06 + GRASP_GAP))
    place_dir = math.radians(247.5)
    c.hand = b.touch(TOOLS[0])
    for k, tid in enumerate(TOOLS[:n]):
        x = SLOT_X[k]
        b.start_activity()
        c.grasp(tid)
        b.next_iu()
        c.hold(0.4, "grasp")
        b.next_iu()
        c.move_by((0.0, 0.10), 0.6, "carry")
        # travel between slots to stay clear of everything else
        c.move(c.hand + np.array([x + 0.05, 0.45]) - c.ip(tid, 1, cat), 1.0, "carry")
        slot = c.ip(TOOLBOX, k, cat)
        b.approach(c.ip(tid, 1, cat), slot, place_dir + st.angle, 0.6, ("carry", "place"), reach=0.07)
        b.next_iu()
        c.hold(0.4, "place")
        c.release()
        c.move_by((0.0, 0.08), 0.5, "released")
        if k + 1 < n:
            nxt = TOOLS[k + 1]
            c.move((x + 0.05, c.hand[1]), 0.4, "released")
            c.move((x + 0.05, 0.30), 0.8, "released")
            c.move(b.touch(nxt) + np.array([0.0, 0.08]), 0.6, "released")
            c.move(b.touch(nxt), 0.5, "released")
        else:
            c.hold(0.4, "released")


_SCRIPTS = {
    "box_filling": _box_filling,
    "boxing": lambda b: _put_template(b, BOX, "put_in_box"),
    "measuring": lambda b: _put_template(b, METER, "put_near_meter"),
    "assembly": lambda b: _put_template(b, CORNER, "interlock"),
    "disassembly": _disassembly,
    "polishing": _polishing,
    "drilling": _drilling,
    "polish_measure_job": _polish_measure_job,
}

_FLAW_SITES = {
    ("polish_measure_job", 1, 2, "halt_halfway"),
    ("polishing", 1, 2, "halt_halfway"),
    ("polish_measure_job", 2, 2, "skip"),
}


@dataclass
class Scenario:
    frames: list[SceneFrame]
    sidecar: dict
    catalog: ObjectCatalog
    clean_frames: list[SceneFrame] = field(default_factory=list, repr=False)


def _transform(config):
    if isinstance(config, str):
        if config not in CONFIGURATIONS:
            raise ValueError(f"unknown configuration {config!r}")
        return CONFIGURATIONS[config]
    angle, tx, ty = config
    return float(angle), float(tx), float(ty)


def _render(samples, fps, config, noise, rng) -> tuple[list, list]:
    angle, tx, ty = _transform(config)
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    t0 = np.array([tx, ty])
    offs = HAND_OFFSETS[:, :2] @ rot.T
    clean, noisy = [], []
    for k, (hand, objs, _) in enumerate(samples):
        t = k / fps
        lm = np.zeros((21, 3))
        lm[:, :2] = rot @ hand + t0 + offs
        poses = {}
        for oid, (xy, yaw) in sorted(objs.items()):
            p = np.zeros(3)
            p[:2] = rot @ xy + t0
            poses[oid] = (p, yaw + angle)
        clean.append(SceneFrame(t, [HandObservation(HAND, lm)],
                                [ObjectObservation(o, p, (y,)) for o, (p, y) in poses.items()]))
        if noise > 0:
            lm = lm.copy()
            lm[:, :2] += rng.normal(0.0, noise, size=(21, 2))
            objs_n = []
            for oid, (p, y) in poses.items():
                q = p.copy()
                q[:2] += rng.normal(0.0, noise, size=2)
                objs_n.append(ObjectObservation(oid, q, (y,)))
            noisy.append(SceneFrame(t, [HandObservation(HAND, lm)], objs_n))
        else:
            noisy.append(clean[-1])
    return clean, noisy


def ground_truth(clean_frames, roles, catalog: ObjectCatalog) -> dict:
    """IU and activity spans from contact geometry of the noise-free scene."""
    p = catalog.params
    ctx = []
    for f in clean_frames:
        kin = {h.vid: REST for h in f.hands}
        kin.update({o.vid: REST for o in f.objects})
        g = build_scene_graph(f, kin, HAND, catalog)
        ctx.append(encode_graph(g, p.depth).x_c)
    spans = []
    start = 0
    for k in range(1, len(ctx) + 1):
        if k == len(ctx) or ctx[k] != ctx[start]:
            labels = roles[start:k]
            role = max(set(labels), key=lambda r: (labels.count(r), -labels.index(r)))
            spans.append({"start": start, "end": k, "x_c": list(ctx[start]), "role": role})
            start = k
    acts = []
    lead_in = []
    for idx, s in enumerate(spans):
        anchor = s["x_c"][1]
        if anchor != 0 and (not acts or anchor != acts[-1]["anchor"]):
            acts.append({"start": s["start"], "end": s["end"], "anchor": anchor, "ius": [idx]})
        elif acts:
            acts[-1]["ius"].append(idx)
            acts[-1]["end"] = s["end"]
        else:
            lead_in.append(idx)
    return {"ius": spans, "activities": acts, "lead_in": lead_in}


def generate_scenario(spec: ScenarioSpec, catalog: ObjectCatalog | None = None) -> Scenario:
    if spec.template not in _SCRIPTS:
        raise ValueError(f"unknown template {spec.template!r}; choose from {', '.join(TEMPLATES)}")
    if spec.flaw is not None:
        f = spec.flaw
        if (spec.template, f.activity, f.iu, f.mode) not in _FLAW_SITES:
            raise ValueError(f"template {spec.template!r} cannot inject {f.mode} at "
                             f"activity {f.activity}, IU {f.iu}")
    catalog = catalog or default_catalog()
    rng = np.random.default_rng(spec.seed)
    if spec.subject is None:
        style = Style()
    else:
        style = Style.draw(np.random.default_rng([spec.subject, 7919]))
        style = style.combined(Style.draw(rng, scale=0.3))
    b = _Builder(spec, catalog, style)
    _SCRIPTS[spec.template](b)
    samples = b.c.samples
    clean, noisy = _render(samples, spec.fps, spec.configuration, spec.noise, rng)
    gt = ground_truth(clean, [s[2] for s in samples], catalog)
    sidecar = {"spec": spec.to_dict(), "frames": len(samples), **gt,
               "flaw": asdict(spec.flaw) if spec.flaw else None}
    return Scenario(noisy, sidecar, catalog, clean)
