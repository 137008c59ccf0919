"""Per-hand scene graphs: contact edges, joint motion and quantized direction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scene_model import (
    Kind, KinematicState, ObjectCatalog, ObjectObservation, Params, SceneFrame,
    VideoObjectId, rotation_matrix,
)


@dataclass(frozen=True)
class Relation:
    """Attributes of the directed relation ``i -> j``.

    ``direction`` is ``None`` or ``(theta_q, phi_q)``: the quantized
    elevation/azimuth of i's velocity seen from j's frame.
    """
    distance: float
    joint_motion: bool
    direction: tuple[int, int] | None


@dataclass
class Node:
    vid: VideoObjectId
    kin: KinematicState
    ips_world: np.ndarray
    position: np.ndarray
    orientation: tuple[float, ...] | None = None


@dataclass
class SceneGraph:
    hand: VideoObjectId
    nodes: dict[VideoObjectId, Node]
    # keyed by ordered pair (i, j): relation i -> j; both orders present per edge
    edges: dict[tuple[VideoObjectId, VideoObjectId], Relation] = field(default_factory=dict)

    def neighbors(self, v: VideoObjectId):
        return sorted(j for (i, j) in self.edges if i == v)

    def undirected_edges(self) -> set[frozenset]:
        return {frozenset(k) for k in self.edges}


def world_interaction_points(obs: ObjectObservation, ips_local) -> np.ndarray:
    """Map object-frame interaction points to the world frame."""
    r = rotation_matrix(obs.orientation)
    ips = np.asarray(ips_local, dtype=float).reshape(-1, 3)
    return ips @ r.T + obs.position


def min_interaction_distance(ips_a, ips_b) -> float:
    a = np.asarray(ips_a, dtype=float).reshape(-1, 3)
    b = np.asarray(ips_b, dtype=float).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("interaction point lists must be non-empty")
    diff = a[:, None, :] - b[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).min())


def joint_motion(a: KinematicState, b: KinematicState, eps_v: float = 0.01) -> bool:
    """Concordant non-zero acceleration signs, or both at rest.

    The caller only asks about pairs already in contact, so "both at rest"
    means resting contact.
    """
    if a.accel_sign != 0 and a.accel_sign == b.accel_sign:
        return True
    return (a.accel_sign == 0 and b.accel_sign == 0
            and a.speed < eps_v and b.speed < eps_v)


def quantize_angle(angle: float, bins: int, lo: float, hi: float) -> int:
    if bins < 2:
        raise ValueError("need at least 2 bins")
    span = hi - lo
    a = lo + math.fmod(angle - lo, span)
    if a < lo:
        a += span
    q = int(math.floor((a - lo) / (span / bins))) + 1
    return min(max(q, 1), bins)


def quantize_elevation(theta: float, bins: int) -> int:
    # elevation is not cyclic: clamp instead of wrapping so +pi/2 lands in the top bin
    lo, hi = -math.pi / 2, math.pi / 2
    q = int(math.floor((theta - lo) / ((hi - lo) / bins))) + 1
    return min(max(q, 1), bins)


def planar_elevation_bin(bins_theta: int) -> int:
    return quantize_elevation(0.0, bins_theta)


def interaction_direction(velocity, orientation, params: Params = Params()) -> tuple[int, int] | None:
    """Quantized direction of ``velocity`` in the frame given by ``orientation``.

    Azimuth is binned over [0, 2*pi), elevation over [-pi/2, pi/2]. In
    planar mode the elevation is pinned to the bin containing 0.
    """
    v = np.asarray(velocity, dtype=float).reshape(3)
    if np.linalg.norm(v) < params.eps_v:
        return None
    local = rotation_matrix(orientation).T @ v
    phi = math.atan2(local[1], local[0])
    phi_q = quantize_angle(phi, params.bins_phi, 0.0, 2 * math.pi)
    if params.planar:
        return planar_elevation_bin(params.bins_theta), phi_q
    rho_xy = math.hypot(local[0], local[1])
    theta = math.atan2(local[2], rho_xy)
    return quantize_elevation(theta, params.bins_theta), phi_q


def _relation(src: Node, dst: Node, dist: float, jm: bool, params: Params) -> Relation:
    direction = None
    # hands carry no orientation, so nothing can be expressed in a hand frame
    if not jm and dst.orientation is not None and src.kin.speed >= params.eps_v:
        direction = interaction_direction(src.kin.velocity, dst.orientation, params)
    return Relation(dist, jm, direction)


def build_scene_graph(frame: SceneFrame, kinematics: dict[VideoObjectId, KinematicState],
                      hand_id: int, catalog: ObjectCatalog) -> SceneGraph:
    """Foreground graph for one hand.

    Nodes are the hand plus every object connected to it through a chain of
    contact edges. Objects that touch each other but not the hand's
    component are background for this hand.
    """
    params = catalog.params
    hand_obs = frame.hand(hand_id)
    spec = catalog.hands[hand_id]
    hvid = hand_obs.vid
    if hvid not in kinematics:
        raise KeyError(f"no kinematics for {hvid}")

    all_nodes = {hvid: Node(hvid, kinematics[hvid],
                            hand_obs.landmarks[list(spec.ip_indices)],
                            hand_obs.landmarks[spec.ref_index])}
    for o in frame.objects:
        ips = world_interaction_points(o, catalog.objects[o.id].ips_local)
        all_nodes[o.vid] = Node(o.vid, kinematics[o.vid], ips, o.position, o.orientation)

    # contact edges among all candidates; other hands never join this graph
    ids = [hvid] + sorted(v for v in all_nodes if v.kind is Kind.OBJECT)
    # one distance matrix over all points, reduced to per-node-pair minima
    blocks = [np.asarray(all_nodes[v].ips_world, dtype=float).reshape(-1, 3) for v in ids]
    starts = np.cumsum([0] + [len(b) for b in blocks[:-1]])
    pts = np.concatenate(blocks)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    pair_min = np.minimum.reduceat(np.minimum.reduceat(dist, starts, axis=0), starts, axis=1)
    contact = {}
    for a_i, b_i in zip(*np.nonzero(np.triu(pair_min <= params.d_contact, k=1))):
        contact[(ids[a_i], ids[b_i])] = float(pair_min[a_i, b_i])

    adj: dict = {v: [] for v in ids}
    for (a, b) in contact:
        adj[a].append(b)
        adj[b].append(a)
    reach = {hvid}
    stack = [hvid]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in reach:
                reach.add(w)
                stack.append(w)

    graph = SceneGraph(hvid, {v: all_nodes[v] for v in ids if v in reach})
    for (a, b), d in contact.items():
        if a in reach and b in reach:
            na, nb = all_nodes[a], all_nodes[b]
            jm = joint_motion(na.kin, nb.kin, params.eps_v)
            graph.edges[(a, b)] = _relation(na, nb, d, jm, params)
            graph.edges[(b, a)] = _relation(nb, na, d, jm, params)
    return graph
