"""Feature couple X = (x_m, x_c) from a per-hand scene graph."""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .graph_builder import SceneGraph
from .scene_model import NONE_ID, Params, VideoObjectId


@dataclass(frozen=True)
class FeatureCouple:
    x_m: tuple[int, ...]
    x_c: tuple[int, ...]

    def as_array(self) -> np.ndarray:
        return np.array(self.x_m + self.x_c, dtype=int)


def motion_width(depth: int) -> int:
    return 1 + 3 * depth


def context_width(depth: int) -> int:
    return 2 * depth


def motion_ranges(params: Params) -> np.ndarray:
    """Fixed (lo, hi) per x_m slot: a_h, then (theta_q, phi_q, jm) per link."""
    rows = [(-1, 1)]
    for _ in range(params.depth):
        rows += [(0, params.bins_theta), (0, params.bins_phi), (0, 1)]
    return np.array(rows, dtype=float)


def extract_interaction_chain(graph: SceneGraph, depth: int | None = None):
    """Links ``(parent, child)`` of the shortest-path tree rooted at the hand.

    Edge cost is the contact distance. Links come out in order of the
    child's path cost, ties broken by the child's id.
    """
    root = graph.hand
    best = {root: 0.0}
    parent = {}
    done = set()
    heap = [(0.0, 0, root.id, root)]
    chain = []
    while heap:
        cost, _, _, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        if v != root:
            chain.append((parent[v], v))
            if depth is not None and len(chain) >= depth:
                break
        for w in graph.neighbors(v):
            if w in done:
                continue
            c = cost + graph.edges[(v, w)].distance
            if c < best.get(w, np.inf) or (c == best[w] and v < parent.get(w, v)):
                best[w] = c
                parent[w] = v
                heapq.heappush(heap, (c, 0 if w.kind.value == "hand" else 1, w.id, w))
    return chain


def encode_features(graph: SceneGraph, chain, depth: int) -> FeatureCouple:
    hand = graph.nodes[graph.hand]
    x_m = [int(hand.kin.accel_sign)]
    x_c = [graph.hand.id]
    for k in range(depth):
        if k < len(chain):
            a, b = chain[k]
            rel = graph.edges[(a, b)]
            tq, pq = rel.direction if rel.direction is not None else (0, 0)
            x_m += [tq, pq, int(rel.joint_motion)]
            if k > 0:
                x_c.append(a.id)
            x_c.append(b.id)
        else:
            x_m += [0, 0, 0]
            if k > 0:
                x_c.append(NONE_ID)
            x_c.append(NONE_ID)
    return FeatureCouple(tuple(x_m), tuple(x_c))


def encode_graph(graph: SceneGraph, depth: int) -> FeatureCouple:
    return encode_features(graph, extract_interaction_chain(graph, depth), depth)


def normalize_motion(x_m, params: Params = Params()) -> np.ndarray:
    """Affine map of raw x_m rows (1-D or 2-D) onto [0, 1] with fixed ranges."""
    x = np.asarray(x_m, dtype=float)
    r = motion_ranges(params)
    if x.shape[-1] != len(r):
        raise ValueError(f"x_m width {x.shape[-1]} != {len(r)} for depth {params.depth}")
    lo, hi = r[:, 0], r[:, 1]
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError("x_m entry outside its documented range")
    return (x - lo) / (hi - lo)
