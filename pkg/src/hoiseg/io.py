"""Wire formats: JSON Lines frames, JSON catalogs/models/reports, CSV and SVG."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import IO, Iterable, Iterator

import numpy as np

from .scene_model import (
    HandObservation, HandSpec, ObjectCatalog, ObjectObservation, ObjectSpec, Params, SceneFrame,
)
from .segmenter import SegmentationResult


class ParseError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def frame_from_record(rec: dict) -> SceneFrame:
    hands = [HandObservation(int(h["id"]), h["landmarks"]) for h in rec.get("hands", [])]
    objs = [ObjectObservation(int(o["id"]), o["position"], o["orientation"])
            for o in rec.get("objects", [])]
    return SceneFrame(float(rec["t"]), hands, objs)


def frame_to_record(frame: SceneFrame) -> dict:
    return {
        "t": frame.t,
        "hands": [{"id": h.id, "landmarks": h.landmarks.tolist()} for h in frame.hands],
        "objects": [{"id": o.id, "position": o.position.tolist(),
                     "orientation": list(o.orientation)} for o in frame.objects],
    }


def parse_stream(reader: Iterable[str]) -> Iterator[SceneFrame]:
    """Lazily parse one JSON frame per line; blank lines are skipped."""
    prev = None
    for n, line in enumerate(reader, start=1):
        if not line.strip():
            continue
        try:
            frame = frame_from_record(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(n, f"malformed frame record ({exc})") from exc
        if prev is not None and frame.t <= prev:
            raise ParseError(n, f"timestamp {frame.t} does not increase (previous {prev})")
        prev = frame.t
        yield frame


def dump_frame(frame: SceneFrame) -> str:
    return json.dumps(frame_to_record(frame), separators=(",", ":"))


def write_stream(frames: Iterable[SceneFrame], fh: IO[str]) -> int:
    n = 0
    for f in frames:
        fh.write(dump_frame(f) + "\n")
        n += 1
    return n


def read_stream(path) -> list[SceneFrame]:
    with open(path, encoding="utf-8") as fh:
        return list(parse_stream(fh))


# -- catalog --------------------------------------------------------------

def catalog_to_dict(cat: ObjectCatalog) -> dict:
    return {
        "hands": [{"id": i, "name": h.name, "n_landmarks": h.n_landmarks,
                   "ip_indices": list(h.ip_indices), "ref_index": h.ref_index}
                  for i, h in sorted(cat.hands.items())],
        "objects": [{"id": i, "name": o.name, "interaction_points": o.ips_local.tolist()}
                    for i, o in sorted(cat.objects.items())],
        "params": cat.params.to_dict(),
    }


def catalog_from_dict(d: dict, overrides: dict | None = None) -> ObjectCatalog:
    hands = {int(h["id"]): HandSpec(h.get("name", f"hand{h['id']}"), int(h.get("n_landmarks", 21)),
                                    tuple(h.get("ip_indices", (8, 12, 16))), int(h.get("ref_index", 9)))
             for h in d.get("hands", [])}
    objects = {int(o["id"]): ObjectSpec(o.get("name", f"object{o['id']}"), o["interaction_points"])
               for o in d.get("objects", [])}
    p = dict(d.get("params", {}))
    p.update(overrides or {})
    return ObjectCatalog(hands, objects, Params.from_dict(p))


def load_catalog(path, overrides: dict | None = None) -> ObjectCatalog:
    with open(path, encoding="utf-8") as fh:
        return catalog_from_dict(json.load(fh), overrides)


def save_json(obj, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


# -- reports --------------------------------------------------------------

def segmentation_to_dict(seg: SegmentationResult, timestamps=None) -> dict:
    def iu_dict(iu):
        d = {"start": iu.start, "end": iu.end, "x_c": list(iu.x_c), "n_erus": len(iu.erus)}
        if timestamps is not None:
            d["t_start"] = float(timestamps[iu.start])
            d["t_end"] = float(timestamps[iu.end - 1])
        return d
    index = {id(iu): k for k, iu in enumerate(seg.ius)}
    return {
        "provenance": seg.provenance,
        "erus": [{"start": e.start, "end": e.end, "value": list(e.value)} for e in seg.erus],
        "ius": [iu_dict(iu) for iu in seg.ius],
        "lead_in": [index[id(iu)] for iu in seg.lead_in],
        "activities": [{"start": a.start, "end": a.end, "anchor": a.anchor,
                        "ius": [index[id(iu)] for iu in a.ius]} for a in seg.activities],
    }


def write_matrix_csv(values, labels, path) -> None:
    labels = [_label(x) for x in labels]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([""] + labels)
        for lab, row in zip(labels, np.asarray(values)):
            w.writerow([lab] + [repr(float(v)) for v in row])


def read_matrix_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    labels = rows[0][1:]
    return np.array([[float(v) for v in r[1:]] for r in rows[1:]]), labels


def _label(x) -> str:
    if isinstance(x, tuple):
        return "/".join(str(p) for p in x)
    return str(x)


def write_labels_csv(rows, path) -> None:
    """``rows``: iterables of (iu_id, motion_label, context_label, combined_label)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iu_id", "motion_label", "context_label", "combined_label"])
        for r in rows:
            w.writerow(list(r))


def write_events_jsonl(events, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(ev.to_dict(), separators=(",", ":")) + "\n")


def heatmap_svg(values, labels=None, cell: int = 14) -> str:
    """Grayscale heatmap; 0 (most similar) is black, 1 is white."""
    v = np.asarray(values, dtype=float)
    n, m = v.shape
    margin = 80 if labels is not None else 4
    w, h = margin + m * cell + 4, margin + n * cell + 4
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'viewBox="0 0 {w} {h}">',
           f'<rect width="{w}" height="{h}" fill="white"/>']
    for i in range(n):
        for j in range(m):
            x = v[i, j]
            g = 255 if math.isnan(x) else int(round(255 * min(max(x, 0.0), 1.0)))
            out.append(f'<rect class="cell" x="{margin + j * cell}" y="{margin + i * cell}" '
                       f'width="{cell}" height="{cell}" fill="rgb({g},{g},{g})"/>')
    if labels is not None:
        for k, lab in enumerate(labels):
            t = _label(lab)
            out.append(f'<text x="{margin - 2}" y="{margin + k * cell + cell - 3}" '
                       f'font-size="9" text-anchor="end">{t}</text>')
            out.append(f'<text x="{margin + k * cell + cell - 3}" y="{margin - 2}" font-size="9" '
                       f'transform="rotate(-90 {margin + k * cell + cell - 3} {margin - 2})">{t}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_heatmap_svg(values, labels, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(heatmap_svg(values, labels))
