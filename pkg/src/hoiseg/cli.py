"""Command-line entry point: ``hoiseg <command> [options]``.

Exit codes: 0 success, 2 invalid input or arguments, 3 anomaly found by ``monitor``.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .anomaly import NominalJob, monitor_events, train_nominal
from .clustering import context_clusters, elbow_select, ensemble_merge, kmeans_dtw, wcss_curve
from .io import (
    catalog_to_dict, load_catalog, read_stream, save_json, segmentation_to_dict, write_events_jsonl,
    write_heatmap_svg, write_labels_csv, write_matrix_csv, write_stream,
)
from .pipeline import encode_stream, online_events, segment_stream
from .scene_model import Params
from .similarity import confidence_matrix
from .synth import TEMPLATES, Flaw, ScenarioSpec, default_catalog, generate_scenario

log = logging.getLogger("hoiseg")

EXIT_OK, EXIT_INVALID, EXIT_ANOMALY = 0, 2, 3


class UsageError(ValueError):
    pass


def _param_overrides(text: str | None) -> dict:
    if not text:
        return {}
    path = Path(text)
    raw = path.read_text(encoding="utf-8") if path.is_file() else text
    try:
        over = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--params is neither a JSON file nor a JSON object: {exc}") from exc
    if not isinstance(over, dict):
        raise UsageError("--params must be a JSON object")
    return over


def _catalog(args):
    over = _param_overrides(args.params)
    if args.catalog:
        return load_catalog(args.catalog, over)
    cat = default_catalog()
    if over:
        cat = dataclasses.replace(cat, params=Params.from_dict({**cat.params.to_dict(), **over}))
    return cat


def _inputs(args, at_least=1) -> list[Path]:
    paths = [Path(p) for p in (args.input or [])]
    if len(paths) < at_least:
        raise UsageError(f"{args.command} needs at least {at_least} --input stream(s)")
    return paths


def _write_text(text: str, output):
    if output:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _collect_ius(paths, catalog):
    """Every IU inside an activity, labelled ``<stem>:<activity>.<iu>`` (1-based)."""
    labels, ius = [], []
    for p in paths:
        _, seg = segment_stream(read_stream(p), catalog)
        for a, act in enumerate(seg.activities, start=1):
            for i, iu in enumerate(act.ius, start=1):
                labels.append(f"{p.stem}:{a}.{i}")
                ius.append(iu)
    return labels, ius


# -- commands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.input:
        spec = ScenarioSpec.from_dict(json.loads(Path(args.input[0]).read_text(encoding="utf-8")))
    elif args.template:
        flaw = None
        if args.flaw:
            try:
                a, i, mode = args.flaw.split(":")
                flaw = Flaw(int(a), int(i), mode)
            except ValueError as exc:
                raise UsageError("--flaw expects ACTIVITY:IU:MODE, e.g. 1:2:halt_halfway") from exc
        spec = ScenarioSpec(args.template, args.configuration, args.repetitions, args.noise,
                            args.seed, args.fps, args.subject, flaw)
    else:
        raise UsageError("simulate needs --template or a ScenarioSpec JSON via --input")
    if not args.output:
        raise UsageError("simulate needs --output for the frame stream")
    catalog = _catalog(args)
    sc = generate_scenario(spec, catalog)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        write_stream(sc.frames, fh)
    save_json(sc.sidecar, args.sidecar or out.with_suffix(".truth.json"))
    if args.write_catalog:
        save_json(catalog_to_dict(catalog), args.write_catalog)
    log.info("wrote %d frames to %s", len(sc.frames), out)
    return EXIT_OK


def cmd_encode(args) -> int:
    catalog = _catalog(args)
    fs = encode_stream(read_stream(_inputs(args)[0]), catalog)
    nm = fs.x_m.shape[1]
    header = ["t"] + [f"m{k}" for k in range(nm)] + [f"c{k}" for k in range(fs.rows.shape[1] - nm)]
    fh = open(args.output, "w", newline="", encoding="utf-8") if args.output else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for t, row in zip(fs.timestamps, fs.rows):
            w.writerow([repr(float(t))] + [int(v) for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_segment(args) -> int:
    catalog = _catalog(args)
    fs, seg = segment_stream(read_stream(_inputs(args)[0]), catalog)
    _write_text(json.dumps(segmentation_to_dict(seg, fs.timestamps), indent=1) + "\n", args.output)
    return EXIT_OK


def cmd_matrix(args) -> int:
    catalog = _catalog(args)
    labels, ius = _collect_ius(_inputs(args), catalog)
    cm = confidence_matrix([iu.motion for iu in ius], labels, catalog.params.dtw_window)
    if not args.output:
        raise UsageError("matrix needs --output for the CSV file")
    write_matrix_csv(cm.values, cm.labels, args.output)
    write_heatmap_svg(cm.values, cm.labels, args.svg or Path(args.output).with_suffix(".svg"))
    return EXIT_OK


def cmd_cluster(args) -> int:
    catalog = _catalog(args)
    labels, ius = _collect_ius(_inputs(args), catalog)
    seqs = [iu.motion for iu in ius]
    if len(seqs) < 2:
        raise UsageError("need at least two IUs to cluster")
    w = catalog.params.dtw_window
    k = args.k
    wcss = None
    if k is None:
        wcss = wcss_curve(seqs, min(args.k_max, len(seqs)), args.restarts, args.seed, window=w)
        k = elbow_select(wcss)
    mc = kmeans_dtw(seqs, k, args.restarts, args.seed, window=w)
    cc = context_clusters([iu.x_c for iu in ius])
    comb = ensemble_merge(mc, cc)
    rows = zip(labels, mc.labels.tolist(), cc.labels.tolist(), comb.tolist())
    if args.output:
        write_labels_csv(rows, args.output)
    else:
        csv.writer(sys.stdout).writerows([("iu_id", "motion_label", "context_label", "combined_label"),
                                          *rows])
    summary = {"k": k, "wcss": {str(j): v for j, v in (wcss or {}).items()}}
    log.info("clustering: %s", json.dumps(summary))
    return EXIT_OK


def cmd_train(args) -> int:
    catalog = _catalog(args)
    segs = [segment_stream(read_stream(p), catalog)[1] for p in _inputs(args, 2)]
    model = train_nominal(segs, catalog.params.dtw_window)
    model.params = catalog.params.to_dict()
    text = json.dumps(model.to_dict(), indent=1) + "\n"
    _write_text(text, args.output)
    return EXIT_OK


def cmd_monitor(args) -> int:
    if not args.model:
        raise UsageError("monitor needs --model")
    model = NominalJob.from_dict(json.loads(Path(args.model).read_text(encoding="utf-8")))
    catalog = _catalog(args)
    frames = read_stream(_inputs(args)[0])
    state = monitor_events(online_events(frames, catalog), model, catalog.params.dtw_window)
    if args.output:
        write_events_jsonl(state.events, args.output)
    else:
        for ev in state.events:
            print(json.dumps(ev.to_dict(), separators=(",", ":")))
    return EXIT_ANOMALY if any(ev.is_anomaly for ev in state.events) else EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "generate a synthetic frame stream and ground-truth sidecar"),
    "encode": (cmd_encode, "per-frame feature rows as CSV"),
    "segment": (cmd_segment, "ERU / IU / activity segmentation report as JSON"),
    "matrix": (cmd_matrix, "DTW confidence matrix of all IUs (CSV and SVG)"),
    "cluster": (cmd_cluster, "motion, context and combined IU cluster labels"),
    "train": (cmd_train, "nominal job model from correct executions"),
    "monitor": (cmd_monitor, "online anomaly check of one execution"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hoiseg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--catalog", help="catalog JSON (default: built-in synthetic catalog)")
        p.add_argument("--input", nargs="+", help="input file(s)")
        p.add_argument("--output", help="output file (stdout when omitted, where possible)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--params", help="parameter overrides: JSON object or path to one")
        if name == "simulate":
            p.add_argument("--template", choices=TEMPLATES)
            p.add_argument("--configuration", default="C1")
            p.add_argument("--repetitions", type=int, default=5)
            p.add_argument("--noise", type=float, default=0.0, help="position noise sigma in meters")
            p.add_argument("--fps", type=float, default=30.0)
            p.add_argument("--subject", type=int)
            p.add_argument("--flaw", help="ACTIVITY:IU:MODE with 1-based indices")
            p.add_argument("--sidecar", help="ground-truth path (default: <output>.truth.json)")
            p.add_argument("--write-catalog", help="also save the catalog used")
        elif name == "matrix":
            p.add_argument("--svg", help="heatmap path (default: <output>.svg)")
        elif name == "cluster":
            p.add_argument("--k", type=int, help="fixed k; elbow selection when omitted")
            p.add_argument("--k-max", type=int, default=10)
            p.add_argument("--restarts", type=int, default=10)
        elif name == "monitor":
            p.add_argument("--model", help="model JSON written by train")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command][0](args)
    except BrokenPipeError:
        # reader went away, e.g. `| head`; silence the flush at interpreter exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except (ValueError, KeyError, OSError) as exc:
        # ParseError, StreamError and SkeletonMismatch are ValueErrors
        print(f"hoiseg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
