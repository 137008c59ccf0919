import csv
import json

import pytest

from hoiseg.cli import EXIT_ANOMALY, EXIT_INVALID, EXIT_OK, build_parser, main


@pytest.fixture(scope="module")
def job_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("jobs")
    for s in range(4):
        assert main(["simulate", "--template", "polish_measure_job", "--subject", str(s),
                     "--seed", str(s), "--noise", "0.0002", "--output", str(d / f"ok{s}.jsonl")]) == EXIT_OK
    assert main(["simulate", "--template", "polish_measure_job", "--subject", "1", "--seed", "9",
                 "--noise", "0.0002", "--flaw", "1:2:halt_halfway", "--output", str(d / "bad.jsonl")]) == EXIT_OK
    return d


def test_every_command_has_common_flags():
    parser = build_parser()
    for cmd in ["segment", "encode", "cluster", "train", "monitor", "simulate", "matrix"]:
        args = parser.parse_args([cmd, "--catalog", "c", "--input", "i", "--output", "o",
                                  "--seed", "3", "--params", "{}"])
        assert args.seed == 3 and args.input == ["i"]


def test_simulate_writes_stream_sidecar_and_catalog(tmp_path):
    out = tmp_path / "bf.jsonl"
    rc = main(["simulate", "--template", "box_filling", "--output", str(out),
               "--write-catalog", str(tmp_path / "cat.json")])
    assert rc == EXIT_OK
    truth = json.loads((tmp_path / "bf.truth.json").read_text())
    assert len(truth["activities"]) == 5 and truth["frames"] == len(out.read_text().splitlines())
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(truth["spec"]))
    assert main(["simulate", "--input", str(spec), "--output", str(tmp_path / "again.jsonl")]) == EXIT_OK
    assert (tmp_path / "again.jsonl").read_bytes() == out.read_bytes()

    seg = tmp_path / "seg.json"
    assert main(["segment", "--catalog", str(tmp_path / "cat.json"), "--input", str(out),
                 "--output", str(seg)]) == EXIT_OK
    report = json.loads(seg.read_text())
    assert len(report["activities"]) == 5 and all(len(a["ius"]) == 4 for a in report["activities"])

    enc = tmp_path / "enc.csv"
    assert main(["encode", "--input", str(out), "--output", str(enc)]) == EXIT_OK
    rows = list(csv.reader(enc.open()))
    assert rows[0][:2] == ["t", "m0"] and len(rows) == truth["frames"] + 1


def test_train_and_monitor(job_files, tmp_path):
    model = tmp_path / "model.json"
    ok = [str(job_files / f"ok{s}.jsonl") for s in range(3)]
    assert main(["train", "--input", *ok, "--output", str(model)]) == EXIT_OK
    assert json.loads(model.read_text())["format"] == "hoiseg.nominal"
    events = tmp_path / "ev.jsonl"
    rc = main(["monitor", "--model", str(model), "--input", str(job_files / "bad.jsonl"),
               "--output", str(events)])
    assert rc == EXIT_ANOMALY
    kinds = [json.loads(line)["kind"] for line in events.read_text().splitlines()]
    assert "NoCandidateActivity" in kinds
    # a training job replayed through its own model
    assert main(["monitor", "--model", str(model), "--input", ok[0],
                 "--output", str(events)]) in (EXIT_OK, EXIT_ANOMALY)


def test_matrix_and_cluster(job_files, tmp_path):
    ins = [str(job_files / "ok0.jsonl"), str(job_files / "ok1.jsonl")]
    assert main(["matrix", "--input", *ins, "--output", str(tmp_path / "m.csv")]) == EXIT_OK
    header = next(csv.reader((tmp_path / "m.csv").open()))
    assert len(header) == 1 + 10 and header[1] == "ok0:1.1"
    assert (tmp_path / "m.svg").read_text().count('class="cell"') == 100
    assert main(["cluster", "--input", *ins, "--k-max", "4", "--restarts", "2",
                 "--output", str(tmp_path / "l.csv")]) == EXIT_OK
    rows = list(csv.reader((tmp_path / "l.csv").open()))
    assert rows[0] == ["iu_id", "motion_label", "context_label", "combined_label"] and len(rows) == 11
    assert main(["cluster", "--input", *ins, "--k", "2", "--restarts", "1",
                 "--output", str(tmp_path / "l2.csv")]) == EXIT_OK


def test_validation_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"t": 0}\n{"t": oops}\n')
    assert main(["segment", "--input", str(bad)]) == EXIT_INVALID
    assert "line 2" in capsys.readouterr().err
    assert main(["segment", "--input", str(tmp_path / "missing.jsonl")]) == EXIT_INVALID
    assert main(["segment"]) == EXIT_INVALID
    assert main(["simulate", "--output", str(tmp_path / "x.jsonl")]) == EXIT_INVALID
    assert main(["simulate", "--template", "boxing", "--flaw", "bad",
                 "--output", str(tmp_path / "x.jsonl")]) == EXIT_INVALID
    assert main(["monitor", "--input", str(bad)]) == EXIT_INVALID
    assert main(["segment", "--input", str(bad), "--params", '{"nope": 1}']) == EXIT_INVALID
    assert main(["segment", "--input", str(bad), "--params", "[1]"]) == EXIT_INVALID
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--template", "juggling"])
    assert exc.value.code == 2


def test_params_override(tmp_path):
    out = tmp_path / "s.jsonl"
    main(["simulate", "--template", "boxing", "--output", str(out)])
    p = tmp_path / "p.json"
    p.write_text('{"depth": 1}')
    assert main(["encode", "--input", str(out), "--params", str(p),
                 "--output", str(tmp_path / "e.csv")]) == EXIT_OK
    header = (tmp_path / "e.csv").read_text().splitlines()[0].split(",")
    assert header == ["t", "m0", "m1", "m2", "m3", "c0", "c1"]
