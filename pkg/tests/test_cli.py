from __future__ import annotations

import json
import subprocess
import sys

import pytest

from beamrelay.cli import cli_main
from beamrelay.config import ConfigError, build_run_config, parse_text
from beamrelay.fieldmap import band_of, read_ppm


def test_parse_comments_and_order():
    a = parse_text("# header\nlambda = 0.1  # inline\nw0=1440\n\nmodel=grid\n")
    b = parse_text("model=grid\nw0=1440\nlambda=0.1\n")
    assert a == b == {"lambda": 0.1, "w0": 1440.0, "model": "grid"}


@pytest.mark.parametrize("text,line,key", [
    ("lambda=0.1\nw0 1440\n", 2, None),
    ("lambda=abc\n", 1, "lambda"),
    ("colour=red\n", 1, "colour"),
    ("lambda=0.1\nlambda=0.2\n", 2, "lambda"),
    ("rows=2.5\n", 1, "rows"),
    ("variant=u3\n", 1, "variant"),
])
def test_parse_errors_carry_location(text, line, key):
    with pytest.raises(ConfigError) as exc:
        parse_text(text)
    assert exc.value.line == line and exc.value.key == key
    assert f"line {line}" in str(exc.value)


def test_missing_key_reported():
    with pytest.raises(ConfigError, match="rows"):
        build_run_config(parse_text("model=grid\ncols=10\ndistance=5\n"))


def test_auto_w0():
    rc = build_run_config(parse_text("rows=10\ncols=100\ndistance=50\nlambda=0.1\n"))
    assert rc.schedule_params.w0 == 720.0


def test_schedule_table(capsys):
    assert cli_main(["schedule", "--lambda", "0.1", "--w0", "1440", "--distance", "1e6", "--variant", "u1"]) == 0
    out = capsys.readouterr().out
    assert "6 relay rounds" in out
    assert len(out.strip().splitlines()) == 1 + 7 + 1


def test_schedule_json(tmp_path):
    out = tmp_path / "s.jsonl"
    assert cli_main(["schedule", "--lambda", "0.1", "--w0", "1440", "--distance", "1e5", "--json", str(out)]) == 0
    recs = [json.loads(line) for line in out.read_text().splitlines()]
    assert recs[0]["w"] == 1440 and recs[-1]["x_hi"] == 1e5


def test_schedule_precondition_exit():
    assert cli_main(["schedule", "--lambda", "2", "--w0", "100", "--distance", "1e9", "--variant", "u2"]) == 2


def test_unknown_flag_exit(capsys):
    assert cli_main(["schedule", "--frobnicate"]) == 64
    assert "usage" in capsys.readouterr().err
    assert cli_main(["nosuchcommand"]) == 64


def test_bad_config_exit(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("rows=10\ncols = ten\n")
    assert cli_main(["run", "--config", str(cfg)]) == 65
    err = capsys.readouterr().err
    assert "line 2" in err and "cols" in err


def test_verify_series(capsys):
    assert cli_main(["verify", "--suite", "series"]) == 0
    assert "series sum = 3.586" in capsys.readouterr().out


@pytest.mark.parametrize("suite", ["lemmas", "bounds"])
def test_verify_suites(suite):
    assert cli_main(["verify", "--suite", suite]) == 0


def test_run_and_trace(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("rows=16\ncols=5001\nlambda=0.1\nw0=1440\ndistance=5000\n")
    trace = tmp_path / "t.jsonl"
    assert cli_main(["run", "--config", str(cfg), "--trace", str(trace)]) == 0
    lines = trace.read_text().splitlines()
    assert json.loads(lines[0])["type"] == "header"
    assert json.loads(lines[-1])["success"] is True


def test_run_reception_failure_exit(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("rows=16\ncols=5001\nlambda=0.1\nw0=1440\ndistance=5000\ntau=1e6\n")
    assert cli_main(["run", "--config", str(cfg), "--strict"]) == 3


def test_run_region_error_exit(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("rows=16\ncols=100\nlambda=0.1\nw0=1440\ndistance=5000\n")
    assert cli_main(["run", "--config", str(cfg)]) == 2


def test_random_command(capsys):
    assert cli_main(["random", "--n", "20000", "--k", "3", "--seed", "1", "--runs", "2"]) == 0
    assert "success rate" in capsys.readouterr().out


def test_field_explicit_senders(tmp_path):
    cfg = tmp_path / "f.cfg"
    cfg.write_text("lambda=0.1\nsenders=0,40,10,12\nreceivers=90,140,10,13\nviewport=0,200,0,25\n")
    out, csv = tmp_path / "f.ppm", tmp_path / "f.csv"
    assert cli_main(["field", "--config", str(cfg), "--round", "1", "--out", str(out), "--csv", str(csv)]) == 0
    img = read_ppm(out.read_bytes())
    assert img.shape == (25, 200, 3)
    band = band_of(img)[::-1]
    assert (band == 2).sum() == 41 * 3
    assert csv.read_text().count("\n") == 1 + 25 * 200


def test_field_derived_round(tmp_path):
    cfg = tmp_path / "f.cfg"
    cfg.write_text("rows=64\ncols=100001\nlambda=0.1\nw0=1440\ndistance=100000\nresolution=0.25\n")
    out = tmp_path / "r1.ppm"
    assert cli_main(["field", "--config", str(cfg), "--round", "1", "--out", str(out), "--mode", "phase"]) == 0
    assert out.read_bytes().startswith(b"P6\n")
    assert cli_main(["field", "--config", str(cfg), "--round", "99", "--out", str(out)]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "beamrelay", "verify", "--suite", "series"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "PASS" in r.stdout
