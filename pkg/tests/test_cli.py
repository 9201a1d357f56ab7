import json
import subprocess
import sys

import pytest

from eequake import cli

FAST = ["--c-grid", "10,100", "--gamma-grid", "0.01,0.1"]


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.mark.parametrize("command", ["adf", "dns", "emd", "hht", "detect"])
def test_analysis_commands(command, tmp_path, capsys):
    assert cli.main([command, "--out", str(tmp_path)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert isinstance(summary, dict)
    assert any(tmp_path.iterdir())


def test_detect_summary(tmp_path, capsys):
    cli.main(["detect", "--out", str(tmp_path)])
    events = json.loads(capsys.readouterr().out)["events"]
    assert len(events) == 1 and abs(events[0]["peak"] - 585) <= 2


def test_full_run_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["full", "--out", str(a), *FAST]) == 0
    assert cli.main(["full", "--out", str(b), *FAST]) == 0
    fa, fb = _files(a), _files(b)
    assert fa.keys() == fb.keys()
    assert set(fa) >= {"events.json", "predictions.csv", "report.json", "model.json", "redetect.json"}
    for name in fa:
        assert fa[name] == fb[name], name


def test_predict_with_explicit_event(tmp_path, capsys):
    assert cli.main(["predict", "--out", str(tmp_path), "--ee-index", "590", "--features", "ohlc", *FAST]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["ee_index"] == 590


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"horizon": 2, "b": 3.0}))
    args = cli.build_parser().parse_args(["predict", "--config", str(cfg), "--b", "5"])
    config = cli.config_from_args(args)
    assert config.horizon == 2 and config.b == 5.0 and config.out == "."


def test_schema_forms():
    assert cli._schema("date=Date, close=Adj Close") == {"date": "Date", "close": "Adj Close"}
    assert cli._schema('{"close": "Last"}') == {"close": "Last"}


def test_missing_input_exits_nonzero(tmp_path, capsys):
    code = cli.main(["detect", "--input", str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
    assert code == 1
    assert "[input]" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert cli.main(["adf", "--config", str(cfg)]) == 1
    assert "[config]" in capsys.readouterr().err


def test_event_outside_test_span(tmp_path, capsys):
    assert cli.main(["predict", "--ee-index", "10", "--out", str(tmp_path), *FAST]) == 1
    assert "[predict]" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "eequake", "adf", "--out", str(tmp_path)], capture_output=True, text=True, check=True
    )
    assert "t_statistic" in json.loads(out.stdout)
    assert (tmp_path / "stationarity.json").exists()
