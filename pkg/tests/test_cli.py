import json
import subprocess
import sys


from strichartz_lab import cli

FAST_CK = """[run]
seed = 3

[ck-certify]
N = 64
jmax = 4
hilbert_N = 64
hilbert_jmax = 4
"""

FAST_TTSTAR = """[ttstar-scan]
separations = 0, 8
phi_j = 6..7
"""


def _write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_run_writes_csv_and_metadata(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["ck-certify", "--config", _write(tmp_path, FAST_CK), "--output-dir", str(out)]) == 0
    meta = json.loads((out / "ck_certify.json").read_text())
    assert meta["seed"] == 3
    assert meta["config"]["parameters"]["N"] == 64
    assert set(meta["files"]) == {"ck_levels.csv", "hilbert_levels.csv"}
    assert {"python", "numpy", "scipy", "strichartz_lab"} <= set(meta["versions"])
    header = (out / "ck_levels.csv").read_text().splitlines()[0]
    assert header == "j,pairs,level_norm,certified_bound,ok"


def test_outputs_are_bit_identical(tmp_path):
    cfg = _write(tmp_path, FAST_TTSTAR)
    for d in ("a", "b"):
        assert cli.main(["ttstar-scan", "--config", cfg, "--output-dir", str(tmp_path / d)]) == 0
    for name in ("ttstar_scan.csv", "phi_l1.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_unknown_key_reports_line(tmp_path, capsys):
    cfg = _write(tmp_path, "[run]\nseed = 1\n\n[ck-certify]\nN = 64\nbogus = 2\n")
    assert cli.main(["ck-certify", "--config", cfg, "--output-dir", str(tmp_path)]) == 2
    assert "line 6" in capsys.readouterr().err


def test_unknown_section_and_bad_value(tmp_path, capsys):
    assert cli.main(["ck-certify", "--config", _write(tmp_path, "[nope]\nx = 1\n")]) == 2
    assert "line 1" in capsys.readouterr().err
    assert cli.main(["ck-certify", "--config", _write(tmp_path, "[ck-certify]\nN = many\n")]) == 2
    assert "expected int" in capsys.readouterr().err


def test_empty_range_is_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, "[piece-decay]\nj = 9..6\n")
    assert cli.main(["piece-decay", "--config", cfg, "--output-dir", str(tmp_path)]) == 2
    assert "empty range" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["ck-certify", "--config", str(tmp_path / "absent.ini")]) == 2


def test_precondition_failure_exits_3(tmp_path):
    cfg = _write(tmp_path, "[counterexample]\nepsilons = 1e-2, 1e-3\n")
    assert cli.main(["counterexample", "--config", cfg, "--output-dir", str(tmp_path)]) == 3


def test_output_dir_precedence(tmp_path, monkeypatch):
    cfg = _write(tmp_path, f"[run]\noutput_dir = {tmp_path / 'from_ini'}\n")
    assert cli.load_config("ck-certify", cfg).output_dir == tmp_path / "from_ini"
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "from_env"))
    c = cli.load_config("ck-certify", cfg)
    assert c.output_dir == tmp_path / "from_env"
    assert c.overridden["output_dir"] == f"${cli.OUTPUT_ENV}"
    assert cli.load_config("ck-certify", cfg, str(tmp_path / "flag")).output_dir == tmp_path / "flag"


def test_range_parser():
    assert cli._parse_ints("6..9") == [6, 7, 8, 9]
    assert cli._parse_ints("1, 4,16") == [1, 4, 16]
    assert cli._parse_floats("1e-2, 0.5") == [0.01, 0.5]


def _fake(directory, command, summary):
    directory.mkdir(exist_ok=True)
    (directory / f"{command.replace('-', '_')}.json").write_text(json.dumps({"summary": summary}))


def test_report_pass_fail_skip(tmp_path, capsys):
    d = tmp_path / "art"
    _fake(d, "piece-decay", {"slope": -0.3})
    _fake(d, "counterexample", {"above_lower_bound": True, "slope_1e-6_1e-2": 0.97, "gate_mismatches": 0})
    assert cli.main(["report", str(d)]) == 0
    out = capsys.readouterr().out
    assert "[PASS   ]  6 piece decay" in out
    assert "[SKIPPED]  4 mode uniformity" in out
    assert "overall: PASS (7 skipped)" in out
    assert (d / "report.csv").exists()


def test_report_failure_exits_4(tmp_path, capsys):
    d = tmp_path / "art"
    _fake(d, "piece-decay", {"slope": -0.1})
    assert cli.main(["report", str(d)]) == 4
    out = capsys.readouterr().out
    assert "[FAIL   ]  6 piece decay" in out
    assert "overall: FAIL" in out


def test_report_corrupt_metadata(tmp_path):
    d = tmp_path / "art"
    d.mkdir()
    (d / "piece_decay.json").write_text("{not json")
    assert cli.main(["report", str(d)]) == 2
    _fake(d, "piece-decay", {"wrong": 1})
    assert cli.main(["report", str(d)]) == 2
    assert cli.main(["report", str(tmp_path / "missing")]) == 2


def test_report_uses_env_directory(tmp_path, monkeypatch):
    d = tmp_path / "art"
    _fake(d, "piece-decay", {"slope": -0.3})
    monkeypatch.setenv(cli.OUTPUT_ENV, str(d))
    assert cli.main(["report"]) == 0


def test_gate_table_exhaustive():
    rows, mismatches = cli._gate_table()
    assert len(rows) == 81
    assert mismatches == 0
    assert sum(r["outcome"] == "double-endpoint" for r in rows) == 1


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "strichartz_lab.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for name in cli.EXPERIMENTS:
        assert name in res.stdout
