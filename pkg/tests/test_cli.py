import json

import numpy as np
import pytest

from mtjtrng import cli, protocol

QUICK = """device_profile = "device_c.toml"
n_devices = 2
t_enable = 3e-9
reset_burn_in = 0.2e-9

[circuit]
r_series = 2000.0
"""


@pytest.fixture
def quick(tmp_path):
    p = tmp_path / "quick.toml"
    p.write_text(QUICK)
    return str(p)


def _run(*argv):
    return cli.main([str(a) for a in argv])


def test_parse_values():
    assert cli.parse_values("1,2.5") == [1.0, 2.5]
    assert cli.parse_values("0:15:45") == [0, 15, 30, 45]
    assert cli.parse_values("-10e3:10e3:10e3") == [-10e3, 0, 10e3]
    for bad in ("", "1:0:3", "a,b", "3:1:1"):
        with pytest.raises(cli.UsageError):
            cli.parse_values(bad)


def test_exit_codes(tmp_path, quick):
    assert _run("frobnicate") == 1
    assert _run("generate", "--trials", "0") == 1
    assert _run("generate", "--config", tmp_path / "missing.toml") == 2
    bad = tmp_path / "bad.toml"
    bad.write_text(QUICK.replace("2000.0", "-5.0"))
    assert _run("generate", "--config", bad, "--out", tmp_path / "w.bin") == 2
    assert _run("nist", "--in", tmp_path / "nothing.bin") == 2


def test_generate_and_report(tmp_path, quick, capsys):
    out = tmp_path / "w.bin"
    assert _run("generate", "--config", quick, "--trials", 50, "--seed", 7, "--out", out,
                "--bootstrap", 10, "--trace", "--trace-every", 100) == 0
    words, meta = protocol.read_word_stream(out)
    assert words.size == 50 and meta["seed"] == 7 and meta["n_bits"] == 2
    assert "entropy" in meta and "config" in meta
    assert (tmp_path / "w.bin.trace0.csv").read_text().startswith("t,v_cap,")
    capsys.readouterr()
    assert _run("report", out, "--out", tmp_path / "r.json") == 0
    rows = json.loads((tmp_path / "r.json").read_text())["rows"]
    assert len(rows) == 1 and rows[0]["trials"] == 50


def test_report_refuses_mixed_configs(tmp_path, quick):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    _run("generate", "--config", quick, "--trials", 8, "--out", a, "--bootstrap", 0)
    _run("generate", "--n-devices", 2, "--trials", 1, "--out", b, "--bootstrap", 0, "--dt", 2e-12)
    assert _run("report", a, b, "--out", tmp_path / "r.json") == 2
    assert _run("report", a, b, "--force", "--out", tmp_path / "r.json") == 0


def test_nist_command(tmp_path):
    words = np.random.default_rng(1).integers(0, 256, 60 * 128)
    path = tmp_path / "w.bin"
    protocol.write_word_stream(path, words, 8, "d", 0)
    assert _run("nist", "--in", path, "--sequences", 60, "--seqlen", 1024,
                "--out", tmp_path / "n.json", "--raw") == 0
    rep = json.loads((tmp_path / "n.json").read_text())
    assert rep["suite_pass"] and rep["post_processed"] is False
    assert _run("nist", "--in", path, "--sequences", 61, "--seqlen", 1024) == 2


def _outputs(tmp_path, quick, threads):
    d = tmp_path / f"t{threads}"
    common = ["--config", quick, "--trials", 40, "--seed", 3, "--threads", threads, "--bootstrap", 20]
    assert _run("generate", *common, "--out", d / "w.bin") == 0
    assert _run("entropy-sweep", *common, "--axis", "v_init", "--values", "0.7,0.8",
                "--out", d / "s.csv") == 0
    assert _run("field-sweep", *common, "--magnitude=-5e3,5e3", "--out", d / "f.csv") == 0
    assert _run("variation-ensemble", *common, "--instances", 3, "--out", d / "e.csv") == 0
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_outputs_identical_across_threads(tmp_path, quick):
    one, eight = _outputs(tmp_path, quick, 1), _outputs(tmp_path, quick, 8)
    assert one.keys() == eight.keys() and len(one) == 6
    for name in one:
        assert one[name] == eight[name], name
