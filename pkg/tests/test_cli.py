import json
import subprocess
import sys

import pytest

from perron.cli import main
from perron.config import ExperimentConfig, load_config, parse_config
from perron.errors import ConfigError

SMALL = {
    "sample": {"n_points": 4000, "seed": 7},
    "spectral": {"max_deg": 3, "sample_points": 2000},
    "tests": {"variance_lags": 10, "clt_n": 50, "trajectories": 2000, "clt_threshold": 0.1,
              "be_n_values": [8, 16, 32, 64], "lclt_n": 50, "lclt_trajectories": 4000,
              "lclt_rel_tol": 0.3, "decay_n_max": 8},
}


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def _files(d):
    return {p.name: p.read_bytes() for p in d.iterdir()}


def test_bundled_config_is_default():
    assert load_config() == ExperimentConfig()
    assert load_config().sample.n_points == 100_000


def test_clt_command_passes(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    code = main(["clt", "--config", str(cfg), "--out", str(tmp_path / "out")])
    out = capsys.readouterr().out
    assert code == 0, out
    assert out.startswith("clt: PASS")
    (d,) = (tmp_path / "out").iterdir()
    names = set(_files(d))
    assert {"config.json", "metadata.json", "summary_clt.json", "clt_0.json", "clt_0.csv"} <= names


def test_degenerate_variance_exits_2(tmp_path, capsys):
    doc = dict(SMALL, observable={"name": "coboundary_of", "psi": {"name": "re_z"}})
    code = main(["variance", "--config", str(_write(tmp_path, doc)), "--out", str(tmp_path / "o")])
    out = capsys.readouterr().out
    assert code == 2
    assert "DegenerateVariance" in out


@pytest.mark.parametrize("text", ['{"sample": {"n_points": 10}}', '{"bogus": 1}', "{not json",
                                  '{"observable": {"name": "smooth_bump"}}'])
def test_bad_config_exits_1(tmp_path, capsys, text):
    p = tmp_path / "bad.json"
    p.write_text(text)
    assert main(["sample", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "ConfigError" in capsys.readouterr().err


def test_config_diagnostics_name_the_field():
    with pytest.raises(ConfigError, match="sample.n_points"):
        parse_config('{"sample": {"n_points": 10}}')
    with pytest.raises(ConfigError, match="bogus"):
        parse_config('{"bogus": 1}')


def test_missing_config_file(tmp_path, capsys):
    assert main(["sample", "--config", str(tmp_path / "nope.json")]) == 1


def test_seed_override_and_reproducible_outputs(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    runs = []
    for k in range(2):
        root = tmp_path / f"run{k}"
        assert main(["variance", "--config", str(cfg), "--out", str(root), "--seed", "99"]) == 0
        (d,) = root.iterdir()
        runs.append((d.name, _files(d)))
    (n1, f1), (n2, f2) = runs
    assert n1 == n2
    assert json.loads(f1["config.json"])["sample"]["seed"] == 99
    f1.pop("metadata.json"), f2.pop("metadata.json")
    assert f1 == f2
    root = tmp_path / "other"
    assert main(["variance", "--config", str(cfg), "--out", str(root)]) == 0
    (d,) = root.iterdir()
    assert d.name != n1
    assert _files(d)["variance.json"] != f1["variance.json"]


def test_threads_do_not_change_outputs(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    outs = []
    for t in (1, 3):
        root = tmp_path / f"t{t}"
        assert main(["sample", "--config", str(cfg), "--out", str(root), "--threads", str(t)]) == 0
        (d,) = root.iterdir()
        files = _files(d)
        assert json.loads(files.pop("metadata.json"))["threads"] == t
        outs.append(files)
    assert outs[0] == outs[1]
    assert main(["sample", "--threads", "0"]) == 1


def test_console_entry_point(tmp_path):
    cfg = _write(tmp_path, SMALL)
    r = subprocess.run([sys.executable, "-m", "perron.cli", "decay", "--config", str(cfg),
                        "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert r.stdout.startswith("decay: PASS")
