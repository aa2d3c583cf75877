import csv
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from twistlab import __version__, report
from twistlab.cli import main, parse_grid, ConfigError


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_parse_grid():
    assert parse_grid("2,4,8") == [2, 4, 8]
    assert parse_grid("1..4,8") == [1, 2, 3, 4, 8]
    assert parse_grid([3, 1]) == [1, 3]
    with pytest.raises(ConfigError):
        parse_grid("0,1")


def test_nabla_closed_form_column(tmp_path):
    out = tmp_path / "o"
    assert main(["nabla", "--space", "lp:2", "--centralizer", "kp", "--n", "2,4,8,16",
                 "--out", str(out)]) == 0
    rows = read_csv(out / "nabla.csv")
    assert [int(r["n"]) for r in rows] == [2, 4, 8, 16]
    for r in rows:
        n = int(r["n"])
        assert float(r["closed_form"]) == pytest.approx(0.5 * n ** 0.5 * math.log(n))
        assert float(r["nabla"]) == pytest.approx(float(r["closed_form"]), abs=1e-9)


def test_params_schreier_M_equals_n(tmp_path):
    out = tmp_path / "o"
    assert main(["params", "--space", "schreier", "--n", "1..10", "--out", str(out)]) == 0
    rows = read_csv(out / "params.csv")
    assert [float(r["M"]) for r in rows] == [float(n) for n in range(1, 11)]
    rep = json.loads((out / "report.json").read_text())
    assert "one-sided" in rep["regime"]


def test_decompose_residual_column(tmp_path):
    out = tmp_path / "o"
    assert main(["decompose", "--couple", "l1,linf", "--theta", "0.5", "--samples", "4",
                 "--atoms", "16", "--out", str(out)]) == 0
    rows = read_csv(out / "decompose.csv")
    assert len(rows) == 4
    assert all(float(r["derivation_residual"]) < 1e-6 for r in rows)
    assert all(float(r["value_rel_error"]) < 1e-8 for r in rows)


def test_report_provenance_and_determinism(tmp_path):
    args = ["nabla", "--space", "lp:3", "--n", "4,20", "--samples", "300", "--seed", "5"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "report.json").read_bytes()
    assert a == (tmp_path / "b" / "report.json").read_bytes()
    rep = json.loads(a)
    assert rep["version"] == __version__
    assert rep["config_hash"] == report.config_hash(rep["config"])
    assert rep["config"]["seed"] == 5


def test_threads_do_not_change_output(tmp_path, monkeypatch):
    args = ["distance", "--n", "2,3,4", "--seed", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("TWISTLAB_THREADS", "3")
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"space": "lp:1", "n": [2, 3], "seed": 3}))
    out = tmp_path / "o"
    assert main(["params", "--config", str(cfg), "--n", "4", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["config"]["n"] == [4]
    assert rep["config"]["space"]["params"]["p"] == "1"
    assert rep["config"]["seed"] == 3


@pytest.mark.parametrize("argv", [
    ["nabla", "--space", "nonsense"],
    ["nabla", "--n", "0"],
    ["nabla", "--n", "8", "--atoms", "4"],
    ["psi", "--budget", "0"],
    ["decompose", "--couple", "l1"],
    ["params", "--weights", "zigzag"],
])
def test_invalid_config_nonzero_exit(tmp_path, argv, capsys):
    assert main(argv + ["--out", str(tmp_path / "o")]) != 0
    assert "invalid configuration" in capsys.readouterr().err


def test_bad_config_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["nabla", "--config", str(bad), "--out", str(tmp_path)]) == 2
    bad.write_text(json.dumps({"unknown_key": 1}))
    assert main(["nabla", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_row_failures_are_recorded(tmp_path):
    # a Lozanovskii solve with an impossible budget fails per row and the run continues
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"couple": ["lp:1.5", "lp:4"], "theta": 0.3, "tolerance": -1.0}))
    out = tmp_path / "o"
    assert main(["decompose", "--config", str(cfg), "--samples", "2", "--atoms", "6",
                 "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["failures"] == 2
    assert all("error" in r for r in rep["rows"])


def test_plot_and_psi(tmp_path):
    out = tmp_path / "o"
    assert main(["psi", "--n", "4,8", "--budget", "2", "--plot", "--out", str(out)]) == 0
    root = ET.parse(out / "psi.svg").getroot()
    assert root.tag.endswith("svg")
    rows = read_csv(out / "psi.csv")
    assert all(r["consistent"] == "True" for r in rows)


def test_constants_row(tmp_path):
    out = tmp_path / "o"
    assert main(["constants", "--atoms", "8", "--samples", "400", "--out", str(out)]) == 0
    (row,) = read_csv(out / "constants.csv")
    assert 0 < float(row["centralizer"]) <= 2 / math.e + 1e-9


def test_suite_subset(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["suite", "--only", "1,6", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "[PASS]  1." in text and "[PASS]  6." in text
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] and [c["number"] for c in rep["criteria"]] == [1, 6]


def test_json_cleaning():
    text = report.dumps({"b": np.float64(np.nan), "a": np.arange(2), "c": np.inf, "d": np.bool_(True)})
    assert json.loads(text) == {"a": [0, 1], "b": "nan", "c": "inf", "d": True}
