import csv
import json
import subprocess
import sys

import pytest

from ntksep.checks import REGISTRY
from ntksep.cli import main


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_compile_check(tmp_path):
    assert main(["compile-check", "--n", "6", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "compile_check.csv")
    assert rows[0][0] == "n [inputs]" and rows[1][0] == "6" and rows[1][-1] == "True"
    assert (tmp_path / "net.dot").read_text().startswith("digraph")


@pytest.mark.parametrize("sub", ["sep1", "sep3"])
def test_small_separations(sub, tmp_path):
    assert main([sub, "--out", str(tmp_path)]) == 0
    for name in ("report.md", "report.csv", "ntk_sweep.svg", "config.json"):
        assert (tmp_path / name).exists()
    header = read_csv(tmp_path / "report.csv")[0]
    assert any("[" in h for h in header)


def test_sep2_small(tmp_path):
    assert main(["sep2", "--n", "6", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "kernel_bound.csv")
    assert rows[0] == ["p [features]", "edge_ceiling [edge]"]


def test_sep4_small(tmp_path):
    assert main(["sep4", "--n", "5", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "kernel_bound.svg").exists()


def test_verify_subset(tmp_path, capsys):
    assert main(["verify", "--checks", "claim31,sigma_net", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "checks.csv")
    assert [r[0] for r in rows[1:]] == ["claim31", "sigma_net"]
    assert all(r[1] == "True" for r in rows[1:])
    assert "check" in rows[0][0] and "[" in rows[0][2]


def test_verify_fault_injection(tmp_path, capsys):
    assert main(["verify", "--checks", "claim31", "--inject-fault", "claim31", "--out", str(tmp_path)]) == 1
    assert "claim31" in capsys.readouterr().err


def test_registry_names():
    assert set(REGISTRY) >= {"claim31", "claim32", "claim51", "thm1", "thm2", "kernel_audit",
                             "sigma_net", "grad_oracle", "relu_demo"}


@pytest.mark.parametrize("argv", [
    ["nope"],
    ["sep1", "--alpha", "1.5"],
    ["sep2", "--n", "2"],
    ["sep4", "--n", "30"],
    ["relu-demo", "--k", "1"],
    ["compile-check", "--n", "0"],
    ["sep1", "--tau", "-1"],
    ["sep1", "--strategies", "bogus"],
    ["verify", "--checks", "missing"],
    ["verify", "--inject-fault", "thm1"],
])
def test_usage_errors(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path / "o")]) == 2


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 5, "seed": 3}))
    out = tmp_path / "o"
    assert main(["compile-check", "--config", str(cfg), "--n", "4", "--out", str(out)]) == 0
    echoed = json.loads((out / "config.json").read_text())
    assert echoed["n"] == 4 and echoed["seed"] == 3 and echoed["subcommand"] == "compile-check"


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"width": 5}))
    assert main(["compile-check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["sep3", "--out", str(out)]) == 0
    for name in ("report.md", "report.csv", "ntk_sweep.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_svg_is_self_contained(tmp_path):
    assert main(["sep1", "--out", str(tmp_path)]) == 0
    svg = (tmp_path / "ntk_sweep.svg").read_text()
    assert svg.startswith("<svg") and "href" not in svg and "http://" not in svg.replace(
        'xmlns="http://www.w3.org/2000/svg"', "")


def test_relu_demo_small(tmp_path):
    out = tmp_path / "r"
    # small sizes learn even the unbiased parity, so only the exit-code logic is checked here
    rc = main(["relu-demo", "--n", "10", "--k", "2", "--steps", "1500", "--out", str(out)])
    summary = read_csv(out / "summary.csv")
    assert summary[0][0] == "alpha" and len(summary) == 3
    by_alpha = {float(r[0]): r for r in summary[1:]}
    expected = float(by_alpha[0.0][3]) <= 0.6 and int(by_alpha[0.2][2]) >= 1
    assert rc == (0 if expected else 1)
    assert len(read_csv(out / "curves.csv")) == 1 + 2 * 5 * len(set(r[2] for r in read_csv(out / "curves.csv")[1:]))
    assert (out / "accuracy.svg").exists()


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "ntksep.cli", "compile-check", "--n", "3", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "depth" in res.stdout
