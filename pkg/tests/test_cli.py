import json

import numpy as np
import pytest

from riplab.cli import BOUNDS_HEADER, RECOVER_HEADER, WISHART_HEADER, main, parse_grid
from riplab.errors import DomainError
from riplab.output import file_digest, manifest_path, read_csv


def _run(*argv):
    return main(list(argv))


def test_bounds_single_point(tmp_path):
    out = tmp_path / "b.csv"
    assert _run("bounds", "--delta", "0.5", "--rho", "0.25", "--out", str(out)) == 0
    header, rows = read_csv(out)
    assert tuple(header) == BOUNDS_HEADER
    assert len(rows) == 1
    delta, rho, lmin, lmax, L, U = map(float, rows[0])
    assert (delta, rho) == (0.5, 0.25)
    assert 0 < lmin <= 0.75 and lmax >= 1.25
    assert L == pytest.approx(1 - lmin) and U <= lmax - 1


def test_bounds_grid_order_and_rerun(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ("bounds", "--grid", "0.2:0.8:3", "--rho-grid", "0.1:0.4:4")
    assert _run(*args, "--out", str(a)) == 0
    assert _run(*args, "--out", str(b)) == 0
    _, rows = read_csv(a)
    assert len(rows) == 12
    keys = [(float(r[0]), float(r[1])) for r in rows]
    assert keys == sorted(keys)
    assert a.read_bytes() == b.read_bytes()


def test_manifest(tmp_path):
    out = tmp_path / "m.csv"
    assert _run("bounds", "--delta", "0.3", "--rho", "0.1", "--seed", "4", "--out", str(out)) == 0
    body = json.loads(manifest_path(out).read_text())
    assert body["seed"] == 4
    assert body["argv"][:2] == ["riplab", "bounds"]
    assert body["outputs"] == [{"path": "m.csv", "sha256": file_digest(out)}]
    assert len(body["config_digest"]) == 64 and "version" in body and "wall_time" in body


def test_stdout_when_no_out(capsys):
    assert _run("bounds", "--delta", "0.5", "--rho", "0.1") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(BOUNDS_HEADER) and len(lines) == 2


def test_curve_rv_small_grid(tmp_path):
    out = tmp_path / "rv.csv"
    assert _run("curve", "--method", "RV", "--grid", "0.1:0.9:5", "--out", str(out)) == 0
    header, rows = read_csv(out)
    assert header[:2] == ["delta", "rho_S"]
    assert len(rows) == 5
    for r in rows:
        assert float(r[3]) == pytest.approx(1.0 / float(r[1]))


@pytest.mark.parametrize("argv", [
    ("curve", "--method", "HEURISTIC", "--grid", "0.5:0.5:1"),
    ("curve", "--method", "FL_Q_BOUNDED", "--q", "0.5", "--grid", "0.5:0.5:1"),
    ("curve", "--method", "FL", "--grid", "0.9:0.1:3"),
    ("bounds", "--delta", "0.5"),
    ("bounds", "--delta", "1.5", "--rho", "0.2"),
    ("empirical", "--n", "2000"),
    ("wishart", "--n", "1"),
])
def test_usage_errors_exit_2(argv):
    assert _run(*argv) == 2


def test_allow_large_lifts_the_cap(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("max_n=10\n")
    assert _run("wishart", "--n", "20", "--trials", "1", "--config", str(cfg)) == 2
    out = tmp_path / "w.csv"
    assert _run("wishart", "--n", "20", "--trials", "1", "--config", str(cfg),
                "--allow-large", "--out", str(out)) == 0


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed=7\nrho-list=0.25,0.5\ntrials=2\n")
    out = tmp_path / "w.csv"
    assert _run("wishart", "--n", "20", "--config", str(cfg), "--out", str(out)) == 0
    assert json.loads(manifest_path(out).read_text())["seed"] == 7
    header, rows = read_csv(out)
    assert tuple(header) == WISHART_HEADER and len(rows) == 4
    assert _run("wishart", "--n", "20", "--config", str(cfg), "--seed", "9", "--out", str(out)) == 0
    assert json.loads(manifest_path(out).read_text())["seed"] == 9


def test_empirical_writes_trials_and_ratios(tmp_path):
    out = tmp_path / "e.csv"
    assert _run("empirical", "--n", "12", "--N-list", "16,24", "--k-range", "1:3:1",
                "--trials", "1", "--restarts", "1", "--out", str(out)) == 0
    _, trials = read_csv(out)
    assert len(trials) == 2 * 3 * 1 * 2
    _, ratios = read_csv(f"{out}.ratios.csv")
    assert len(ratios) == 6 + 1 and ratios[-1][0] == "max"
    files = [o["path"] for o in json.loads(manifest_path(out).read_text())["outputs"]]
    assert files == ["e.csv", "e.csv.ratios.csv"]


def test_recover_joins_strong_curves(tmp_path):
    out = tmp_path / "r.csv"
    assert _run("recover", "--n", "10", "--grid", "0.5:0.5:1", "--k-grid", "1,2",
                "--trials", "2", "--out", str(out)) == 0
    header, rows = read_csv(out)
    assert tuple(header) == RECOVER_HEADER and len(rows) == 2
    rho_fl, rho_rv, rho_c = (float(v) for v in rows[0][-3:])
    assert rho_c < rho_fl < rho_rv


def test_bad_subcommand_is_an_argparse_error():
    with pytest.raises(SystemExit) as exc:
        _run("frobnicate")
    assert exc.value.code == 2


def test_parse_grid():
    np.testing.assert_allclose(parse_grid("1/20:20/21:3"), [0.05, (0.05 + 20 / 21) / 2, 20 / 21])
    assert list(parse_grid("0.5:0.5:1")) == [0.5]
    for bad in ("0.1:0.9", "a:b:3", "0.9:0.1:3", "0.1:0.9:0"):
        with pytest.raises(DomainError):
            parse_grid(bad)
