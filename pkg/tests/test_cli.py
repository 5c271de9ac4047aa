import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracdpg.cli import (CSV_COLUMNS, RunConfig, UsageError, emit_config, main, parse_config,
                         parse_config_text)


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


def test_parse_flags():
    c = parse_config("--example 1 --alpha 1.5 --p 0 --q 0 --m 2 --n 2 --theta 1".split())
    assert (c.example, c.alpha, c.p, c.q, c.m, c.n, c.theta) == (1, 1.5, 0, 0, 2, 2, 1.0)
    c = parse_config("--example 2 --lambda 0.6 --alpha 1.2 --theta 0.4 --p 1 --q 1 --m 3 --n 3".split())
    assert (c.lam, c.alpha, c.theta, c.p, c.m) == (0.6, 1.2, 0.4, 1, 3)
    assert c.problem().exact is not None


@pytest.mark.parametrize("argv", [
    "--example 1 --theta 1.5",
    "--example 1 --theta 0",
    "--example 1 --alpha 2.5",
    "--example 4",
    "--alpha 1.5",
    "--example 1 --lambda 0.6",
    "--example 2 --lambda 1.6",
    "--example 1 --p -1",
    "--example 1 --bogus 3",
])
def test_invalid_arguments(argv, capsys):
    with pytest.raises(UsageError):
        parse_config(argv.split())
    assert main(argv.split()) == 1
    assert "usage error" in capsys.readouterr().err


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# Example 2 panel\nexample = 2\nlambda = 0.7\nalpha = 1.3\ntheta = 0.4\n"
                   "p = 1\nq = 1\nm = 3\nn = 3  # enriched\n")
    c = parse_config(["--config", str(cfg), "--theta", "0.5"])
    assert (c.example, c.lam, c.alpha, c.theta, c.n) == (2, 0.7, 1.3, 0.5, 3)


def test_unknown_key_named(tmp_path):
    with pytest.raises(UsageError, match="'colour'"):
        parse_config_text("example = 1\ncolour = red\n")
    with pytest.raises(UsageError, match="key = value"):
        parse_config_text("example 1\n")
    with pytest.raises(UsageError, match="missing required example"):
        parse_config_text("alpha = 1.5\n")
    assert main(["--config", str(tmp_path / "absent.cfg")]) == 1


@settings(max_examples=60, deadline=None)
@given(example=st.sampled_from([1, 2, 3]),
       alpha=st.floats(1.0, 2.0, exclude_min=True, exclude_max=True),
       lam=st.floats(0.5, 1.5, exclude_min=True, exclude_max=True),
       degrees=st.tuples(*[st.integers(0, 6)] * 4),
       theta=st.floats(0.0, 1.0, exclude_min=True),
       N0=st.integers(1, 64), steps=st.integers(1, 50), serial=st.booleans())
def test_round_trip(example, alpha, lam, degrees, theta, N0, steps, serial):
    p, q, m, n = degrees
    c = RunConfig(example=example, alpha=alpha, lam=lam if example == 2 else None, p=p, q=q,
                  m=m, n=n, theta=theta, N0=N0, max_steps=steps, out="some dir/x", serial=serial)
    assert parse_config_text(emit_config(c)) == c


def test_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "e1"
    assert main(f"--example 1 --p 0 --q 0 --m 2 --n 2 --theta 1 --max-steps 4 --out {out}".split()) == 0
    header, rows = read_csv(out / "convergence.csv")
    assert tuple(header) == CSV_COLUMNS
    est = np.array([float(r[3]) for r in rows])
    assert len(rows) == 4 and np.all(np.diff(est) < 0)
    assert all(r[8] != "" for r in rows)
    for k in range(4):
        h, mesh_rows = read_csv(out / f"mesh_{k}.csv")
        assert h == ["x_left", "x_right", "est_T"] and len(mesh_rows) == 2 ** (k + 1)
        assert np.sqrt(sum(float(r[2]) ** 2 for r in mesh_rows)) == pytest.approx(est[k], rel=1e-12)
    summary = (out / "summary.txt").read_text()
    assert "eoc_est = " in summary and "eoc_err_u = " in summary
    assert "final N=16" in capsys.readouterr().out


def test_example3_leaves_error_columns_empty(tmp_path):
    out = tmp_path / "e3"
    assert main(f"--example 3 --m 2 --n 2 --max-steps 3 --out {out}".split()) == 0
    _, rows = read_csv(out / "convergence.csv")
    assert all(r[4:8] == ["", "", "", ""] for r in rows)
    assert "eoc_err_u" not in (out / "summary.txt").read_text()


def test_serial_rerun_is_byte_identical(tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        argv = f"--example 2 --theta 0.4 --p 1 --q 1 --m 3 --n 3 --max-steps 5 --serial --out {out}"
        assert main(argv.split()) == 0
    names = sorted(p.name for p in outs[0].iterdir() if p.suffix == ".csv")
    assert "convergence.csv" in names and "mesh_4.csv" in names
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    _, rows = read_csv(outs[0] / "convergence.csv")
    assert all(r[8] == "" for r in rows)


def test_numerical_failure_exit_code(tmp_path, capsys):
    argv = f"--example 1 --p 1 --q 1 --m 0 --n 0 --out {tmp_path}".split()
    assert main(argv) == 2
    assert "discrete inf-sup failure" in capsys.readouterr().err


def test_thread_cap_validation(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACDPG_THREADS", "many")
    assert main(f"--example 1 --max-steps 1 --out {tmp_path}".split()) == 1
    monkeypatch.setenv("FRACDPG_THREADS", "1")
    assert main(f"--example 1 --max-steps 1 --out {tmp_path}".split()) == 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fracdpg", "--example", "1", "--max-steps", "2",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "convergence.csv").exists()
