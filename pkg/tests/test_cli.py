"""File formats, config parsing, subcommands, exit codes."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

import gfbsplit.cli as cli
from gfbsplit.cli import (
    MatrixFormatError,
    main,
    parse_config,
    read_matrix,
    read_trace_csv,
    write_matrix,
)
from gfbsplit.gfb import ConfigError, NumericalFailure


BUILTIN_CFG = """\
problem = builtin-1d
gamma = 1.0
lambda = 1.0
max_iters = 60
stop_tol = none
mode = pointwise
output_dir = {out}
"""

PCP_CFG = """\
problem = pcp-synthetic
rows = 16
cols = 12
rank = 2
sparse_frac = 0.05
noise_std = 0.0
seed = 7
gamma = 1.0
lambda = 1.0
mode = pointwise
max_iters = 80
stop_tol = none
output_dir = {out}
"""


def write_cfg(tmp_path, text, name="exp.cfg", **kw):
    path = tmp_path / name
    path.write_text(text.format(**kw))
    return str(path)


# --- matrix files -----------------------------------------------------------

def test_binary_matrix_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    mat = rng.standard_normal((7, 3))
    path = str(tmp_path / "m.gfbm")
    write_matrix(path, mat)
    back = read_matrix(path)
    assert np.array_equal(back, mat)


def test_text_matrix_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    mat = rng.standard_normal((4, 5))
    path = str(tmp_path / "m.txt")
    write_matrix(path, mat)
    back = read_matrix(path)
    assert np.array_equal(back, mat)


def test_text_matrix_header_example(tmp_path):
    path = tmp_path / "small.txt"
    path.write_text("2 2\n1.0 2.0\n3.0 4.0\n")
    assert_allclose(read_matrix(str(path)), [[1.0, 2.0], [3.0, 4.0]])


def test_truncated_binary_raises_format_error(tmp_path):
    rng = np.random.default_rng(2)
    path = str(tmp_path / "m.gfbm")
    write_matrix(path, rng.standard_normal((6, 4)))
    raw = open(path, "rb").read()
    open(path, "wb").write(raw[:-9])
    with pytest.raises(MatrixFormatError) as info:
        read_matrix(path)
    assert info.value.offset == len(raw) - 9


def test_malformed_text_matrix_reports_offset(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 3\n1.0 2.0 3.0\n4.0 oops 6.0\n")
    with pytest.raises(MatrixFormatError) as info:
        read_matrix(str(path))
    assert info.value.offset == len("2 3\n1.0 2.0 3.0\n")


def test_matio_info_and_convert(tmp_path, capsys):
    rng = np.random.default_rng(3)
    src = str(tmp_path / "a.gfbm")
    dst = str(tmp_path / "a.txt")
    write_matrix(src, rng.standard_normal((3, 2)))
    assert main(["matio", "info", src]) == 0
    assert "3x2" in capsys.readouterr().out
    assert main(["matio", "convert", src, dst]) == 0
    assert np.array_equal(read_matrix(dst), read_matrix(src))
    assert main(["matio", "info", str(tmp_path / "missing.gfbm")]) == 2


# --- config files -----------------------------------------------------------

def test_parse_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("problem = builtin-1d\nlambda_sched = 1.0\n")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(str(path))


def test_parse_config_relaxation_list(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("problem = builtin-1d\nlambda = 0.8,0.9,1.0\n")
    cfg = parse_config(str(path))
    assert cfg.relaxation == [0.8, 0.9, 1.0]


def test_parse_config_requires_known_problem(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("gamma = 1.0\n")
    with pytest.raises(ConfigError, match="problem"):
        parse_config(str(path))


# --- solve ---------------------------------------------------------------------

def test_solve_builtin_converges(tmp_path):
    out = tmp_path / "out"
    cfg = write_cfg(tmp_path, BUILTIN_CFG, out=out)
    assert main(["solve", cfg]) == 0
    trace = read_trace_csv(str(out / "iterations.csv"))
    assert trace["g_residual"][-1] <= 1e-10
    assert (out / "summary.txt").exists()


def test_solve_malformed_config_leaves_no_outputs(tmp_path):
    out = tmp_path / "never"
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(f"problem = builtin-1d\nbogus = 1\noutput_dir = {out}\n")
    assert main(["solve", str(cfg)]) == 2
    assert not out.exists()


def test_solve_invalid_schedule_exits_2(tmp_path):
    out = tmp_path / "never"
    cfg = tmp_path / "c.cfg"
    cfg.write_text(
        f"problem = builtin-1d\nlambda = 1.2\nmode = ergodic\noutput_dir = {out}\n"
    )
    assert main(["solve", str(cfg)]) == 2
    assert not out.exists()


def test_solve_is_deterministic(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    cfg_a = write_cfg(tmp_path, PCP_CFG, name="a.cfg", out=out_a)
    cfg_b = write_cfg(tmp_path, PCP_CFG, name="b.cfg", out=out_b)
    assert main(["solve", cfg_a]) == 0
    assert main(["solve", cfg_b]) == 0
    bytes_a = (out_a / "iterations.csv").read_bytes()
    bytes_b = (out_b / "iterations.csv").read_bytes()
    assert bytes_a == bytes_b


def test_solve_with_rates_summary(tmp_path):
    out = tmp_path / "out"
    cfg = tmp_path / "c.cfg"
    cfg.write_text(BUILTIN_CFG.format(out=out) + "rates = true\n")
    assert main(["solve", str(cfg)]) == 0
    summary = (out / "summary.txt").read_text()
    assert "d0 = 1.0" in summary


def test_solve_numerical_failure_exit_code(tmp_path, monkeypatch):
    def boom(problem, config, callback=None):
        raise NumericalFailure(3, "synthetic failure")

    monkeypatch.setattr(cli, "run", boom)
    cfg = write_cfg(tmp_path, BUILTIN_CFG, out=tmp_path / "x")
    assert main(["solve", cfg]) == 3


# --- verify ----------------------------------------------------------------------

def run_solve(tmp_path, template, **kw):
    out = tmp_path / "run"
    cfg = write_cfg(tmp_path, template, out=out, **kw)
    assert main(["solve", cfg]) == 0
    return out, cfg


def test_verify_clean_trace_passes(tmp_path):
    out, cfg = run_solve(tmp_path, PCP_CFG)
    vout = tmp_path / "verify"
    assert main(["verify", str(out / "iterations.csv"), cfg, "-o", str(vout)]) == 0
    violations = (vout / "violations.csv").read_text().strip().splitlines()
    assert violations == ["k,quantity,observed,bound"]
    bounds = (vout / "bounds.csv").read_text().splitlines()
    assert bounds[0] == ",".join(cli.BOUNDS_COLUMNS)
    assert (vout / "plot_bounds.py").exists()
    # certificate curves are the residual curves scaled by 1/gamma
    import csv

    rows = list(csv.DictReader(open(vout / "bounds.csv")))
    for row in rows[:10]:
        assert float(row["bound_certificate_pw"]) == pytest.approx(
            float(row["bound_pointwise"]) / 1.0, rel=1e-12)


def test_verify_flags_tampered_trace(tmp_path):
    out, cfg = run_solve(tmp_path, PCP_CFG)
    trace_path = out / "iterations.csv"
    lines = trace_path.read_text().splitlines()
    header = lines[0].split(",")
    idx = header.index("e_norm")
    tampered = [lines[0]]
    for line in lines[1:]:
        parts = line.split(",")
        parts[idx] = repr(float(parts[idx]) * 10.0)
        tampered.append(",".join(parts))
    trace_path.write_text("\n".join(tampered) + "\n")
    vout = tmp_path / "verify"
    assert main(["verify", str(trace_path), cfg, "-o", str(vout)]) == 1
    body = (vout / "violations.csv").read_text().strip().splitlines()
    assert len(body) > 1


def test_verify_ergodic_run_passes(tmp_path):
    template = PCP_CFG.replace("lambda = 1.0", "lambda = 0.5").replace(
        "mode = pointwise", "mode = ergodic")
    out, cfg = run_solve(tmp_path, template)
    vout = tmp_path / "verify"
    assert main(["verify", str(out / "iterations.csv"), cfg, "-o", str(vout)]) == 0
    import csv

    rows = list(csv.DictReader(open(vout / "bounds.csv")))
    assert not np.isnan(float(rows[0]["bound_ergodic"]))


def test_verify_regime_mismatch_exits_2(tmp_path):
    out, _ = run_solve(tmp_path, PCP_CFG)
    bad_cfg = tmp_path / "bad.cfg"
    bad_cfg.write_text(PCP_CFG.format(out=out).replace(
        "mode = pointwise", "mode = ergodic"))
    assert main(["verify", str(out / "iterations.csv"), str(bad_cfg)]) == 2


# --- pcp -------------------------------------------------------------------------

def test_pcp_command_writes_components(tmp_path):
    out = tmp_path / "pcp"
    code = main(["pcp", "--rows", "16", "--cols", "12", "--rank", "2",
                 "--sparse-frac", "0.05", "--noise-std", "0.0", "--seed", "3",
                 "--max-iters", "120", "-o", str(out)])
    assert code == 0
    for name in ("M", "XL0", "XS0", "N", "XL", "XS"):
        assert (out / f"{name}.gfbm").exists()
    trace = read_trace_csv(str(out / "iterations.csv"))
    assert np.all(np.diff(trace["objective"][5:]) <= 1e-9)
    summary = (out / "pcp_summary.txt").read_text()
    assert "rel_err_low_rank" in summary


def test_pcp_command_rejects_bad_rank(tmp_path):
    assert main(["pcp", "--rows", "4", "--cols", "4", "--rank", "9",
                 "-o", str(tmp_path / "x")]) == 2


def test_pcp_degenerate_noise_only(tmp_path):
    out = tmp_path / "noise"
    code = main(["pcp", "--rows", "10", "--cols", "8", "--rank", "0",
                 "--sparse-frac", "0.0", "--noise-std", "0.05", "--seed", "2",
                 "--mu2", "5.0", "--max-iters", "150", "-o", str(out)])
    assert code == 0
    x_low = read_matrix(str(out / "XL.gfbm"))
    assert np.max(np.abs(x_low)) <= 1e-6  # strong penalty keeps it at zero


def test_pcp_command_deterministic(tmp_path):
    args = ["pcp", "--rows", "10", "--cols", "8", "--seed", "11",
            "--max-iters", "40"]
    assert main(args + ["-o", str(tmp_path / "r1")]) == 0
    assert main(args + ["-o", str(tmp_path / "r2")]) == 0
    for name in ("M.gfbm", "XL.gfbm", "iterations.csv"):
        assert (tmp_path / "r1" / name).read_bytes() == \
            (tmp_path / "r2" / name).read_bytes()
