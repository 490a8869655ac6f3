import re
import subprocess
import sys

import pytest

from diffgame import kernels
from diffgame.cli import EXIT_CONFIG, EXIT_OK, EXIT_PRECONDITION, EXIT_VIOLATION, main, parse_u_control
from diffgame.errors import InvalidActionError
from diffgame.games import get_benchmark


def _numbers(text, *keys):
    return [float(re.search(rf"{k}=(\S+)", text).group(1)) for k in keys]


def test_solve_pursuit(capsys, tmp_path):
    cache = tmp_path / "pl"
    assert main(["solve", "--game", "pursuit-line", "--slices", "100", "--nodes", "201", "--cache", str(cache)]) == EXIT_OK
    lower, upper, gap = _numbers(capsys.readouterr().out, "lower", "upper", "gap")
    assert lower == pytest.approx(0.5, abs=2e-2) and upper == pytest.approx(0.5, abs=2e-2)
    assert abs(gap) <= 1e-10
    assert (tmp_path / "pl.lower.txt").is_file() and (tmp_path / "pl.upper.txt").is_file()


def test_solve_sum(capsys):
    assert main(["solve", "--game", "sum"]) == EXIT_OK
    (lower,) = _numbers(capsys.readouterr().out, "lower")
    assert lower == pytest.approx(0.0, abs=2e-2)


def test_missing_game_file_exits_2(capsys, tmp_path):
    path = tmp_path / "nope.toml"
    assert main(["solve", "--game", str(path)]) == EXIT_CONFIG
    assert str(path) in capsys.readouterr().err


def test_bad_arguments_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["verify", "nonsense", "--game", "sum"])
    assert info.value.code == EXIT_CONFIG


def test_simulate_pursuit_push(capsys, tmp_path):
    traj = tmp_path / "traj.csv"
    cache = tmp_path / "v.txt"
    args = ["simulate", "--game", "pursuit-line", "--u-control", "const:1", "--out", str(traj), "--value-cache", str(cache)]
    assert main(args) == EXIT_OK
    payoff, bound, C = _numbers(capsys.readouterr().out, "payoff", "bound", "C")
    assert C == pytest.approx(13.445, abs=1e-3)
    assert payoff <= 0.5 + C * 0.1 and payoff <= bound
    lines = traj.read_text().splitlines()
    assert lines[0] == "t,x0,u0,v0" and len(lines) > 100
    assert cache.is_file()
    # a second run reuses the cache and reproduces the output
    assert main(args) == EXIT_OK
    assert _numbers(capsys.readouterr().out, "payoff") == [payoff]


def test_simulate_zero_game(capsys):
    assert main(["simulate", "--game", "zero", "--u-control", "const:-1"]) == EXIT_OK
    (payoff,) = _numbers(capsys.readouterr().out, "payoff")
    assert payoff == 0.0


def test_simulate_control_file(capsys, tmp_path):
    ctrl = tmp_path / "u.csv"
    ctrl.write_text("t_start,t_end,u\n0,0.5,1\n0.5,1,-1\n")
    assert main(["simulate", "--game", "pursuit-line", "--u-control", str(ctrl)]) == EXIT_OK


def test_wrong_horizon_control_file(capsys, tmp_path):
    ctrl = tmp_path / "u.csv"
    ctrl.write_text("t_start,t_end,u\n0,0.5,1\n0.5,0.9,-1\n")
    assert main(["simulate", "--game", "pursuit-line", "--u-control", str(ctrl)]) == EXIT_CONFIG
    assert "0.9" in capsys.readouterr().err


def test_control_parser_rejects_unknown_actions(capsys):
    u_set = get_benchmark("pursuit-line").dyn.u_set
    with pytest.raises(InvalidActionError):
        parse_u_control("const:0.33", 0.0, 1.0, u_set)
    assert main(["simulate", "--game", "pursuit-line", "--u-control", "const:0.33"]) == EXIT_CONFIG


def test_verify_lemma1_exits_0(capsys):
    assert main(["verify", "lemma1", "--game", "pursuit-line", "--trials", "1000"]) == EXIT_OK
    assert "0 violations" in capsys.readouterr().out


def test_coupled_game_is_refused(capsys):
    assert main(["verify", "lemma1", "--game", "coupled-uv"]) == EXIT_PRECONDITION
    assert "Isaacs" in capsys.readouterr().err


def test_convergence_prints_exponent(capsys, tmp_path):
    out = tmp_path / "conv.json"
    args = ["verify", "convergence", "--game", "pursuit-line", "--meshes", "1e-1,1e-2,1e-3", "--random-controls", "10"]
    assert main(args + ["--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    p = float(re.search(r"fitted exponent p=(\S+)", text).group(1))
    assert p >= 0.5 and out.is_file()


def test_reports_are_byte_identical(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    csvs = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for path, table in zip(paths, csvs):
        args = ["--seed", "99", "verify", "corollary1", "--game", "sum", "--partitions", "10,100", "--trials", "20"]
        assert main(args + ["--out", str(path), "--csv", str(table)]) == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert csvs[0].read_bytes() == csvs[1].read_bytes()


def test_seed_after_subcommand(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["--seed", "5", "verify", "lemma1", "--game", "sum", "--trials", "10", "--out", str(a)])
    main(["verify", "lemma1", "--game", "sum", "--trials", "10", "--seed", "5", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_gap_command(capsys):
    assert main(["gap", "--game", "coupled-uv", "--samples", "1000"]) == EXIT_OK
    assert "flagged" in capsys.readouterr().out


def test_backend_flag():
    before = kernels.active_backend()
    try:
        assert main(["--backend", "numpy", "solve", "--game", "zero"]) == EXIT_OK
        assert kernels.active_backend() == "numpy"
    finally:
        kernels.use_backend(before)


def test_affine_toml_config(capsys, tmp_path):
    cfg = tmp_path / "game.toml"
    cfg.write_text(
        'name = "drift"\n'
        "[dynamics]\n"
        "M = [[0.0]]\nBu = [[1.0]]\nBv = [[-1.0]]\nb = [0.0]\n"
        'u = "interval(-1, 1, 21)"\nv = "interval(-0.5, 0.5, 21)"\n'
        "box = [[-3.0], [3.0]]\n"
        "[initial]\nx0 = [0.0]\ncore = [[-0.5], [0.5]]\n"
    )
    assert main(["solve", "--game", str(cfg)]) == EXIT_OK
    (lower,) = _numbers(capsys.readouterr().out, "lower")
    assert lower == pytest.approx(0.5, abs=2e-2)


def test_builtin_toml_with_running_payoff(capsys, tmp_path):
    cfg = tmp_path / "bolza.toml"
    cfg.write_text(
        'builtin = "pursuit-line"\n'
        '[payoff]\nkind = "linear"\ncoef = [1.0]\ngamma = { kind = "constant", value = 1.0 }\n'
        "[grid]\nnodes = 41\nslices = 20\n"
    )
    assert main(["solve", "--game", str(cfg)]) == EXIT_OK
    (lower,) = _numbers(capsys.readouterr().out, "lower")
    # terminal x plus one unit of running payoff
    assert lower == pytest.approx(1.5, abs=5e-2)


def test_invalid_toml_exits_2(capsys, tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("builtin = \n")
    assert main(["solve", "--game", str(cfg)]) == EXIT_CONFIG


def test_installed_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "diffgame.cli", "solve", "--game", "zero"], capture_output=True, text=True, check=False
    )
    assert out.returncode == 0 and "lower=" in out.stdout
