import csv
import json

import pytest

from ammfg import cli
from ammfg.config import parse_config, parse_text
from ammfg.errors import AdmissibilityError, ConfigError

SMALL = """
[pool]
k = 100
x0 = 10
eps0 = 1

[control]
a_min = -1
a_max = 1

[cost]
family = quadratic
phi_h = 0.1
phi_l = 1   # terminal penalty

[noise]
sigma = 0.5

[time]
horizon = 1
steps = 50

[grid]
x_lo = -10
x_hi = 10
n_x = 101

[law0]
family = gaussian
sd = 1

[mfg]
particles = 4000
verify_paths = 2000

[game]
n = 3
n_paths = 600
n_c = 11

[sweep]
n_list = 2, 4
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def test_defaults_resolved():
    cfg = parse_text(SMALL)
    assert cfg.pool.sigma0 == 0.0
    assert cfg.mfg.max_iter == 50 and cfg.mfg.damping == 0.5
    assert cfg.mfg.tolerance(cfg.control) == pytest.approx(2e-3)
    assert cfg.game.seed == 0 and cfg.game.y0 == 0.0
    assert cfg.n_list == (2, 4)
    assert cfg.law0.mean == 0.0


def test_echo_round_trip(configs_dir):
    for name in ("symmetric.cfg", "linear_terminal.cfg"):
        cfg = parse_config(configs_dir / name)
        echo = cfg.to_text()
        again = parse_text(echo)
        assert again == cfg
        assert again.to_text() == echo


def test_default_grid_is_materialised():
    text = SMALL.replace("x_lo = -10\nx_hi = 10\n", "")
    cfg = parse_text(text)
    assert cfg.grid.x_lo == pytest.approx(-10.0)
    assert parse_text(cfg.to_text()).grid == cfg.grid


def test_init_qbar_checked():
    assert parse_text(SMALL.replace("[mfg]", "[mfg]\ninit_qbar = 0.5")).init_qbar == 0.5
    with pytest.raises(ConfigError, match="init_qbar"):
        parse_text(SMALL.replace("[mfg]", "[mfg]\ninit_qbar = 2"))


def test_missing_required_key_is_named():
    with pytest.raises(ConfigError, match=r"pool\.k"):
        parse_text(SMALL.replace("k = 100\n", ""))


def test_unknown_key_rejected_with_line():
    with pytest.raises(ConfigError, match=r"line 6: unknown key pool\.spread"):
        parse_text(SMALL.replace("eps0 = 1\n", "eps0 = 1\nspread = 3\n"))


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match=r"unknown section \[plot\]"):
        parse_text(SMALL + "\n[plot]\ndpi = 3\n")


def test_syntax_error_reports_line():
    with pytest.raises(ConfigError, match="line 4"):
        parse_text(SMALL.replace("x0 = 10", "x0 10"))
    with pytest.raises(ConfigError, match="line 1"):
        parse_text("k = 1\n")


def test_bad_value_reports_line():
    with pytest.raises(ConfigError, match=r"line 21: bad value for time\.steps"):
        parse_text(SMALL.replace("steps = 50", "steps = 2.5"))


def test_admissibility_quoted():
    text = SMALL.replace("a_min = -1\na_max = 1", "a_min = -4\na_max = 4").replace(
        "horizon = 1\nsteps = 50", "horizon = 3\nsteps = 150")
    with pytest.raises(AdmissibilityError, match="4 ≥ \\(10−1\\)/3 = 3"):
        parse_text(text)


def test_growth_violation():
    with pytest.raises(AdmissibilityError, match="growth bound"):
        parse_text(SMALL.replace("phi_l = 1", "phi_l = 1\nc1 = 0.1"))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "nope.cfg")


def run(args, capsys=None):
    return cli.main([str(a) for a in args])


def test_validate_writes_manifest_only(small_cfg, tmp_path):
    out = tmp_path / "v"
    assert run(["validate", "--config", small_cfg, "--out", out]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json"]
    m = json.loads((out / "manifest.json").read_text())
    assert m["subcommand"] == "validate" and m["status"] == 0
    assert len(m["config_sha256"]) == 64
    assert parse_text(m["config"]) == parse_text(SMALL)


def test_unknown_subcommand_is_usage_error(small_cfg, tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(["solve", "--config", small_cfg, "--out", tmp_path])
    assert exc.value.code == 2


@pytest.mark.parametrize("edit,code,category", [
    (("k = 100", "k = 100\nbogus = 1"), 2, "config"),
    (("a_max = 1", "a_max = 9.5"), 3, "admissibility"),
    (("steps = 50", "steps = 5"), 4, "numerical"),
])
def test_error_exit_codes(tmp_path, capsys, edit, code, category):
    p = tmp_path / "bad.cfg"
    p.write_text(SMALL.replace(*edit))
    out = tmp_path / "o"
    assert run(["hjb", "--config", p, "--out", out]) == code
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith(f"ammfg: error category={category}:")
    assert not out.exists() or not any(out.iterdir())


def test_non_convergence_keeps_files(small_cfg, tmp_path, capsys):
    p = tmp_path / "slow.cfg"
    p.write_text(SMALL.replace("particles = 4000", "particles = 4000\nmax_iter = 2"))
    out = tmp_path / "o"
    assert run(["mfg", "--config", p, "--out", out]) == 5
    assert (out / "mfg_summary.csv").exists()
    assert "category=convergence" in capsys.readouterr().err


def test_hjb_output_schema(small_cfg, tmp_path):
    out = tmp_path / "h"
    assert run(["hjb", "--config", small_cfg, "--out", out]) == 0
    rows = list(csv.reader((out / "value_surface.csv").open()))
    assert rows[0] == ["t", "x", "V", "dVdx", "policy"]
    assert len(rows) == 1 + 51 * 101


def test_mfg_output_schema(small_cfg, tmp_path):
    out = tmp_path / "m"
    assert run(["mfg", "--config", small_cfg, "--out", out]) == 0
    flow = list(csv.reader((out / "mfg_flow.csv").open()))
    summary = list(csv.reader((out / "mfg_summary.csv").open()))
    assert flow[0] == ["iter", "t", "qbar", "w_min", "w_zero", "w_max", "residual"]
    assert summary[0] == ["iter", "residual", "best_response_gap"]
    iters = len(summary) - 1
    assert len(flow) - 1 == iters * 51
    assert all(r[2] == "" for r in summary[1:-1])
    assert summary[-1][2] != ""
    # 17 significant digits round-trip
    for r in flow[1:50]:
        assert float(r[2]) == float(f"{float(r[2]):.17g}")


def test_game_and_sweep_outputs(small_cfg, tmp_path):
    out = tmp_path / "g"
    assert run(["game", "--config", small_cfg, "--out", out]) == 0
    rows = list(csv.reader((out / "game_summary.csv").open()))
    assert rows[0] == ["player", "j_hat", "se"] and len(rows) == 4
    out = tmp_path / "s"
    assert run(["nash-sweep", "--config", small_cfg, "--out", out]) == 0
    rows = list(csv.reader((out / "epsilon.csv").open()))
    assert rows[0] == ["n", "eps_hat", "ci_lo", "ci_hi", "paths"]
    assert [r[0] for r in rows[1:]] == ["2", "4"]


@pytest.mark.parametrize("sub,files", [
    ("hjb", ["value_surface.csv"]),
    ("mfg", ["mfg_flow.csv", "mfg_summary.csv"]),
    ("game", ["game_summary.csv"]),
    ("nash-sweep", ["epsilon.csv"]),
])
def test_byte_identical_across_threads(small_cfg, tmp_path, sub, files):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run([sub, "--config", small_cfg, "--out", a, "--threads", 1, "--seed", 7]) == 0
    assert run([sub, "--config", small_cfg, "--out", b, "--threads", 3, "--seed", 7]) == 0
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_seed_override_changes_monte_carlo(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(["game", "--config", small_cfg, "--out", a, "--seed", 1])
    run(["game", "--config", small_cfg, "--out", b, "--seed", 2])
    assert (a / "game_summary.csv").read_bytes() != (b / "game_summary.csv").read_bytes()
    m = json.loads((a / "manifest.json").read_text())
    assert m["seeds"] == {"mfg": 1, "game": 1}
