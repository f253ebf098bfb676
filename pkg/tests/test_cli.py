import csv
import io
import json

import pytest

from markov_cheb.cli import main

SMALL = """
[experiment]
N = 20
seeds = [1, 2]
checkpoints = [1, 20]
k_targets = [13]
k_range = [13, 16]
"""


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return str(path)


def table(text: str) -> list[list[str]]:
    return list(csv.reader(io.StringIO(text)))


def kv(text: str) -> dict:
    return {k: v for k, v in table(text)[1:]}


def test_approx_cubic(capsys):
    assert main(["approx", "--k", "4", "--t", "3"]) == 0
    out = kv(capsys.readouterr().out)
    assert float(out["alpha_1"]) == pytest.approx(0.75, abs=1e-9)
    assert float(out["sup_error"]) == pytest.approx(0.25, abs=1e-9)
    assert out["method"] == "remez"


def test_approx_truncation_method(capsys):
    assert main(["approx", "--k", "13", "--t", "12", "--rho", "0.95", "--method", "cheb-trunc", "--cm", "6"]) == 0
    out = kv(capsys.readouterr().out)
    assert "theorem1_bound" in out


def test_regapprox(capsys):
    assert main(["regapprox", "--k", "4", "--t", "3", "--gamma", "0.1"]) == 0
    out = kv(capsys.readouterr().out)
    assert out["solver_status"] == "converged"
    assert float(out["objective"]) == pytest.approx(0.11875, rel=1e-6)


def test_regapprox_gamma_from(capsys):
    assert main(["regapprox", "--k", "13", "--t", "12", "--rho", "0.95", "--gamma-from", "0.36,6,1000"]) == 0
    assert float(kv(capsys.readouterr().out)["gamma"]) == pytest.approx(1e-5)


def test_regapprox_needs_gamma(capsys):
    assert main(["regapprox", "--k", "4", "--t", "3"]) == 2
    assert "config error" in capsys.readouterr().err


def test_fig1_writes_csv_meta_and_summary(cfg, tmp_path):
    out = tmp_path / "fig1.csv"
    assert main(["fig1", "--config", cfg, "--out", str(out)]) == 0
    rows = table(out.read_text())
    assert rows[0][0] == "method" and len(rows) == 1 + 2 * (3 * 2 + 1)
    meta = json.loads((tmp_path / "fig1.meta.json").read_text())
    assert meta["checkpoints"] == [1, 20]
    summ = table((tmp_path / "fig1.summary.csv").read_text())
    assert summ[0][:4] == ["method", "episode_count", "k", "seeds"]
    assert all(r[3] == "2" for r in summ[1:])


def test_seeds_override(cfg, capsys):
    assert main(["fig1", "--config", cfg, "--seeds", "5"]) == 0
    rows = table(capsys.readouterr().out)[1:]
    assert {r[1] for r in rows} == {"5"}


def test_fig2(cfg, capsys):
    assert main(["fig2", "--config", cfg, "--seeds", "1"]) == 0
    rows = table(capsys.readouterr().out)[1:]
    assert {int(r[3]) for r in rows} == {13, 14, 15, 16}


def test_identify_range(cfg, capsys):
    assert main(["identify", "--config", cfg, "--k", "11-14"]) == 0
    rows = table(capsys.readouterr().out)
    assert rows[0] == ["k", "H_true", "H_hat", "abs_error", "bound"]
    assert [int(r[0]) for r in rows[1:]] == [11, 12, 13, 14]


@pytest.mark.parametrize("method", ["ho-kalman", "truncation"])
def test_baseline(cfg, capsys, method):
    assert main(["baseline", "--config", cfg, "--k", "13", "--method", method]) == 0
    rows = table(capsys.readouterr().out)
    assert len(rows) == 2 and rows[1][0] == "13"
    if method == "truncation":
        assert float(rows[1][2]) == 0.0


def test_bounds_exit_codes(tmp_path):
    ok = tmp_path / "ok.toml"
    ok.write_text("[bounds]\nn_systems = 3\nk_max = 20\nmc_systems = 0\nvariant = 'corrected'\n")
    assert main(["bounds", "--config", str(ok), "--out", str(tmp_path / "b.csv")]) == 0
    assert table((tmp_path / "b.csv").read_text())[0][0] == "check"
    bad = tmp_path / "bad.toml"
    bad.write_text("[bounds]\nn_systems = 3\nk_max = 20\nmc_systems = 0\nc_m_scale = 1e-6\n")
    assert main(["bounds", "--config", str(bad), "--out", str(tmp_path / "c.csv")]) == 1


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[experiment]\nT = 0\n")
    assert main(["fig1", "--config", str(bad)]) == 2
    assert main(["fig1", "--config", str(tmp_path / "missing.toml")]) == 2
    assert main(["identify", "--k", "x-y"]) == 2
    assert main(["fig1", "--seeds", "a,b"]) == 2


def test_invalid_problem_exit_code(capsys):
    assert main(["approx", "--k", "0", "--t", "3"]) == 2


def test_solver_error_exit_code(monkeypatch, capsys):
    from markov_cheb import cli
    from markov_cheb.chebyshev import RemezConvergenceError

    def fail(prob):
        raise RemezConvergenceError("no convergence", None)

    monkeypatch.setattr(cli, "remez_minimax", fail)
    assert main(["approx", "--k", "13", "--t", "12"]) == 3
    assert "solver error" in capsys.readouterr().err
