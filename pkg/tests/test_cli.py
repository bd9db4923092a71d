import json
import os

import pytest

from fsifem import cli


def run_cli(args, monkeypatch=None, env=None):
    if monkeypatch is not None and env is not None:
        for key, value in env.items():
            monkeypatch.setenv(key, value)
    return cli.main(args)


def test_requires_mode(capsys):
    assert cli.main([]) == 2
    assert "mode" in capsys.readouterr().err


def test_rejects_unknown_mode():
    with pytest.raises(SystemExit) as err:
        cli.main(["--mode", "interpretive-dance"])
    assert err.value.code == 2


def test_rejects_bad_levels(capsys):
    assert cli.main(["--mode", "convergence", "--levels", "2,1"]) == 2
    assert "ascending" in capsys.readouterr().err


def test_rejects_bad_lambda(capsys):
    assert cli.main(["--mode", "resolvent", "--lambda", "-2"]) == 2
    assert "lambda" in capsys.readouterr().err


def test_convergence_mode_writes_tables(tmp_path, capsys):
    code = cli.main(["--mode", "convergence", "--levels", "0,1",
                     "--out", str(tmp_path)])
    assert code == 0
    conv = (tmp_path / "convergence.csv").read_text().splitlines()
    rates = (tmp_path / "rates.csv").read_text().splitlines()
    assert len(conv) == 1 + 2          # header + one row per level
    assert len(rates) == 1 + 1         # header + one adjacent pair
    assert conv[0].startswith("elements,hypotenuse,fluid_h1,pressure_l2,solid_h1")
    out = capsys.readouterr().out
    assert "rates" in out


def test_resolvent_mode_exports_state(tmp_path):
    code = cli.main(["--mode", "resolvent", "--levels", "0", "--out", str(tmp_path)])
    assert code == 0
    for name in ("state_u.csv", "state_w.csv", "state_z.csv", "pressure.csv"):
        lines = (tmp_path / name).read_text().splitlines()
        assert lines[0] == "dof_id,value"
        assert len(lines) > 1
    report = json.loads((tmp_path / "domain_conditions.json").read_text())
    assert report["conditions"]["A2_gamma_f_zero"]["passed"]
    assert report["data_identity_residual"] <= 1e-12


def test_infsup_mode(tmp_path, capsys):
    code = cli.main(["--mode", "infsup", "--levels", "0,1", "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "infsup.csv").read_text().splitlines()
    assert lines[0] == "level,hypotenuse,beta_h"
    betas = [float(line.split(",")[2]) for line in lines[1:]]
    assert len(betas) == 2 and all(b > 0 for b in betas)


def test_evolve_mode_trace(tmp_path):
    code = cli.main(["--mode", "evolve", "--levels", "0", "--t-final", "0.2",
                     "--steps", "10", "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "energy_trace.csv").read_text().splitlines()
    assert lines[0] == ("step,time,E_total,E_fluid,E_solid_potential,"
                        "E_solid_kinetic,dissipation")
    assert len(lines) == 1 + 11        # initial row + 10 steps


def test_certify_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["--mode", "certify", "--seed", "7", "--out", str(out1)]) == 0
    assert cli.main(["--mode", "certify", "--seed", "7", "--out", str(out2)]) == 0
    assert (out1 / "certify.txt").read_bytes() == (out2 / "certify.txt").read_bytes()


def test_config_file_with_flag_override(tmp_path):
    config = tmp_path / "study.cfg"
    config.write_text("mode = infsup\nlevels = 0,1\nlambda = 2.0\n# comment\n")
    out = tmp_path / "out"
    code = cli.main(["--config", str(config), "--levels", "0", "--out", str(out)])
    assert code == 0
    lines = (out / "infsup.csv").read_text().splitlines()
    assert len(lines) == 2             # flag --levels 0 overrides the file


def test_env_var_out_dir(tmp_path, monkeypatch):
    target = tmp_path / "from_env"
    monkeypatch.setenv("FSI_OUT_DIR", str(target))
    code = cli.main(["--mode", "infsup", "--levels", "0"])
    assert code == 0
    assert (target / "infsup.csv").exists()


def test_missing_config_file(capsys):
    assert cli.main(["--config", "/nonexistent/path.cfg"]) == 2
    assert "config" in capsys.readouterr().err


def test_build_config_defaults():
    cfg = cli.build_config(["--mode", "convergence"])
    assert cfg.levels == [0, 1, 2, 3]
    assert cfg.shift == 1.0
    assert cfg.seed == 0
