import json
import subprocess
import sys
import textwrap

import pytest

from clthermal import cli, io
from clthermal.config import load_scenario

SMALL = textwrap.dedent(
    """
    seed = 3

    [params]
    gamma = 1.0
    omega = {omega}
    temperature = 1.0
    cutoff = {cutoff}

    [initial]
    moments = {{ mean_q = 0.3, mean_p = -0.4, var_q = 1.0, var_p = 1.0, cov_qp = 0.2 }}

    [schedule]
    start = 0.0
    stop = 2.0
    num = 5
    unit = "1/gamma"

    [outputs]
    moments = true
    elements = {{ basis = "{basis}", coords = [-1.0, 0.0, 1.0] }}
    offdiag = [[0.0, 1.0]]
    fits = true
    field = true

    [oracle]
    gamma_times = [0.1, 0.2]
    n = 65
    tolerance = 1e-3
    """
)


def _write(tmp_path, omega=1.5, cutoff=1e3, basis="position", name="s.toml"):
    path = tmp_path / name
    path.write_text(SMALL.format(omega=omega, cutoff=cutoff, basis=basis))
    return path


def test_evolve_writes_outputs_and_is_reproducible(tmp_path, capsys):
    cfg = _write(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["evolve", "--config", str(cfg), "--out", str(out1)]) == 0
    assert cli.main(["evolve", "--config", str(cfg), "--out", str(out2)]) == 0
    for name in ("moments.csv", "elements.csv", "offdiag.csv", "fits.csv", "manifest.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    rows = io.read_csv(out1 / "moments.csv")
    assert list(rows[0]) == list(io.MOMENTS_COLUMNS)
    assert len(rows) == 5
    assert float(rows[0]["mean_q"]) == pytest.approx(0.3)
    el = io.read_csv(out1 / "elements.csv")
    assert len(el) == 5 * 9 and el[0]["basis"] == "position"
    manifest = json.loads((out1 / "manifest.json").read_text())
    hashes = {e["file"]: e["sha256"] for e in manifest["files"]}
    assert hashes["moments.csv"] == io.sha256(out1 / "moments.csv")
    assert manifest["command"] == "evolve"


def test_validate_config_warns_at_cutoff_equal_gamma(tmp_path, capsys):
    cfg = _write(tmp_path, cutoff=1.0)
    assert cli.main(["validate-config", "--config", str(cfg)]) == 0
    text = capsys.readouterr().out
    assert "r1=1" in text
    assert "config OK" in text


@pytest.mark.parametrize(
    "body",
    [
        "[params]\ngamma = -1.0\n[initial]\npreset = 'ground'\n[schedule]\ntimes = [0.0]\n",
        "[params]\ngamma = 1.0\n[initial]\npreset = 'ground'\nmoments = {}\n[schedule]\ntimes = [0.0]\n",
        "[params]\ngamma = 1.0\n[initial]\npreset = 'ground'\n[schedule]\ntimes = [1.0, 0.5]\n",
        "[params]\ngamma = 1.0\n[initial]\nmoments = { var_q = 0.1, var_p = 0.1 }\n[schedule]\ntimes = [0.0]\n",
        "[params\n",
    ],
)
def test_bad_configs_exit_2(tmp_path, body, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(body)
    assert cli.main(["validate-config", "--config", str(cfg)]) == 2
    assert cli.main(["validate-config", "--config", str(tmp_path / "missing.toml")]) == 2
    assert cli.main(["bogus-command"]) == 2


def test_seed_override_changes_random_state(tmp_path):
    cfg = tmp_path / "r.toml"
    cfg.write_text("seed = 1\n[params]\ngamma = 1.0\n[initial]\npreset = 'random'\n[schedule]\ntimes = [0.0]\n")
    a = load_scenario(cfg).initial
    assert load_scenario(cfg).initial == a
    ns = cli.build_parser().parse_args(["evolve", "--config", str(cfg), "--seed", "2"])
    assert cli._scenario(ns).initial != a


def test_sweep_matches_serial_and_parallel(tmp_path, capsys):
    cfg = _write(tmp_path, omega=0.3)
    args = ["sweep", "--config", str(cfg), "--param", "omega", "--values", "0.5g,g,2g,3"]
    assert cli.main(args + ["--out", str(tmp_path / "s1")]) == 0
    text = capsys.readouterr().out
    assert text.count("PASS") == 4
    assert cli.main(args + ["--out", str(tmp_path / "s2"), "--threads", "2"]) == 0
    assert (tmp_path / "s1" / "fits.csv").read_bytes() == (tmp_path / "s2" / "fits.csv").read_bytes()
    assert not (tmp_path / "s1" / ".staging").exists()


def test_parse_value_list():
    assert cli.parse_value_list("0, 0.5γ, g, 2gamma, 1.5", 0.2) == pytest.approx([0.0, 0.1, 0.2, 0.4, 1.5])


def test_limits_and_equilibrium_on_presets(tmp_path, capsys):
    assert cli.main(["limits"]) == 0
    assert "all limit checks passed" in capsys.readouterr().out
    assert cli.main(["equilibrium", "--config", "ho_underdamped", "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "distance" in text and (tmp_path / "fits.csv").exists()


def test_oracle_compare_small_grid(tmp_path, capsys):
    cfg = _write(tmp_path)
    assert cli.main(["oracle-compare", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = io.read_csv(tmp_path / "oracle.csv")
    assert [float(r["gamma_t"]) for r in rows] == [0.1, 0.2]
    assert all(float(r["rel_error"]) < 1e-3 for r in rows)
    assert len(io.read_csv(tmp_path / "field.csv")) == 65 * 65


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "clthermal", "validate-config", "--config", "free_thermalization"],
                         capture_output=True, text=True, cwd=tmp_path)
    assert res.returncode == 0, res.stderr
    assert "config OK" in res.stdout
