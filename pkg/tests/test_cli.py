import json

import numpy as np
import pytest

from eplab import cli
from eplab.cli import ConfigError, main, parse_config
from eplab.evolution import NumericalAbort
from eplab.grid import GridFunction, RadialGrid, load_field, sample_analytic, save_field

SMALL_RUN = """
[grid]
n = 128
extent = 16
[scheme]
t_end = 0.02
cadence = 2
[norms]
jmax = 6
shell_n = 32
"""


def write(tmp_path, text, name="run.ini"):
    (tmp_path / name).write_text(text)
    return name


def test_empty_config_materialises_defaults(tmp_path):
    cfg = parse_config(tmp_path / write(tmp_path, ""))
    assert cfg["eos"] == {"gamma": 1.2, "K": "static", "a": 1.0}
    assert cfg["norms"]["delta"] == -1.2 and cfg["scheme"]["cadence"] == 10


@pytest.mark.parametrize("text, fragment", [
    ("[eos]\ngamma = 1.7\n", "γ must lie in (1, 5/3)"),
    ("[eos]\nK = 1.0\n[norms]\ndelta = -1.3\n", "<= δ < -1/2"),
    ("[norms]\ndelta = -0.5\n", "<= δ < -1/2"),
    ("[norms]\ns = 2.5\n", "s > 5/2"),
    ("[eos]\ngamma = 1.3\nK = 1.0\n[norms]\ns = 3.2\ndelta = -1.0\n", "is not an integer"),
    ("[eos]\ngamma = 1.3\n", "K = static requires γ = 6/5"),
    ("[grid]\nkind = box\nn = 33\n", "box grid n must be even"),
    ("[scheme]\ntail_exponent = 3\n", "tail_exponent must exceed 3"),
    ("[mystery]\nx = 1\n", "unknown section [mystery]"),
    ("[grid]\nresolution = 1\n", "unknown key [grid] resolution"),
    ("[grid]\nn = many\n", "cannot parse"),
])
def test_config_rejections_quote_the_bound(tmp_path, text, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(tmp_path / write(tmp_path, text))
    assert fragment in str(info.value)


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        parse_config(tmp_path / "nope.ini")
    assert main(["--workdir", str(tmp_path), "simulate", "--config", "nope.ini"]) == 2


def test_simulate_writes_outputs_and_reruns_identically(tmp_path, capsys):
    name = write(tmp_path, SMALL_RUN)
    assert main(["--workdir", str(tmp_path), "simulate", "--config", name]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "simulate" and len(manifest["grid_hash"]) == 64
    first = (tmp_path / "diagnostics.csv").read_bytes()
    header = first.decode().splitlines()[0].split(",")
    assert header[:3] == ["t", "mass", "energy"]
    w = load_field(tmp_path / "dumps" / "w_final.bin")
    assert w.geometry == RadialGrid(16.0, 128)

    rerun = tmp_path / "rerun"
    rerun.mkdir()
    (rerun / "m.json").write_text((tmp_path / "manifest.json").read_text())
    assert main(["--workdir", str(rerun), "simulate", "--config", "m.json"]) == 0
    assert (rerun / "diagnostics.csv").read_bytes() == first


def test_config_rejection_exit_code(tmp_path, capsys):
    name = write(tmp_path, "[eos]\ngamma = 2.0\n")
    assert main(["--workdir", str(tmp_path), "simulate", "--config", name]) == 2
    assert "γ must lie in (1, 5/3)" in capsys.readouterr().err


def test_numerical_abort_exit_code_keeps_manifest(tmp_path, monkeypatch):
    def explode(*args, **kwargs):
        raise NumericalAbort("non-finite state at t=0.01 (step 3)")

    monkeypatch.setattr(cli, "run_simulation", explode)
    name = write(tmp_path, SMALL_RUN)
    assert main(["--workdir", str(tmp_path), "simulate", "--config", name]) == 3
    assert (tmp_path / "manifest.json").is_file()


def test_picard_non_contraction_exit_code(tmp_path):
    text = SMALL_RUN + "[picard]\nenabled = true\nT = 0.02\ntol = 1e-14\nmax_iter = 1\n"
    name = write(tmp_path, text)
    assert main(["--workdir", str(tmp_path), "simulate", "--config", name]) == 4
    rows = (tmp_path / "picard.csv").read_text().splitlines()
    assert rows[0] == "iteration,gap,high_norm" and len(rows) == 2


def test_picard_success(tmp_path, capsys):
    text = SMALL_RUN + "[eos]\nK = 1.0\n[picard]\nenabled = true\nT = 0.02\ntol = 1e-8\n"
    name = write(tmp_path, text)
    assert main(["--workdir", str(tmp_path), "simulate", "--config", name]) == 0
    assert "picard iterations=" in capsys.readouterr().out


def test_static_test_single_resolution_omits_ratio(capsys):
    assert main(["static-test", "--resolutions", "128", "--r-max", "16", "--t-end", "0.01"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n,drift,mass_change" and lines[1].startswith("128,")


def test_static_test_two_resolutions_report_order(capsys):
    assert main(["static-test", "--resolutions", "128,256", "--r-max", "16", "--t-end", "0.01"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n,drift,mass_change,ratio,order" and len(lines) == 3


def test_norm_command(tmp_path, capsys):
    u = sample_analytic(lambda r: np.exp(-r * r / 2), RadialGrid(16.0, 512))
    save_field(u, tmp_path / "u.bin")
    assert main(["--workdir", str(tmp_path), "norm", "--field", "u.bin", "--s", "2", "--delta",
                 "-1.2", "--jmax", "5"]) == 0
    out = capsys.readouterr()
    rows = out.out.splitlines()
    assert rows[0] == "j,contribution,cumulative" and len(rows) == 7
    assert out.err.startswith("norm=")


def test_poisson_command(tmp_path, capsys):
    g = RadialGrid(16.0, 512)
    save_field(GridFunction(g, np.exp(-g.r ** 2 / 2)), tmp_path / "rho.bin")
    assert main(["--workdir", str(tmp_path), "poisson", "--density", "rho.bin", "--out", "phi.bin"]) == 0
    assert load_field(tmp_path / "phi.bin").rank == "scalar"
    assert load_field(tmp_path / "phi_grad.bin").rank == "radial-vector"
    assert "residual=" in capsys.readouterr().out


def test_check_ineq_exit_codes(tmp_path, capsys):
    assert main(["check-ineq", "--kind", "power-mass"]) == 2
    assert "delta > 3/[beta] - 3/2" in capsys.readouterr().err
    corpus = tmp_path / "corp"
    corpus.mkdir()
    save_field(sample_analytic(lambda r: np.exp(-r * r / 2), RadialGrid(32.0, 1024)), corpus / "a.bin")
    args = ["--workdir", str(tmp_path), "check-ineq", "--kind", "intermediate", "--corpus", "corp",
            "--jmax", "6", "--out", "i.csv"]
    assert main(args) == 0
    assert (tmp_path / "i.csv").read_text().startswith("case_id,lhs,rhs,ratio")
    assert main(["--workdir", str(tmp_path), "check-ineq", "--kind", "intermediate", "--corpus", "missing"]) == 2


def test_bad_thread_count(monkeypatch):
    monkeypatch.setenv("EPLAB_THREADS", "many")
    assert main(["static-test", "--resolutions", "128"]) == 2
