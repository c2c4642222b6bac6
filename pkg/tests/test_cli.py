import csv
import json

import pytest

import twostrain.cli as cli
from twostrain import ConfigError, IntegrationError, __version__
from twostrain.cli import FIGURES, RunConfig, main, parse_config

FIG1 = ["--beta1", "0.6", "--beta2", "0.2", "--gamma", "0.1", "--alpha", "0.1", "--N", "1000"]
IC53 = ["--model", "integrated-chain", "--k", "5", "--r", "3", "--beta1", "0.4", "--beta2", "0.2",
        "--gamma", "0.1", "--alpha", "0.1"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate_example_parses():
    config = parse_config(["simulate", "--model", "integrated-basic", *FIG1, "--eps", "0.25", "--t-end", "10000"])
    assert isinstance(config, RunConfig)
    assert config.model.kind.value == "integrated-basic"
    assert config.eps == 0.25 and config.epsilon == 0.25
    # lambda = eps alpha / (1 - eps)
    assert config.params.lam == pytest.approx(0.1 / 3, rel=1e-15)
    assert config.options["t_end"] == 10000.0


def test_both_lambda_and_eps_is_a_usage_error(capsys):
    argv = ["repro", "--model", "integrated-basic", *FIG1, "--eps", "0.25", "--lambda", "0.1"]
    with pytest.raises(ConfigError):
        parse_config(argv)
    assert main(argv) == cli.EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_both_in_config_document_is_a_usage_error(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"model": "integrated-basic", "eps": 0.2, "lambda": 0.1}))
    with pytest.raises(ConfigError):
        parse_config(["repro", "--config", str(path), *FIG1])


@pytest.mark.parametrize("argv", [
    ["simulate", "--model", "separated-chain", "--k", "4", "--r", "2", *FIG1, "--eps", "0.3", "--t-end", "50"],
    ["sweep", *IC53, "--lambda", "0.0", "--eps-grid", "0", "0.5", "6", "--rel-tol", "1e-9"],
    ["bifurcation", "--model", "separated-basic", *FIG1, "--x", "epsilon", "0", "0.9", "10",
     "--y", "beta1", "0", "1", "5"],
    ["verify-lct", *IC53, "--eps", "0.2", "--t-end", "100"],
])
def test_config_document_round_trip(tmp_path, argv):
    config = parse_config(argv)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config.to_document()))
    assert parse_config([argv[0], "--config", str(path)]) == config


def test_unknown_config_key_is_named(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"model": "integrated-basic", "beta3": 0.1}))
    with pytest.raises(ConfigError) as info:
        parse_config(["repro", "--config", str(path), *FIG1, "--eps", "0.1"])
    assert info.value.key == "beta3"


def test_out_of_range_value_is_named():
    with pytest.raises(ConfigError) as info:
        parse_config(["repro", "--model", "integrated-basic", *FIG1, "--eps", "1.5"])
    assert info.value.key == "eps"


def test_precedence_flags_over_config_over_defaults(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"model": "integrated-basic", "beta1": 0.5, "t_end": 200.0, "eps": 0.5}))
    config = parse_config(["simulate", "--config", str(path), *FIG1, "--lambda", "0.02"])
    assert config.params.beta1 == 0.6  # flag beats config
    assert config.options["t_end"] == 200.0  # config beats default
    assert config.options["rel_tol"] == 1e-8  # default
    assert config.eps is None and config.params.lam == 0.02  # flag spelling replaces config spelling


def test_repro_row_for_separated_basic(tmp_path):
    out = tmp_path / "repro.csv"
    assert main(["repro", "--model", "separated-basic", *FIG1, "--eps", "0.5", "-o", str(out)]) == 0
    (row,) = _rows(out)
    assert list(row) == cli.REPRO_HEADER
    assert float(row["r21"]) == pytest.approx(2 / 3, rel=1e-14)
    assert float(row["epsilon"]) == 0.5 and float(row["lambda"]) == pytest.approx(0.1)
    assert row["model"] == "separated-basic" and row["k"] == "1" and row["r"] == "1"


def test_absent_values_are_empty_fields(tmp_path):
    out = tmp_path / "repro.csv"
    argv = ["repro", "--model", "integrated-chain", "--k", "4", "--r", "2", "--beta1", "0.05", "--beta2", "0.08",
            "--gamma", "0.1", "--alpha", "0.1", "--lambda", "0", "-o", str(out)]
    assert main(argv) == 0
    (row,) = _rows(out)
    assert row["r12"] == "" and row["r21"] == ""


def test_csv_bodies_are_deterministic(tmp_path):
    bodies = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.csv"
        assert main(["simulate", "--model", "separated-chain", "--k", "3", "--r", "1", *FIG1,
                     "--eps", "0.3", "--t-end", "100", "-o", str(out)]) == 0
        bodies.append(out.read_bytes())
    assert bodies[0] == bodies[1]


def test_stdout_output_has_no_sidecar(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["scan", "--model", "integrated-basic", *FIG1, "--lambda", "0"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(cli.SCAN_HEADER)
    assert float(lines[1].split(",")[0]) == pytest.approx(0.5, abs=1e-6)
    assert list(tmp_path.iterdir()) == []


def test_sidecar_records_inputs(tmp_path):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--model", "integrated-chain", "--k", "5", "--r", "3", "--beta1", "0.4",
                 "--beta2", "0.2", "--gamma", "0.1", "--alpha", "0.1", "--eps", "0.2", "--t-end", "50",
                 "-o", str(out)]) == 0
    meta = json.loads((tmp_path / "sim.meta.json").read_text())
    assert meta["version"] == __version__
    assert meta["model"] == {"kind": "integrated-chain", "k": 5, "r": 3}
    assert meta["params"]["epsilon"] == 0.2 and meta["params"]["epsilon_supplied"] is True
    assert meta["params"]["lambda"] == pytest.approx(0.0625)
    assert meta["tolerances"]["rel_tol"] == 1e-8
    assert meta["summary"]["conservation_error"] <= 1e-6 * 1000


def test_non_integer_r_is_a_domain_error(tmp_path):
    argv = ["equilibria", "--model", "integrated-chain", "--k", "5", "--r", "2.5", "--beta1", "0.4",
            "--beta2", "0.2", "--gamma", "0.1", "--alpha", "0.1", "--lambda", "0.01", "-o", str(tmp_path / "e.csv")]
    assert main(argv) == cli.EXIT_DOMAIN


def test_equilibria_table(tmp_path):
    out = tmp_path / "eq.csv"
    assert main(["equilibria", *IC53, "--eps", "0.2", "-o", str(out)]) == 0
    rows = _rows(out)
    assert [r["equilibrium"] for r in rows] == ["disease_free", "strain1_only", "strain2_only", "coexistence"]
    assert float(rows[1]["S0"]) == pytest.approx(250.0, rel=1e-12)
    assert rows[3]["status"] == "numeric-only" and rows[3]["S0"] == ""


def test_integration_failure_exit_code(monkeypatch, tmp_path):
    def boom(*args, **kwargs):
        raise IntegrationError("step size underflow", 3.0)

    monkeypatch.setattr(cli, "integrate", boom)
    argv = ["simulate", "--model", "integrated-basic", *FIG1, "--eps", "0.2", "-o", str(tmp_path / "s.csv")]
    assert main(argv) == cli.EXIT_INTEGRATION


def test_verify_lct_exit_reflects_tolerance(tmp_path):
    out = tmp_path / "lct.csv"
    base = ["verify-lct", *IC53, "--eps", "0.2", "--t-end", "200", "-o", str(out)]
    assert main(base) == 0
    meta = json.loads((tmp_path / "lct.meta.json").read_text())
    assert meta["summary"]["passed"] is True
    assert meta["summary"]["observed_order"] > 1.8
    assert len(_rows(out)) == 5
    assert main(base + ["--tolerance", "1e-12"]) == cli.EXIT_CHECK_FAILED


def test_figure_presets_cover_every_panel():
    assert sorted(FIGURES) == sorted([f"fig1{c}" for c in "abcd"] + [f"fig2{c}" for c in "abcdef"]
                                     + [f"fig3{c}" for c in "abcdef"])
    assert FIGURES["fig1b"].params.beta1 == 0.6
    assert FIGURES["fig3f"].model.k == 4 and FIGURES["fig3f"].params.beta2 == 0.169


def test_figure_fig2c_transitions(tmp_path):
    assert main(["figure", "fig2c", "--points", "3", "-o", str(tmp_path)]) == 0
    trans = _rows(tmp_path / "fig2c_transitions.csv")
    assert [float(t["crossing_eps"]) for t in trans] == pytest.approx([0.113, 0.247, 0.5], abs=1e-3)
    sweep = _rows(tmp_path / "fig2c.csv")
    assert list(sweep[0]) == cli.SWEEP_HEADER and len(sweep) == 3
    meta = json.loads((tmp_path / "fig2c.meta.json").read_text())
    assert len(meta["transitions"]) == 3


def test_bad_argv_exits_with_usage(capsys):
    with pytest.raises(SystemExit) as info:
        main(["nonsense"])
    assert info.value.code == 2
