import json

import numpy as np
import pytest

from preampdet import DetectionChainParams, compound_kernel
from preampdet.cli import main
from preampdet.scenarios import (
    ScenarioConfig,
    ScenarioError,
    dump_kernel,
    parse_grid,
    read_kernel_csv,
    run_scenario,
)
from preampdet.sweep import SweepResult, format_value, read_csv


def test_parse_grid():
    assert parse_grid("0.5") == [0.5]
    assert parse_grid("1,2,4") == [1.0, 2.0, 4.0]
    assert parse_grid("0.1:0.3:0.1") == [0.1, 0.2, 0.3]
    with pytest.raises(ScenarioError):
        parse_grid("1:0:0.1")


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(None) == ""
    with pytest.raises(ValueError):
        format_value(float("nan"))


def test_sweep_csv_round_trip(tmp_path):
    result = SweepResult(["a", "b"], [[1, 0.25], [2, None]], {"note": "x"})
    result.to_csv(tmp_path / "s.csv")
    metadata, header, rows = read_csv(tmp_path / "s.csv")
    assert metadata == {"note": "x"}
    assert header == ["a", "b"]
    assert rows == [["1", "0.25"], ["2", ""]]


def test_fig4_golden_value():
    result = run_scenario(ScenarioConfig("fig4", efficiency_grid=[0.5], gain_grid=[16.0]))
    (record,) = result.records()
    assert record["log10_one_minus_fidelity"] == pytest.approx(-2.4624, abs=5e-5)
    assert record["status"] == "ok"


def test_fig6_histograms():
    result = run_scenario(ScenarioConfig("fig6", max_photons=10))
    records = result.records()
    g1 = [r["posterior"] for r in records if r["gain"] == 1.0]
    g10 = [r["posterior"] for r in records if r["gain"] == 10.0]
    np.testing.assert_allclose(np.array(g1[1:]) / np.array(g1[:-1]), 0.5, rtol=1e-9)
    assert g10[0] > 0.9
    means = [v for k, v in result.metadata.items() if k.startswith("posterior_mean")]
    assert means[1] == pytest.approx(means[0] / 10, rel=1e-9)


def test_fig7_relative_probability():
    result = run_scenario(ScenarioConfig("fig7", gain_grid=[1.0, 10.0]))
    ratios = result.column("relative_probability")
    np.testing.assert_allclose(ratios, [1.25, 0.125], rtol=1e-9)


def test_scenario_output_is_byte_identical(tmp_path):
    config = ScenarioConfig("fig5", efficiency_grid=[0.3, 0.6], gain_grid=[1.0, 4.0])
    first = run_scenario(config).to_csv()
    config.workers = 2
    assert run_scenario(config).to_csv() == first


def test_custom_scenario_needs_grids():
    with pytest.raises(ScenarioError, match="custom"):
        run_scenario(ScenarioConfig("custom", prior="flat"))


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"scenario": "fig4", "efficiency_grid": [0.5], "gain_grid": [2.0]}))
    config = ScenarioConfig.from_file(path, gain_grid=[16.0])
    assert config.gain_grid == [16.0] and config.efficiency_grid == [0.5]
    path.write_text(json.dumps({"scenario": "fig4", "colour": "red"}))
    with pytest.raises(ScenarioError, match="colour"):
        ScenarioConfig.from_file(path)


def test_kernel_csv_round_trip(tmp_path):
    params = DetectionChainParams(4.0, 0.5, 0.2)
    kernel, text = dump_kernel(params, 5, 12, path=tmp_path / "k.csv")
    back = read_kernel_csv(tmp_path / "k.csv")
    np.testing.assert_array_equal(back.entries, kernel.entries)
    np.testing.assert_array_equal(back.column_deficit, kernel.column_deficit)
    plain, _ = dump_kernel(DetectionChainParams(4.0, 0.5), 5, 12)
    np.testing.assert_array_equal(
        plain.entries, compound_kernel(DetectionChainParams(4.0, 0.5), 5, 12).entries
    )


# --- command line -----------------------------------------------------------

def test_cli_cost(capsys):
    assert main(["cost", "--eta", "0.8", "--gain", "10"]) == 0
    out = capsys.readouterr().out
    ratio = float(out.split("relative_probability:")[1].split()[0])
    assert ratio == pytest.approx(0.125, abs=1e-9)


def test_cli_retrodict_csv(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["retrodict", "--eta", "0.8", "--gain", "10", "--out", str(out)]) == 0
    metadata, header, rows = read_csv(out)
    assert header == ["m", "posterior"]
    assert float(metadata["fidelity"]) == pytest.approx(0.9756097560975610, abs=1e-9)


def test_cli_scenario_deterministic(tmp_path):
    args = ["scenario", "fig4", "--eta", "0.2:0.4:0.1", "--gain", "1,16"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv"), "--workers", "2"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cli_scenario_config(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"scenario": "fig4", "efficiency_grid": [0.5], "gain_grid": [16.0]}))
    assert main(["scenario", "--config", str(path)]) == 0
    assert "-2.46239" in capsys.readouterr().out


def test_cli_scenario_failed_cells_exit_2(capsys):
    assert main(["scenario", "fig5", "--eta", "0.5", "--gain", "1", "--prior", "flat:0"]) == 2
    assert "failed" in capsys.readouterr().err


def test_cli_kernel(capsys):
    assert main(["kernel", "--eta", "0.5", "--gain", "2", "--input-dim", "3", "--output-dim", "4"]) == 0
    text = capsys.readouterr().out
    kernel = read_kernel_csv(text)
    assert kernel.shape == (4, 3)
    assert kernel.entries[0, 0] == pytest.approx(2.0 / 3.0, rel=1e-12)


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["scenario", "fig9"],
        ["cost", "--eta", "abc"],
        ["validate", "--trials", "10"],
        ["retrodict", "--prior", "no-such-prior"],
        ["scenario"],
    ],
)
def test_cli_usage_errors_exit_1(argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1


def test_cli_computation_error_exit_2():
    assert main(["cost", "--eta", "0.5", "--gain", "2", "--prior", "nonzero-flat"]) == 2


def test_cli_validate_fault_exit_3(capsys):
    code = main(["validate", "--trials", "100000", "--inject-fault", "2:0:0.05"])
    assert code == 3
    out = capsys.readouterr().out
    assert "FAIL  cell 2: eta=0.3 G=2 m=0" in out


def test_cli_validate_passes(capsys):
    assert main(["validate", "--trials", "100000"]) == 0
    assert "all checks passed" in capsys.readouterr().out
