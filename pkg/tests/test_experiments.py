import json
import math

import pytest

from ffrsim import experiments as ex
from ffrsim.errors import ParameterError
from ffrsim.ffr import FfrConfig
from ffrsim.pathloss import PathLossParams
from ffrsim.simulator import SimConfig, estimate


@pytest.fixture(scope="module")
def small_result():
    base = SimConfig(n_drops=300, master_seed=9)
    spec = ex.SweepSpec(base, "threshold_T_dB", (-5.0, 5.0), "beta", (0.5, 1.5))
    return ex.run_sweep(spec)


def test_config_round_trip(tmp_path):
    cfg = SimConfig(lambda_bs=2e-3, ffr=FfrConfig(threshold_T_db=-3.5, power_ratio_a=7.0, subbands_N=4),
                    pathloss=PathLossParams(0.031, 1.7), n_drops=123, master_seed=5, reuse_broadcast_fade=True)
    path = tmp_path / "cfg.ini"
    ex.write_config(cfg, path)
    text = path.read_text()
    assert "threshold_T_db" in text and "lambda_bs_per_m2" in text
    assert ex.read_config(path) == cfg


def test_config_rejects_unknown_keys():
    d = ex.config_to_dict(SimConfig())
    d["ffr"]["threshold_T"] = 1.0
    with pytest.raises(ParameterError):
        ex.config_from_dict(d)


def test_apply_axis():
    cfg = SimConfig()
    assert ex.apply_axis(cfg, "threshold_T_dB", 5.0).ffr.threshold_T_db == 5.0
    assert ex.apply_axis(cfg, "beta", 1.5).pathloss.beta == 1.5
    assert ex.apply_axis(cfg, "alpha", 0.01).pathloss.alpha == 0.01
    assert ex.apply_axis(cfg, "power_ratio_a", 15.0).ffr.power_ratio_a == 15.0
    with pytest.raises(ParameterError):
        ex.apply_axis(cfg, "lambda", 1.0)


def test_sweep_spec_validation():
    with pytest.raises(ParameterError):
        ex.SweepSpec(SimConfig(), "beta", (1.0, 0.5))
    with pytest.raises(ParameterError):
        ex.SweepSpec(SimConfig(), "beta", (0.5, 1.0), "alpha", (0.1, 0.1))
    with pytest.raises(ParameterError):
        ex.SweepSpec(SimConfig(), "gamma", (0.5, 1.0))


def test_empty_result_is_header_only(tmp_path):
    spec = ex.SweepSpec(SimConfig(), "beta", (1.0,))
    path = ex.emit(ex.SweepResult(spec, []), "csv", tmp_path / "empty.csv")
    assert path.read_text() == ",".join(ex.CSV_COLUMNS) + "\n"


def test_length_one_grid_matches_estimate(tmp_path):
    cfg = SimConfig(n_drops=250, master_seed=3)
    result = ex.run_sweep(ex.SweepSpec(cfg, "threshold_T_dB", (2.0,)))
    direct = estimate(ex.apply_axis(cfg, "threshold_T_dB", 2.0))
    (row,) = result.rows
    assert (row.coverage, row.coverage_ci, row.ceu_density) == (direct.coverage, direct.ci_half_width,
                                                                direct.ceu_density)

    path = ex.emit(result, "csv", tmp_path / "one.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    (parsed,) = ex.read_csv_rows(path)
    assert float(parsed["coverage"]) == row.coverage
    assert float(parsed["analytical_pe"]) == row.analytical_pe
    assert parsed["overlay"] == ""
    assert int(parsed["seed"]) == 3


def test_csv_uses_decimal_points(small_result, tmp_path):
    path = ex.emit(small_result, "csv", tmp_path / "s.csv")
    for line in path.read_text().splitlines():
        assert len(line.split(",")) == len(ex.CSV_COLUMNS)


def test_sweep_order_and_analytical_agreement(small_result):
    assert [(r.overlay, r.axis) for r in small_result.rows] == [
        (0.5, -5.0), (0.5, 5.0), (1.5, -5.0), (1.5, 5.0)]
    for r in small_result.rows:
        assert abs(r.ceu_density - r.analytical_pe) <= max(0.01, 3 * r.ceu_density_ci)
        assert not r.quadrature_failed


def test_json_metadata_reruns_identically(small_result, tmp_path):
    path = ex.emit(small_result, "json", tmp_path / "s.json")
    doc = json.loads(path.read_text())
    assert doc["metadata"]["artifact_version"]
    spec = ex.spec_from_metadata(doc["metadata"])
    assert spec == small_result.spec
    again = ex.run_sweep(spec)
    assert again.rows == small_result.rows
    a = ex.emit(small_result, "csv", tmp_path / "a.csv").read_bytes()
    b = ex.emit(again, "csv", tmp_path / "b.csv").read_bytes()
    assert a == b


def test_emit_errors(small_result, tmp_path):
    with pytest.raises(ParameterError):
        ex.emit(small_result, "xml", tmp_path / "x")
    with pytest.raises(OSError, match="missing"):
        ex.emit(small_result, "csv", tmp_path / "missing" / "x.csv")


def test_plot_data(small_result, tmp_path):
    path = ex.emit_plot_data(small_result, "figX", tmp_path / "plot.csv")
    rows = ex.read_csv_rows(path)
    assert len(rows) == 3 * len(small_result.rows)
    assert {r["metric"] for r in rows} == {"coverage", "ceu_density", "analytical_pe"}
    assert rows[0]["series"] == "beta=0.5"


def test_empty_targets_give_identity_record():
    record = ex.calibrate_unstated([])
    assert record.figures == {}
    assert record.apply("fig3", SimConfig()) == SimConfig()


def test_calibration_recovers_synthetic_alpha():
    grid = ex.DEFAULT_GRIDS["alpha"]
    true_alpha = grid[14]
    targets = []
    for beta in (0.5, 1.5, 2.0):
        cfg = SimConfig(pathloss=PathLossParams(true_alpha, beta))
        pe = ex._analytical(cfg)[0]
        targets.append(ex.Target.at("fig3", pe, 0.02, threshold_T_dB=0.0, beta=beta))
    record = ex.calibrate_unstated(targets)
    fitted = record.params("fig3")["alpha"]
    i = grid.index(fitted)
    assert abs(i - 14) <= 1
    assert record.figures["fig3"].within_tolerance


def test_calibration_record_round_trip(tmp_path):
    record = ex.load_calibration()
    assert set(record.figures) == {"fig3", "fig4", "fig5"}
    path = tmp_path / "c.json"
    record.save(path)
    assert ex.load_calibration(path) == record
    assert "fig5" in ex.calibration_report(record)


def test_figure_specs():
    record = ex.load_calibration()
    fig3 = ex.figure_spec("fig3", record)
    assert fig3.base.pathloss.alpha == record.params("fig3")["alpha"]
    assert fig3.grid[0] == -10.0 and fig3.grid[-1] == 20.0
    fig4 = ex.figure_spec("fig4", record, coarse=True)
    assert fig4.grid == (-15.0, 0.0, 15.0)
    assert fig4.overlay_values == (5.0, 10.0, 15.0)
    fig5 = ex.figure_spec("fig5", record)
    assert fig5.overlay_axis == "alpha"
    assert math.isclose(fig5.grid[-1], 2.0)
    with pytest.raises(ParameterError):
        ex.figure_spec("fig6", record)
