import numpy as np
import pandas as pd
import pytest

import core.evaluation as evaluation
from core.arima import GridSpec
from core.errors import AuditError, BenchmarkError, InvalidSpecError, SeriesTooShortError
from core.evaluation import (BENCHMARK_HEADER, BenchmarkSpec, EvalReport, aggregate, audit_properties,
                             format_table, forecasts_from_frame, forecasts_to_frame, mse, read_benchmark,
                             run_benchmark, sample_windows, write_benchmark_row)


def _report(levels=2, horizon=100, mse_mean=1e-3):
    return EvalReport(model_name="sarima", system_levels=levels, horizon_steps=horizon, mse_mean=mse_mean,
                      mse_std=2e-4, seconds_per_sample=0.5, n_samples=100)


# ── Scoring ───────────────────────────────────────────────────────────────────

def test_mse_examples():
    assert mse([1, 2], [0, 0]) == 2.5
    assert mse([0.3, 0.4], [0.3, 0.4]) == 0.0
    assert mse([1, 3], [0, 1]) == mse([0, 1], [1, 3])


def test_mse_length_mismatch():
    with pytest.raises(InvalidSpecError):
        mse([1, 2, 3], [1, 2])
    with pytest.raises(InvalidSpecError):
        mse([], [])


def test_aggregate_of_identical_scores():
    report = aggregate("naive", 2, 100, [0.01] * 5, [0.1] * 5)
    assert report.mse_mean == pytest.approx(0.01)
    assert report.mse_std == 0.0
    assert report.n_samples == 5


def test_aggregate_needs_scores():
    with pytest.raises(BenchmarkError):
        aggregate("naive", 2, 100, [], [])


def test_failure_rate():
    assert _report().model_copy(update={"n_failed": 5}).failure_rate == pytest.approx(5 / 105)


# ── Benchmark table ───────────────────────────────────────────────────────────

def test_benchmark_file_has_one_header(tmp_path):
    path = tmp_path / "benchmark.csv"
    write_benchmark_row(_report(levels=2), path)
    write_benchmark_row(_report(levels=3), path)
    lines = path.read_text().splitlines()
    assert lines[0] == BENCHMARK_HEADER
    assert lines[1] == "model,levels,horizon,mse_mean,mse_std,sec_per_sample,n"
    assert len(lines) == 4
    rows = read_benchmark(path)
    assert list(rows["levels"]) == [2, 3]


def test_format_table(tmp_path):
    path = tmp_path / "benchmark.csv"
    for levels in (2, 3, 4):
        write_benchmark_row(_report(levels=levels), path)
    text = format_table(read_benchmark(path))
    assert "horizon = 100 steps" in text
    assert "2-level" in text and "4-level" in text
    assert "1.0000 ± 0.2000 (0.50 s)" in text


# ── Property audit ────────────────────────────────────────────────────────────

def test_audit_passes_for_populations():
    p1 = np.linspace(1.0, 0.4, 50)
    report = audit_properties([np.vstack([p1, 1.0 - p1])] * 3)
    assert report.passed
    assert report.pass_fraction == 1.0
    assert len(report.sum_deviation) == 150
    assert "PASS" in report.summary()


def test_audit_fails_when_sums_drift():
    p1 = np.full(40, 0.6)
    report = audit_properties([np.vstack([p1, p1])])
    assert not report.passed
    assert report.sum_pass_fraction == 0.0
    assert report.quantiles["sum_dev_max"] == pytest.approx(0.2)


def test_audit_fails_on_negative_populations():
    report = audit_properties([np.vstack([np.full(10, 1.05), np.full(10, -0.05)])])
    assert report.sum_pass_fraction == 1.0
    assert report.min_pass_fraction == 0.0
    assert not report.passed


def test_audit_accepts_site_mappings():
    report = audit_properties([{0: np.full(5, 0.3), 1: np.full(5, 0.7)}], n_sites=2)
    assert report.passed


def test_audit_requires_every_site():
    with pytest.raises(AuditError):
        audit_properties([{0: np.full(5, 1.0)}], n_sites=2)
    with pytest.raises(AuditError):
        audit_properties([{0: np.full(5, 0.5), 1: np.full(4, 0.5)}])
    with pytest.raises(AuditError):
        audit_properties([])


def test_forecast_table_groups_back():
    forecasts = {("p000001", 10): np.array([[0.9, 0.8], [0.1, 0.2]]),
                 ("p000002", 0): np.array([[0.5, 0.5], [0.5, 0.5]])}
    frame = forecasts_to_frame(forecasts)
    assert list(frame.columns) == ["source_id", "offset", "site", "step", "value"]
    assert len(frame) == 8
    groups = forecasts_from_frame(frame)
    assert len(groups) == 2
    np.testing.assert_array_equal(groups[0][1], [0.1, 0.2])
    with pytest.raises(AuditError):
        forecasts_from_frame(frame.drop(columns=["step"]))


# ── Benchmark runs ────────────────────────────────────────────────────────────

def test_window_sampling_is_seeded(toy_dataset):
    ids = ["p000001", "p000002"]
    first = sample_windows(toy_dataset, ids, 101, 50, 20, seed=3)
    assert first == sample_windows(toy_dataset, ids, 101, 50, 20, seed=3)
    assert len(first) == 20
    assert all(0 <= offset <= 300 - 151 for _, offset in first)
    with pytest.raises(BenchmarkError):
        sample_windows(toy_dataset, ids, 250, 100, 5, seed=0)


def test_naive_benchmark_outputs(toy_dataset, tmp_path):
    spec = BenchmarkSpec(model="naive", L_in=101, horizon=50, max_samples=20)
    result = run_benchmark(toy_dataset, spec, out_dir=tmp_path / "out", workers=1, save_forecasts=True)
    assert result.report.n_samples == 40
    assert result.report.system_levels == 2
    assert result.report.mse_mean > 0.0
    assert result.audit.passed
    assert (tmp_path / "out" / "samples_naive_L2_h50.csv").exists()
    assert (tmp_path / "out" / "forecasts_naive_L2_h50.csv").exists()
    rows = read_benchmark(tmp_path / "out" / "benchmark.csv")
    assert rows.iloc[0]["model"] == "naive" and rows.iloc[0]["n"] == 40


def test_benchmark_samples_are_reproducible(toy_dataset, tmp_path):
    spec = BenchmarkSpec(model="naive", L_in=101, horizon=50, max_samples=10, seed=1)
    run_benchmark(toy_dataset, spec, out_dir=tmp_path / "a", workers=1)
    run_benchmark(toy_dataset, spec, out_dir=tmp_path / "b", workers=1)
    a = (tmp_path / "a" / "samples_naive_L2_h50.csv").read_text()
    b = (tmp_path / "b" / "samples_naive_L2_h50.csv").read_text()
    assert a == b
    assert "seconds" not in a.splitlines()[0]


def test_sarima_on_constant_populations(tmp_path, dataset_writer):
    constant = np.column_stack([np.ones(200), np.zeros(200)])
    dataset = dataset_writer(tmp_path / "flat", {f"p{i:06d}": constant for i in range(4)})
    spec = BenchmarkSpec(model="sarima", L_in=101, horizon=20, max_samples=3,
                         grid=GridSpec(p_max=2, d_max=1, q_max=1))
    result = run_benchmark(dataset, spec, workers=1)
    assert result.report.mse_mean == pytest.approx(0.0, abs=1e-20)
    assert result.report.n_failed == 0


def test_sarima_benchmark_on_damped_oscillations(toy_dataset):
    spec = BenchmarkSpec(model="sarima", L_in=101, horizon=50, max_samples=4,
                         grid=GridSpec(p_max=2, d_max=1, q_max=1))
    result = run_benchmark(toy_dataset, spec, workers=1)
    assert result.report.n_samples + result.report.n_failed == 8
    assert set(result.samples.columns) >= {"source_id", "offset", "site", "mse", "status"}


def test_too_many_failures_fail_the_run(toy_dataset, monkeypatch):
    def broken(history, h, grid=None):
        raise SeriesTooShortError(h, 0)

    monkeypatch.setattr(evaluation, "fit_and_forecast", broken)
    with pytest.raises(BenchmarkError):
        run_benchmark(toy_dataset, BenchmarkSpec(L_in=101, horizon=50, max_samples=5), workers=1)


@pytest.mark.slow
def test_sarima_beats_naive_on_damped_oscillations():
    t = np.arange(1200) * 0.0002
    wins = 0
    for k in range(100):
        tau, period = 0.05 + 0.001 * k, 0.03 + 0.0002 * k
        series = 0.5 + 0.4 * np.exp(-t / tau) * np.cos(2 * np.pi * t / period)
        history, truth = series[:1001], series[1001:1101]
        sarima = mse(evaluation.fit_and_forecast(history, 100), truth)
        naive = mse(np.full(100, history[-1]), truth)
        wins += sarima < naive
    assert wins >= 90


@pytest.mark.slow
def test_benchmark_on_a_propagated_dataset(tmp_path):
    from core.sweep import HeomSettings, SweepSpec, generate_dataset

    dataset = tmp_path / "dimers"
    generate_dataset(SweepSpec(n_samples=10, seed=3), HeomSettings(dt=0.0002, t_total=0.3, depth=4),
                     dataset, workers=1)
    grid = GridSpec(p_max=3, d_max=1, q_max=1)
    sarima = run_benchmark(dataset, BenchmarkSpec(model="sarima", L_in=1001, horizon=100, max_samples=10,
                                                  grid=grid), workers=1)
    naive = run_benchmark(dataset, BenchmarkSpec(model="naive", L_in=1001, horizon=100, max_samples=10),
                          workers=1)

    assert sarima.report.n_failed == 0
    assert 0.0 < naive.report.mse_mean < 0.1
    assert sarima.report.mse_mean < 1e-3
    assert sarima.report.mse_mean < naive.report.mse_mean
    assert sarima.audit.pass_fraction >= 0.95
    assert naive.audit.passed
