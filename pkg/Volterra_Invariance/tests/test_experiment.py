from math import factorial

import numpy as np
import pandas as pd
import pytest

from core.config import ExperimentConfig, InputSpec
from core.experiment import (
    ExperimentRunner,
    build_input,
    compare_sequences,
    read_signal_csv,
    sequence_frame,
    write_table,
)
from core.models import CascadeMode, ComparisonFailure, Convention, OracleForm, SignalSequence, UsageError, ValidationError

SCALAR_SYSTEM = {"F": [[-1.0]], "G": [[1.0]], "b": [1.0], "c": [1.0], "T": 1.0}

NILPOTENT_SYSTEM = {
    "F": [[-1.0, 0.0, 0.0], [0.3, -1.5, 0.0], [0.3, 0.3, -2.0]],
    "G": [[0.0, 0.0, 0.0], [0.8, 0.0, 0.0], [0.5, -0.6, 0.0]],
    "b": [1.0, 0.5, -0.3],
    "c": [0.7, -0.4, 1.1],
    "T": 0.5,
}


def scalar_runner(**input_spec):
    spec = {"kind": "impulse", "length": 12, **input_spec}
    return ExperimentRunner(ExperimentConfig(system=SCALAR_SYSTEM, input=spec))


def test_build_input_kinds():
    imp = build_input(InputSpec(kind="impulse", length=5, amplitude=2.0), T=0.5)
    np.testing.assert_array_equal(imp.samples, [2.0, 0, 0, 0, 0])
    assert imp.T == 0.5
    two = build_input(InputSpec(kind="two_impulse", length=6, gap=2), T=1.0)
    np.testing.assert_array_equal(two.samples, [1.0, 0, 1.0, 0, 0, 0])
    zero = build_input(InputSpec(kind="zero", length=4), T=1.0)
    np.testing.assert_array_equal(zero.samples, np.zeros(4))


def test_random_input_is_seeded():
    a = build_input(InputSpec(kind="random", length=32, seed=123), T=1.0)
    b = build_input(InputSpec(kind="random", length=32, seed=123), T=1.0)
    c = build_input(InputSpec(kind="random", length=32, seed=124), T=1.0)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)
    assert np.all(np.abs(a.samples) <= 1.0)


def test_read_signal_csv(tmp_path):
    path = tmp_path / "u.csv"
    pd.DataFrame({"n": [0, 1, 2], "value": [0.5, -1.0, 2.0]}).to_csv(path, index=False)
    u = read_signal_csv(path, T=0.25)
    np.testing.assert_array_equal(u.samples, [0.5, -1.0, 2.0])
    assert u.T == 0.25

    bad = tmp_path / "bad.csv"
    pd.DataFrame({"k": [0, 1], "value": [1.0, 2.0]}).to_csv(bad, index=False)
    with pytest.raises(ValidationError):
        read_signal_csv(bad, T=1.0)
    gap = tmp_path / "gap.csv"
    pd.DataFrame({"n": [0, 2], "value": [1.0, 2.0]}).to_csv(gap, index=False)
    with pytest.raises(ValidationError):
        read_signal_csv(gap, T=1.0)
    with pytest.raises(UsageError):
        read_signal_csv(tmp_path / "missing.csv", T=1.0)


def test_write_table_is_reproducible(tmp_path):
    df = sequence_frame(SignalSequence(samples=[0.1, 1.0 / 3.0], T=1.0))
    text = write_table(df, None)
    assert text.splitlines()[0] == "n,y"
    assert text == write_table(df, None)
    out = tmp_path / "sub" / "y.csv"
    assert write_table(df, out) is None
    assert out.read_text() == text


def test_compare_sequences_report():
    right = SignalSequence(samples=[1.0, 0.5, 0.0, 0.25])
    left = SignalSequence(samples=[2.0, 1.0, 0.0, 0.5])
    report = compare_sequences(left, right, 1e-9, names=("naive", "corrected"), order=2)
    assert not report.passed
    assert report.first_divergent_sample == 0
    assert report.ratio_min == report.ratio_max == 2.0
    assert report.max_abs_error == 1.0
    assert report.max_rel_error == 1.0

    same = compare_sequences(right, right, 1e-12)
    assert same.passed and same.first_divergent_sample is None

    zeros = SignalSequence.zeros(3)
    assert compare_sequences(zeros, zeros, 1e-12).passed
    assert compare_sequences(SignalSequence(samples=[0, 1e-3, 0]), zeros, 1e-12).max_rel_error == float("inf")


def test_sample_kernel_row():
    runner = scalar_runner()
    row = runner.sample_kernel(2, (0, 1), Convention.REGULAR)
    assert row["m"] == "1/2"
    assert row["v"] == pytest.approx(np.exp(-1.0) / 2, rel=1e-14)
    assert row["h"] == pytest.approx(np.exp(-1.0), rel=1e-14)
    assert row["triangular"] == "1 1"

    row4 = runner.sample_kernel(4, (0, 2, 0, 1), Convention.REGULAR)
    assert row4["m"] == "1/4"
    assert runner.sample_kernel(3, (1, 1, 1), Convention.REGULAR)["m"] == "1"
    with pytest.raises(UsageError):
        runner.sample_kernel(3, (0, 1), Convention.REGULAR)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_simulate_scalar_impulse(p):
    runner = scalar_runner()
    y = runner.simulate(p, CascadeMode.CORRECTED)
    np.testing.assert_allclose(y.samples, np.exp(-np.arange(12)) / factorial(p), rtol=1e-13)


def test_simulate_modes():
    runner = scalar_runner()
    np.testing.assert_allclose(
        runner.simulate(1, CascadeMode.ORDER1).samples, np.exp(-np.arange(12)), rtol=1e-14
    )
    with pytest.raises(UsageError):
        runner.simulate(2, CascadeMode.ORDER1)
    zero = scalar_runner(kind="zero")
    np.testing.assert_array_equal(zero.simulate(3, CascadeMode.CORRECTED).samples, np.zeros(12))


def test_oracle_forms_agree_on_random_input():
    runner = scalar_runner(kind="random", seed=9)
    regular = runner.oracle(3, OracleForm.REGULAR)
    triangular = runner.oracle(3, OracleForm.TRIANGULAR)
    np.testing.assert_allclose(regular.samples, triangular.samples, rtol=1e-12, atol=1e-15)


def test_compare_corrected_against_oracle():
    runner = scalar_runner(kind="random", seed=3)
    report = runner.compare(3, "corrected", "regular")
    assert report.passed
    assert report.max_rel_error <= 1e-9
    assert runner.compare(2, "regular", "triangular").tolerance == 1e-12


@pytest.mark.parametrize("p", [2, 3, 4])
def test_naive_over_corrected_ratio_on_impulse(p):
    report = scalar_runner().compare(p, "naive", "corrected", strict=False)
    assert report.ratio_min == pytest.approx(factorial(p), rel=1e-12)
    assert report.ratio_max == pytest.approx(factorial(p), rel=1e-12)


def test_naive_against_oracle_fails():
    runner = scalar_runner(kind="random", seed=3)
    with pytest.raises(ComparisonFailure):
        runner.compare(2, "naive", "regular")
    report = runner.compare(2, "naive", "regular", strict=False)
    assert report.max_rel_error > runner.config.tolerances.naive_divergence


def test_compare_rejects_unknown_source():
    with pytest.raises(UsageError):
        scalar_runner().compare(2, "corrected", "bogus")


def test_seed_override():
    config = ExperimentConfig(system=SCALAR_SYSTEM, input={"kind": "random", "seed": 1, "length": 8})
    a = ExperimentRunner(config, seed=42)
    b = ExperimentRunner(config.model_copy(update={"input": config.input.model_copy(update={"seed": 42})}))
    np.testing.assert_array_equal(a.input.samples, b.input.samples)
    assert a.run_record() == {"seed": 42, "samples": 8}


def nilpotent_runner(length=16):
    config = ExperimentConfig(
        system=NILPOTENT_SYSTEM,
        orders=[1, 2, 3],
        input={"kind": "random", "seed": 5, "length": length},
    )
    return ExperimentRunner(config)


def test_ctsim_nilpotent_total():
    df, summary = nilpotent_runner().ctsim(3)
    assert list(df.columns[:3]) == ["n", "y_ct", "y_model"]
    assert {"y_1", "y_2", "y_3", "y_3_cascade"} <= set(df.columns)
    assert summary["model_matches"]
    assert summary["model_rel_error"] <= 1e-8
    assert not summary["ill_conditioned"]
    np.testing.assert_allclose(df["y_2"], df["y_2_cascade"], rtol=1e-6, atol=1e-9)


def test_ctsim_linear_system_has_only_first_order():
    linear = {**NILPOTENT_SYSTEM, "G": [[0.0] * 3] * 3}
    config = ExperimentConfig(system=linear, input={"kind": "random", "seed": 5, "length": 10})
    df, summary = ExperimentRunner(config).ctsim(3)
    assert summary["model_matches"]
    np.testing.assert_allclose(df["y_1"], df["y_ct"], rtol=1e-8, atol=1e-10)
    assert np.max(np.abs(df["y_2"])) <= 1e-8 * np.max(np.abs(df["y_ct"]))


def test_compare_total_against_ct():
    report = nilpotent_runner().compare(0, "corrected", "ct")
    assert report.passed
    assert report.tolerance == 1e-8


def test_compare_extracted_order():
    report = nilpotent_runner().compare(2, "ct", "corrected")
    assert report.passed


def test_complexity_tables():
    df, ok = scalar_runner().complexity(3)
    assert ok
    additional = df[(df["run"] == "corrected_vs_naive") & (df["item"] == "additional")].iloc[0]
    assert additional["predicted"] == additional["measured"] == 5
    baseline = df[df["run"] == "naive_vs_naive"].iloc[0]
    assert baseline["measured"] == 0

    df_matrix, ok_matrix = nilpotent_runner(8).complexity(2)
    assert ok_matrix
    row = df_matrix[df_matrix["item"] == "additional"].iloc[0]
    assert row["convention"] == "matrix"
    assert row["measured"] == 6

    with pytest.raises(UsageError):
        scalar_runner().complexity(1)
