import csv
import os

import numpy as np
import pytest

from polyclass.bench import (
    ResultRow,
    emit_report,
    render_csv,
    render_text_table,
    result_table,
    time_pipeline,
)
from polyclass.errors import ConfigError
from polyclass.image_prep import GrayImage
from polyclass.matc import MatcParams
from polyclass.model import ModelConfig, count_flops, init_buffers, init_params
from polyclass.synthetic import generate_shape_dataset
from polyclass.training import compute_metrics

SMALL_MODEL = ModelConfig(
    num_classes=10, d_model=16, num_heads=2, conv_channels=(16, 16, 32, 32, 32),
    max_len=256,
)


@pytest.fixture(scope="module")
def model_bits():
    rng = np.random.default_rng(0)
    params = init_params(SMALL_MODEL, rng)
    buffers = init_buffers(SMALL_MODEL)
    return params, buffers


@pytest.fixture(scope="module")
def images():
    arrs, _ = generate_shape_dataset(6, seed=1)
    return [GrayImage(a) for a in arrs]


class TestTimePipeline:
    def test_total_is_sum_of_stages(self, model_bits, images):
        params, buffers = model_bits
        row = time_pipeline(
            images, "dominant-points", MatcParams(), SMALL_MODEL, params, buffers,
            repeats=3, dataset_name="synthetic",
        )
        assert row.total_ms == row.contour_extract_ms + row.matc_ms + row.inference_ms
        assert row.samples == 6
        assert row.matc_ms > 0

    def test_contour_mode_has_zero_matc(self, model_bits, images):
        params, buffers = model_bits
        row = time_pipeline(
            images, "contours-simple", MatcParams(), SMALL_MODEL, params, buffers,
            repeats=3,
        )
        assert row.matc_ms == 0.0
        assert row.matc_std == 0.0
        assert row.total_ms == row.contour_extract_ms + row.inference_ms

    def test_repeats_validated(self, model_bits, images):
        params, buffers = model_bits
        with pytest.raises(ConfigError):
            time_pipeline(images, "contours-none", MatcParams(), SMALL_MODEL,
                          params, buffers, repeats=2)

    def test_empty_set_rejected(self, model_bits):
        params, buffers = model_bits
        with pytest.raises(ConfigError):
            time_pipeline([], "contours-none", MatcParams(), SMALL_MODEL,
                          params, buffers, repeats=3)

    def test_doubling_repeats_stable(self, model_bits, images):
        # stage means shift by < 3 sigma (with a small floor); only
        # meaningful on a quiet machine, so skip under heavy load
        if os.getloadavg()[0] > 1.5:
            pytest.skip("machine busy; timing stability needs a quiet machine")
        params, buffers = model_bits
        short = time_pipeline(images, "dominant-points", MatcParams(), SMALL_MODEL,
                              params, buffers, repeats=3)
        long = time_pipeline(images, "dominant-points", MatcParams(), SMALL_MODEL,
                             params, buffers, repeats=6)
        for mean_a, mean_b, std in (
            (short.contour_extract_ms, long.contour_extract_ms, long.contour_extract_std),
            (short.matc_ms, long.matc_ms, long.matc_std),
            (short.inference_ms, long.inference_ms, long.inference_std),
        ):
            assert abs(mean_a - mean_b) < max(3 * std, 0.5)


class TestResultTable:
    def fake_metrics(self, acc, f1):
        m = compute_metrics(np.array([0, 1]), np.array([0, 1]), 2)
        m.accuracy = acc
        m.macro_f1 = f1
        return m

    def test_passthrough_and_flops(self):
        rows = result_table([
            ("fmnist", "dp", self.fake_metrics(0.83, 0.91), SMALL_MODEL, 20.0),
        ])
        assert rows[0].accuracy == 0.83 and rows[0].f1 == 0.91
        assert rows[0].flops == count_flops(SMALL_MODEL, 20)

    def test_sorted_by_dataset_then_method(self):
        m = self.fake_metrics(0.5, 0.5)
        rows = result_table([
            ("b", "z", m, SMALL_MODEL, 10),
            ("a", "z", m, SMALL_MODEL, 10),
            ("a", "k", m, SMALL_MODEL, 10),
        ])
        assert [(r.dataset, r.method) for r in rows] == [("a", "k"), ("a", "z"), ("b", "z")]


class TestEmitReport:
    ROWS = [
        ResultRow(dataset="d1", method="m1", f1=0.91, accuracy=0.83, flops=1234),
        ResultRow(dataset="d2", method="m2", f1=0.5, accuracy=0.4, flops=99),
    ]

    def test_empty_rows_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            emit_report([], "csv", tmp_path / "x.csv")

    def test_identical_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_report(self.ROWS, "csv", a)
        emit_report(self.ROWS, "csv", b)
        assert a.read_bytes() == b.read_bytes()

    def test_csv_roundtrip(self, tmp_path):
        path = tmp_path / "r.csv"
        emit_report(self.ROWS, "csv", path)
        with open(path, newline="") as f:
            parsed = list(csv.reader(f))
        assert parsed[0] == ["dataset", "method", "f1", "accuracy", "flops"]
        assert parsed[1] == ["d1", "m1", "0.91", "0.83", "1234"]
        assert len(parsed) == 3

    def test_naive_comma_split_works(self):
        text = render_csv(self.ROWS)
        for line in text.strip().split("\n"):
            assert len(line.split(",")) == 5

    def test_text_table_aligned(self):
        text = render_text_table(self.ROWS)
        lines = text.strip().split("\n")
        assert len(lines) == 4  # header, rule, 2 rows
        assert lines[0].startswith("dataset")
        assert set(lines[1]) <= {"-", " "}

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report(self.ROWS, "yaml", tmp_path / "x")

    def test_unwritable_path(self):
        with pytest.raises(OSError):
            emit_report(self.ROWS, "csv", "/nonexistent-dir/report.csv")


def test_timing_row_csv_structure_stable(model_bits, images, tmp_path):
    """Two bench runs differ only in the timing value fields."""
    params, buffers = model_bits
    paths = []
    for run in range(2):
        row = time_pipeline(images, "contours-none", MatcParams(), SMALL_MODEL,
                            params, buffers, repeats=3)
        p = tmp_path / f"run{run}.csv"
        emit_report([row], "csv", p)
        paths.append(p)
    rows = []
    for p in paths:
        with open(p, newline="") as f:
            rows.append(list(csv.reader(f)))
    assert rows[0][0] == rows[1][0]  # identical header
    timing_fields = {
        "contour_extract_ms", "matc_ms", "inference_ms", "total_ms",
        "contour_extract_std", "matc_std", "inference_std",
        "contour_extract_med", "matc_med", "inference_med",
    }
    header = rows[0][0]
    for col, name in enumerate(header):
        if name not in timing_fields:
            assert rows[0][1][col] == rows[1][1][col]
