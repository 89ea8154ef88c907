"""Per-stage wall-clock accounting and report emission.

Timing runs are strictly sequential (one sample at a time, monotonic clock)
so stage numbers stay honest. The first repeat is discarded as warm-up;
means, sample standard deviations and medians are reported per stage, and a
row's total is exactly the sum of its stage means.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, fields

import numpy as np

from .contours import approximate
from .data import normalize_points
from .errors import ConfigError
from .matc import MatcParams, contour_from_image, dominant_polygon
from .model import ModelConfig, count_flops, forward, make_batch


@dataclass
class TimingRow:
    dataset: str
    pipeline: str
    contour_extract_ms: float
    matc_ms: float
    inference_ms: float
    total_ms: float
    samples: int
    contour_extract_std: float
    matc_std: float
    inference_std: float
    contour_extract_med: float
    matc_med: float
    inference_med: float


@dataclass
class ResultRow:
    dataset: str
    method: str
    f1: float
    accuracy: float
    flops: int


_REPR_MODE = {
    "contours-none": "none",
    "contours-simple": "simple",
    "contours-tc89l1": "tc89-l1",
    "contours-tc89kcos": "tc89-kcos",
}


def time_pipeline(
    images,
    representation: str,
    matc_params: MatcParams,
    model_config: ModelConfig,
    params: dict,
    buffers: dict,
    repeats: int = 3,
    dataset_name: str = "dataset",
) -> TimingRow:
    """Per-sample stage timing over len(images) x (repeats - 1) measurements.

    contour_extract covers grayscale->threshold->denoise->trace (plus chain
    approximation for contour modes); matc covers the dominant-point stages
    and is exactly 0 for contour representations; inference is a single
    sample eval-mode forward.
    """
    if not images:
        raise ConfigError("cannot time an empty sample set")
    if repeats < 3:
        raise ConfigError("repeats must be >= 3")
    extract_t: list[float] = []
    matc_t: list[float] = []
    infer_t: list[float] = []
    is_dp = representation == "dominant-points"
    for rep in range(repeats):
        record = rep > 0  # first repeat is warm-up
        for img in images:
            t0 = time.perf_counter()
            main, w, h = contour_from_image(img, matc_params)
            if not is_dp:
                chain = approximate(main, _REPR_MODE[representation])
            t1 = time.perf_counter()
            if is_dp:
                poly = dominant_polygon(main, matc_params)
                pts = poly.points
            else:
                pts = chain.points
            t2 = time.perf_counter()
            norm = normalize_points(pts, w, h)
            batch = make_batch([norm], dtype=params["proj_w"].dtype)
            forward(batch, params, buffers, model_config, mode="eval")
            t3 = time.perf_counter()
            if record:
                extract_t.append((t1 - t0) * 1e3)
                matc_t.append((t2 - t1) * 1e3 if is_dp else 0.0)
                infer_t.append((t3 - t2) * 1e3)

    def stats(values):
        arr = np.asarray(values)
        std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        return float(arr.mean()), std, float(np.median(arr))

    ext_mean, ext_std, ext_med = stats(extract_t)
    matc_mean, matc_std, matc_med = stats(matc_t)
    inf_mean, inf_std, inf_med = stats(infer_t)
    if not is_dp:
        matc_mean = matc_std = matc_med = 0.0
    return TimingRow(
        dataset=dataset_name,
        pipeline=representation,
        contour_extract_ms=ext_mean,
        matc_ms=matc_mean,
        inference_ms=inf_mean,
        total_ms=ext_mean + matc_mean + inf_mean,
        samples=len(images),
        contour_extract_std=ext_std,
        matc_std=matc_std,
        inference_std=inf_std,
        contour_extract_med=ext_med,
        matc_med=matc_med,
        inference_med=inf_med,
    )


def result_table(runs) -> list[ResultRow]:
    """runs: iterable of (dataset, method, Metrics, ModelConfig, mean_n)."""
    rows = [
        ResultRow(
            dataset=dataset,
            method=method,
            f1=metrics.macro_f1,
            accuracy=metrics.accuracy,
            flops=count_flops(config, max(1, int(round(mean_n)))),
        )
        for dataset, method, metrics, config, mean_n in runs
    ]
    rows.sort(key=lambda r: (r.dataset, r.method))
    return rows


def _format_cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def render_text_table(rows) -> str:
    """Aligned fixed-width table for the terminal."""
    if not rows:
        raise ConfigError("no rows to render")
    names = [f.name for f in fields(rows[0])]
    cells = [names] + [[_format_cell(getattr(r, n)) for n in names] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(names))]
    lines = []
    for row in cells:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_csv(rows) -> str:
    """CSV with a header row of the dataclass field names."""
    if not rows:
        raise ConfigError("no rows to render")
    names = [f.name for f in fields(rows[0])]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for r in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, n) for n in names)])
    return buf.getvalue()


def emit_report(rows, fmt: str, out_path) -> None:
    """Write rows as 'table' or 'csv'; identical rows produce identical bytes."""
    if fmt == "table":
        text = render_text_table(rows)
    elif fmt == "csv":
        text = render_csv(rows)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(out_path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
