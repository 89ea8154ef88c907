"""Command-line entry point.

Batch workflows (preprocess/train/eval/bench/inspect) run in-process against
local files; `serve` starts the FastAPI inference service and `classify` is
a thin HTTP client for it.
"""

from __future__ import annotations

import argparse
import base64
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import emit_report, render_text_table, result_table, time_pipeline
from .config import RunConfig, build_run_config, echo_effective_config
from .contours import contours_to_svg
from .data import (
    REPRESENTATIONS,
    load_idx,
    load_image_folder,
    points_from_image,
    preprocess_dataset,
    read_cache,
    stratified_split,
)
from .errors import ConfigError, PolyclassError
from .image_prep import GrayImage, Image
from .matc import contour_from_image
from .model import (
    init_buffers,
    init_params,
    load_checkpoint,
    num_parameters,
    save_checkpoint,
)
from .synthetic import (
    encode_pgm,
    generate_blob_dataset,
    generate_shape_dataset,
    write_idx,
)
from .training import evaluate, train


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="plain-text key=value config file")
    p.add_argument("--representation", choices=REPRESENTATIONS)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir", help="output directory (config: output_dir)")
    p.add_argument("--dataset-kind", choices=("idx", "folder"))
    p.add_argument("--images", help="IDX images file")
    p.add_argument("--labels", help="IDX labels file")
    p.add_argument("--root", help="folder-per-class dataset root")
    p.add_argument("--limit", type=int, help="use only the first N samples")
    p.add_argument("--polarity", choices=("auto", "foreground-dark", "foreground-light"))
    p.add_argument("--nu-mode", choices=("adaptive", "fixed"))
    p.add_argument("--nu", type=float)
    p.add_argument("--min-separation", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)


def _overrides(args) -> dict:
    pairs = {
        "representation": args.representation,
        "seed": None if args.seed is None else str(args.seed),
        "output_dir": args.out_dir,
        "dataset.kind": args.dataset_kind,
        "dataset.images": args.images,
        "dataset.labels": args.labels,
        "dataset.root": args.root,
        "dataset.limit": None if args.limit is None else str(args.limit),
        "matc.polarity": args.polarity,
        "matc.nu_mode": args.nu_mode,
        "matc.nu": None if args.nu is None else str(args.nu),
        "matc.min_separation": None if args.min_separation is None else str(args.min_separation),
        "train.lr": None if args.lr is None else str(args.lr),
        "train.batch_size": None if args.batch_size is None else str(args.batch_size),
        "train.max_epochs": None if args.max_epochs is None else str(args.max_epochs),
        "train.patience": None if args.patience is None else str(args.patience),
    }
    return {k: v for k, v in pairs.items() if v is not None}


def _config_from(args) -> RunConfig:
    return build_run_config(args.config, _overrides(args))


def _load_raw(cfg: RunConfig):
    """Returns (rows of (image, label, source), class_names or None)."""
    spec = cfg.dataset
    if spec.kind == "idx":
        if not spec.images or not spec.labels:
            raise ConfigError("idx dataset needs dataset.images and dataset.labels")
        rows = load_idx(spec.images, spec.labels)
        class_names = None
    elif spec.kind == "folder":
        if not spec.root:
            raise ConfigError("folder dataset needs dataset.root")
        rows, class_names = load_image_folder(spec.root)
    else:
        raise ConfigError(f"unknown dataset kind {spec.kind!r}")
    if spec.limit:
        rows = rows[: spec.limit]
    return rows, class_names


def cmd_preprocess(args) -> int:
    cfg = _config_from(args)
    out_dir = cfg.resolved_output_dir()
    echo_effective_config(cfg, out_dir)
    rows, class_names = _load_raw(cfg)
    cache_path = Path(args.out) if args.out else out_dir / f"points-{cfg.representation}-{args.split}.jsonl"
    cache_path.parent.mkdir(parents=True, exist_ok=True)
    ds = preprocess_dataset(
        rows,
        cfg.representation,
        cfg.matc,
        class_names=class_names,
        cache_path=cache_path,
        split=args.split,
    )
    print(f"processed {len(ds)} skipped {len(rows) - len(ds)}")
    print(f"cache written to {cache_path}")
    return 0


def cmd_train(args) -> int:
    cfg = _config_from(args)
    out_dir = cfg.resolved_output_dir()
    echo_effective_config(cfg, out_dir)
    ds, representation = read_cache(args.cache)
    train_set, val_set = stratified_split(ds, cfg.train.val_fraction, cfg.train.seed)
    model_config = cfg.model_config(num_classes=ds.num_classes)
    dtype = np.float64 if args.dtype == "float64" else np.float32
    params, buffers, history = train(
        train_set, val_set, model_config, cfg.train, dtype=dtype,
        log_fn=print if not args.quiet else None,
    )
    ckpt_path = out_dir / "model.ckpt"
    save_checkpoint(
        ckpt_path,
        model_config,
        params,
        buffers,
        meta={
            "class_names": ds.class_names,
            "representation": representation,
            "best_epoch": history["best_epoch"],
            "best_val_accuracy": history["best_val_accuracy"],
            "seed": cfg.train.seed,
        },
    )
    (out_dir / "history.json").write_text(json.dumps(history, sort_keys=True, indent=2))
    print(
        f"trained {num_parameters(params)} parameters; best val accuracy "
        f"{history['best_val_accuracy']:.4f} at epoch {history['best_epoch']}"
    )
    print(f"checkpoint written to {ckpt_path}")
    return 0


def _metrics_lines(metrics, class_names):
    lines = [
        f"accuracy  {metrics.accuracy:.4f}",
        f"macro_f1  {metrics.macro_f1:.4f}",
        "class          precision  recall  f1      support",
    ]
    for name, pc in zip(class_names, metrics.per_class):
        lines.append(
            f"{name:<14s} {pc['precision']:.4f}     {pc['recall']:.4f}  "
            f"{pc['f1']:.4f}  {pc['support']}"
        )
    lines.append("confusion (rows = true, cols = predicted):")
    for row in metrics.confusion:
        lines.append("  " + " ".join(f"{v:5d}" for v in row))
    return lines


def cmd_eval(args) -> int:
    cfg = _config_from(args)
    config, params, buffers, meta, _ = load_checkpoint(args.checkpoint)
    ds, _ = read_cache(args.cache)
    if args.val_split:
        _, ds = stratified_split(ds, cfg.train.val_fraction, meta.get("seed", cfg.train.seed))
    metrics = evaluate(params, buffers, config, ds)
    for line in _metrics_lines(metrics, ds.class_names):
        print(line)
    return 0


def cmd_bench(args) -> int:
    cfg = _config_from(args)
    out_dir = cfg.resolved_output_dir()
    echo_effective_config(cfg, out_dir)
    rows, _ = _load_raw(cfg)
    images = [r[0] for r in rows]
    reps = args.representations.split(",") if args.representations else list(REPRESENTATIONS)
    for rep in reps:
        if rep not in REPRESENTATIONS:
            raise ConfigError(f"unknown representation {rep!r}")
    if args.checkpoint:
        model_config, params, buffers, meta, _ = load_checkpoint(args.checkpoint)
    else:
        model_config = cfg.model_config(num_classes=args.num_classes)
        rng = np.random.default_rng(cfg.seed)
        params = init_params(model_config, rng)
        buffers = init_buffers(model_config)
    timing_rows = [
        time_pipeline(
            images, rep, cfg.matc, model_config, params, buffers,
            repeats=args.repeats, dataset_name=args.dataset_name,
        )
        for rep in reps
    ]
    stem = f"timings-{args.dataset_name}"
    emit_report(timing_rows, "csv", out_dir / f"{stem}.csv")
    emit_report(timing_rows, "table", out_dir / f"{stem}.txt")
    print(render_text_table(timing_rows), end="")
    print(f"reports written to {out_dir}/{stem}.csv and {stem}.txt")
    if args.checkpoint:
        representation = meta.get("representation", cfg.representation)
        ds = preprocess_dataset(rows, representation, cfg.matc,
                                class_names=meta.get("class_names"))
        metrics = evaluate(params, buffers, model_config, ds)
        mean_n = float(np.mean([len(s.points) for s in ds.samples]))
        result_rows = result_table(
            [(args.dataset_name, representation, metrics, model_config, mean_n)]
        )
        emit_report(result_rows, "csv", out_dir / f"results-{args.dataset_name}.csv")
        print(render_text_table(result_rows), end="")
        print(f"results written to {out_dir}/results-{args.dataset_name}.csv")
    return 0


def cmd_inspect(args) -> int:
    cfg = _config_from(args)
    out_dir = cfg.resolved_output_dir()
    echo_effective_config(cfg, out_dir)
    rows, _ = _load_raw(cfg)
    rows = rows[: args.n]
    for i, (img, label, source) in enumerate(rows):
        if isinstance(img, GrayImage):
            img = Image(img.pixels[:, :, None].copy())
        main, w, h = contour_from_image(img, cfg.matc)
        pts, _, _ = points_from_image(img, cfg.representation, cfg.matc)
        svg = contours_to_svg([main], w, h, overlay=pts)
        path = out_dir / f"inspect-{i:03d}.svg"
        path.write_text(svg, encoding="utf-8")
        print(f"{path}  label={label}  source={source}  points={len(pts)}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg = _config_from(args)
    app = create_app(args.checkpoint, cfg.matc)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_classify(args) -> int:
    import httpx

    payload = {
        "image_b64": base64.b64encode(Path(args.image).read_bytes()).decode("ascii"),
        "top_k": args.top_k,
    }
    resp = httpx.post(f"{args.server.rstrip('/')}/classify", json=payload, timeout=120.0)
    if resp.status_code != 200:
        print(f"error: server returned {resp.status_code}: {resp.text}", file=sys.stderr)
        return 1
    print(json.dumps(resp.json(), indent=2, sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out_dir or "synth-data")
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "idx":
        images, labels = generate_shape_dataset(args.n_train, seed=args.seed)
        write_idx(images, labels, out / "train-images-idx3-ubyte", out / "train-labels-idx1-ubyte")
        images, labels = generate_shape_dataset(args.n_test, seed=args.seed + 1)
        write_idx(images, labels, out / "test-images-idx3-ubyte", out / "test-labels-idx1-ubyte")
        print(f"wrote IDX files under {out}")
    else:
        images, labels = generate_blob_dataset(
            args.n, seed=args.seed, width=args.width, height=args.height,
            num_classes=args.classes,
        )
        for i, (img, label) in enumerate(zip(images, labels)):
            cdir = out / f"class{label}"
            cdir.mkdir(parents=True, exist_ok=True)
            (cdir / f"blob{i:04d}.pgm").write_bytes(encode_pgm(img))
        print(f"wrote {len(images)} PGM images under {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyclass",
        description="shape classification from compact polygonal representations",
    )
    parser.add_argument("--version", action="version", version=f"polyclass {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="images -> points cache")
    _add_common(p)
    p.add_argument("--out", help="cache file path (default under the output dir)")
    p.add_argument("--split", default="train", help="split tag stored in the cache")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train from a points cache")
    _add_common(p)
    p.add_argument("--cache", required=True, help="points cache from `preprocess`")
    p.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a points cache")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument(
        "--val-split", action="store_true",
        help="evaluate on the seeded validation carve-out of the cache",
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="per-stage timing report")
    _add_common(p)
    p.add_argument("--checkpoint", help="optional trained checkpoint")
    p.add_argument("--representations", help="comma-separated subset to time")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--num-classes", type=int, default=10, help="for the random-init model")
    p.add_argument("--dataset-name", default="dataset")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="write debug SVG overlays")
    _add_common(p)
    p.add_argument("-n", type=int, default=5, help="number of images")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("serve", help="start the FastAPI inference service")
    _add_common(p)
    p.add_argument("--checkpoint", help="checkpoint to serve")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("classify", help="classify an image via a running service")
    p.add_argument("--server", required=True, help="service base URL")
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("image", help="PNG/PGM/PPM file")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("synth", help="generate synthetic datasets")
    p.add_argument("--kind", choices=("idx", "folder"), default="idx")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=200)
    p.add_argument("--n", type=int, default=16, help="folder kind: total images")
    p.add_argument("--classes", type=int, default=4, help="folder kind: class count")
    p.add_argument("--width", type=int, default=1600)
    p.add_argument("--height", type=int, default=1200)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PolyclassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
