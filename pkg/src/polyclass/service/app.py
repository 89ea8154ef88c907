"""FastAPI service: polygonal extraction and classification over HTTP.

The model checkpoint is loaded once at startup; extraction endpoints work
without one. All heavy lifting is delegated to the core package.
"""

from __future__ import annotations

import base64
import binascii
from dataclasses import replace

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..data import REPRESENTATIONS, normalize_points, points_from_image
from ..errors import PolyclassError
from ..image_prep import decode_image
from ..matc import MatcParams
from ..model import count_flops, forward, load_checkpoint, make_batch, num_parameters
from .schemas import (
    ClassifyRequest,
    ClassifyResponse,
    ExtractRequest,
    ExtractResponse,
    FlopsResponse,
    HealthResponse,
    InfoResponse,
    Prediction,
)


class _ModelBundle:
    def __init__(self, checkpoint_path):
        self.config, self.params, self.buffers, self.meta, _ = load_checkpoint(checkpoint_path)
        self.class_names = list(self.meta.get("class_names", []))
        if len(self.class_names) != self.config.num_classes:
            self.class_names = [str(i) for i in range(self.config.num_classes)]
        self.representation = self.meta.get("representation", "dominant-points")


def _decode_b64_image(payload: str):
    try:
        raw = base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise HTTPException(status_code=400, detail=f"invalid base64 image: {exc}") from exc
    try:
        return decode_image(raw)
    except PolyclassError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def create_app(checkpoint_path=None, matc_params: MatcParams | None = None) -> FastAPI:
    app = FastAPI(title="polyclass", version=__version__)
    base_params = matc_params or MatcParams()
    bundle = _ModelBundle(checkpoint_path) if checkpoint_path else None

    def require_model() -> _ModelBundle:
        if bundle is None:
            raise HTTPException(status_code=503, detail="no model checkpoint loaded")
        return bundle

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", model_loaded=bundle is not None)

    @app.get("/info", response_model=InfoResponse)
    def info():
        b = require_model()
        return InfoResponse(
            num_classes=b.config.num_classes,
            class_names=b.class_names,
            d_model=b.config.d_model,
            num_heads=b.config.num_heads,
            conv_channels=list(b.config.conv_channels),
            kernel_size=b.config.kernel_size,
            num_parameters=num_parameters(b.params),
            representation=b.representation,
        )

    @app.post("/extract", response_model=ExtractResponse)
    def extract(req: ExtractRequest):
        if req.representation not in REPRESENTATIONS:
            raise HTTPException(
                status_code=400, detail=f"unknown representation {req.representation!r}"
            )
        img = _decode_b64_image(req.image_b64)
        params = base_params
        overrides = {
            k: v
            for k, v in (
                ("nu_mode", req.nu_mode),
                ("nu", req.nu),
                ("min_separation", req.min_separation),
            )
            if v is not None
        }
        if overrides:
            params = replace(params, **overrides)
        try:
            pts, w, h = points_from_image(img, req.representation, params)
        except PolyclassError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return ExtractResponse(
            width=w,
            height=h,
            representation=req.representation,
            n_points=len(pts),
            points=[[int(x), int(y)] for x, y in pts],
        )

    @app.post("/classify", response_model=ClassifyResponse)
    def classify(req: ClassifyRequest):
        b = require_model()
        if (req.image_b64 is None) == (req.points is None):
            raise HTTPException(
                status_code=400, detail="provide exactly one of image_b64 or points"
            )
        if req.image_b64 is not None:
            img = _decode_b64_image(req.image_b64)
            try:
                pts, w, h = points_from_image(img, b.representation, base_params)
            except PolyclassError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            norm = normalize_points(pts, w, h)
        else:
            norm = np.asarray(req.points, dtype=np.float64)
            if norm.ndim != 2 or norm.shape[1] != 2 or norm.shape[0] < 3:
                raise HTTPException(status_code=400, detail="points must be (N, 2) with N >= 3")
        try:
            batch = make_batch([norm], dtype=b.params["proj_w"].dtype)
            logits = forward(batch, b.params, b.buffers, b.config, mode="eval")[0]
        except PolyclassError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        shifted = logits - logits.max()
        probs = np.exp(shifted) / np.exp(shifted).sum()
        order = np.argsort(-probs)
        top_k = max(1, min(req.top_k, b.config.num_classes))
        top = [
            Prediction(
                label=int(i), class_name=b.class_names[int(i)], probability=float(probs[i])
            )
            for i in order[:top_k]
        ]
        label = int(order[0])
        return ClassifyResponse(
            label=label,
            class_name=b.class_names[label],
            n_points=len(norm),
            flops=count_flops(b.config, len(norm)),
            top=top,
        )

    @app.get("/flops", response_model=FlopsResponse)
    def flops(n_points: int = 60):
        b = require_model()
        if n_points < 1:
            raise HTTPException(status_code=400, detail="n_points must be >= 1")
        return FlopsResponse(n_points=n_points, flops=count_flops(b.config, n_points))

    return app
