"""Pydantic request/response models for the inference service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    model_loaded: bool = False


class InfoResponse(BaseModel):
    num_classes: int
    class_names: list[str]
    d_model: int
    num_heads: int
    conv_channels: list[int]
    kernel_size: int
    num_parameters: int
    representation: str


class ExtractRequest(BaseModel):
    image_b64: str = Field(description="base64-encoded PNG or binary PGM/PPM")
    representation: str = "dominant-points"
    nu_mode: str | None = None
    nu: float | None = None
    min_separation: float | None = None


class ExtractResponse(BaseModel):
    width: int
    height: int
    representation: str
    n_points: int
    points: list[list[int]]


class ClassifyRequest(BaseModel):
    image_b64: str | None = None
    points: list[list[float]] | None = Field(
        default=None, description="normalized (x, y) pairs in the unit square"
    )
    top_k: int = 3


class Prediction(BaseModel):
    label: int
    class_name: str
    probability: float


class ClassifyResponse(BaseModel):
    label: int
    class_name: str
    n_points: int
    flops: int
    top: list[Prediction]


class FlopsResponse(BaseModel):
    n_points: int
    flops: int
