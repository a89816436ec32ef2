"""Pydantic request/response models for the service endpoints."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class DeviceStatus(BaseModel):
    last_bpm: float | None = None
    last_hr_ts: int | None = None


class StatusResponse(BaseModel):
    state: str
    pair_id: str | None = None
    segment_index: int | None = None
    segment_count: int | None = None
    modality: str | None = None
    movie: str | None = None
    devices: dict[str, DeviceStatus] = {}
    log_path: str | None = None


class CommandRequest(BaseModel):
    value: str


class CommandResponse(BaseModel):
    ok: bool = True
    detail: str | None = None


class SegmentModel(BaseModel):
    movie: str
    modality: str


class PlanModel(BaseModel):
    pair_id: str
    segments: list[SegmentModel]


class PlansResponse(BaseModel):
    plans: list[PlanModel]


class SynthesizeRequest(BaseModel):
    bpm: float = Field(default=72.0, gt=0, le=300)
    duration_s: float = Field(default=60.0, gt=0, le=3600)
    noise_sigma: float = Field(default=0.0, ge=0)
    artifact_rate_per_min: float = Field(default=0.0, ge=0)
    seed: int = 0
    sample_rate_hz: float = Field(default=100.0, gt=0)


class SynthesizeResponse(BaseModel):
    csv: str
    n_samples: int


class EstimateRequest(BaseModel):
    csv: str
    mode: Literal["magnitude", "real-part"] = "magnitude"
    sample_rate_hz: float = Field(default=100.0, gt=0)


class EstimateItem(BaseModel):
    t_ms: int | None
    bpm: float
    bin: int | None
    mode: str


class EstimateResponse(BaseModel):
    estimates: list[EstimateItem]
