"""Request/response models for the HTTP service.

Tensor payloads travel as base64-encoded little-endian float64 buffers next
to an explicit shape, i.e. the DNT payload without its header.  Factor
models carry optional per-component weights; their absence marks a raw
(unnormalized) model.  Infinite metric values (PSNR of a perfect
reconstruction) are transported as ``null`` since JSON has no Infinity.
"""

from __future__ import annotations

import base64
import math

import numpy as np
from pydantic import BaseModel, Field, field_validator

from ..model import FactorModel, NormalizedFactorModel, normalize
from ..solvers import FitReport


class TensorPayload(BaseModel):
    shape: list[int] = Field(min_length=1)
    data: str = Field(description="base64 little-endian float64, row-major")

    @field_validator("shape")
    @classmethod
    def _positive_dims(cls, dims: list[int]) -> list[int]:
        if any(d < 1 for d in dims):
            raise ValueError("dimensions must be >= 1")
        return dims

    @classmethod
    def from_array(cls, x: np.ndarray) -> "TensorPayload":
        x = np.ascontiguousarray(x, dtype="<f8")
        return cls(shape=list(x.shape), data=base64.b64encode(x.tobytes()).decode())

    def to_array(self) -> np.ndarray:
        raw = base64.b64decode(self.data)
        expected = 8 * int(np.prod(self.shape, dtype=np.int64))
        if len(raw) != expected:
            raise ValueError(f"payload holds {len(raw)} bytes, shape needs {expected}")
        values = np.frombuffer(raw, dtype="<f8").reshape(self.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("payload contains non-finite values")
        return np.ascontiguousarray(values, dtype=np.float64)


class ModelPayload(BaseModel):
    """Factor model; ``weights`` present means normalized columns."""

    weights: list[float] | None = None
    factors: list[TensorPayload] = Field(min_length=1)

    @classmethod
    def from_model(cls, model: FactorModel | NormalizedFactorModel) -> "ModelPayload":
        weights = None
        if isinstance(model, NormalizedFactorModel):
            weights = [float(v) for v in model.lambdas]
        return cls(
            weights=weights,
            factors=[TensorPayload.from_array(f) for f in model.factors],
        )

    def to_model(self) -> FactorModel | NormalizedFactorModel:
        factors = tuple(f.to_array() for f in self.factors)
        if self.weights is None:
            return FactorModel(factors=factors)
        return NormalizedFactorModel(lambdas=np.asarray(self.weights), factors=factors)

    def to_normalized(self) -> NormalizedFactorModel:
        model = self.to_model()
        if isinstance(model, NormalizedFactorModel):
            return model
        return normalize(model)


class FitReportPayload(BaseModel):
    iterations: int
    converged: bool
    coercive: bool
    tpi_seconds: float
    objective_trajectory: list[float]
    elapsed_seconds: list[float]
    seed: int | None = None

    @classmethod
    def from_report(cls, report: FitReport) -> "FitReportPayload":
        return cls(
            iterations=report.iterations,
            converged=report.converged,
            coercive=report.coercive,
            tpi_seconds=report.tpi_seconds,
            objective_trajectory=[float(v) for v in report.objective_trajectory],
            elapsed_seconds=[float(v) for v in report.elapsed_seconds],
            seed=report.seed,
        )


class FactorizeRequest(BaseModel):
    x: TensorPayload
    w: TensorPayload
    rank: int = Field(ge=1)
    solver: str = Field(default="hals", pattern="^(hals|grad)$")
    alpha: list[float] = Field(default_factory=lambda: [0.0])
    mu: str = Field(default="spline", pattern="^(tv2|spline)$")
    d: int = 2
    p: int = 2
    max_iter: int = Field(default=10000, ge=1)
    tol: float = Field(default=1e-6, gt=0)
    init: str = Field(default="svd", pattern="^(svd|random)$")
    seed: int | None = None
    inner_iters: int = Field(default=20, ge=1)


class FactorizeResponse(BaseModel):
    model: ModelPayload
    report: FitReportPayload


class GenToyRequest(BaseModel):
    size: int = Field(ge=8)
    rank: int = Field(ge=1)
    missing: float = Field(default=0.0, ge=0.0, lt=1.0)
    noise: float = Field(default=10.0, ge=0.0, lt=100.0)
    seed: int | None = None


class GenToyResponse(BaseModel):
    x: TensorPayload
    w: TensorPayload
    truth: ModelPayload


class CoercivityRequest(BaseModel):
    w: TensorPayload
    alpha: list[float]


class WitnessEntry(BaseModel):
    mode: int
    index: int


class CoercivityResponse(BaseModel):
    coercive: bool
    witness: list[WitnessEntry] | None = None


class CvRequest(BaseModel):
    x: TensorPayload
    w: TensorPayload
    rank: int = Field(ge=1)
    grid: list[float] = Field(min_length=1)
    folds: int = Field(default=5, ge=2)
    seed: int | None = None
    solver: str = Field(default="grad", pattern="^(hals|grad)$")
    mu: str = Field(default="spline", pattern="^(tv2|spline)$")
    penalized_modes: list[int] | None = None
    max_iter: int = Field(default=10000, ge=1)
    tol: float = Field(default=1e-6, gt=0)
    init: str = Field(default="svd", pattern="^(svd|random)$")
    convention: str = Field(default="train-rest", pattern="^(train-rest|train-one)$")


class CvResponse(BaseModel):
    grid: list[float]
    fold_scores: list[list[float | None]]
    mean_scores: list[float | None]
    selected_alpha: float


class CompleteRequest(BaseModel):
    image: TensorPayload
    w: TensorPayload
    rank: int = Field(default=50, ge=1)
    alpha: float = Field(ge=0.0)
    solver: str = Field(default="grad", pattern="^(hals|grad)$")
    max_iter: int = Field(default=10000, ge=1)
    tol: float = Field(default=1e-6, gt=0)
    init: str = Field(default="random", pattern="^(svd|random)$")
    seed: int | None = None


class CompleteResponse(BaseModel):
    completed: TensorPayload
    psnr_overall: float | None
    psnr_missing: float | None
    ssim_overall: float
    ssim_missing: float
    report: FitReportPayload


class MetricsRequest(BaseModel):
    truth: ModelPayload
    estimate: ModelPayload


class MetricsResponse(BaseModel):
    nmse: float
    sim: float


def encode_optional_db(value: float) -> float | None:
    """Map an infinite decibel value to None for JSON transport."""
    return None if math.isinf(value) else value
