"""HTTP service wrapping the factorization library.

Every endpoint is a stateless, synchronous compute call: tensors come in as
payloads, results go back in the response body.  File handling stays with
the clients, so the service itself never touches the filesystem.
"""

from __future__ import annotations

import warnings

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..crossval import cv_select_alpha
from ..data import ToySpec, toy_generate
from ..diagnostics import coercivity_check, nmse, psnr, sim_score, ssim
from ..model import reconstruct
from ..penalties import PenaltyConfig, SplineRoughness, TotalVariation
from ..solvers import SolverConfig, grad_fit, hals_fit
from .schemas import (
    CoercivityRequest,
    CoercivityResponse,
    CompleteRequest,
    CompleteResponse,
    CvRequest,
    CvResponse,
    FactorizeRequest,
    FactorizeResponse,
    FitReportPayload,
    GenToyRequest,
    GenToyResponse,
    MetricsRequest,
    MetricsResponse,
    ModelPayload,
    TensorPayload,
    WitnessEntry,
    encode_optional_db,
)

SEMINORMS = {"tv2": TotalVariation(p=2.0), "spline": SplineRoughness()}


def _seminorm(name: str):
    return SEMINORMS[name]


def _alpha_vector(alpha: list[float], n_modes: int) -> tuple[float, ...]:
    if len(alpha) == 1:
        return tuple(float(alpha[0]) for _ in range(n_modes))
    if len(alpha) != n_modes:
        raise ValueError(f"need 1 or {n_modes} penalty weights, got {len(alpha)}")
    return tuple(float(a) for a in alpha)


def _fit(solver: str):
    return hals_fit if solver == "hals" else grad_fit


def create_app() -> FastAPI:
    app = FastAPI(title="smoothntf", version=__version__)

    @app.exception_handler(ValueError)
    async def _value_error(request, exc: ValueError):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/gen-toy", response_model=GenToyResponse)
    def gen_toy(req: GenToyRequest) -> GenToyResponse:
        spec = ToySpec(
            size=req.size,
            rank=req.rank,
            noise_percent=req.noise,
            missing_fraction=req.missing,
            seed=req.seed,
        )
        _, x, w, truth = toy_generate(spec)
        return GenToyResponse(
            x=TensorPayload.from_array(x),
            w=TensorPayload.from_array(w),
            truth=ModelPayload.from_model(truth),
        )

    @app.post("/factorize", response_model=FactorizeResponse)
    def factorize(req: FactorizeRequest) -> FactorizeResponse:
        x = req.x.to_array()
        w = req.w.to_array()
        alpha = _alpha_vector(req.alpha, x.ndim)
        penalty = PenaltyConfig.for_modes(alpha, _seminorm(req.mu), d=req.d, p=req.p)
        cfg = SolverConfig(
            rank=req.rank,
            penalty=penalty,
            max_iter=req.max_iter,
            rel_tol=req.tol,
            init=req.init,
            seed=req.seed,
            inner_iters=req.inner_iters,
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model, report = _fit(req.solver)(x, w, cfg)
        return FactorizeResponse(
            model=ModelPayload.from_model(model),
            report=FitReportPayload.from_report(report),
        )

    @app.post("/complete", response_model=CompleteResponse)
    def complete(req: CompleteRequest) -> CompleteResponse:
        image = req.image.to_array()
        w = req.w.to_array()
        if image.ndim != 3 or image.shape[2] != 3:
            raise HTTPException(status_code=400, detail="image must be H x W x 3")
        if w.shape != image.shape:
            raise HTTPException(status_code=400, detail="mask shape must match the image")
        # pixel modes are smoothed, the channel mode is left free
        penalty = PenaltyConfig.for_modes(
            (req.alpha, req.alpha, 0.0), TotalVariation(p=2.0)
        )
        cfg = SolverConfig(
            rank=req.rank,
            penalty=penalty,
            max_iter=req.max_iter,
            rel_tol=req.tol,
            init=req.init,
            seed=req.seed,
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model, report = _fit(req.solver)(image, w, cfg)
        filled = np.clip(reconstruct(model), 0.0, 255.0)
        observed = w > 0
        completed = np.where(observed, image, filled)
        missing = ~observed
        if not missing.any():
            raise HTTPException(status_code=400, detail="mask hides no pixels")
        return CompleteResponse(
            completed=TensorPayload.from_array(completed),
            psnr_overall=encode_optional_db(psnr(image, completed)),
            psnr_missing=encode_optional_db(psnr(image, completed, mask=missing)),
            ssim_overall=ssim(image, completed),
            ssim_missing=ssim(image, completed, mask=missing),
            report=FitReportPayload.from_report(report),
        )

    @app.post("/cv", response_model=CvResponse)
    def cross_validate(req: CvRequest) -> CvResponse:
        x = req.x.to_array()
        w = req.w.to_array()
        modes = req.penalized_modes
        if modes is None:
            modes = list(range(x.ndim - 1)) if x.ndim > 1 else [0]
        if any(not 0 <= m < x.ndim for m in modes):
            raise HTTPException(status_code=400, detail="penalized mode out of range")
        pattern = tuple(1.0 if n in modes else 0.0 for n in range(x.ndim))
        penalty = PenaltyConfig.for_modes(pattern, _seminorm(req.mu))
        cfg = SolverConfig(
            rank=req.rank,
            penalty=penalty,
            max_iter=req.max_iter,
            rel_tol=req.tol,
            init=req.init,
            seed=req.seed,
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = cv_select_alpha(
                x,
                w,
                req.grid,
                cfg,
                solver=req.solver,
                folds=req.folds,
                seed=req.seed,
                convention=req.convention,
            )

        def none_if_nan(v: float) -> float | None:
            return None if np.isnan(v) else float(v)

        return CvResponse(
            grid=list(result.grid),
            fold_scores=[[none_if_nan(v) for v in row] for row in result.fold_scores],
            mean_scores=[none_if_nan(v) for v in result.mean_scores],
            selected_alpha=result.selected_alpha,
        )

    @app.post("/coercivity", response_model=CoercivityResponse)
    def coercivity(req: CoercivityRequest) -> CoercivityResponse:
        verdict = coercivity_check(req.w.to_array(), req.alpha)
        witness = None
        if verdict.witness is not None:
            witness = [WitnessEntry(mode=m, index=i) for m, i in sorted(verdict.witness.items())]
        return CoercivityResponse(coercive=verdict.coercive, witness=witness)

    @app.post("/metrics", response_model=MetricsResponse)
    def metrics(req: MetricsRequest) -> MetricsResponse:
        truth = req.truth.to_normalized()
        estimate = req.estimate.to_normalized()
        return MetricsResponse(
            nmse=nmse(reconstruct(truth), reconstruct(estimate)),
            sim=sim_score(truth, estimate),
        )

    return app


app = create_app()
