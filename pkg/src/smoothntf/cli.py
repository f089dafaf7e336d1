"""Command-line client for the factorization service.

The CLI handles all file I/O (DNT tensors, PPM/PGM images, CSV reports) and
delegates computation to the service: in-process by default, or a remote
instance via ``--server``.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 coercivity check
failed.  Diagnostics go to stderr; results go to files or stdout.
"""

from __future__ import annotations

import math
import os
import sys
from pathlib import Path

import click

from . import __version__
from .client import ServiceClient, ServiceError
from .errors import TensorFormatError
from .formats import read_image_pgm, read_image_ppm, read_tensor, write_csv, write_image_ppm, write_tensor

EXIT_NOT_COERCIVE = 3


def _payload_from_array(x) -> dict:
    from .service.schemas import TensorPayload

    return TensorPayload.from_array(x).model_dump()


def _array_from_payload(payload: dict):
    from .service.schemas import TensorPayload

    return TensorPayload.model_validate(payload).to_array()


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip() != ""]
    except ValueError:
        raise click.UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _read_tensor_arg(path: str, what: str):
    try:
        return read_tensor(path)
    except (TensorFormatError, OSError) as exc:
        raise click.ClickException(f"cannot read {what} from {path}: {exc}") from exc


def _write_model_dir(directory: Path, model_payload: dict) -> None:
    import numpy as np

    directory.mkdir(parents=True, exist_ok=True)
    weights = model_payload.get("weights")
    if weights is not None:
        write_tensor(directory / "lambda.dnt", np.asarray(weights, dtype=np.float64))
    for n, factor in enumerate(model_payload["factors"], start=1):
        write_tensor(directory / f"factor_{n}.dnt", _array_from_payload(factor))


def _read_model_dir(directory: Path) -> dict:
    factors = sorted(directory.glob("factor_*.dnt"), key=lambda p: int(p.stem.split("_")[1]))
    if not factors:
        raise click.ClickException(f"no factor_*.dnt files in {directory}")
    payload: dict = {"factors": [_payload_from_array(_read_tensor_arg(str(p), "factor")) for p in factors]}
    lambda_path = directory / "lambda.dnt"
    if lambda_path.exists():
        payload["weights"] = [float(v) for v in _read_tensor_arg(str(lambda_path), "weights")]
    else:
        payload["weights"] = None
    return payload


def _write_report_csv(path, report: dict) -> None:
    rows = [
        (i, obj, elapsed)
        for i, (obj, elapsed) in enumerate(
            zip(report["objective_trajectory"], report["elapsed_seconds"])
        )
    ]
    write_csv(path, ("iteration", "objective", "elapsed"), rows)


def _call(client: ServiceClient, path: str, payload: dict) -> dict:
    try:
        return client.post(path, payload)
    except ServiceError as exc:
        raise click.ClickException(str(exc)) from exc
    except (OSError, ValueError) as exc:
        raise click.ClickException(f"service call failed: {exc}") from exc


@click.group()
@click.version_option(__version__)
@click.option("--server", default=None, metavar="URL", help="Remote service URL; default runs in-process.")
@click.pass_context
def main(ctx: click.Context, server: str | None):
    """Non-negative tensor factorization with smoothness penalties."""
    ctx.obj = ServiceClient(server=server)


@main.command("gen-toy")
@click.option("--size", required=True, type=int, help="Edge length of the cubic tensor.")
@click.option("--rank", required=True, type=int)
@click.option("--missing", default=0.0, type=float, show_default=True, help="Missing fraction in [0, 1).")
@click.option("--noise", default=10.0, type=float, show_default=True, help="Noise percentage in [0, 100).")
@click.option("--seed", default=None, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.pass_obj
def gen_toy(client: ServiceClient, size: int, rank: int, missing: float, noise: float, seed: int | None, out: Path):
    """Generate a smooth low-rank toy instance: X.dnt, W.dnt and truth/."""
    body = _call(client, "/gen-toy", {
        "size": size, "rank": rank, "missing": missing, "noise": noise, "seed": seed,
    })
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(out / "X.dnt", _array_from_payload(body["x"]))
    write_tensor(out / "W.dnt", _array_from_payload(body["w"]))
    _write_model_dir(out / "truth", body["truth"])
    click.echo(f"wrote {out / 'X.dnt'}, {out / 'W.dnt'}, {out / 'truth'}")


@main.command("factorize")
@click.option("--x", "x_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--w", "w_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--rank", required=True, type=int)
@click.option("--solver", default="hals", type=click.Choice(["hals", "grad"]), show_default=True)
@click.option("--alpha", default="0", show_default=True,
              help="Penalty weight: one value for all modes or a comma list, one per mode.")
@click.option("--mu", default="spline", type=click.Choice(["tv2", "spline"]), show_default=True)
@click.option("--d", default=2, type=int, show_default=True)
@click.option("--p", default=2, type=int, show_default=True)
@click.option("--max-iter", default=10000, type=int, show_default=True)
@click.option("--tol", default=1e-6, type=float, show_default=True)
@click.option("--init", default="svd", type=click.Choice(["svd", "random"]), show_default=True)
@click.option("--seed", default=None, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.pass_obj
def factorize(client: ServiceClient, x_path, w_path, rank, solver, alpha, mu, d, p,
              max_iter, tol, init, seed, out: Path):
    """Fit a penalized non-negative factorization of X under mask W."""
    x = _read_tensor_arg(x_path, "data tensor")
    w = _read_tensor_arg(w_path, "weight mask")
    body = _call(client, "/factorize", {
        "x": _payload_from_array(x),
        "w": _payload_from_array(w),
        "rank": rank,
        "solver": solver,
        "alpha": _parse_floats(alpha),
        "mu": mu,
        "d": d,
        "p": p,
        "max_iter": max_iter,
        "tol": tol,
        "init": init,
        "seed": seed,
    })
    out.mkdir(parents=True, exist_ok=True)
    _write_model_dir(out / "model", body["model"])
    _write_report_csv(out / "report.csv", body["report"])
    report = body["report"]
    if not report["coercive"]:
        click.echo("warning: mask fails the coercivity check", err=True)
    click.echo(
        f"{solver}: {report['iterations']} iterations, "
        f"objective {report['objective_trajectory'][-1]:.6g}, "
        f"converged={report['converged']}"
    )


def _mask_for_image(mask_spec: str, image, seed: int | None):
    from .data import make_mask

    kind, _, arg = mask_spec.partition(":")
    if kind == "uniform":
        if not arg:
            raise click.UsageError("uniform mask needs a fraction, e.g. uniform:0.8")
        try:
            fraction = float(arg)
        except ValueError:
            raise click.UsageError(f"bad mask fraction {arg!r}") from None
        # uniformly chosen pixels lose every channel
        return make_mask(image.shape, "pixelwise", fraction=fraction, seed=seed)
    if kind == "pgm":
        if not arg:
            raise click.UsageError("pgm mask needs a path, e.g. pgm:mask.pgm")
        try:
            stencil = read_image_pgm(arg)
        except (TensorFormatError, OSError) as exc:
            raise click.ClickException(f"cannot read mask stencil {arg}: {exc}") from exc
        return make_mask(image.shape, "stencil", stencil=stencil)
    raise click.UsageError(f"unknown mask kind {kind!r}; expected uniform:F or pgm:PATH")


@main.command("complete")
@click.option("--image", "image_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mask", "mask_spec", required=True, help="uniform:FRACTION or pgm:PATH")
@click.option("--rank", default=50, type=int, show_default=True)
@click.option("--alpha", required=True, type=float, help="Smoothing weight for the two pixel modes.")
@click.option("--solver", default="grad", type=click.Choice(["hals", "grad"]), show_default=True)
@click.option("--max-iter", default=10000, type=int, show_default=True)
@click.option("--tol", default=1e-6, type=float, show_default=True)
@click.option("--init", default="random", type=click.Choice(["svd", "random"]), show_default=True)
@click.option("--seed", default=None, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.pass_obj
def complete(client: ServiceClient, image_path, mask_spec, rank, alpha, solver,
             max_iter, tol, init, seed, out: Path):
    """Complete a color image whose pixels were masked out."""
    try:
        image = read_image_ppm(image_path)
    except (TensorFormatError, OSError) as exc:
        raise click.ClickException(f"cannot read image {image_path}: {exc}") from exc
    w = _mask_for_image(mask_spec, image, seed)
    body = _call(client, "/complete", {
        "image": _payload_from_array(image),
        "w": _payload_from_array(w),
        "rank": rank,
        "alpha": alpha,
        "solver": solver,
        "max_iter": max_iter,
        "tol": tol,
        "init": init,
        "seed": seed,
    })
    out.mkdir(parents=True, exist_ok=True)
    write_image_ppm(out / "completed.ppm", _array_from_payload(body["completed"]))
    _write_report_csv(out / "report.csv", body["report"])

    def render_db(value):
        return math.inf if value is None else value

    write_csv(
        out / "metrics.csv",
        ("metric", "overall", "missing_only"),
        [
            ("psnr", render_db(body["psnr_overall"]), render_db(body["psnr_missing"])),
            ("ssim", body["ssim_overall"], body["ssim_missing"]),
        ],
    )
    click.echo(
        f"completed image written; ssim overall {body['ssim_overall']:.4f}, "
        f"missing-only {body['ssim_missing']:.4f}"
    )


@main.command("cv")
@click.option("--x", "x_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--w", "w_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--grid", default="0,1e-4,1e-3,1e-2,1e-1,1,10", show_default=True,
              help="Comma-separated candidate weights.")
@click.option("--folds", default=5, type=int, show_default=True)
@click.option("--seed", default=None, type=int)
@click.option("--rank", required=True, type=int)
@click.option("--solver", default="grad", type=click.Choice(["hals", "grad"]), show_default=True)
@click.option("--mu", default="spline", type=click.Choice(["tv2", "spline"]), show_default=True)
@click.option("--penalized-modes", default=None,
              help="Comma-separated 0-based modes to smooth; default all but the last.")
@click.option("--max-iter", default=10000, type=int, show_default=True)
@click.option("--tol", default=1e-6, type=float, show_default=True)
@click.option("--convention", default="train-rest", type=click.Choice(["train-rest", "train-one"]),
              show_default=True, help="Fold role: fit on the rest and score one fold, or the reverse.")
@click.option("--out", default=None, type=click.Path(dir_okay=False, path_type=Path),
              help="CSV destination; default stdout.")
@click.pass_obj
def cross_validate(client: ServiceClient, x_path, w_path, grid, folds, seed, rank, solver,
                   mu, penalized_modes, max_iter, tol, convention, out: Path | None):
    """Select the penalty weight by k-fold holdout loss."""
    x = _read_tensor_arg(x_path, "data tensor")
    w = _read_tensor_arg(w_path, "weight mask")
    modes = None
    if penalized_modes is not None:
        modes = [int(v) for v in _parse_floats(penalized_modes)]
    body = _call(client, "/cv", {
        "x": _payload_from_array(x),
        "w": _payload_from_array(w),
        "rank": rank,
        "grid": _parse_floats(grid),
        "folds": folds,
        "seed": seed,
        "solver": solver,
        "mu": mu,
        "penalized_modes": modes,
        "max_iter": max_iter,
        "tol": tol,
        "convention": convention,
    })
    header = ["alpha", "mean_score"] + [f"fold_{k + 1}" for k in range(folds)] + ["selected"]
    rows = []
    for j, a in enumerate(body["grid"]):
        fold_col = [body["fold_scores"][k][j] for k in range(folds)]
        rows.append(
            [a, _nan_if_none(body["mean_scores"][j])]
            + [_nan_if_none(v) for v in fold_col]
            + [1 if a == body["selected_alpha"] else 0]
        )
    write_csv(out if out is not None else sys.stdout, header, rows)
    click.echo(f"selected alpha = {body['selected_alpha']}", err=True)


def _nan_if_none(v):
    return math.nan if v is None else v


@main.command("check-coercivity")
@click.option("--w", "w_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--alpha", required=True, help="Comma-separated per-mode penalty weights.")
@click.pass_obj
def check_coercivity(client: ServiceClient, w_path, alpha):
    """Check that the mask admits a global optimum; exit 3 if not."""
    w = _read_tensor_arg(w_path, "weight mask")
    body = _call(client, "/coercivity", {
        "w": _payload_from_array(w),
        "alpha": _parse_floats(alpha),
    })
    if body["coercive"]:
        click.echo("coercive")
        return
    witness = body["witness"] or []
    where = ", ".join(f"mode {e['mode']} index {e['index']}" for e in witness)
    click.echo(f"not coercive: all-missing slice at {where or 'every entry'}")
    sys.exit(EXIT_NOT_COERCIVE)


@main.command("metrics")
@click.option("--truth", "truth_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--estimate", "estimate_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.pass_obj
def metrics(client: ServiceClient, truth_dir: Path, estimate_dir: Path):
    """Reconstruction error and factor similarity between two model dirs."""
    body = _call(client, "/metrics", {
        "truth": _read_model_dir(truth_dir),
        "estimate": _read_model_dir(estimate_dir),
    })
    write_csv(sys.stdout, ("metric", "value"), [("nmse", body["nmse"]), ("sim", body["sim"])])


if __name__ == "__main__":
    main()
