"""HTTP service exposing the toolkit: select, train, tune, synth, eval.

Reports that have an output path in their config are also written to disk
by the service (it runs next to the data), using the same canonical JSON
writer as the CLI so reruns produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import diagnostics, pseudo, selector
from ..classifier import load_head, save_head
from ..errors import PrplError, ValidationError
from ..feature_store import (
    SynthSpec,
    load_feature_set,
    manifest_from_dict,
    save_feature_set,
    synth_gaussian_domains,
)
from ..util import canonical_dumps
from . import schemas

app = FastAPI(title="prpl", version="0.1.0")


@app.exception_handler(PrplError)
async def prpl_error_handler(request: Request, exc: PrplError):
    status = 422 if exc.kind == "validation" else 400
    body = schemas.ErrorBody(
        error=schemas.ErrorDetail(kind=exc.kind, message=str(exc))
    )
    return JSONResponse(status_code=status, content=body.model_dump())


@app.exception_handler(RequestValidationError)
async def request_validation_handler(request: Request, exc: RequestValidationError):
    body = schemas.ErrorBody(
        error=schemas.ErrorDetail(kind="validation", message=str(exc))
    )
    return JSONResponse(status_code=422, content=body.model_dump())


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


def _load_manifest(path: str):
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise PrplError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest {path} is not valid JSON: {exc}") from exc
    return manifest_from_dict(doc)


def _write_report(path: str, payload: dict) -> None:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(canonical_dumps(payload))


def _load_pair(config) -> tuple:
    try:
        source = load_feature_set(config.manifest.source)
        target = load_feature_set(config.manifest.target)
    except OSError as exc:
        raise PrplError(str(exc)) from exc
    # the training path never sees target labels; evaluation is a separate command
    return source, target.without_labels()


@app.post("/select", response_model=schemas.SelectionReportBody)
def select(req: schemas.SelectRequest) -> schemas.SelectionReportBody:
    manifest = _load_manifest(req.manifest_path)
    metric = selector.SelectionMetric(kind=req.metric)
    report = selector.select_best(
        manifest, req.source_domain, req.target_domain, metric
    )
    return schemas.SelectionReportBody(**report.to_dict())


@app.post("/train", response_model=schemas.RunReportBody)
def train(req: schemas.TrainRequest):
    config = req.config
    source, target = _load_pair(config)
    rc = config.to_recurrent_config()
    head, report = pseudo.recurrent_fit(source, target, rc)
    payload = report.to_dict()
    _write_report(config.output.report, payload)
    if config.output.head is not None:
        out = Path(config.output.head)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_head(head, out)
    # return the document exactly as written to disk
    return JSONResponse(content=payload)


@app.post("/tune", response_model=schemas.TuningTableBody)
def tune(req: schemas.TuneRequest):
    config = req.config
    source, target = _load_pair(config)
    grid = diagnostics.TuneGrid(
        iteration_values=tuple(config.grid.T),
        p_schedules=tuple(tuple(s) for s in config.grid.p_schedules),
    )
    table = diagnostics.tune(source, target, grid, config.train.to_train_config())
    payload = table.to_dict()
    if config.output is not None:
        _write_report(config.output.report, payload)
    return JSONResponse(content=payload)


@app.post("/synth", response_model=schemas.SynthResponse)
def synth(req: schemas.SynthRequest) -> schemas.SynthResponse:
    spec = SynthSpec(
        num_classes=req.num_classes,
        d=req.d,
        n_per_class_source=req.n_per_class_source,
        n_per_class_target=req.n_per_class_target,
        class_mean_separation=req.class_mean_separation,
        domain_shift=req.domain_shift,
        noise_sigma=req.noise_sigma,
    )
    source, target = synth_gaussian_domains(spec, req.seed)
    prefix = Path(req.out_prefix)
    if prefix.parent != Path("."):
        prefix.parent.mkdir(parents=True, exist_ok=True)
    source_path = f"{req.out_prefix}.source.prplfs"
    target_path = f"{req.out_prefix}.target.prplfs"
    try:
        save_feature_set(source, source_path)
        save_feature_set(target, target_path)
    except OSError as exc:
        raise PrplError(f"cannot write feature files: {exc}") from exc
    return schemas.SynthResponse(source=source_path, target=target_path)


@app.post("/eval", response_model=schemas.EvalResponse)
def eval_head(req: schemas.EvalRequest) -> schemas.EvalResponse:
    try:
        head = load_head(req.head_path)
        fs = load_feature_set(req.features_path)
    except OSError as exc:
        raise PrplError(str(exc)) from exc
    return schemas.EvalResponse(accuracy=diagnostics.evaluate_accuracy(head, fs))
