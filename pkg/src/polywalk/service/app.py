"""FastAPI application exposing the sampling and benchmark operations."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from polywalk.geometry import DomainError
from polywalk.service import handlers
from polywalk.service import schemas as S

app = FastAPI(title="polywalk", version="0.1.0")


@app.exception_handler(ValueError)
async def _value_error(request: Request, exc: ValueError):
    status = 409 if isinstance(exc, DomainError) else 422
    return JSONResponse(status_code=status, content={"detail": str(exc)})


@app.exception_handler(KeyError)
async def _key_error(request: Request, exc: KeyError):
    return JSONResponse(status_code=422, content={"detail": str(exc.args[0] if exc.args else exc)})


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/grid", response_model=S.ManifestResponse)
def grid(req: S.GridRequest):
    return handlers.grid(req)


@app.post("/ground-truth", response_model=S.GroundTruthResponse)
def ground_truth(req: S.GroundTruthRequest):
    return handlers.ground_truth(req)


@app.post("/sample", response_model=S.SampleResponse)
def sample(req: S.SampleRequest):
    return handlers.sample(req)


@app.post("/bench", response_model=S.BenchResponse)
def bench(req: S.BenchRequest):
    return handlers.run_bench(req)


@app.post("/report", response_model=S.ReportResponse)
def report(req: S.ReportRequest):
    return handlers.report(req)


@app.post("/diagnose", response_model=S.DiagnoseResponse)
def diagnose(req: S.DiagnoseRequest):
    return handlers.diagnose(req)
