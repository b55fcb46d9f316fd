"""HTTP front end.  Run with ``timecapsule serve`` or ``uvicorn timecapsule.service.app:app``."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.concurrency import run_in_threadpool

from .. import __version__
from ..errors import TimeCapsuleError
from . import handlers
from .schemas import (
    CalibrateRequest,
    CalibrateResponse,
    Health,
    PuzzleRequest,
    PuzzleResponse,
    SolveRequest,
    SolveResponse,
    VerifyBlockRequest,
    VerifyRequest,
    VerifyResponse,
)

app = FastAPI(title="timecapsule", version=__version__)


async def _call(fn, req):
    # Everything here is CPU-bound, so keep it off the event loop.
    try:
        return await run_in_threadpool(fn, req)
    except (TimeCapsuleError, ValueError, KeyError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None


@app.get("/health", response_model=Health)
def health() -> Health:
    return Health(version=__version__)


@app.post("/puzzle", response_model=PuzzleResponse)
async def puzzle(req: PuzzleRequest):
    return await _call(handlers.puzzle, req)


@app.post("/solve", response_model=SolveResponse)
async def solve(req: SolveRequest):
    return await _call(handlers.solve, req)


@app.post("/calibrate", response_model=CalibrateResponse)
async def calibrate(req: CalibrateRequest):
    return await _call(handlers.calibrate, req)


@app.post("/verify", response_model=VerifyResponse)
async def verify(req: VerifyRequest):
    return await _call(handlers.verify, req)


@app.post("/verify-block", response_model=VerifyResponse)
async def verify_block(req: VerifyBlockRequest):
    return await _call(handlers.verify_block, req)
