"""HTTP/JSON wiring for the allocation service.

Endpoints::

    POST /trials                                  create a trial
    POST /trials/{id}/enrollments                 assign the next patient
    POST /trials/{id}/patients/{k}/outcome        record a response
    GET  /trials/{id}                             status snapshot
    GET  /trials/{id}/events?since=<seq>          journal tail
    GET  /healthz

Mutations accept an optional ``idempotency_key``; repeating a key
returns the original result without a second effect.  When the service
is started with a token, every request must carry it in the
``x-api-token`` header.
"""

from __future__ import annotations

from fastapi import Depends, FastAPI, Header, HTTPException
from pydantic import BaseModel, Field

from .core import (
    DuplicateOutcomeError,
    ServiceValidationError,
    TrialCompletedError,
    TrialService,
    UnknownPatientError,
    UnknownTrialError,
)


class CreateTrialBody(BaseModel):
    design: str = Field(description="rule string, e.g. erade:0.5")
    variant: str = Field(description="binary | gaussian")
    max_n: int
    master_seed: int
    target: str | None = None
    m0: int = 2
    theta0: dict[str, float] | None = None
    idempotency_key: str | None = None


class EnrollBody(BaseModel):
    idempotency_key: str | None = None


class OutcomeBody(BaseModel):
    success: bool | None = None
    value: float | None = None
    idempotency_key: str | None = None


def create_app(journal_dir: str, token: str | None = None) -> FastAPI:
    app = FastAPI(title="adaptrand trial service", version="1")
    service = TrialService(journal_dir)
    app.state.service = service

    def check_token(x_api_token: str | None = Header(default=None)) -> None:
        if token is not None and x_api_token != token:
            raise HTTPException(status_code=401, detail="missing or invalid token")

    guarded = [Depends(check_token)]

    @app.exception_handler(ServiceValidationError)
    async def _validation(request, exc):
        raise HTTPException(status_code=400, detail=str(exc))

    @app.exception_handler(UnknownTrialError)
    async def _unknown_trial(request, exc):
        raise HTTPException(status_code=404, detail=str(exc))

    @app.exception_handler(UnknownPatientError)
    async def _unknown_patient(request, exc):
        raise HTTPException(status_code=404, detail=str(exc))

    @app.exception_handler(DuplicateOutcomeError)
    async def _duplicate(request, exc):
        raise HTTPException(status_code=409, detail=str(exc))

    @app.exception_handler(TrialCompletedError)
    async def _completed(request, exc):
        raise HTTPException(status_code=409, detail=str(exc))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/trials", dependencies=guarded)
    def create_trial(body: CreateTrialBody):
        return service.create_trial(
            design=body.design,
            variant=body.variant,
            max_n=body.max_n,
            master_seed=body.master_seed,
            target=body.target,
            m0=body.m0,
            theta0=body.theta0,
            idempotency_key=body.idempotency_key,
        )

    @app.post("/trials/{trial_id}/enrollments", dependencies=guarded)
    def enroll(trial_id: str, body: EnrollBody | None = None):
        key = body.idempotency_key if body else None
        return service.enroll_next(trial_id, idempotency_key=key)

    @app.post("/trials/{trial_id}/patients/{patient}/outcome", dependencies=guarded)
    def outcome(trial_id: str, patient: int, body: OutcomeBody):
        if (body.success is None) == (body.value is None):
            raise ServiceValidationError("provide exactly one of 'success' or 'value'")
        value: bool | float = body.success if body.success is not None else body.value
        return service.record_outcome(
            trial_id, patient, value, idempotency_key=body.idempotency_key
        )

    @app.get("/trials/{trial_id}", dependencies=guarded)
    def status(trial_id: str):
        return service.get_status(trial_id)

    @app.get("/trials/{trial_id}/events", dependencies=guarded)
    def events(trial_id: str, since: int = 0):
        return {"schema": "trial-events-v1", "events": service.get_events(trial_id, since)}

    return app


def run_server(host: str, port: int, journal_dir: str, token: str | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(journal_dir, token), host=host, port=port, log_level="info")
