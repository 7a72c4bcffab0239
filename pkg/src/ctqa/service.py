"""HTTP service wrapping the engine.

JSON API:
  GET  /v1/health                     liveness
  GET  /v1/studies                    loaded studies and their dims
  POST /v1/studies?study_id=...       upload a CTFV body
  POST /v1/qa      {study_id, question, session?}
  POST /v1/report  {study_id, session?}   (202 + poll URL when async)
  GET  /v1/jobs/{job_id}              async report status
  GET  /v1/history?session=&kind=&trace_id=
Every episode response carries its trace id; the full record is retrievable
from the history endpoint.
"""
from __future__ import annotations

import socket
import threading
import uuid

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import EngineConfig
from .errors import (
    CtqaError,
    FormatError,
    BindFailureError,
    DimensionMismatchError,
    StudyNotFoundError,
    TaskMismatchError,
    UnknownRegionError,
)
from .features import load_volume_bytes
from .orchestration import Engine, QaResult, ReportResult


class QaBody(BaseModel):
    study_id: str
    question: str
    session: str = "default"


class ReportBody(BaseModel):
    study_id: str
    session: str = "default"


def _trace_payload(engine: Engine, trace_id: str, state) -> dict:
    return engine._trace_dict(trace_id, state)


def _qa_payload(engine: Engine, result: QaResult) -> dict:
    return {
        "answer": result.answer,
        "region": result.region.value,
        "regions": [r.value for r in result.regions],
        "trace_id": result.trace_id,
        "trace": _trace_payload(engine, result.trace_id, result.state),
    }


def _report_payload(engine: Engine, result: ReportResult) -> dict:
    return {
        "report": result.report,
        "findings": [
            {"region": f.region.value, "question": f.question, "statement": f.statement}
            for f in result.findings
        ],
        "exemplars": [
            {"index": e.index, "similarity": e.similarity, "report": e.record.report}
            for e in result.exemplars
        ],
        "trace_id": result.trace_id,
        "trace": _trace_payload(engine, result.trace_id, result.state),
    }


def create_app(engine: Engine, cfg: EngineConfig | None = None) -> FastAPI:
    cfg = cfg or EngineConfig()
    app = FastAPI(title="ctqa", version="0.1.0")
    jobs: dict[str, dict] = {}
    jobs_lock = threading.Lock()

    @app.exception_handler(CtqaError)
    async def _engine_error(request: Request, exc: CtqaError):
        status = 500
        if isinstance(exc, StudyNotFoundError):
            status = 404
        elif isinstance(exc, (TaskMismatchError, UnknownRegionError, FormatError,
                              DimensionMismatchError)):
            status = 400
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__, "detail": str(exc)})

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.get("/v1/studies")
    def list_studies():
        out = []
        for study_id in engine.studies.list_ids():
            vf = engine.studies.get(study_id)
            out.append({"study_id": study_id, "T": vf.T, "N": vf.N, "d": vf.d})
        return {"studies": out}

    @app.post("/v1/studies", status_code=201)
    async def upload_study(request: Request, study_id: str = Query(...)):
        body = await request.body()
        vf = load_volume_bytes(body, study_id=study_id, source=f"upload:{study_id}")
        engine.studies.put(vf)
        return {"study_id": study_id, "T": vf.T, "N": vf.N, "d": vf.d}

    @app.post("/v1/qa")
    def qa(body: QaBody):
        result = engine.run_qa(body.question, body.study_id, session=body.session)
        return _qa_payload(engine, result)

    @app.post("/v1/report")
    def report(body: ReportBody):
        if not cfg.async_reports:
            return _report_payload(engine, engine.run_report(body.study_id, session=body.session))
        engine.studies.get(body.study_id)  # fail fast with 404 before accepting
        job_id = uuid.uuid4().hex
        with jobs_lock:
            jobs[job_id] = {"status": "pending"}

        def _run():
            try:
                result = engine.run_report(body.study_id, session=body.session)
                payload = _report_payload(engine, result)
                with jobs_lock:
                    jobs[job_id] = {"status": "done", "result": payload}
            except Exception as exc:  # job errors surface through the poll URL
                with jobs_lock:
                    jobs[job_id] = {"status": "error", "detail": str(exc)}

        threading.Thread(target=_run, daemon=True).start()
        return JSONResponse(
            status_code=202,
            content={"job_id": job_id, "poll_url": f"/v1/jobs/{job_id}"},
        )

    @app.get("/v1/jobs/{job_id}")
    def job_status(job_id: str):
        with jobs_lock:
            job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="no such job")
        return job

    @app.get("/v1/history")
    def history(session: str | None = None, kind: str | None = None,
                trace_id: str | None = None):
        if engine.history is None:
            return {"records": []}
        records = engine.history.query(session=session, kind=kind, trace_id=trace_id)
        return {
            "records": [
                {
                    "ts": r.ts,
                    "session": r.session,
                    "kind": r.kind,
                    "trace": r.trace,
                    "inputs_digest": r.inputs_digest,
                    "output": r.output,
                }
                for r in records
            ]
        }

    return app


def serve(cfg: EngineConfig, engine: Engine | None = None) -> None:
    """Run the service until interrupted; raises BindFailure if the port is taken."""
    import uvicorn

    from .build import build_engine

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((cfg.host, cfg.port))
    except OSError as exc:
        raise BindFailureError(f"cannot bind {cfg.host}:{cfg.port}: {exc}") from exc
    finally:
        probe.close()

    app = create_app(engine if engine is not None else build_engine(cfg), cfg)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")
