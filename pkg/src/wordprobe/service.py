"""HTTP facade over the store and dispatcher for the web UI.

One dispatcher task per experiment, gated by the state machine; live
progress is served both as a polling endpoint and as a server-sent
event stream.
"""

from __future__ import annotations

import asyncio
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response, StreamingResponse

from . import aggregate, lexicon
from .cli import CHAT_URL_ENV
from .dispatch import ControlHandle, DispatchPolicy, Provider, run_experiment
from .providers import HttpChatProvider, MockProvider
from .store import (
    ExperimentSpec,
    ExperimentState,
    IllegalTransition,
    MissingReference,
    ProviderKind,
    Store,
    StoreError,
    UnknownExperiment,
    ValidationError,
    default_template,
    snapshot,
)


@dataclass
class RunHandle:
    control: ControlHandle
    task: asyncio.Task | None = None
    error: str | None = None


def _spec_doc(spec: ExperimentSpec) -> dict:
    return {
        "id": spec.id,
        "name": spec.name,
        "description": spec.description,
        "wordlist_id": spec.wordlist_id,
        "battery_id": spec.battery_id,
        "provider_kind": spec.provider_kind.value,
        "model": spec.model,
        "temperature": spec.temperature,
        "dispatch": vars(spec.dispatch),
        "max_output_tokens": spec.max_output_tokens,
        "system_message": spec.system_message,
        "config": spec.config,
        "created_at": spec.created_at.isoformat(),
        "state": spec.state.value,
    }


def _progress_doc(snap) -> dict:
    return {
        "experiment_id": snap.experiment_id,
        "answered": snap.answered,
        "total": snap.total,
        "yes": snap.yes,
        "no": snap.no,
        "unparseable": snap.unparseable,
        "state": snap.state.value,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def _default_provider_factory(spec: ExperimentSpec, store: Store) -> Provider:
    if spec.provider_kind is ProviderKind.MOCK:
        return MockProvider(battery=store.get_battery(spec.battery_id))
    url = os.environ.get(CHAT_URL_ENV, "")
    if not url:
        raise ValidationError("provider", f"set ${CHAT_URL_ENV} to use the http provider")
    return HttpChatProvider(url)


def create_app(
    store_path: str | Path,
    *,
    provider_factory=None,
    poll_interval: float = 0.1,
    static_dir: str | Path | None = None,
) -> FastAPI:
    """Build the API app around one store file."""
    app = FastAPI(title="wordprobe", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = Store(store_path)
    runs: dict[str, RunHandle] = {}
    factory = provider_factory or _default_provider_factory

    def _get_spec(experiment_id: str) -> ExperimentSpec:
        try:
            return store.get_experiment(experiment_id)
        except UnknownExperiment as e:
            raise HTTPException(status_code=404, detail=str(e)) from e

    @app.get("/api/experiment-templates")
    async def experiment_templates() -> list[dict]:
        return [default_template().to_document()]

    @app.post("/api/experiments", status_code=201)
    async def create_experiment(request: Request) -> dict:
        try:
            body = await request.json()
        except json.JSONDecodeError as e:
            raise HTTPException(status_code=400, detail=f"invalid JSON body: {e}") from e
        name = str(body.get("name", "")).strip()
        if not name:
            raise HTTPException(status_code=400, detail="experiment name is required")
        provider_name = str(body.get("provider", "mock")).lower()
        if provider_name not in ("mock", "http"):
            raise HTTPException(status_code=400, detail=f"unknown provider {provider_name!r}")
        values = body.get("values", {})
        wordlist = store.add_wordlist([], name=f"{name}-words")
        try:
            dispatch = DispatchPolicy(**body.get("dispatch", {}))
            spec = store.create_experiment(
                values,
                wordlist_id=wordlist.id,
                name=name,
                description=str(body.get("description", "")),
                provider_kind=ProviderKind.HTTP_CHAT if provider_name == "http" else ProviderKind.MOCK,
                dispatch=dispatch,
            )
        except (ValidationError, MissingReference) as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        except (TypeError, ValueError) as e:
            raise HTTPException(status_code=400, detail=f"bad dispatch settings: {e}") from e
        return _spec_doc(spec)

    @app.get("/api/experiments")
    async def list_experiments() -> list[dict]:
        return [_spec_doc(s) for s in store.experiments()]

    @app.get("/api/experiments/{experiment_id}")
    async def get_experiment(experiment_id: str) -> dict:
        return _spec_doc(_get_spec(experiment_id))

    @app.post("/api/experiments/{experiment_id}/words")
    async def upload_words(experiment_id: str, request: Request) -> dict:
        spec = _get_spec(experiment_id)
        if spec.state is not ExperimentState.DRAFT:
            raise HTTPException(
                status_code=409,
                detail=f"words can only be loaded while Draft (state is {spec.state.value})",
            )
        body = await request.body()
        try:
            wordlist = lexicon.load_word_list(body)
        except lexicon.IngestError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        store.set_wordlist_words(spec.wordlist_id, wordlist.words)
        report = wordlist.ingest_report
        return {
            "wordlist_id": spec.wordlist_id,
            "words": len(wordlist.words),
            "report": {
                "lines_total": report.lines_total,
                "kept": report.kept,
                "dropped_duplicates": report.dropped_duplicates,
                "skipped_blank": report.skipped_blank,
                "skipped_comments": report.skipped_comments,
                "folded": report.folded,
            },
        }

    async def _drive(spec: ExperimentSpec, provider: Provider, handle: RunHandle) -> None:
        try:
            await run_experiment(spec, provider, store, handle.control)
        except Exception as e:  # surface via /progress; state already Stopped
            handle.error = str(e)
        finally:
            if hasattr(provider, "aclose"):
                await provider.aclose()

    @app.post("/api/experiments/{experiment_id}/start")
    async def start(experiment_id: str) -> dict:
        spec = _get_spec(experiment_id)
        handle = runs.get(experiment_id)
        alive = handle is not None and handle.task is not None and not handle.task.done()
        if spec.state is ExperimentState.PAUSED and alive:
            handle.control.resume()
            store.set_state(experiment_id, ExperimentState.RUNNING)
            return {"state": ExperimentState.RUNNING.value}
        if spec.state is ExperimentState.COMPLETE or (
            spec.state is ExperimentState.RUNNING and alive
        ):
            raise HTTPException(
                status_code=409, detail=f"cannot start from state {spec.state.value}"
            )
        # Draft, Stopped, or a stale Running/Paused left by a dead process
        if not store.get_wordlist(spec.wordlist_id).words:
            raise HTTPException(status_code=400, detail="no words loaded")
        try:
            provider = factory(spec, store)
        except (ValidationError, StoreError) as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        store.set_state(experiment_id, ExperimentState.RUNNING)
        handle = RunHandle(control=ControlHandle())
        handle.task = asyncio.create_task(_drive(spec, provider, handle))
        runs[experiment_id] = handle
        return {"state": ExperimentState.RUNNING.value}

    @app.post("/api/experiments/{experiment_id}/pause")
    async def pause(experiment_id: str) -> dict:
        spec = _get_spec(experiment_id)
        if spec.state is ExperimentState.PAUSED:
            return {"state": spec.state.value}
        if spec.state is not ExperimentState.RUNNING:
            raise HTTPException(
                status_code=409, detail=f"cannot pause from state {spec.state.value}"
            )
        handle = runs.get(experiment_id)
        if handle:
            handle.control.pause()
        try:
            store.set_state(experiment_id, ExperimentState.PAUSED)
        except IllegalTransition:
            return {"state": store.get_experiment(experiment_id).state.value}
        return {"state": ExperimentState.PAUSED.value}

    @app.post("/api/experiments/{experiment_id}/stop")
    async def stop(experiment_id: str) -> dict:
        spec = _get_spec(experiment_id)
        if spec.state in (ExperimentState.STOPPED, ExperimentState.COMPLETE):
            return {"state": spec.state.value}  # repeated stop is a no-op
        if spec.state is ExperimentState.DRAFT:
            raise HTTPException(status_code=409, detail="cannot stop a Draft experiment")
        handle = runs.get(experiment_id)
        if handle:
            handle.control.stop()
            handle.control.resume()  # unfreeze paused tasks so they can exit
        try:
            store.set_state(experiment_id, ExperimentState.STOPPED)
        except IllegalTransition:
            # the run finished everything in the meantime
            return {"state": store.get_experiment(experiment_id).state.value}
        return {"state": ExperimentState.STOPPED.value}

    @app.get("/api/experiments/{experiment_id}/progress")
    async def progress(experiment_id: str) -> dict:
        _get_spec(experiment_id)
        doc = _progress_doc(snapshot(store, experiment_id))
        handle = runs.get(experiment_id)
        if handle and handle.error:
            doc["error"] = handle.error
        return doc

    @app.get("/api/experiments/{experiment_id}/events")
    async def events(experiment_id: str) -> StreamingResponse:
        _get_spec(experiment_id)

        async def stream():
            last: tuple | None = None
            while True:
                snap = snapshot(store, experiment_id)
                doc = _progress_doc(snap)
                key = (doc["answered"], doc["state"])
                if key != last:
                    last = key
                    yield f"data: {json.dumps(doc)}\n\n"
                if snap.state in (ExperimentState.STOPPED, ExperimentState.COMPLETE):
                    return
                await asyncio.sleep(poll_interval)

        return StreamingResponse(
            stream(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    @app.get("/api/experiments/{experiment_id}/histogram")
    async def histogram(experiment_id: str) -> dict:
        _get_spec(experiment_id)
        snap = snapshot(store, experiment_id)
        return aggregate.histogram_document(
            aggregate.histogram(snap.records, list(snap.prompt_ids))
        )

    @app.get("/api/experiments/{experiment_id}/results")
    async def results(
        experiment_id: str, combination: str | None = None, format: str = "json"
    ):
        _get_spec(experiment_id)
        if format not in ("json", "csv"):
            raise HTTPException(status_code=400, detail=f"unknown format {format!r}")
        snap = snapshot(store, experiment_id)
        records = list(snap.records)
        if combination is not None:
            if not combination or any(c not in "01" for c in combination):
                raise HTTPException(
                    status_code=400, detail=f"invalid combination code {combination!r}"
                )
            prompt_ids = list(snap.prompt_ids)
            selected = set()
            for outcome in aggregate.build_outcomes(records, prompt_ids):
                try:
                    if aggregate.encode(outcome) == combination:
                        selected.add(outcome.word)
                except aggregate.AggregateError:
                    continue
            records = [r for r in records if r.word in selected]
        if format == "csv":
            return Response(
                content=aggregate.export_records_csv(records), media_type="text/csv"
            )
        return JSONResponse(content=json.loads(aggregate.export_records_json(records)))

    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
