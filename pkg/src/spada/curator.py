"""Curator HTTP API: a thin, single-writer web front end over a study.

All mutating endpoints demand the client's last seen ledger head
(last_seen_seq) and answer 409 when the ledger has moved on, so concurrent
curators get an explicit conflict instead of a silent overwrite. Every
successful mutation persists the ledger before returning.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from .catalog import DependencyClass, ThreatAgent, ThreatStatus
from .embracer import DEFAULT_THRESHOLD, METRIC_JACCARD, CurationSession
from .errors import (
    InvalidThreshold,
    ReplayError,
    SpadaError,
    StaleSuggestion,
    UnknownAsset,
    UnknownSuggestion,
    UnknownThreat,
)
from .oplog import StepTag, Study, stage_counts, track_map
from .pipeline import ALL_ASSETS, run_step1, run_step2, run_step3
from .reportio import emit_flow_diagram, export_reserve_list, export_threat_model

__all__ = ["create_app"]


class OperationIn(BaseModel):
    last_seen_seq: int
    kind: str = Field(pattern="^(discard|embrace|embrace_assets|rename|derive|combine)$")
    # Omitted step means "wherever the study currently is".
    step: Optional[str] = None
    rationale: Optional[str] = None
    # Operation-specific fields; unused ones stay None.
    threat: Optional[str] = None
    members: Optional[list[str]] = None
    description: Optional[str] = None
    reason: Optional[str] = None
    assets: Optional[list[str]] = None
    all_assets: bool = False


class AcceptIn(BaseModel):
    last_seen_seq: int
    description: Optional[str] = None


class RejectIn(BaseModel):
    last_seen_seq: int


class MatrixPutIn(BaseModel):
    last_seen_seq: int
    assets: list[str]


class CombineAllIn(BaseModel):
    last_seen_seq: int
    rows: Optional[list[dict]] = None  # [{threat: id, assets: [id] | "*"}]


def _require(value: Optional[str], name: str) -> str:
    if value is None or not str(value).strip():
        raise HTTPException(status_code=422, detail=f"field {name!r} is required")
    return value


def create_app(
    workspace=None,
    study: Optional[Study] = None,
    threshold: Optional[float] = None,
    metric: Optional[str] = None,
    static_dir: Optional[str] = None,
) -> FastAPI:
    """Build the API over a workspace (persisted) or an in-memory study.

    workspace: a cli.Workspace; its catalog and ledger load at startup and
    the ledger is rewritten after every accepted mutation.
    """
    if study is None:
        if workspace is None:
            raise SpadaError("create_app needs a workspace or a study")
        study = Study(workspace.load_catalog(), workspace.load_ledger())
    if threshold is None:
        threshold = getattr(workspace, "threshold", DEFAULT_THRESHOLD)
    if metric is None:
        metric = getattr(workspace, "metric", METRIC_JACCARD)
    name = getattr(workspace, "name", "study")

    session = CurationSession(study, threshold=threshold, metric=metric)
    write_lock = threading.Lock()

    app = FastAPI(title="spada curator", version="0.1.0")

    def persist() -> None:
        if workspace is not None:
            workspace.save_ledger(study.ledger)

    def check_head(last_seen_seq: int) -> None:
        head = study.ledger.head_seq
        if last_seen_seq != head:
            raise HTTPException(
                status_code=409,
                detail={"error": "stale head", "head_seq": head, "last_seen_seq": last_seen_seq},
            )

    def head_payload() -> dict:
        return {"head_seq": study.ledger.head_seq, "digest": study.catalog.digest()}

    @app.exception_handler(SpadaError)
    def _spada_error(request, exc: SpadaError):  # pragma: no cover - thin mapping
        from fastapi.responses import JSONResponse

        status = 400
        if isinstance(exc, (UnknownThreat, UnknownAsset, UnknownSuggestion)):
            status = 404
        elif isinstance(exc, StaleSuggestion):
            status = 409
        elif isinstance(exc, ReplayError):
            status = 500
        elif isinstance(exc, InvalidThreshold):
            status = 422
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    # ---- reads

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "name": name, **head_payload()}

    @app.get("/head")
    def head() -> dict:
        return head_payload()

    @app.get("/setup")
    def setup() -> dict:
        d = study.catalog.to_dict()
        return {"setup": d["setup"], "sources": d["sources"], "lexicon": d["lexicon"]}

    def _agent_param(raw: str) -> ThreatAgent:
        lowered = raw.strip().lower()
        for a in ThreatAgent:
            if lowered in (a.value.lower(), a.display.lower()):
                return a
        raise HTTPException(status_code=422, detail=f"unknown agent {raw!r}")

    def _asset_param(raw: str) -> str:
        if raw in study.catalog.assets:
            return raw
        lowered = raw.strip().lower()
        for a in study.catalog.assets.values():
            if a.name.lower() == lowered:
                return a.id
        raise HTTPException(status_code=404, detail=f"unknown asset {raw!r}")

    @app.get("/threats")
    def threats(
        status: Optional[str] = Query(default=None),
        dependency: Optional[str] = Query(default=None),
        agent: Optional[str] = Query(default=None),
        asset: Optional[str] = Query(default=None),
        track: Optional[str] = Query(default=None),
        combined: Optional[bool] = Query(default=None),
        q: Optional[str] = Query(default=None),
    ) -> dict:
        tracks = track_map(study.catalog)
        want_agent = _agent_param(agent) if agent is not None else None
        want_asset = _asset_param(asset) if asset is not None else None
        rows = []
        for t in study.catalog.threats.values():
            if status is not None and t.status.value != status:
                continue
            if dependency is not None and t.dependency.value != dependency:
                continue
            if want_agent is not None and want_agent not in t.agents:
                continue
            if want_asset is not None and (
                t.combination is None or t.combination[1] != want_asset
            ):
                continue
            if track is not None and tracks.get(t.id) != track:
                continue
            if combined is not None and (t.combination is not None) != combined:
                continue
            if q is not None and q.lower() not in t.description.lower():
                continue
            row = t.to_dict()
            row["track"] = tracks.get(t.id)
            rows.append(row)
        rows.sort(key=lambda r: (r["description"].lower(), r["id"]))
        return {"threats": rows, **head_payload()}

    @app.get("/assets")
    def assets() -> dict:
        rows = [a.to_dict() for a in study.catalog.assets.values()]
        rows.sort(key=lambda r: (r["name"].lower(), r["id"]))
        return {"assets": rows, **head_payload()}

    @app.get("/counts")
    def counts() -> dict:
        return {"counts": stage_counts(study.catalog), **head_payload()}

    @app.get("/flows")
    def flows() -> dict:
        out = [run_step1(study.base, study.ledger)[1]]
        if study.catalog.domain_dependent_mode:
            out.append(run_step2(study.base, study.ledger)[1])
        out.append(run_step3(study.base, study.ledger, [])[1])
        return {"flows": [f.to_dict() for f in out], **head_payload()}

    @app.get("/suggestions")
    def suggestions() -> dict:
        return {
            "suggestions": [s.to_dict() for s in session.pending()],
            "threshold": session.threshold,
            "metric": session.metric,
            **head_payload(),
        }

    @app.get("/matrix")
    def matrix() -> dict:
        parents = [
            t
            for t in study.catalog.active_threats()
            if t.combination is None and t.dependency is DependencyClass.DOMAIN_INDEPENDENT
        ]
        parents.sort(key=lambda t: (t.description.lower(), t.id))
        cells: dict[str, list[str]] = {t.id: [] for t in parents}
        for t in study.catalog.active_threats():
            if t.combination is not None:
                tid, aid = t.combination
                cells.setdefault(tid, []).append(aid)
        for aids in cells.values():
            aids.sort()
        asset_rows = sorted(study.catalog.assets.values(), key=lambda a: (a.name.lower(), a.id))
        return {
            "threats": [{"id": t.id, "description": t.description} for t in parents],
            "assets": [{"id": a.id, "name": a.name} for a in asset_rows],
            "cells": cells,
            **head_payload(),
        }

    # ---- exports

    @app.get("/exports/threat-model", response_class=PlainTextResponse)
    def threat_model(format: str = "csv", combined: bool = False) -> str:
        return export_threat_model(study.catalog, format, include_combined=combined)

    @app.get("/exports/reserve-list", response_class=PlainTextResponse)
    def reserve_list(format: str = "csv") -> str:
        return export_reserve_list(study.catalog, format)

    @app.get("/diagram", response_class=PlainTextResponse)
    def diagram(format: str = "mermaid") -> str:
        out = [run_step1(study.base, study.ledger)[1]]
        if study.catalog.domain_dependent_mode:
            out.append(run_step2(study.base, study.ledger)[1])
        out.append(run_step3(study.base, study.ledger, [])[1])
        return emit_flow_diagram(out, format)

    # ---- mutations

    @app.post("/operations")
    def operations(body: OperationIn) -> dict:
        with write_lock:
            check_head(body.last_seen_seq)
            if body.step is None:
                step = study.current_step
            else:
                try:
                    step = StepTag(body.step)
                except ValueError:
                    raise HTTPException(status_code=422, detail=f"unknown step {body.step!r}")
            if body.kind == "discard":
                record = study.record_discard(
                    _require(body.threat, "threat"),
                    _require(body.reason, "reason"),
                    step=step,
                    rationale=body.rationale,
                )
                result: dict = {}
            elif body.kind == "rename":
                record = study.record_rename(
                    _require(body.threat, "threat"),
                    _require(body.description, "description"),
                    step=step,
                    rationale=body.rationale,
                )
                result = {}
            elif body.kind == "derive":
                record, new_id = study.record_derive_independent(
                    _require(body.threat, "threat"),
                    _require(body.description, "description"),
                    step=step,
                    rationale=body.rationale,
                )
                result = {"created": new_id}
            elif body.kind == "embrace":
                if not body.members:
                    raise HTTPException(status_code=422, detail="field 'members' is required")
                record, new_id = study.record_embrace(
                    body.members,
                    _require(body.description, "description"),
                    step=step,
                    rationale=body.rationale,
                )
                result = {"created": new_id}
            elif body.kind == "embrace_assets":
                if not body.members:
                    raise HTTPException(status_code=422, detail="field 'members' is required")
                record, new_id = study.record_embrace_assets(
                    body.members,
                    _require(body.description, "description"),
                    step=step,
                    rationale=body.rationale,
                )
                result = {"created": new_id}
            elif body.kind == "combine":
                asset_ids = (
                    sorted(study.catalog.assets) if body.all_assets else list(body.assets or [])
                )
                record, child_ids = study.record_combine(
                    _require(body.threat, "threat"), asset_ids, step=step, rationale=body.rationale
                )
                result = {"created_count": len(child_ids)}
            else:  # pragma: no cover - pydantic pattern restricts
                raise HTTPException(status_code=422, detail=f"unknown kind {body.kind!r}")
            session.refresh()
            persist()
            return {"record": record.to_dict(), **result, **head_payload()}

    @app.post("/suggestions/{suggestion_id}/accept")
    def accept(suggestion_id: str, body: AcceptIn) -> dict:
        with write_lock:
            check_head(body.last_seen_seq)
            record, new_id = session.accept(suggestion_id, description=body.description)
            persist()
            return {"record": record.to_dict(), "created": new_id, **head_payload()}

    @app.post("/suggestions/{suggestion_id}/reject")
    def reject(suggestion_id: str, body: RejectIn) -> dict:
        with write_lock:
            check_head(body.last_seen_seq)
            session.reject(suggestion_id)
            return {"rejected": suggestion_id, **head_payload()}

    @app.put("/matrix/{threat_id}")
    def put_matrix_row(threat_id: str, body: MatrixPutIn) -> dict:
        with write_lock:
            check_head(body.last_seen_seq)
            parent = study.catalog.get_threat(threat_id)
            existing = sorted(
                t.combination[1]
                for t in study.catalog.threats.values()
                if t.active and t.combination is not None and t.combination[0] == parent.id
            )
            wanted = sorted(set(body.assets))
            for aid in wanted:
                study.catalog.get_asset(aid)
            removed = [aid for aid in existing if aid not in wanted]
            if removed:
                raise HTTPException(
                    status_code=400,
                    detail={
                        "error": "combinations cannot be removed, only added",
                        "already_combined": removed,
                    },
                )
            added = [aid for aid in wanted if aid not in existing]
            record_dict = None
            if added:
                record, _ = study.record_combine(parent.id, added, step=StepTag.STEP3)
                record_dict = record.to_dict()
                session.refresh()
                persist()
            return {"record": record_dict, "added": added, **head_payload()}

    @app.post("/combine-all")
    def combine_all(body: CombineAllIn) -> dict:
        with write_lock:
            check_head(body.last_seen_seq)
            if body.rows is not None:
                rows = [
                    (
                        r["threat"],
                        ALL_ASSETS if r.get("assets") == ALL_ASSETS else list(r.get("assets", [])),
                    )
                    for r in body.rows
                ]
            else:
                if workspace is None:
                    raise HTTPException(status_code=422, detail="no matrix rows given")
                rows = workspace.load_matrix()
            applied = 0
            existing = {
                t.combination
                for t in study.catalog.threats.values()
                if t.active and t.combination is not None
            }
            for tid, assets in rows:
                parent = study.catalog.get_threat(tid)
                asset_ids = sorted(study.catalog.assets) if assets == ALL_ASSETS else list(assets)
                for aid in asset_ids:
                    study.catalog.get_asset(aid)
                todo = [aid for aid in asset_ids if (parent.id, aid) not in existing]
                if not todo:
                    continue
                study.record_combine(parent.id, todo, step=StepTag.STEP3)
                existing.update((parent.id, aid) for aid in todo)
                applied += 1
            session.refresh()
            persist()
            return {"rows_applied": applied, "counts": stage_counts(study.catalog), **head_payload()}

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(Path(static_dir)), html=True), name="workbench")

    return app
