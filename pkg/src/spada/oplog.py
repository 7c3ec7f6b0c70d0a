"""Event-sourced operation ledger.

Every curation decision is an OperationRecord appended to an append-only
ledger. The catalog snapshot is a pure function of (base catalog, ledger):
replay applies each record in sequence, validating before mutating so a bad
record fails atomically and names its seq. The Study class is the single
writer: it validates an operation against the live catalog, appends the
record, and applies it through the same code path replay uses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .catalog import (
    Catalog,
    DependencyClass,
    Threat,
    ThreatStatus,
    classify_dependency,
    normalize_description,
    threat_id,
)
from .errors import (
    DuplicateAsset,
    DuplicateCombination,
    EmptyAssetList,
    EmptyDescription,
    LedgerError,
    NotActive,
    NotDomainDependent,
    NotDomainIndependent,
    ReplayError,
    SpadaError,
    StillDomainDependent,
    TooFewMembers,
    UnknownThreat,
)

__all__ = [
    "StepTag",
    "OperationKind",
    "OperationRecord",
    "Ledger",
    "Study",
    "apply_record",
    "replay",
    "FlowReport",
    "stage_counts",
    "verify_flow",
    "DEFAULT_COMBINE_TEMPLATE",
    "track_map",
    "TRACK_COLLECTED",
    "TRACK_DERIVED",
    "TRACK_COMBINED",
]

DEFAULT_COMBINE_TEMPLATE = "{threat} — {asset}"

PHASE_PRE = "pre_refinement"
PHASE_POST = "post_refinement"


class StepTag(str, Enum):
    STEP1 = "Step1"
    STEP2 = "Step2"
    STEP3 = "Step3"


STEP_ORDER = {StepTag.STEP1: 1, StepTag.STEP2: 2, StepTag.STEP3: 3}


class OperationKind(str, Enum):
    DISCARD = "Discard"
    EMBRACE = "Embrace"
    RENAME = "Rename"
    DERIVE_INDEPENDENT = "DeriveIndependent"
    COMBINE = "Combine"


@dataclass(frozen=True)
class OperationRecord:
    seq: int
    kind: OperationKind
    payload: dict
    rationale: Optional[str]
    step: StepTag

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "payload": self.payload,
            "rationale": self.rationale,
            "seq": self.seq,
            "step": self.step.value,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "OperationRecord":
        return cls(
            seq=int(d["seq"]),
            kind=OperationKind(d["kind"]),
            payload=dict(d["payload"]),
            rationale=d.get("rationale"),
            step=StepTag(d["step"]),
        )


class Ledger:
    """Append-only record list with gap-free seq numbering starting at 1."""

    def __init__(self, records: Optional[Iterable[OperationRecord]] = None):
        self.records: list[OperationRecord] = []
        for r in records or []:
            self.append(r)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def head_seq(self) -> int:
        return self.records[-1].seq if self.records else 0

    def next_seq(self) -> int:
        return self.head_seq + 1

    def append(self, record: OperationRecord) -> OperationRecord:
        if record.seq != self.next_seq():
            raise LedgerError(f"expected seq {self.next_seq()}, got {record.seq}")
        if self.records and STEP_ORDER[record.step] < STEP_ORDER[self.records[-1].step]:
            raise LedgerError(
                f"step {record.step.value} after {self.records[-1].step.value} at seq {record.seq}"
            )
        self.records.append(record)
        return record

    def to_jsonl(self) -> str:
        return "".join(r.to_json_line() + "\n" for r in self.records)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def from_jsonl(cls, text: str) -> "Ledger":
        ledger = cls()
        for i, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                record = OperationRecord.from_dict(d)
            except (ValueError, KeyError) as exc:
                raise LedgerError(f"bad ledger line {i}: {exc}") from exc
            ledger.append(record)
        return ledger

    @classmethod
    def load(cls, path: str | Path) -> "Ledger":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


# -- record application --------------------------------------------------------

def _require_active(catalog: Catalog, tid: str) -> Threat:
    t = catalog.get_threat(tid)
    if not t.active:
        raise NotActive(f"threat {tid} is {t.status.value}")
    return t


def _apply_discard(catalog: Catalog, record: OperationRecord) -> dict:
    tid = record.payload["threat"]
    t = _require_active(catalog, tid)
    t.status = ThreatStatus.DISCARDED
    t.lineage.append(record.seq)
    return {"discarded": tid}


def _apply_embrace_threats(catalog: Catalog, record: OperationRecord) -> dict:
    member_ids = list(record.payload["members"])
    if len(set(member_ids)) < 2:
        raise TooFewMembers("embrace needs at least two distinct members")
    description = record.payload["description"]
    if not normalize_description(description):
        raise EmptyDescription("embrace needs a merged description")
    members = [_require_active(catalog, tid) for tid in member_ids]
    origin = frozenset().union(*(m.origin for m in members))
    agents = frozenset().union(*(m.agents for m in members))
    properties = frozenset().union(*(m.properties for m in members))
    dependency = (
        DependencyClass.DOMAIN_DEPENDENT
        if any(m.dependency is DependencyClass.DOMAIN_DEPENDENT for m in members)
        else DependencyClass.DOMAIN_INDEPENDENT
    )
    new_id = threat_id(description, origin, salt=f"embrace:{record.seq}")
    merged = Threat(
        id=new_id,
        description=description.strip(),
        dependency=dependency,
        agents=agents,
        properties=properties,
        origin=origin,
        lineage=[record.seq],
    )
    # All validation passed; mutate.
    catalog.threats[new_id] = merged
    for m in members:
        m.status = ThreatStatus.MERGED_INTO
        m.merged_into = new_id
        m.lineage.append(record.seq)
    return {"threat": new_id}


def _apply_embrace_assets(catalog: Catalog, record: OperationRecord) -> dict:
    member_ids = list(record.payload["members"])
    if len(set(member_ids)) < 2:
        raise TooFewMembers("asset embrace needs at least two distinct members")
    name = record.payload["name"]
    if not normalize_description(name):
        raise EmptyDescription("asset embrace needs a group name")
    members = [catalog.get_asset(aid) for aid in member_ids]
    norm = normalize_description(name)
    for a in catalog.assets.values():
        if a.id not in member_ids and normalize_description(a.name) == norm:
            raise DuplicateAsset(f"asset name {name!r} already present")
    origin = frozenset().union(*(m.origin for m in members))
    from .catalog import Asset, asset_id  # local import avoids a cycle at module load

    new_id = asset_id(name)
    if new_id in catalog.assets and new_id not in member_ids:
        raise DuplicateAsset(f"asset id {new_id!r} already present")
    for aid in member_ids:
        del catalog.assets[aid]
    catalog.assets[new_id] = Asset(id=new_id, name=name.strip(), origin=origin)
    return {"asset": new_id}


def _apply_embrace(catalog: Catalog, record: OperationRecord) -> dict:
    target = record.payload.get("target", "threat")
    if target == "asset":
        return _apply_embrace_assets(catalog, record)
    return _apply_embrace_threats(catalog, record)


def _apply_rename(catalog: Catalog, record: OperationRecord) -> dict:
    tid = record.payload["threat"]
    description = record.payload["description"]
    if not normalize_description(description):
        raise EmptyDescription("rename needs a non-empty description")
    t = _require_active(catalog, tid)
    t.description = description.strip()
    t.lineage.append(record.seq)
    return {"threat": tid}


def _apply_derive_independent(catalog: Catalog, record: OperationRecord) -> dict:
    source_id = record.payload["source"]
    description = record.payload["description"]
    if not normalize_description(description):
        raise EmptyDescription("derive needs a non-empty description")
    source = _require_active(catalog, source_id)
    if source.dependency is not DependencyClass.DOMAIN_DEPENDENT:
        raise NotDomainDependent(f"threat {source_id} is not domain-dependent")
    if classify_dependency(description, catalog.lexicon) is DependencyClass.DOMAIN_DEPENDENT:
        raise StillDomainDependent(f"derived description still domain-marked: {description!r}")
    new_id = threat_id(description, source.origin, salt=f"derive:{record.seq}")
    clone = Threat(
        id=new_id,
        description=description.strip(),
        dependency=DependencyClass.DOMAIN_INDEPENDENT,
        agents=source.agents,
        properties=source.properties,
        origin=source.origin,
        lineage=[record.seq],
    )
    catalog.threats[new_id] = clone
    # The source stays Active and untouched; the record itself links the two.
    return {"threat": new_id}


def _apply_combine(catalog: Catalog, record: OperationRecord) -> dict:
    tid = record.payload["threat"]
    asset_ids = list(record.payload["assets"])
    template = record.payload.get("template", DEFAULT_COMBINE_TEMPLATE)
    if not asset_ids:
        raise EmptyAssetList("combine needs at least one asset")
    parent = _require_active(catalog, tid)
    if parent.dependency is not DependencyClass.DOMAIN_INDEPENDENT:
        raise NotDomainIndependent(f"threat {tid} is not domain-independent")
    assets = [catalog.get_asset(aid) for aid in asset_ids]
    if len(set(asset_ids)) != len(asset_ids):
        raise DuplicateCombination(f"asset repeated in combine of {tid}")
    existing = {
        t.combination
        for t in catalog.threats.values()
        if t.combination is not None and t.active
    }
    new_threats = []
    for asset in assets:
        if (tid, asset.id) in existing:
            raise DuplicateCombination(f"{tid} already combined with {asset.id}")
        description = template.format(threat=parent.description, asset=asset.name)
        child_id = threat_id(description, parent.origin, salt=f"combine:{tid}:{asset.id}")
        if child_id in catalog.threats:
            raise DuplicateCombination(f"combined threat {child_id} already exists")
        new_threats.append(
            Threat(
                id=child_id,
                description=description,
                dependency=DependencyClass.DOMAIN_DEPENDENT,
                agents=parent.agents,
                properties=parent.properties,
                origin=parent.origin,
                lineage=[record.seq],
                combination=(tid, asset.id),
            )
        )
    for t in new_threats:
        catalog.threats[t.id] = t
    return {"threats": [t.id for t in new_threats]}


_APPLIERS = {
    OperationKind.DISCARD: _apply_discard,
    OperationKind.EMBRACE: _apply_embrace,
    OperationKind.RENAME: _apply_rename,
    OperationKind.DERIVE_INDEPENDENT: _apply_derive_independent,
    OperationKind.COMBINE: _apply_combine,
}


def apply_record(catalog: Catalog, record: OperationRecord) -> dict:
    """Apply one record to the catalog. Validation happens before any
    mutation, so a raise leaves the catalog at the pre-record state."""
    return _APPLIERS[record.kind](catalog, record)


def replay(ledger: Ledger | Sequence[OperationRecord], base: Catalog) -> Catalog:
    """Deterministically rebuild the snapshot from the collected base and the
    ledger. Fails atomically with ReplayError(seq, cause) on the first bad
    record. The returned catalog carries the applied records for flow
    accounting."""
    catalog = base.copy()
    applied: list[OperationRecord] = []
    expected = 1
    records = list(ledger)
    for record in records:
        if record.seq != expected:
            raise ReplayError(record.seq, f"expected seq {expected}")
        try:
            apply_record(catalog, record)
        except SpadaError as exc:
            raise ReplayError(record.seq, str(exc)) from exc
        applied.append(record)
        expected += 1
    catalog.applied_records = applied  # type: ignore[attr-defined]
    _check_conservation(catalog, applied)
    return catalog


def applied_records(catalog: Catalog) -> list[OperationRecord]:
    return list(getattr(catalog, "applied_records", []))


def _check_conservation(catalog: Catalog, records: Sequence[OperationRecord]) -> None:
    collected = _collected_count(catalog, records)
    discarded = sum(1 for t in catalog.threats.values() if t.status is ThreatStatus.DISCARDED)
    embrace_loss = 0
    derived = 0
    combined = 0
    for r in records:
        if r.kind is OperationKind.EMBRACE and r.payload.get("target", "threat") == "threat":
            embrace_loss += len(set(r.payload["members"])) - 1
        elif r.kind is OperationKind.DERIVE_INDEPENDENT:
            derived += 1
        elif r.kind is OperationKind.COMBINE:
            combined += len(r.payload["assets"])
    expected_active = collected - discarded - embrace_loss + derived + combined
    actual = catalog.active_count()
    if actual != expected_active:
        raise ReplayError(
            records[-1].seq if records else 0,
            f"conservation violated: active {actual} != expected {expected_active}",
        )


def _created_by_seq(catalog: Catalog, records: Sequence[OperationRecord]) -> dict[int, list[str]]:
    """Map each creating record seq to the threat ids it introduced.

    A threat's first lineage entry is its creation seq only for
    operation-created threats; embrace members share that seq, so they are
    excluded through the record payload.
    """
    by_first: dict[int, list[str]] = {}
    for t in catalog.threats.values():
        if t.lineage:
            by_first.setdefault(t.lineage[0], []).append(t.id)
    created: dict[int, list[str]] = {}
    for r in records:
        if r.kind is OperationKind.EMBRACE and r.payload.get("target", "threat") == "threat":
            members = set(r.payload["members"])
            created[r.seq] = [tid for tid in by_first.get(r.seq, []) if tid not in members]
        elif r.kind in (OperationKind.DERIVE_INDEPENDENT, OperationKind.COMBINE):
            created[r.seq] = list(by_first.get(r.seq, []))
    return created


def _collected_count(catalog: Catalog, records: Sequence[OperationRecord]) -> int:
    created_ids = {tid for ids in _created_by_seq(catalog, records).values() for tid in ids}
    return sum(1 for t in catalog.threats.values() if t.id not in created_ids)


# -- provenance tracks ---------------------------------------------------------

TRACK_COLLECTED = "collected"
TRACK_DERIVED = "derived"
TRACK_COMBINED = "combined"


def track_map(catalog: Catalog, records: Optional[Sequence[OperationRecord]] = None) -> dict[str, str]:
    """Classify every threat by how it entered the model.

    Threats added in collection are collected; derive clones are derived; an
    embrace result is collected as soon as one member is, otherwise derived;
    combine children are combined. The post-embrace stage counts active
    collected-track threats, so redundancy merges of derived clones do not
    disturb the refinement arithmetic.
    """
    if records is None:
        records = applied_records(catalog)
    created = _created_by_seq(catalog, records)
    created_ids = {tid for ids in created.values() for tid in ids}
    tracks: dict[str, str] = {
        t.id: TRACK_COLLECTED for t in catalog.threats.values() if t.id not in created_ids
    }
    for r in records:
        if r.kind is OperationKind.DERIVE_INDEPENDENT:
            for tid in created.get(r.seq, []):
                tracks[tid] = TRACK_DERIVED
        elif r.kind is OperationKind.EMBRACE and r.payload.get("target", "threat") == "threat":
            member_tracks = {tracks.get(mid, TRACK_COLLECTED) for mid in r.payload["members"]}
            result = TRACK_COLLECTED if TRACK_COLLECTED in member_tracks else TRACK_DERIVED
            for tid in created.get(r.seq, []):
                tracks[tid] = result
        elif r.kind is OperationKind.COMBINE:
            for tid in created.get(r.seq, []):
                tracks[tid] = TRACK_COMBINED
    return tracks


# -- recording operations (single writer) --------------------------------------

class Study:
    """Single mutation path: a live catalog plus its ledger.

    Each record_* method validates against the current catalog, appends the
    record, and applies it through the same appliers replay uses, so a live
    study and a replayed one can never drift apart.
    """

    def __init__(self, catalog: Catalog, ledger: Optional[Ledger] = None):
        self.base = catalog.copy()
        self.catalog = catalog.copy()
        self.ledger = Ledger()
        for record in (ledger or Ledger()):
            self._append_and_apply(record)

    def _append_and_apply(self, record: OperationRecord) -> dict:
        # Ledger constraints first so a rejected record never mutates state.
        if record.seq != self.ledger.next_seq():
            raise LedgerError(f"expected seq {self.ledger.next_seq()}, got {record.seq}")
        if self.ledger.records and STEP_ORDER[record.step] < STEP_ORDER[self.ledger.records[-1].step]:
            raise LedgerError(f"step {record.step.value} would go backwards at seq {record.seq}")
        result = apply_record(self.catalog, record)
        self.ledger.append(record)
        self.catalog.applied_records = list(self.ledger.records)  # type: ignore[attr-defined]
        return result

    @property
    def current_step(self) -> StepTag:
        """The step the study has progressed to: new records may carry this
        tag or a later one, never an earlier one."""
        if not self.ledger.records:
            return StepTag.STEP1
        return self.ledger.records[-1].step

    def _record(
        self,
        kind: OperationKind,
        payload: dict,
        step: StepTag,
        rationale: Optional[str],
    ) -> tuple[OperationRecord, dict]:
        record = OperationRecord(
            seq=self.ledger.next_seq(),
            kind=kind,
            payload=payload,
            rationale=rationale,
            step=step,
        )
        result = self._append_and_apply(record)
        return record, result

    # ---- the five operations

    def record_discard(
        self,
        threat_id: str,
        reason: str,
        step: StepTag = StepTag.STEP1,
        rationale: Optional[str] = None,
    ) -> OperationRecord:
        record, _ = self._record(
            OperationKind.DISCARD,
            {"reason": reason, "threat": threat_id},
            step,
            rationale,
        )
        return record

    def record_embrace(
        self,
        member_ids: Sequence[str],
        merged_description: str,
        step: StepTag = StepTag.STEP1,
        rationale: Optional[str] = None,
    ) -> tuple[OperationRecord, str]:
        record, result = self._record(
            OperationKind.EMBRACE,
            {
                "description": merged_description,
                "members": sorted(set(member_ids)),
                "target": "threat",
            },
            step,
            rationale,
        )
        return record, result["threat"]

    def record_embrace_assets(
        self,
        member_ids: Sequence[str],
        group_name: str,
        step: StepTag = StepTag.STEP2,
        rationale: Optional[str] = None,
    ) -> tuple[OperationRecord, str]:
        record, result = self._record(
            OperationKind.EMBRACE,
            {"members": sorted(set(member_ids)), "name": group_name, "target": "asset"},
            step,
            rationale,
        )
        return record, result["asset"]

    def record_rename(
        self,
        threat_id: str,
        new_description: str,
        step: StepTag = StepTag.STEP1,
        rationale: Optional[str] = None,
    ) -> OperationRecord:
        record, _ = self._record(
            OperationKind.RENAME,
            {"description": new_description, "threat": threat_id},
            step,
            rationale,
        )
        return record

    def record_derive_independent(
        self,
        source_id: str,
        new_description: str,
        step: StepTag = StepTag.STEP1,
        rationale: Optional[str] = None,
        phase: Optional[str] = None,
    ) -> tuple[OperationRecord, str]:
        if phase is None:
            has_embrace = any(r.kind is OperationKind.EMBRACE for r in self.ledger)
            phase = PHASE_POST if has_embrace else PHASE_PRE
        if phase not in (PHASE_PRE, PHASE_POST):
            raise LedgerError(f"bad derive phase {phase!r}")
        record, result = self._record(
            OperationKind.DERIVE_INDEPENDENT,
            {"description": new_description, "phase": phase, "source": source_id},
            step,
            rationale,
        )
        return record, result["threat"]

    def record_combine(
        self,
        threat_id: str,
        asset_ids: Sequence[str],
        step: StepTag = StepTag.STEP3,
        rationale: Optional[str] = None,
        template: str = DEFAULT_COMBINE_TEMPLATE,
    ) -> tuple[OperationRecord, list[str]]:
        record, result = self._record(
            OperationKind.COMBINE,
            {"assets": list(asset_ids), "template": template, "threat": threat_id},
            step,
            rationale,
        )
        return record, result["threats"]

    # ---- convenience

    def replay_check(self) -> Catalog:
        """Replay the ledger over the base and confirm it matches the live
        catalog. Returns the replayed snapshot."""
        snapshot = replay(self.ledger, self.base)
        if snapshot.to_canonical_json() != self.catalog.to_canonical_json():
            raise ReplayError(self.ledger.head_seq, "live catalog diverged from replay")
        return snapshot


# -- flow accounting -----------------------------------------------------------

STAGE_KEYS = (
    "collected",
    "discarded",
    "after_embrace",
    "di",
    "dd_retained",
    "assets",
    "candidates",
    "combined",
    "total",
)


def stage_counts(catalog: Catalog, records: Optional[Sequence[OperationRecord]] = None) -> dict[str, int]:
    """The eight flow accounting counts, recomputable from any snapshot."""
    if records is None:
        records = applied_records(catalog)
    tracks = track_map(catalog, records)
    collected = _collected_count(catalog, records)
    discarded = sum(1 for t in catalog.threats.values() if t.status is ThreatStatus.DISCARDED)
    after_embrace = sum(
        1
        for t in catalog.threats.values()
        if t.active and tracks.get(t.id) == TRACK_COLLECTED
    )
    di = sum(
        1
        for t in catalog.threats.values()
        if t.active and t.dependency is DependencyClass.DOMAIN_INDEPENDENT
    )
    dd_retained = sum(
        1
        for t in catalog.threats.values()
        if t.active
        and t.dependency is DependencyClass.DOMAIN_DEPENDENT
        and t.combination is None
    )
    combined = sum(
        1 for t in catalog.threats.values() if t.active and t.combination is not None
    )
    asset_embrace_loss = sum(
        len(set(r.payload["members"])) - 1
        for r in records
        if r.kind is OperationKind.EMBRACE and r.payload.get("target") == "asset"
    )
    return {
        "collected": collected,
        "discarded": discarded,
        "after_embrace": after_embrace,
        "di": di,
        "dd_retained": dd_retained,
        "assets": len(catalog.assets),
        "candidates": len(catalog.assets) + asset_embrace_loss,
        "combined": combined,
        "total": combined + dd_retained,
    }


@dataclass
class FlowReport:
    expected: dict[str, int]
    actual: dict[str, int]
    mismatches: dict[str, tuple[int, int]] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "FAIL" if self.mismatches else "PASS"

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def lines(self) -> list[str]:
        out = []
        for key, want in self.expected.items():
            got = self.actual.get(key)
            mark = "ok" if got == want else f"MISMATCH (got {got})"
            out.append(f"{key}: expected {want}, {mark}")
        return out


def verify_flow(catalog: Catalog, expected: dict[str, int]) -> FlowReport:
    """Diff expected stage counts against the snapshot. Unknown keys count as
    mismatches rather than being ignored."""
    actual = stage_counts(catalog)
    mismatches = {}
    for key, want in expected.items():
        got = actual.get(key)
        if got != want:
            mismatches[key] = (want, -1 if got is None else got)
    return FlowReport(expected=dict(expected), actual=actual, mismatches=mismatches)
