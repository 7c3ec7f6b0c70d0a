"""Step orchestration and PRISMA-style flow accounting.

Each step replays the relevant ledger prefix over the collected base and
reports stage counts. The steps never synthesize history behind the
caller's back: Step 1 and Step 2 only replay what the ledger already holds,
and Step 3 issues one combine record per matrix row through the same single
writer everything else uses.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence

from .catalog import Catalog
from .errors import DomainIndependentMode, SpadaError
from .oplog import (
    DEFAULT_COMBINE_TEMPLATE,
    Ledger,
    OperationKind,
    OperationRecord,
    PHASE_POST,
    PHASE_PRE,
    StepTag,
    Study,
    replay,
    stage_counts,
)

__all__ = [
    "FlowRecord",
    "run_step1",
    "run_step2",
    "run_step3",
    "run_all",
    "MatrixRow",
    "parse_matrix_csv",
    "format_matrix_csv",
    "ALL_ASSETS",
]

ALL_ASSETS = "*"


@dataclass
class FlowRecord:
    """Ordered stage counts for one step, diagram-ready."""

    step: StepTag
    stages: list[tuple[str, int]]
    notes: Optional[str] = None

    def counts(self) -> dict[str, int]:
        return dict(self.stages)

    def to_dict(self) -> dict:
        return {
            "notes": self.notes,
            "stages": [{"count": c, "label": l} for l, c in self.stages],
            "step": self.step.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FlowRecord":
        return cls(
            step=StepTag(d["step"]),
            stages=[(s["label"], s["count"]) for s in d["stages"]],
            notes=d.get("notes"),
        )

    def __post_init__(self):
        labels = [l for l, _ in self.stages]
        if len(set(labels)) != len(labels):
            raise SpadaError(f"duplicate stage label in {self.step.value} flow")
        for label, count in self.stages:
            if count < 0:
                raise SpadaError(f"negative count for stage {label!r}")


def _prefix(ledger: Ledger | Sequence[OperationRecord], upto: StepTag) -> list[OperationRecord]:
    order = {StepTag.STEP1: 1, StepTag.STEP2: 2, StepTag.STEP3: 3}
    return [r for r in ledger if order[r.step] <= order[upto]]


def run_step1(base: Catalog, ledger: Ledger) -> tuple[Catalog, FlowRecord]:
    """Replay the Step-1 records: discards, embraces, and derivations.

    The after-embrace stage counts active collection-descended threats, so
    similarity-1.0 merges that absorb derived clones back into the pool do
    not show up as extra refinement.
    """
    records = _prefix(ledger, StepTag.STEP1)
    snapshot = replay(records, base)
    counts = stage_counts(snapshot, records)
    derived_pre = sum(
        1
        for r in records
        if r.kind is OperationKind.DERIVE_INDEPENDENT and r.payload.get("phase") == PHASE_PRE
    )
    derived_post = sum(
        1
        for r in records
        if r.kind is OperationKind.DERIVE_INDEPENDENT and r.payload.get("phase") == PHASE_POST
    )
    flow = FlowRecord(
        step=StepTag.STEP1,
        stages=[
            ("collected", counts["collected"]),
            ("discarded", counts["discarded"]),
            ("after_embrace", counts["after_embrace"]),
            ("derived_pre", derived_pre),
            ("derived_post", derived_post),
            ("di_final", counts["di"]),
            ("dd_retained", counts["dd_retained"]),
        ],
    )
    return snapshot, flow


def run_step2(base: Catalog, ledger: Ledger) -> tuple[Catalog, FlowRecord]:
    """Replay through Step 2: candidate assets grouped by asset embraces."""
    if not base.domain_dependent_mode:
        raise DomainIndependentMode("step 2 requires a domain-dependent setup")
    records = _prefix(ledger, StepTag.STEP2)
    snapshot = replay(records, base)
    counts = stage_counts(snapshot, records)
    flow = FlowRecord(
        step=StepTag.STEP2,
        stages=[("candidates", counts["candidates"]), ("groups", counts["assets"])],
    )
    return snapshot, flow


MatrixRow = tuple[str, object]  # (threat id, list of asset ids or ALL_ASSETS)


def run_step3(
    base: Catalog,
    ledger: Ledger,
    matrix: Sequence[MatrixRow],
    template: str = DEFAULT_COMBINE_TEMPLATE,
) -> tuple[Catalog, FlowRecord, Ledger]:
    """Issue one combine record per matrix row, then account for the output.

    Rows whose (threat, asset) pairs are all combined already are skipped, so
    re-running the step over a complete ledger is a no-op. Returns the
    snapshot, the flow record, and the extended ledger.
    """
    study = Study(base, ledger)
    existing = {
        t.combination
        for t in study.catalog.threats.values()
        if t.combination is not None and t.active
    }
    for threat_id, assets in matrix:
        parent = study.catalog.get_threat(threat_id)
        if assets == ALL_ASSETS:
            asset_ids = sorted(study.catalog.assets)
        else:
            asset_ids = list(assets)  # type: ignore[arg-type]
        for aid in asset_ids:
            study.catalog.get_asset(aid)
        todo = [aid for aid in asset_ids if (parent.id, aid) not in existing]
        if not todo:
            continue
        study.record_combine(parent.id, todo, step=StepTag.STEP3, template=template)
        existing.update((parent.id, aid) for aid in todo)
    snapshot = study.catalog
    counts = stage_counts(snapshot)
    flow = FlowRecord(
        step=StepTag.STEP3,
        stages=[
            ("di_inputs", counts["di"]),
            ("assets", counts["assets"]),
            ("combined", counts["combined"]),
            ("retained", counts["dd_retained"]),
            ("total", counts["total"]),
        ],
    )
    return snapshot, flow, study.ledger


def run_all(
    base: Catalog,
    ledger: Ledger,
    matrix: Sequence[MatrixRow],
    template: str = DEFAULT_COMBINE_TEMPLATE,
) -> tuple[Catalog, list[FlowRecord], Ledger]:
    """Run the steps in order and return the final snapshot with all flows.

    Equivalent to a single full replay of the extended ledger; the pipeline
    adds accounting, never state of its own. Studies without a domain have
    no asset stage, so their flow list holds two records instead of three.
    """
    _, flow1 = run_step1(base, ledger)
    flows = [flow1]
    if base.domain_dependent_mode:
        flows.append(run_step2(base, ledger)[1])
    snapshot, flow3, full_ledger = run_step3(base, ledger, matrix, template)
    flows.append(flow3)
    return snapshot, flows, full_ledger


# -- matrix file format --------------------------------------------------------

MATRIX_HEADER = ["threat_id", "asset_ids"]


def parse_matrix_csv(text: str) -> list[MatrixRow]:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or rows[0] != MATRIX_HEADER:
        raise SpadaError(f"matrix header must be {','.join(MATRIX_HEADER)}")
    out: list[MatrixRow] = []
    for row in rows[1:]:
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise SpadaError(f"matrix row needs 2 cells, got {row!r}")
        tid, assets = row[0].strip(), row[1].strip()
        if assets == ALL_ASSETS:
            out.append((tid, ALL_ASSETS))
        else:
            ids = [a.strip() for a in assets.split(";") if a.strip()]
            out.append((tid, ids))
    return out


def format_matrix_csv(matrix: Sequence[MatrixRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MATRIX_HEADER)
    for tid, assets in matrix:
        cell = ALL_ASSETS if assets == ALL_ASSETS else ";".join(assets)  # type: ignore[arg-type]
        writer.writerow([tid, cell])
    return buf.getvalue()
