"""Deterministic threat-model construction with full provenance.

A catalog of threats and assets evolves only through an append-only
operation ledger; replaying the ledger over the collected baseline
reproduces the model byte for byte. Modules: catalog (state and
identifiers), oplog (records, replay, the single-writer study), embracer
(similarity-driven merge suggestions), pipeline (step orchestration and
flow accounting), reportio (imports, exports, diagrams), dfci (the bundled
reference study), cli and curator (command line and HTTP front ends).
"""

from .catalog import (
    Asset,
    Catalog,
    DependencyClass,
    DetailLevel,
    DomainLexicon,
    DFCI_LEXICON,
    PrivacyProperty,
    SourceDocument,
    SourceKind,
    Threat,
    ThreatAgent,
    ThreatStatus,
    VariableSetup,
    asset_id,
    canonical_json,
    classify_dependency,
    new_catalog,
    normalize_description,
    slugify,
    threat_id,
)
from .embracer import (
    DEFAULT_THRESHOLD,
    CurationSession,
    Suggestion,
    SuggestionStatus,
    similarity,
    suggest,
)
from .errors import ReplayError, SpadaError
from .oplog import (
    DEFAULT_COMBINE_TEMPLATE,
    FlowReport,
    Ledger,
    OperationKind,
    OperationRecord,
    StepTag,
    Study,
    replay,
    stage_counts,
    verify_flow,
)
from .pipeline import FlowRecord, run_all, run_step1, run_step2, run_step3

__version__ = "0.1.0"

__all__ = [
    "Asset",
    "Catalog",
    "CurationSession",
    "DEFAULT_COMBINE_TEMPLATE",
    "DEFAULT_THRESHOLD",
    "DFCI_LEXICON",
    "DependencyClass",
    "DetailLevel",
    "DomainLexicon",
    "FlowRecord",
    "FlowReport",
    "Ledger",
    "OperationKind",
    "OperationRecord",
    "PrivacyProperty",
    "ReplayError",
    "SourceDocument",
    "SourceKind",
    "SpadaError",
    "StepTag",
    "Study",
    "Suggestion",
    "SuggestionStatus",
    "Threat",
    "ThreatAgent",
    "ThreatStatus",
    "VariableSetup",
    "asset_id",
    "canonical_json",
    "classify_dependency",
    "new_catalog",
    "normalize_description",
    "replay",
    "run_all",
    "run_step1",
    "run_step2",
    "run_step3",
    "similarity",
    "slugify",
    "stage_counts",
    "suggest",
    "threat_id",
    "verify_flow",
    "__version__",
]
