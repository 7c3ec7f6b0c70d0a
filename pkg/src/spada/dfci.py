"""Bundled reference study: privacy threats in digital forensics for
criminal investigation (DFCI).

The source study publishes its headline numbers and a subset of named
threats, assets, and operations; the remainder of its catalog lives in an
external repository. This module freezes a complete, internally consistent
reconstruction: every number and every named item the study prints is
reproduced exactly, and the unnamed remainder is filled with plausible
entries marked as reconstructions in the README.

Everything here is data plus a deterministic script that drives the normal
single-writer API; nothing bypasses the ledger.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from .catalog import (
    Catalog,
    DependencyClass,
    DetailLevel,
    PrivacyProperty,
    SourceDocument,
    SourceKind,
    ThreatAgent,
    VariableSetup,
    canonical_json,
    new_catalog,
)
from .errors import SpadaError, UnknownAsset, UnknownThreat
from .oplog import StepTag, Study
from .pipeline import ALL_ASSETS, MatrixRow, format_matrix_csv

__all__ = [
    "DOMAIN_NAME",
    "SOURCES",
    "EXPECTED_COUNTS",
    "EXPECTED_FLOW_STAGES",
    "DISCARD_REASON",
    "make_setup",
    "build_base_catalog",
    "build_study",
    "fixture_matrix",
    "build_workspace",
    "WORKSPACE_FILES",
]

DOMAIN_NAME = "Digital Forensics in Crime Investigation"

# The ten source documents fixed in Step 0. Two Council of Europe entries
# cite the same guide edition; the study's setup table prints them as two
# sources and every count downstream assumes ten, so they stay distinct here.
SOURCES: tuple[SourceDocument, ...] = (
    SourceDocument(
        "seyyar", "Seyyar", "Privacy impact assessment in large-scale digital forensic investigations", SourceKind.ACADEMIC_WORK
    ),
    SourceDocument(
        "chaure", "Chaure", "Digital forensics and privacy conflicts in criminal investigation", SourceKind.ACADEMIC_WORK
    ),
    SourceDocument("rowe", "Rowe", "Privacy concerns with digital forensics", SourceKind.ACADEMIC_WORK),
    SourceDocument(
        "schaik", "Schaik", "Privacy rights and privacy-enhancing technologies in police digital forensics", SourceKind.ACADEMIC_WORK
    ),
    SourceDocument(
        "iso",
        "ISO",
        "ISO/IEC 27037:2012 Guidelines for identification, collection, acquisition and preservation of digital evidence",
        SourceKind.STANDARD,
    ),
    SourceDocument("coe_df", "CoE DF", "Council of Europe Electronic Evidence Guide (Version 3.0)", SourceKind.GUIDE),
    SourceDocument("coe_eeg", "CoE EEG", "Council of Europe Electronic Evidence Guide (Version 3.0)", SourceKind.GUIDE),
    SourceDocument(
        "ipol",
        "IPOL",
        "EU Directorate General for Internal Policies of the Union: Criminal Procedural Laws Across the European Union",
        SourceKind.POLICY,
    ),
    SourceDocument("nist", "NIST", "NIST Internal Report 8354 Digital Investigation Techniques", SourceKind.REPORT),
    SourceDocument(
        "nij", "NIJ", "National Institute of Justice Digital Evidence Policies and Procedures Manual", SourceKind.POLICY
    ),
)

_DC = ThreatAgent.DATA_CONTROLLER
_DP = ThreatAgent.DATA_PROCESSOR
_TP = ThreatAgent.THIRD_PARTY

_DD = DependencyClass.DOMAIN_DEPENDENT
_DI = DependencyClass.DOMAIN_INDEPENDENT


def make_setup() -> VariableSetup:
    return VariableSetup(
        sources=[s.id for s in SOURCES],
        properties=frozenset(PrivacyProperty),
        domain=DOMAIN_NAME,
        detail=DetailLevel.ABSTRACT,
        agents=frozenset(ThreatAgent),
    )


# -- collection ------------------------------------------------------------------
#
# 46 threats. Rows: (key, description, origins, dependency, agents or None for
# the full setup default). The domain-dependent dozen and the three discarded
# security threats carry the study's wording verbatim; agent narrowings are
# the ones the study prints.

_COLLECTED_THREATS: tuple[tuple[str, str, tuple[str, ...], DependencyClass, Optional[frozenset]], ...] = (
    # Seyyar et al.
    ("dd1", "Data process/read for wrong case", ("seyyar",), _DD, None),
    ("dd2", "Unauthorized person access to the big data forensic platform", ("seyyar",), _DD, None),
    ("dd3", "Investigation report (paper documents) sent to wrong destination", ("seyyar",), _DD, None),
    ("dd4", "Access to data after case is closed", ("seyyar",), _DD, None),
    ("dd5", "Authorizations not granted at case level", ("seyyar",), _DD, None),
    ("dd6", "Errors while uploading seized digital material", ("seyyar",), _DD, frozenset({_DP, _TP})),
    ("nsma", "No systematic monitoring of authorizations", ("seyyar",), _DI, None),
    # Chaure et al.
    ("dd7", "Erroneous allegations due to deleted files", ("chaure",), _DD, None),
    ("h_sw", "Lack of support for privacy management by software vendors", ("chaure",), _DI, None),
    # Rowe
    ("dd8", "Unwarranted reporting of forensic findings", ("rowe",), _DD, None),
    ("dd9", "Surreptitious searches", ("rowe",), _DD, None),
    ("dd10", "Selling of private forensic data", ("rowe",), _DD, None),
    ("dd11", "Criminal use of digital forensics", ("rowe",), _DD, None),
    ("dd12", "Lack of support for privacy management by forensic tool vendors", ("rowe",), _DD, None),
    # (schaik is registered as a source document but contributes no threat rows
    # in this reconstruction; the remaining rows below are spread across the
    # other survey sources.)
    ("a3", "Lack of privacy management", ("chaure",), _DI, frozenset({_DC, _DP, _TP})),
    ("i3", "Lack of transparency toward data subjects", ("ipol",), _DI, None),
    ("i7", "Unjustified profiling of individuals", ("coe_eeg",), _DI, None),
    ("i9", "Inadequate consent procedures", ("ipol",), _DI, None),
    ("i12", "Identity exposure of uninvolved individuals", ("nij",), _DI, None),
    ("i13", "Lack of data minimization safeguards", ("iso",), _DI, None),
    # ISO
    ("h_impr", "Improper data processing or access", ("iso",), _DI, None),
    ("h_acc", "Insufficient access control mechanisms", ("iso", "nist"), _DI, None),
    ("a4", "Unauthorized access to data", ("iso",), _DI, None),
    ("x2", "Denial of service attack", ("iso",), _DI, None),
    ("i6", "Absence of audit trails for data access", ("iso",), _DI, None),
    # CoE DF
    ("x3", "Loss of encryption key", ("coe_df",), _DI, None),
    ("i8", "Disclosure of personal data to unauthorized parties", ("coe_df",), _DI, None),
    ("i10", "Insecure data transfer between parties", ("coe_df",), _DI, None),
    ("i14", "Retention of irrelevant personal material", ("coe_df",), _DI, None),
    # CoE EEG
    ("h_misd", "Misdelivery of confidential document", ("coe_eeg",), _DI, None),
    ("h_cov", "Covert or unlawful data searches", ("coe_eeg",), _DI, None),
    ("i1", "Excessive collection of personal data", ("coe_eeg",), _DI, None),
    ("i4", "Insufficient anonymization of personal data", ("coe_eeg",), _DI, None),
    ("i11", "Aggregation of data revealing sensitive patterns", ("coe_eeg",), _DI, None),
    # IPOL
    ("h_ret", "Access to data beyond retention period", ("ipol",), _DI, None),
    ("a2", "Cross-border data privacy concerns", ("ipol",), _DI, frozenset({_DC, _DP, _TP})),
    ("i2", "Data retention beyond legal limits", ("ipol",), _DI, None),
    # NIST
    ("h_upa", "Unauthorized person access to the big data platform", ("nist",), _DI, None),
    ("h_upl", "Errors in data upload or ingestion", ("nist",), _DI, None),
    ("h_err", "Erroneous conclusions from incomplete data", ("nist",), _DI, None),
    ("h_mal", "Malicious misuse of practice", ("nist",), _DI, None),
    ("x1", "Malicious code injection", ("nist",), _DI, None),
    # NIJ
    ("h_unw", "Unwarranted reporting of findings", ("nij",), _DI, None),
    ("h_sale", "Illicit sale of private data", ("nij",), _DI, None),
    ("a1", "Poor training", ("nij",), _DI, frozenset({_DC, _TP})),
    ("i5", "Unclear data ownership and accountability", ("nij",), _DI, None),
)

# 20 candidate assets. Rows: (name, origins). The four groups below merge
# nine of them into four named groups, leaving the fifteen the study lists.
_ASSET_CANDIDATES: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("Physical storage devices", ("iso",)),
    ("Hard drives", ("iso",)),
    ("Papers and documents", ("iso",)),
    ("Cloud storage", ("coe_df",)),
    ("Remote storage services", ("ipol",)),
    ("Email and messaging", ("coe_df",)),
    ("Communication and network logs", ("coe_df",)),
    ("Authentication and access logs", ("coe_df",)),
    ("Forensic software tools", ("coe_df",)),
    ("Forensic hardware equipment", ("nist",)),
    ("Case management systems", ("coe_df",)),
    ("Investigation case databases", ("nij",)),
    ("Secure forensic workstations", ("coe_df",)),
    ("Forensic lab", ("coe_df",)),
    ("Desktop devices", ("coe_eeg",)),
    ("Mobile devices", ("coe_eeg",)),
    ("IoT devices", ("coe_eeg",)),
    ("Location and tracking data", ("coe_eeg",)),
    ("Cryptocurrency data", ("coe_eeg",)),
    ("System and application logs", ("ipol",)),
)

# -- Step 1 script ----------------------------------------------------------------

DISCARD_REASON = "Security threat outside the privacy scope of this study"

# Derivations before refinement: (source key, derived wording, host key).
# The derived wording matches the study's derivation table row for row. The
# host is the collected threat the redundancy merge folds the clone into;
# except for the Chaure row, host wording and derived wording coincide.
_PRE_DERIVATIONS: tuple[tuple[str, str, str], ...] = (
    ("dd1", "Improper data processing or access", "h_impr"),
    ("dd2", "Unauthorized person access to the big data platform", "h_upa"),
    ("dd3", "Misdelivery of confidential document", "h_misd"),
    ("dd4", "Access to data beyond retention period", "h_ret"),
    ("dd5", "Insufficient access control mechanisms", "h_acc"),
    ("dd6", "Errors in data upload or ingestion", "h_upl"),
    ("dd7", "Erroneous allegations due to deleted files", "h_err"),
    ("dd8", "Unwarranted reporting of findings", "h_unw"),
    ("dd9", "Covert or unlawful data searches", "h_cov"),
    ("dd10", "Illicit sale of private data", "h_sale"),
    ("dd11", "Malicious misuse of practice", "h_mal"),
    ("dd12", "Lack of support for privacy management by software vendors", "h_sw"),
)

_DISCARDS: tuple[str, ...] = ("x1", "x2", "x3")

# Refinement merges among the domain-dependent threats:
# ((member keys), merged wording, new key).
_DD_MERGES: tuple[tuple[tuple[str, str], str, str], ...] = (
    (("dd1", "dd7"), "Erroneous processing of case data", "m_proc"),
    (("dd3", "dd8"), "Misdirection of investigation documents", "m_docs"),
    (("dd4", "dd5"), "Inadequate case-level access management", "m_access"),
    (("dd9", "dd11"), "Covert misuse of digital forensics", "m_covert"),
    (("dd2", "dd12"), "Inadequate privacy safeguards in forensic platforms", "m_plat"),
)

# The study's worked embrace example, applied to the independent pool.
_LAM_MERGE = (("h_upa", "nsma"), "Lack of authorization management", "lam")

# Derivations after refinement: (source key, derived wording, host key to
# fold the clone into). Sources are the five merge results plus the two
# retained originals.
_POST_DERIVATIONS: tuple[tuple[str, str, str], ...] = (
    ("dd6", "Errors in data upload or ingestion", "h_upl"),
    ("dd10", "Illicit sale of private data", "h_sale"),
    ("m_proc", "Improper data processing or access", "h_impr"),
    ("m_docs", "Misdelivery of confidential document", "h_misd"),
    ("m_access", "Insufficient access control mechanisms", "h_acc"),
    ("m_covert", "Malicious misuse of practice", "h_mal"),
    ("m_plat", "Lack of support for privacy management by software vendors", "h_sw"),
)

# -- Step 2 script ----------------------------------------------------------------

# ((member asset names), group name)
_ASSET_GROUPS: tuple[tuple[tuple[str, ...], str], ...] = (
    (("Physical storage devices", "Hard drives", "Papers and documents"), "Storage media"),
    (("Cloud storage", "Remote storage services"), "Cloud and remote storage"),
    (("Forensic software tools", "Forensic hardware equipment"), "Forensic tools and equipment"),
    (("Case management systems", "Investigation case databases"), "Case management databases"),
)

FINAL_ASSET_NAMES: tuple[str, ...] = (
    "Storage media",
    "Cloud and remote storage",
    "Email and messaging",
    "Communication and network logs",
    "Authentication and access logs",
    "Forensic tools and equipment",
    "Case management databases",
    "Secure forensic workstations",
    "Forensic lab",
    "Desktop devices",
    "Mobile devices",
    "IoT devices",
    "Location and tracking data",
    "Cryptocurrency data",
    "System and application logs",
)

# -- Step 3 script ----------------------------------------------------------------
#
# Applicability matrix keyed by the final wording of each independent threat.
# "*" rows cover all fifteen assets. Row sums: 14 * 15 + 81 = 291.

MATRIX_BY_DESCRIPTION: tuple[tuple[str, object], ...] = (
    ("Poor training", ALL_ASSETS),
    (
        "Cross-border data privacy concerns",
        ("Cloud and remote storage", "Email and messaging", "Case management databases", "Location and tracking data"),
    ),
    (
        "Lack of privacy management",
        ("Forensic tools and equipment", "Secure forensic workstations", "Case management databases"),
    ),
    ("Unauthorized access to data", ALL_ASSETS),
    ("Lack of authorization management", ALL_ASSETS),
    ("Improper data processing or access", ALL_ASSETS),
    (
        "Misdelivery of confidential document",
        (
            "Email and messaging",
            "Case management databases",
            "Cloud and remote storage",
            "Storage media",
            "Desktop devices",
            "Mobile devices",
        ),
    ),
    (
        "Access to data beyond retention period",
        (
            "Storage media",
            "Cloud and remote storage",
            "Case management databases",
            "Authentication and access logs",
            "System and application logs",
            "Location and tracking data",
        ),
    ),
    ("Insufficient access control mechanisms", ALL_ASSETS),
    (
        "Errors in data upload or ingestion",
        (
            "Storage media",
            "Cloud and remote storage",
            "Forensic tools and equipment",
            "Case management databases",
            "Secure forensic workstations",
            "Forensic lab",
        ),
    ),
    (
        "Erroneous allegations due to deleted files",
        (
            "Storage media",
            "Desktop devices",
            "Mobile devices",
            "IoT devices",
            "Cloud and remote storage",
            "Forensic tools and equipment",
        ),
    ),
    (
        "Unwarranted reporting of findings",
        (
            "Case management databases",
            "Email and messaging",
            "Cloud and remote storage",
            "Desktop devices",
            "Mobile devices",
            "System and application logs",
        ),
    ),
    ("Covert or unlawful data searches", ALL_ASSETS),
    ("Illicit sale of private data", ALL_ASSETS),
    ("Malicious misuse of practice", ALL_ASSETS),
    (
        "Lack of support for privacy management by software vendors",
        (
            "Forensic tools and equipment",
            "Secure forensic workstations",
            "Desktop devices",
            "Mobile devices",
            "IoT devices",
            "System and application logs",
        ),
    ),
    ("Excessive collection of personal data",
     ("Storage media", "Cloud and remote storage", "Mobile devices", "IoT devices", "Location and tracking data")),
    ("Data retention beyond legal limits",
     ("Storage media", "Cloud and remote storage", "Case management databases", "Authentication and access logs", "System and application logs")),
    ("Lack of transparency toward data subjects", ALL_ASSETS),
    ("Insufficient anonymization of personal data",
     ("Case management databases", "Email and messaging", "Cloud and remote storage", "System and application logs", "Location and tracking data")),
    ("Unclear data ownership and accountability", ALL_ASSETS),
    ("Absence of audit trails for data access", ALL_ASSETS),
    ("Unjustified profiling of individuals",
     ("Location and tracking data", "Cryptocurrency data", "Communication and network logs", "System and application logs", "Mobile devices")),
    ("Disclosure of personal data to unauthorized parties", ALL_ASSETS),
    ("Inadequate consent procedures",
     ("Mobile devices", "Desktop devices", "IoT devices", "Location and tracking data", "Cryptocurrency data")),
    ("Insecure data transfer between parties", ALL_ASSETS),
    ("Aggregation of data revealing sensitive patterns",
     ("Communication and network logs", "Authentication and access logs", "System and application logs", "Location and tracking data", "Cryptocurrency data")),
    ("Identity exposure of uninvolved individuals", ALL_ASSETS),
    ("Lack of data minimization safeguards",
     ("Storage media", "Cloud and remote storage", "Case management databases", "System and application logs")),
    ("Retention of irrelevant personal material",
     ("Storage media", "Cloud and remote storage", "Desktop devices", "Mobile devices")),
)

EXPECTED_COUNTS: dict[str, int] = {
    "collected": 46,
    "discarded": 3,
    "after_embrace": 37,
    "di": 30,
    "dd_retained": 7,
    "assets": 15,
    "combined": 291,
    "total": 298,
}

EXPECTED_FLOW_STAGES: dict[str, dict[str, int]] = {
    "Step1": {
        "collected": 46,
        "discarded": 3,
        "after_embrace": 37,
        "derived_pre": 12,
        "derived_post": 7,
        "di_final": 30,
        "dd_retained": 7,
    },
    "Step2": {"candidates": 20, "groups": 15},
    "Step3": {"di_inputs": 30, "assets": 15, "combined": 291, "retained": 7, "total": 298},
}


def _self_check() -> None:
    if len(_COLLECTED_THREATS) != 46:
        raise SpadaError(f"fixture must collect 46 threats, has {len(_COLLECTED_THREATS)}")
    keys = [row[0] for row in _COLLECTED_THREATS]
    if len(set(keys)) != len(keys):
        raise SpadaError("duplicate fixture threat key")
    if len(_ASSET_CANDIDATES) != 20:
        raise SpadaError(f"fixture must collect 20 candidate assets, has {len(_ASSET_CANDIDATES)}")
    rows = len(MATRIX_BY_DESCRIPTION)
    if rows != 30:
        raise SpadaError(f"matrix must cover 30 threats, has {rows}")
    cells = sum(15 if assets == ALL_ASSETS else len(assets) for _, assets in MATRIX_BY_DESCRIPTION)
    if cells != EXPECTED_COUNTS["combined"]:
        raise SpadaError(f"matrix cells sum to {cells}, expected {EXPECTED_COUNTS['combined']}")


_self_check()


def build_base_catalog() -> Catalog:
    """The catalog as collected: setup, sources, 46 threats, 20 assets."""
    catalog = new_catalog(make_setup(), SOURCES)
    for _, description, origins, dependency, agents in _COLLECTED_THREATS:
        catalog.add_threat(description, origins, dependency, agents)
    for name, origins in _ASSET_CANDIDATES:
        catalog.add_asset(name, origins)
    return catalog


def _asset_by_name(catalog: Catalog, name: str) -> str:
    for asset in catalog.assets.values():
        if asset.name == name:
            return asset.id
    raise UnknownAsset(f"no asset named {name!r}")


def _active_by_description(catalog: Catalog, description: str) -> str:
    matches = [t for t in catalog.active_threats() if t.description == description]
    if len(matches) != 1:
        raise UnknownThreat(f"{len(matches)} active threats match {description!r}")
    return matches[0].id


def fixture_matrix(catalog: Catalog) -> list[MatrixRow]:
    """Resolve the description-keyed matrix against a refined catalog."""
    rows: list[MatrixRow] = []
    for description, assets in MATRIX_BY_DESCRIPTION:
        tid = _active_by_description(catalog, description)
        if assets == ALL_ASSETS:
            rows.append((tid, ALL_ASSETS))
        else:
            rows.append((tid, [_asset_by_name(catalog, name) for name in assets]))
    return rows


def _script_step1(study: Study, ids: dict[str, str]) -> None:
    derived: dict[str, str] = {}
    for src_key, wording, host_key in _PRE_DERIVATIONS:
        _, did = study.record_derive_independent(
            ids[src_key], wording, rationale="Rename strips the domain wording from the collected threat"
        )
        derived[host_key] = did
    for key in _DISCARDS:
        study.record_discard(ids[key], DISCARD_REASON)
    for _, wording, host_key in _PRE_DERIVATIONS:
        _, nid = study.record_embrace(
            [derived[host_key], ids[host_key]],
            wording,
            rationale="Fold the derived wording into the matching collected threat",
        )
        ids[host_key] = nid
    for (ka, kb), wording, new_key in _DD_MERGES:
        _, nid = study.record_embrace([ids[ka], ids[kb]], wording)
        ids[new_key] = nid
    (la, lb), lam_wording, lam_key = _LAM_MERGE
    _, lam_id = study.record_embrace([ids[la], ids[lb]], lam_wording)
    ids[lam_key] = lam_id
    post: dict[str, str] = {}
    for src_key, wording, host_key in _POST_DERIVATIONS:
        _, did = study.record_derive_independent(
            ids[src_key], wording, rationale="Second derivation pass over the refined list"
        )
        post[host_key] = did
    for _, wording, host_key in _POST_DERIVATIONS:
        _, nid = study.record_embrace(
            [post[host_key], ids[host_key]],
            wording,
            rationale="Fold the post-refinement derivation back into the pool",
        )
        ids[host_key] = nid


def _script_step2(study: Study) -> None:
    for member_names, group_name in _ASSET_GROUPS:
        member_ids = [_asset_by_name(study.catalog, n) for n in member_names]
        study.record_embrace_assets(member_ids, group_name)


def build_study(through_step: int = 3) -> Study:
    """Rebuild the study end to end. through_step limits how far the script
    runs: 1 leaves the refined threat pool, 2 adds asset grouping, 3 adds
    the full combination pass."""
    if through_step not in (1, 2, 3):
        raise SpadaError(f"through_step must be 1, 2, or 3, got {through_step}")
    catalog = new_catalog(make_setup(), SOURCES)
    ids: dict[str, str] = {}
    for key, description, origins, dependency, agents in _COLLECTED_THREATS:
        ids[key] = catalog.add_threat(description, origins, dependency, agents).id
    for name, origins in _ASSET_CANDIDATES:
        catalog.add_asset(name, origins)
    study = Study(catalog)
    _script_step1(study, ids)
    if through_step >= 2:
        _script_step2(study)
    if through_step >= 3:
        for tid, assets in fixture_matrix(study.catalog):
            asset_ids = sorted(study.catalog.assets) if assets == ALL_ASSETS else assets
            study.record_combine(tid, asset_ids, step=StepTag.STEP3)
    return study


WORKSPACE_FILES = ("catalog.json", "ledger.jsonl", "matrix.csv", "config.toml", "dfci_counts.json")

_CONFIG_TOML = """\
[study]
name = "dfci"
catalog = "catalog.json"
ledger = "ledger.jsonl"
matrix = "matrix.csv"
expected = "dfci_counts.json"

[embrace]
threshold = 0.5
metric = "jaccard"
"""


def build_workspace(directory: str | Path) -> Path:
    """Write a runnable workspace: the collected catalog, the refinement
    ledger through asset grouping, the applicability matrix, a config file,
    and the expected stage counts."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    study = build_study(through_step=2)
    (root / "catalog.json").write_text(study.base.to_canonical_json(), encoding="utf-8")
    study.ledger.save(root / "ledger.jsonl")
    matrix = fixture_matrix(study.catalog)
    (root / "matrix.csv").write_text(format_matrix_csv(matrix), encoding="utf-8")
    (root / "config.toml").write_text(_CONFIG_TOML, encoding="utf-8")
    (root / "dfci_counts.json").write_text(canonical_json(EXPECTED_COUNTS), encoding="utf-8")
    return root
