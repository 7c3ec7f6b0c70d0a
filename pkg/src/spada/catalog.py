"""Threat catalog: the five setup variables and the state they govern.

A catalog is a snapshot of one modelling study: the variable setup chosen in
Step 0, the source documents, the threats collected from them, and (in
domain-dependent mode) the assets. Collection mutates the catalog directly;
every later transformation goes through the operation ledger (see oplog) so
that replaying the ledger over the collected base reproduces the snapshot
byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .errors import (
    DomainIndependentMode,
    DuplicateAsset,
    DuplicateThreat,
    EmptyDescription,
    InvalidSetup,
    UnknownAsset,
    UnknownSource,
    UnknownThreat,
)

__all__ = [
    "SourceKind",
    "SourceDocument",
    "PrivacyProperty",
    "ThreatAgent",
    "DetailLevel",
    "DependencyClass",
    "ThreatStatus",
    "VariableSetup",
    "Threat",
    "Asset",
    "DomainLexicon",
    "DFCI_LEXICON",
    "Catalog",
    "new_catalog",
    "normalize_description",
    "slugify",
    "threat_id",
    "asset_id",
    "classify_dependency",
    "canonical_json",
]


class SourceKind(str, Enum):
    ACADEMIC_WORK = "AcademicWork"
    STANDARD = "Standard"
    GUIDE = "Guide"
    POLICY = "Policy"
    REPORT = "Report"


class PrivacyProperty(str, Enum):
    SOFT_PRIVACY = "SoftPrivacy"
    HARD_PRIVACY = "HardPrivacy"

    @property
    def display(self) -> str:
        return {"SoftPrivacy": "Soft Privacy", "HardPrivacy": "Hard Privacy"}[self.value]


class ThreatAgent(str, Enum):
    # Declaration order is the canonical display order in exports.
    ATTACKER = "Attacker"
    DATA_CONTROLLER = "DataController"
    DATA_PROCESSOR = "DataProcessor"
    THIRD_PARTY = "ThirdParty"

    @property
    def display(self) -> str:
        return {
            "Attacker": "Attacker",
            "DataController": "Data Controller",
            "DataProcessor": "Data Processor",
            "ThirdParty": "Third Party",
        }[self.value]


AGENT_ORDER = {agent: i for i, agent in enumerate(ThreatAgent)}


class DetailLevel(str, Enum):
    ABSTRACT = "Abstract"
    DETAILED = "Detailed"


class DependencyClass(str, Enum):
    DOMAIN_INDEPENDENT = "DomainIndependent"
    DOMAIN_DEPENDENT = "DomainDependent"


class ThreatStatus(str, Enum):
    ACTIVE = "Active"
    DISCARDED = "Discarded"
    MERGED_INTO = "MergedInto"


@dataclass(frozen=True)
class SourceDocument:
    id: str
    label: str
    title: str
    kind: SourceKind


@dataclass
class VariableSetup:
    """The five study variables fixed in Step 0.

    sources lists source document ids; domain is None for a
    domain-independent study and an application-domain name otherwise.
    """

    sources: list[str]
    properties: frozenset[PrivacyProperty]
    domain: Optional[str]
    detail: DetailLevel
    agents: frozenset[ThreatAgent]

    def validate(self) -> None:
        if not self.sources:
            raise InvalidSetup("setup needs at least one source")
        if len(set(self.sources)) != len(self.sources):
            raise InvalidSetup("duplicate source id in setup")
        if not self.properties:
            raise InvalidSetup("setup needs at least one privacy property")
        if not self.agents:
            raise InvalidSetup("setup needs at least one threat agent")
        if self.domain is not None and not self.domain.strip():
            raise InvalidSetup("domain must be None or a non-empty name")


@dataclass
class Threat:
    id: str
    description: str
    dependency: DependencyClass
    agents: frozenset[ThreatAgent]
    properties: frozenset[PrivacyProperty]
    origin: frozenset[str]
    status: ThreatStatus = ThreatStatus.ACTIVE
    merged_into: Optional[str] = None
    # Ledger seq numbers that touched this threat, oldest first. Empty for
    # threats that came straight from collection.
    lineage: list[int] = field(default_factory=list)
    # (parent threat id, asset id) when this threat is a Step-3 combination.
    combination: Optional[tuple[str, str]] = None

    @property
    def active(self) -> bool:
        return self.status is ThreatStatus.ACTIVE

    def to_dict(self) -> dict:
        return {
            "agents": sorted(a.value for a in self.agents),
            "combination": (
                None
                if self.combination is None
                else {"asset": self.combination[1], "parent": self.combination[0]}
            ),
            "dependency": self.dependency.value,
            "description": self.description,
            "id": self.id,
            "lineage": list(self.lineage),
            "merged_into": self.merged_into,
            "origin": sorted(self.origin),
            "properties": sorted(p.value for p in self.properties),
            "status": self.status.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Threat":
        comb = d.get("combination")
        return cls(
            id=d["id"],
            description=d["description"],
            dependency=DependencyClass(d["dependency"]),
            agents=frozenset(ThreatAgent(a) for a in d["agents"]),
            properties=frozenset(PrivacyProperty(p) for p in d["properties"]),
            origin=frozenset(d["origin"]),
            status=ThreatStatus(d["status"]),
            merged_into=d.get("merged_into"),
            lineage=list(d.get("lineage", [])),
            combination=None if comb is None else (comb["parent"], comb["asset"]),
        )


@dataclass
class Asset:
    id: str
    name: str
    origin: frozenset[str]

    def to_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "origin": sorted(self.origin)}

    @classmethod
    def from_dict(cls, d: dict) -> "Asset":
        return cls(id=d["id"], name=d["name"], origin=frozenset(d["origin"]))


@dataclass(frozen=True)
class DomainLexicon:
    """Words and phrases that mark a description as domain-dependent."""

    terms: frozenset[str]

    def __post_init__(self):
        object.__setattr__(
            self, "terms", frozenset(t.strip().lower() for t in self.terms if t.strip())
        )


# Default lexicon for digital forensics in crime investigation studies.
DFCI_LEXICON = DomainLexicon(
    frozenset(
        {
            "forensic",
            "forensics",
            "investigation",
            "investigator",
            "investigative",
            "case",
            "seized",
            "seizure",
            "evidence",
            "evidentiary",
            "lab",
            "court",
            "custody",
            "suspect",
            "crime",
        }
    )
)


# -- normalization and identifiers -------------------------------------------

_WS = re.compile(r"\s+")
_SLUG_JUNK = re.compile(r"[^a-z0-9]+")


def normalize_description(text: str) -> str:
    """Identity normalization: lowercase, trim, collapse whitespace, and strip
    surrounding punctuation. Used for duplicate detection and id derivation."""
    t = _WS.sub(" ", text.strip().lower())
    return t.strip(" \t.,;:!?'\"()[]{}")


def slugify(text: str, max_len: int = 48) -> str:
    slug = _SLUG_JUNK.sub("-", text.lower()).strip("-")
    return slug[:max_len].rstrip("-") or "x"


def threat_id(description: str, origin: Iterable[str], salt: str = "") -> str:
    """Content-derived threat id: a readable slug plus an 8-hex digest of the
    normalized description and the sorted origin ids. Operations that can
    legitimately recreate an existing description pass a salt (their ledger
    position or combination pair) so ids never collide."""
    norm = normalize_description(description)
    basis = "\x1f".join([norm, ",".join(sorted(origin)), salt])
    digest = hashlib.sha256(basis.encode("utf-8")).hexdigest()[:8]
    return f"{slugify(norm)}-{digest}"


def asset_id(name: str) -> str:
    return slugify(normalize_description(name))


def classify_dependency(description: str, lexicon: DomainLexicon) -> DependencyClass:
    """Advisory classifier: domain-dependent iff the description contains at
    least one lexicon term as a whole word (case-insensitive). The analyst's
    label on the threat stays authoritative."""
    if not normalize_description(description):
        raise EmptyDescription("cannot classify an empty description")
    text = description.lower()
    for term in lexicon.terms:
        if re.search(rf"(?<![a-z0-9]){re.escape(term)}(?![a-z0-9])", text):
            return DependencyClass.DOMAIN_DEPENDENT
    return DependencyClass.DOMAIN_INDEPENDENT


def canonical_json(data) -> str:
    """The one JSON shape used for digests and on-disk state: sorted keys,
    two-space indent, UTF-8 passthrough, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# -- catalog -----------------------------------------------------------------

@dataclass
class Catalog:
    setup: VariableSetup
    sources: dict[str, SourceDocument]
    lexicon: DomainLexicon
    threats: dict[str, Threat] = field(default_factory=dict)
    assets: dict[str, Asset] = field(default_factory=dict)

    @property
    def domain_dependent_mode(self) -> bool:
        return self.setup.domain is not None

    # ---- views

    def active_threats(self) -> list[Threat]:
        return [t for t in self.threats.values() if t.active]

    def active_count(self) -> int:
        return sum(1 for t in self.threats.values() if t.active)

    def discarded_threats(self) -> list[Threat]:
        return [t for t in self.threats.values() if t.status is ThreatStatus.DISCARDED]

    def get_threat(self, tid: str) -> Threat:
        try:
            return self.threats[tid]
        except KeyError:
            raise UnknownThreat(f"no threat with id {tid!r}") from None

    def get_asset(self, aid: str) -> Asset:
        try:
            return self.assets[aid]
        except KeyError:
            raise UnknownAsset(f"no asset with id {aid!r}") from None

    def find_threat_by_description(self, description: str) -> Optional[Threat]:
        norm = normalize_description(description)
        for t in self.threats.values():
            if t.active and normalize_description(t.description) == norm:
                return t
        return None

    # ---- collection (pre-ledger mutations)

    def _check_sources(self, origin: Iterable[str]) -> frozenset[str]:
        ids = frozenset(origin)
        for sid in ids:
            if sid not in self.sources:
                raise UnknownSource(f"unknown source id {sid!r}")
        return ids

    def add_threat(
        self,
        description: str,
        origin: Iterable[str],
        dependency: DependencyClass,
        agents: Optional[Iterable[ThreatAgent]] = None,
        properties: Optional[Iterable[PrivacyProperty]] = None,
    ) -> Threat:
        """Collect one threat from the sources.

        Agents and properties default to the full setup sets. Rejects an
        identical normalized description while its twin is still Active.
        """
        norm = normalize_description(description)
        if not norm:
            raise EmptyDescription("threat description is empty")
        ids = self._check_sources(origin)
        if not ids:
            raise UnknownSource("threat needs at least one origin source")
        if self.find_threat_by_description(description) is not None:
            raise DuplicateThreat(f"active threat with same description: {norm!r}")
        tid = threat_id(description, ids)
        if tid in self.threats:
            raise DuplicateThreat(f"threat id {tid!r} already present")
        agent_set = frozenset(agents) if agents is not None else self.setup.agents
        prop_set = frozenset(properties) if properties is not None else self.setup.properties
        if not agent_set or not agent_set <= self.setup.agents:
            raise InvalidSetup("threat agents must be a non-empty subset of the setup agents")
        if not prop_set or not prop_set <= self.setup.properties:
            raise InvalidSetup("threat properties must be a non-empty subset of the setup properties")
        threat = Threat(
            id=tid,
            description=description.strip(),
            dependency=dependency,
            agents=agent_set,
            properties=prop_set,
            origin=ids,
        )
        self.threats[tid] = threat
        return threat

    def add_asset(self, name: str, origin: Iterable[str]) -> Asset:
        """Collect one candidate asset. Only valid in domain-dependent mode."""
        if not self.domain_dependent_mode:
            raise DomainIndependentMode("assets require a domain-dependent setup")
        norm = normalize_description(name)
        if not norm:
            raise EmptyDescription("asset name is empty")
        ids = self._check_sources(origin)
        if not ids:
            raise UnknownSource("asset needs at least one origin source")
        for a in self.assets.values():
            if normalize_description(a.name) == norm:
                raise DuplicateAsset(f"asset name {name!r} already present")
        aid = asset_id(name)
        if aid in self.assets:
            raise DuplicateAsset(f"asset id {aid!r} already present")
        asset = Asset(id=aid, name=name.strip(), origin=ids)
        self.assets[aid] = asset
        return asset

    def classify(self, description: str) -> DependencyClass:
        return classify_dependency(description, self.lexicon)

    # ---- integrity

    def check_integrity(self) -> None:
        """Assert the structural invariants. Raises on violation."""
        self.setup.validate()
        for sid in self.setup.sources:
            if sid not in self.sources:
                raise InvalidSetup(f"setup references unknown source {sid!r}")
        seen_names: set[str] = set()
        for a in self.assets.values():
            key = normalize_description(a.name)
            if key in seen_names:
                raise DuplicateAsset(f"duplicate asset name {a.name!r}")
            seen_names.add(key)
            for sid in a.origin:
                if sid not in self.sources:
                    raise UnknownSource(f"asset {a.id} references unknown source {sid!r}")
        for t in self.threats.values():
            if not t.origin and not t.lineage:
                raise InvalidSetup(f"threat {t.id} has neither origin nor lineage")
            for sid in t.origin:
                if sid not in self.sources:
                    raise UnknownSource(f"threat {t.id} references unknown source {sid!r}")
            if t.status is ThreatStatus.MERGED_INTO:
                if t.merged_into is None or t.merged_into not in self.threats:
                    raise UnknownThreat(f"threat {t.id} merged into a missing threat")
            elif t.merged_into is not None:
                raise InvalidSetup(f"threat {t.id} carries merged_into while {t.status.value}")
            if t.combination is not None:
                parent_id, aid = t.combination
                if t.dependency is not DependencyClass.DOMAIN_DEPENDENT:
                    raise InvalidSetup(f"combined threat {t.id} must be domain-dependent")
                parent = self.get_threat(parent_id)
                if parent.dependency is not DependencyClass.DOMAIN_INDEPENDENT:
                    raise InvalidSetup(f"combination parent {parent_id} must be domain-independent")
                self.get_asset(aid)

    # ---- serialization

    def to_dict(self) -> dict:
        return {
            "setup": {
                "agents": sorted(a.value for a in self.setup.agents),
                "detail": self.setup.detail.value,
                "domain": self.setup.domain,
                "properties": sorted(p.value for p in self.setup.properties),
                "sources": list(self.setup.sources),
            },
            "sources": [
                {"id": s.id, "kind": s.kind.value, "label": s.label, "title": s.title}
                for s in sorted(self.sources.values(), key=lambda s: s.id)
            ],
            "lexicon": sorted(self.lexicon.terms),
            "threats": [t.to_dict() for t in sorted(self.threats.values(), key=lambda t: t.id)],
            "assets": [a.to_dict() for a in sorted(self.assets.values(), key=lambda a: a.id)],
        }

    def to_canonical_json(self) -> str:
        return canonical_json(self.to_dict())

    def digest(self) -> str:
        return hashlib.sha256(self.to_canonical_json().encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "Catalog":
        setup = VariableSetup(
            sources=list(d["setup"]["sources"]),
            properties=frozenset(PrivacyProperty(p) for p in d["setup"]["properties"]),
            domain=d["setup"]["domain"],
            detail=DetailLevel(d["setup"]["detail"]),
            agents=frozenset(ThreatAgent(a) for a in d["setup"]["agents"]),
        )
        sources = {
            s["id"]: SourceDocument(
                id=s["id"], label=s["label"], title=s["title"], kind=SourceKind(s["kind"])
            )
            for s in d["sources"]
        }
        cat = cls(
            setup=setup,
            sources=sources,
            lexicon=DomainLexicon(frozenset(d.get("lexicon", []))),
        )
        for td in d.get("threats", []):
            t = Threat.from_dict(td)
            cat.threats[t.id] = t
        for ad in d.get("assets", []):
            a = Asset.from_dict(ad)
            cat.assets[a.id] = a
        cat.check_integrity()
        return cat

    @classmethod
    def from_json(cls, text: str) -> "Catalog":
        return cls.from_dict(json.loads(text))

    def copy(self) -> "Catalog":
        # Deep enough: threats and assets are rebuilt, value fields are
        # immutable or replaced wholesale by the operations.
        other = Catalog(setup=self.setup, sources=dict(self.sources), lexicon=self.lexicon)
        for tid, t in self.threats.items():
            other.threats[tid] = Threat(
                id=t.id,
                description=t.description,
                dependency=t.dependency,
                agents=t.agents,
                properties=t.properties,
                origin=t.origin,
                status=t.status,
                merged_into=t.merged_into,
                lineage=list(t.lineage),
                combination=t.combination,
            )
        for aid, a in self.assets.items():
            other.assets[aid] = Asset(id=a.id, name=a.name, origin=a.origin)
        return other


def new_catalog(
    setup: VariableSetup,
    sources: Iterable[SourceDocument],
    lexicon: Optional[DomainLexicon] = None,
) -> Catalog:
    """Open a study catalog with a validated setup.

    The lexicon defaults to the DFCI list when the setup names a domain and
    to an empty lexicon otherwise.
    """
    setup.validate()
    doc_list = list(sources)
    docs = {s.id: s for s in doc_list}
    if len(docs) != len(doc_list):
        raise InvalidSetup("duplicate source document ids")
    for sid in setup.sources:
        if sid not in docs:
            raise InvalidSetup(f"setup references unknown source {sid!r}")
    if lexicon is None:
        lexicon = DFCI_LEXICON if setup.domain is not None else DomainLexicon(frozenset())
    return Catalog(setup=setup, sources=docs, lexicon=lexicon)
