"""Automated embrace support: similarity scoring and merge suggestions.

The default similarity is the Jaccard coefficient over stopword-filtered
token sets; a cosine over raw term-frequency vectors of the same tokens is
selectable via the ``metric`` parameter (and the ``[embrace] metric`` config
key / ``--metric`` flag upstream). No stemming in either case, so "report"
and "reporting" stay distinct tokens on purpose; the suggester only surfaces
lexical redundancy and the analyst stays in charge of semantic merges.
"""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from typing import Callable, Optional, Sequence

from .catalog import Threat
from .errors import InvalidThreshold, StaleSuggestion, UnknownSuggestion
from .oplog import OperationRecord, StepTag, Study

__all__ = [
    "load_stopwords",
    "normalize",
    "token_set",
    "similarity",
    "Suggestion",
    "SuggestionStatus",
    "suggest",
    "CurationSession",
    "DEFAULT_THRESHOLD",
    "METRIC_JACCARD",
    "METRIC_COSINE",
    "METRICS",
]

DEFAULT_THRESHOLD = 0.5

METRIC_JACCARD = "jaccard"
METRIC_COSINE = "cosine"
METRICS = (METRIC_JACCARD, METRIC_COSINE)

_TOKEN = re.compile(r"[a-z0-9]+")

_stopwords_cache: Optional[frozenset[str]] = None


def load_stopwords() -> frozenset[str]:
    """Stopword list shipped with the package, one token per line."""
    global _stopwords_cache
    if _stopwords_cache is None:
        text = resources.files("spada").joinpath("data/stopwords.txt").read_text("utf-8")
        _stopwords_cache = frozenset(w.strip() for w in text.splitlines() if w.strip())
    return _stopwords_cache


def normalize(text: str, stopwords: Optional[frozenset[str]] = None) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop stopwords. Order kept."""
    if stopwords is None:
        stopwords = load_stopwords()
    return [w for w in _TOKEN.findall(text.lower()) if w not in stopwords]


def token_set(text: str, stopwords: Optional[frozenset[str]] = None) -> frozenset[str]:
    return frozenset(normalize(text, stopwords))


def _jaccard(ta: frozenset[str], tb: frozenset[str]) -> float:
    if not ta and not tb:
        return 1.0
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def _cosine(ca: Counter, cb: Counter) -> float:
    if not ca and not cb:
        return 1.0
    if not ca or not cb:
        return 0.0
    if ca == cb:
        # Exact 1.0 for identical vectors; sqrt round-off must not break
        # reflexivity.
        return 1.0
    dot = sum(ca[t] * cb[t] for t in ca.keys() & cb.keys())
    norm = math.sqrt(sum(v * v for v in ca.values())) * math.sqrt(
        sum(v * v for v in cb.values())
    )
    return min(1.0, dot / norm)


def _validate_metric(metric: str) -> None:
    if metric not in METRICS:
        raise ValueError(f"unknown similarity metric {metric!r}; choose from {METRICS}")


def similarity(
    a: str,
    b: str,
    stopwords: Optional[frozenset[str]] = None,
    metric: str = METRIC_JACCARD,
) -> float:
    """Similarity of two descriptions under the chosen metric.

    ``jaccard`` compares token *sets*; ``cosine`` compares raw term-frequency
    vectors of the same token stream. Both agree on the edge cases: two
    descriptions that normalize to nothing are identical for our purposes
    (1.0); if only one side is empty there is nothing shared (0.0).
    """
    _validate_metric(metric)
    wa, wb = normalize(a, stopwords), normalize(b, stopwords)
    if metric == METRIC_COSINE:
        return _cosine(Counter(wa), Counter(wb))
    return _jaccard(frozenset(wa), frozenset(wb))


class SuggestionStatus(str, Enum):
    PENDING = "Pending"
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"


@dataclass
class Suggestion:
    """One proposed embrace cluster.

    score is the weakest pairwise similarity inside the cluster; the proposed
    description is drawn from the member that agrees most with the others and
    stays editable on accept.
    """

    id: str
    members: tuple[str, ...]
    score: float
    proposed_description: str
    status: SuggestionStatus = SuggestionStatus.PENDING

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "members": list(self.members),
            "proposed_description": self.proposed_description,
            "score": round(self.score, 6),
            "status": self.status.value,
        }


def suggestion_id(member_ids: Sequence[str]) -> str:
    basis = "\x1f".join(sorted(member_ids))
    return hashlib.sha256(basis.encode("utf-8")).hexdigest()[:12]


def suggest(
    threats: Sequence[Threat],
    threshold: float = DEFAULT_THRESHOLD,
    stopwords: Optional[frozenset[str]] = None,
    metric: str = METRIC_JACCARD,
) -> list[Suggestion]:
    """Greedy single-link clustering of active threats by text similarity.

    Only pairs with strictly positive similarity at or above the threshold
    link up, and pairs never cross the dependency class boundary, so every
    cluster is class-pure. Deterministic: candidate pairs are processed by
    descending score, ties broken by the sorted id pair; output clusters are
    ordered the same way. Each threat lands in at most one suggestion.
    """
    if not (0.0 <= threshold <= 1.0):
        raise InvalidThreshold(f"threshold must be in [0, 1], got {threshold}")
    _validate_metric(metric)
    if stopwords is None:
        stopwords = load_stopwords()
    # Combination products are mechanical (threat wording + asset name), so
    # near-duplicates among them are by construction, not redundancy; merging
    # them would also silently shrink the combined-stage accounting. The
    # suggester therefore only ever proposes merges within the elicited pool.
    active = [t for t in threats if t.active and t.combination is None]
    words = {t.id: normalize(t.description, stopwords) for t in active}
    by_id = {t.id: t for t in active}

    sim: Callable[[str, str], float]
    if metric == METRIC_COSINE:
        tf = {i: Counter(ws) for i, ws in words.items()}

        def sim(x: str, y: str) -> float:
            return _cosine(tf[x], tf[y])

    else:
        tokens = {i: frozenset(ws) for i, ws in words.items()}

        def sim(x: str, y: str) -> float:
            return _jaccard(tokens[x], tokens[y])

    pairs: list[tuple[float, str, str]] = []
    ids = sorted(by_id)
    for i, x in enumerate(ids):
        for y in ids[i + 1 :]:
            if by_id[x].dependency is not by_id[y].dependency:
                continue
            s = sim(x, y)
            # Strictly positive rule: a zero score never clusters, even at
            # threshold 0-adjacent values.
            if s > 0.0 and s >= threshold:
                pairs.append((s, x, y))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))

    parent: dict[str, str] = {i: i for i in ids}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for s, x, y in pairs:
        rx, ry = find(x), find(y)
        if rx != ry:
            # Keep the lexicographically smaller root for determinism.
            if rx > ry:
                rx, ry = ry, rx
            parent[ry] = rx

    clusters: dict[str, list[str]] = {}
    for i in ids:
        clusters.setdefault(find(i), []).append(i)

    suggestions = []
    for members in clusters.values():
        if len(members) < 2:
            continue
        members = sorted(members)
        pair_scores = [
            sim(x, y) for i, x in enumerate(members) for y in members[i + 1 :]
        ]
        score = min(pair_scores)
        # Pick the member that agrees most with the rest of the cluster.
        best_id = min(
            members,
            key=lambda m: (-sum(sim(m, o) for o in members if o != m), m),
        )
        suggestions.append(
            Suggestion(
                id=suggestion_id(members),
                members=tuple(members),
                score=score,
                proposed_description=by_id[best_id].description,
            )
        )
    suggestions.sort(key=lambda s: (-s.score, s.members))
    return suggestions


class CurationSession:
    """Stateful review loop over one study's suggestions.

    Accepting records the embrace through the study's single writer and
    recomputes the remaining suggestions against the new catalog; rejecting
    remembers the exact member set so it is never proposed again within this
    session.
    """

    def __init__(
        self,
        study: Study,
        threshold: float = DEFAULT_THRESHOLD,
        stopwords: Optional[frozenset[str]] = None,
        metric: str = METRIC_JACCARD,
    ):
        if not (0.0 <= threshold <= 1.0):
            raise InvalidThreshold(f"threshold must be in [0, 1], got {threshold}")
        _validate_metric(metric)
        self.study = study
        self.threshold = threshold
        self.stopwords = stopwords if stopwords is not None else load_stopwords()
        self.metric = metric
        self._rejected: set[frozenset[str]] = set()
        self._log: list[Suggestion] = []
        self.suggestions: dict[str, Suggestion] = {}
        self.refresh()

    def refresh(self) -> list[Suggestion]:
        fresh = suggest(
            self.study.catalog.active_threats(),
            self.threshold,
            self.stopwords,
            metric=self.metric,
        )
        self.suggestions = {
            s.id: s for s in fresh if frozenset(s.members) not in self._rejected
        }
        return self.pending()

    def pending(self) -> list[Suggestion]:
        ordered = sorted(
            (s for s in self.suggestions.values() if s.status is SuggestionStatus.PENDING),
            key=lambda s: (-s.score, s.members),
        )
        return ordered

    def _get_pending(self, sid: str) -> Suggestion:
        try:
            s = self.suggestions[sid]
        except KeyError:
            raise UnknownSuggestion(f"no suggestion {sid!r}") from None
        if s.status is not SuggestionStatus.PENDING:
            raise StaleSuggestion(f"suggestion {sid} is {s.status.value}")
        return s

    def accept(
        self,
        sid: str,
        description: Optional[str] = None,
        step: Optional[StepTag] = None,
        rationale: Optional[str] = None,
    ) -> tuple[OperationRecord, str]:
        s = self._get_pending(sid)
        if step is None:
            # Follow the study: an accept must be appendable no matter how
            # far the ledger has progressed.
            step = self.study.current_step
        for tid in s.members:
            t = self.study.catalog.threats.get(tid)
            if t is None or not t.active:
                raise StaleSuggestion(f"member {tid} is no longer active")
        record, new_id = self.study.record_embrace(
            list(s.members),
            description if description is not None else s.proposed_description,
            step=step,
            rationale=rationale,
        )
        self._log.append(replace(s, status=SuggestionStatus.ACCEPTED))
        self.refresh()
        return record, new_id

    def reject(self, sid: str) -> None:
        s = self._get_pending(sid)
        self._rejected.add(frozenset(s.members))
        self._log.append(replace(s, status=SuggestionStatus.REJECTED))
        self.refresh()

    def history(self) -> list[Suggestion]:
        return list(self._log)
