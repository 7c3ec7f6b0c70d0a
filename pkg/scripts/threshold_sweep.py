#!/usr/bin/env python3
"""Sweep the embrace-suggestion threshold over both similarity metrics.

Runs the suggester against the post-discard threat pool of the packaged study
at a range of thresholds and reports, per (metric, threshold) cell, how many
clusters are proposed and how many threats they cover. Useful for picking a
curation threshold: low values flood the queue, high values miss redundancy.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from spada import dfci
from spada.embracer import METRICS, suggest
from spada.oplog import StepTag, Study


def post_discard_pool():
    """The study's pool right after scope discards, before any merges."""
    study = Study(dfci.build_base_catalog())
    descriptions = {key: desc for key, desc, *_ in dfci._COLLECTED_THREATS}
    for key in dfci._DISCARDS:
        threat = study.catalog.find_threat_by_description(descriptions[key])
        study.record_discard(threat.id, dfci.DISCARD_REASON, step=StepTag.STEP1)
    return study.catalog.active_threats()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--thresholds",
        default="0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0",
        help="comma-separated thresholds to sweep (default: 0.3..1.0)",
    )
    parser.add_argument("--show-clusters", action="store_true", help="print each proposed cluster")
    args = parser.parse_args(argv)

    thresholds = [float(x) for x in args.thresholds.split(",") if x.strip()]
    pool = post_discard_pool()
    print(f"pool: {len(pool)} active threats after scope discards")
    print(f"{'metric':<10} {'threshold':>9} {'clusters':>9} {'covered':>8} {'min score':>10}")

    for metric in sorted(METRICS):
        for threshold in thresholds:
            suggestions = suggest(pool, threshold=threshold, metric=metric)
            covered = {m for s in suggestions for m in s.members}
            floor = min((s.score for s in suggestions), default=float("nan"))
            print(
                f"{metric:<10} {threshold:>9.2f} {len(suggestions):>9} "
                f"{len(covered):>8} {floor:>10.3f}"
            )
            if args.show_clusters:
                for s in suggestions:
                    print(f"    [{s.score:.3f}] {s.proposed_description!r} <- {len(s.members)} threats")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
