#!/usr/bin/env python3
"""Materialize the packaged digital-forensics study as an on-disk workspace.

The workspace carries the collected base catalog, the operation ledger through
the asset-identification step, the combination matrix, a config file, and the
expected stage counts — everything the CLI and the curator server need.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from spada import dfci
from spada.catalog import Catalog
from spada.oplog import Ledger, replay


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "target",
        nargs="?",
        default="workspace",
        help="directory to create (default: ./workspace)",
    )
    parser.add_argument(
        "--force", action="store_true", help="overwrite an existing workspace"
    )
    args = parser.parse_args(argv)

    target = Path(args.target)
    if target.exists() and any(target.iterdir()) and not args.force:
        parser.error(f"{target} is not empty (use --force to overwrite)")

    root = dfci.build_workspace(target)
    base = Catalog.from_json((root / "catalog.json").read_text(encoding="utf-8"))
    ledger = Ledger.load(root / "ledger.jsonl")
    snapshot = replay(ledger, base)

    print(f"workspace written to {root}")
    for name in dfci.WORKSPACE_FILES:
        print(f"  {name}  ({(root / name).stat().st_size} bytes)")
    print(f"ledger head seq: {ledger.head_seq}")
    print(f"snapshot digest: {snapshot.digest()}")
    print(f"active threats:  {snapshot.active_count()}")
    print(f"asset groups:    {len(snapshot.assets)}")
    print("next: spada --workspace", root, "run")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
