"""Command-line front end.

A workspace is a directory holding the study files: the collected catalog
(catalog.json), the operation ledger (ledger.jsonl), the applicability
matrix (matrix.csv), optional expected stage counts (a JSON object), and an
optional config.toml naming overrides. Commands that mutate the workspace
take an advisory lock file so two writers cannot interleave.

Exit codes: 0 success, 1 usage error (bad flags/arguments), 2 data error
(unknown ids, malformed files, ledger or replay failure), 3 verification
mismatch.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

try:
    import tomllib  # Python 3.11+
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib  # type: ignore[no-redef]

from .catalog import Catalog, canonical_json
from .embracer import (
    DEFAULT_THRESHOLD,
    METRIC_JACCARD,
    METRICS,
    load_stopwords,
    suggest,
)
from .errors import LedgerError, ReplayError, SpadaError
from .oplog import (
    Ledger,
    StepTag,
    Study,
    replay,
    stage_counts,
    verify_flow,
)
from .pipeline import (
    ALL_ASSETS,
    FlowRecord,
    parse_matrix_csv,
    run_all,
    run_step1,
    run_step2,
    run_step3,
)
from .reportio import (
    emit_flow_diagram,
    export_reserve_list,
    export_threat_model,
    import_assets_csv,
    import_threats_csv,
)
from .errors import DomainIndependentMode

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3

LOCK_NAME = ".spada.lock"

_DEFAULT_FILES = {
    "catalog": "catalog.json",
    "ledger": "ledger.jsonl",
    "matrix": "matrix.csv",
    "expected": "dfci_counts.json",
}


@dataclass
class Workspace:
    root: Path
    catalog_path: Path
    ledger_path: Path
    matrix_path: Path
    expected_path: Path
    threshold: float
    metric: str = METRIC_JACCARD
    name: str = "study"

    @classmethod
    def resolve(cls, workspace_arg: Optional[str]) -> "Workspace":
        root = Path(workspace_arg or os.environ.get("SPADA_WORKSPACE") or ".").resolve()
        files = dict(_DEFAULT_FILES)
        threshold = DEFAULT_THRESHOLD
        metric = METRIC_JACCARD
        name = "study"
        config = root / "config.toml"
        if config.is_file():
            with config.open("rb") as fh:
                data = tomllib.load(fh)
            study = data.get("study", {})
            for key in files:
                if key in study:
                    files[key] = study[key]
            name = study.get("name", name)
            embrace = data.get("embrace", {})
            threshold = float(embrace.get("threshold", threshold))
            metric = str(embrace.get("metric", metric))
        env_threshold = os.environ.get("SPADA_THRESHOLD")
        if env_threshold:
            threshold = float(env_threshold)
        env_metric = os.environ.get("SPADA_METRIC")
        if env_metric:
            metric = env_metric
        return cls(
            root=root,
            catalog_path=root / files["catalog"],
            ledger_path=root / files["ledger"],
            matrix_path=root / files["matrix"],
            expected_path=root / files["expected"],
            threshold=threshold,
            metric=metric,
            name=name,
        )

    def load_catalog(self) -> Catalog:
        if not self.catalog_path.is_file():
            raise SpadaError(f"no catalog at {self.catalog_path}")
        return Catalog.from_json(self.catalog_path.read_text(encoding="utf-8"))

    def load_ledger(self) -> Ledger:
        if not self.ledger_path.is_file():
            return Ledger()
        return Ledger.load(self.ledger_path)

    def load_matrix(self):
        if not self.matrix_path.is_file():
            return []
        return parse_matrix_csv(self.matrix_path.read_text(encoding="utf-8"))

    def load_expected(self, override: Optional[str]) -> dict[str, int]:
        path = Path(override) if override else self.expected_path
        if not path.is_file():
            raise SpadaError(f"no expected-counts file at {path}")
        data = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(data, dict) or not all(isinstance(v, int) for v in data.values()):
            raise SpadaError(f"expected-counts file {path} must map stage names to integers")
        return data

    def save_catalog(self, catalog: Catalog) -> None:
        self.catalog_path.write_text(catalog.to_canonical_json(), encoding="utf-8")

    def save_ledger(self, ledger: Ledger) -> None:
        ledger.save(self.ledger_path)


@contextlib.contextmanager
def workspace_lock(ws: Workspace):
    """Advisory single-writer lock. A lock whose recorded pid is gone is
    treated as stale and replaced."""
    ws.root.mkdir(parents=True, exist_ok=True)
    path = ws.root / LOCK_NAME
    if path.is_file():
        try:
            pid = int(path.read_text(encoding="utf-8").strip() or "0")
        except ValueError:
            pid = 0
        alive = False
        if pid > 0:
            try:
                os.kill(pid, 0)
                alive = True
            except ProcessLookupError:
                alive = False
            except PermissionError:
                # Signalling failed but the pid exists under another user.
                alive = True
        if alive and pid != os.getpid():
            raise SpadaError(f"workspace is locked by pid {pid} ({path})")
        path.unlink(missing_ok=True)
    fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield
    finally:
        path.unlink(missing_ok=True)


def _emit(args, payload: dict, human_lines: Sequence[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True))
    else:
        for line in human_lines:
            print(line)


# -- commands -------------------------------------------------------------------

def cmd_init(args) -> int:
    from .dfci import build_workspace

    ws = Workspace.resolve(args.workspace)
    if ws.catalog_path.exists() and not args.force:
        raise SpadaError(f"{ws.catalog_path} already exists (use --force to overwrite)")
    with workspace_lock(ws):
        build_workspace(ws.root)
    _emit(args, {"workspace": str(ws.root)}, [f"initialized reference study in {ws.root}"])
    return EXIT_OK


def cmd_import(args) -> int:
    ws = Workspace.resolve(args.workspace)
    text = Path(args.file).read_text(encoding="utf-8")
    with workspace_lock(ws):
        catalog = ws.load_catalog()
        if args.what == "threats":
            added = import_threats_csv(catalog, text)
            names = [t.description for t in added]
        else:
            added = import_assets_csv(catalog, text)
            names = [a.name for a in added]
        ws.save_catalog(catalog)
    _emit(
        args,
        {"added": len(added), "items": names},
        [f"imported {len(added)} {args.what}"] + [f"  {n}" for n in names],
    )
    return EXIT_OK


def cmd_suggest(args) -> int:
    ws = Workspace.resolve(args.workspace)
    catalog = replay(ws.load_ledger(), ws.load_catalog())
    threshold = args.threshold if args.threshold is not None else ws.threshold
    metric = args.metric if args.metric is not None else ws.metric
    suggestions = suggest(catalog.active_threats(), threshold, load_stopwords(), metric=metric)
    payload = {
        "metric": metric,
        "suggestions": [s.to_dict() for s in suggestions],
        "threshold": threshold,
    }
    lines = [f"{len(suggestions)} suggestion(s) at threshold {threshold} ({metric})"]
    for s in suggestions:
        members = ", ".join(repr(catalog.threats[m].description) for m in s.members)
        lines.append(f"  [{s.id}] score={s.score:.3f}: {members}")
        lines.append(f"      proposed: {s.proposed_description!r}")
    _emit(args, payload, lines)
    return EXIT_OK


def _split_ids(raw: Sequence[str]) -> list[str]:
    out: list[str] = []
    for chunk in raw:
        out.extend(part.strip() for part in chunk.split(";") if part.strip())
    return out


def cmd_apply(args) -> int:
    ws = Workspace.resolve(args.workspace)
    with workspace_lock(ws):
        study = Study(ws.load_catalog(), ws.load_ledger())
        step = study.current_step if args.step is None else StepTag(args.step)
        if args.operation == "discard":
            record = study.record_discard(args.id, args.reason, step=step, rationale=args.rationale)
            result: dict = {"discarded": args.id}
        elif args.operation == "rename":
            record = study.record_rename(args.id, args.description, step=step, rationale=args.rationale)
            result = {"renamed": args.id}
        elif args.operation == "derive":
            record, new_id = study.record_derive_independent(
                args.id, args.description, step=step, rationale=args.rationale
            )
            result = {"derived": new_id}
        elif args.operation == "embrace":
            members = _split_ids(args.members)
            if args.assets:
                record, new_id = study.record_embrace_assets(
                    members, args.description, step=step, rationale=args.rationale
                )
                result = {"asset": new_id}
            else:
                record, new_id = study.record_embrace(
                    members, args.description, step=step, rationale=args.rationale
                )
                result = {"threat": new_id}
        elif args.operation == "combine":
            asset_ids = (
                sorted(study.catalog.assets) if args.all_assets else _split_ids(args.assets_list)
            )
            record, child_ids = study.record_combine(
                args.id, asset_ids, step=step, rationale=args.rationale
            )
            result = {"combined": len(child_ids)}
        else:  # pragma: no cover - argparse restricts choices
            raise SpadaError(f"unknown operation {args.operation}")
        ws.save_ledger(study.ledger)
    payload = {"record": record.to_dict(), **result}
    _emit(args, payload, [f"applied {record.kind.value} as seq {record.seq}"])
    return EXIT_OK


def cmd_run(args) -> int:
    ws = Workspace.resolve(args.workspace)
    with workspace_lock(ws):
        base = ws.load_catalog()
        ledger = ws.load_ledger()
        matrix = ws.load_matrix()
        snapshot, flows, full_ledger = run_all(base, ledger, matrix)
        ws.save_ledger(full_ledger)
    counts = stage_counts(snapshot)
    payload = {
        "counts": counts,
        "digest": snapshot.digest(),
        "flows": [f.to_dict() for f in flows],
        "head_seq": full_ledger.head_seq,
    }
    lines = []
    for flow in flows:
        lines.append(f"{flow.step.value}: " + ", ".join(f"{l}={c}" for l, c in flow.stages))
    lines.append(f"ledger head seq {full_ledger.head_seq}, digest {snapshot.digest()[:16]}")
    _emit(args, payload, lines)
    return EXIT_OK


def cmd_replay(args) -> int:
    ws = Workspace.resolve(args.workspace)
    snapshot = replay(ws.load_ledger(), ws.load_catalog())
    counts = stage_counts(snapshot)
    payload = {"counts": counts, "digest": snapshot.digest()}
    lines = [", ".join(f"{k}={v}" for k, v in counts.items()), f"digest {snapshot.digest()}"]
    _emit(args, payload, lines)
    return EXIT_OK


def cmd_verify(args) -> int:
    ws = Workspace.resolve(args.workspace)
    snapshot = replay(ws.load_ledger(), ws.load_catalog())
    expected = ws.load_expected(args.expect)
    report = verify_flow(snapshot, expected)
    payload = {
        "actual": report.actual,
        "expected": report.expected,
        "mismatches": {k: {"expected": w, "actual": g} for k, (w, g) in report.mismatches.items()},
        "verdict": report.verdict,
    }
    _emit(args, payload, report.lines() + [report.verdict])
    return EXIT_OK if report.ok else EXIT_VERIFY


def cmd_export(args) -> int:
    ws = Workspace.resolve(args.workspace)
    snapshot = replay(ws.load_ledger(), ws.load_catalog())
    if args.reserve:
        text = export_reserve_list(snapshot, args.format)
    else:
        text = export_threat_model(snapshot, args.format, include_combined=args.combined)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _current_flows(ws: Workspace) -> list[FlowRecord]:
    base = ws.load_catalog()
    ledger = ws.load_ledger()
    flows = [run_step1(base, ledger)[1]]
    try:
        flows.append(run_step2(base, ledger)[1])
    except DomainIndependentMode:
        pass
    flows.append(run_step3(base, ledger, [])[1])
    return flows


def cmd_diagram(args) -> int:
    ws = Workspace.resolve(args.workspace)
    text = emit_flow_diagram(_current_flows(ws), args.format)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_serve(args) -> int:  # pragma: no cover - exercised manually
    import uvicorn

    from .curator import create_app

    ws = Workspace.resolve(args.workspace)
    static_dir = args.static
    if static_dir is None:
        bundled = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
        if bundled.is_dir():
            static_dir = str(bundled)
    app = create_app(ws, static_dir=static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spada",
        description="Deterministic threat-model construction with a replayable operation ledger.",
    )
    parser.add_argument(
        "--workspace",
        "-w",
        default=None,
        help="study directory (default: $SPADA_WORKSPACE or the current directory)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="write the bundled reference study into the workspace")
    p.add_argument("--force", action="store_true", help="overwrite existing files")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("import", help="collect threats or assets from a CSV file")
    p.add_argument("what", choices=["threats", "assets"])
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("suggest", help="list merge suggestions for the current threat pool")
    p.add_argument("--threshold", type=float, default=None, help="similarity threshold in [0, 1]")
    p.add_argument("--metric", choices=list(METRICS), default=None, help="similarity metric")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_suggest)

    p = sub.add_parser("apply", help="append one operation to the ledger")
    op = p.add_subparsers(dest="operation", required=True)

    def common(q):
        q.add_argument(
            "--step",
            choices=[s.value for s in StepTag],
            default=None,
            help="step tag for the record (default: wherever the study currently is)",
        )
        q.add_argument("--rationale", default=None)
        q.add_argument("--json", action="store_true")
        q.set_defaults(func=cmd_apply)

    q = op.add_parser("discard", help="move a threat to the reserve list")
    q.add_argument("id")
    q.add_argument("--reason", required=True)
    common(q)
    q = op.add_parser("embrace", help="merge two or more threats (or assets with --assets)")
    q.add_argument("members", nargs="+", help="member ids (semicolon-separated chunks allowed)")
    q.add_argument("--description", required=True, help="merged wording (or group name)")
    q.add_argument("--assets", action="store_true", help="merge assets instead of threats")
    common(q)
    q = op.add_parser("rename", help="revise a threat's wording")
    q.add_argument("id")
    q.add_argument("--description", required=True)
    common(q)
    q = op.add_parser("derive", help="clone a domain-dependent threat under independent wording")
    q.add_argument("id")
    q.add_argument("--description", required=True)
    common(q)
    q = op.add_parser("combine", help="instantiate an independent threat onto assets")
    q.add_argument("id")
    q.add_argument("--assets", dest="assets_list", nargs="*", default=[], help="asset ids")
    q.add_argument("--all-assets", action="store_true")
    common(q)

    p = sub.add_parser("run", help="replay, apply the matrix, and report all flows")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="rebuild the snapshot from the ledger and report counts")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("verify", help="compare stage counts against expected values")
    p.add_argument("--expect", default=None, help="JSON file of expected counts")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="write the threat model (or reserve list)")
    p.add_argument("--format", choices=["csv", "markdown", "json"], default="csv")
    p.add_argument("--combined", action="store_true", help="include per-asset combination rows")
    p.add_argument("--reserve", action="store_true", help="export the reserve list instead")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("diagram", help="emit the stage-count flowchart")
    p.add_argument("--format", choices=["mermaid", "dot"], default="mermaid")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_diagram)

    p = sub.add_parser("serve", help="serve the curator HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8571)
    p.add_argument("--static", default=None, help="directory of workbench assets to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors; keep our contract
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ReplayError, LedgerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SpadaError as exc:
        # Domain errors (unknown ids, invalid operations, missing study files)
        # are data errors, distinct from malformed command lines.
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
