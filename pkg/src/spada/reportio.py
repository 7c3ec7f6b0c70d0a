"""Imports, exports, and flow diagrams.

All text output is UTF-8 with a trailing newline. Multi-valued cells in
tabular formats are semicolon-joined; agents render in their canonical
display order, assets alphabetically.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Optional, Sequence

from .catalog import (
    AGENT_ORDER,
    Asset,
    Catalog,
    DependencyClass,
    PrivacyProperty,
    Threat,
    ThreatAgent,
)
from .errors import EmptyFlow, SpadaError
from .oplog import OperationKind, applied_records
from .pipeline import FlowRecord

__all__ = [
    "export_threat_model",
    "export_reserve_list",
    "import_threats_csv",
    "import_assets_csv",
    "emit_flow_diagram",
    "parse_mermaid_flowchart",
    "THREATS_CSV_HEADER",
    "ASSETS_CSV_HEADER",
]

EXPORT_FORMATS = ("csv", "markdown", "json")


# -- threat model export -------------------------------------------------------

MODEL_COLUMNS = ["id", "description", "dependency", "agents", "properties", "origin", "assets"]


def _agents_cell(agents: frozenset[ThreatAgent]) -> str:
    return ";".join(a.display for a in sorted(agents, key=AGENT_ORDER.__getitem__))


def _properties_cell(props: frozenset[PrivacyProperty]) -> str:
    return ";".join(p.display for p in sorted(props, key=lambda p: p.value))


def _model_rows(catalog: Catalog, include_combined: bool) -> list[dict[str, str]]:
    active = catalog.active_threats()
    parents = [t for t in active if t.combination is None]
    children = [t for t in active if t.combination is not None]
    assets_of: dict[str, list[str]] = {}
    for child in children:
        tid, aid = child.combination
        assets_of.setdefault(tid, []).append(catalog.assets[aid].name)

    def row(threat: Threat, assets: Sequence[str]) -> dict[str, str]:
        return {
            "id": threat.id,
            "description": threat.description,
            "dependency": threat.dependency.value,
            "agents": _agents_cell(threat.agents),
            "properties": _properties_cell(threat.properties),
            "origin": ";".join(sorted(threat.origin)),
            "assets": ";".join(sorted(assets)),
        }

    def parent_key(t: Threat) -> tuple:
        return (0 if t.dependency is DependencyClass.DOMAIN_INDEPENDENT else 1, t.description.lower(), t.id)

    rows = [row(t, assets_of.get(t.id, [])) for t in sorted(parents, key=parent_key)]
    if include_combined:
        def child_key(c: Threat) -> tuple:
            parent = catalog.threats[c.combination[0]]
            return (parent.description.lower(), catalog.assets[c.combination[1]].name.lower(), c.id)

        rows.extend(
            row(c, [catalog.assets[c.combination[1]].name]) for c in sorted(children, key=child_key)
        )
    return rows


def _render_table(rows: list[dict[str, str]], columns: list[str], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "markdown":
        def esc(cell: str) -> str:
            return cell.replace("|", "\\|")

        lines = [
            "| " + " | ".join(columns) + " |",
            "| " + " | ".join("---" for _ in columns) + " |",
        ]
        lines.extend("| " + " | ".join(esc(r[c]) for c in columns) + " |" for r in rows)
        return "\n".join(lines) + "\n"
    if fmt == "json":
        return json.dumps(rows, ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    raise SpadaError(f"unknown export format {fmt!r} (expected one of {EXPORT_FORMATS})")


def export_threat_model(catalog: Catalog, fmt: str = "csv", include_combined: bool = False) -> str:
    """Render the final model: independent threats with their combined-asset
    lists, then retained dependent threats. With include_combined, the
    per-asset combination threats follow as their own rows."""
    return _render_table(_model_rows(catalog, include_combined), MODEL_COLUMNS, fmt)


RESERVE_COLUMNS = ["id", "description", "origin", "reason"]


def export_reserve_list(catalog: Catalog, fmt: str = "csv") -> str:
    """Render the discarded threats with the rationale recorded at discard."""
    reasons: dict[str, str] = {}
    for record in applied_records(catalog):
        if record.kind is OperationKind.DISCARD:
            reasons[record.payload["threat"]] = record.payload.get("reason", "")
    rows = [
        {
            "id": t.id,
            "description": t.description,
            "origin": ";".join(sorted(t.origin)),
            "reason": reasons.get(t.id, ""),
        }
        for t in sorted(catalog.discarded_threats(), key=lambda t: (t.description.lower(), t.id))
    ]
    return _render_table(rows, RESERVE_COLUMNS, fmt)


# -- imports -------------------------------------------------------------------

THREATS_CSV_HEADER = ["description", "origin", "dependency", "agents", "properties"]
ASSETS_CSV_HEADER = ["name", "origin"]

_AGENT_BY_NAME = {a.value.lower(): a for a in ThreatAgent}
_AGENT_BY_NAME.update({a.display.lower(): a for a in ThreatAgent})
_PROPERTY_BY_NAME = {p.value.lower(): p for p in PrivacyProperty}
_PROPERTY_BY_NAME.update({p.display.lower(): p for p in PrivacyProperty})


def _split_cell(cell: str) -> list[str]:
    return [part.strip() for part in cell.split(";") if part.strip()]


def _read_csv(text: str, header: list[str]) -> list[list[str]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != header:
        raise SpadaError(f"header must be {','.join(header)}")
    return [r for r in rows[1:] if any(cell.strip() for cell in r)]


def import_threats_csv(catalog: Catalog, text: str) -> list[Threat]:
    """Collect threats from a CSV. Blank dependency means classify against
    the domain lexicon; blank agents/properties take the setup defaults."""
    added: list[Threat] = []
    for row in _read_csv(text, THREATS_CSV_HEADER):
        if len(row) != len(THREATS_CSV_HEADER):
            raise SpadaError(f"threat row needs {len(THREATS_CSV_HEADER)} cells, got {row!r}")
        description, origin_cell, dep_cell, agents_cell, props_cell = (c.strip() for c in row)
        origin = _split_cell(origin_cell)
        dependency = DependencyClass(dep_cell) if dep_cell else catalog.classify(description)
        agents = None
        if agents_cell:
            try:
                agents = [_AGENT_BY_NAME[name.lower()] for name in _split_cell(agents_cell)]
            except KeyError as exc:
                raise SpadaError(f"unknown agent {exc.args[0]!r}") from None
        properties = None
        if props_cell:
            try:
                properties = [_PROPERTY_BY_NAME[name.lower()] for name in _split_cell(props_cell)]
            except KeyError as exc:
                raise SpadaError(f"unknown property {exc.args[0]!r}") from None
        added.append(catalog.add_threat(description, origin, dependency, agents, properties))
    return added


def import_assets_csv(catalog: Catalog, text: str) -> list[Asset]:
    """Collect candidate assets from a CSV."""
    added: list[Asset] = []
    for row in _read_csv(text, ASSETS_CSV_HEADER):
        if len(row) != len(ASSETS_CSV_HEADER):
            raise SpadaError(f"asset row needs {len(ASSETS_CSV_HEADER)} cells, got {row!r}")
        name, origin_cell = (c.strip() for c in row)
        added.append(catalog.add_asset(name, _split_cell(origin_cell)))
    return added


# -- flow diagrams -------------------------------------------------------------

# Per-step edge topology over stage labels. Stages absent from a flow are
# simply left out along with their edges.
_STEP_EDGES: dict[str, list[tuple[str, str]]] = {
    "Step1": [
        ("collected", "discarded"),
        ("collected", "after_embrace"),
        ("derived_pre", "after_embrace"),
        ("after_embrace", "derived_post"),
        ("derived_post", "di_final"),
        ("after_embrace", "di_final"),
        ("after_embrace", "dd_retained"),
    ],
    "Step2": [("candidates", "groups")],
    "Step3": [
        ("di_inputs", "combined"),
        ("assets", "combined"),
        ("combined", "total"),
        ("retained", "total"),
    ],
}

# Edges that stitch consecutive step subgraphs together when both ends exist.
_CROSS_EDGES: list[tuple[tuple[str, str], tuple[str, str]]] = [
    (("Step1", "di_final"), ("Step3", "di_inputs")),
    (("Step1", "dd_retained"), ("Step3", "retained")),
    (("Step2", "groups"), ("Step3", "assets")),
]

_STEP_TITLES = {"Step1": "Step 1", "Step2": "Step 2", "Step3": "Step 3"}


def _node_id(step_value: str, label: str) -> str:
    return f"{step_value.lower()}_{label}"


def _diagram_parts(flows: Sequence[FlowRecord]):
    if not flows:
        raise EmptyFlow("no flow records to draw")
    seen_steps: list[str] = []
    nodes: dict[str, tuple[str, str]] = {}  # id -> (step value, text)
    for flow in flows:
        sv = flow.step.value
        if sv in seen_steps:
            raise SpadaError(f"duplicate flow for {sv}")
        seen_steps.append(sv)
        for label, count in flow.stages:
            nodes[_node_id(sv, label)] = (sv, f"{label}: {count}")
    edges: list[tuple[str, str]] = []
    for sv in seen_steps:
        for a, b in _STEP_EDGES.get(sv, []):
            ia, ib = _node_id(sv, a), _node_id(sv, b)
            if ia in nodes and ib in nodes:
                edges.append((ia, ib))
    for (sa, la), (sb, lb) in _CROSS_EDGES:
        ia, ib = _node_id(sa, la), _node_id(sb, lb)
        if ia in nodes and ib in nodes:
            edges.append((ia, ib))
    return seen_steps, nodes, edges


def emit_flow_diagram(flows: Sequence[FlowRecord], fmt: str = "mermaid") -> str:
    """Draw the stage counts as a flowchart, one subgraph per step."""
    seen_steps, nodes, edges = _diagram_parts(flows)
    if fmt == "mermaid":
        lines = ["flowchart TD"]
        for sv in seen_steps:
            lines.append(f'  subgraph {sv.lower()}["{_STEP_TITLES[sv]}"]')
            for nid, (step_value, text) in nodes.items():
                if step_value == sv:
                    escaped = text.replace('"', "#quot;")
                    lines.append(f'    {nid}["{escaped}"]')
            lines.append("  end")
        for a, b in edges:
            lines.append(f"  {a} --> {b}")
        return "\n".join(lines) + "\n"
    if fmt == "dot":
        lines = ["digraph flows {", "  rankdir=TB;"]
        for sv in seen_steps:
            lines.append(f"  subgraph cluster_{sv.lower()} {{")
            lines.append(f'    label="{_STEP_TITLES[sv]}";')
            for nid, (step_value, text) in nodes.items():
                if step_value == sv:
                    escaped = text.replace('"', '\\"')
                    lines.append(f'    {nid} [label="{escaped}"];')
            lines.append("  }")
        for a, b in edges:
            lines.append(f"  {a} -> {b};")
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise SpadaError(f"unknown diagram format {fmt!r} (expected mermaid or dot)")


def parse_mermaid_flowchart(text: str) -> tuple[dict[str, str], list[tuple[str, str]], dict[str, list[str]]]:
    """Minimal reader for the flowcharts this module emits: returns
    (node id -> text, edges, subgraph title -> node ids)."""
    nodes: dict[str, str] = {}
    edges: list[tuple[str, str]] = []
    subgraphs: dict[str, list[str]] = {}
    current: Optional[str] = None
    lines = text.splitlines()
    if not lines or lines[0].strip() != "flowchart TD":
        raise SpadaError("not a flowchart TD document")
    for raw in lines[1:]:
        line = raw.strip()
        if not line:
            continue
        if line.startswith("subgraph "):
            title = line.split('["', 1)[1].rsplit('"]', 1)[0]
            current = title
            subgraphs[current] = []
            continue
        if line == "end":
            current = None
            continue
        if " --> " in line:
            a, b = (part.strip() for part in line.split(" --> ", 1))
            edges.append((a, b))
            continue
        if '["' in line and line.endswith('"]'):
            nid, label = line.split('["', 1)
            nodes[nid.strip()] = label[:-2].replace("#quot;", '"')
            if current is not None:
                subgraphs[current].append(nid.strip())
            continue
        raise SpadaError(f"unrecognized flowchart line: {raw!r}")
    return nodes, edges, subgraphs
