/** Pure renderers: state in, HTML string out. Event wiring lives in main.ts
 * via data-action attributes, so every view is testable as a string. */

import { footerTotals } from "./store.js";
import type { WorkbenchState } from "./store.js";
import type { ConflictInfo, Flow, Suggestion } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function stat(stage: string, value: number | string): string {
  return `<span class="stat" data-stage="${stage}">${value}</span>`;
}

export function renderConflictBanner(conflict: ConflictInfo): string {
  return (
    `<div class="banner conflict" role="alert">` +
    `Another client advanced the study to seq ${conflict.headSeq} ` +
    `while you were at seq ${conflict.lastSeenSeq}. Your change was not applied. ` +
    `<button data-action="reload">Reload</button>` +
    `</div>`
  );
}

export function renderNotice(notice: string): string {
  return `<div class="banner notice" role="status">${escapeHtml(notice)}</div>`;
}

/** One panel per construction step; the refinement step gets the familiar
 * collected → after-discards → after-embrace chain with the final split. */
export function renderDashboard(flows: Flow[], headSeq: number): string {
  const panels = flows.map((flow) => {
    const counts: Record<string, number> = {};
    for (const s of flow.stages) counts[s.label] = s.count;
    if (flow.step === "Step1") {
      const collected = counts["collected"] ?? 0;
      const discarded = counts["discarded"] ?? 0;
      const chain = [
        stat("collected", collected),
        stat("after_discards", collected - discarded),
        stat("after_embrace", counts["after_embrace"] ?? 0),
      ].join('<span class="arrow">&rarr;</span>');
      return (
        `<section class="panel" data-step="Step1"><h3>Refinement</h3>` +
        `<div class="chain">${chain}</div>` +
        `<div class="split">split: ${stat("di_final", counts["di_final"] ?? 0)} independent` +
        ` / ${stat("dd_retained", counts["dd_retained"] ?? 0)} retained</div>` +
        `</section>`
      );
    }
    const boxes = flow.stages
      .map((s) => `<div class="stage">${escapeHtml(s.label)} ${stat(s.label, s.count)}</div>`)
      .join("");
    const title = flow.step === "Step2" ? "Assets" : "Combination";
    return `<section class="panel" data-step="${escapeHtml(flow.step)}"><h3>${title}</h3>${boxes}</section>`;
  });
  const exports =
    `<nav class="exports">` +
    `<a href="/exports/threat-model" download="threat_model.csv">threat model</a>` +
    `<a href="/exports/threat-model?combined=true" download="threat_model_combined.csv">with combinations</a>` +
    `<a href="/exports/reserve-list" download="reserve_list.csv">reserve list</a>` +
    `<a href="/diagram" download="flow.mmd">flow diagram</a>` +
    `</nav>`;
  return (
    `<header class="dashboard" data-head-seq="${headSeq}">` +
    panels.join("") +
    exports +
    `</header>`
  );
}

export function renderQueue(
  suggestions: Suggestion[],
  descriptions: Record<string, string>,
  threshold: number,
  metric: string,
): string {
  if (suggestions.length === 0) {
    return (
      `<section class="queue"><h2>Embrace suggestions</h2>` +
      `<p class="empty">No pending suggestions at threshold ${threshold} (${escapeHtml(metric)}).</p></section>`
    );
  }
  const cards = suggestions.map((s) => {
    const members = s.members
      .map((id) => `<li>${escapeHtml(descriptions[id] ?? id)}</li>`)
      .join("");
    return (
      `<article class="suggestion" data-suggestion="${s.id}">` +
      `<div class="score">score ${s.score.toFixed(3)}</div>` +
      `<ul class="members">${members}</ul>` +
      `<input type="text" data-desc-for="${s.id}" value="${escapeHtml(s.proposed_description)}" />` +
      `<button data-action="accept" data-suggestion-id="${s.id}">Accept</button>` +
      `<button data-action="reject" data-suggestion-id="${s.id}">Reject</button>` +
      `</article>`
    );
  });
  return (
    `<section class="queue"><h2>Embrace suggestions</h2>` +
    `<p class="meta">${suggestions.length} pending · threshold ${threshold} · ${escapeHtml(metric)}</p>` +
    cards.join("") +
    `</section>`
  );
}

export function renderMatrix(state: WorkbenchState): string {
  const matrix = state.matrix;
  if (matrix === null || matrix.threats.length === 0) {
    return `<section class="matrix"><h2>Applicability matrix</h2><p class="empty">No independent threats to combine yet.</p></section>`;
  }
  const header = matrix.assets
    .map((a) => `<th scope="col"><span class="asset-name">${escapeHtml(a.name)}</span></th>`)
    .join("");
  const rows = matrix.threats.map((t) => {
    const committed = matrix.cells[t.id] ?? [];
    const pending = state.pending[t.id] ?? [];
    const cells = matrix.assets
      .map((a) => {
        const isCommitted = committed.includes(a.id);
        const isPending = pending.includes(a.id);
        const checked = isCommitted || isPending ? "checked" : "";
        const disabled = isCommitted ? "disabled" : "";
        return (
          `<td class="${isCommitted ? "committed" : isPending ? "pending" : ""}">` +
          `<input type="checkbox" data-action="toggle" data-threat-id="${t.id}" data-asset-id="${a.id}" ${checked} ${disabled} />` +
          `</td>`
        );
      })
      .join("");
    const canCombine = pending.length > 0 ? "" : "disabled";
    return (
      `<tr data-threat-id="${t.id}">` +
      `<th scope="row">${escapeHtml(t.description)}</th>` +
      cells +
      `<td><button data-action="combine-row" data-threat-id="${t.id}" ${canCombine}>Combine</button></td>` +
      `</tr>`
    );
  });
  const totals = footerTotals(state);
  const pendingNote = totals.pending > 0 ? ` (+${totals.pending} pending)` : "";
  const footer =
    `<tfoot><tr><td colspan="${matrix.assets.length + 2}">` +
    `<span class="footer-sigma">&Sigma; combined: ${totals.sigma}${pendingNote}</span>` +
    ` · retained: ${state.counts["dd_retained"] ?? 0}` +
    ` · <span class="footer-grand">projected total: ${totals.grand}</span>` +
    `</td></tr></tfoot>`;
  return (
    `<section class="matrix"><h2>Applicability matrix</h2>` +
    `<div class="matrix-actions">` +
    `<button data-action="combine-pending" ${totals.pending > 0 ? "" : "disabled"}>Combine all pending</button>` +
    `<button data-action="apply-matrix-file">Apply matrix file</button>` +
    `</div>` +
    `<div class="matrix-scroll"><table>` +
    `<thead><tr><th scope="col">Threat</th>${header}<th scope="col"></th></tr></thead>` +
    `<tbody>${rows.join("")}</tbody>` +
    footer +
    `</table></div></section>`
  );
}

export function renderApp(state: WorkbenchState): string {
  if (state.phase === "loading") {
    return `<main class="app"><p class="empty">Loading study…</p></main>`;
  }
  const banner = state.conflict !== null ? renderConflictBanner(state.conflict) : "";
  const notice = state.notice !== null ? renderNotice(state.notice) : "";
  if (state.phase === "error") {
    return `<main class="app">${notice || renderNotice("The curator is unreachable.")}</main>`;
  }
  return (
    `<main class="app">` +
    banner +
    notice +
    renderDashboard(state.flows, state.headSeq) +
    `<div class="columns">` +
    renderQueue(state.suggestions, state.descriptions, state.threshold, state.metric) +
    renderMatrix(state) +
    `</div>` +
    `</main>`
  );
}
