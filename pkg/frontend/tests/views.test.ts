import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { Workbench } from "../src/store.js";
import type { WorkbenchState } from "../src/store.js";
import type { Flow } from "../src/types.js";
import {
  escapeHtml,
  renderConflictBanner,
  renderDashboard,
  renderMatrix,
  renderQueue,
} from "../src/views.js";
import { makeFakeServer } from "./fakeServer.js";

const STEP1: Flow = {
  step: "Step1",
  stages: [
    { label: "collected", count: 46 },
    { label: "discarded", count: 3 },
    { label: "after_embrace", count: 37 },
    { label: "derived_pre", count: 12 },
    { label: "derived_post", count: 7 },
    { label: "di_final", count: 30 },
    { label: "dd_retained", count: 7 },
  ],
};

function stateWith(overrides: Partial<WorkbenchState>): WorkbenchState {
  return {
    phase: "ready",
    headSeq: 81,
    digest: "d",
    counts: {},
    flows: [],
    suggestions: [],
    threshold: 0.5,
    metric: "jaccard",
    matrix: null,
    descriptions: {},
    pending: {},
    conflict: null,
    notice: null,
    ...overrides,
  };
}

describe("flow dashboard", () => {
  it("shows the refinement chain 46 -> 43 -> 37 with the 30/7 split", () => {
    const html = renderDashboard([STEP1], 81);
    expect(html).toContain('data-stage="collected">46<');
    expect(html).toContain('data-stage="after_discards">43<');
    expect(html).toContain('data-stage="after_embrace">37<');
    expect(html).toContain('data-stage="di_final">30<');
    expect(html).toContain('data-stage="dd_retained">7<');
    const order = ["collected", "after_discards", "after_embrace"].map((stage) =>
      html.indexOf(`data-stage="${stage}"`),
    );
    expect([...order].sort((a, b) => a - b)).toEqual(order);
  });

  it("renders zeroed panels for an empty study", () => {
    const empty: Flow = {
      step: "Step1",
      stages: [
        { label: "collected", count: 0 },
        { label: "discarded", count: 0 },
        { label: "after_embrace", count: 0 },
        { label: "di_final", count: 0 },
        { label: "dd_retained", count: 0 },
      ],
    };
    const html = renderDashboard([empty], 0);
    expect(html).toContain('data-stage="collected">0<');
    expect(html).toContain('data-stage="after_embrace">0<');
  });

  it("offers every export as a download link", () => {
    const html = renderDashboard([STEP1], 81);
    expect(html).toContain('href="/exports/threat-model"');
    expect(html).toContain('href="/exports/reserve-list"');
    expect(html).toContain('href="/diagram"');
  });
});

describe("matrix grid footer", () => {
  it("shows 291 combined and 298 projected once the full study matrix is applied", async () => {
    // Fixture-scale scenario: the committed study has 291 combination
    // products and 7 retained dependent threats.
    const server = makeFakeServer();
    server.state.counts.combined = 291;
    server.state.counts.total = 298;
    server.state.counts.dd_retained = 7;
    const store = new Workbench(new ApiClient(server.fetchImpl));
    await store.refresh();

    const html = renderMatrix(store.state);
    expect(html).toContain("combined: 291");
    expect(html).toContain("projected total: 298");
  });

  it("projects pending toggles into the grand total", () => {
    const state = stateWith({
      counts: { combined: 0, dd_retained: 7 },
      matrix: {
        head_seq: 81,
        digest: "d",
        threats: [{ id: "m1", description: "Excessive collection of personal data" }],
        assets: [
          { id: "a1", name: "Storage media" },
          { id: "a2", name: "Case databases" },
        ],
        cells: { m1: [] },
      },
      pending: { m1: ["a1", "a2"] },
    });
    const html = renderMatrix(state);
    expect(html).toContain("combined: 0 (+2 pending)");
    expect(html).toContain("projected total: 9");
  });

  it("renders an empty-state message when nothing is combinable", () => {
    const html = renderMatrix(stateWith({ matrix: null }));
    expect(html).toContain("No independent threats to combine yet.");
  });

  it("locks committed cells and enables combine only for pending rows", () => {
    const state = stateWith({
      counts: { combined: 1, dd_retained: 0 },
      matrix: {
        head_seq: 81,
        digest: "d",
        threats: [
          { id: "m1", description: "Threat one" },
          { id: "m2", description: "Threat two" },
        ],
        assets: [{ id: "a1", name: "Storage media" }],
        cells: { m1: ["a1"], m2: [] },
      },
      pending: { m2: ["a1"] },
    });
    const html = renderMatrix(state);
    expect(html).toMatch(/data-threat-id="m1" data-asset-id="a1" checked disabled/);
    expect(html).toMatch(/data-threat-id="m2" data-asset-id="a1" checked\s*\/>/);
    expect(html).toMatch(/data-action="combine-row" data-threat-id="m2" >/);
    expect(html).toMatch(/data-action="combine-row" data-threat-id="m1" disabled/);
  });
});

describe("suggestion queue", () => {
  it("lists member descriptions with an editable proposed wording", () => {
    const html = renderQueue(
      [
        {
          id: "s1",
          members: ["t1", "t2"],
          score: 0.75,
          proposed_description: "Unauthorized access to data",
          status: "pending",
        },
      ],
      { t1: "Unauthorized access to data", t2: "Unauthorized data access" },
      0.5,
      "jaccard",
    );
    expect(html).toContain("<li>Unauthorized access to data</li>");
    expect(html).toContain("<li>Unauthorized data access</li>");
    expect(html).toContain('data-desc-for="s1" value="Unauthorized access to data"');
    expect(html).toContain("score 0.750");
    expect(html).toContain('data-action="accept"');
    expect(html).toContain('data-action="reject"');
  });

  it("says the queue is empty when there is nothing to review", () => {
    const html = renderQueue([], {}, 0.7, "cosine");
    expect(html).toContain("No pending suggestions at threshold 0.7 (cosine).");
  });

  it("escapes hostile text in descriptions", () => {
    const html = renderQueue(
      [
        {
          id: "s1",
          members: ["t1"],
          score: 1,
          proposed_description: '<img src=x onerror="x">',
          status: "pending",
        },
      ],
      { t1: "<script>alert(1)</script>" },
      0.5,
      "jaccard",
    );
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
    expect(html).toContain("&lt;img src=x onerror=&quot;x&quot;&gt;");
  });
});

describe("conflict banner", () => {
  it("names both head seqs and offers a reload", () => {
    const html = renderConflictBanner({ headSeq: 12, lastSeenSeq: 10 });
    expect(html).toContain("seq 12");
    expect(html).toContain("seq 10");
    expect(html).toContain("Your change was not applied.");
    expect(html).toContain('data-action="reload"');
  });
});

describe("escapeHtml", () => {
  it("escapes every HTML metacharacter", () => {
    expect(escapeHtml(`<a href="x">&'</a>`)).toBe(
      "&lt;a href=&quot;x&quot;&gt;&amp;&#39;&lt;/a&gt;",
    );
  });
});
