/** Boot: mount the workbench into #app, wire event delegation, start the
 * head-seq poll loop. All state transitions are driven by API responses. */

import { ApiClient } from "./api.js";
import { Workbench } from "./store.js";
import { renderApp } from "./views.js";

const POLL_INTERVAL_MS = 2000;

export function mount(root: HTMLElement, store: Workbench): void {
  store.subscribe(() => {
    root.innerHTML = renderApp(store.state);
  });

  root.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (target === null) return;
    const action = target.dataset.action;
    switch (action) {
      case "reload":
        void store.reload();
        break;
      case "accept": {
        const id = target.dataset.suggestionId;
        if (id === undefined) return;
        const input = root.querySelector<HTMLInputElement>(`input[data-desc-for="${id}"]`);
        void store.acceptSuggestion(id, input?.value || undefined);
        break;
      }
      case "reject": {
        const id = target.dataset.suggestionId;
        if (id !== undefined) void store.rejectSuggestion(id);
        break;
      }
      case "toggle": {
        const threatId = target.dataset.threatId;
        const assetId = target.dataset.assetId;
        if (threatId !== undefined && assetId !== undefined) {
          store.toggleCell(threatId, assetId);
        }
        break;
      }
      case "combine-row": {
        const threatId = target.dataset.threatId;
        if (threatId !== undefined) void store.combineRow(threatId);
        break;
      }
      case "combine-pending":
        void store.combineAllPending();
        break;
      case "apply-matrix-file":
        void store.applyWorkspaceMatrix();
        break;
      default:
        break;
    }
  });

  void store.refresh();
  setInterval(() => {
    void store.pollOnce();
  }, POLL_INTERVAL_MS);
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root !== null) {
    mount(root, new Workbench(new ApiClient()));
  }
}
