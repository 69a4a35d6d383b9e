// Before/after review: initial | reference | edited panes plus the
// provenance panel (hashes, strategy, model, guidance text). A pane whose
// blob fails to load degrades to a placeholder carrying the hash.

import { ApiClient } from "../api.js";
import { SessionView } from "../types.js";

function pane(label: string, hash: string | undefined, client: ApiClient): HTMLElement {
  const figure = document.createElement("figure");
  figure.className = "pane";
  figure.dataset.testid = `pane-${label}`;
  if (hash) {
    const img = document.createElement("img");
    img.src = client.blobUrl(hash);
    img.alt = label;
    img.addEventListener("error", () => {
      const placeholder = document.createElement("div");
      placeholder.className = "thumb-placeholder";
      placeholder.dataset.testid = `placeholder-${label}`;
      placeholder.textContent = `blob ${hash.slice(0, 12)}… unavailable`;
      const retry = document.createElement("a");
      retry.href = client.blobUrl(hash);
      retry.textContent = "retry";
      placeholder.appendChild(document.createElement("br"));
      placeholder.appendChild(retry);
      img.replaceWith(placeholder);
    });
    figure.appendChild(img);
  } else {
    const placeholder = document.createElement("div");
    placeholder.className = "thumb-placeholder";
    placeholder.dataset.testid = `placeholder-${label}`;
    placeholder.textContent = "missing";
    figure.appendChild(placeholder);
  }
  const caption = document.createElement("figcaption");
  caption.textContent = label;
  figure.appendChild(caption);
  return figure;
}

export function renderCompare(view: SessionView, client: ApiClient): HTMLElement {
  const section = document.createElement("section");
  section.dataset.testid = "compare-view";

  const row = document.createElement("div");
  row.className = "pane-row";
  const reference =
    view.selected_index !== null
      ? view.candidates[view.selected_index]?.artifact?.content_hash
      : undefined;
  row.appendChild(pane("initial", view.initial_image?.content_hash, client));
  row.appendChild(pane("reference", reference, client));
  row.appendChild(pane("edited", view.edited_image?.content_hash, client));
  section.appendChild(row);

  const provenance = document.createElement("dl");
  provenance.className = "provenance";
  provenance.dataset.testid = "provenance";
  const rows: Array<[string, string]> = [
    ["strategy", `${view.strategy ?? ""}${view.strategy_overridden ? " (overridden)" : ""}`],
    ["guidance", view.guidance?.text ?? ""],
    ["llm backend", view.guidance?.llm_backend_id ?? ""],
    ["initial hash", view.initial_image?.content_hash ?? ""],
    ["reference hash", reference ?? ""],
    ["edited hash", view.edited_image?.content_hash ?? ""],
    ["edit parents", (view.edited_image?.parent_hashes ?? []).join(", ")],
  ];
  for (const [term, detail] of rows) {
    const dt = document.createElement("dt");
    dt.textContent = term;
    const dd = document.createElement("dd");
    dd.textContent = detail;
    provenance.appendChild(dt);
    provenance.appendChild(dd);
  }
  section.appendChild(provenance);
  return section;
}
