// Candidate selection grid. Only ingested candidates are clickable; the
// rest are greyed out with the reason the server recorded. The origin
// domain is shown prominently so the factuality judgment can weigh the
// source.

import { ApiClient } from "../api.js";
import { CandidateView, SessionView } from "../types.js";

export interface GridHandlers {
  onSelect(index: number): void;
}

function originDomain(url: string): string {
  try {
    return new URL(url).hostname;
  } catch {
    return url;
  }
}

function renderCard(
  candidate: CandidateView,
  client: ApiClient,
  selectable: boolean,
  handlers: GridHandlers,
): HTMLElement {
  const card = document.createElement("figure");
  card.className = "candidate";
  card.dataset.testid = `candidate-${candidate.rank}`;
  const usable = candidate.ingest_status === "ingested";

  if (candidate.artifact) {
    const img = document.createElement("img");
    img.src = client.blobUrl(candidate.artifact.content_hash);
    img.alt = candidate.title ?? `candidate ${candidate.rank}`;
    card.appendChild(img);
  } else {
    const placeholder = document.createElement("div");
    placeholder.className = "thumb-placeholder";
    placeholder.textContent = candidate.ingest_status.replace(/_/g, " ");
    card.appendChild(placeholder);
  }

  const caption = document.createElement("figcaption");
  const domain = document.createElement("strong");
  domain.textContent = originDomain(candidate.origin_url);
  caption.appendChild(domain);
  const link = document.createElement("a");
  link.href = candidate.origin_url;
  link.textContent = candidate.title ?? candidate.origin_url;
  link.target = "_blank";
  caption.appendChild(document.createElement("br"));
  caption.appendChild(link);
  card.appendChild(caption);

  if (!usable) {
    card.classList.add("candidate-disabled");
    card.title = candidate.status_detail ?? candidate.ingest_status;
    const reason = document.createElement("div");
    reason.className = "candidate-reason";
    reason.textContent = candidate.status_detail ?? candidate.ingest_status;
    card.appendChild(reason);
  } else if (selectable) {
    card.classList.add("candidate-selectable");
    card.addEventListener("click", () => handlers.onSelect(candidate.rank));
  }
  return card;
}

export function renderGrid(
  view: SessionView,
  client: ApiClient,
  handlers: GridHandlers,
): HTMLElement {
  const section = document.createElement("section");
  section.dataset.testid = "candidate-grid";
  const selectable = view.state === "candidates_retrieved";

  const heading = document.createElement("p");
  heading.className = selectable ? "cta-text" : "";
  if (selectable) heading.dataset.testid = "primary-cta";
  heading.textContent = selectable
    ? "Pick the reference image that shows the facts you asked for"
    : "Retrieved references";
  section.appendChild(heading);

  const grid = document.createElement("div");
  grid.className = "grid";
  for (const candidate of view.candidates) {
    const card = renderCard(candidate, client, selectable, handlers);
    if (candidate.rank === view.selected_index) card.classList.add("candidate-selected");
    grid.appendChild(card);
  }
  if (view.candidates.length === 0) {
    const empty = document.createElement("p");
    empty.textContent =
      "No candidates were retrieved. Start a new session with a larger candidate count.";
    grid.appendChild(empty);
  }
  section.appendChild(grid);
  return section;
}
