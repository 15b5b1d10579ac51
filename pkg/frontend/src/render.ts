// HTML renderers. Pure string functions so the UI contract is testable
// without a browser; main.ts assigns the output to innerHTML.

import type { RankedEntry, SelectionResult } from "./types.js";
import type { UiTurn } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function renderCitations(turn: UiTurn): string {
  const chips = turn.citations
    .map(
      (c) =>
        `<details class="citation-chip"><summary>${escapeHtml(c.doc_id)} ` +
        `(${c.score.toFixed(3)})</summary><code>${escapeHtml(c.chunk_id)}</code></details>`,
    )
    .join("");
  return `<div class="citations">${chips}</div>`;
}

export function renderTurn(turn: UiTurn): string {
  return (
    `<div class="turn">` +
    `<div class="bubble user">${escapeHtml(turn.user_query)}</div>` +
    `<div class="bubble assistant">${escapeHtml(turn.response)}</div>` +
    renderCitations(turn) +
    `<div class="latency">${turn.latency_ms.toFixed(1)} ms</div>` +
    `</div>`
  );
}

export function renderTranscript(turns: UiTurn[], pendingQuery: string | null): string {
  let html = turns.map(renderTurn).join("");
  if (pendingQuery !== null) {
    html +=
      `<div class="turn pending">` +
      `<div class="bubble user">${escapeHtml(pendingQuery)}</div>` +
      `<div class="bubble assistant typing">&hellip;</div></div>`;
  }
  return html;
}

export function renderError(error: string | null, canRetry: boolean): string {
  if (!error) return "";
  const retry = canRetry ? `<button id="retry-button" class="retry">retry</button>` : "";
  return `<div class="error-banner">${escapeHtml(error)}${retry}</div>`;
}

const VIOLATION_LABELS: Record<string, string> = {
  Q4_UNSUPPORTED: "Q4 unsupported",
  INSUFFICIENT_MEMORY: "insufficient memory",
};

export function renderViolationBadges(entry: RankedEntry): string {
  if (entry.feasible) return `<span class="badge ok">ok</span>`;
  return entry.violations
    .map((v) => `<span class="badge violation">${escapeHtml(VIOLATION_LABELS[v] ?? v)}</span>`)
    .join("");
}

export function renderSelectionTable(result: SelectionResult | null): string {
  if (result === null) return "";
  if (result.ranked.length === 0) {
    return `<p class="empty-state">catalog is empty</p>`;
  }
  const rows = result.ranked
    .map((entry) => {
      const gb = entry.est_bytes / 1e9;
      const chosen = result.chosen && result.chosen.name === entry.spec.name ? " chosen" : "";
      return (
        `<tr class="ranked${chosen}">` +
        `<td>${escapeHtml(entry.spec.name)}</td>` +
        `<td>${escapeHtml(entry.spec.quant)}</td>` +
        `<td>${gb.toFixed(2)} GB</td>` +
        `<td>${entry.spec.accuracy_score.toFixed(1)}</td>` +
        `<td>${renderViolationBadges(entry)}</td>` +
        `</tr>`
      );
    })
    .join("");
  const chosenLine = result.chosen
    ? `<p class="chosen-line">chosen: <strong>${escapeHtml(result.chosen.name)}</strong></p>`
    : `<p class="chosen-line">no feasible model for this profile</p>`;
  return (
    `<table class="selection"><thead><tr>` +
    `<th>model</th><th>quant</th><th>est. memory</th><th>score</th><th>status</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>` +
    chosenLine
  );
}

export function renderModelCount(count: number): string {
  return `<span class="model-count">${count} model${count === 1 ? "" : "s"} in catalog</span>`;
}
