// DOM rendering for the two overlay surfaces: the secured-prompt preview
// (each replacement visually marked, original on demand) and the reply view
// (placeholders kept in the text, originals in per-hit popups the user can
// close or reveal). Originals come exclusively from gateway responses and
// live only in the rendered DOM, never in any storage.

import { scalarToUtf16 } from "./offsets.js";
import type { RehydrationHit, Replacement } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Render secured text with each replacement marked; click toggles the original. */
export function renderSecuredText(
  container: HTMLElement,
  securedText: string,
  replacements: Replacement[],
): void {
  container.textContent = "";
  container.classList.add("pg-secured");
  let cursor = 0; // UTF-16 cursor into securedText
  const ordered = [...replacements].sort((a, b) => a.secured_start - b.secured_start);
  for (const rep of ordered) {
    const start = scalarToUtf16(securedText, rep.secured_start);
    const end = scalarToUtf16(securedText, rep.secured_end);
    if (start > cursor) {
      container.appendChild(document.createTextNode(securedText.slice(cursor, start)));
    }
    const mark = el("mark", "pg-replacement", securedText.slice(start, end));
    mark.dataset.original = rep.original;
    mark.title = "replaced - click to peek at the original";
    mark.addEventListener("click", () => {
      const revealed = mark.classList.toggle("pg-revealed");
      mark.textContent = revealed ? rep.original : securedText.slice(start, end);
    });
    container.appendChild(mark);
    cursor = end;
  }
  container.appendChild(document.createTextNode(securedText.slice(cursor)));
}

/**
 * Render a reply using the placeholders, with one popup per hit showing the
 * original. Popups start revealed and can be individually closed/reopened.
 */
export function renderReplyOverlay(
  container: HTMLElement,
  restoredText: string,
  hits: RehydrationHit[],
): void {
  container.textContent = "";
  container.classList.add("pg-reply");
  let cursor = 0;
  const ordered = [...hits].sort((a, b) => a.start - b.start);
  for (const hit of ordered) {
    const start = scalarToUtf16(restoredText, hit.start);
    const end = scalarToUtf16(restoredText, hit.end);
    if (start > cursor) {
      container.appendChild(document.createTextNode(restoredText.slice(cursor, start)));
    }
    container.appendChild(buildHit(hit));
    cursor = end;
  }
  container.appendChild(document.createTextNode(restoredText.slice(cursor)));
}

function buildHit(hit: RehydrationHit): HTMLElement {
  const wrap = el("span", "pg-hit");
  const placeholder = el("span", "pg-hit-placeholder", hit.placeholder);
  const popup = el("span", "pg-popup pg-open");
  const original = el("span", "pg-popup-original", hit.original);
  const close = el("button", "pg-popup-close", "×");
  close.type = "button";
  close.title = "hide the original";
  const reveal = el("button", "pg-popup-reveal", "reveal");
  reveal.type = "button";
  reveal.title = "show the original";
  reveal.hidden = true;

  close.addEventListener("click", () => {
    popup.classList.remove("pg-open");
    original.hidden = true;
    close.hidden = true;
    reveal.hidden = false;
  });
  reveal.addEventListener("click", () => {
    popup.classList.add("pg-open");
    original.hidden = false;
    close.hidden = false;
    reveal.hidden = true;
  });

  popup.append(original, close, reveal);
  wrap.append(placeholder, popup);
  return wrap;
}

/** Badge for smokescreened exchanges; the surrogate text shows on demand. */
export function renderSmokescreenBadge(
  container: HTMLElement,
  surrogateFullText: string,
  persona: string,
): void {
  container.textContent = "";
  const badge = el("span", "pg-smokescreen-badge", `smokescreen: ${persona}`);
  const details = el("span", "pg-smokescreen-text", surrogateFullText);
  details.hidden = true;
  badge.title = "this exchange was reframed; click to view the surrogate";
  badge.addEventListener("click", () => {
    details.hidden = !details.hidden;
  });
  container.append(badge, details);
}
