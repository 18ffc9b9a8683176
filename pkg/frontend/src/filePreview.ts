// File preview: extracted text with masked regions, drag-to-select for
// additional manual regions, and the restored document once a reply exists.

import { scalarToUtf16 } from "./offsets.js";
import { rangeToOffsets } from "./selection.js";
import type { FileRedactResponse, ManualSpan, SpanInfo } from "./types.js";

export interface FilePreviewState {
  response: FileRedactResponse;
  pendingRegions: ManualSpan[];
}

/** Render the extracted text with every redacted span masked. */
export function renderFilePreview(
  container: HTMLElement,
  response: FileRedactResponse,
): void {
  container.textContent = "";
  container.classList.add("pg-file-preview");
  const text = response.extracted_text;
  const ordered = [...response.spans].sort((a: SpanInfo, b: SpanInfo) => a.start - b.start);
  let cursor = 0;
  for (const span of ordered) {
    const start = scalarToUtf16(text, span.start);
    const end = scalarToUtf16(text, span.end);
    if (start > cursor) {
      container.appendChild(document.createTextNode(text.slice(cursor, start)));
    }
    const mask = document.createElement("mark");
    mask.className = "pg-mask";
    mask.textContent = text.slice(start, end);
    mask.title = `${span.category} (${span.source})`;
    container.appendChild(mask);
    cursor = end;
  }
  container.appendChild(document.createTextNode(text.slice(cursor)));
}

/**
 * Read the user's drag selection inside the preview as a manual region over
 * the extracted text, in scalar-value coordinates.
 */
export function dragSelectionRegion(
  container: HTMLElement,
  selection: Selection | null,
): ManualSpan | null {
  if (!selection || selection.rangeCount === 0) return null;
  const offsets = rangeToOffsets(container, selection.getRangeAt(0));
  if (!offsets) return null;
  return { start: offsets.start, end: offsets.end, substitute: null };
}

/** Render the fully restored document text after the model replied. */
export function renderRestoredDocument(container: HTMLElement, restored: string): void {
  container.textContent = restored;
  container.classList.add("pg-restored-doc");
}
