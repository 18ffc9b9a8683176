// Turning user selections into span ranges in gateway coordinates
// (Unicode scalar values). Two surfaces: the prompt textarea (UTF-16
// selectionStart/End) and rendered preview text (DOM Ranges across the
// container's text nodes).

import { utf16ToScalar } from "./offsets.js";
import type { ManualSpan } from "./types.js";

/** Scalar-value range for a textarea's current selection, or null if empty. */
export function textareaSelection(area: HTMLTextAreaElement): { start: number; end: number } | null {
  const { selectionStart, selectionEnd, value } = area;
  if (selectionStart === null || selectionEnd === null || selectionStart === selectionEnd) {
    return null;
  }
  return {
    start: utf16ToScalar(value, selectionStart),
    end: utf16ToScalar(value, selectionEnd),
  };
}

/**
 * Scalar-value range of a DOM Range relative to the concatenated text content
 * of `container`, or null when the range is collapsed or outside it.
 */
export function rangeToOffsets(
  container: HTMLElement,
  range: Range,
): { start: number; end: number } | null {
  if (range.collapsed) return null;
  const full = container.textContent ?? "";
  const start = pointToUtf16(container, range.startContainer, range.startOffset);
  const end = pointToUtf16(container, range.endContainer, range.endOffset);
  if (start === null || end === null || start === end) return null;
  const [lo, hi] = start <= end ? [start, end] : [end, start];
  return { start: utf16ToScalar(full, lo), end: utf16ToScalar(full, hi) };
}

function pointToUtf16(container: HTMLElement, node: Node, offset: number): number | null {
  // Element-anchored points resolve to the boundary before their child.
  let target: Node = node;
  let charOffset = offset;
  if (node.nodeType !== Node.TEXT_NODE) {
    const children = node.childNodes;
    if (offset < children.length) {
      const child = children[offset];
      if (child === undefined) return null;
      target = child;
      charOffset = 0;
    } else {
      // Past the last child: count everything inside node.
      target = node;
      charOffset = (node.textContent ?? "").length;
    }
  }

  let total = 0;
  let found = false;
  const walk = (current: Node): boolean => {
    if (current === target) {
      total += charOffset;
      found = true;
      return true;
    }
    if (current.nodeType === Node.TEXT_NODE) {
      total += (current.textContent ?? "").length;
      return false;
    }
    for (const child of Array.from(current.childNodes)) {
      if (walk(child)) return true;
    }
    return false;
  };
  walk(container);
  return found ? total : null;
}

/** Build a manual span payload from a selection plus an optional substitute. */
export function manualSpanFrom(
  range: { start: number; end: number },
  substitute: string | null,
): ManualSpan {
  return { start: range.start, end: range.end, substitute };
}
