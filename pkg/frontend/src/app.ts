// Demo chat page wiring: the secure-and-send flow, manual selections,
// response overlay, smokescreen badge, and the file preview flow. The page
// talks only to the loopback gateway through GatewayClient; the session id
// is the only state kept, and only in memory.

import { GatewayClient, GatewayRequestError } from "./api.js";
import { dragSelectionRegion, renderFilePreview, renderRestoredDocument } from "./filePreview.js";
import { renderReplyOverlay, renderSecuredText, renderSmokescreenBadge } from "./overlay.js";
import { manualSpanFrom, textareaSelection } from "./selection.js";
import type { FileRedactResponse, ManualSpan } from "./types.js";

interface Elements {
  composer: HTMLFormElement;
  prompt: HTMLTextAreaElement;
  substitute: HTMLInputElement;
  substituteEnabled: HTMLInputElement;
  markManual: HTMLButtonElement;
  manualList: HTMLUListElement;
  securedPreview: HTMLElement;
  send: HTMLButtonElement;
  reply: HTMLElement;
  smokescreen: HTMLElement;
  status: HTMLElement;
  file: HTMLInputElement;
  filePreview: HTMLElement;
  addRegion: HTMLButtonElement;
  applyRegions: HTMLButtonElement;
  sendDoc: HTMLButtonElement;
  restoredDoc: HTMLElement;
}

function grab(root: Document): Elements {
  const byId = <T extends HTMLElement>(id: string): T => {
    const node = root.getElementById(id);
    if (!node) throw new Error(`demo page is missing #${id}`);
    return node as T;
  };
  return {
    composer: byId("composer"),
    prompt: byId("prompt"),
    substitute: byId("substitute"),
    substituteEnabled: byId("substitute-enabled"),
    markManual: byId("mark-manual"),
    manualList: byId("manual-list"),
    securedPreview: byId("secured-preview"),
    send: byId("send"),
    reply: byId("reply"),
    smokescreen: byId("smokescreen"),
    status: byId("status"),
    file: byId("file"),
    filePreview: byId("file-preview"),
    addRegion: byId("add-region"),
    applyRegions: byId("apply-regions"),
    sendDoc: byId("send-doc"),
    restoredDoc: byId("restored-doc"),
  };
}

export interface AppHandle {
  sessionId(): string | null;
  manualSpans(): ManualSpan[];
  fileState(): FileRedactResponse | null;
}

export function initApp(root: Document, client: GatewayClient): AppHandle {
  const ui = grab(root);
  let sessionId: string | null = null;
  let manualSpans: ManualSpan[] = [];
  let securedPrompt: string | null = null; // the prompt text that was secured
  let fileResponse: FileRedactResponse | null = null;
  let pendingRegions: ManualSpan[] = [];

  const status = (text: string) => {
    ui.status.textContent = text;
  };

  const fail = (err: unknown) => {
    if (err instanceof GatewayRequestError) {
      status(`gateway refused: ${err.code} - ${err.message}`);
    } else {
      status(`error: ${String(err)}`);
    }
  };

  const invalidatePreview = () => {
    securedPrompt = null;
    ui.send.disabled = true;
    ui.securedPreview.textContent = "";
  };

  // Prompt edits invalidate the secured preview; sending requires re-securing.
  ui.prompt.addEventListener("input", invalidatePreview);

  ui.markManual.addEventListener("click", () => {
    const range = textareaSelection(ui.prompt);
    if (!range) {
      status("select part of the prompt first");
      return;
    }
    const substitute = ui.substituteEnabled.checked ? ui.substitute.value : null;
    const span = manualSpanFrom(range, substitute);
    manualSpans.push(span);
    const item = root.createElement("li");
    const label =
      substitute === null ? "placeholder" : substitute === "" ? "delete" : `"${substitute}"`;
    item.textContent = `[${span.start}, ${span.end}) -> ${label}`;
    ui.manualList.appendChild(item);
    invalidatePreview();
    status("manual span added; secure again to preview");
  });

  // "Secure Personal Information": intercept submission, preview only.
  ui.composer.addEventListener("submit", (event) => {
    event.preventDefault();
    const prompt = ui.prompt.value;
    if (!prompt) {
      status("type a prompt first");
      return;
    }
    client
      .redact(prompt, manualSpans, sessionId)
      .then((redacted) => {
        sessionId = redacted.session_id;
        securedPrompt = prompt;
        renderSecuredText(ui.securedPreview, redacted.secured_text, redacted.replacements);
        ui.send.disabled = false;
        status(
          `secured: ${redacted.replacements.length} replacement(s); review, then send`,
        );
      })
      .catch(fail);
  });

  // Only on confirmation does anything go near the upstream.
  ui.send.addEventListener("click", () => {
    if (securedPrompt === null) return;
    ui.send.disabled = true;
    client
      .chat({
        prompt: securedPrompt,
        session_id: sessionId,
        manual_spans: manualSpans,
        smokescreen: "auto",
      })
      .then((response) => {
        sessionId = response.session_id;
        manualSpans = [];
        ui.manualList.textContent = "";
        renderReplyOverlay(ui.reply, response.reply.restored, response.reply.hits);
        if (response.surrogate) {
          renderSmokescreenBadge(
            ui.smokescreen,
            response.surrogate.full_text,
            response.surrogate.persona,
          );
        } else {
          ui.smokescreen.textContent = "";
        }
        status("reply received");
      })
      .catch(fail);
  });

  // File flow: preview masked regions, drag to add more, send, restore.
  const redactCurrentFile = (regions: ManualSpan[]) => {
    const file = ui.file.files?.[0];
    if (!file) {
      status("choose a file first");
      return;
    }
    client
      .redactFile(file, sessionId, regions)
      .then((response) => {
        sessionId = response.session_id;
        fileResponse = response;
        renderFilePreview(ui.filePreview, response);
        status(
          `file secured: ${response.spans.length} region(s); outbound ${response.outbound_filename}`,
        );
      })
      .catch(fail);
  };

  ui.file.addEventListener("change", () => {
    pendingRegions = [];
    redactCurrentFile([]);
  });

  ui.addRegion.addEventListener("click", () => {
    const selection = root.defaultView?.getSelection() ?? null;
    const region = dragSelectionRegion(ui.filePreview, selection);
    if (!region) {
      status("drag over the file preview first");
      return;
    }
    pendingRegions.push(region);
    status(`${pendingRegions.length} manual region(s) pending; apply to re-secure`);
  });

  ui.applyRegions.addEventListener("click", () => {
    redactCurrentFile(pendingRegions);
  });

  ui.sendDoc.addEventListener("click", () => {
    if (!fileResponse) {
      status("secure a file first");
      return;
    }
    client
      .chat({
        prompt: fileResponse.secured_text,
        session_id: sessionId,
        smokescreen: "off",
      })
      .then((response) => {
        sessionId = response.session_id;
        renderRestoredDocument(ui.restoredDoc, response.reply.restored);
        status("restored document ready");
      })
      .catch(fail);
  });

  return {
    sessionId: () => sessionId,
    manualSpans: () => [...manualSpans],
    fileState: () => fileResponse,
  };
}
