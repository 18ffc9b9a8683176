"use strict";
// Best-effort content script: attaches a "Secure Personal Information"
// control to any form carrying a textarea, and swaps the draft for the
// gateway's secured text before the page's own submit can run. Standalone
// by design (MV3 content scripts load without module support); the demo
// chat page in ../index.html remains the primary surface. Provider DOMs
// churn, so this stays generic instead of chasing specific chat UIs.
(() => {
    const GATEWAY = "http://127.0.0.1:8787";
    const BUTTON_CLASS = "privgate-secure-button";
    let sessionId = null; // in-memory only, never extension storage
    async function secure(area, note) {
        const draft = area.value;
        if (!draft)
            return;
        try {
            const response = await fetch(`${GATEWAY}/v1/redact`, {
                method: "POST",
                headers: { "Content-Type": "application/json" },
                body: JSON.stringify({ text: draft, session_id: sessionId }),
            });
            const body = (await response.json());
            if (!response.ok) {
                note.textContent = `privgate refused: ${body.message ?? response.status}`;
                return;
            }
            sessionId = body.session_id;
            area.value = body.secured_text;
            area.dispatchEvent(new Event("input", { bubbles: true }));
            note.textContent = `secured: ${body.replacements.length} replacement(s)`;
        }
        catch {
            note.textContent = "privgate gateway unreachable on 127.0.0.1:8787";
        }
    }
    function attach(form) {
        if (form.querySelector(`.${BUTTON_CLASS}`))
            return;
        const area = form.querySelector("textarea");
        if (!area)
            return;
        const button = document.createElement("button");
        button.type = "button";
        button.className = BUTTON_CLASS;
        button.textContent = "Secure Personal Information";
        const note = document.createElement("span");
        note.className = "privgate-note";
        note.style.marginLeft = "0.5em";
        button.addEventListener("click", () => {
            void secure(area, note);
        });
        area.insertAdjacentElement("afterend", button);
        button.insertAdjacentElement("afterend", note);
    }
    function scan() {
        document.querySelectorAll("form").forEach((form) => attach(form));
    }
    scan();
    new MutationObserver(scan).observe(document.documentElement, {
        childList: true,
        subtree: true,
    });
})();
