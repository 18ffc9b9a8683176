import { GatewayClient } from "./api.js";
import { initApp } from "./app.js";

const GATEWAY_URL = "http://127.0.0.1:8787";

function boot(): void {
  initApp(document, new GatewayClient(GATEWAY_URL));
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", boot);
} else {
  boot();
}
