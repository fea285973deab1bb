/** Browser entry point: mounts the app against the same-origin service. */
import { ApiClient } from "./api";
import { mountApp } from "./app";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app container");
}
const api = new ApiClient("");
mountApp(root, api);

api
  .health()
  .then((health) => {
    const missing = Object.entries(health.models)
      .filter(([, loaded]) => !loaded)
      .map(([name]) => name);
    const status = document.getElementById("status");
    if (status && missing.length > 0) {
      status.textContent = `service is up but not fully loaded (missing: ${missing.join(", ")})`;
    }
  })
  .catch(() => {
    const status = document.getElementById("status");
    if (status) {
      status.textContent = "service unreachable; start it and reload";
    }
  });
