// Boot: decide the API base, rebuild state from the URL hash, mount.
// The base is same-origin by default; override with ?api=http://host
// or a global set before this script loads.

import { ApiClient } from "./api.js";
import { App } from "./app.js";
import { parseHash, restore } from "./state.js";

declare global {
  interface Window {
    TABSYNTH_API?: string;
    app?: App;
  }
}

export async function boot(): Promise<App> {
  const query = new URLSearchParams(location.search);
  const base = query.get("api") ?? window.TABSYNTH_API ?? location.origin;
  const api = new ApiClient(base);
  const state = await restore(api, parseHash(location.hash));
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  const app = new App(root, api, state);
  window.app = app;
  app.render();
  // resume polling if we restored mid-job
  if (app.state.trainJob && ["queued", "running"].includes(app.state.trainJob.state)) {
    app.pollTraining();
  }
  if (app.state.synthJob && ["queued", "running"].includes(app.state.synthJob.state)) {
    app.pollSynthesis();
  }
  return app;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
