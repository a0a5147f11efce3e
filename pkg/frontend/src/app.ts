// Single-page wizard over the synthesizer service. Rendering is plain
// DOM templating: each state change redraws the active step. All
// wizard data lives in WizardState and comes from server echoes; the
// URL hash carries the ids so a hard refresh rebuilds the same view.

import { ApiClient, ApiError, JobDoc } from "./api.js";
import { ecdfSvg, frequencyBarsSvg, lossCurvesSvg } from "./charts.js";
import {
  STEPS,
  Step,
  WizardState,
  canEnter,
  emptyState,
  goTo,
  overridesFromRows,
  schemaEditable,
  stateToHash,
  withDataset,
  withError,
  withReport,
  withReportRequest,
  withSchemaEcho,
  withSynthesis,
  withSynthTick,
  withTraining,
  withTrainTick,
} from "./state.js";

const STEP_TITLES: Record<Step, string> = {
  upload: "1. Upload data",
  schema: "2. Review schema",
  "train-config": "3. Configure training",
  progress: "4. Training progress",
  synthesize: "5. Synthesize",
  report: "6. Report",
};

const KINDS = ["continuous", "categorical", "mixed"];

// Metric values are rendered verbatim from the report document; the
// UI never reformats or recomputes them.
export function metricText(v: unknown): string {
  if (v === null || v === undefined) return "n/a";
  return String(v);
}

function el(html: string): HTMLElement {
  const tpl = document.createElement("template");
  tpl.innerHTML = html.trim();
  return tpl.content.firstElementChild as HTMLElement;
}

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export class App {
  state: WizardState;
  api: ApiClient;
  root: HTMLElement;
  pollHandle: ReturnType<typeof setTimeout> | null = null;
  pollIntervalMs: number;

  constructor(root: HTMLElement, api: ApiClient, state?: WizardState, pollIntervalMs = 1000) {
    this.root = root;
    this.api = api;
    this.state = state ?? emptyState();
    this.pollIntervalMs = pollIntervalMs;
  }

  set(next: WizardState): void {
    this.state = next;
    if (typeof history !== "undefined" && history.replaceState) {
      history.replaceState(null, "", stateToHash(next));
    }
    this.render();
  }

  fail(err: unknown): void {
    const msg = err instanceof Error ? err.message : String(err);
    this.set(withError(this.state, msg));
  }

  // -- actions --------------------------------------------------------------

  async upload(file: Blob, name: string): Promise<void> {
    try {
      const res = await this.api.uploadDataset(file, name);
      this.set(withDataset(this.state, res.id, res.schema));
    } catch (err) {
      this.fail(err);
    }
  }

  async applySchema(): Promise<void> {
    const s = this.state;
    if (!s.datasetId) return;
    try {
      const doc = overridesFromRows(s.rows, s.targetColumn, s.params.problem);
      const res = await this.api.putSchema(s.datasetId, doc);
      this.set(withSchemaEcho(s, res.schema));
    } catch (err) {
      this.fail(err);
    }
  }

  async startTraining(): Promise<void> {
    const s = this.state;
    if (!s.datasetId) return;
    try {
      const res = await this.api.trainModel({
        dataset_id: s.datasetId,
        epochs: s.params.epochs,
        batch_size: s.params.batchSize,
        seed: s.params.seed,
        classifier: s.params.classifier,
        info_loss: s.params.infoLoss,
        vgm: s.params.vgm,
        problem: s.params.problem,
      });
      this.set(withTraining(s, res.model_id, res.job_id));
      this.pollTraining();
    } catch (err) {
      this.fail(err);
    }
  }

  pollTraining(): void {
    const jobId = this.state.trainJobId;
    if (!jobId) return;
    const tick = async () => {
      try {
        const job = await this.api.getJob(jobId);
        this.set(withTrainTick(this.state, job));
        if (job.state === "queued" || job.state === "running") {
          this.pollHandle = setTimeout(tick, this.pollIntervalMs);
        }
      } catch (err) {
        this.fail(err);
      }
    };
    tick();
  }

  async startSynthesis(): Promise<void> {
    const s = this.state;
    if (!s.modelId) return;
    try {
      const res = await this.api.synthesize(s.modelId, s.synthesisRows);
      this.set(withSynthesis(this.state, res.synthetic_id, res.job_id));
      this.pollSynthesis();
    } catch (err) {
      this.fail(err);
    }
  }

  pollSynthesis(): void {
    const jobId = this.state.synthJobId;
    if (!jobId) return;
    const tick = async () => {
      try {
        const job = await this.api.getJob(jobId);
        this.set(withSynthTick(this.state, job));
        if (job.state === "queued" || job.state === "running") {
          this.pollHandle = setTimeout(tick, this.pollIntervalMs);
        }
      } catch (err) {
        this.fail(err);
      }
    };
    tick();
  }

  async openReport(): Promise<void> {
    const s = this.state;
    if (!s.modelId || !s.syntheticId) return;
    try {
      const res = await this.api.requestReport(s.modelId, s.syntheticId);
      this.set(withReportRequest(this.state, res.report_id, res.job_id));
      const job = await this.api.waitForJob(res.job_id, undefined, this.pollIntervalMs);
      if (job.state === "failed") {
        this.fail(new ApiError(500, job.error ?? "report job failed"));
        return;
      }
      const report = await this.api.getReport(res.report_id);
      this.set(withReport(this.state, report));
    } catch (err) {
      this.fail(err);
    }
  }

  // -- rendering ------------------------------------------------------------

  render(): void {
    this.root.innerHTML = "";
    this.root.appendChild(this.renderNav());
    if (this.state.error) {
      this.root.appendChild(
        el(`<div class="error" role="alert">${esc(this.state.error)}</div>`),
      );
    }
    const step = this.state.step;
    const renderers: Record<Step, () => HTMLElement> = {
      upload: () => this.renderUpload(),
      schema: () => this.renderSchema(),
      "train-config": () => this.renderTrainConfig(),
      progress: () => this.renderProgress(),
      synthesize: () => this.renderSynthesize(),
      report: () => this.renderReport(),
    };
    this.root.appendChild(renderers[step]());
  }

  renderNav(): HTMLElement {
    const nav = el(`<nav class="steps"></nav>`);
    for (const step of STEPS) {
      const b = el(
        `<button class="step${step === this.state.step ? " active" : ""}" data-step="${step}">${STEP_TITLES[step]}</button>`,
      ) as HTMLButtonElement;
      b.disabled = !canEnter(this.state, step);
      b.addEventListener("click", () => this.set(goTo(this.state, step)));
      nav.appendChild(b);
    }
    return nav;
  }

  renderUpload(): HTMLElement {
    const panel = el(`<section class="panel upload">
      <h2>Upload a CSV dataset</h2>
      <p>The first row must be a header; column types are detected on upload and reviewed next.</p>
      <input type="file" id="file-input" accept=".csv,text/csv">
      <button id="upload-btn">Upload</button>
    </section>`);
    const input = panel.querySelector("#file-input") as HTMLInputElement;
    (panel.querySelector("#upload-btn") as HTMLButtonElement).addEventListener(
      "click",
      () => {
        const f = input.files?.[0];
        if (f) this.upload(f, f.name);
        else this.fail(new Error("choose a CSV file first"));
      },
    );
    return panel;
  }

  renderSchema(): HTMLElement {
    const s = this.state;
    const editable = schemaEditable(s);
    const panel = el(`<section class="panel schema">
      <h2>Detected columns</h2>
      ${editable ? "" : `<p class="frozen">Schema is frozen: training has started.</p>`}
      <table class="schema-table"><thead><tr>
        <th>column</th><th>detected</th><th>kind</th><th>special values</th>
        <th>log</th><th>include</th><th>target</th>
      </tr></thead><tbody></tbody></table>
      <div class="row">
        <button id="apply-schema" ${editable ? "" : "disabled"}>Apply overrides</button>
        <button id="to-train">Continue to training</button>
      </div>
    </section>`);
    const tbody = panel.querySelector("tbody")!;
    for (const row of s.rows) {
      const tr = el(`<tr data-column="${esc(row.name)}">
        <td class="name">${esc(row.name)}${row.include ? "" : ` <span class="badge excluded">excluded</span>`}</td>
        <td class="detected">${esc(row.detectedKind)}</td>
        <td><select class="kind" ${editable ? "" : "disabled"}>${KINDS.map(
          (k) => `<option value="${k}"${k === row.chosenKind ? " selected" : ""}>${k}</option>`,
        ).join("")}</select></td>
        <td><input class="cat-values" type="text" value="${esc(row.categoricalValues.join(","))}"
             ${editable && row.chosenKind === "mixed" ? "" : "disabled"} placeholder="e.g. 0"></td>
        <td><input class="log" type="checkbox" ${row.logTransform ? "checked" : ""}
             ${editable && row.chosenKind !== "categorical" ? "" : "disabled"}></td>
        <td><input class="include" type="checkbox" ${row.include ? "checked" : ""} ${editable ? "" : "disabled"}></td>
        <td><input class="target" type="radio" name="target"
             ${s.targetColumn === row.name ? "checked" : ""} ${editable ? "" : "disabled"}></td>
      </tr>`);
      const name = row.name;
      (tr.querySelector(".kind") as HTMLSelectElement).addEventListener("change", (e) => {
        const v = (e.target as HTMLSelectElement).value;
        this.editRow(name, (r) => ({ ...r, chosenKind: v }));
      });
      (tr.querySelector(".cat-values") as HTMLInputElement).addEventListener("change", (e) => {
        const raw = (e.target as HTMLInputElement).value;
        const values = raw
          .split(",")
          .map((t) => t.trim())
          .filter((t) => t.length > 0)
          .map(Number)
          .filter((x) => !Number.isNaN(x));
        this.editRow(name, (r) => ({ ...r, categoricalValues: values }));
      });
      (tr.querySelector(".log") as HTMLInputElement).addEventListener("change", (e) => {
        const on = (e.target as HTMLInputElement).checked;
        this.editRow(name, (r) => ({ ...r, logTransform: on }));
      });
      (tr.querySelector(".include") as HTMLInputElement).addEventListener("change", (e) => {
        const on = (e.target as HTMLInputElement).checked;
        this.editRow(name, (r) => ({ ...r, include: on }));
      });
      (tr.querySelector(".target") as HTMLInputElement).addEventListener("change", () => {
        this.set({ ...this.state, targetColumn: name });
      });
      tbody.appendChild(tr);
    }
    (panel.querySelector("#apply-schema") as HTMLButtonElement).addEventListener(
      "click",
      () => this.applySchema(),
    );
    (panel.querySelector("#to-train") as HTMLButtonElement).addEventListener("click", () =>
      this.set(goTo(this.state, "train-config")),
    );
    return panel;
  }

  editRow(name: string, fn: (r: any) => any): void {
    const rows = this.state.rows.map((r) => (r.name === name ? fn(r) : r));
    this.set({ ...this.state, rows });
  }

  renderTrainConfig(): HTMLElement {
    const p = this.state.params;
    const panel = el(`<section class="panel train-config">
      <h2>Training configuration</h2>
      <label>Problem type
        <select id="problem">
          ${["binary", "multiclass", "none"]
            .map((v) => `<option value="${v}"${v === p.problem ? " selected" : ""}>${v}</option>`)
            .join("")}
        </select>
      </label>
      <label>Epochs <input id="epochs" type="number" min="1" value="${p.epochs}"></label>
      <label>Batch size <input id="batch" type="number" min="1" value="${p.batchSize}"></label>
      <label>Seed <input id="seed" type="number" value="${p.seed}"></label>
      <fieldset><legend>Loss terms</legend>
        <label><input id="classifier" type="checkbox" ${p.classifier ? "checked" : ""}> classifier</label>
        <label><input id="info" type="checkbox" ${p.infoLoss ? "checked" : ""}> information</label>
        <label><input id="vgm" type="checkbox" ${p.vgm ? "checked" : ""}> mode-specific encoding</label>
      </fieldset>
      <button id="start-train">Train model</button>
    </section>`);
    const bind = (id: string, fn: (v: string, checked: boolean) => void) => {
      const node = panel.querySelector("#" + id) as HTMLInputElement;
      node.addEventListener("change", () => fn(node.value, node.checked));
    };
    bind("problem", (v) => this.setParams({ problem: v }));
    bind("epochs", (v) => this.setParams({ epochs: parseInt(v, 10) || 1 }));
    bind("batch", (v) => this.setParams({ batchSize: parseInt(v, 10) || 1 }));
    bind("seed", (v) => this.setParams({ seed: parseInt(v, 10) || 0 }));
    bind("classifier", (_v, c) => this.setParams({ classifier: c }));
    bind("info", (_v, c) => this.setParams({ infoLoss: c }));
    bind("vgm", (_v, c) => this.setParams({ vgm: c }));
    (panel.querySelector("#start-train") as HTMLButtonElement).addEventListener(
      "click",
      () => this.startTraining(),
    );
    return panel;
  }

  setParams(patch: Partial<WizardState["params"]>): void {
    this.state = { ...this.state, params: { ...this.state.params, ...patch } };
  }

  renderProgress(): HTMLElement {
    const job = this.state.trainJob;
    const prog = job?.progress;
    const epoch = prog?.epoch ?? 0;
    const total = prog?.total_epochs ?? this.state.params.epochs;
    const pct = total > 0 ? Math.floor((100 * epoch) / total) : 0;
    const stateName = job?.state ?? "queued";
    const panel = el(`<section class="panel progress">
      <h2>Training ${esc(this.state.modelId ?? "")}</h2>
      <div class="job-state state-${stateName}">${stateName}</div>
      <div class="bar"><div class="fill" style="width:${pct}%"></div></div>
      <div class="epochs">epoch ${epoch}/${total}</div>
      ${job?.state === "failed" ? `<div class="error">${esc(job.error ?? "training failed")}</div>` : ""}
      <div class="curves">${prog?.history ? lossCurvesSvg(prog.history) : ""}</div>
      <button id="to-synth" ${job?.state === "done" ? "" : "disabled"}>Proceed to data synthesizer</button>
    </section>`);
    (panel.querySelector("#to-synth") as HTMLButtonElement).addEventListener("click", () =>
      this.set(goTo(this.state, "synthesize")),
    );
    return panel;
  }

  renderSynthesize(): HTMLElement {
    const s = this.state;
    const job = s.synthJob;
    const done = job?.state === "done";
    const panel = el(`<section class="panel synthesize">
      <h2>Synthesize rows</h2>
      <label>Rows <input id="rows" type="number" min="1" value="${s.synthesisRows}"></label>
      <button id="run-synth">Generate</button>
      ${job ? `<div class="job-state state-${job.state}">${job.state}</div>` : ""}
      ${job?.state === "failed" ? `<div class="error">${esc(job.error ?? "synthesis failed")}</div>` : ""}
      ${
        done && s.syntheticId
          ? `<a id="download" href="${this.api.syntheticCsvUrl(s.syntheticId)}" download="synthetic.csv">Download CSV</a>
             <button id="open-report">Open evaluation report</button>`
          : ""
      }
    </section>`);
    const rows = panel.querySelector("#rows") as HTMLInputElement;
    rows.addEventListener("change", () => {
      this.state = { ...this.state, synthesisRows: parseInt(rows.value, 10) || 1 };
    });
    (panel.querySelector("#run-synth") as HTMLButtonElement).addEventListener("click", () =>
      this.startSynthesis(),
    );
    const rep = panel.querySelector("#open-report");
    if (rep) rep.addEventListener("click", () => this.openReport());
    return panel;
  }

  renderReport(): HTMLElement {
    const report = this.state.report;
    if (!report) {
      return el(`<section class="panel report empty">
        <h2>Report</h2><p>No report yet. Synthesize data, then open the evaluation report.</p>
      </section>`);
    }
    const sim = report.similarity;
    const priv = report.privacy;
    const util = report.utility;
    const panel = el(`<section class="panel report">
      <h2>Evaluation report</h2>
      <h3>Similarity</h3>
      <table class="metrics" id="similarity-summary"><tbody>
        <tr><td>average JSD (categorical)</td><td class="metric" data-metric="avg_jsd">${metricText(sim.avg_jsd)}</td></tr>
        <tr><td>average scaled WD (continuous)</td><td class="metric" data-metric="avg_wasserstein_scaled">${metricText(sim.avg_wasserstein_scaled)}</td></tr>
        <tr><td>association difference</td><td class="metric" data-metric="diff_corr">${metricText(sim.diff_corr)}</td></tr>
      </tbody></table>
      <div id="columns"></div>
      <h3>Privacy</h3>
      <table class="metrics" id="privacy-table"><thead>
        <tr><th></th><th>synthetic vs real</th><th>within real</th><th>within synthetic</th></tr>
      </thead><tbody>
        <tr><td>DCR (5th pct)</td>
          <td class="metric" data-metric="dcr.real_synthetic">${metricText(priv.dcr.real_synthetic)}</td>
          <td class="metric" data-metric="dcr.within_real">${metricText(priv.dcr.within_real)}</td>
          <td class="metric" data-metric="dcr.within_synthetic">${metricText(priv.dcr.within_synthetic)}</td></tr>
        <tr><td>NNDR (5th pct)</td>
          <td class="metric" data-metric="nndr.real_synthetic">${metricText(priv.nndr.real_synthetic)}</td>
          <td class="metric" data-metric="nndr.within_real">${metricText(priv.nndr.within_real)}</td>
          <td class="metric" data-metric="nndr.within_synthetic">${metricText(priv.nndr.within_synthetic)}</td></tr>
      </tbody></table>
      <h3>ML utility</h3>
      <div id="utility"></div>
      ${
        (sim.warnings ?? []).length
          ? `<div class="warnings">${(sim.warnings as string[]).map((w) => `<div>${esc(w)}</div>`).join("")}</div>`
          : ""
      }
    </section>`);

    const colBox = panel.querySelector("#columns")!;
    for (const [name, entry] of Object.entries<any>(sim.columns)) {
      const card = el(`<div class="column-card" data-column="${esc(name)}">
        <h4>${esc(name)} <span class="kind">${esc(entry.kind)}</span></h4>
        <div class="col-metrics"></div><div class="chart-box"></div>
      </div>`);
      const metrics = card.querySelector(".col-metrics")!;
      if (entry.kind === "categorical") {
        metrics.appendChild(
          el(`<div>JSD <span class="metric" data-metric="jsd">${metricText(entry.jsd)}</span></div>`),
        );
        card.querySelector(".chart-box")!.innerHTML = frequencyBarsSvg(entry.frequencies);
      } else {
        metrics.appendChild(
          el(`<div>WD <span class="metric" data-metric="wasserstein">${metricText(entry.wasserstein)}</span>
              scaled <span class="metric" data-metric="wasserstein_scaled">${metricText(entry.wasserstein_scaled)}</span></div>`),
        );
        card.querySelector(".chart-box")!.innerHTML = ecdfSvg(
          entry.ecdf.real,
          entry.ecdf.synthetic,
        );
      }
      colBox.appendChild(card);
    }

    const utilBox = panel.querySelector("#utility")!;
    if (!util) {
      utilBox.appendChild(el(`<p class="empty">No target configured; utility was not evaluated.</p>`));
    } else {
      const table = el(`<table class="metrics" id="utility-table"><thead>
        <tr><th>model</th><th>metric</th><th>real</th><th>synthetic</th><th>difference</th></tr>
      </thead><tbody></tbody></table>`);
      const tbody = table.querySelector("tbody")!;
      for (const [model, entry] of Object.entries<any>(util.models)) {
        if (entry.real?.error || entry.synthetic?.error) {
          tbody.appendChild(
            el(`<tr data-model="${esc(model)}"><td>${esc(model)}</td>
                <td colspan="4" class="error">${esc(entry.real?.error ?? entry.synthetic?.error)}</td></tr>`),
          );
          continue;
        }
        for (const metric of ["accuracy", "f1_macro", "auc"]) {
          tbody.appendChild(
            el(`<tr data-model="${esc(model)}" data-metric-row="${metric}">
              <td>${esc(model)}</td><td>${metric}</td>
              <td class="metric" data-metric="real.${metric}">${metricText(entry.real[metric])}</td>
              <td class="metric" data-metric="synthetic.${metric}">${metricText(entry.synthetic[metric])}</td>
              <td class="metric" data-metric="difference.${metric}">${metricText(entry.difference?.[metric])}</td>
            </tr>`),
          );
        }
      }
      utilBox.appendChild(table);
    }
    return panel;
  }
}
