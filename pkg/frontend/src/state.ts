// Wizard state machine. The walk is linear:
//   upload -> schema -> train-config -> progress -> synthesize -> report
// and every field that matters is an id plus the server's last echo of
// the document behind it, so a hard refresh can rebuild the view from
// the ids alone. Nothing here computes metrics; it only carries them.

import { ApiClient, JobDoc, SchemaDoc } from "./api.js";

export const STEPS = [
  "upload",
  "schema",
  "train-config",
  "progress",
  "synthesize",
  "report",
] as const;

export type Step = (typeof STEPS)[number];

export interface SchemaRow {
  name: string;
  detectedKind: string;
  chosenKind: string;
  include: boolean;
  categoricalValues: number[];
  logTransform: boolean;
}

export interface TrainParams {
  epochs: number;
  batchSize: number;
  seed: number;
  problem: string; // "binary" | "multiclass" | "none"
  classifier: boolean;
  infoLoss: boolean;
  vgm: boolean;
}

export interface WizardState {
  step: Step;
  datasetId: string | null;
  schema: SchemaDoc | null; // server-confirmed, authoritative
  rows: SchemaRow[]; // editable view over schema
  targetColumn: string | null;
  params: TrainParams;
  modelId: string | null;
  trainJobId: string | null;
  trainJob: JobDoc | null;
  trainingStarted: boolean; // once true, schema edits are refused
  syntheticId: string | null;
  synthJobId: string | null;
  synthJob: JobDoc | null;
  synthesisRows: number;
  reportId: string | null;
  reportJobId: string | null;
  report: any | null;
  error: string | null;
}

export function emptyState(): WizardState {
  return {
    step: "upload",
    datasetId: null,
    schema: null,
    rows: [],
    targetColumn: null,
    params: {
      epochs: 150,
      batchSize: 500,
      seed: 0,
      problem: "multiclass",
      classifier: true,
      infoLoss: true,
      vgm: true,
    },
    modelId: null,
    trainJobId: null,
    trainJob: null,
    trainingStarted: false,
    syntheticId: null,
    synthJobId: null,
    synthJob: null,
    synthesisRows: 1000,
    reportId: null,
    reportJobId: null,
    report: null,
    error: null,
  };
}

export function stepIndex(step: Step): number {
  return STEPS.indexOf(step);
}

// A step is reachable when everything it shows already exists. Going
// backwards is always allowed; the wizard never invents forward state.
export function canEnter(state: WizardState, step: Step): boolean {
  switch (step) {
    case "upload":
      return true;
    case "schema":
      return state.datasetId !== null;
    case "train-config":
      return state.datasetId !== null;
    case "progress":
      return state.trainJobId !== null;
    case "synthesize":
      return state.trainJob?.state === "done";
    case "report":
      return state.syntheticId !== null;
  }
}

export function goTo(state: WizardState, step: Step): WizardState {
  if (!canEnter(state, step)) return state;
  return { ...state, step, error: null };
}

function rowsFromSchema(schema: SchemaDoc, detected?: Map<string, string>): SchemaRow[] {
  return schema.columns.map((c) => ({
    name: c.name,
    detectedKind: detected?.get(c.name) ?? c.kind,
    chosenKind: c.kind,
    include: c.include,
    categoricalValues: c.categorical_values ?? [],
    logTransform: c.log_transform ?? false,
  }));
}

export function withDataset(
  state: WizardState,
  datasetId: string,
  schema: SchemaDoc,
): WizardState {
  return {
    ...emptyState(),
    step: "schema",
    datasetId,
    schema,
    rows: rowsFromSchema(schema),
    targetColumn: schema.target?.column ?? null,
    params: state.params,
  };
}

// Server echo after PUT /schema: the echoed document replaces the rows
// wholesale, but the originally detected kinds stay for the badges.
export function withSchemaEcho(state: WizardState, schema: SchemaDoc): WizardState {
  if (state.trainingStarted) {
    return { ...state, error: "schema is frozen once training has started" };
  }
  const detected = new Map(state.rows.map((r) => [r.name, r.detectedKind]));
  return {
    ...state,
    schema,
    rows: rowsFromSchema(schema, detected),
    targetColumn: schema.target?.column ?? null,
    error: null,
  };
}

export function schemaEditable(state: WizardState): boolean {
  return !state.trainingStarted;
}

export function withTraining(
  state: WizardState,
  modelId: string,
  jobId: string,
): WizardState {
  return {
    ...state,
    step: "progress",
    modelId,
    trainJobId: jobId,
    trainJob: null,
    trainingStarted: true,
    error: null,
  };
}

export function withTrainTick(state: WizardState, job: JobDoc): WizardState {
  return { ...state, trainJob: job };
}

export function withSynthesis(
  state: WizardState,
  syntheticId: string,
  jobId: string,
): WizardState {
  return { ...state, syntheticId, synthJobId: jobId, synthJob: null, error: null };
}

export function withSynthTick(state: WizardState, job: JobDoc): WizardState {
  return { ...state, synthJob: job };
}

export function withReportRequest(
  state: WizardState,
  reportId: string,
  jobId: string,
): WizardState {
  return { ...state, reportId, reportJobId: jobId, report: null, error: null };
}

export function withReport(state: WizardState, report: any): WizardState {
  return { ...state, step: "report", report, error: null };
}

export function withError(state: WizardState, message: string): WizardState {
  return { ...state, error: message };
}

// ---------------------------------------------------------------------------
// URL round trip: #step=schema&dataset=abc&model=def&...

export function stateToHash(state: WizardState): string {
  const p = new URLSearchParams();
  p.set("step", state.step);
  if (state.datasetId) p.set("dataset", state.datasetId);
  if (state.modelId) p.set("model", state.modelId);
  if (state.trainJobId) p.set("trainJob", state.trainJobId);
  if (state.syntheticId) p.set("synthetic", state.syntheticId);
  if (state.synthJobId) p.set("synthJob", state.synthJobId);
  if (state.reportId) p.set("report", state.reportId);
  return "#" + p.toString();
}

export interface HashIds {
  step: Step | null;
  dataset: string | null;
  model: string | null;
  trainJob: string | null;
  synthetic: string | null;
  synthJob: string | null;
  report: string | null;
}

export function parseHash(hash: string): HashIds {
  const p = new URLSearchParams(hash.replace(/^#/, ""));
  const step = p.get("step");
  return {
    step: STEPS.includes(step as Step) ? (step as Step) : null,
    dataset: p.get("dataset"),
    model: p.get("model"),
    trainJob: p.get("trainJob"),
    synthetic: p.get("synthetic"),
    synthJob: p.get("synthJob"),
    report: p.get("report"),
  };
}

// Rebuild the whole wizard from ids, trusting only what the server
// confirms. Anything it no longer knows about is dropped along with
// the steps that depended on it.
export async function restore(api: ApiClient, ids: HashIds): Promise<WizardState> {
  let state = emptyState();
  if (!ids.dataset) return state;
  try {
    const ds = await api.getDataset(ids.dataset);
    state = withDataset(state, ds.id, ds.schema);
  } catch {
    return state;
  }
  if (ids.model && ids.trainJob) {
    try {
      const job = await api.getJob(ids.trainJob);
      state = withTraining(state, ids.model, ids.trainJob);
      state = withTrainTick(state, job);
    } catch {
      state.step = "schema";
      return state;
    }
  }
  if (ids.synthetic && ids.synthJob) {
    try {
      const job = await api.getJob(ids.synthJob);
      state = withSynthesis(state, ids.synthetic, ids.synthJob);
      state = withSynthTick(state, job);
    } catch {
      // synthetic evaporated; the trained model is still usable
    }
  }
  if (ids.report) {
    try {
      const report = await api.getReport(ids.report);
      state = { ...state, reportId: ids.report };
      state = withReport(state, report);
    } catch {
      // report still building or gone; stay on the earlier step
    }
  }
  if (ids.step && canEnter(state, ids.step)) {
    state = { ...state, step: ids.step };
  }
  return state;
}

// Overrides document for PUT /schema, built from the edited rows plus
// the chosen target. The server re-derives the effective schema; its
// echo then replaces our rows.
export function overridesFromRows(
  rows: SchemaRow[],
  targetColumn: string | null,
  problem: string,
): any {
  const columns: Record<string, any> = {};
  for (const r of rows) {
    const od: Record<string, any> = {};
    if (r.chosenKind !== r.detectedKind) od.kind = r.chosenKind;
    if (r.chosenKind === "mixed") {
      od.kind = r.chosenKind;
      od.categorical_values = r.categoricalValues;
    }
    if (r.logTransform) od.log_transform = true;
    if (!r.include) od.include = false;
    if (Object.keys(od).length > 0) columns[r.name] = od;
  }
  const doc: any = { columns };
  if (targetColumn) doc.target = { column: targetColumn, problem };
  return doc;
}
