/**
 * Page wiring. Everything interesting lives in api.ts (wire types),
 * explorer.ts (debounce and script state), and render.ts (control
 * derivation); this file only moves values between the DOM and those
 * modules.
 */

import {
  DesignServiceClient,
  ServiceError,
  type ColumnInfo,
  type PreviewBody,
  type SplitBody,
} from "./api.js";
import { ExplorerSession, PreviewScheduler } from "./explorer.js";
import {
  ALL_ONE_STRATUM,
  designTableHtml,
  errorTarget,
  initialEditState,
  renderControls,
  type Control,
  type EditState,
  type SplitKind,
} from "./render.js";

const client = new DesignServiceClient(
  (document.querySelector("meta[name=service-url]") as HTMLMetaElement | null)
    ?.content ?? "",
);

const el = (id: string) => document.getElementById(id) as HTMLElement;

let session: ExplorerSession | null = null;
let columns: ColumnInfo[] = [];
let rowCount = 0;
let state: EditState | null = null;
let strataLevels: string[] = [];
let splitVarLevels: string[] = [];
let selectedTargets: string[] = [];
let selectedCategories: string[] = [];

const scheduler = new PreviewScheduler(
  (body, signal) => client.preview(session!.sessionId, body, signal),
  (response) => {
    clearErrors();
    el("design").innerHTML = designTableHtml(response.design);
    el("counts").textContent = Object.entries(response.strata_counts)
      .map(([label, n]) => `${label}: ${n}`)
      .join("   ");
  },
  (error) => showError(error),
);

function clearErrors(): void {
  for (const id of ["split-error", "allocation-error", "session-error"]) {
    el(id).textContent = "";
  }
}

function showError(error: unknown): void {
  clearErrors();
  if (error instanceof ServiceError) {
    el(`${errorTarget(error.kind)}-error`).textContent =
      `${error.kind}: ${error.message}`;
  } else {
    el("session-error").textContent = String(error);
  }
}

function currentSplit(): SplitBody | null {
  if (state === null || state.strata === ALL_ONE_STRATUM) return null;
  if (state.splitVar === null) return null;
  const isText = columns.some(
    (c) => c.name === state!.splitVar && c.type === "text",
  );
  let splitAt: SplitBody["split_at"];
  if (isText) {
    if (selectedCategories.length === 0) return null;
    const rest = splitVarLevels.filter((l) => !selectedCategories.includes(l));
    if (rest.length === 0) return null;
    splitAt = [selectedCategories, rest];
  } else if (state.splitKind === "value") {
    if (state.valueCut === null) return null;
    splitAt = [state.valueCut];
  } else {
    splitAt = [state.quantile];
  }
  const split: SplitBody = {
    strata: state.strata!,
    split_var: state.splitVar,
    type: isText ? "categorical" : state.splitKind,
    split_at: splitAt,
  };
  if (selectedTargets.length > 0) split.targets = selectedTargets;
  return split;
}

function currentBody(): PreviewBody | null {
  if (state === null || session === null) return null;
  if (state.y === null) return null;
  const split = currentSplit();
  if (state.strata === ALL_ONE_STRATUM) return null;
  const body: PreviewBody = {
    allocation: { y: state.y, nsample: state.nsample, method: state.method },
  };
  if (split !== null) {
    body.split = split;
  } else {
    body.allocation.strata = state.strata ?? undefined;
  }
  return body;
}

function requestPreview(): void {
  const body = currentBody();
  if (body === null) {
    scheduler.cancel();
    el("design").innerHTML =
      "<p class=hint>Pick a strata column, design variable and split to preview a design.</p>";
    return;
  }
  scheduler.edit(body);
}

function materialize(control: Control): HTMLElement {
  const wrap = document.createElement("label");
  wrap.className = "control";
  wrap.append(control.label);
  if (control.kind === "select") {
    const select = document.createElement("select");
    select.id = control.id;
    for (const option of control.options) {
      const node = document.createElement("option");
      node.value = option.value;
      node.textContent = option.label;
      select.append(node);
    }
    if (control.value !== null) select.value = control.value;
    select.disabled = control.disabled;
    select.addEventListener("change", () => onSelect(control.id, select.value));
    wrap.append(select);
  } else if (control.kind === "slider") {
    const slider = document.createElement("input");
    slider.type = "range";
    slider.id = control.id;
    slider.min = String(control.min);
    slider.max = String(control.max);
    slider.step = String(control.step);
    slider.value = String(control.value);
    slider.disabled = control.disabled;
    const readout = document.createElement("span");
    readout.textContent = String(control.value);
    slider.addEventListener("input", () => {
      readout.textContent = slider.value;
      onNumber(control.id, Number(slider.value));
    });
    wrap.append(slider, readout);
  } else if (control.kind === "number") {
    const input = document.createElement("input");
    input.type = "number";
    input.id = control.id;
    input.step = "any";
    if (control.value !== null) input.value = String(control.value);
    input.disabled = control.disabled;
    input.addEventListener("input", () => {
      onNumber(control.id, input.value === "" ? null : Number(input.value));
    });
    wrap.append(input);
  } else {
    const select = document.createElement("select");
    select.id = control.id;
    select.multiple = true;
    select.size = 4;
    const levels =
      control.optionsFrom === "strata-levels" ? strataLevels : splitVarLevels;
    for (const level of levels) {
      const node = document.createElement("option");
      node.value = level;
      node.textContent = level;
      select.append(node);
    }
    select.disabled = control.disabled;
    select.addEventListener("change", () => {
      const chosen = Array.from(select.selectedOptions).map((o) => o.value);
      if (control.id === "targets") selectedTargets = chosen;
      else selectedCategories = chosen;
      requestPreview();
    });
    wrap.append(select);
  }
  return wrap;
}

function rebuildControls(): void {
  if (state === null) return;
  const host = el("controls");
  host.textContent = "";
  for (const control of renderControls(columns, rowCount, state)) {
    host.append(materialize(control));
  }
  (el("confirm") as HTMLButtonElement).disabled = currentSplit() === null;
}

async function refreshLevels(): Promise<void> {
  strataLevels = [];
  splitVarLevels = [];
  if (session === null || state === null) return;
  if (state.strata !== null && state.strata !== ALL_ONE_STRATUM) {
    const snapshot = await client.state(session.sessionId, state.strata);
    strataLevels = Object.keys(snapshot.strata_counts ?? {});
  }
  const isText = columns.some(
    (c) => c.name === state!.splitVar && c.type === "text",
  );
  if (isText && state.splitVar !== null) {
    const snapshot = await client.state(session.sessionId, state.splitVar);
    splitVarLevels = Object.keys(snapshot.strata_counts ?? {});
  }
}

async function onSelect(id: string, value: string): Promise<void> {
  if (state === null) return;
  if (id === "strata") {
    state.strata = value;
    selectedTargets = [];
  } else if (id === "split-var") {
    state.splitVar = value;
    selectedCategories = [];
  } else if (id === "split-kind") {
    state.splitKind = value as SplitKind;
  } else if (id === "y") {
    state.y = value;
  } else if (id === "method") {
    state.method = value;
  }
  await refreshLevels();
  rebuildControls();
  requestPreview();
}

function onNumber(id: string, value: number | null): void {
  if (state === null) return;
  if (id === "quantile" && value !== null) state.quantile = value;
  else if (id === "nsample" && value !== null) state.nsample = value;
  else if (id === "value-cut") state.valueCut = value;
  (el("confirm") as HTMLButtonElement).disabled = currentSplit() === null;
  requestPreview();
}

async function onUpload(file: File): Promise<void> {
  const info = await client.uploadCsv(await file.text());
  session = new ExplorerSession(client, info.session_id);
  columns = info.columns;
  rowCount = info.row_count;
  state = initialEditState(columns, rowCount);
  el("status").textContent =
    `${info.row_count} rows, ${info.columns.length} columns (session ${info.session_id.slice(0, 8)})`;
  el("script").textContent = "";
  await refreshLevels();
  rebuildControls();
  requestPreview();
}

async function onConfirm(): Promise<void> {
  if (session === null || session.confirmInFlight) return;
  const split = currentSplit();
  if (split === null) return;
  try {
    const response = await session.confirm(split);
    clearErrors();
    el("script").textContent = session.scriptText();
    el("counts").textContent = Object.entries(response.strata_counts)
      .map(([label, n]) => `${label}: ${n}`)
      .join("   ");
    // the confirmed split is the new baseline: refresh the catalog and
    // point the strata selector at the service's new_strata column
    const snapshot = await client.state(session.sessionId);
    columns = snapshot.columns;
    rowCount = snapshot.row_count;
    if (state !== null) {
      state.strata = snapshot.strata_col;
      selectedTargets = [];
      selectedCategories = [];
    }
    await refreshLevels();
    rebuildControls();
    requestPreview();
  } catch (error) {
    showError(error);
  }
}

async function onDownload(): Promise<void> {
  if (session === null) return;
  const text = await client.script(session.sessionId);
  const blob = new Blob([text], { type: "text/plain" });
  const anchor = document.createElement("a");
  anchor.href = URL.createObjectURL(blob);
  anchor.download = "session-script.txt";
  anchor.click();
  URL.revokeObjectURL(anchor.href);
}

el("upload").addEventListener("change", (event) => {
  const input = event.target as HTMLInputElement;
  if (input.files && input.files.length > 0) {
    onUpload(input.files[0]!).catch(showError);
  }
});
el("confirm").addEventListener("click", () => {
  onConfirm().catch(showError);
});
el("download").addEventListener("click", () => {
  onDownload().catch(showError);
});
