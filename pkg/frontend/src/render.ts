/**
 * Pure view logic: which controls the column catalog admits, how the
 * design table turns into HTML, and which control a service error
 * belongs next to. No DOM access here, so all of it is testable in node;
 * main.ts materializes the descriptors.
 */

import type { ColumnInfo, TablePayload } from "./api.js";

export type SplitKind = "local_quantile" | "global_quantile" | "value" | "categorical";

/** Placeholder strata choice for datasets with no text column. */
export const ALL_ONE_STRATUM = "__all__";

export interface EditState {
  strata: string | null;
  splitVar: string | null;
  splitKind: SplitKind;
  quantile: number;
  valueCut: number | null;
  y: string | null;
  nsample: number;
  method: string;
}

export function initialEditState(columns: ColumnInfo[], rowCount: number): EditState {
  const text = columns.filter((c) => c.type === "text");
  const numeric = columns.filter((c) => c.type !== "text");
  return {
    strata: text.length > 0 ? text[0]!.name : ALL_ONE_STRATUM,
    splitVar: numeric.length > 0 ? numeric[0]!.name : null,
    splitKind: "local_quantile",
    quantile: 0.5,
    valueCut: null,
    y: numeric.length > 0 ? numeric[0]!.name : null,
    nsample: Math.min(40, rowCount),
    method: "WrightII",
  };
}

export interface SelectControl {
  kind: "select";
  id: "strata" | "split-var" | "split-kind" | "y" | "method";
  label: string;
  options: { value: string; label: string }[];
  value: string | null;
  disabled: boolean;
}

export interface SliderControl {
  kind: "slider";
  id: "quantile" | "nsample";
  label: string;
  min: number;
  max: number;
  step: number;
  value: number;
  disabled: boolean;
}

export interface NumberControl {
  kind: "number";
  id: "value-cut";
  label: string;
  value: number | null;
  disabled: boolean;
}

/** Options come from the live dataset, so the caller fills them via /state. */
export interface MultiControl {
  kind: "multi";
  id: "targets" | "categories";
  label: string;
  optionsFrom: "strata-levels" | "split-var-levels";
  disabled: boolean;
}

export type Control = SelectControl | SliderControl | NumberControl | MultiControl;

const METHODS = ["WrightII", "WrightI", "Neyman"];

export function renderControls(
  columns: ColumnInfo[],
  rowCount: number,
  state: EditState,
): Control[] {
  const numeric = columns.filter((c) => c.type !== "text").map((c) => c.name);
  const text = columns.filter((c) => c.type === "text").map((c) => c.name);
  const asOption = (name: string) => ({ value: name, label: name });

  const strataOptions =
    text.length > 0
      ? text.map(asOption)
      : [{ value: ALL_ONE_STRATUM, label: "(all one stratum)" }];
  // with the pseudo-stratum there is nothing to split, only to allocate
  const splitDisabled = state.strata === null || state.strata === ALL_ONE_STRATUM;
  const splitVarIsText = state.splitVar !== null && text.includes(state.splitVar);
  const kindOptions = splitVarIsText
    ? [{ value: "categorical", label: "categorical" }]
    : [
        { value: "local_quantile", label: "local quantile" },
        { value: "global_quantile", label: "global quantile" },
        { value: "value", label: "value" },
      ];

  const controls: Control[] = [
    {
      kind: "select",
      id: "strata",
      label: "Strata column",
      options: strataOptions,
      value: state.strata,
      disabled: false,
    },
    {
      kind: "select",
      id: "split-var",
      label: "Split variable",
      options: [...numeric, ...text].map(asOption),
      value: state.splitVar,
      disabled: splitDisabled,
    },
    {
      kind: "select",
      id: "split-kind",
      label: "Split type",
      options: kindOptions,
      value: splitVarIsText ? "categorical" : state.splitKind,
      disabled: splitDisabled,
    },
  ];

  if (splitVarIsText) {
    controls.push({
      kind: "multi",
      id: "categories",
      label: "Category sets",
      optionsFrom: "split-var-levels",
      disabled: splitDisabled,
    });
  } else if (state.splitKind === "value") {
    controls.push({
      kind: "number",
      id: "value-cut",
      label: "Cut value",
      value: state.valueCut,
      disabled: splitDisabled,
    });
  } else {
    controls.push({
      kind: "slider",
      id: "quantile",
      label: "Quantile",
      min: 0.01,
      max: 0.99,
      step: 0.01,
      value: state.quantile,
      disabled: splitDisabled,
    });
  }

  controls.push({
    kind: "multi",
    id: "targets",
    label: "Strata to split",
    optionsFrom: "strata-levels",
    disabled: splitDisabled,
  });
  controls.push({
    kind: "select",
    id: "y",
    label: "Design variable",
    options: numeric.map(asOption),
    value: state.y,
    disabled: false,
  });
  controls.push({
    kind: "slider",
    id: "nsample",
    label: "Sample size",
    min: 1,
    max: rowCount,
    step: 1,
    value: Math.min(state.nsample, rowCount),
    disabled: false,
  });
  controls.push({
    kind: "select",
    id: "method",
    label: "Method",
    options: METHODS.map(asOption),
    value: state.method,
    disabled: false,
  });
  return controls;
}

export function escapeHtml(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

/**
 * Design table rows as HTML. Real-valued cells display with two decimals
 * and carry the full wire value in a tooltip; nothing is recomputed.
 */
export function designTableHtml(design: TablePayload): string {
  const head = design.columns
    .map((name) => `<th>${escapeHtml(name)}</th>`)
    .join("");
  const rows = design.data
    .map((row) => {
      const cells = row
        .map((cell, i) => {
          if (cell === null) return "<td></td>";
          if (design.types[i] === "real" && typeof cell === "number") {
            const full = escapeHtml(String(cell));
            return `<td class="num" title="${full}">${cell.toFixed(2)}</td>`;
          }
          if (typeof cell === "number") {
            return `<td class="num">${String(cell)}</td>`;
          }
          return `<td>${escapeHtml(cell)}</td>`;
        })
        .join("");
      return `<tr>${cells}</tr>`;
    })
    .join("");
  return `<table><thead><tr>${head}</tr></thead><tbody>${rows}</tbody></table>`;
}

const SPLIT_ERRORS = new Set([
  "EmptyStratumPiece",
  "LabelCollision",
  "UnknownStratum",
  "EmptyInput",
  "AmbiguousInput",
]);

const ALLOCATION_ERRORS = new Set([
  "BudgetExceedsPopulation",
  "BudgetBelowFloor",
  "DegenerateVariance",
  "ZeroAllocation",
  "StratumTooSmall",
  "InsufficientData",
  "InsufficientUnits",
]);

/** Which control group a service error message should appear beside. */
export function errorTarget(kind: string): "split" | "allocation" | "session" {
  if (SPLIT_ERRORS.has(kind)) return "split";
  if (ALLOCATION_ERRORS.has(kind)) return "allocation";
  return "session";
}
