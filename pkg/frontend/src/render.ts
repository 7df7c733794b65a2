// DOM helpers: schema-driven form controls, progress bar, bar charts,
// results table. No framework; plain elements all the way down.

import type { FormField } from "./schemaForm.js";
import { fieldError } from "./schemaForm.js";
import type { ConsoleView } from "./consoleState.js";
import type { HistogramDoc, RecordRow } from "./types.js";

export const el = <K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] => {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
};

export const renderField = (
  field: FormField,
  onChange: (key: string, value: string) => void,
): HTMLElement => {
  const error = fieldError(field);
  const wrap = el("label", { class: "field" }, [field.label + " "]);
  if (field.kind === "select") {
    const select = el("select", { "data-key": field.key });
    for (const option of field.options) {
      const node = el("option", { value: option.value }, [option.label]);
      if (option.value === field.value) node.selected = true;
      select.append(node);
    }
    select.addEventListener("change", () => onChange(field.key, select.value));
    wrap.append(select);
  } else {
    const input = el("input", {
      type: "number",
      "data-key": field.key,
      value: field.value,
      placeholder: field.placeholder,
    });
    if (field.min !== undefined) input.min = String(field.min);
    if (field.max !== undefined) input.max = String(field.max);
    if (field.step !== undefined) input.step = String(field.step);
    input.addEventListener("input", () => onChange(field.key, input.value));
    wrap.append(input);
  }
  if (error !== null && field.value !== "") {
    wrap.append(el("span", { class: "error" }, [` ${error}`]));
  }
  return wrap;
};

export const renderProgress = (view: ConsoleView): HTMLElement => {
  const percent = view.progressPercent.toFixed(1);
  return el("div", { class: "progress" }, [
    el("div", { class: "progress-track" }, [
      el("div", {
        class: "progress-fill",
        style: `width:${percent}%`,
      }),
    ]),
    el("span", { class: "progress-label" }, [
      `${view.answered} / ${view.total} (${percent}%) — ${view.state}`,
    ]),
  ]);
};

export const renderCounts = (view: ConsoleView): HTMLElement =>
  el("div", { class: "counts" }, [
    `yes ${view.yes} · no ${view.no} · unparseable ${view.unparseable}`,
  ]);

const bar = (label: string, percent: number, detail: string): HTMLElement =>
  el("div", { class: "bar-row" }, [
    el("span", { class: "bar-label" }, [label]),
    el("div", { class: "bar-track" }, [
      el("div", { class: "bar-fill", style: `width:${percent.toFixed(2)}%` }),
    ]),
    el("span", { class: "bar-value" }, [detail]),
  ]);

export const renderRates = (view: ConsoleView): HTMLElement => {
  const box = el("div", { class: "rates" }, [el("h3", {}, ["Positive answers per prompt"])]);
  view.promptRates.forEach((rate, index) => {
    const percent = 100 * rate;
    box.append(bar(`P${index + 1}`, percent, `${percent.toFixed(2)}%`));
  });
  return box;
};

export const renderHistogram = (doc: HistogramDoc): HTMLElement => {
  const box = el("div", { class: "histogram" }, [
    el("h3", {}, [
      `Answer combinations — ${doc.total_complete} complete words` +
        (doc.total_excluded ? ` (${doc.total_excluded} excluded)` : ""),
    ]),
  ]);
  for (const bin of doc.bins) {
    box.append(bar(bin.code, bin.percent, `${bin.count} (${bin.percent.toFixed(2)}%)`));
  }
  return box;
};

export const renderResultsTable = (rows: RecordRow[]): HTMLElement => {
  const head = el("tr", {}, []);
  for (const column of ["word", "prompt", "answer", "raw response"]) {
    head.append(el("th", {}, [column]));
  }
  const table = el("table", { class: "results" }, [head]);
  for (const row of rows) {
    table.append(
      el("tr", {}, [
        el("td", {}, [row.word]),
        el("td", {}, [row.prompt_id]),
        el("td", { class: `answer-${row.parsed.toLowerCase()}` }, [row.parsed]),
        el("td", {}, [row.raw_text]),
      ]),
    );
  }
  return table;
};
