// Page wiring: template-driven experiment form, word upload, and the
// live console with start/pause/stop and charts.

import { ApiClient, ApiError, subscribeProgress } from "./api.js";
import {
  applyHistogram,
  applyProgress,
  buttonGates,
  initialView,
  histogramBinsSum,
  type ConsoleView,
} from "./consoleState.js";
import {
  buildFormModel,
  formValues,
  setFieldValue,
  submitEnabled,
  SchemaShapeError,
  type FormField,
} from "./schemaForm.js";
import {
  el,
  renderCounts,
  renderField,
  renderHistogram,
  renderProgress,
  renderRates,
  renderResultsTable,
} from "./render.js";
import type { ExperimentDoc, TemplateDoc } from "./types.js";

const client = new ApiClient("");

const app = document.getElementById("app") ?? document.body;

const banner = (text: string): HTMLElement => el("div", { class: "banner" }, [text]);

const section = (title: string): HTMLElement =>
  el("section", {}, [el("h2", {}, [title])]);

// ---- new-experiment form -------------------------------------------------

const formSection = (template: TemplateDoc, onCreated: (doc: ExperimentDoc) => void) => {
  const box = section(`New experiment — ${template.name}`);
  box.append(el("p", { class: "muted" }, [template.description]));
  let fields: FormField[];
  try {
    fields = buildFormModel(template);
  } catch (error) {
    if (error instanceof SchemaShapeError) {
      box.append(banner(`template is malformed: ${error.message}`));
      return box;
    }
    throw error;
  }

  const nameInput = el("input", { type: "text", placeholder: "experiment name" });
  const fieldBox = el("div", { class: "fields" });
  const submit = el("button", {}, ["Create experiment"]) as HTMLButtonElement;
  const note = el("span", { class: "muted" }, []);

  const redraw = () => {
    fieldBox.replaceChildren(
      ...fields.map((field) =>
        renderField(field, (key, value) => {
          fields = setFieldValue(fields, key, value);
          redraw();
        }),
      ),
    );
    submit.disabled = !submitEnabled(fields) || nameInput.value.trim() === "";
  };
  nameInput.addEventListener("input", redraw);
  submit.addEventListener("click", async () => {
    try {
      const doc = await client.createExperiment({
        name: nameInput.value.trim(),
        values: formValues(fields),
      });
      onCreated(doc);
    } catch (error) {
      note.textContent = error instanceof ApiError ? error.message : String(error);
    }
  });

  box.append(el("div", { class: "form" }, [nameInput, fieldBox, submit, note]));
  redraw();
  return box;
};

// ---- experiment console ---------------------------------------------------

const consoleSection = (doc: ExperimentDoc): HTMLElement => {
  const box = section(`Experiment ${doc.name} (${doc.id})`);
  let view: ConsoleView = initialView(doc.id, doc.state);
  let unsubscribe: (() => void) | null = null;

  const uploadBox = el("div", { class: "upload" });
  const fileInput = el("input", { type: "file", accept: ".txt,text/plain" });
  const uploadNote = el("span", { class: "muted" }, []);
  const controls = el("div", { class: "controls" });
  const liveBox = el("div", { class: "live" });
  const resultsBox = el("div", { class: "results-box" });

  const refreshHistogram = async () => {
    try {
      const hist = await client.histogram(doc.id);
      view = applyHistogram(view, hist);
      // charts come from the histogram payload only; sanity: bins sum to the header count
      if (histogramBinsSum(hist) !== hist.total_complete) {
        throw new Error("histogram bins do not sum to the complete-word count");
      }
    } catch {
      // keep the last good chart
    }
  };

  const redraw = () => {
    controls.replaceChildren(
      button("Start", view.buttons.canStart, async () => act("start")),
      button("Pause", view.buttons.canPause, async () => act("pause")),
      button("Stop", view.buttons.canStop, async () => act("stop")),
    );
    liveBox.replaceChildren(renderProgress(view), renderCounts(view));
    if (view.error) liveBox.append(banner(view.error));
    if (view.histogram) {
      liveBox.append(renderRates(view), renderHistogram(view.histogram));
    }
  };

  const button = (label: string, enabled: boolean, onClick: () => void): HTMLButtonElement => {
    const node = el("button", {}, [label]) as HTMLButtonElement;
    node.disabled = !enabled;
    node.addEventListener("click", onClick);
    return node;
  };

  const act = async (action: "start" | "pause" | "stop") => {
    try {
      const { state } = await client[action](doc.id);
      view = { ...view, state, buttons: buttonGates(state) };
      if (action === "start") subscribe();
      redraw();
    } catch (error) {
      liveBox.append(banner(error instanceof ApiError ? error.message : String(error)));
    }
  };

  const subscribe = () => {
    unsubscribe?.();
    unsubscribe = subscribeProgress(client, doc.id, async (event) => {
      view = applyProgress(view, event);
      await refreshHistogram();
      redraw();
      if (event.state === "Complete" || event.state === "Stopped") {
        void showResults();
      }
    });
  };

  const showResults = async () => {
    const rows = await client.results(doc.id);
    const filter = el("select", {});
    filter.append(el("option", { value: "" }, ["all combinations"]));
    for (const bin of view.histogram?.bins ?? []) {
      filter.append(el("option", { value: bin.code }, [`${bin.code} (${bin.count})`]));
    }
    const tableBox = el("div", {}, [renderResultsTable(rows)]);
    filter.addEventListener("change", async () => {
      const filtered = await client.results(doc.id, filter.value || undefined);
      tableBox.replaceChildren(renderResultsTable(filtered));
    });
    resultsBox.replaceChildren(el("h3", {}, ["Results"]), filter, tableBox);
  };

  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    try {
      const report = await client.uploadWords(doc.id, await file.text());
      uploadNote.textContent =
        `${report.words} words loaded` +
        (report.report.dropped_duplicates
          ? ` (${report.report.dropped_duplicates} duplicates dropped)`
          : "");
    } catch (error) {
      uploadNote.textContent = error instanceof ApiError ? error.message : String(error);
    }
  });

  uploadBox.append(el("span", {}, ["Word list: "]), fileInput, uploadNote);
  box.append(uploadBox, controls, liveBox, resultsBox);
  void (async () => {
    try {
      view = applyProgress(view, await client.progress(doc.id));
      await refreshHistogram();
    } finally {
      redraw();
      if (view.state === "Running" || view.state === "Paused") subscribe();
    }
  })();
  return box;
};

// ---- page bootstrap ---------------------------------------------------------

const boot = async () => {
  app.replaceChildren(el("h1", {}, ["wordprobe"]));
  let templates: TemplateDoc[];
  let experiments: ExperimentDoc[];
  try {
    [templates, experiments] = await Promise.all([client.templates(), client.experiments()]);
  } catch (error) {
    app.append(banner(`cannot reach the API: ${String(error)}`));
    return;
  }

  const consoleHost = el("div", {});
  const open = (doc: ExperimentDoc) => consoleHost.replaceChildren(consoleSection(doc));

  if (templates.length > 0) {
    app.append(formSection(templates[0], open));
  }

  const listBox = section("Experiments");
  const list = el("ul", {});
  for (const experiment of experiments) {
    const link = el("a", { href: "#" }, [
      `${experiment.name} — ${experiment.state} (${experiment.model})`,
    ]);
    link.addEventListener("click", (click) => {
      click.preventDefault();
      open(experiment);
    });
    list.append(el("li", {}, [link]));
  }
  listBox.append(list);
  app.append(listBox, consoleHost);
};

void boot();
