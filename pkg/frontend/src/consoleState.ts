// View model for the live experiment console. Pure reducers: every
// displayed number is copied from the most recent API payload, never
// recomputed from records on the client.

import type { ExperimentState, HistogramDoc, ProgressEvent } from "./types.js";

export interface ButtonGates {
  canStart: boolean;
  canPause: boolean;
  canStop: boolean;
}

export interface ConsoleView {
  experimentId: string;
  state: ExperimentState;
  answered: number;
  total: number;
  progressPercent: number;
  yes: number;
  no: number;
  unparseable: number;
  histogram: HistogramDoc | null;
  promptRates: number[]; // fraction per prompt, derived from the histogram bins
  buttons: ButtonGates;
  error: string | null;
}

// Start resumes Draft/Stopped/Paused runs; Complete is terminal.
export const buttonGates = (state: ExperimentState): ButtonGates => ({
  canStart: state === "Draft" || state === "Stopped" || state === "Paused",
  canPause: state === "Running",
  canStop: state === "Running" || state === "Paused",
});

export const initialView = (experimentId: string, state: ExperimentState = "Draft"): ConsoleView => ({
  experimentId,
  state,
  answered: 0,
  total: 0,
  progressPercent: 0,
  yes: 0,
  no: 0,
  unparseable: 0,
  histogram: null,
  promptRates: [],
  buttons: buttonGates(state),
  error: null,
});

export const applyProgress = (view: ConsoleView, event: ProgressEvent): ConsoleView => ({
  ...view,
  state: event.state,
  answered: event.answered,
  total: event.total,
  progressPercent: event.total > 0 ? (100 * event.answered) / event.total : 0,
  yes: event.yes,
  no: event.no,
  unparseable: event.unparseable,
  buttons: buttonGates(event.state),
  error: event.error ?? null,
});

// Positive rate per prompt from the histogram payload: the code string
// reads {Pk,...,P1} left to right, so prompt i sits at position k - i.
export const promptRatesFromHistogram = (doc: HistogramDoc): number[] => {
  if (doc.total_complete === 0) {
    return new Array(doc.k).fill(0);
  }
  const rates: number[] = [];
  for (let i = 1; i <= doc.k; i++) {
    let positive = 0;
    for (const bin of doc.bins) {
      if (bin.code[doc.k - i] === "1") {
        positive += bin.count;
      }
    }
    rates.push(positive / doc.total_complete);
  }
  return rates;
};

export const applyHistogram = (view: ConsoleView, doc: HistogramDoc): ConsoleView => ({
  ...view,
  histogram: doc,
  promptRates: promptRatesFromHistogram(doc),
});

export const histogramBinsSum = (doc: HistogramDoc): number =>
  doc.bins.reduce((sum, bin) => sum + bin.count, 0);
