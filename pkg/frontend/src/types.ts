// Payload shapes of the backend API, field for field.

export type ExperimentState = "Draft" | "Running" | "Paused" | "Stopped" | "Complete";

export interface TemplateFieldDoc {
  type: "select" | "number";
  // selects carry options as a list of single-entry {label: value} maps
  options?: Record<string, string>[];
  name?: string;
  placeholder?: string;
  value?: number | string;
  step?: number;
  min?: number;
  max?: number;
}

export interface TemplateDoc {
  name: string;
  description: string;
  configuration: Record<string, TemplateFieldDoc>;
}

export interface ExperimentDoc {
  id: string;
  name: string;
  description: string;
  wordlist_id: string;
  battery_id: string;
  provider_kind: string;
  model: string;
  temperature: number;
  dispatch: Record<string, number>;
  config: Record<string, string | number>;
  created_at: string;
  state: ExperimentState;
}

export interface ProgressEvent {
  experiment_id: string;
  answered: number;
  total: number;
  yes: number;
  no: number;
  unparseable: number;
  state: ExperimentState;
  timestamp: string;
  error?: string;
}

export interface IngestReport {
  wordlist_id: string;
  words: number;
  report: {
    lines_total: number;
    kept: number;
    dropped_duplicates: number;
    skipped_blank: number;
    skipped_comments: number;
    folded: number;
  };
}

export interface HistogramBin {
  code: string;
  count: number;
  percent: number;
}

export interface HistogramDoc {
  k: number;
  total_complete: number;
  total_excluded: number;
  bins: HistogramBin[];
}

export interface RecordRow {
  word: string;
  prompt_id: string;
  parsed: "YES" | "NO" | "UNPARSEABLE";
  raw_text: string;
  attempts: number;
  latency_ms: number;
  completed_at: string;
}
