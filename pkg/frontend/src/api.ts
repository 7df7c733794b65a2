// Thin fetch client for the backend API plus a progress subscription
// that prefers server-sent events and falls back to 2 s polling.

import type {
  ExperimentDoc,
  ExperimentState,
  HistogramDoc,
  IngestReport,
  ProgressEvent,
  RecordRow,
  TemplateDoc,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

const asJson = async <T>(response: Response): Promise<T> => {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep statusText
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
};

export class ApiClient {
  constructor(private base: string = "") {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  templates(): Promise<TemplateDoc[]> {
    return fetch(this.url("/api/experiment-templates")).then((r) => asJson<TemplateDoc[]>(r));
  }

  experiments(): Promise<ExperimentDoc[]> {
    return fetch(this.url("/api/experiments")).then((r) => asJson<ExperimentDoc[]>(r));
  }

  experiment(id: string): Promise<ExperimentDoc> {
    return fetch(this.url(`/api/experiments/${id}`)).then((r) => asJson<ExperimentDoc>(r));
  }

  createExperiment(body: {
    name: string;
    values: Record<string, string | number>;
    provider?: string;
    dispatch?: Record<string, number>;
  }): Promise<ExperimentDoc> {
    return fetch(this.url("/api/experiments"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    }).then((r) => asJson<ExperimentDoc>(r));
  }

  uploadWords(id: string, text: string): Promise<IngestReport> {
    return fetch(this.url(`/api/experiments/${id}/words`), {
      method: "POST",
      headers: { "Content-Type": "text/plain" },
      body: text,
    }).then((r) => asJson<IngestReport>(r));
  }

  private action(id: string, name: string): Promise<{ state: ExperimentState }> {
    return fetch(this.url(`/api/experiments/${id}/${name}`), { method: "POST" }).then((r) =>
      asJson<{ state: ExperimentState }>(r),
    );
  }

  start(id: string) {
    return this.action(id, "start");
  }

  pause(id: string) {
    return this.action(id, "pause");
  }

  stop(id: string) {
    return this.action(id, "stop");
  }

  progress(id: string): Promise<ProgressEvent> {
    return fetch(this.url(`/api/experiments/${id}/progress`)).then((r) =>
      asJson<ProgressEvent>(r),
    );
  }

  histogram(id: string): Promise<HistogramDoc> {
    return fetch(this.url(`/api/experiments/${id}/histogram`)).then((r) =>
      asJson<HistogramDoc>(r),
    );
  }

  results(id: string, combination?: string): Promise<RecordRow[]> {
    const query = combination ? `?combination=${encodeURIComponent(combination)}` : "";
    return fetch(this.url(`/api/experiments/${id}/results${query}`)).then((r) =>
      asJson<RecordRow[]>(r),
    );
  }

  eventsUrl(id: string): string {
    return this.url(`/api/experiments/${id}/events`);
  }
}

export interface SubscribeOptions {
  // injectable for tests and for environments without EventSource
  eventSourceFactory?: (url: string) => EventSource | null;
  poll?: () => Promise<ProgressEvent>;
  pollIntervalMs?: number;
}

const defaultEventSourceFactory = (url: string): EventSource | null =>
  typeof EventSource === "undefined" ? null : new EventSource(url);

// Subscribe to live progress. Returns an unsubscribe function. Stops by
// itself once a terminal state (Stopped/Complete) arrives.
export const subscribeProgress = (
  client: ApiClient,
  experimentId: string,
  onEvent: (event: ProgressEvent) => void,
  options: SubscribeOptions = {},
): (() => void) => {
  const factory = options.eventSourceFactory ?? defaultEventSourceFactory;
  const intervalMs = options.pollIntervalMs ?? 2000;
  let stopped = false;
  let timer: ReturnType<typeof setTimeout> | null = null;
  let source: EventSource | null = null;

  const finish = () => {
    stopped = true;
    if (timer !== null) clearTimeout(timer);
    if (source !== null) source.close();
  };

  const deliver = (event: ProgressEvent) => {
    if (stopped) return;
    onEvent(event);
    if (event.state === "Stopped" || event.state === "Complete") {
      finish();
    }
  };

  const poll = options.poll ?? (() => client.progress(experimentId));
  const startPolling = () => {
    const tick = async () => {
      if (stopped) return;
      try {
        deliver(await poll());
      } catch {
        // transient; next tick retries
      }
      if (!stopped) {
        timer = setTimeout(tick, intervalMs);
      }
    };
    void tick();
  };

  source = factory(client.eventsUrl(experimentId));
  if (source === null) {
    startPolling();
  } else {
    source.onmessage = (message: MessageEvent<string>) => {
      deliver(JSON.parse(message.data) as ProgressEvent);
    };
    source.onerror = () => {
      // fall back to polling if the stream drops mid-run
      if (!stopped && source !== null) {
        source.close();
        source = null;
        startPolling();
      }
    };
  }

  return finish;
};
