/** Shared scaffolding: a scripted in-memory service that mirrors the
 * HTTP contract (including feedback persistence and presentation-order
 * bookkeeping), plus small DOM helpers for driving the mounted app. */
import { ApiClient, type FetchLike } from "../src/api";
import { mountApp, type AppHandle } from "../src/app";

export interface RecordedRequest {
  method: string;
  path: string;
  body: Record<string, unknown> | null;
}

export interface PersistedFeedback {
  type: "feedback";
  request_id: string;
  preferences: Record<string, string>;
  attributes_snapshot: Record<string, unknown> | null;
}

const KNOWN_CRITERIA = ["informative", "coherent", "intent_matched"];

export class FakeService {
  requests: RecordedRequest[] = [];
  /** Append-only store, the stand-in for the server's feedback file. */
  feedbackRecords: PersistedFeedback[] = [];
  orders = new Map<string, string[]>();
  presentationOrder: [string, string] = ["conditional", "unconditional"];
  conditionalText = "We adopt the graph attention encoder of [] for message passing.";
  unconditionalText = "This work builds on the results of [].";
  suggestion = {
    v: 1,
    intent: {
      label: "method",
      probabilities: { background: 0.2, method: 0.7, result: 0.1 },
    },
    keywords: [
      { text: "graph attention", score: 0.91 },
      { text: "message passing", score: 0.84 },
      { text: "spectral filters", score: 0.71 },
      { text: "pooling layers", score: 0.62 },
      { text: "edge features", score: 0.55 },
    ],
    sentences: [
      { text: "We introduce attention over graph neighborhoods.", score: 0.88 },
      { text: "Experiments cover three node classification benchmarks.", score: 0.74 },
      { text: "Ablations isolate the effect of attention heads.", score: 0.69 },
      { text: "Training uses a standard cross-entropy objective.", score: 0.58 },
      { text: "The method scales linearly in the number of edges.", score: 0.51 },
    ],
  };
  private nextId = 0;

  lastRequest(path: string): RecordedRequest {
    const matches = this.requests.filter((req) => req.path === path);
    const last = matches[matches.length - 1];
    if (!last) {
      throw new Error(`no recorded request for ${path}`);
    }
    return last;
  }

  fetch: FetchLike = async (url, init) => {
    const path = url.replace(/^https?:\/\/[^/]+/, "") || "/";
    const method = init?.method ?? "GET";
    const body = init?.body ? (JSON.parse(String(init.body)) as Record<string, unknown>) : null;
    this.requests.push({ method, path, body });
    const json = (data: unknown, status = 200) =>
      new Response(JSON.stringify(data), {
        status,
        headers: { "content-type": "application/json" },
      });

    if (path === "/health") {
      return json({ status: "ok", v: 1, models: { corpus: true, suggester: true, generator: true } });
    }
    if (path === "/suggest") {
      return json(this.suggestion);
    }
    if (path === "/generate") {
      const compare = Boolean(body?.compare_unconditional);
      const requestId = `req-${this.nextId++}`;
      const order = compare ? [...this.presentationOrder] : ["conditional"];
      this.orders.set(requestId, order);
      return json({
        v: 1,
        request_id: requestId,
        conditional_sentence: this.conditionalText,
        unconditional_sentence: compare ? this.unconditionalText : null,
        presentation_order: compare ? order : null,
      });
    }
    if (path === "/feedback") {
      const requestId = String(body?.request_id ?? "");
      if (!this.orders.has(requestId)) {
        return json({ detail: `unknown request id '${requestId}'` }, 404);
      }
      const preferences = (body?.preferences ?? {}) as Record<string, string>;
      const unknown = Object.keys(preferences).filter((key) => !KNOWN_CRITERIA.includes(key));
      if (unknown.length > 0) {
        return json({ detail: `unknown criteria ${unknown.join(", ")}` }, 422);
      }
      this.feedbackRecords.push({
        type: "feedback",
        request_id: requestId,
        preferences,
        attributes_snapshot:
          (body?.attributes_snapshot as Record<string, unknown> | null) ?? null,
      });
      return json({ v: 1, request_id: requestId, recorded: true });
    }
    return json({ detail: `no route ${method} ${path}` }, 404);
  };
}

export function mount(service: FakeService): AppHandle {
  document.body.innerHTML = `<div id="app"></div>`;
  const api = new ApiClient("", service.fetch);
  return mountApp(document.getElementById("app") as HTMLElement, api);
}

export async function until(predicate: () => boolean, what = "condition"): Promise<void> {
  for (let attempt = 0; attempt < 400; attempt++) {
    if (predicate()) {
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
  throw new Error(`timed out waiting for ${what}`);
}

export function setValue(el: HTMLInputElement | HTMLTextAreaElement, value: string): void {
  el.value = value;
  el.dispatchEvent(new Event("input", { bubbles: true }));
}

export function chips(hostId: string): HTMLButtonElement[] {
  return Array.from(document.querySelectorAll<HTMLButtonElement>(`#${hostId} .chip`));
}

export function chipByText(hostId: string, text: string): HTMLButtonElement {
  const match = chips(hostId).find((chip) => chip.textContent === text);
  if (!match) {
    throw new Error(`no chip '${text}' in #${hostId}`);
  }
  return match;
}

export function checkRadio(name: string, value: string): void {
  const radio = document.querySelector<HTMLInputElement>(
    `input[name="${name}"][value="${value}"]`,
  );
  if (!radio) {
    throw new Error(`no radio ${name}=${value}`);
  }
  radio.click();
}

/** Re-derives the user-visible selection purely from the DOM: textarea
 * and input values, the checked intent radio, and chips whose pressed
 * state is on, in document order.  Deliberately independent of the
 * app's internal state module. */
export function readVisibleSelection(): {
  context_text: string;
  cited_paper_id: string | null;
  intent: string | null;
  keywords: string[];
  sentences: string[];
  compare: boolean;
} {
  const pressed = (hostId: string) =>
    Array.from(
      document.querySelectorAll<HTMLButtonElement>(`#${hostId} .chip[aria-pressed="true"]`),
    ).map((chip) => chip.textContent ?? "");
  const intentRadio = document.querySelector<HTMLInputElement>(
    `#intent-options input[name="intent"]:checked`,
  );
  const cited = (document.getElementById("cited") as HTMLInputElement).value.trim();
  return {
    context_text: (document.getElementById("context") as HTMLTextAreaElement).value,
    cited_paper_id: cited === "" ? null : cited,
    intent: intentRadio && intentRadio.value !== "" ? intentRadio.value : null,
    keywords: pressed("keyword-options"),
    sentences: pressed("sentence-options"),
    compare: (document.getElementById("compare") as HTMLInputElement).checked,
  };
}
