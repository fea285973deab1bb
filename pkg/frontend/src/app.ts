/** DOM wiring: renders SelectionState, forwards edits back into it, and
 * talks to the service through an injected ApiClient.
 *
 * Rendering rules that the tests pin down:
 *  - chip buttons carry the attribute text as their full text content and
 *    aria-pressed as the selection flag, so the visible selection can be
 *    read straight off the DOM;
 *  - comparison cards are rendered from BlindCard values only, so no
 *    system identifier can appear inside the results markup;
 *  - the feedback button submits once per generation.
 */
import {
  ApiClient,
  ApiError,
  SCHEMA_VERSION,
  type GenerateResponse,
  type Preference,
} from "./api";
import { APP_HTML } from "./markup";
import {
  CRITERIA,
  CRITERION_LABELS,
  INTENTS,
  addKeyword,
  applySuggestions,
  blindCards,
  buildFeedbackPayload,
  buildGeneratePayload,
  initialState,
  setCitedPaper,
  setCompare,
  setContext,
  setIntent,
  toggleKeyword,
  toggleSentence,
  type Criterion,
  type SelectionState,
} from "./state";

export interface AppHandle {
  getState(): SelectionState;
  lastGeneration(): GenerateResponse | null;
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    return `service error: ${err.detail}`;
  }
  return `request failed: ${String(err)}`;
}

export function mountApp(container: HTMLElement, api: ApiClient): AppHandle {
  container.innerHTML = APP_HTML;
  const doc = container.ownerDocument;

  function byId<T extends HTMLElement>(id: string): T {
    const el = doc.getElementById(id);
    if (!el) {
      throw new Error(`missing element #${id}`);
    }
    return el as T;
  }

  const contextEl = byId<HTMLTextAreaElement>("context");
  const citedEl = byId<HTMLInputElement>("cited");
  const suggestBtn = byId<HTMLButtonElement>("suggest-btn");
  const intentOptionsEl = byId<HTMLSpanElement>("intent-options");
  const keywordOptionsEl = byId<HTMLDivElement>("keyword-options");
  const sentenceOptionsEl = byId<HTMLDivElement>("sentence-options");
  const customKeywordEl = byId<HTMLInputElement>("custom-keyword");
  const addKeywordBtn = byId<HTMLButtonElement>("add-keyword-btn");
  const compareEl = byId<HTMLInputElement>("compare");
  const generateBtn = byId<HTMLButtonElement>("generate-btn");
  const resultsEl = byId<HTMLElement>("results");
  const singleOutputEl = byId<HTMLDivElement>("single-output");
  const outputTextEl = byId<HTMLParagraphElement>("output-text");
  const comparisonEl = byId<HTMLDivElement>("comparison");
  const cardsEl = byId<HTMLDivElement>("cards");
  const feedbackFormEl = byId<HTMLFormElement>("feedback-form");
  const feedbackBtn = byId<HTMLButtonElement>("feedback-btn");
  const statusEl = byId<HTMLParagraphElement>("status");

  let state = initialState();
  let lastResponse: GenerateResponse | null = null;
  let feedbackSent = false;

  function setStatus(text: string, isError = false): void {
    statusEl.textContent = text;
    statusEl.classList.toggle("error", isError);
  }

  function renderIntentOptions(): void {
    intentOptionsEl.textContent = "";
    for (const value of ["", ...INTENTS]) {
      const label = doc.createElement("label");
      label.className = "intent-option";
      const radio = doc.createElement("input");
      radio.type = "radio";
      radio.name = "intent";
      radio.value = value;
      radio.checked = (state.intent ?? "") === value;
      radio.addEventListener("change", () => {
        state = setIntent(state, radio.value);
      });
      label.append(radio, doc.createTextNode(value === "" ? "none" : value));
      intentOptionsEl.append(label);
    }
  }

  function renderChips(
    host: HTMLElement,
    options: string[],
    selected: string[],
    onToggle: (text: string) => void,
  ): void {
    host.textContent = "";
    for (const text of options) {
      const chip = doc.createElement("button");
      chip.type = "button";
      chip.className = "chip";
      chip.textContent = text;
      chip.setAttribute("aria-pressed", String(selected.includes(text)));
      chip.addEventListener("click", () => onToggle(text));
      host.append(chip);
    }
  }

  function renderAttributes(): void {
    renderIntentOptions();
    renderChips(keywordOptionsEl, state.keywordOptions, state.selectedKeywords, (text) => {
      state = toggleKeyword(state, text);
      renderAttributes();
    });
    renderChips(sentenceOptionsEl, state.sentenceOptions, state.selectedSentences, (text) => {
      state = toggleSentence(state, text);
      renderAttributes();
    });
    compareEl.checked = state.compare;
  }

  function renderFeedbackForm(): void {
    feedbackFormEl.textContent = "";
    for (const criterion of CRITERIA) {
      const row = doc.createElement("div");
      row.className = "criterion";
      const name = doc.createElement("span");
      name.className = "criterion-name";
      name.textContent = CRITERION_LABELS[criterion];
      row.append(name);
      const choices: Array<[Preference, string]> = [
        ["system_a", "A"],
        ["system_b", "B"],
        ["neutral", "no preference"],
      ];
      for (const [value, text] of choices) {
        const label = doc.createElement("label");
        const radio = doc.createElement("input");
        radio.type = "radio";
        radio.name = `fb-${criterion}`;
        radio.value = value;
        label.append(radio, doc.createTextNode(text));
        row.append(label);
      }
      feedbackFormEl.append(row);
    }
  }

  function renderResults(res: GenerateResponse): void {
    resultsEl.hidden = false;
    const cards = blindCards(res);
    if (cards.length > 0) {
      singleOutputEl.hidden = true;
      comparisonEl.hidden = false;
      cardsEl.textContent = "";
      for (const card of cards) {
        const article = doc.createElement("article");
        article.className = "card";
        const heading = doc.createElement("h3");
        heading.className = "card-label";
        heading.textContent = card.label;
        const body = doc.createElement("p");
        body.className = "card-text";
        body.textContent = card.text;
        article.append(heading, body);
        cardsEl.append(article);
      }
      renderFeedbackForm();
      feedbackBtn.disabled = false;
    } else {
      comparisonEl.hidden = true;
      singleOutputEl.hidden = false;
      outputTextEl.textContent = res.conditional_sentence;
    }
  }

  function readPreferences(): Partial<Record<Criterion, Preference>> {
    const preferences: Partial<Record<Criterion, Preference>> = {};
    for (const criterion of CRITERIA) {
      const checked = feedbackFormEl.querySelector<HTMLInputElement>(
        `input[name="fb-${criterion}"]:checked`,
      );
      if (checked) {
        preferences[criterion] = checked.value as Preference;
      }
    }
    return preferences;
  }

  function syncInputs(): void {
    state = setCitedPaper(setContext(state, contextEl.value), citedEl.value);
  }

  contextEl.addEventListener("input", () => {
    state = setContext(state, contextEl.value);
  });
  citedEl.addEventListener("input", () => {
    state = setCitedPaper(state, citedEl.value);
  });
  compareEl.addEventListener("change", () => {
    state = setCompare(state, compareEl.checked);
  });

  addKeywordBtn.addEventListener("click", () => {
    state = addKeyword(state, customKeywordEl.value);
    customKeywordEl.value = "";
    renderAttributes();
  });

  suggestBtn.addEventListener("click", async () => {
    syncInputs();
    setStatus("fetching suggestions...");
    try {
      const res = await api.suggest({
        v: SCHEMA_VERSION,
        context_text: state.contextText,
        cited_paper_id: state.citedPaperId || null,
      });
      state = applySuggestions(state, res);
      renderAttributes();
      setStatus(
        `suggested intent "${res.intent.label}", ${res.keywords.length} keywords, ` +
          `${res.sentences.length} sentences`,
      );
    } catch (err) {
      setStatus(describeError(err), true);
    }
  });

  generateBtn.addEventListener("click", async () => {
    syncInputs();
    setStatus("generating...");
    try {
      const res = await api.generate(buildGeneratePayload(state));
      lastResponse = res;
      feedbackSent = false;
      renderResults(res);
      setStatus("done");
    } catch (err) {
      setStatus(describeError(err), true);
    }
  });

  feedbackBtn.addEventListener("click", async () => {
    if (!lastResponse || feedbackSent) {
      return;
    }
    const preferences = readPreferences();
    if (Object.keys(preferences).length === 0) {
      setStatus("pick at least one judgment first", true);
      return;
    }
    try {
      const ack = await api.feedback(
        buildFeedbackPayload(lastResponse.request_id, preferences, state),
      );
      feedbackSent = ack.recorded;
      feedbackBtn.disabled = true;
      setStatus("feedback recorded, thank you");
    } catch (err) {
      setStatus(describeError(err), true);
    }
  });

  renderAttributes();
  return {
    getState: () => state,
    lastGeneration: () => lastResponse,
  };
}
