/** Pure selection-state logic for the attribute editor.
 *
 * The generate payload is derived from this state and nothing else, and
 * the DOM layer renders the same state, so what the user sees and what
 * the service receives cannot drift apart.  Selected attributes are kept
 * in option-list order: the payload lists items exactly as they appear
 * top to bottom on screen, regardless of click order.
 *
 * Comparison outputs are reduced to BlindCard values before they reach
 * any renderer.  A BlindCard carries a positional label and text only;
 * which underlying system produced which card never leaves this module.
 */
import {
  SCHEMA_VERSION,
  type AttributesPayload,
  type FeedbackRequest,
  type GenerateRequest,
  type GenerateResponse,
  type Preference,
  type SuggestResponse,
} from "./api";

export const INTENTS = ["background", "method", "result"] as const;

export const CRITERIA = ["informative", "coherent", "intent_matched"] as const;
export type Criterion = (typeof CRITERIA)[number];

export const CRITERION_LABELS: Record<Criterion, string> = {
  informative: "More informative",
  coherent: "More coherent",
  intent_matched: "Better matches the intent",
};

export interface SelectionState {
  contextText: string;
  citedPaperId: string;
  intent: string | null;
  keywordOptions: string[];
  sentenceOptions: string[];
  selectedKeywords: string[];
  selectedSentences: string[];
  compare: boolean;
}

export function initialState(): SelectionState {
  return {
    contextText: "",
    citedPaperId: "",
    intent: null,
    keywordOptions: [],
    sentenceOptions: [],
    selectedKeywords: [],
    selectedSentences: [],
    compare: true,
  };
}

export function setContext(state: SelectionState, text: string): SelectionState {
  return { ...state, contextText: text };
}

export function setCitedPaper(state: SelectionState, paperId: string): SelectionState {
  return { ...state, citedPaperId: paperId.trim() };
}

export function setIntent(state: SelectionState, intent: string | null): SelectionState {
  return { ...state, intent: intent || null };
}

export function setCompare(state: SelectionState, compare: boolean): SelectionState {
  return { ...state, compare };
}

/** Replace the option pools with fresh suggestions.  The suggested
 * intent becomes the current choice; chip selections start empty so the
 * user explicitly accepts items. */
export function applySuggestions(state: SelectionState, res: SuggestResponse): SelectionState {
  return {
    ...state,
    intent: res.intent.label || null,
    keywordOptions: res.keywords.map((item) => item.text),
    sentenceOptions: res.sentences.map((item) => item.text),
    selectedKeywords: [],
    selectedSentences: [],
  };
}

function toggle(options: string[], selected: string[], text: string): string[] {
  const next = selected.includes(text)
    ? selected.filter((item) => item !== text)
    : [...selected, text];
  return options.filter((item) => next.includes(item));
}

export function toggleKeyword(state: SelectionState, text: string): SelectionState {
  return { ...state, selectedKeywords: toggle(state.keywordOptions, state.selectedKeywords, text) };
}

export function toggleSentence(state: SelectionState, text: string): SelectionState {
  return {
    ...state,
    selectedSentences: toggle(state.sentenceOptions, state.selectedSentences, text),
  };
}

/** User-edited keyword: appended to the pool (if new) and selected. */
export function addKeyword(state: SelectionState, text: string): SelectionState {
  const cleaned = text.trim();
  if (!cleaned) {
    return state;
  }
  const options = state.keywordOptions.includes(cleaned)
    ? state.keywordOptions
    : [...state.keywordOptions, cleaned];
  const selected = state.selectedKeywords.includes(cleaned)
    ? state.selectedKeywords
    : [...state.selectedKeywords, cleaned];
  return {
    ...state,
    keywordOptions: options,
    selectedKeywords: options.filter((item) => selected.includes(item)),
  };
}

export function attributesFrom(state: SelectionState): AttributesPayload {
  return {
    intent: state.intent,
    keywords: [...state.selectedKeywords],
    sentences: [...state.selectedSentences],
  };
}

export function buildGeneratePayload(state: SelectionState): GenerateRequest {
  return {
    v: SCHEMA_VERSION,
    context_text: state.contextText,
    cited_paper_id: state.citedPaperId || null,
    attributes: attributesFrom(state),
    decode: {},
    compare_unconditional: state.compare,
  };
}

export interface BlindCard {
  label: "A" | "B";
  text: string;
}

/** Fold a comparison response into neutrally labeled cards.  Card A is
 * always the first presented output; the system-to-position mapping
 * stays inside the response and is never copied onto the cards. */
export function blindCards(res: GenerateResponse): BlindCard[] {
  if (!res.presentation_order || res.unconditional_sentence === null) {
    return [];
  }
  const bySystem: Record<string, string> = {
    conditional: res.conditional_sentence,
    unconditional: res.unconditional_sentence,
  };
  return res.presentation_order.map((system, position) => ({
    label: position === 0 ? "A" : "B",
    text: bySystem[system] ?? "",
  }));
}

export function buildFeedbackPayload(
  requestId: string,
  preferences: Partial<Record<Criterion, Preference>>,
  state: SelectionState,
): FeedbackRequest {
  const chosen: Record<string, Preference> = {};
  for (const criterion of CRITERIA) {
    const preference = preferences[criterion];
    if (preference !== undefined) {
      chosen[criterion] = preference;
    }
  }
  return {
    v: SCHEMA_VERSION,
    request_id: requestId,
    preferences: chosen,
    attributes_snapshot: attributesFrom(state),
  };
}
