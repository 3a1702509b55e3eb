// Session state for the authoring loop: input -> candidates -> accept/edit
// -> the accepted text becomes the next input. History is append-only for
// the lifetime of the session.

import type { Candidate, ExpansionResponse } from "./types.js";

export interface HistoryEntry {
  accepted: string;
  original: string; // generated text before any user edit
  edited: boolean;
  method: string;
  seed: number;
}

export interface SessionState {
  input: string;
  method: string;
  overrides: Record<string, number>;
  candidateCount: number;
  seed: number;
  response: ExpansionResponse | null;
  history: HistoryEntry[];
  error: string | null;
  busy: boolean;
}

export function newSession(): SessionState {
  return {
    input: "",
    method: "parabola_c",
    overrides: {},
    candidateCount: 3,
    seed: 0,
    response: null,
    history: [],
    error: null,
    busy: false,
  };
}

export function setResponse(session: SessionState, response: ExpansionResponse): SessionState {
  return { ...session, response, error: null, busy: false };
}

export function setError(session: SessionState, message: string): SessionState {
  // the previous candidates stay on screen; only the banner changes
  return { ...session, error: message, busy: false };
}

/** Accept a candidate (optionally edited); it becomes the next input. */
export function acceptCandidate(
  session: SessionState,
  candidate: Candidate,
  editedText?: string,
): SessionState {
  const accepted = editedText !== undefined && editedText.trim() !== ""
    ? editedText.trim()
    : candidate.text;
  const entry: HistoryEntry = {
    accepted,
    original: candidate.text,
    edited: accepted !== candidate.text,
    method: session.response?.method ?? session.method,
    seed: candidate.seed,
  };
  return {
    ...session,
    input: accepted,
    history: [...session.history, entry],
    response: null,
  };
}
