// Pure view-state for one screening session. Decisions render as "saved"
// only after the server acknowledges them; optimistic marks are kept apart
// and either reconciled with the returned session or reverted.

import type {
  CandidatesPage,
  DecisionKind,
  SessionPayload,
} from "./types.js";

export interface CandidateCard {
  rank: number;
  pmid: string;
  score: number;
  title: string;
  abstractSnippet: string;
  publicationDate: string | null;
  sharedFeatures: string[];
  decision: DecisionKind | null; // last server-acknowledged decision
  pending: DecisionKind | null; // optimistic, not yet acknowledged
}

export interface ReviewState {
  nctId: string;
  status: "open" | "closed";
  k: number;
  checklist: string[];
  cards: CandidateCard[];
  cursor: number; // index of the active card
}

export function reviewStateFrom(page: CandidatesPage): ReviewState {
  const cards = page.candidates.map((c) => ({
    rank: c.rank,
    pmid: c.pmid,
    score: c.score,
    title: c.title,
    abstractSnippet: c.abstract_snippet,
    publicationDate: c.publication_date,
    sharedFeatures: c.shared_features,
    decision: c.decision ? c.decision.decision : null,
    pending: null,
  }));
  const state: ReviewState = {
    nctId: page.nct_id,
    status: page.session.status,
    k: page.k,
    checklist: page.checklist,
    cards,
    cursor: 0,
  };
  state.cursor = firstUndecided(state);
  return state;
}

function cardIndex(state: ReviewState, pmid: string): number {
  return state.cards.findIndex((c) => c.pmid === pmid);
}

export function applyOptimistic(
  state: ReviewState,
  pmid: string,
  decision: DecisionKind,
): ReviewState {
  const cards = state.cards.map((c) =>
    c.pmid === pmid ? { ...c, pending: decision } : c,
  );
  return { ...state, cards };
}

export function revertPending(state: ReviewState, pmid: string): ReviewState {
  const cards = state.cards.map((c) => (c.pmid === pmid ? { ...c, pending: null } : c));
  return { ...state, cards };
}

/** Fold the authoritative session into the view; the server always wins. */
export function reconcile(state: ReviewState, session: SessionPayload): ReviewState {
  const cards = state.cards.map((c) => {
    const decided = session.decisions[c.pmid];
    return {
      ...c,
      decision: decided ? decided.decision : null,
      pending: null,
    };
  });
  return { ...state, status: session.status, cards };
}

export function firstUndecided(state: ReviewState): number {
  const i = state.cards.findIndex((c) => c.decision === null && c.pending === null);
  return i === -1 ? 0 : i;
}

/** Next card without a decision, scanning forward from (and excluding) `from`. */
export function nextUndecided(state: ReviewState, from: number): number {
  const n = state.cards.length;
  if (n === 0) return 0;
  for (let step = 1; step <= n; step++) {
    const i = (from + step) % n;
    const card = state.cards[i];
    if (card && card.decision === null && card.pending === null) return i;
  }
  return from;
}

export function moveCursor(state: ReviewState, delta: number): ReviewState {
  if (state.cards.length === 0) return state;
  const cursor = Math.min(Math.max(state.cursor + delta, 0), state.cards.length - 1);
  return { ...state, cursor };
}

export function decisionCounts(state: ReviewState): Record<DecisionKind, number> {
  const counts: Record<DecisionKind, number> = { confirmed: 0, rejected: 0, unsure: 0 };
  for (const card of state.cards) {
    if (card.decision) counts[card.decision] += 1;
  }
  return counts;
}
