// Screening workbench: queue -> review -> progress, fully keyboard-driven.
// All mutations go through the service API; the view re-renders from state
// that mirrors the last server acknowledgment.

import {
  ApiError,
  getCandidates,
  getProgress,
  getQueue,
  postDecision,
  reopenSession,
} from "./api.js";
import { segmentText, unmatchedFeatures } from "./highlight.js";
import {
  applyOptimistic,
  moveCursor,
  nextUndecided,
  reconcile,
  reviewStateFrom,
  revertPending,
  type ReviewState,
} from "./state.js";
import type { CandidatesPage, DecisionKind, Progress } from "./types.js";

const root = document.getElementById("app") as HTMLElement;

let review: ReviewState | null = null;
let page: CandidatesPage | null = null;

// ---------------------------------------------------------------------------
// Small DOM helpers

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function toast(message: string): void {
  const node = el("div", "toast", message);
  document.body.appendChild(node);
  setTimeout(() => node.remove(), 4000);
}

function fmtScore(score: number): string {
  return score.toPrecision(4);
}

// ---------------------------------------------------------------------------
// Queue view

async function renderQueue(): Promise<void> {
  review = null;
  root.replaceChildren(el("p", "muted", "Loading queue…"));
  let entries;
  try {
    entries = await getQueue();
  } catch (err) {
    root.replaceChildren(el("p", "error", `Cannot reach the service: ${String(err)}`));
    return;
  }
  const view = el("section", "queue");
  view.appendChild(el("h2", undefined, "Screening queue"));

  const opener = el("form", "opener");
  const input = el("input") as HTMLInputElement;
  input.placeholder = "Open a registration (NCT number)…";
  const button = el("button", undefined, "Open");
  opener.append(input, button);
  opener.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const id = input.value.trim();
    if (id) location.hash = `#/review/${id}`;
  });
  view.appendChild(opener);

  if (entries.length === 0) {
    view.appendChild(
      el(
        "p",
        "muted",
        "Nothing pending. Open a registration above to start screening its ranked candidates.",
      ),
    );
  } else {
    const table = el("table", "queue-table");
    const head = el("tr");
    for (const col of ["Registration", "Title", "Decided", "Opened"]) {
      head.appendChild(el("th", undefined, col));
    }
    table.appendChild(head);
    for (const entry of entries) {
      const row = el("tr", "queue-row");
      const link = el("a", undefined, entry.nct_id) as HTMLAnchorElement;
      link.href = `#/review/${entry.nct_id}`;
      const cell = el("td");
      cell.appendChild(link);
      row.appendChild(cell);
      row.appendChild(el("td", undefined, entry.brief_title || "—"));
      row.appendChild(el("td", undefined, `${entry.n_decided}/${entry.n_candidates}`));
      row.appendChild(el("td", "muted", entry.opened_at.slice(0, 19)));
      table.appendChild(row);
    }
    view.appendChild(table);
  }
  root.replaceChildren(view);
}

// ---------------------------------------------------------------------------
// Review view

async function renderReview(nctId: string): Promise<void> {
  root.replaceChildren(el("p", "muted", `Ranking candidates for ${nctId}…`));
  try {
    page = await getCandidates(nctId);
  } catch (err) {
    if (err instanceof ApiError && err.code === "unrankable") {
      root.replaceChildren(
        el("section", "empty-state", ""),
      );
      const section = root.firstChild as HTMLElement;
      section.append(
        el("h2", undefined, nctId),
        el(
          "p",
          "error",
          "This registration has no usable features after vocabulary pruning, so no ranking is defined. It needs manual search instead.",
        ),
      );
      return;
    }
    root.replaceChildren(el("p", "error", String(err)));
    return;
  }
  review = reviewStateFrom(page);
  paintReview();
}

function paintReview(): void {
  if (!review || !page) return;
  const state = review;
  const reg = page.registration;
  const view = el("section", "review");

  const left = el("aside", "registration-panel");
  left.append(
    el("h2", undefined, reg.nct_id),
    el("h3", undefined, reg.brief_title || reg.official_title),
  );
  if (reg.official_title && reg.official_title !== reg.brief_title) {
    left.appendChild(el("p", "muted", reg.official_title));
  }
  const facts = el("dl", "facts");
  const fact = (label: string, value: string | number | null) => {
    facts.append(el("dt", undefined, label), el("dd", undefined, String(value ?? "—")));
  };
  fact("Status", reg.overall_status);
  fact("Study type", reg.study_type);
  fact("Phase", reg.phase);
  fact("Enrollment", reg.enrollment);
  fact("Received", reg.received_date);
  fact("Completed", reg.completion_date);
  fact("Conditions", reg.conditions.join(", ") || null);
  left.appendChild(facts);
  if (reg.brief_summary) {
    left.appendChild(el("p", "summary", reg.brief_summary));
  }
  left.appendChild(el("h4", undefined, "Before confirming"));
  const checklist = el("ul", "checklist");
  for (const item of state.checklist) checklist.appendChild(el("li", undefined, item));
  left.appendChild(checklist);
  left.appendChild(
    el(
      "p",
      "muted keys",
      "Keys: j/k move · c confirm · x reject · u unsure · n next undecided",
    ),
  );

  const right = el("div", "candidates");
  const banner = el("div", state.status === "closed" ? "banner closed" : "banner");
  banner.textContent =
    state.status === "closed"
      ? "Session closed: a candidate was confirmed. Press r to reopen, or return to the queue."
      : `Screening ${state.cards.length} candidates (best first).`;
  right.appendChild(banner);

  state.cards.forEach((card, i) => {
    const node = el("article", "card");
    if (i === state.cursor) node.classList.add("active");
    const mark = card.pending
      ? `${card.pending}?`
      : card.decision
        ? card.decision
        : "";
    if (card.decision) node.classList.add(card.decision);
    if (card.pending) node.classList.add("pending");

    const header = el("header");
    header.append(
      el("span", "rank", `#${card.rank}`),
      el("span", "pmid", `PMID ${card.pmid}`),
      el("span", "score", fmtScore(card.score)),
      el("span", "decision-mark", mark),
    );
    node.appendChild(header);

    const title = el("h3");
    for (const segment of segmentText(card.title, card.sharedFeatures)) {
      const span = el("span", segment.shared ? "shared" : undefined, segment.text);
      title.appendChild(span);
    }
    node.appendChild(title);

    if (card.publicationDate) {
      node.appendChild(el("p", "muted", `Published ${card.publicationDate}`));
    }
    const abstract = el("p", "abstract");
    for (const segment of segmentText(card.abstractSnippet, card.sharedFeatures)) {
      abstract.appendChild(el("span", segment.shared ? "shared" : undefined, segment.text));
    }
    node.appendChild(abstract);

    const concepts = unmatchedFeatures(
      `${card.title} ${card.abstractSnippet}`,
      card.sharedFeatures,
    );
    if (concepts.length > 0) {
      const chips = el("p", "chips");
      chips.appendChild(el("span", "muted", "Shared features: "));
      for (const c of concepts.slice(0, 12)) chips.appendChild(el("code", "chip", c));
      node.appendChild(chips);
    }

    const actions = el("p", "actions");
    for (const [label, decision] of [
      ["Confirm", "confirmed"],
      ["Reject", "rejected"],
      ["Unsure", "unsure"],
    ] as const) {
      const button = el("button", decision, label);
      button.addEventListener("click", () => void submit(card.pmid, decision));
      actions.appendChild(button);
    }
    node.appendChild(actions);
    node.addEventListener("click", () => {
      if (review) {
        review = { ...review, cursor: i };
        paintReview();
      }
    });
    right.appendChild(node);
  });

  view.append(left, right);
  root.replaceChildren(view);
  const active = root.querySelector(".card.active");
  if (active) active.scrollIntoView({ block: "nearest" });
}

async function submit(pmid: string, decision: DecisionKind): Promise<void> {
  if (!review) return;
  const nctId = review.nctId;
  review = applyOptimistic(review, pmid, decision);
  paintReview();
  try {
    const session = await postDecision(nctId, pmid, decision);
    if (!review || review.nctId !== nctId) return;
    review = reconcile(review, session);
    review = { ...review, cursor: nextUndecided(review, review.cursor) };
  } catch (err) {
    if (!review || review.nctId !== nctId) return;
    review = revertPending(review, pmid);
    if (err instanceof ApiError && err.code === "conflict") {
      toast("Session is closed; press r to reopen it first.");
    } else {
      toast(String(err));
    }
  }
  paintReview();
}

async function handleReviewKey(key: string): Promise<void> {
  if (!review) return;
  switch (key) {
    case "j":
      review = moveCursor(review, 1);
      paintReview();
      break;
    case "k":
      review = moveCursor(review, -1);
      paintReview();
      break;
    case "n":
      review = { ...review, cursor: nextUndecided(review, review.cursor) };
      paintReview();
      break;
    case "c":
    case "x":
    case "u": {
      const card = review.cards[review.cursor];
      if (!card) return;
      const decision: DecisionKind =
        key === "c" ? "confirmed" : key === "x" ? "rejected" : "unsure";
      await submit(card.pmid, decision);
      break;
    }
    case "r": {
      const session = await reopenSession(review.nctId);
      review = reconcile(review, session);
      paintReview();
      break;
    }
    default:
  }
}

// ---------------------------------------------------------------------------
// Progress view

async function renderProgress(): Promise<void> {
  review = null;
  root.replaceChildren(el("p", "muted", "Loading progress…"));
  let progress: Progress;
  try {
    progress = await getProgress();
  } catch (err) {
    root.replaceChildren(el("p", "error", String(err)));
    return;
  }
  const view = el("section", "progress");
  view.appendChild(el("h2", undefined, "Screening progress"));
  const facts = el("dl", "facts");
  const fact = (label: string, value: number) => {
    facts.append(el("dt", undefined, label), el("dd", undefined, String(value)));
  };
  fact("Open sessions", progress.sessions.open);
  fact("Closed sessions", progress.sessions.closed);
  fact("Decisions recorded", progress.decisions.total);
  fact("Confirmed links", progress.confirmed_links);
  fact("Rejected", progress.decisions.rejected);
  fact("Unsure", progress.decisions.unsure);
  view.appendChild(facts);
  view.appendChild(el("h3", undefined, "Confirmed links found within the first N candidates"));
  view.appendChild(confirmedWithinChart(progress));
  root.replaceChildren(view);
}

function confirmedWithinChart(progress: Progress): SVGSVGElement {
  const points = Object.entries(progress.confirmed_within)
    .map(([n, count]) => [Number(n), count] as const)
    .sort((a, b) => a[0] - b[0]);
  const width = 460;
  const height = 180;
  const pad = 34;
  const maxY = Math.max(1, progress.confirmed_links);
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "chart");
  const xs = (i: number) => pad + (i * (width - 2 * pad)) / Math.max(1, points.length - 1);
  const ys = (v: number) => height - pad - (v * (height - 2 * pad)) / maxY;
  let d = "";
  points.forEach(([, count], i) => {
    d += `${i === 0 ? "M" : "L"}${xs(i)},${ys(count)}`;
  });
  const path = document.createElementNS("http://www.w3.org/2000/svg", "path");
  path.setAttribute("d", d || "M0,0");
  path.setAttribute("class", "chart-line");
  svg.appendChild(path);
  points.forEach(([n, count], i) => {
    const label = document.createElementNS("http://www.w3.org/2000/svg", "text");
    label.setAttribute("x", String(xs(i)));
    label.setAttribute("y", String(height - 10));
    label.setAttribute("text-anchor", "middle");
    label.textContent = `≤${n}`;
    svg.appendChild(label);
    const value = document.createElementNS("http://www.w3.org/2000/svg", "text");
    value.setAttribute("x", String(xs(i)));
    value.setAttribute("y", String(ys(count) - 6));
    value.setAttribute("text-anchor", "middle");
    value.textContent = String(count);
    svg.appendChild(value);
  });
  return svg;
}

// ---------------------------------------------------------------------------
// Routing

async function route(): Promise<void> {
  const hash = location.hash || "#/queue";
  const reviewMatch = /^#\/review\/(.+)$/.exec(hash);
  if (reviewMatch && reviewMatch[1]) {
    await renderReview(decodeURIComponent(reviewMatch[1]));
  } else if (hash === "#/progress") {
    await renderProgress();
  } else {
    await renderQueue();
  }
}

window.addEventListener("hashchange", () => void route());
window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement || ev.target instanceof HTMLTextAreaElement) return;
  if (ev.metaKey || ev.ctrlKey || ev.altKey) return;
  void handleReviewKey(ev.key);
});

void route();
