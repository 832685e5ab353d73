// Wire types for the screening service API.

export type DecisionKind = "confirmed" | "rejected" | "unsure";

export interface MethodConfig {
  representation: string;
  scheme: string;
  measure: string;
}

export interface DecisionPayload {
  pmid: string;
  decision: DecisionKind;
  decided_at: string;
  note: string | null;
}

export interface SessionPayload {
  nct_id: string;
  config: MethodConfig;
  k: number;
  status: "open" | "closed";
  opened_at: string;
  candidates: string[];
  decisions: Record<string, DecisionPayload>;
  confirmed_pmid: string | null;
}

export interface RegistrationPanel {
  nct_id: string;
  brief_title: string;
  official_title: string;
  brief_summary: string;
  conditions: string[];
  received_date: string | null;
  completion_date: string | null;
  study_type: string;
  phase: string | null;
  enrollment: number | null;
  overall_status: string;
}

export interface CandidatePayload {
  rank: number;
  pmid: string;
  score: number;
  title: string;
  abstract_snippet: string;
  publication_date: string | null;
  shared_features: string[];
  decision: DecisionPayload | null;
}

export interface CandidatesPage {
  nct_id: string;
  config: MethodConfig;
  k: number;
  registration: RegistrationPanel;
  checklist: string[];
  session: SessionPayload;
  candidates: CandidatePayload[];
}

export interface QueueEntry {
  nct_id: string;
  status: "open" | "closed";
  opened_at: string;
  k: number;
  n_candidates: number;
  n_decided: number;
  confirmed_pmid: string | null;
  brief_title: string;
}

export interface Progress {
  sessions: { open: number; closed: number; total: number };
  decisions: { confirmed: number; rejected: number; unsure: number; total: number };
  confirmed_links: number;
  confirmed_within: Record<string, number>;
  audit_events: number;
}

export interface ConfirmedLink {
  nct_id: string;
  pmid: string;
  decided_at: string;
}
