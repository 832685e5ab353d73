"""Screening sessions over ranked candidates, persisted as an event log.

Every state change is appended to a line-delimited log and fsynced before it
is acknowledged; replaying the log from the start reconstructs the exact
in-memory state, which is what crash recovery does. Decisions are never
deleted: a confirmation that supersedes an earlier one demotes it to
`rejected` with an audit event.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .similarity import MethodConfig

DECISIONS = ("confirmed", "rejected", "unsure")
DEFAULT_SCREENING_DEPTH = 50


class ScreeningError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class InvalidDecisionError(ScreeningError):
    def __init__(self, message: str):
        super().__init__("invalid_argument", message)


class SessionConflictError(ScreeningError):
    def __init__(self, message: str):
        super().__init__("conflict", message)


class SessionNotFoundError(ScreeningError):
    def __init__(self, message: str):
        super().__init__("not_found", message)


@dataclass
class Decision:
    pmid: str
    decision: str
    decided_at: str
    note: str | None = None

    def to_dict(self) -> dict:
        return {
            "pmid": self.pmid,
            "decision": self.decision,
            "decided_at": self.decided_at,
            "note": self.note,
        }


@dataclass
class Session:
    nct_id: str
    config: MethodConfig
    k: int
    candidate_pmids: list[str]
    decisions: dict[str, Decision] = field(default_factory=dict)
    status: str = "open"  # open | closed
    opened_at: str = ""

    @property
    def confirmed_pmid(self) -> str | None:
        for decision in self.decisions.values():
            if decision.decision == "confirmed":
                return decision.pmid
        return None

    def to_dict(self) -> dict:
        return {
            "nct_id": self.nct_id,
            "config": self.config.to_dict(),
            "k": self.k,
            "status": self.status,
            "opened_at": self.opened_at,
            "candidates": list(self.candidate_pmids),
            "decisions": {pmid: d.to_dict() for pmid, d in sorted(self.decisions.items())},
            "confirmed_pmid": self.confirmed_pmid,
        }


@dataclass
class ConfirmedLink:
    nct_id: str
    pmid: str
    decided_at: str

    def to_dict(self) -> dict:
        return {"nct_id": self.nct_id, "pmid": self.pmid, "decided_at": self.decided_at}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class SessionStore:
    """Append-only, single-writer store of screening sessions."""

    def __init__(self, log_path):
        self.log_path = Path(log_path)
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._audit: list[dict] = []
        if self.log_path.exists():
            self._replay()

    # -- persistence ------------------------------------------------------

    def _replay(self) -> None:
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    self._apply(json.loads(line))

    def _append(self, event: dict) -> None:
        # Durable before acknowledged: flush + fsync on every event.
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._apply(event)

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "session_opened":
            self.sessions[event["nct_id"]] = Session(
                nct_id=event["nct_id"],
                config=MethodConfig(**event["config"]),
                k=event["k"],
                candidate_pmids=list(event["candidates"]),
                opened_at=event["ts"],
            )
        elif kind == "decision":
            session = self.sessions[event["nct_id"]]
            session.decisions[event["pmid"]] = Decision(
                pmid=event["pmid"],
                decision=event["decision"],
                decided_at=event["ts"],
                note=event.get("note"),
            )
        elif kind == "decision_demoted":
            session = self.sessions[event["nct_id"]]
            old = session.decisions[event["pmid"]]
            session.decisions[event["pmid"]] = Decision(
                pmid=event["pmid"],
                decision="rejected",
                decided_at=event["ts"],
                note=old.note,
            )
            self._audit.append(event)
        elif kind == "session_closed":
            self.sessions[event["nct_id"]].status = "closed"
        elif kind == "session_reopened":
            self.sessions[event["nct_id"]].status = "open"
            self._audit.append(event)
        else:
            raise ValueError(f"unknown event type in log: {kind!r}")

    # -- operations -------------------------------------------------------

    def get(self, nct_id: str) -> Session:
        session = self.sessions.get(nct_id)
        if session is None:
            raise SessionNotFoundError(f"no screening session for {nct_id}")
        return session

    def open_session(
        self, nct_id: str, config: MethodConfig, k: int, candidate_pmids: list[str]
    ) -> Session:
        """Create the session on first sight; existing sessions are returned as is."""
        with self._lock:
            if nct_id in self.sessions:
                return self.sessions[nct_id]
            self._append(
                {
                    "event": "session_opened",
                    "nct_id": nct_id,
                    "config": config.to_dict(),
                    "k": k,
                    "candidates": candidate_pmids,
                    "ts": _now(),
                }
            )
            return self.sessions[nct_id]

    def record_decision(
        self, nct_id: str, pmid: str, decision: str, note: str | None = None
    ) -> Session:
        """Validate and durably record one decision.

        A `confirmed` decision supersedes any earlier confirmation (demoting
        it to `rejected` with an audit event) and closes the session. A
        confirmation posted to a session that was closed by a previous
        confirmation implicitly reopens it; any other decision on a closed
        session is a conflict.
        """
        if decision not in DECISIONS:
            raise InvalidDecisionError(f"unknown decision {decision!r}")
        with self._lock:
            session = self.get(nct_id)
            if pmid not in session.candidate_pmids:
                raise InvalidDecisionError(
                    f"{pmid} is not a screening candidate for {nct_id}"
                )
            if session.status == "closed":
                if decision != "confirmed":
                    raise SessionConflictError(f"session {nct_id} is closed")
                self._append({"event": "session_reopened", "nct_id": nct_id, "ts": _now()})
            previous = session.confirmed_pmid
            if decision == "confirmed" and previous is not None and previous != pmid:
                self._append(
                    {
                        "event": "decision_demoted",
                        "nct_id": nct_id,
                        "pmid": previous,
                        "from": "confirmed",
                        "to": "rejected",
                        "superseded_by": pmid,
                        "ts": _now(),
                    }
                )
            self._append(
                {
                    "event": "decision",
                    "nct_id": nct_id,
                    "pmid": pmid,
                    "decision": decision,
                    "note": note,
                    "ts": _now(),
                }
            )
            if decision == "confirmed":
                self._append({"event": "session_closed", "nct_id": nct_id, "ts": _now()})
            return session

    def reopen(self, nct_id: str) -> Session:
        with self._lock:
            session = self.get(nct_id)
            if session.status == "open":
                return session
            self._append({"event": "session_reopened", "nct_id": nct_id, "ts": _now()})
            return session

    # -- queries ----------------------------------------------------------

    def confirmed_links(self) -> list[ConfirmedLink]:
        links = []
        for session in self.sessions.values():
            for decision in session.decisions.values():
                if decision.decision == "confirmed":
                    links.append(
                        ConfirmedLink(session.nct_id, decision.pmid, decision.decided_at)
                    )
        return sorted(links, key=lambda l: (l.nct_id, int(l.pmid)))

    def open_queue(self) -> list[Session]:
        """Open sessions, oldest first."""
        open_sessions = [s for s in self.sessions.values() if s.status == "open"]
        return sorted(open_sessions, key=lambda s: (s.opened_at, s.nct_id))

    def progress(self) -> dict:
        by_kind = {kind: 0 for kind in DECISIONS}
        inspected = 0
        confirmed_ranks: list[int] = []
        for session in self.sessions.values():
            inspected += len(session.decisions)
            for decision in session.decisions.values():
                by_kind[decision.decision] += 1
                if decision.decision == "confirmed":
                    confirmed_ranks.append(session.candidate_pmids.index(decision.pmid) + 1)
        open_count = sum(1 for s in self.sessions.values() if s.status == "open")
        thresholds = (1, 5, 10, 20, 50)
        return {
            "sessions": {
                "open": open_count,
                "closed": len(self.sessions) - open_count,
                "total": len(self.sessions),
            },
            "decisions": {**by_kind, "total": inspected},
            "confirmed_links": len(confirmed_ranks),
            "confirmed_within": {
                str(t): sum(1 for r in confirmed_ranks if r <= t) for t in thresholds
            },
            "audit_events": len(self._audit),
        }
