"""Raft ordering service as a pure event-driven state machine.

Nodes never spawn threads or read clocks: time arrives as logical tick
events, randomness comes from a per-node seeded RNG, and every transition is
(state, event) -> outputs. That makes whole-cluster runs replayable from a
single seed, which the safety suite leans on heavily.

Log entries carry opaque, canonically-encodable batches; the ordering layer
neither inspects nor interprets them. Election timeouts are drawn from
[10, 20) ticks and leaders heartbeat every 3 ticks. There are no no-op
entries: a leader only advances the commit index through entries of its own
term, so entries from older terms commit when a current-term entry does.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

ELECTION_TIMEOUT_MIN = 10
ELECTION_TIMEOUT_MAX = 20
HEARTBEAT_INTERVAL = 3


class ConsensusError(Exception):
    pass


class NotLeader(ConsensusError):
    """Submission landed on a non-leader; carries a redirect hint."""

    def __init__(self, leader_hint: str | None):
        super().__init__(f"not leader (hint: {leader_hint})")
        self.leader_hint = leader_hint


class NodeRole(str, Enum):
    FOLLOWER = "follower"
    CANDIDATE = "candidate"
    LEADER = "leader"


@dataclass(frozen=True)
class LogEntry:
    term: int
    index: int
    batch: tuple
    created_at: int

    def to_dict(self) -> dict:
        return {
            "term": self.term,
            "index": self.index,
            "batch": list(self.batch),
            "created_at": self.created_at,
        }

    @staticmethod
    def from_dict(data: dict) -> LogEntry:
        return LogEntry(
            term=data["term"],
            index=data["index"],
            batch=tuple(data["batch"]),
            created_at=data["created_at"],
        )


@dataclass(frozen=True)
class RequestVote:
    src: str
    dst: str
    term: int
    last_log_index: int
    last_log_term: int


@dataclass(frozen=True)
class RequestVoteReply:
    src: str
    dst: str
    term: int
    granted: bool


@dataclass(frozen=True)
class AppendEntries:
    src: str
    dst: str
    term: int
    prev_log_index: int
    prev_log_term: int
    entries: tuple[LogEntry, ...]
    leader_commit: int


@dataclass(frozen=True)
class AppendEntriesReply:
    src: str
    dst: str
    term: int
    success: bool
    match_index: int


RaftMessage = RequestVote | RequestVoteReply | AppendEntries | AppendEntriesReply

_VARIANTS = {
    "request_vote": RequestVote,
    "request_vote_reply": RequestVoteReply,
    "append_entries": AppendEntries,
    "append_entries_reply": AppendEntriesReply,
}


def message_to_dict(msg: RaftMessage) -> dict:
    out: dict = {"src": msg.src, "dst": msg.dst, "term": msg.term}
    if isinstance(msg, RequestVote):
        out["variant"] = "request_vote"
        out["last_log_index"] = msg.last_log_index
        out["last_log_term"] = msg.last_log_term
    elif isinstance(msg, RequestVoteReply):
        out["variant"] = "request_vote_reply"
        out["granted"] = msg.granted
    elif isinstance(msg, AppendEntries):
        out["variant"] = "append_entries"
        out["prev_log_index"] = msg.prev_log_index
        out["prev_log_term"] = msg.prev_log_term
        out["entries"] = [e.to_dict() for e in msg.entries]
        out["leader_commit"] = msg.leader_commit
    else:
        out["variant"] = "append_entries_reply"
        out["success"] = msg.success
        out["match_index"] = msg.match_index
    return out


def message_from_dict(data: dict) -> RaftMessage:
    variant = data["variant"]
    cls = _VARIANTS[variant]
    kwargs = {k: v for k, v in data.items() if k != "variant"}
    if variant == "append_entries":
        kwargs["entries"] = tuple(LogEntry.from_dict(e) for e in kwargs["entries"])
    return cls(**kwargs)


class RaftNode:
    """One member of the ordering cluster."""

    def __init__(self, node_id: str, peers: list[str], rng: random.Random):
        self.node_id = node_id
        self.peers = [p for p in peers if p != node_id]
        self.rng = rng
        self.current_term = 0
        self.voted_for: str | None = None
        self.log: list[LogEntry] = []
        self.commit_index = 0
        self.last_applied = 0
        self.role = NodeRole.FOLLOWER
        self.leader_id: str | None = None
        self.votes: set[str] = set()
        self.next_index: dict[str, int] = {}
        self.match_index: dict[str, int] = {}
        self.election_deadline = self._fresh_deadline(0)
        self.heartbeat_due = 0

    # -- timers ---------------------------------------------------------

    def _fresh_deadline(self, now: int) -> int:
        return now + self.rng.randrange(ELECTION_TIMEOUT_MIN, ELECTION_TIMEOUT_MAX)

    def _cluster_size(self) -> int:
        return len(self.peers) + 1

    def _majority(self) -> int:
        return self._cluster_size() // 2 + 1

    def last_log_index(self) -> int:
        return len(self.log)

    def last_log_term(self) -> int:
        return self.log[-1].term if self.log else 0

    # -- transitions ----------------------------------------------------

    def _become_follower(self, term: int) -> None:
        self.current_term = term
        self.role = NodeRole.FOLLOWER
        self.voted_for = None
        self.votes = set()

    def _become_candidate(self, now: int) -> list[RaftMessage]:
        self.current_term += 1
        self.role = NodeRole.CANDIDATE
        self.voted_for = self.node_id
        self.votes = {self.node_id}
        self.leader_id = None
        self.election_deadline = self._fresh_deadline(now)
        return [
            RequestVote(
                src=self.node_id,
                dst=peer,
                term=self.current_term,
                last_log_index=self.last_log_index(),
                last_log_term=self.last_log_term(),
            )
            for peer in self.peers
        ]

    def _become_leader(self, now: int) -> list[RaftMessage]:
        self.role = NodeRole.LEADER
        self.leader_id = self.node_id
        self.next_index = {p: self.last_log_index() + 1 for p in self.peers}
        self.match_index = {p: 0 for p in self.peers}
        self.heartbeat_due = now + HEARTBEAT_INTERVAL
        return [self._append_entries_for(p, now) for p in self.peers]

    def _append_entries_for(self, peer: str, now: int) -> AppendEntries:
        next_idx = self.next_index[peer]
        prev_index = next_idx - 1
        prev_term = self.log[prev_index - 1].term if prev_index >= 1 else 0
        return AppendEntries(
            src=self.node_id,
            dst=peer,
            term=self.current_term,
            prev_log_index=prev_index,
            prev_log_term=prev_term,
            entries=tuple(self.log[next_idx - 1 :]),
            leader_commit=self.commit_index,
        )

    def _drain_committed(self) -> list[LogEntry]:
        if self.last_applied >= self.commit_index:
            return []
        out = self.log[self.last_applied : self.commit_index]
        self.last_applied = self.commit_index
        return out

    # -- public events ---------------------------------------------------

    def tick(self, now: int) -> list[RaftMessage]:
        if self.role is NodeRole.LEADER:
            if now >= self.heartbeat_due:
                self.heartbeat_due = now + HEARTBEAT_INTERVAL
                return [self._append_entries_for(p, now) for p in self.peers]
            return []
        if now >= self.election_deadline:
            if self._cluster_size() == 1:
                self._become_candidate(now)
                return self._become_leader(now)
            return self._become_candidate(now)
        return []

    def submit(self, batch: tuple, now: int) -> tuple[list[RaftMessage], list[LogEntry]]:
        """Append a batch at the leader; returns replication traffic.

        On a single-node cluster the entry commits immediately, so committed
        entries can surface here as well as from handle_message.
        """
        if self.role is not NodeRole.LEADER:
            raise NotLeader(self.leader_id)
        entry = LogEntry(
            term=self.current_term,
            index=self.last_log_index() + 1,
            batch=tuple(batch),
            created_at=now,
        )
        self.log.append(entry)
        if not self.peers:
            self.commit_index = self.last_log_index()
            return [], self._drain_committed()
        self.heartbeat_due = now + HEARTBEAT_INTERVAL
        return [self._append_entries_for(p, now) for p in self.peers], []

    def handle_message(
        self, msg: RaftMessage, now: int
    ) -> tuple[list[RaftMessage], list[LogEntry]]:
        if msg.term > self.current_term:
            self._become_follower(msg.term)
        if isinstance(msg, RequestVote):
            return self._on_request_vote(msg, now), []
        if isinstance(msg, RequestVoteReply):
            return self._on_vote_reply(msg, now)
        if isinstance(msg, AppendEntries):
            return self._on_append_entries(msg, now)
        return self._on_append_reply(msg, now)

    # -- handlers ---------------------------------------------------------

    def _on_request_vote(self, msg: RequestVote, now: int) -> list[RaftMessage]:
        granted = False
        if msg.term == self.current_term and self.voted_for in (None, msg.src):
            up_to_date = msg.last_log_term > self.last_log_term() or (
                msg.last_log_term == self.last_log_term()
                and msg.last_log_index >= self.last_log_index()
            )
            if up_to_date:
                granted = True
                self.voted_for = msg.src
                self.election_deadline = self._fresh_deadline(now)
        return [
            RequestVoteReply(
                src=self.node_id, dst=msg.src, term=self.current_term, granted=granted
            )
        ]

    def _on_vote_reply(
        self, msg: RequestVoteReply, now: int
    ) -> tuple[list[RaftMessage], list[LogEntry]]:
        if (
            self.role is NodeRole.CANDIDATE
            and msg.term == self.current_term
            and msg.granted
        ):
            self.votes.add(msg.src)
            if len(self.votes) >= self._majority():
                return self._become_leader(now), []
        return [], []

    def _on_append_entries(
        self, msg: AppendEntries, now: int
    ) -> tuple[list[RaftMessage], list[LogEntry]]:
        if msg.term < self.current_term:
            return [
                AppendEntriesReply(
                    src=self.node_id,
                    dst=msg.src,
                    term=self.current_term,
                    success=False,
                    match_index=0,
                )
            ], []
        self.role = NodeRole.FOLLOWER
        self.leader_id = msg.src
        self.votes = set()
        self.election_deadline = self._fresh_deadline(now)

        if msg.prev_log_index > 0:
            if msg.prev_log_index > self.last_log_index() or (
                self.log[msg.prev_log_index - 1].term != msg.prev_log_term
            ):
                return [
                    AppendEntriesReply(
                        src=self.node_id,
                        dst=msg.src,
                        term=self.current_term,
                        success=False,
                        match_index=0,
                    )
                ], []

        for entry in msg.entries:
            if entry.index <= self.last_log_index():
                if self.log[entry.index - 1].term != entry.term:
                    del self.log[entry.index - 1 :]
                    self.log.append(entry)
            else:
                self.log.append(entry)
        match = msg.prev_log_index + len(msg.entries)
        if msg.leader_commit > self.commit_index:
            self.commit_index = min(msg.leader_commit, self.last_log_index())
        reply = AppendEntriesReply(
            src=self.node_id,
            dst=msg.src,
            term=self.current_term,
            success=True,
            match_index=match,
        )
        return [reply], self._drain_committed()

    def _on_append_reply(
        self, msg: AppendEntriesReply, now: int
    ) -> tuple[list[RaftMessage], list[LogEntry]]:
        if self.role is not NodeRole.LEADER or msg.term != self.current_term:
            return [], []
        if not msg.success:
            self.next_index[msg.src] = max(1, self.next_index[msg.src] - 1)
            return [self._append_entries_for(msg.src, now)], []
        if msg.match_index > self.match_index[msg.src]:
            self.match_index[msg.src] = msg.match_index
        self.next_index[msg.src] = max(
            self.next_index[msg.src], msg.match_index + 1
        )
        self._advance_commit()
        return [], self._drain_committed()

    def _advance_commit(self) -> None:
        for n in range(self.last_log_index(), self.commit_index, -1):
            if self.log[n - 1].term != self.current_term:
                # Only current-term entries advance the commit index directly.
                break
            replicas = 1 + sum(1 for p in self.peers if self.match_index[p] >= n)
            if replicas >= self._majority():
                self.commit_index = n
                break
