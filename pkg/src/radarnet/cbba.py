"""Decentralized two-round bundle auction with consensus over winner vectors.

Every radar keeps two belief sets, one per role. The MAIN round gets
targets tracked at all; the OPTIONAL round adds a second radar to shrink
the fused uncertainty. Per tick each agent refreshes and extends its
bundles greedily under the diminishing bias (a bid is the raw utility
divided by the bundle size at insertion), then one synchronous consensus
exchange per role reconciles the winner vectors along the communication
graph. Auctions never stop; they simply rerun every tick with fresh
utilities.

Beliefs per role and target: y (winning bid), z (winner id or None),
e (payload attached to the winning MAIN bid, normally the winner's
uncertainty ellipse) plus per-agent timestamps s used to arbitrate stale
third-party information. Timestamps advance monotonically every message
and are deliberately excluded from the fixed-point test.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from .cop import Allocation, ContractError, CopInstance
from .geometry import CovEllipse
from .tracking import RadarConfig, TrackState


class Role(str, Enum):
    MAIN = "main"
    OPTIONAL = "optional"


Stamp = tuple[int, int]  # (tick, per-agent sequence)
ZERO_STAMP: Stamp = (-1, -1)


class BeliefState:
    """One agent's knowledge for one role.

    bundle maps each claimed target to the bid denominator that was in
    force when it was inserted (the bundle size including it); iterating
    its keys gives the claimed target set. den_floor remembers the largest
    denominator ever used per target: re-insertions never price above an
    earlier announcement, which keeps every agent's bid sequence per
    target non-increasing (the diminishing-marginal-gain property the
    consensus convergence argument needs).
    """

    __slots__ = ("role", "y", "z", "s", "e", "bundle", "loads", "den_floor")

    def __init__(self, role: Role, target_ids: Iterable[int], agent_ids: Iterable[int]):
        self.role = role
        self.y: dict[int, float] = {j: 0.0 for j in sorted(target_ids)}
        self.z: dict[int, int | None] = {j: None for j in self.y}
        self.s: dict[int, Stamp] = {a: ZERO_STAMP for a in sorted(agent_ids)}
        self.e: dict[int, object] = {}
        self.bundle: dict[int, int] = {}
        self.loads: dict[int, Fraction] = {}
        self.den_floor: dict[int, int] = {}


@dataclass(frozen=True)
class ConsensusMessage:
    sender: int
    role: Role
    y: dict
    z: dict
    s: dict
    e: dict
    tick: int


class AgentState:
    """A radar agent: its tracks, two role beliefs, and an exact load ledger."""

    def __init__(self, radar: RadarConfig, target_ids: Iterable[int], agent_ids: Iterable[int]):
        self.radar = radar
        self.id = radar.id
        self.tracks: dict[int, TrackState] = {}
        self.main = BeliefState(Role.MAIN, target_ids, agent_ids)
        self.optional = BeliefState(Role.OPTIONAL, target_ids, agent_ids)
        self.spent_main = Fraction(0)
        self.spent_optional = Fraction(0)
        self.dropped_messages = 0
        self._seq = 0

    def belief(self, role: Role) -> BeliefState:
        return self.main if role is Role.MAIN else self.optional

    def remaining_budget(self) -> Fraction:
        return self.radar.budget - self.spent_main - self.spent_optional


@dataclass
class UtilityTable:
    """Per-tick utilities driving one round of bidding.

    main[(i, j)] is radar i's single-radar utility for target j (absent
    or <= 0 means i cannot bid on j). payload[(i, j)] is what i attaches
    to a winning MAIN bid, normally its predicted ellipse. pair computes
    the raw utility bidder k ADDS by joining main winner w on j, i.e. the
    pair utility minus what the winner already provides alone; a bidder
    that improves nothing bids nothing, so budget is never spent on
    overlap that is already covered.
    """

    main: dict
    payload: dict
    pair: Callable[[int, object, int, int], float]
    gamma: Mapping
    target_ids: tuple
    agent_ids: tuple

    @classmethod
    def from_instance(cls, inst: CopInstance) -> "UtilityTable":
        """Static table driven by a fixed utility tensor; payloads are winner ids."""
        main = {(i, j): inst.utility(i, i, j) for i in inst.radar_ids for j in inst.target_ids}
        payload = {key: key[0] for key in main}
        return cls(
            main=main,
            payload=payload,
            pair=lambda winner, _pl, bidder, j: (
                inst.utility(winner, bidder, j) - inst.utility(winner, winner, j)
            ),
            gamma=inst.gamma,
            target_ids=tuple(sorted(inst.target_ids)),
            agent_ids=tuple(sorted(inst.radar_ids)),
        )


def dmg_bid(raw_utility: float, bundle_size_after_insertion: int) -> float:
    """Diminishing bid: raw utility divided by the bundle size including the task."""
    if bundle_size_after_insertion < 1:
        raise ContractError("bundle size after insertion must be at least 1")
    if raw_utility < 0:
        raise ContractError("raw utility must be non-negative")
    return raw_utility / bundle_size_after_insertion


def _release_authored(agent: AgentState, role: Role, j: int) -> None:
    """Voluntary release: refund the load and clear the entries we authored."""
    bel = agent.belief(role)
    bel.bundle.pop(j)
    load = bel.loads.pop(j)
    if role is Role.MAIN:
        agent.spent_main -= load
    else:
        agent.spent_optional -= load
    bel.y[j] = 0.0
    bel.z[j] = None
    bel.e.pop(j, None)


def _release_outbid(agent: AgentState, role: Role, j: int) -> None:
    """Forced release: refund the load; caller installs the winner's entries."""
    bel = agent.belief(role)
    bel.bundle.pop(j)
    load = bel.loads.pop(j)
    if role is Role.MAIN:
        agent.spent_main -= load
    else:
        agent.spent_optional -= load


def _wins(bid: float, j: int, bel: BeliefState, self_id: int) -> bool:
    """Does this bid beat the current known winner? Ties go to the lower id."""
    y = bel.y[j]
    if bid > y:
        return True
    z = bel.z[j]
    return bid == y and z is not None and self_id < z


def _candidate_utilities(agent: AgentState, role: Role, table: UtilityTable) -> dict[int, float]:
    """Raw utilities this agent may bid on right now, keyed by target."""
    out: dict[int, float] = {}
    if role is Role.MAIN:
        for j in table.target_ids:
            c = table.main.get((agent.id, j), 0.0)
            if c > 0.0:
                out[j] = c
        return out
    # Optional bids pair with the known MAIN winner; no winner, no bid. Own
    # MAIN bundle targets are never considered for the optional role.
    for j in table.target_ids:
        if j in agent.main.bundle:
            continue
        winner = agent.main.z.get(j)
        if winner is None or winner == agent.id:
            continue
        c = table.pair(winner, agent.main.e.get(j), agent.id, j)
        if c > 0.0:
            out[j] = c
    return out


def bid_phase(agent: AgentState, role: Role, table: UtilityTable) -> bool:
    """Refresh standing bids, then greedily insert targets while budget allows.

    MAIN insertions may borrow against optional spending: the lowest-bid
    optional tasks are deallocated until the new main task fits. Returns
    whether any belief changed.
    """
    bel = agent.belief(role)
    util = _candidate_utilities(agent, role, table)
    changed = False

    # Standing claims: re-justify with current utilities, release what no
    # longer qualifies (target left coverage, or its main winner vanished).
    for j in sorted(bel.bundle):
        c = util.get(j)
        if c is None:
            _release_authored(agent, role, j)
            changed = True
            continue
        bid = c / bel.bundle[j]
        payload = table.payload.get((agent.id, j)) if role is Role.MAIN else None
        if bel.y[j] != bid or (role is Role.MAIN and bel.e.get(j) != payload):
            bel.y[j] = bid
            if role is Role.MAIN:
                bel.e[j] = payload
            changed = True

    while True:
        n_after = len(bel.bundle) + 1
        if role is Role.MAIN:
            borrowable = agent.radar.budget - agent.spent_main
        else:
            borrowable = agent.remaining_budget()
        best_j = None
        best_bid = 0.0
        best_den = 1
        for j in sorted(util):
            if j in bel.bundle:
                continue
            gamma = table.gamma[(agent.id, j)]
            if gamma > borrowable:
                continue
            den = max(n_after, bel.den_floor.get(j, 1))
            bid = dmg_bid(util[j], den)
            if bid > best_bid and _wins(bid, j, bel, agent.id):
                best_bid = bid
                best_j = j
                best_den = den
        if best_j is None:
            return changed
        gamma = table.gamma[(agent.id, best_j)]
        if role is Role.MAIN and best_j in agent.optional.bundle:
            # Upgrading an optional task to main releases the optional claim.
            _release_authored(agent, Role.OPTIONAL, best_j)
        while role is Role.MAIN and agent.remaining_budget() < gamma:
            victim = min(
                agent.optional.bundle,
                key=lambda t: (agent.optional.y[t], t),
            )
            _release_authored(agent, Role.OPTIONAL, victim)
            changed = True
        bel.bundle[best_j] = best_den
        bel.den_floor[best_j] = best_den
        bel.loads[best_j] = gamma
        if role is Role.MAIN:
            agent.spent_main += gamma
        else:
            agent.spent_optional += gamma
        bel.y[best_j] = best_bid
        bel.z[best_j] = agent.id
        if role is Role.MAIN:
            bel.e[best_j] = table.payload.get((agent.id, best_j))
        changed = True


def compose_message(agent: AgentState, role: Role, tick: int) -> ConsensusMessage:
    """Snapshot of the agent's beliefs, stamped with a fresh sequence number."""
    bel = agent.belief(role)
    agent._seq += 1
    bel.s[agent.id] = (tick, agent._seq)
    return ConsensusMessage(
        sender=agent.id,
        role=role,
        y=dict(bel.y),
        z=dict(bel.z),
        s=dict(bel.s),
        e=dict(bel.e),
        tick=tick,
    )


def _valid_message(agent: AgentState, role: Role, m: ConsensusMessage) -> bool:
    bel = agent.belief(role)
    if m.role is not role or m.sender not in bel.s:
        return False
    if not set(m.y) <= set(bel.y) or not set(m.z) <= set(bel.z):
        return False
    agents = set(bel.s)
    return all(w is None or w in agents for w in m.z.values())


def _ingest(agent: AgentState, role: Role, m: ConsensusMessage) -> bool:
    """Merge one message into the agent's beliefs for the role.

    Per target: (a) a strictly better claim (higher bid, ties to the lower
    winner id) is adopted; (b) losing a bundle member releases it and
    installs the winner; (c) third-party entries are only trusted when the
    sender's timestamp for the claimed winner is newer than ours, a release
    of our believed winner only when the sender knows that winner more
    recently (or is it). Own claims are never overwritten by hearsay:
    every agent is the authority on itself.
    """
    bel = agent.belief(role)
    me = agent.id
    q = m.sender
    changed = False

    def fresher(about: int) -> bool:
        return about == q or m.s.get(about, ZERO_STAMP) > bel.s.get(about, ZERO_STAMP)

    for j in bel.y:
        if j not in m.y:
            continue
        km = m.z.get(j)
        ym = float(m.y[j])
        k = bel.z[j]
        if km == me:
            if k == q:
                # Mutual denial: sender says I hold j, I say the sender does.
                # Both of us are authorities on ourselves; drop to unclaimed.
                bel.y[j] = 0.0
                bel.z[j] = None
                bel.e.pop(j, None)
                changed = True
            continue
        if km is None:
            if k is None or k == me:
                continue
            if fresher(k):
                bel.y[j] = 0.0
                bel.z[j] = None
                bel.e.pop(j, None)
                changed = True
            continue
        if not fresher(km):
            continue
        if km == k:
            # Same winner, fresher info: adopt the re-bid, up or down.
            payload = m.e.get(j)
            if bel.y[j] != ym or (role is Role.MAIN and bel.e.get(j) != payload):
                bel.y[j] = ym
                if role is Role.MAIN:
                    bel.e[j] = payload
                changed = True
            continue
        beats = ym > bel.y[j] or (ym == bel.y[j] and (k is None or km < k))
        if k == me:
            if beats:
                _release_outbid(agent, role, j)
                bel.y[j] = ym
                bel.z[j] = km
                if role is Role.MAIN:
                    bel.e[j] = m.e.get(j)
                changed = True
            continue
        if k == q or k is None or fresher(k) or beats:
            if ym <= 0.0:
                continue
            bel.y[j] = ym
            bel.z[j] = km
            if role is Role.MAIN:
                bel.e[j] = m.e.get(j)
            changed = True

    for a, stamp in m.s.items():
        if a != me and a in bel.s and stamp > bel.s[a]:
            bel.s[a] = stamp
    return changed


def consensus_phase(
    agent: AgentState, role: Role, inbox: list[ConsensusMessage], tick: int = 0
) -> ConsensusMessage:
    """Ingest the inbox (sorted by sender) and return the post-update snapshot."""
    for m in sorted(inbox, key=lambda msg: msg.sender):
        if not _valid_message(agent, role, m):
            agent.dropped_messages += 1
            continue
        _ingest(agent, role, m)
    return compose_message(agent, role, tick)


def extract_allocation(agents: Mapping[int, AgentState]) -> tuple[Allocation, int]:
    """Global allocation implied by the agents' own bundles, for metrics only.

    Each agent contributes exactly what its ledger paid for, so the result
    respects every budget by construction. Conflicting self-claims are
    resolved by higher bid then lower id and counted; optional claims
    whose target has no main winner are dropped.
    """
    main_claims: dict[int, list] = {}
    optional_claims: dict[int, list] = {}
    for i in sorted(agents):
        agent = agents[i]
        for j in agent.main.bundle:
            main_claims.setdefault(j, []).append((-agent.main.y[j], i))
        for j in agent.optional.bundle:
            optional_claims.setdefault(j, []).append((-agent.optional.y[j], i))
    conflicts = 0
    triples = []
    for j, claims in sorted(main_claims.items()):
        claims.sort()
        conflicts += len(claims) - 1
        main_winner = claims[0][1]
        opt = optional_claims.pop(j, None)
        if opt:
            opt.sort()
            conflicts += len(opt) - 1
            optional_winner = opt[0][1]
            if optional_winner == main_winner:
                # Degenerate transient: fall back to single-radar tracking.
                triples.append((main_winner, main_winner, j))
                continue
            triples.append((main_winner, optional_winner, j))
        else:
            triples.append((main_winner, main_winner, j))
    # Optional claims without any main winner carry no utility and are
    # dropped; rival self-claims among them still count as conflicts.
    for claims in optional_claims.values():
        conflicts += len(claims) - 1
    return Allocation.from_triples(triples), conflicts


@dataclass(frozen=True)
class TranscriptRecord:
    tick: int
    phase: str
    sender: int
    receiver: int
    role: str
    y_digest: str
    z_digest: str
    s_digest: str
    e_digest: str

    def to_jsonable(self) -> dict:
        return {
            "kind": "message",
            "tick": self.tick,
            "phase": self.phase,
            "sender": self.sender,
            "receiver": self.receiver,
            "role": self.role,
            "y": self.y_digest,
            "z": self.z_digest,
            "s": self.s_digest,
            "e": self.e_digest,
        }


def _payload_jsonable(payload) -> object:
    if payload is None or isinstance(payload, (int, str)):
        return payload
    if isinstance(payload, CovEllipse):
        c = payload.cov
        return [payload.center.x, payload.center.y, c.m00, c.m01, c.m10, c.m11, payload.k]
    raise TypeError(f"cannot serialize bid payload {payload!r}")


def _digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def message_digests(m: ConsensusMessage) -> tuple[str, str, str, str]:
    return (
        _digest(sorted(m.y.items())),
        _digest(sorted(m.z.items())),
        _digest(sorted(m.s.items())),
        _digest(sorted((j, _payload_jsonable(p)) for j, p in m.e.items())),
    )


class TranscriptRecorder:
    """Collects one record per delivered consensus message."""

    def __init__(self):
        self.records: list[TranscriptRecord] = []

    def deliver(self, m: ConsensusMessage, receiver: int) -> None:
        dy, dz, ds, de = message_digests(m)
        self.records.append(
            TranscriptRecord(m.tick, "consensus", m.sender, receiver, m.role.value, dy, dz, ds, de)
        )


@dataclass
class TickResult:
    allocation: Allocation
    conflicts: int
    changed: bool


def tick(
    agents: Mapping[int, AgentState],
    comm_graph: Mapping[int, Iterable[int]],
    table: UtilityTable,
    tick_index: int,
    track_step: Callable[[AgentState, tuple[int, ...]], None] | None = None,
    recorder: TranscriptRecorder | None = None,
) -> TickResult:
    """One full auction round for every agent.

    MAIN bids, OPTIONAL bids, then one synchronous consensus exchange per
    role: all agents snapshot, then all agents ingest, so ordering cannot
    leak information within a round. track_step, when given, is invoked
    per agent with the targets it currently claims (the tracking stage of
    the per-tick loop).
    """
    ids = sorted(agents)
    changed = False
    for i in ids:
        changed |= bid_phase(agents[i], Role.MAIN, table)
    for i in ids:
        changed |= bid_phase(agents[i], Role.OPTIONAL, table)
    for role in (Role.MAIN, Role.OPTIONAL):
        outgoing = {i: compose_message(agents[i], role, tick_index) for i in ids}
        for i in ids:
            inbox = []
            for n in sorted(set(comm_graph.get(i, ()))):
                if n == i or n not in outgoing:
                    continue
                inbox.append(outgoing[n])
                if recorder is not None:
                    recorder.deliver(outgoing[n], i)
            for m in inbox:
                if not _valid_message(agents[i], role, m):
                    agents[i].dropped_messages += 1
                    continue
                changed |= _ingest(agents[i], role, m)
    if track_step is not None:
        for i in ids:
            agent = agents[i]
            owned = tuple(sorted(set(agent.main.bundle) | set(agent.optional.bundle)))
            track_step(agent, owned)
    allocation, conflicts = extract_allocation(agents)
    return TickResult(allocation, conflicts, changed)


def run_to_fixed_point(
    agents: Mapping[int, AgentState],
    comm_graph: Mapping[int, Iterable[int]],
    table: UtilityTable,
    max_rounds: int,
) -> tuple[int, Allocation, int]:
    """Tick a static instance until beliefs stop changing.

    Returns (rounds that made progress, final allocation, conflicts).
    Raises if no fixed point is reached within max_rounds.
    """
    for rounds in range(max_rounds + 1):
        result = tick(agents, comm_graph, table, rounds)
        if not result.changed:
            return rounds, result.allocation, result.conflicts
    raise RuntimeError(f"no consensus fixed point within {max_rounds} rounds")
