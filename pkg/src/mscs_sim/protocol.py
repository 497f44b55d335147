"""Maneuver negotiation state machine and honest participant policy.

Sessions are keyed by maneuver id and move through a small DAG:

    AWAITING_RESPONSES -> ACTIVE | REJECTED | EXPIRED
    ACTIVE             -> CANCELLED | COMPLETED

Terminal phases absorb every further message. A session becomes ACTIVE only
on a unanimous set of agreements; the first disagreement rejects it
immediately. Completion requires an acknowledgment from every executant.

All transition functions are pure: they take a session value and return a
new one, raising StaleResponse (state unchanged) for messages that arrive
after a terminal phase or from unexpected senders. The enclosing event loop
serializes deliveries; when a cancellation and a completion land in the same
tick, the cancellation is applied first (fail-safe tie-break).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Union

from . import detection
from .geometry import SpaceTimeRegion, region_of, regions_conflict
from .identity import CredentialDirectory
from .mscm import (
    ExecutionStatus,
    Maneuver,
    Mscm,
    MscmType,
    ReasonCode,
    StationId,
    REASON_CONFLICT_WITH_PLAN,
    REASON_IMPLAUSIBLE_REQUEST,
)
from .world import MapModel

RESPONSE_TIMEOUT_MS = 2000
START_GRACE_MS = 5000


class Phase(Enum):
    AWAITING_RESPONSES = "awaiting_responses"
    ACTIVE = "active"
    REJECTED = "rejected"
    CANCELLED = "cancelled"
    COMPLETED = "completed"
    EXPIRED = "expired"


TERMINAL_PHASES = frozenset(
    {Phase.REJECTED, Phase.CANCELLED, Phase.COMPLETED, Phase.EXPIRED})

ALLOWED_TRANSITIONS = {
    Phase.AWAITING_RESPONSES: frozenset(
        {Phase.ACTIVE, Phase.REJECTED, Phase.EXPIRED}),
    Phase.ACTIVE: frozenset({Phase.CANCELLED, Phase.COMPLETED}),
    Phase.REJECTED: frozenset(),
    Phase.CANCELLED: frozenset(),
    Phase.COMPLETED: frozenset(),
    Phase.EXPIRED: frozenset(),
}


class EmptyManeuver(Exception):
    pass


class ExecutantNotAddressed(Exception):
    pass


class NotAddressed(Exception):
    pass


class StaleResponse(Exception):
    """Message for a terminal session or from an unexpected sender."""


class NotSpecialVehicle(Exception):
    pass


class BadCastMode(Exception):
    pass


@dataclass(frozen=True)
class Unicast:
    target: StationId


@dataclass(frozen=True)
class Groupcast:
    beam_center: float  # radians
    beam_width: float
    power: float  # 0..1 fraction of nominal range


@dataclass(frozen=True)
class Broadcast:
    pass


CastMode = Union[Unicast, Groupcast, Broadcast]


@dataclass(frozen=True)
class SessionState:
    maneuver_id: int
    requester: StationId
    participants: frozenset[StationId]
    executants: frozenset[StationId]
    maneuver: Maneuver
    phase: Phase
    created_at: int
    pending: frozenset[StationId]
    acked: frozenset[StationId] = frozenset()


@dataclass(frozen=True)
class AgreementPolicy:
    """Everything an honest participant consults before answering a request.

    The plausibility pre-filter mirrors the message-local detectors; a
    request that any of them would flag is declined outright. When the
    receiver tracks reservations across sessions, ``cross_session_regions``
    carries them and a cross-session conflict also declines the request.
    """

    road: MapModel
    thresholds: "detection.DetectorThresholds"
    transmitter_lane: Optional[int] = None
    avg_neighbor_speed: Optional[float] = None
    signer_is_special: bool = False
    cross_session_regions: Optional[list["detection.StoredReservation"]] = None


def make_maneuver_id(requester: StationId, seq: int) -> int:
    """Combine the requester id and a per-requester counter into 64 bits."""
    return ((requester & 0xFFFFFFFF) << 32) | (seq & 0xFFFFFFFF)


def create_request(requester: StationId, maneuver: Maneuver,
                   destinations: list[StationId], mode: CastMode, now: int,
                   seq: int) -> tuple[SessionState, Mscm]:
    """Open a session and build the unsigned request message for it."""
    if not maneuver.sub_maneuvers:
        raise EmptyManeuver("a request must carry at least one sub-maneuver")
    executants = {sub.executant_id for sub in maneuver.sub_maneuvers}
    dest_set = set(destinations)
    missing = executants - dest_set
    if missing:
        raise ExecutantNotAddressed(
            f"executants {sorted(missing)} absent from destinations")
    if isinstance(mode, Unicast):
        if len(dest_set) != 1 or mode.target not in dest_set:
            raise BadCastMode("unicast requires the single addressed target")
    maneuver_id = make_maneuver_id(requester, seq)
    msg = Mscm(
        msg_type=MscmType.REQUEST,
        source_id=requester,
        msg_timestamp=now,
        maneuver_id=maneuver_id,
        destination_ids=tuple(sorted(dest_set)),
        executant_ids=tuple(sorted(executants)),
        maneuver=maneuver,
    )
    session = SessionState(
        maneuver_id=maneuver_id,
        requester=requester,
        participants=frozenset(dest_set) | {requester},
        executants=frozenset(executants),
        maneuver=maneuver,
        phase=Phase.AWAITING_RESPONSES,
        created_at=now,
        pending=frozenset(dest_set),
    )
    return session, msg


def handle_request(receiver: StationId, own_plan: list[SpaceTimeRegion],
                   req: Mscm, policy: AgreementPolicy, now: int) -> Mscm:
    """Honest participant's answer to a maneuver request."""
    if req.msg_type != MscmType.REQUEST:
        raise ValueError("handle_request expects a request")
    if receiver not in req.destination_ids:
        raise NotAddressed(f"station {receiver} not in destination_ids")

    reason = ReasonCode.agreed()
    flagged = detection.message_plausibility_events(
        req, policy.road, policy.thresholds,
        transmitter_lane=policy.transmitter_lane,
        avg_neighbor_speed=policy.avg_neighbor_speed,
        signer_is_special=policy.signer_is_special,
        reporter=receiver, now=now)
    if flagged:
        reason = ReasonCode.disagree(REASON_IMPLAUSIBLE_REQUEST)
    elif policy.cross_session_regions is not None and detection.cross_session_events(
            req, policy.cross_session_regions, policy.transmitter_lane,
            policy.road.lane_width, reporter=receiver, now=now):
        reason = ReasonCode.disagree(REASON_IMPLAUSIBLE_REQUEST)
    else:
        base_lane = float(policy.transmitter_lane or 0)
        for sub in (req.maneuver.sub_maneuvers if req.maneuver else ()):
            region = region_of(sub, base_lane, policy.road.lane_width)
            if any(regions_conflict(region, mine) for mine in own_plan):
                reason = ReasonCode.disagree(REASON_CONFLICT_WITH_PLAN)
                break

    return Mscm(
        msg_type=MscmType.RESPONSE,
        source_id=receiver,
        msg_timestamp=now,
        maneuver_id=req.maneuver_id,
        destination_ids=(req.source_id,),
        reason_code=reason,
    )


def handle_response(session: SessionState, resp: Mscm) -> SessionState:
    """Fold one response into the session; unanimity activates it."""
    if resp.msg_type != MscmType.RESPONSE:
        raise ValueError("handle_response expects a response")
    if session.phase != Phase.AWAITING_RESPONSES:
        raise StaleResponse(f"session {session.maneuver_id} is {session.phase.value}")
    if resp.maneuver_id != session.maneuver_id:
        raise StaleResponse("response addresses a different session")
    if resp.source_id not in session.pending:
        raise StaleResponse(f"unexpected responder {resp.source_id}")
    if not resp.reason_code.agree:
        return replace(session, phase=Phase.REJECTED,
                       pending=session.pending - {resp.source_id})
    pending = session.pending - {resp.source_id}
    if pending:
        return replace(session, pending=pending)
    return replace(session, phase=Phase.ACTIVE, pending=frozenset())


def handle_execution_msg(session: SessionState, msg: Mscm) -> SessionState:
    """Apply a cancellation or completion ack to an active session."""
    if msg.msg_type not in (MscmType.CANCEL, MscmType.COMPLETE):
        raise ValueError("handle_execution_msg expects cancel or complete")
    if session.phase != Phase.ACTIVE:
        raise StaleResponse(f"session {session.maneuver_id} is {session.phase.value}")
    if msg.maneuver_id != session.maneuver_id:
        raise StaleResponse("message addresses a different session")
    if msg.source_id not in session.participants:
        raise StaleResponse(f"sender {msg.source_id} is not a participant")
    if msg.msg_type == MscmType.CANCEL:
        return replace(session, phase=Phase.CANCELLED)
    acked = session.acked | {msg.source_id}
    if session.executants <= acked:
        return replace(session, phase=Phase.COMPLETED, acked=acked)
    return replace(session, acked=acked)


@dataclass(frozen=True)
class YieldDirective:
    """Instruction to clear the road resources a special vehicle announced."""

    announced_by: StationId
    maneuver: Maneuver


def handle_special_announce(msg: Mscm, directory: CredentialDirectory
                            ) -> YieldDirective:
    """Accept a special-vehicle announcement; no negotiation, no response.

    Value plausibility is deliberately not applied: emergency maneuvers may
    legitimately exceed, for example, the posted speed limit.
    """
    if msg.msg_type != MscmType.SPECIAL_ANNOUNCE:
        raise ValueError("expected a special-vehicle announcement")
    signer = msg.signature.signer_id if msg.signature else msg.source_id
    if not directory.is_special(signer):
        raise NotSpecialVehicle(f"station {signer} lacks the special flag")
    return YieldDirective(announced_by=msg.source_id, maneuver=msg.maneuver)


def expire_sessions(sessions: dict[int, SessionState], now: int,
                    timeout: int = RESPONSE_TIMEOUT_MS,
                    start_grace: int = START_GRACE_MS
                    ) -> tuple[dict[int, SessionState],
                               list[tuple[int, Phase, Phase]]]:
    """Time out stale negotiations and garbage-collect stuck executions.

    Awaiting sessions older than ``timeout`` expire. Active sessions whose
    earliest start time passed more than ``start_grace`` ago are cancelled so
    a wedged execution cannot hold resources forever.
    """
    out: dict[int, SessionState] = {}
    transitions: list[tuple[int, Phase, Phase]] = []
    for mid, session in sessions.items():
        new = session
        if session.phase == Phase.AWAITING_RESPONSES:
            if now - session.created_at > timeout:
                new = replace(session, phase=Phase.EXPIRED)
        elif session.phase == Phase.ACTIVE:
            earliest = min(s.start_time for s in session.maneuver.sub_maneuvers)
            if now > earliest + start_grace:
                new = replace(session, phase=Phase.CANCELLED)
        if new.phase != session.phase:
            transitions.append((mid, session.phase, new.phase))
        out[mid] = new
    return out, transitions
