"""Misbehavior detection: plausibility, consistency and protocol checks.

Each detector is a pure function over immutable snapshots; none of them ever
sees ground-truth attribution, and no detector's verdict feeds another's
input. Detectors abstain rather than guess when corroboration is missing
(claims outside perception range, silence that plain packet loss could
explain), which mirrors how some of the attacks under study are genuinely
hard to see.

Every numeric tolerance lives in DetectorThresholds so nothing is buried in
code. Events carry enough evidence to re-derive the verdict from logged
inputs alone.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .geometry import SpaceTimeRegion, footprints_overlap, region_of, regions_conflict
from .mscm import (
    DecodeError,
    ErrorKind,
    LaneSegment,
    Maneuver,
    Mscm,
    MscmType,
    StationId,
    SubManeuver,
)
from .world import Bsm, MapModel, PerceptionSnapshot, lane_exists


class DetectorId(Enum):
    D1_FORMAT_CHECK = "D1"
    D2_TRR_CONSISTENCY = "D2"
    D3_GHOST_VEHICLE = "D3"
    D4_DENIAL_RATE = "D4"
    D5_MAX_SPEED_PLAUSIBILITY = "D5"
    D6_LANE_EXISTENCE = "D6"
    D7_SUB_MANEUVER_OVERLAP = "D7"
    D7X_CROSS_SESSION_OVERLAP = "D7x"
    D8_NON_RESPONSE_EVIDENCE = "D8"
    D9_MIN_SPEED_PLAUSIBILITY = "D9"
    D10_STATIC_FIELD_CONSISTENCY = "D10"
    D11_WIDTH_PLAUSIBILITY = "D11"
    D12_LENGTH_PLAUSIBILITY = "D12"
    D13_TEMPORAL_ORDER = "D13"
    D14_START_BEFORE_TIMESTAMP = "D14"
    D15_DURATION_BOUND = "D15"
    D16_BSM_MSCM_CONSISTENCY = "D16"


#: Non-response evidence (D8) is excluded by default: on a lossy channel a
#: dropped request or response is indistinguishable from a deliberate snub,
#: so the check only runs when a scenario opts in.
DEFAULT_DETECTORS = frozenset(d for d in DetectorId
                              if d != DetectorId.D8_NON_RESPONSE_EVIDENCE)

ALL_DETECTORS = frozenset(DetectorId)


@dataclass(frozen=True)
class DetectorThresholds:
    """Tunable bounds; defaults follow the plausibility anchors in use."""

    max_speed_factor: float = 1.2          # flag above limit * factor
    min_speed_floor_kmh: float = 5.0
    min_speed_fraction: float = 0.25       # of average neighbor speed
    highway_limit_kmh: float = 80.0        # min-speed check applies at/above
    width_tolerance_m: float = 0.2
    length_tolerance_m: float = 0.5
    ghost_tolerance_m: float = 3.0
    denial_window_ms: int = 5000
    denial_threshold: int = 3
    duration_bound_ms: int = 60000
    length_bound_m: float = 30.0
    trajectory_lane_tolerance: float = 1.0
    trajectory_s_tolerance_m: float = 10.0
    static_window_ms: int = 30000
    bsm_window_ms: int = 10000


@dataclass(frozen=True)
class DetectionEvent:
    detector: DetectorId
    suspect: StationId
    message_ref: str
    timestamp: int
    evidence: dict
    reporter: StationId


@dataclass(frozen=True)
class MisbehaviorReport:
    reporter: StationId
    suspect: StationId
    events: tuple[DetectionEvent, ...]
    included_messages: tuple[bytes, ...]
    created_at: int


class MissingEvidence(Exception):
    pass


def message_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


@dataclass(frozen=True)
class StoredReservation:
    """A road-resource claim remembered from another negotiation."""

    maneuver_id: int
    requester: StationId
    executant: StationId
    region: SpaceTimeRegion


@dataclass(frozen=True)
class ResponseRecord:
    timestamp: int
    responder: StationId
    requester: StationId
    agree: bool
    msg_ref: str
    #: Denial of a request the observer itself judged implausible; such
    #: refusals are defensive and do not count toward the denial rate.
    justified: bool = False


@dataclass(frozen=True)
class TrajectoryWatch:
    """An agreed, active sub-maneuver whose execution should show in BSMs."""

    maneuver_id: int
    executant: StationId
    target_lane: float
    s_lo: float
    s_hi: float
    start_time: int
    end_time: int
    msg_ref: str


@dataclass
class DetectionContext:
    """Read-only snapshot a station hands to its detectors.

    Deliberately contains no attack attribution of any kind.
    """

    reporter: StationId
    road: MapModel
    thresholds: DetectorThresholds
    now: int
    active: frozenset[DetectorId] = DEFAULT_DETECTORS
    perception: Optional[PerceptionSnapshot] = None
    observer_s: float = 0.0
    perception_range: float = 100.0
    avg_neighbor_speed: Optional[float] = None
    transmitter_lanes: dict[StationId, int] = field(default_factory=dict)
    bsm_history: dict[StationId, list[tuple[int, Bsm, str]]] = field(
        default_factory=dict)
    mscm_seen: dict[StationId, list[tuple[int, str]]] = field(default_factory=dict)
    response_history: list[ResponseRecord] = field(default_factory=list)
    stored_reservations: list[StoredReservation] = field(default_factory=list)
    trajectory_watches: list[TrajectoryWatch] = field(default_factory=list)
    static_claims: dict[tuple[StationId, StationId], tuple[int, float, str]] = field(
        default_factory=dict)
    special_ids: frozenset[StationId] = frozenset()


@dataclass(frozen=True)
class MessageInput:
    msg_hash: str
    message: Optional[Mscm] = None
    error: Optional[DecodeError] = None


@dataclass(frozen=True)
class BsmInput:
    msg_hash: str
    bsm: Bsm


@dataclass(frozen=True)
class SessionExpiryInput:
    """A negotiation that timed out with participants still pending."""

    maneuver_id: int
    requester: StationId
    pending: frozenset[StationId]
    created_at: int
    expired_at: int


DetectorInput = Union[MessageInput, BsmInput, SessionExpiryInput]


def check_overlap(m: Maneuver, lane_width_m: float = 3.5) -> list[tuple[int, int]]:
    """Indices of sub-maneuver pairs that collide in time and space.

    Footprints are compared in the transmitter's own lane frame, inflated by
    each executant's body; a pair conflicts when the time intervals intersect
    and the footprints share positive area.
    """
    regions = [region_of(sub, 0.0, lane_width_m) for sub in m.sub_maneuvers]
    pairs = []
    for i in range(len(regions)):
        for j in range(i + 1, len(regions)):
            if regions_conflict(regions[i], regions[j]):
                pairs.append((i, j))
    return pairs


def cross_session_events(req: Mscm, stored: list[StoredReservation],
                         transmitter_lane: Optional[int], lane_width_m: float,
                         reporter: StationId, now: int,
                         msg_ref: str = "") -> list[DetectionEvent]:
    """Flag a request whose claim collides with another session's claim."""
    if req.maneuver is None:
        return []
    base = float(transmitter_lane) if transmitter_lane is not None else 0.0
    events = []
    for sub in req.maneuver.sub_maneuvers:
        region = region_of(sub, base, lane_width_m)
        for res in stored:
            if res.maneuver_id == req.maneuver_id:
                continue
            if res.executant == sub.executant_id:
                continue
            if regions_conflict(region, res.region):
                events.append(DetectionEvent(
                    detector=DetectorId.D7X_CROSS_SESSION_OVERLAP,
                    suspect=req.source_id,
                    message_ref=msg_ref,
                    timestamp=now,
                    evidence={
                        "executant": sub.executant_id,
                        "other_maneuver_id": res.maneuver_id,
                        "other_requester": res.requester,
                        "other_executant": res.executant,
                    },
                    reporter=reporter))
    return events


def check_denial_rate(history: list[ResponseRecord], window_ms: int,
                      threshold: int, reporter: StationId, now: int
                      ) -> list[DetectionEvent]:
    """Flag responders that pile up disagreements inside a sliding window.

    Both variants from the protocol-level defense run: too many denials
    overall, and too many aimed at a single requester.
    """
    events = []
    by_responder: dict[StationId, list[ResponseRecord]] = {}
    for rec in history:
        if not rec.agree and not rec.justified:
            by_responder.setdefault(rec.responder, []).append(rec)
    for responder, denials in sorted(by_responder.items()):
        denials.sort(key=lambda r: r.timestamp)
        trigger = _window_trigger(denials, window_ms, threshold)
        scope = "global"
        if trigger is None:
            by_requester: dict[StationId, list[ResponseRecord]] = {}
            for rec in denials:
                by_requester.setdefault(rec.requester, []).append(rec)
            for _, recs in sorted(by_requester.items()):
                trigger = _window_trigger(recs, window_ms, threshold)
                if trigger is not None:
                    scope = "per_requester"
                    break
        if trigger is not None:
            events.append(DetectionEvent(
                detector=DetectorId.D4_DENIAL_RATE,
                suspect=responder,
                message_ref=f"denials:{responder}",
                timestamp=trigger[-1].timestamp,
                evidence={
                    "scope": scope,
                    "count": len(trigger),
                    "window_ms": window_ms,
                    "message_hashes": [r.msg_ref for r in trigger],
                },
                reporter=reporter))
    return events


def _window_trigger(records: list[ResponseRecord], window_ms: int,
                    threshold: int) -> Optional[list[ResponseRecord]]:
    for i in range(len(records) - threshold + 1):
        chunk = records[i:i + threshold]
        if chunk[-1].timestamp - chunk[0].timestamp <= window_ms:
            return chunk
    return None


def check_ghost(msg: Mscm, perception: PerceptionSnapshot, observer_s: float,
                range_m: float, tolerance_m: float, reporter: StationId,
                now: int, msg_ref: str = "") -> list[DetectionEvent]:
    """Flag claimed executants whose reserved corridor is visibly empty.

    A claim is judged only when its whole corridor (inflated by the
    tolerance) lies inside the observer's perception range; anything partly
    out of range gets the benefit of the doubt. Lane is ignored on purpose:
    an executant about to change lanes legitimately sits outside its target
    lane when the request goes out.
    """
    if msg.maneuver is None:
        return []
    events = []
    # The observer is itself a vehicle: a corridor covering its own position
    # is occupied even though perception snapshots exclude the ego vehicle.
    occupied = sorted([v.s for v in perception.observed] + [observer_s])
    for idx, sub in enumerate(msg.maneuver.sub_maneuvers):
        if not isinstance(sub.trr.location, LaneSegment):
            continue
        lo = sub.trr.location.start_s - tolerance_m
        hi = sub.trr.location.end_s + tolerance_m
        if lo < observer_s - range_m or hi > observer_s + range_m:
            continue  # cannot judge what we cannot fully see
        if any(lo <= s <= hi for s in occupied):
            continue
        events.append(DetectionEvent(
            detector=DetectorId.D3_GHOST_VEHICLE,
            suspect=msg.source_id,
            message_ref=msg_ref,
            timestamp=now,
            evidence={
                "claimed_executant": sub.executant_id,
                "sub_index": idx,
                "corridor": [lo, hi],
                "observed_positions": occupied,
            },
            reporter=reporter))
    return events


def sub_plausibility_events(sub: SubManeuver, idx: int, *, road: MapModel,
                            thresholds: DetectorThresholds, msg_timestamp: int,
                            transmitter_lane: Optional[int],
                            avg_neighbor_speed: Optional[float],
                            signer_is_special: bool, suspect: StationId,
                            reporter: StationId, now: int,
                            msg_ref: str = "") -> list[DetectionEvent]:
    """Value-bound checks on one sub-maneuver (detectors D5/D6/D9/D13-D15)."""
    t = thresholds
    events = []

    def hit(detector: DetectorId, **evidence) -> None:
        events.append(DetectionEvent(
            detector=detector, suspect=suspect, message_ref=msg_ref,
            timestamp=now, evidence={"sub_index": idx, **evidence},
            reporter=reporter))

    if sub.max_speed > road.speed_limit * t.max_speed_factor and not signer_is_special:
        hit(DetectorId.D5_MAX_SPEED_PLAUSIBILITY,
            claimed_max_speed=sub.max_speed, speed_limit=road.speed_limit)
    if road.speed_limit >= t.highway_limit_kmh:
        floor = t.min_speed_floor_kmh
        if avg_neighbor_speed is not None:
            floor = max(floor, avg_neighbor_speed * t.min_speed_fraction)
        if sub.min_speed < floor:
            hit(DetectorId.D9_MIN_SPEED_PLAUSIBILITY,
                claimed_min_speed=sub.min_speed, floor=floor,
                avg_neighbor_speed=avg_neighbor_speed)
    if sub.executant_width > road.lane_width:
        hit(DetectorId.D11_WIDTH_PLAUSIBILITY,
            claimed_width=sub.executant_width, lane_width=road.lane_width)
    if sub.executant_length > t.length_bound_m:
        hit(DetectorId.D12_LENGTH_PLAUSIBILITY,
            claimed_length=sub.executant_length, bound=t.length_bound_m)
    if sub.start_time >= sub.end_time:
        hit(DetectorId.D13_TEMPORAL_ORDER,
            start_time=sub.start_time, end_time=sub.end_time)
    if sub.start_time < msg_timestamp:
        hit(DetectorId.D14_START_BEFORE_TIMESTAMP,
            start_time=sub.start_time, msg_timestamp=msg_timestamp)
    if sub.end_time - sub.start_time > t.duration_bound_ms:
        hit(DetectorId.D15_DURATION_BOUND,
            duration_ms=sub.end_time - sub.start_time,
            bound_ms=t.duration_bound_ms)
    if transmitter_lane is not None and isinstance(sub.trr.location, LaneSegment):
        if not lane_exists(road, transmitter_lane, sub.trr.location.lane_offset):
            hit(DetectorId.D6_LANE_EXISTENCE,
                transmitter_lane=transmitter_lane,
                lane_offset=sub.trr.location.lane_offset,
                lane_count=road.lane_count)
    return events


def message_plausibility_events(msg: Mscm, road: MapModel,
                                thresholds: DetectorThresholds, *,
                                transmitter_lane: Optional[int],
                                avg_neighbor_speed: Optional[float],
                                signer_is_special: bool, reporter: StationId,
                                now: int, msg_ref: str = ""
                                ) -> list[DetectionEvent]:
    """All message-local checks for a maneuver-bearing message."""
    if msg.maneuver is None:
        return []
    events = []
    for idx, sub in enumerate(msg.maneuver.sub_maneuvers):
        events.extend(sub_plausibility_events(
            sub, idx, road=road, thresholds=thresholds,
            msg_timestamp=msg.msg_timestamp, transmitter_lane=transmitter_lane,
            avg_neighbor_speed=avg_neighbor_speed,
            signer_is_special=signer_is_special, suspect=msg.source_id,
            reporter=reporter, now=now, msg_ref=msg_ref))
    pairs = check_overlap(msg.maneuver, road.lane_width)
    if pairs:
        events.append(DetectionEvent(
            detector=DetectorId.D7_SUB_MANEUVER_OVERLAP,
            suspect=msg.source_id, message_ref=msg_ref, timestamp=now,
            evidence={"overlapping_pairs": [list(p) for p in pairs]},
            reporter=reporter))
    return events


def check_bsm_consistency(msg: Mscm, ctx: DetectionContext,
                          msg_ref: str = "") -> list[DetectionEvent]:
    """Compare claimed executant dimensions against the executant's beacons."""
    if msg.maneuver is None:
        return []
    t = ctx.thresholds
    events = []
    for idx, sub in enumerate(msg.maneuver.sub_maneuvers):
        history = ctx.bsm_history.get(sub.executant_id)
        if not history:
            continue
        ts, bsm, _ = history[-1]
        if ctx.now - ts > t.bsm_window_ms:
            continue
        width_gap = abs(sub.executant_width - bsm.width)
        length_gap = abs(sub.executant_length - bsm.length)
        if width_gap > t.width_tolerance_m or length_gap > t.length_tolerance_m:
            events.append(DetectionEvent(
                detector=DetectorId.D16_BSM_MSCM_CONSISTENCY,
                suspect=msg.source_id, message_ref=msg_ref, timestamp=ctx.now,
                evidence={
                    "sub_index": idx,
                    "executant": sub.executant_id,
                    "claimed": [sub.executant_width, sub.executant_length],
                    "beaconed": [bsm.width, bsm.length],
                },
                reporter=ctx.reporter))
    return events


def check_static_consistency(msg: Mscm, ctx: DetectionContext,
                             msg_ref: str = "") -> list[DetectionEvent]:
    """Flag a pseudonym whose width claims drift between its own messages."""
    if msg.maneuver is None:
        return []
    t = ctx.thresholds
    events = []
    for sub in msg.maneuver.sub_maneuvers:
        prior = ctx.static_claims.get((msg.source_id, sub.executant_id))
        if prior is None:
            continue
        prior_ts, prior_width, prior_ref = prior
        if (ctx.now - prior_ts <= t.static_window_ms
                and sub.executant_width != prior_width):
            events.append(DetectionEvent(
                detector=DetectorId.D10_STATIC_FIELD_CONSISTENCY,
                suspect=msg.source_id, message_ref=msg_ref,
                timestamp=ctx.now,
                evidence={
                    "executant": sub.executant_id,
                    "widths": [prior_width, sub.executant_width],
                    "earlier_ref": prior_ref,
                },
                reporter=ctx.reporter))
    return events


def record_static_claims(msg: Mscm, ctx: DetectionContext, msg_ref: str) -> None:
    """Remember the width claims of a processed message for later checks.

    Called after the detector pass so the pass itself stays read-only.
    """
    if msg.maneuver is None:
        return
    for sub in msg.maneuver.sub_maneuvers:
        ctx.static_claims[(msg.source_id, sub.executant_id)] = (
            ctx.now, sub.executant_width, msg_ref)


def check_trajectory(bsm: Bsm, watches: list[TrajectoryWatch],
                     thresholds: DetectorThresholds, reporter: StationId,
                     now: int, msg_ref: str = "") -> list[DetectionEvent]:
    """Flag an executant whose beacons leave the corridor it agreed to."""
    t = thresholds
    events = []
    for watch in watches:
        if watch.executant != bsm.source_id:
            continue
        if not watch.start_time <= bsm.timestamp <= watch.end_time:
            continue
        s_ok = (watch.s_lo - t.trajectory_s_tolerance_m <= bsm.s
                <= watch.s_hi + t.trajectory_s_tolerance_m)
        lane_ok = abs(bsm.lane - watch.target_lane) <= t.trajectory_lane_tolerance
        if not (s_ok and lane_ok):
            events.append(DetectionEvent(
                detector=DetectorId.D16_BSM_MSCM_CONSISTENCY,
                suspect=bsm.source_id,
                message_ref=watch.msg_ref,
                timestamp=now,
                evidence={
                    "kind": "trajectory",
                    "maneuver_id": watch.maneuver_id,
                    "bsm_ref": msg_ref,
                    "bsm_position": [bsm.lane, bsm.s],
                    "corridor_s": [watch.s_lo, watch.s_hi],
                    "target_lane": watch.target_lane,
                },
                reporter=reporter))
    return events


def check_nonresponse(expiry: SessionExpiryInput, suspect: StationId,
                      transmissions: list[tuple[int, str]], reporter: StationId,
                      now: int) -> Optional[DetectionEvent]:
    """Evidence-gated silence check for one pending participant.

    Fires only when the suspect demonstrably transmitted inside the response
    window; a station that sent nothing might simply have been out of range.
    """
    in_window = [(ts, ref) for ts, ref in transmissions
                 if expiry.created_at <= ts <= expiry.expired_at]
    if not in_window:
        return None
    return DetectionEvent(
        detector=DetectorId.D8_NON_RESPONSE_EVIDENCE,
        suspect=suspect,
        message_ref=f"session:{expiry.maneuver_id}:{suspect}",
        timestamp=now,
        evidence={
            "maneuver_id": expiry.maneuver_id,
            "requester": expiry.requester,
            "window": [expiry.created_at, expiry.expired_at],
            "message_hashes": [ref for _, ref in in_window],
        },
        reporter=reporter)


def run_detectors(item: DetectorInput, ctx: DetectionContext
                  ) -> list[DetectionEvent]:
    """Evaluate every active detector that applies to one input.

    Message inputs drive the format, plausibility, ghost, overlap and
    consistency checks; beacon inputs drive trajectory consistency; expiry
    inputs drive the non-response check. The event list is deterministic
    given the context snapshot.
    """
    events: list[DetectionEvent] = []
    active = ctx.active

    if isinstance(item, MessageInput):
        if item.error is not None:
            err = item.error
            if err.kind == ErrorKind.TRR_MISMATCH:
                detector = DetectorId.D2_TRR_CONSISTENCY
            else:
                detector = DetectorId.D1_FORMAT_CHECK
            if detector in active:
                events.append(DetectionEvent(
                    detector=detector,
                    suspect=err.claimed_signer,
                    message_ref=item.msg_hash,
                    timestamp=ctx.now,
                    evidence={"error_kind": err.kind.value,
                              "field": err.field_name or ""},
                    reporter=ctx.reporter))
            return events

        msg = item.message
        if msg is None or msg.maneuver is None:
            if (msg is not None and msg.msg_type == MscmType.RESPONSE
                    and DetectorId.D4_DENIAL_RATE in active):
                events.extend(check_denial_rate(
                    ctx.response_history, ctx.thresholds.denial_window_ms,
                    ctx.thresholds.denial_threshold, ctx.reporter, ctx.now))
            return events

        transmitter_lane = ctx.transmitter_lanes.get(msg.source_id)
        signer = msg.signature.signer_id if msg.signature else msg.source_id
        local = message_plausibility_events(
            msg, ctx.road, ctx.thresholds,
            transmitter_lane=transmitter_lane,
            avg_neighbor_speed=ctx.avg_neighbor_speed,
            signer_is_special=signer in ctx.special_ids,
            reporter=ctx.reporter, now=ctx.now, msg_ref=item.msg_hash)
        events.extend(e for e in local if e.detector in active)
        if DetectorId.D3_GHOST_VEHICLE in active and ctx.perception is not None:
            events.extend(check_ghost(
                msg, ctx.perception, ctx.observer_s, ctx.perception_range,
                ctx.thresholds.ghost_tolerance_m, ctx.reporter, ctx.now,
                item.msg_hash))
        if DetectorId.D7X_CROSS_SESSION_OVERLAP in active:
            events.extend(cross_session_events(
                msg, ctx.stored_reservations, transmitter_lane,
                ctx.road.lane_width, ctx.reporter, ctx.now, item.msg_hash))
        if DetectorId.D16_BSM_MSCM_CONSISTENCY in active:
            events.extend(check_bsm_consistency(msg, ctx, item.msg_hash))
        if DetectorId.D10_STATIC_FIELD_CONSISTENCY in active:
            events.extend(check_static_consistency(msg, ctx, item.msg_hash))
        return events

    if isinstance(item, BsmInput):
        if DetectorId.D16_BSM_MSCM_CONSISTENCY in active:
            events.extend(check_trajectory(
                item.bsm, ctx.trajectory_watches, ctx.thresholds,
                ctx.reporter, ctx.now, item.msg_hash))
        return events

    if isinstance(item, SessionExpiryInput):
        if DetectorId.D8_NON_RESPONSE_EVIDENCE not in active:
            return events
        for suspect in sorted(item.pending):
            transmissions = [(ts, ref) for ts, _, ref in
                             ctx.bsm_history.get(suspect, [])]
            transmissions.extend(ctx.mscm_seen.get(suspect, []))
            event = check_nonresponse(item, suspect, transmissions,
                                      ctx.reporter, ctx.now)
            if event is not None:
                events.append(event)
        return events

    raise TypeError(f"unsupported detector input {item!r}")


def generate_report(events: list[DetectionEvent],
                    evidence_store: dict[str, bytes], reporter: StationId,
                    now: int) -> MisbehaviorReport:
    """Bundle one suspect's events with the signed messages behind them."""
    if not events:
        raise ValueError("a report needs at least one event")
    suspects = {e.suspect for e in events}
    if len(suspects) != 1:
        raise ValueError("a report covers exactly one suspect")
    refs: list[str] = []
    for event in events:
        hashes = event.evidence.get("message_hashes")
        if hashes:
            refs.extend(hashes)
        elif event.message_ref and ":" not in event.message_ref:
            refs.append(event.message_ref)
    included = []
    seen = set()
    for ref in refs:
        if ref in seen:
            continue
        seen.add(ref)
        data = evidence_store.get(ref)
        if data is None:
            raise MissingEvidence(f"message {ref} absent from evidence store")
        included.append(data)
    return MisbehaviorReport(
        reporter=reporter,
        suspect=next(iter(suspects)),
        events=tuple(events),
        included_messages=tuple(included),
        created_at=now)
