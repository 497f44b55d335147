"""Attack catalog and injection logic for the internal attacker.

Sixteen attack arms cover malformed encodings, protocol abuse and implausible
or inconsistent field values. Each arm is parameterized, and everything an
injector emits is tagged attack-originated in the hidden ground-truth log so
runs can be scored; detectors never see that tag.

The attacker is an authenticated network member: it owns valid pseudonym
credentials and its emissions are properly signed, except for the two
malformed-encoding arms which ship deliberately undecodable bytes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Union

from .detection import DetectorId
from .geometry import SpaceTimeRegion
from .identity import LongTermId, PseudonymCredential
from .mscm import (
    LaneSegment,
    Maneuver,
    ManeuverStatus,
    MismatchTrrTag,
    Mscm,
    MscmType,
    OmitField,
    ReasonCode,
    StationId,
    StructuralMutation,
    SubManeuver,
    TargetRoadResource,
    TrrType,
    REASON_UNSPECIFIED,
)
from .protocol import Broadcast, CastMode, Unicast, make_maneuver_id
from .risk import CriterionRating
from .world import MapModel, PerceptionSnapshot, VehicleState


class AttackId(Enum):
    A1_OMIT_MANDATORY_FIELD = "A1"
    A2_TRR_TYPE_MISMATCH = "A2"
    A3_GHOST_NEGOTIATION = "A3"
    A4_DENY_ALL_REQUESTS = "A4"
    A5_MAX_SPEED_TOO_HIGH = "A5"
    A6_NONEXISTENT_LANE = "A6"
    A7_OVERLOADED_MANEUVER = "A7"
    A8_OVERLAPPING_SUB_MANEUVERS = "A8"
    A9_SILENT_NON_RESPONSE = "A9"
    A10_MIN_SPEED_TOO_LOW = "A10"
    A11_PLAUSIBLE_FALSE_STATIC = "A11"
    A12_WIDTH_OVER_LANE = "A12"
    A13_LENGTH_IMPLAUSIBLE = "A13"
    A14_START_AFTER_END = "A14"
    A15_START_BEFORE_TIMESTAMP = "A15"
    A16_EXCESSIVE_DURATION = "A16"


#: Detector expected to catch each attack arm in the reference scenario.
EXPECTED_DETECTOR: dict[AttackId, DetectorId] = {
    AttackId.A1_OMIT_MANDATORY_FIELD: DetectorId.D1_FORMAT_CHECK,
    AttackId.A2_TRR_TYPE_MISMATCH: DetectorId.D2_TRR_CONSISTENCY,
    AttackId.A3_GHOST_NEGOTIATION: DetectorId.D3_GHOST_VEHICLE,
    AttackId.A4_DENY_ALL_REQUESTS: DetectorId.D4_DENIAL_RATE,
    AttackId.A5_MAX_SPEED_TOO_HIGH: DetectorId.D5_MAX_SPEED_PLAUSIBILITY,
    AttackId.A6_NONEXISTENT_LANE: DetectorId.D6_LANE_EXISTENCE,
    AttackId.A7_OVERLOADED_MANEUVER: DetectorId.D3_GHOST_VEHICLE,
    AttackId.A8_OVERLAPPING_SUB_MANEUVERS: DetectorId.D7_SUB_MANEUVER_OVERLAP,
    AttackId.A9_SILENT_NON_RESPONSE: DetectorId.D8_NON_RESPONSE_EVIDENCE,
    AttackId.A10_MIN_SPEED_TOO_LOW: DetectorId.D9_MIN_SPEED_PLAUSIBILITY,
    AttackId.A11_PLAUSIBLE_FALSE_STATIC: DetectorId.D16_BSM_MSCM_CONSISTENCY,
    AttackId.A12_WIDTH_OVER_LANE: DetectorId.D11_WIDTH_PLAUSIBILITY,
    AttackId.A13_LENGTH_IMPLAUSIBLE: DetectorId.D12_LENGTH_PLAUSIBILITY,
    AttackId.A14_START_AFTER_END: DetectorId.D13_TEMPORAL_ORDER,
    AttackId.A15_START_BEFORE_TIMESTAMP: DetectorId.D14_START_BEFORE_TIMESTAMP,
    AttackId.A16_EXCESSIVE_DURATION: DetectorId.D15_DURATION_BOUND,
}


@dataclass(frozen=True)
class CatalogEntry:
    attack_id: AttackId
    name: str
    selected: bool  # one of the six headline use-cases
    description: str
    defense: str
    reproducibility: CriterionRating
    impact: CriterionRating
    stealthiness: CriterionRating
    overall_label: CriterionRating


_H, _M, _L = CriterionRating.HIGH, CriterionRating.MEDIUM, CriterionRating.LOW

_CATALOG: tuple[CatalogEntry, ...] = (
    CatalogEntry(
        AttackId.A1_OMIT_MANDATORY_FIELD, "OmitMandatoryField", True,
        "Transmit a message with a mandatory field stripped out, so "
        "receivers cannot decode it.",
        "Reject undecodable messages and report the signer.",
        _H, _L, _L, _L),
    CatalogEntry(
        AttackId.A2_TRR_TYPE_MISMATCH, "TrrTypeMismatch", True,
        "Declare one road-resource type but ship the location payload of "
        "the other, producing an inconsistent message.",
        "Cross-check the declared resource type against the location "
        "variant actually present.",
        _H, _L, _L, _L),
    CatalogEntry(
        AttackId.A3_GHOST_NEGOTIATION, "GhostNegotiation", True,
        "Fabricate whole negotiations between pseudonyms the attacker "
        "controls, reserving road space for vehicles that do not exist.",
        "Corroborate claimed vehicle positions against onboard perception.",
        _H, _H, _M, _H),
    CatalogEntry(
        AttackId.A4_DENY_ALL_REQUESTS, "DenyAllRequests", True,
        "Answer every maneuver request with a refusal, starving neighbors "
        "of coordination.",
        "Track refusal counts per responder over a short window and flag "
        "abnormal rates.",
        _H, _H, _L, _H),
    CatalogEntry(
        AttackId.A5_MAX_SPEED_TOO_HIGH, "MaxSpeedTooHigh", True,
        "Request a maneuver whose maximum speed sits far above the posted "
        "limit, such as 200 km/h on a 130 km/h road.",
        "Compare the claimed speed against the limit and against the "
        "average speed of surrounding traffic.",
        _H, _H, _L, _H),
    CatalogEntry(
        AttackId.A6_NONEXISTENT_LANE, "NonexistentLane", True,
        "Point the lane offset at a lane the road does not have, steering "
        "an executant off the carriageway.",
        "Resolve the offset against the map's lane count (or camera lane "
        "detection) before accepting.",
        _H, _M, _L, _M),
    CatalogEntry(
        AttackId.A7_OVERLOADED_MANEUVER, "OverloadedManeuver", False,
        "Stuff a request with fabricated executants and sub-maneuvers to "
        "inflate processing cost at every receiver.",
        "Spot ghost executants with onboard sensors and bound per-message "
        "processing.",
        _M, _H, _H, _H),
    CatalogEntry(
        AttackId.A8_OVERLAPPING_SUB_MANEUVERS, "OverlappingSubManeuvers", False,
        "Assign two executants sub-maneuvers that collide in time and "
        "space, steering them into each other.",
        "Check every sub-maneuver pair for space-time overlap before "
        "agreeing.",
        _H, _H, _L, _H),
    CatalogEntry(
        AttackId.A9_SILENT_NON_RESPONSE, "SilentNonResponse", False,
        "Stay silent on maneuver requests while otherwise transmitting "
        "normally, wedging negotiations.",
        "Report silence only with evidence the station was transmitting "
        "inside the response window.",
        _H, _H, _H, _H),
    CatalogEntry(
        AttackId.A10_MIN_SPEED_TOO_LOW, "MinSpeedTooLow", False,
        "Request a maneuver whose minimum speed is far below surrounding "
        "traffic, such as 10 km/h in 130 km/h flow.",
        "Compare the claimed minimum against neighbor speeds and the road "
        "class.",
        _H, _H, _L, _H),
    CatalogEntry(
        AttackId.A11_PLAUSIBLE_FALSE_STATIC, "PlausibleFalseStatic", False,
        "Misstate a static field such as the executant width with a value "
        "that stays inside plausibility bounds.",
        "Cross-check static fields against the same station's beacons and "
        "earlier messages.",
        _H, _L, _M, _L),
    CatalogEntry(
        AttackId.A12_WIDTH_OVER_LANE, "WidthOverLane", False,
        "Claim an executant wider than the lane itself to freeze out other "
        "maneuvers.",
        "Bound the width by lane geometry and cross-check the station's "
        "beaconed dimensions.",
        _H, _L, _L, _L),
    CatalogEntry(
        AttackId.A13_LENGTH_IMPLAUSIBLE, "LengthImplausible", False,
        "Claim an executant longer than any plausible vehicle, beyond "
        "thirty meters.",
        "Bound the length by a fleet-wide threshold and cross-check the "
        "beaconed dimensions.",
        _H, _L, _L, _L),
    CatalogEntry(
        AttackId.A14_START_AFTER_END, "StartAfterEnd", False,
        "Schedule a maneuver whose start time falls after its end time.",
        "Require the start time to precede the end time.",
        _H, _L, _L, _L),
    CatalogEntry(
        AttackId.A15_START_BEFORE_TIMESTAMP, "StartBeforeTimestamp", False,
        "Schedule a maneuver that starts before the message itself was "
        "timestamped.",
        "Require the start time to follow the message timestamp.",
        _H, _L, _L, _L),
    CatalogEntry(
        AttackId.A16_EXCESSIVE_DURATION, "ExcessiveDuration", False,
        "Reserve road space for an absurdly long window, beyond a minute, "
        "blocking later requests.",
        "Bound the spanned duration of any maneuver by a threshold.",
        _H, _H, _L, _H),
)


def catalog() -> list[CatalogEntry]:
    """All sixteen attack arms with their transcribed ratings."""
    return list(_CATALOG)


class InsufficientPseudonyms(Exception):
    pass


class NoTargetSession(Exception):
    pass


class BadAttackParams(Exception):
    pass


_PARAM_DEFAULTS: dict[AttackId, dict] = {
    AttackId.A1_OMIT_MANDATORY_FIELD: {"field": "maneuver_id"},
    AttackId.A2_TRR_TYPE_MISMATCH: {},
    AttackId.A3_GHOST_NEGOTIATION: {"pseudonym_count": 3, "ghost_gap_m": 25.0,
                                    "ghost_span_m": 10.0},
    AttackId.A4_DENY_ALL_REQUESTS: {},
    AttackId.A5_MAX_SPEED_TOO_HIGH: {"speed_kmh": 200.0},
    AttackId.A6_NONEXISTENT_LANE: {"lane_offset": None},
    AttackId.A7_OVERLOADED_MANEUVER: {"sub_count": 64,
                                      "ghost_id_base": 4000000000},
    AttackId.A8_OVERLAPPING_SUB_MANEUVERS: {},
    AttackId.A9_SILENT_NON_RESPONSE: {"silence_prob": 1.0},
    AttackId.A10_MIN_SPEED_TOO_LOW: {"speed_kmh": 10.0},
    AttackId.A11_PLAUSIBLE_FALSE_STATIC: {"width_m": 2.2},
    AttackId.A12_WIDTH_OVER_LANE: {"extra_m": 0.5},
    AttackId.A13_LENGTH_IMPLAUSIBLE: {"length_m": 31.0},
    AttackId.A14_START_AFTER_END: {},
    AttackId.A15_START_BEFORE_TIMESTAMP: {"offset_ms": 5000},
    AttackId.A16_EXCESSIVE_DURATION: {"duration_ms": 120000},
}

_COMMON_DEFAULTS = {"start_ms": 5000, "interval_ms": 2000}


@dataclass(frozen=True)
class AttackSpec:
    id: AttackId
    attacker: LongTermId
    params: dict = field(default_factory=dict)


def validate_spec(spec: AttackSpec, credential_count: int) -> dict:
    """Fill parameter defaults and reject configurations that cannot run."""
    defaults = dict(_COMMON_DEFAULTS)
    defaults.update(_PARAM_DEFAULTS[spec.id])
    unknown = set(spec.params) - set(defaults)
    if unknown:
        raise BadAttackParams(
            f"{spec.id.value}: unknown params {sorted(unknown)}")
    params = {**defaults, **spec.params}
    if spec.id == AttackId.A3_GHOST_NEGOTIATION:
        if params["pseudonym_count"] < 2:
            raise BadAttackParams("ghost negotiation needs at least 2 pseudonyms")
        if credential_count < params["pseudonym_count"]:
            raise InsufficientPseudonyms(
                f"attacker holds {credential_count} credentials, "
                f"needs {params['pseudonym_count']}")
    if spec.id == AttackId.A9_SILENT_NON_RESPONSE:
        if not 0.0 <= params["silence_prob"] <= 1.0:
            raise BadAttackParams("silence_prob must lie in [0, 1]")
    if spec.id == AttackId.A1_OMIT_MANDATORY_FIELD:
        if params["field"] not in ("msg_type", "source_id", "msg_timestamp",
                                   "maneuver_id", "destination_ids",
                                   "executant_ids", "maneuver", "signature"):
            raise BadAttackParams(f"cannot omit field {params['field']!r}")
    return params


@dataclass(frozen=True)
class SendAction:
    """An outbound message: the harness signs and encodes it."""

    message: Mscm
    mode: CastMode
    credential_index: int = 0
    mutation: Optional[StructuralMutation] = None


@dataclass(frozen=True)
class SuppressAction:
    """A deliberate non-response to a request, recorded for ground truth."""

    maneuver_id: int
    requester: StationId


AttackAction = Union[SendAction, SuppressAction]


@dataclass
class AttackerContext:
    """The attacker's local view: the same inputs an honest station has."""

    attacker: LongTermId
    credentials: list[PseudonymCredential]
    vehicle: VehicleState
    road: MapModel
    perception: PerceptionSnapshot
    neighbors: list[StationId]
    neighbor_dims: dict[StationId, tuple[float, float]]
    inbox_requests: list[Mscm]
    now: int
    next_seq: int
    rng: random.Random


def _predicted_corridor(vehicle: VehicleState, start_ms: int, end_ms: int,
                        now: int, lead_margin: float = 5.0,
                        tail_margin: float = 15.0) -> tuple[float, float]:
    v = vehicle.speed / 3600.0  # m per ms
    return (vehicle.s + v * (start_ms - now) - lead_margin,
            vehicle.s + v * (end_ms - now) + tail_margin)


def _self_sub(ctx: AttackerContext, *, start_time: Optional[int] = None,
              end_time: Optional[int] = None, min_speed: Optional[float] = None,
              max_speed: Optional[float] = None, width: Optional[float] = None,
              length: Optional[float] = None, lane_offset: int = 0,
              executant: Optional[StationId] = None,
              corridor: Optional[tuple[float, float]] = None) -> SubManeuver:
    """A plausible self-maneuver; attack arms override single fields."""
    v = ctx.vehicle
    start = start_time if start_time is not None else ctx.now + 1500
    end = end_time if end_time is not None else start + 3000
    if corridor is None:
        corridor = _predicted_corridor(v, start, end, ctx.now)
    return SubManeuver(
        executant_id=executant if executant is not None
        else ctx.credentials[0].station_id,
        current_status=ManeuverStatus.PROPOSED,
        trr=TargetRoadResource(
            TrrType.LANE_SEGMENT,
            LaneSegment(lane_offset, corridor[0], corridor[1])),
        start_time=start,
        end_time=end,
        min_speed=min_speed if min_speed is not None
        else max(30.0, v.speed - 30.0),
        max_speed=max_speed if max_speed is not None
        else min(ctx.road.speed_limit, v.speed + 10.0),
        executant_width=width if width is not None else v.width,
        executant_length=length if length is not None else v.length,
    )


def _request(ctx: AttackerContext, subs: list[SubManeuver], *,
             source: Optional[StationId] = None, seq: Optional[int] = None
             ) -> Mscm:
    src = source if source is not None else ctx.credentials[0].station_id
    executants = tuple(sorted({s.executant_id for s in subs}))
    destinations = tuple(sorted(set(ctx.neighbors) | set(executants) | {src}))
    return Mscm(
        msg_type=MscmType.REQUEST,
        source_id=src,
        msg_timestamp=ctx.now,
        maneuver_id=make_maneuver_id(src, seq if seq is not None
                                     else ctx.next_seq),
        destination_ids=destinations,
        executant_ids=executants,
        maneuver=Maneuver(tuple(subs)),
    )


def _due(ctx: AttackerContext, params: dict) -> bool:
    start, interval = params["start_ms"], params["interval_ms"]
    return ctx.now >= start and (ctx.now - start) % interval == 0


def craft_denial(req: Mscm, responder: StationId, now: int) -> Mscm:
    """Refuse one request; raises when there is nothing to refuse."""
    if req is None:
        raise NoTargetSession("no pending request to deny")
    return Mscm(
        msg_type=MscmType.RESPONSE,
        source_id=responder,
        msg_timestamp=now,
        maneuver_id=req.maneuver_id,
        destination_ids=(req.source_id,),
        reason_code=ReasonCode.disagree(REASON_UNSPECIFIED),
    )


def inject(spec: AttackSpec, ctx: AttackerContext) -> list[AttackAction]:
    """Emit this tick's malicious actions for one attack arm.

    Request-phase arms emit a crafted request on their cadence; the two
    response-phase arms (deny-all and silent non-response) react to the
    inbox instead. Every returned message is ready for signing with the
    indicated credential; the two malformed-encoding arms additionally carry
    the structural mutation to apply after signing.
    """
    params = validate_spec(spec, len(ctx.credentials))
    aid = spec.id

    if aid == AttackId.A4_DENY_ALL_REQUESTS:
        return [SendAction(craft_denial(req, ctx.credentials[0].station_id,
                                        ctx.now), Broadcast())
                for req in ctx.inbox_requests]

    if aid == AttackId.A9_SILENT_NON_RESPONSE:
        actions: list[AttackAction] = []
        for req in ctx.inbox_requests:
            if ctx.rng.random() < params["silence_prob"]:
                actions.append(SuppressAction(req.maneuver_id, req.source_id))
            else:
                # Not targeted this time: answer like an agreeable neighbor.
                actions.append(SendAction(Mscm(
                    msg_type=MscmType.RESPONSE,
                    source_id=ctx.credentials[0].station_id,
                    msg_timestamp=ctx.now,
                    maneuver_id=req.maneuver_id,
                    destination_ids=(req.source_id,),
                    reason_code=ReasonCode.agreed()), Broadcast()))
        return actions

    if aid == AttackId.A3_GHOST_NEGOTIATION:
        return _inject_ghost(ctx, params)

    if not _due(ctx, params) or not ctx.neighbors:
        return []

    if aid == AttackId.A1_OMIT_MANDATORY_FIELD:
        msg = _request(ctx, [_self_sub(ctx)])
        return [SendAction(msg, Broadcast(), mutation=OmitField(params["field"]))]
    if aid == AttackId.A2_TRR_TYPE_MISMATCH:
        msg = _request(ctx, [_self_sub(ctx)])
        return [SendAction(msg, Broadcast(), mutation=MismatchTrrTag())]
    if aid == AttackId.A5_MAX_SPEED_TOO_HIGH:
        return [SendAction(_request(ctx, [_self_sub(
            ctx, max_speed=params["speed_kmh"])]), Broadcast())]
    if aid == AttackId.A6_NONEXISTENT_LANE:
        offset = params["lane_offset"]
        if offset is None:
            offset = ctx.road.lane_count - ctx.vehicle.lane  # first off-map lane
        return [SendAction(_request(ctx, [_self_sub(
            ctx, lane_offset=offset)]), Broadcast())]
    if aid == AttackId.A7_OVERLOADED_MANEUVER:
        return _inject_overload(ctx, params)
    if aid == AttackId.A8_OVERLAPPING_SUB_MANEUVERS:
        return _inject_collision_pair(ctx)
    if aid == AttackId.A10_MIN_SPEED_TOO_LOW:
        return [SendAction(_request(ctx, [_self_sub(
            ctx, min_speed=params["speed_kmh"])]), Broadcast())]
    if aid == AttackId.A11_PLAUSIBLE_FALSE_STATIC:
        return [SendAction(_request(ctx, [_self_sub(
            ctx, width=params["width_m"])]), Broadcast())]
    if aid == AttackId.A12_WIDTH_OVER_LANE:
        return [SendAction(_request(ctx, [_self_sub(
            ctx, width=ctx.road.lane_width + params["extra_m"])]), Broadcast())]
    if aid == AttackId.A13_LENGTH_IMPLAUSIBLE:
        return [SendAction(_request(ctx, [_self_sub(
            ctx, length=params["length_m"])]), Broadcast())]
    if aid == AttackId.A14_START_AFTER_END:
        start, end = ctx.now + 4500, ctx.now + 1500
        corridor = _predicted_corridor(ctx.vehicle, end, start, ctx.now)
        return [SendAction(_request(ctx, [_self_sub(
            ctx, start_time=start, end_time=end, corridor=corridor)]),
            Broadcast())]
    if aid == AttackId.A15_START_BEFORE_TIMESTAMP:
        start = max(0, ctx.now - params["offset_ms"])
        return [SendAction(_request(ctx, [_self_sub(
            ctx, start_time=start, end_time=ctx.now + 3000,
            corridor=_predicted_corridor(ctx.vehicle, ctx.now, ctx.now + 3000,
                                         ctx.now))]), Broadcast())]
    if aid == AttackId.A16_EXCESSIVE_DURATION:
        start = ctx.now + 1500
        return [SendAction(_request(ctx, [_self_sub(
            ctx, start_time=start, end_time=start + params["duration_ms"])]),
            Broadcast())]
    raise BadAttackParams(f"no injector for {aid}")


def _inject_ghost(ctx: AttackerContext, params: dict) -> list[AttackAction]:
    """Fabricated request plus the ghost's own agreement one step later.

    The request is signed by one throwaway pseudonym and names another as
    executant, reserving a corridor the attacker can see is empty.
    """
    creds = ctx.credentials
    requester = creds[1] if len(creds) >= 3 else creds[0]
    ghost = creds[-1]
    interval = params["interval_ms"]
    start = params["start_ms"]
    if ctx.now < start or not ctx.neighbors:
        return []
    phase = (ctx.now - start) % interval
    if phase == 0:
        gap, span = params["ghost_gap_m"], params["ghost_span_m"]
        s0 = ctx.vehicle.s + gap
        sub = SubManeuver(
            executant_id=ghost.station_id,
            current_status=ManeuverStatus.PROPOSED,
            trr=TargetRoadResource(TrrType.LANE_SEGMENT,
                                   LaneSegment(0, s0, s0 + span)),
            start_time=ctx.now + 1500,
            end_time=ctx.now + 4500,
            min_speed=max(30.0, ctx.vehicle.speed - 30.0),
            max_speed=min(ctx.road.speed_limit, ctx.vehicle.speed + 10.0),
            executant_width=1.8,
            executant_length=4.5,
        )
        msg = _request(ctx, [sub], source=requester.station_id)
        return [SendAction(msg, Broadcast(),
                           credential_index=creds.index(requester))]
    if phase == 200:
        # Agree to our own fabricated session with the ghost pseudonym.
        mid = make_maneuver_id(requester.station_id, ctx.next_seq - 1)
        resp = Mscm(
            msg_type=MscmType.RESPONSE,
            source_id=ghost.station_id,
            msg_timestamp=ctx.now,
            maneuver_id=mid,
            destination_ids=(requester.station_id,),
            reason_code=ReasonCode.agreed(),
        )
        return [SendAction(resp, Broadcast(), credential_index=len(creds) - 1)]
    return []


def _inject_overload(ctx: AttackerContext, params: dict) -> list[AttackAction]:
    """One request stuffed with fabricated executants and sub-maneuvers."""
    count = params["sub_count"]
    base_id = params["ghost_id_base"]
    subs = []
    for i in range(count):
        start = ctx.now + 1500 + i * 3100  # time-sliced: no self-overlap
        s0 = ctx.vehicle.s + 15.0 + (i % 16) * 4.0
        subs.append(SubManeuver(
            executant_id=base_id + i,
            current_status=ManeuverStatus.PROPOSED,
            trr=TargetRoadResource(TrrType.LANE_SEGMENT,
                                   LaneSegment(0, s0, s0 + 8.0)),
            start_time=start,
            end_time=start + 3000,
            min_speed=40.0,
            max_speed=ctx.road.speed_limit,
            executant_width=1.8,
            executant_length=4.5,
        ))
    return [SendAction(_request(ctx, subs), Broadcast())]


def _inject_collision_pair(ctx: AttackerContext) -> list[AttackAction]:
    """One request whose two sub-maneuvers collide in time and space."""
    victims = sorted(ctx.neighbors)[:2]
    if len(victims) < 2:
        return []
    start = ctx.now + 1500
    end = start + 3000
    corridor = _predicted_corridor(ctx.vehicle, start, end, ctx.now,
                                   lead_margin=-20.0, tail_margin=40.0)
    subs = []
    for victim in victims:
        width, length = ctx.neighbor_dims.get(victim, (1.8, 4.5))
        subs.append(SubManeuver(
            executant_id=victim,
            current_status=ManeuverStatus.PROPOSED,
            trr=TargetRoadResource(TrrType.LANE_SEGMENT,
                                   LaneSegment(0, corridor[0], corridor[1])),
            start_time=start,
            end_time=end,
            min_speed=40.0,
            max_speed=ctx.road.speed_limit,
            executant_width=width,
            executant_length=length,
        ))
    return [SendAction(_request(ctx, subs), Broadcast())]


@dataclass(frozen=True)
class Fig4Plan:
    """Two unicast requests that only collide when viewed across sessions."""

    attacker: LongTermId
    victim_a: StationId
    victim_b: StationId
    t1_ms: int
    t2_ms: int
    t3_ms: int
    overhearing: bool = True  # deliver unicast content on the broadcast channel


def fig4_scenario(attacker: LongTermId, victim_a: StationId,
                  victim_b: StationId, t1_ms: int = 1000, t2_ms: int = 2000,
                  t3_ms: int = 10000, overhearing: bool = True) -> Fig4Plan:
    """Validate and freeze the two-victim collision-course plan."""
    if victim_a == victim_b:
        raise BadAttackParams("the two victims must be distinct")
    if not t1_ms < t2_ms < t3_ms:
        raise BadAttackParams("times must satisfy t1 < t2 < t3")
    return Fig4Plan(attacker, victim_a, victim_b, t1_ms, t2_ms, t3_ms,
                    overhearing)


def craft_fig4_request(plan: Fig4Plan, which: int, ctx: AttackerContext,
                       victim_state: tuple[int, float, float],
                       duration_ms: int = 4000) -> SendAction:
    """Build the unicast request steering one victim into the shared spot.

    ``victim_state`` is (lane, s, speed) as the attacker last heard it. Both
    victims are sent to the attacker's own lane (offset zero) over the same
    corridor around the attacker's predicted position at t3, so the two
    sessions collide with each other while each request alone is clean.
    """
    victim = plan.victim_a if which == 0 else plan.victim_b
    _, _, speed = victim_state
    t3 = plan.t3_ms
    meet_lo, meet_hi = _predicted_corridor(
        ctx.vehicle, t3, t3 + duration_ms, ctx.now,
        lead_margin=10.0, tail_margin=10.0)
    width, length = ctx.neighbor_dims.get(victim, (1.8, 4.5))
    sub = SubManeuver(
        executant_id=victim,
        current_status=ManeuverStatus.PROPOSED,
        trr=TargetRoadResource(
            TrrType.LANE_SEGMENT,
            LaneSegment(0, meet_lo, meet_hi)),
        start_time=t3,
        end_time=t3 + duration_ms,
        min_speed=max(30.0, speed - 30.0),
        max_speed=min(ctx.road.speed_limit, speed + 10.0),
        executant_width=width,
        executant_length=length,
    )
    msg = Mscm(
        msg_type=MscmType.REQUEST,
        source_id=ctx.credentials[0].station_id,
        msg_timestamp=ctx.now,
        maneuver_id=make_maneuver_id(ctx.credentials[0].station_id,
                                     ctx.next_seq),
        destination_ids=(victim,),
        executant_ids=(victim,),
        maneuver=Maneuver((sub,)),
    )
    mode: CastMode = Broadcast() if plan.overhearing else Unicast(victim)
    return SendAction(msg, mode)
