"""Deterministic discrete-event loop, channel model, stations and metrics.

Each 100 ms tick runs a fixed stage order: kinematics, beacon emission,
channel delivery, protocol and attack logic, detectors, reports. Stations
are always visited in sorted id order and every random draw comes from a
named per-subsystem stream, so one (config, seed) pair always produces a
byte-identical event log. Metrics recomputed from a persisted log equal the
ones the run produced online because both go through the same function.

Beacons are high-volume, so they are encoded, signed and verified once per
emission and shared across recipients; their per-recipient delivery fate is
recorded inside the send record instead of one record per recipient.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import random
from dataclasses import dataclass, replace
from typing import Any, Callable, Optional

from . import detection, protocol
from .attacks import (
    AttackerContext,
    AttackId,
    AttackSpec,
    EXPECTED_DETECTOR,
    SendAction,
    SuppressAction,
    craft_fig4_request,
    inject,
)
from .config import ScenarioConfig, VehicleConfig, station_id_for
from .detection import (
    BsmInput,
    DetectionContext,
    DetectionEvent,
    DetectorId,
    MessageInput,
    SessionExpiryInput,
    StoredReservation,
    TrajectoryWatch,
    generate_report,
    message_hash,
    record_static_claims,
    run_detectors,
)
from .geometry import SpaceTimeRegion, region_of, regions_conflict
from .identity import (
    CredentialDirectory,
    LongTermId,
    PseudonymCredential,
    RevocationList,
    derive_secret,
    revoke,
    sign,
    verify,
)
from .mscm import (
    DecodeError,
    ExecutionStatus,
    LaneSegment,
    Maneuver,
    ManeuverStatus,
    Mscm,
    MscmType,
    ReasonCode,
    StationId,
    SubManeuver,
    TargetRoadResource,
    TrrType,
    decode,
    encode,
    encode_body,
    encode_hostile,
    split_signature,
)
from .protocol import (
    Broadcast,
    CastMode,
    Groupcast,
    Phase,
    SessionState,
    TERMINAL_PHASES,
    Unicast,
    expire_sessions,
)
from .world import (
    BSM_PERIOD_MS,
    Bsm,
    LaneChange,
    VehicleState,
    World,
    encode_bsm_body,
    make_bsm,
    perceive,
    step_kinematics,
)

PROCESSING_COST_BASE = 1
PROCESSING_COST_PER_SUB = 1
# Honest reservations are earth-fixed boxes while traffic moves, so two
# same-lane requests staggered in time can only collide if the second box
# catches up with the first while their windows still intersect. Keeping
# lead + duration short enough that v * duration < gap - box_length makes
# honest corridors disjoint by construction at reference speeds/spacing.
HONEST_REQUEST_LEAD_MS = 1000
HONEST_REQUEST_DURATION_MS = 1500


class LogMismatch(Exception):
    pass


class EventLog:
    """Append-only record stream, totally ordered by (tick, seq)."""

    def __init__(self) -> None:
        self.records: list[dict] = []
        self._seq = 0

    def append(self, tick: int, kind: str, payload: dict) -> None:
        self.records.append({"tick": tick, "seq": self._seq, "kind": kind,
                             "payload": payload})
        self._seq += 1

    def to_jsonl(self) -> bytes:
        if not self.records:
            return b""
        lines = [json.dumps(rec, separators=(",", ":")) for rec in self.records]
        return ("\n".join(lines) + "\n").encode()

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl()).hexdigest()


@dataclass
class PreparedMessage:
    """One transmission, decoded and verified once for all recipients."""

    raw: bytes
    msg_hash: str
    wire_kind: str  # "bsm" | "mscm"
    sender_vehicle: LongTermId
    sender_station: StationId
    bsm: Optional[Bsm] = None
    message: Optional[Mscm] = None
    error: Optional[DecodeError] = None
    verified: bool = False

    @property
    def sub_count(self) -> int:
        if self.message is not None and self.message.maneuver is not None:
            return len(self.message.maneuver.sub_maneuvers)
        return 0


@dataclass
class QueuedDelivery:
    deliver_tick: int
    order: int
    prepared: PreparedMessage
    recipients: list[LongTermId]
    dropped: list[LongTermId]


@dataclass
class SessionRecord:
    session: SessionState
    request_hash: str
    transmitter_lane: Optional[int]
    is_requester: bool
    expiry_reported: bool = False


@dataclass
class ExecutionTask:
    maneuver_id: int
    sub: SubManeuver
    target_lane: Optional[int]
    started: bool = False
    completed: bool = False


class Station:
    """Per-vehicle protocol state, histories and detector bookkeeping."""

    def __init__(self, cfg: VehicleConfig, creds: list[PseudonymCredential],
                 rng: random.Random) -> None:
        self.cfg = cfg
        self.vehicle_id = cfg.long_term
        self.creds = creds
        self.primary = creds[0]
        self.own_stations = frozenset(c.station_id for c in creds)
        self.rng = rng
        self.seq = 0
        self.next_arrival_ms: Optional[int] = None
        self.delivered: list[PreparedMessage] = []
        self.delivered_bsms: list[PreparedMessage] = []
        self.bsm_history: dict[StationId, list[tuple[int, Bsm, str]]] = {}
        self.mscm_seen: dict[StationId, list[tuple[int, str]]] = {}
        self.transmitter_lanes: dict[StationId, int] = {}
        self.neighbor_speeds: list[tuple[int, float]] = []
        self.neighbor_dims: dict[StationId, tuple[float, float]] = {}
        self.response_history: list[detection.ResponseRecord] = []
        self.sessions: dict[int, SessionRecord] = {}
        self.stored_reservations: list[StoredReservation] = []
        self.trajectory_watches: list[TrajectoryWatch] = []
        self.static_claims: dict = {}
        self.evidence: dict[str, bytes] = {}
        self.evidence_ts: dict[str, int] = {}
        self.own_plan: list[tuple[int, SpaceTimeRegion]] = []
        self.tasks: list[ExecutionTask] = []
        self.emitted_events: set[tuple] = set()
        self.new_events: list[DetectionEvent] = []
        self.expiries: list[SessionExpiryInput] = []

    def ingest_bsm(self, ts: int, pm: PreparedMessage) -> None:
        bsm = pm.bsm
        history = self.bsm_history.setdefault(bsm.source_id, [])
        history.append((ts, bsm, pm.msg_hash))
        if len(history) > 120:
            del history[:len(history) - 120]
        self.transmitter_lanes[bsm.source_id] = bsm.lane
        self.neighbor_dims[bsm.source_id] = (bsm.width, bsm.length)
        self.neighbor_speeds.append((ts, bsm.speed))
        self.evidence[pm.msg_hash] = pm.raw
        self.evidence_ts[pm.msg_hash] = ts
        self.delivered_bsms.append(pm)

    def ingest_mscm(self, ts: int, pm: PreparedMessage) -> None:
        self.delivered.append(pm)
        self.evidence[pm.msg_hash] = pm.raw
        self.evidence_ts[pm.msg_hash] = ts
        source = (pm.message.source_id if pm.message is not None
                  else pm.sender_station)
        self.mscm_seen.setdefault(source, []).append((ts, pm.msg_hash))

    def neighbors(self, now: int, window_ms: int = 2000) -> list[StationId]:
        return sorted(sid for sid, hist in self.bsm_history.items()
                      if hist and now - hist[-1][0] <= window_ms
                      and sid not in self.own_stations)

    def avg_neighbor_speed(self, now: int) -> Optional[float]:
        cutoff = now - 2000
        self.neighbor_speeds = [(t, s) for t, s in self.neighbor_speeds
                                if t >= cutoff]
        if not self.neighbor_speeds:
            return None
        return sum(s for _, s in self.neighbor_speeds) / len(self.neighbor_speeds)

    def drop_session_artifacts(self, maneuver_id: int) -> None:
        self.stored_reservations = [r for r in self.stored_reservations
                                    if r.maneuver_id != maneuver_id]
        self.trajectory_watches = [w for w in self.trajectory_watches
                                   if w.maneuver_id != maneuver_id]

    def prune(self, now: int) -> None:
        for sid in list(self.mscm_seen):
            kept = [(t, h) for t, h in self.mscm_seen[sid] if now - t <= 30000]
            if kept:
                self.mscm_seen[sid] = kept
            else:
                del self.mscm_seen[sid]
        self.response_history = [r for r in self.response_history
                                 if now - r.timestamp <= 30000]
        self.stored_reservations = [r for r in self.stored_reservations
                                    if r.region.end_time >= now]
        self.trajectory_watches = [w for w in self.trajectory_watches
                                   if w.end_time >= now]
        self.own_plan = [(end, reg) for end, reg in self.own_plan
                         if end >= now]
        stale = [h for h, t in self.evidence_ts.items() if now - t > 30000]
        for ref in stale:
            del self.evidence_ts[ref]
            self.evidence.pop(ref, None)


@dataclass
class RunMetrics:
    per_attack: dict[str, dict]
    false_positives: dict[str, int]
    total_detection_events: int
    channel: dict[str, Any]
    processing_cost: dict[str, int]
    sessions: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "per_attack": self.per_attack,
            "false_positives": self.false_positives,
            "total_detection_events": self.total_detection_events,
            "channel": self.channel,
            "processing_cost": self.processing_cost,
            "sessions": self.sessions,
        }


@dataclass
class RunResult:
    config: ScenarioConfig
    log: EventLog
    attribution: list[dict]
    metrics: RunMetrics

    def digest(self) -> str:
        return self.log.digest()


def resolve_recipients(mode: CastMode, world: World, sender: LongTermId,
                       range_m: float, lane_width: float,
                       station_owner: dict[StationId, LongTermId]
                       ) -> list[LongTermId]:
    """Vehicles a transmission reaches, given its cast mode and geometry.

    Unicast reaches only the addressed vehicle; groupcast reaches vehicles
    inside a power-scaled range whose bearing falls within the beam;
    broadcast reaches everything in range. The sender never hears itself.
    """
    me = world.vehicles[sender]
    if isinstance(mode, Unicast):
        owner = station_owner.get(mode.target)
        if owner is None or owner == sender:
            return []
        other = world.vehicles[owner]
        if abs(other.s - me.s) <= range_m:
            return [owner]
        return []
    if isinstance(mode, Groupcast):
        reach = range_m * max(0.0, min(1.0, mode.power))
        out = []
        for vid in world.ids():
            if vid == sender:
                continue
            other = world.vehicles[vid]
            dx = other.s - me.s
            dy = (other.lane_pos - me.lane_pos) * lane_width
            if math.hypot(dx, dy) > reach:
                continue
            bearing = math.atan2(dy, dx)
            delta = math.atan2(math.sin(bearing - mode.beam_center),
                               math.cos(bearing - mode.beam_center))
            if abs(delta) <= mode.beam_width / 2.0:
                out.append(vid)
        return out
    return [vid for vid in world.ids()
            if vid != sender and abs(world.vehicles[vid].s - me.s) <= range_m]


class Simulation:
    """One scenario execution; create fresh for every run."""

    def __init__(self, config: ScenarioConfig,
                 trace_kinematics: bool = False) -> None:
        seed_env = os.environ.get("MSCS_SEED")
        if seed_env is not None:
            config = replace(config, seed=int(seed_env))
        self.config = config
        self.seed = config.seed
        self.tick_ms = config.tick_ms
        self.trace_kinematics = trace_kinematics
        self.log = EventLog()
        self.attribution: list[dict] = []
        self.channel_rng = random.Random(f"{self.seed}:channel")
        self.directory = CredentialDirectory()
        self.crl = RevocationList()
        self.station_owner: dict[StationId, LongTermId] = {}
        self.attack_by_vehicle: dict[LongTermId, AttackSpec] = {}
        self.queue: list[QueuedDelivery] = []
        self.send_order = 0
        self.pending_revocations: list[tuple[int, StationId]] = []
        self.fig4_sent = [False, False]

        vehicles = []
        self.stations: dict[LongTermId, Station] = {}
        for vcfg in config.vehicles:
            vehicles.append(VehicleState(
                long_term=vcfg.long_term, lane_pos=float(vcfg.lane), s=vcfg.s,
                speed=vcfg.speed, width=vcfg.width, length=vcfg.length,
                is_special=vcfg.is_special, bsm_enabled=vcfg.bsm_enabled))
            creds = []
            for k in range(vcfg.credential_count):
                sid = station_id_for(vcfg.long_term, k)
                cred = PseudonymCredential(
                    station_id=sid,
                    secret=derive_secret(self.seed, sid),
                    owner=vcfg.long_term,
                    valid_from=0,
                    valid_to=config.duration_ms + 60000,
                    is_special=vcfg.is_special)
                self.directory.add(cred)
                self.station_owner[sid] = vcfg.long_term
                creds.append(cred)
            self.stations[vcfg.long_term] = Station(
                vcfg, creds,
                random.Random(f"{self.seed}:station:{vcfg.long_term}"))
        self.world = World(config.road, vehicles)
        self.special_ids = frozenset(
            sid for sid in self.station_owner
            if self.directory.is_special(sid))

        for spec in config.attacks:
            self.attack_by_vehicle[spec.attacker] = spec
        attacker_vehicles = set(self.attack_by_vehicle)
        if config.fig4 is not None:
            attacker_vehicles.add(config.fig4.attacker)
        self.attacker_stations = frozenset(
            sid for sid, owner in self.station_owner.items()
            if owner in attacker_vehicles)

        if config.request_generator.enabled:
            rate = config.request_generator.rate_per_min
            if rate > 0:
                for vid in sorted(self.stations):
                    if self._is_attacker(vid):
                        continue
                    st = self.stations[vid]
                    st.next_arrival_ms = 1 + int(
                        st.rng.expovariate(rate / 60000.0))

    # -- helpers ----------------------------------------------------------

    def _is_attacker(self, vehicle_id: LongTermId) -> bool:
        if vehicle_id in self.attack_by_vehicle:
            return True
        fig4 = self.config.fig4
        return fig4 is not None and vehicle_id == fig4.attacker

    def _prepare(self, raw: bytes, wire_kind: str, sender: LongTermId,
                 sender_station: StationId, now: int,
                 bsm: Optional[Bsm] = None) -> PreparedMessage:
        pm = PreparedMessage(raw=raw, msg_hash=message_hash(raw),
                             wire_kind=wire_kind, sender_vehicle=sender,
                             sender_station=sender_station, bsm=bsm)
        if wire_kind == "bsm":
            body = encode_bsm_body(replace(bsm, signature=None))
            pm.verified = bool(verify(bsm.signature, body, self.directory,
                                      self.crl, now))
            return pm
        try:
            pm.message = decode(raw)
        except DecodeError as err:
            pm.error = err
            return pm
        try:
            body, env = split_signature(raw)
        except DecodeError as err:
            pm.error = err
            return pm
        pm.verified = bool(verify(env, body, self.directory, self.crl, now))
        return pm

    def _send(self, pm: PreparedMessage, mode: CastMode, tick: int) -> None:
        recipients = resolve_recipients(
            mode, self.world, pm.sender_vehicle, self.config.channel.range_m,
            self.config.road.lane_width, self.station_owner)
        loss = self.config.channel.loss_prob
        dropped = [r for r in recipients if self.channel_rng.random() < loss]
        latency_ticks = self.config.channel.latency_ms // self.tick_ms
        self.queue.append(QueuedDelivery(
            deliver_tick=tick + latency_ticks, order=self.send_order,
            prepared=pm, recipients=recipients, dropped=dropped))
        self.send_order += 1
        payload = {
            "sender_station": pm.sender_station,
            "sender_vehicle": pm.sender_vehicle,
            "wire": pm.wire_kind,
            "mode": type(mode).__name__.lower(),
            "hash": pm.msg_hash,
            "recipients": recipients,
            "dropped": dropped,
        }
        if pm.wire_kind == "mscm":
            payload["bytes_hex"] = pm.raw.hex()
        self.log.append(tick, "msg_sent", payload)

    def _sign_and_send(self, msg: Mscm, cred: PseudonymCredential,
                       mode: CastMode, tick: int, now: int,
                       mutation=None, attack_id: Optional[str] = None) -> str:
        body = encode_body(msg)
        signed = replace(msg, signature=sign(body, cred, now))
        raw = encode_hostile(signed, mutation) if mutation else encode(signed)
        pm = self._prepare(raw, "mscm", self.station_owner[cred.station_id],
                           cred.station_id, now)
        if attack_id is not None:
            self.attribution.append({
                "tick": tick, "now": now, "kind": "emission",
                "attack": attack_id, "attacker_station": cred.station_id,
                "hash": pm.msg_hash, "msg_type": msg.msg_type.name.lower()})
        self._send(pm, mode, tick)
        return pm.msg_hash

    # -- tick stages --------------------------------------------------------

    def _emit_bsms(self, tick: int, now: int) -> None:
        for vid in self.world.ids():
            vehicle = self.world.vehicles[vid]
            if not vehicle.bsm_enabled:
                continue
            st = self.stations[vid]
            bsm = make_bsm(vehicle, st.primary, now)
            raw = (encode_bsm_body(replace(bsm, signature=None))
                   + bsm.signature.tag)
            pm = self._prepare(raw, "bsm", vid, st.primary.station_id, now,
                               bsm=bsm)
            self._send(pm, Broadcast(), tick)

    def _deliver(self, tick: int, now: int) -> None:
        due = [q for q in self.queue if q.deliver_tick <= tick]
        if not due:
            return
        self.queue = [q for q in self.queue if q.deliver_tick > tick]
        due.sort(key=lambda q: q.order)
        for q in due:
            pm = q.prepared
            for recipient in sorted(q.recipients):
                if recipient in q.dropped:
                    if pm.wire_kind == "mscm":
                        self.log.append(tick, "msg_dropped", {
                            "recipient": recipient, "hash": pm.msg_hash})
                    continue
                st = self.stations[recipient]
                if pm.wire_kind == "bsm":
                    if pm.verified:
                        st.ingest_bsm(now, pm)
                    continue
                self.log.append(tick, "msg_delivered", {
                    "recipient": recipient, "hash": pm.msg_hash,
                    "sender_station": pm.sender_station,
                    "cost": PROCESSING_COST_BASE
                    + PROCESSING_COST_PER_SUB * pm.sub_count})
                if pm.message is not None and not pm.verified:
                    continue  # authenticated garbage is dropped silently
                st.ingest_mscm(now, pm)

    def _station_logic(self, tick: int, now: int) -> None:
        for vid in sorted(self.stations):
            st = self.stations[vid]
            if self._is_attacker(vid):
                self._attacker_logic(st, tick, now)
            else:
                self._honest_logic(st, tick, now)
            self._expire(st, tick, now)
            st.prune(now)

    # -- honest behavior ------------------------------------------------------

    def _honest_logic(self, st: Station, tick: int, now: int) -> None:
        cancels = [pm for pm in st.delivered
                   if pm.message is not None
                   and pm.message.msg_type == MscmType.CANCEL]
        rest = [pm for pm in st.delivered if pm not in cancels]
        for pm in cancels + rest:
            if pm.message is not None:
                self._process_mscm(st, pm, tick, now)
        self._maybe_request(st, tick, now)
        self._run_tasks(st, tick, now)

    def _process_mscm(self, st: Station, pm: PreparedMessage, tick: int,
                      now: int) -> None:
        msg = pm.message
        if msg.source_id in st.own_stations:
            return
        addressed = any(sid in st.own_stations for sid in msg.destination_ids)

        if msg.msg_type == MscmType.REQUEST:
            own_verdict: Optional[bool] = None
            if addressed:
                policy = self._policy_for(st, msg, now)
                response = protocol.handle_request(
                    st.primary.station_id,
                    [region for _, region in st.own_plan], msg, policy, now)
                self._sign_and_send(response, st.primary, Broadcast(),
                                    tick, now)
                own_verdict = response.reason_code.agree
                st.response_history.append(detection.ResponseRecord(
                    timestamp=now, responder=st.primary.station_id,
                    requester=msg.source_id, agree=own_verdict, msg_ref=""))
            if addressed or self.config.spectator_detection:
                self._track_request(st, pm, msg, tick, now, own_verdict)
        elif msg.msg_type == MscmType.RESPONSE:
            st.response_history.append(detection.ResponseRecord(
                timestamp=now, responder=msg.source_id,
                requester=msg.destination_ids[0] if msg.destination_ids else 0,
                agree=msg.reason_code.agree, msg_ref=pm.msg_hash))
            self._apply_session_msg(st, msg, pm.msg_hash, tick, now)
        elif msg.msg_type in (MscmType.CANCEL, MscmType.COMPLETE):
            self._apply_session_msg(st, msg, pm.msg_hash, tick, now)
        elif msg.msg_type == MscmType.SPECIAL_ANNOUNCE:
            try:
                directive = protocol.handle_special_announce(msg,
                                                             self.directory)
            except protocol.NotSpecialVehicle:
                return
            self._apply_yield(st, directive, now)

    def _policy_for(self, st: Station, msg: Mscm, now: int
                    ) -> protocol.AgreementPolicy:
        cross = None
        if DetectorId.D7X_CROSS_SESSION_OVERLAP in self.config.detectors:
            cross = st.stored_reservations
        signer = msg.signature.signer_id if msg.signature else msg.source_id
        return protocol.AgreementPolicy(
            road=self.config.road,
            thresholds=self.config.thresholds,
            transmitter_lane=st.transmitter_lanes.get(msg.source_id),
            avg_neighbor_speed=st.avg_neighbor_speed(now),
            signer_is_special=signer in self.special_ids,
            cross_session_regions=cross)

    def _request_is_plausible(self, st: Station, msg: Mscm, now: int) -> bool:
        events = detection.message_plausibility_events(
            msg, self.config.road, self.config.thresholds,
            transmitter_lane=st.transmitter_lanes.get(msg.source_id),
            avg_neighbor_speed=st.avg_neighbor_speed(now),
            signer_is_special=(msg.signature.signer_id if msg.signature
                               else msg.source_id) in self.special_ids,
            reporter=st.primary.station_id, now=now)
        return not events

    def _track_request(self, st: Station, pm: PreparedMessage, msg: Mscm,
                       tick: int, now: int,
                       own_verdict: Optional[bool]) -> None:
        if msg.maneuver_id in st.sessions:
            return
        session = SessionState(
            maneuver_id=msg.maneuver_id,
            requester=msg.source_id,
            participants=frozenset(msg.destination_ids) | {msg.source_id},
            executants=frozenset(msg.executant_ids),
            maneuver=msg.maneuver,
            phase=Phase.AWAITING_RESPONSES,
            created_at=now,
            pending=frozenset(msg.destination_ids),
        )
        lane = st.transmitter_lanes.get(msg.source_id)
        rec = SessionRecord(session=session, request_hash=pm.msg_hash,
                            transmitter_lane=lane, is_requester=False)
        st.sessions[msg.maneuver_id] = rec

        # Remember the claimed reservations for cross-session checking, but
        # only when the claim is resolvable and not already implausible:
        # storing junk would poison later conflict decisions.
        plausible = (own_verdict if own_verdict is not None
                     else self._request_is_plausible(st, msg, now))
        if lane is not None and plausible:
            for sub in msg.maneuver.sub_maneuvers:
                st.stored_reservations.append(StoredReservation(
                    maneuver_id=msg.maneuver_id, requester=msg.source_id,
                    executant=sub.executant_id,
                    region=region_of(sub, float(lane),
                                     self.config.road.lane_width)))
        if own_verdict is not None:
            resp = Mscm(
                msg_type=MscmType.RESPONSE,
                source_id=st.primary.station_id,
                msg_timestamp=now,
                maneuver_id=msg.maneuver_id,
                destination_ids=(msg.source_id,),
                reason_code=ReasonCode(agree=own_verdict, code=0))
            self._transition(st, rec,
                             lambda s: protocol.handle_response(s, resp),
                             pm.msg_hash, tick, now)

    def _apply_session_msg(self, st: Station, msg: Mscm, msg_ref: str,
                           tick: int, now: int) -> None:
        rec = st.sessions.get(msg.maneuver_id)
        if rec is None:
            return
        if msg.msg_type == MscmType.RESPONSE:
            self._transition(st, rec,
                             lambda s: protocol.handle_response(s, msg),
                             msg_ref, tick, now)
        else:
            self._transition(st, rec,
                             lambda s: protocol.handle_execution_msg(s, msg),
                             msg_ref, tick, now)

    def _transition(self, st: Station, rec: SessionRecord,
                    fn: Callable[[SessionState], SessionState], cause: str,
                    tick: int, now: int) -> None:
        old = rec.session
        try:
            new = fn(old)
        except protocol.StaleResponse:
            return
        rec.session = new
        if new.phase == old.phase:
            return
        self.log.append(tick, "session_transition", {
            "station": st.primary.station_id,
            "maneuver_id": old.maneuver_id,
            "from_phase": old.phase.value,
            "to_phase": new.phase.value,
            "cause_msg": cause,
        })
        if new.phase == Phase.ACTIVE:
            self._on_session_active(st, rec, now)
        elif new.phase in TERMINAL_PHASES:
            st.drop_session_artifacts(old.maneuver_id)

    def _on_session_active(self, st: Station, rec: SessionRecord,
                           now: int) -> None:
        lane = rec.transmitter_lane
        road = self.config.road
        for sub in rec.session.maneuver.sub_maneuvers:
            is_lane_seg = isinstance(sub.trr.location, LaneSegment)
            if lane is not None and is_lane_seg:
                st.trajectory_watches.append(TrajectoryWatch(
                    maneuver_id=rec.session.maneuver_id,
                    executant=sub.executant_id,
                    target_lane=float(lane + sub.trr.location.lane_offset),
                    s_lo=sub.trr.location.start_s,
                    s_hi=sub.trr.location.end_s,
                    start_time=sub.start_time,
                    end_time=sub.end_time,
                    msg_ref=rec.request_hash))
            if sub.executant_id in st.own_stations:
                target_lane = None
                if lane is not None and is_lane_seg:
                    resolved = lane + sub.trr.location.lane_offset
                    if 0 <= resolved < road.lane_count:
                        target_lane = resolved
                st.tasks.append(ExecutionTask(
                    maneuver_id=rec.session.maneuver_id, sub=sub,
                    target_lane=target_lane))
                base = float(lane) if lane is not None else 0.0
                st.own_plan.append((sub.end_time,
                                    region_of(sub, base, road.lane_width)))

    def _apply_yield(self, st: Station, directive: protocol.YieldDirective,
                     now: int) -> None:
        vehicle = self.world.vehicles[st.vehicle_id]
        announcer_lane = st.transmitter_lanes.get(directive.announced_by)
        if announcer_lane is None:
            return
        road = self.config.road
        for sub in directive.maneuver.sub_maneuvers:
            if not isinstance(sub.trr.location, LaneSegment):
                continue
            target = announcer_lane + sub.trr.location.lane_offset
            seg = sub.trr.location
            if vehicle.lane != target:
                continue
            if not seg.start_s - 50.0 <= vehicle.s <= seg.end_s + 50.0:
                continue
            away = target - 1 if target - 1 >= 0 else target + 1
            if 0 <= away < road.lane_count and vehicle.lane_change is None:
                vehicle.lane_change = LaneChange(vehicle.lane, away, now)

    def _maybe_request(self, st: Station, tick: int, now: int) -> None:
        if st.next_arrival_ms is None:
            return
        rate = self.config.request_generator.rate_per_min / 60000.0
        while st.next_arrival_ms <= now:
            st.next_arrival_ms += 1 + int(st.rng.expovariate(rate))
            self._issue_honest_request(st, tick, now)

    def _busy_executants(self, st: Station, now: int) -> set[StationId]:
        busy: set[StationId] = set()
        for rec in st.sessions.values():
            if rec.session.phase == Phase.AWAITING_RESPONSES:
                busy |= set(rec.session.executants)
            elif rec.session.phase == Phase.ACTIVE:
                last_end = max(s.end_time
                               for s in rec.session.maneuver.sub_maneuvers)
                if last_end >= now:
                    busy |= set(rec.session.executants)
        return busy

    def _issue_honest_request(self, st: Station, tick: int, now: int) -> None:
        neighbors = st.neighbors(now)
        if not neighbors:
            return
        busy = self._busy_executants(st, now)
        me = self.world.vehicles[st.vehicle_id]
        road = self.config.road
        candidates = []
        for sid in neighbors:
            if sid in busy:
                continue
            hist = st.bsm_history.get(sid)
            if not hist:
                continue
            _, bsm, _ = hist[-1]
            candidates.append((abs(bsm.s - me.s), sid, bsm))
        candidates.sort(key=lambda c: (c[0], c[1]))

        start = now + HONEST_REQUEST_LEAD_MS
        end = start + HONEST_REQUEST_DURATION_MS
        for _, executant, bsm in candidates:
            travel = bsm.speed / 3600.0 * (end - now)
            sub = SubManeuver(
                executant_id=executant,
                current_status=ManeuverStatus.PROPOSED,
                trr=TargetRoadResource(
                    TrrType.LANE_SEGMENT,
                    LaneSegment(bsm.lane - me.lane, bsm.s - 5.0,
                                bsm.s + travel + 15.0)),
                start_time=start,
                end_time=end,
                min_speed=max(30.0, bsm.speed - 30.0),
                max_speed=min(road.speed_limit, bsm.speed + 10.0),
                executant_width=bsm.width,
                executant_length=bsm.length,
            )
            region = region_of(sub, float(me.lane), road.lane_width)
            if any(regions_conflict(region, r.region)
                   for r in st.stored_reservations):
                continue  # someone already holds that space: pick another
            destinations = sorted(set(neighbors) | {executant})
            session, msg = protocol.create_request(
                st.primary.station_id, Maneuver((sub,)), destinations,
                Broadcast(), now, st.seq)
            st.seq += 1
            msg_hash = self._sign_and_send(msg, st.primary, Broadcast(),
                                           tick, now)
            st.sessions[msg.maneuver_id] = SessionRecord(
                session=session, request_hash=msg_hash,
                transmitter_lane=me.lane, is_requester=True)
            for s in msg.maneuver.sub_maneuvers:
                st.stored_reservations.append(StoredReservation(
                    maneuver_id=msg.maneuver_id, requester=msg.source_id,
                    executant=s.executant_id,
                    region=region_of(s, float(me.lane), road.lane_width)))
            return

    def _run_tasks(self, st: Station, tick: int, now: int) -> None:
        vehicle = self.world.vehicles[st.vehicle_id]
        for task in st.tasks:
            rec = st.sessions.get(task.maneuver_id)
            alive = rec is not None and rec.session.phase == Phase.ACTIVE
            if not task.started and alive and now >= task.sub.start_time:
                task.started = True
                if (task.target_lane is not None
                        and task.target_lane != vehicle.lane):
                    vehicle.lane_change = LaneChange(vehicle.lane,
                                                     task.target_lane, now)
            if (not task.completed and task.started and alive
                    and now >= task.sub.end_time):
                task.completed = True
                msg = Mscm(
                    msg_type=MscmType.COMPLETE,
                    source_id=st.primary.station_id,
                    msg_timestamp=now,
                    maneuver_id=task.maneuver_id,
                    destination_ids=tuple(sorted(
                        rec.session.participants - st.own_stations)),
                    execution_status=ExecutionStatus.COMPLETED,
                )
                msg_hash = self._sign_and_send(msg, st.primary, Broadcast(),
                                               tick, now)
                self._apply_session_msg(st, msg, msg_hash, tick, now)
        st.tasks = [t for t in st.tasks if not t.completed]

    def _expire(self, st: Station, tick: int, now: int) -> None:
        sessions = {mid: rec.session for mid, rec in st.sessions.items()}
        updated, transitions = expire_sessions(sessions, now)
        for mid, old_phase, new_phase in transitions:
            rec = st.sessions[mid]
            rec.session = updated[mid]
            self.log.append(tick, "session_transition", {
                "station": st.primary.station_id,
                "maneuver_id": mid,
                "from_phase": old_phase.value,
                "to_phase": new_phase.value,
                "cause_msg": "timeout",
            })
            st.drop_session_artifacts(mid)
            if (new_phase == Phase.EXPIRED and rec.is_requester
                    and not rec.expiry_reported and rec.session.pending):
                rec.expiry_reported = True
                st.expiries.append(SessionExpiryInput(
                    maneuver_id=mid,
                    requester=rec.session.requester,
                    pending=rec.session.pending,
                    created_at=rec.session.created_at,
                    expired_at=now))

    # -- attacker behavior ------------------------------------------------

    def _attacker_context(self, st: Station, now: int) -> AttackerContext:
        vehicle = self.world.vehicles[st.vehicle_id]
        inbox = [pm.message for pm in st.delivered
                 if pm.message is not None
                 and pm.message.msg_type == MscmType.REQUEST
                 and pm.message.source_id not in st.own_stations
                 and any(sid in st.own_stations
                         for sid in pm.message.destination_ids)]
        return AttackerContext(
            attacker=st.vehicle_id,
            credentials=st.creds,
            vehicle=vehicle,
            road=self.config.road,
            perception=perceive(self.world, st.vehicle_id,
                                self.config.perception_range_m, now),
            neighbors=st.neighbors(now),
            neighbor_dims=dict(st.neighbor_dims),
            inbox_requests=inbox,
            now=now,
            next_seq=st.seq,
            rng=st.rng,
        )

    def _attacker_logic(self, st: Station, tick: int, now: int) -> None:
        spec = self.attack_by_vehicle.get(st.vehicle_id)
        ctx = self._attacker_context(st, now)
        actions: list = []
        if spec is not None:
            actions.extend(inject(spec, ctx))
        fig4 = self.config.fig4
        if fig4 is not None and st.vehicle_id == fig4.attacker:
            for which, due in ((0, fig4.t1_ms), (1, fig4.t2_ms)):
                if not self.fig4_sent[which] and now >= due:
                    victim = fig4.victim_a if which == 0 else fig4.victim_b
                    hist = st.bsm_history.get(victim)
                    if hist:
                        _, bsm, _ = hist[-1]
                        actions.append(craft_fig4_request(
                            fig4, which, ctx, (bsm.lane, bsm.s, bsm.speed)))
                        self.fig4_sent[which] = True

        attack_label = spec.id.value if spec is not None else "FIG4"
        answered: set[int] = set()
        for action in actions:
            if isinstance(action, SuppressAction):
                answered.add(action.maneuver_id)
                self.attribution.append({
                    "tick": tick, "now": now, "kind": "suppression",
                    "attack": attack_label,
                    "attacker_station": st.primary.station_id,
                    "maneuver_id": action.maneuver_id})
                continue
            cred = st.creds[action.credential_index]
            self._sign_and_send(action.message, cred, action.mode, tick, now,
                                mutation=action.mutation,
                                attack_id=attack_label)
            if (action.message.msg_type == MscmType.REQUEST
                    and action.message.source_id in st.own_stations):
                st.seq += 1
            if action.message.msg_type == MscmType.RESPONSE:
                answered.add(action.message.maneuver_id)

        # Cover behavior: agree to whatever honest requests remain, so the
        # attacker otherwise looks like a cooperative neighbor.
        response_arms = (AttackId.A4_DENY_ALL_REQUESTS,
                         AttackId.A9_SILENT_NON_RESPONSE)
        if spec is None or spec.id not in response_arms:
            for req in ctx.inbox_requests:
                if req.maneuver_id in answered:
                    continue
                resp = Mscm(
                    msg_type=MscmType.RESPONSE,
                    source_id=st.primary.station_id,
                    msg_timestamp=now,
                    maneuver_id=req.maneuver_id,
                    destination_ids=(req.source_id,),
                    reason_code=ReasonCode.agreed(),
                )
                self._sign_and_send(resp, st.primary, Broadcast(), tick, now)

    # -- detectors and reports ----------------------------------------------

    def _detector_stage(self, tick: int, now: int) -> None:
        for vid in sorted(self.stations):
            st = self.stations[vid]
            mscm_inputs = st.delivered
            bsm_inputs = st.delivered_bsms if st.trajectory_watches else []
            if not (mscm_inputs or bsm_inputs or st.expiries):
                st.delivered = []
                st.delivered_bsms = []
                continue
            vehicle = self.world.vehicles[vid]
            ctx = DetectionContext(
                reporter=st.primary.station_id,
                road=self.config.road,
                thresholds=self.config.thresholds,
                now=now,
                active=self.config.detectors,
                perception=perceive(self.world, vid,
                                    self.config.perception_range_m, now),
                observer_s=vehicle.s,
                perception_range=self.config.perception_range_m,
                avg_neighbor_speed=st.avg_neighbor_speed(now),
                transmitter_lanes=st.transmitter_lanes,
                bsm_history=st.bsm_history,
                mscm_seen=st.mscm_seen,
                response_history=st.response_history,
                stored_reservations=st.stored_reservations,
                trajectory_watches=st.trajectory_watches,
                static_claims=st.static_claims,
                special_ids=self.special_ids,
            )
            for pm in mscm_inputs:
                if (pm.message is not None
                        and pm.message.source_id in st.own_stations):
                    continue
                item = MessageInput(msg_hash=pm.msg_hash, message=pm.message,
                                    error=pm.error)
                self._emit_events(st, run_detectors(item, ctx), tick)
                if pm.message is not None:
                    record_static_claims(pm.message, ctx, pm.msg_hash)
            for pm in bsm_inputs:
                item = BsmInput(msg_hash=pm.msg_hash, bsm=pm.bsm)
                self._emit_events(st, run_detectors(item, ctx), tick)
            for expiry in st.expiries:
                self._emit_events(st, run_detectors(expiry, ctx), tick)
            st.delivered = []
            st.delivered_bsms = []
            st.expiries = []

    def _emit_events(self, st: Station, events: list[DetectionEvent],
                     tick: int) -> None:
        for event in events:
            key = (event.detector.value, event.suspect, event.message_ref)
            if key in st.emitted_events:
                continue
            st.emitted_events.add(key)
            st.new_events.append(event)
            self.log.append(tick, "detection", {
                "reporter": event.reporter,
                "detector": event.detector.value,
                "suspect": event.suspect,
                "message_ref": event.message_ref,
                "timestamp": event.timestamp,
                "evidence": event.evidence,
            })

    def _report_stage(self, tick: int, now: int) -> None:
        for vid in sorted(self.stations):
            st = self.stations[vid]
            if not st.new_events:
                continue
            by_suspect: dict[StationId, list[DetectionEvent]] = {}
            for event in st.new_events:
                by_suspect.setdefault(event.suspect, []).append(event)
            for suspect in sorted(by_suspect):
                try:
                    report = generate_report(by_suspect[suspect], st.evidence,
                                             st.primary.station_id, now)
                except detection.MissingEvidence:
                    continue
                self.log.append(tick, "report", {
                    "reporter": report.reporter,
                    "suspect": report.suspect,
                    "event_count": len(report.events),
                    "detectors": sorted({e.detector.value
                                         for e in report.events}),
                    "included": len(report.included_messages),
                })
                if self.config.revoke_on_report and suspect not in self.crl:
                    self.pending_revocations.append(
                        (now + self.config.revocation_delay_ms, suspect))
            st.new_events = []

    def _apply_revocations(self, now: int) -> None:
        if not self.pending_revocations:
            return
        due = sorted(sid for when, sid in self.pending_revocations
                     if when <= now)
        if due:
            for sid in due:
                self.crl = revoke(self.crl, sid)
            self.pending_revocations = [
                (when, sid) for when, sid in self.pending_revocations
                if when > now]

    # -- main loop ----------------------------------------------------------

    def run(self) -> RunResult:
        config = self.config
        n_ticks = config.duration_ms // self.tick_ms
        for tick in range(n_ticks):
            now = tick * self.tick_ms
            self._apply_revocations(now)
            if tick > 0:
                step_kinematics(self.world, now, self.tick_ms)
            if now % BSM_PERIOD_MS == 0:
                self._emit_bsms(tick, now)
            self._deliver(tick, now)
            self._station_logic(tick, now)
            self._detector_stage(tick, now)
            self._report_stage(tick, now)
            if self.trace_kinematics:
                for vid in self.world.ids():
                    v = self.world.vehicles[vid]
                    self.log.append(tick, "kinematics", {
                        "vehicle": vid, "lane": v.lane,
                        "s": round(v.s, 3), "speed": v.speed})
        metrics = compute_metrics(self.log.records, self.attribution)
        return RunResult(config=config, log=self.log,
                         attribution=self.attribution, metrics=metrics)


def run(config: ScenarioConfig, trace_kinematics: bool = False) -> RunResult:
    """Execute one scenario deterministically."""
    return Simulation(config, trace_kinematics=trace_kinematics).run()


def compute_metrics(records: list[dict], attribution: list[dict]) -> RunMetrics:
    """Derive run metrics from the event log plus hidden ground truth.

    Raises LogMismatch when the attribution references message hashes the
    log has never seen, which catches mixed-up run artifacts.
    """
    sent_hashes = {rec["payload"]["hash"] for rec in records
                   if rec["kind"] == "msg_sent"}
    for rec in attribution:
        if rec["kind"] == "emission" and rec["hash"] not in sent_hashes:
            raise LogMismatch(
                f"attributed message {rec['hash']} absent from event log")

    attacker_stations = {rec["attacker_station"] for rec in attribution
                         if "attacker_station" in rec}
    first_emission: dict[str, int] = {}
    emissions: dict[str, int] = {}
    for rec in attribution:
        if rec["kind"] not in ("emission", "suppression"):
            continue
        attack = rec["attack"]
        ts = rec["now"]
        emissions[attack] = emissions.get(attack, 0) + 1
        if attack not in first_emission or ts < first_emission[attack]:
            first_emission[attack] = ts

    detections: list[dict] = []
    sent = {"bsm": 0, "mscm": 0}
    delivered = {"bsm": 0, "mscm": 0}
    dropped = {"bsm": 0, "mscm": 0}
    processing: dict[str, int] = {}
    sessions: dict[str, int] = {}
    for rec in records:
        kind = rec["kind"]
        payload = rec["payload"]
        if kind == "msg_sent":
            wire = payload["wire"]
            sent[wire] += 1
            n_drop = len(payload["dropped"])
            delivered[wire] += len(payload["recipients"]) - n_drop
            dropped[wire] += n_drop
        elif kind == "msg_delivered":
            key = str(payload["recipient"])
            processing[key] = processing.get(key, 0) + payload.get("cost", 0)
        elif kind == "detection":
            detections.append(payload)
        elif kind == "session_transition":
            phase = payload["to_phase"]
            sessions[phase] = sessions.get(phase, 0) + 1

    by_value = {a.value: a for a in AttackId}
    per_attack: dict[str, dict] = {}
    for attack, first_ms in sorted(first_emission.items()):
        expected = (EXPECTED_DETECTOR[by_value[attack]].value
                    if attack in by_value else None)
        relevant = [d for d in detections
                    if d["suspect"] in attacker_stations
                    and d["timestamp"] >= first_ms]
        fired: dict[str, int] = {}
        for d in relevant:
            fired.setdefault(d["detector"], d["timestamp"])
        if expected is not None:
            first_flag = fired.get(expected)
        else:
            first_flag = min(fired.values(), default=None)
        per_attack[attack] = {
            "attacker_stations": sorted(attacker_stations),
            "emissions": emissions.get(attack, 0),
            "first_emission_ms": first_ms,
            "expected_detector": expected,
            "flagged": first_flag is not None,
            "detection_latency_ms": (first_flag - first_ms
                                     if first_flag is not None else None),
            "detectors_fired": dict(sorted(fired.items())),
            "tp_events": len(relevant),
        }

    false_positives: dict[str, int] = {}
    fp_total = 0
    for d in detections:
        if d["suspect"] not in attacker_stations:
            key = str(d["suspect"])
            false_positives[key] = false_positives.get(key, 0) + 1
            fp_total += 1
    false_positives["_total"] = fp_total

    total_deliveries = delivered["bsm"] + delivered["mscm"]
    total_drops = dropped["bsm"] + dropped["mscm"]
    attempts = total_deliveries + total_drops
    channel = {
        "bsm_sent": sent["bsm"], "mscm_sent": sent["mscm"],
        "bsm_delivered": delivered["bsm"],
        "mscm_delivered": delivered["mscm"],
        "bsm_dropped": dropped["bsm"], "mscm_dropped": dropped["mscm"],
        "messages_sent": sent["bsm"] + sent["mscm"],
        "drop_rate": (total_drops / attempts) if attempts else 0.0,
    }
    processing["_total"] = sum(processing.values())
    return RunMetrics(
        per_attack=per_attack,
        false_positives=false_positives,
        total_detection_events=len(detections),
        channel=channel,
        processing_cost=processing,
        sessions=sessions,
    )
