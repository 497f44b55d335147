"""Ground-truth road world: kinematics, map queries, perception and BSMs.

A single straight multi-lane segment carries every scenario; all the attack
and defense mechanics under study are expressible on it. Perception is
noiseless with a hard range cutoff, so detectors are evaluated against clean
corroboration. Positions use meters along the road (s) and a float lane
coordinate; the integer lane a vehicle reports is the nearest lane index.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from typing import Optional

from .identity import LongTermId, PseudonymCredential, sign
from .mscm import SignatureEnvelope, StationId

BSM_PERIOD_MS = 100
LANE_CHANGE_DURATION_MS = 3000
DEFAULT_PERCEPTION_RANGE_M = 100.0
NEIGHBOR_SPEED_WINDOW_MS = 2000

_BSM_BODY = struct.Struct("<IQidddd")


@dataclass(frozen=True)
class MapModel:
    lane_count: int
    lane_width: float
    speed_limit: float
    road_length: float

    def __post_init__(self) -> None:
        if self.lane_count < 1:
            raise ValueError("lane_count must be positive")


def lane_exists(road: MapModel, observer_lane: int, lane_offset: int) -> bool:
    """Whether a lane offset from the observer's lane lands on the road."""
    if not 0 <= observer_lane < road.lane_count:
        raise ValueError(f"observer lane {observer_lane} off the map")
    return 0 <= observer_lane + lane_offset < road.lane_count


@dataclass
class LaneChange:
    from_lane: int
    to_lane: int
    start_time: int


@dataclass
class VehicleState:
    long_term: LongTermId
    lane_pos: float
    s: float
    speed: float  # km/h
    width: float
    length: float
    is_special: bool = False
    bsm_enabled: bool = True
    lane_change: Optional[LaneChange] = None

    @property
    def lane(self) -> int:
        return int(round(self.lane_pos))


@dataclass(frozen=True)
class Bsm:
    source_id: StationId
    timestamp: int
    lane: int
    s: float
    speed: float
    width: float
    length: float
    signature: Optional[SignatureEnvelope] = None


@dataclass(frozen=True)
class ObservedVehicle:
    lane: int
    s: float
    width: float
    length: float


@dataclass(frozen=True)
class PerceptionSnapshot:
    observer: LongTermId
    timestamp: int
    observed: tuple[ObservedVehicle, ...]


class World:
    """Mutable ground truth, owned and stepped solely by the event loop."""

    def __init__(self, road: MapModel, vehicles: list[VehicleState]) -> None:
        self.road = road
        self.vehicles: dict[LongTermId, VehicleState] = {}
        for v in vehicles:
            if v.long_term in self.vehicles:
                raise ValueError(f"duplicate vehicle id {v.long_term}")
            self.vehicles[v.long_term] = v
        self._ids = sorted(self.vehicles)

    def ids(self) -> list[LongTermId]:
        return list(self._ids)

    def get(self, long_term: LongTermId) -> VehicleState:
        return self.vehicles[long_term]


def step_kinematics(world: World, now: int, dt: int) -> None:
    """Advance every vehicle by dt milliseconds of constant-speed motion.

    Vehicles with a pending lane change drift laterally at a constant rate
    and complete the change three seconds after its start time.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    for vid in world._ids:
        v = world.vehicles[vid]
        v.s += v.speed / 3600.0 * dt
        lc = v.lane_change
        if lc is not None and now >= lc.start_time:
            progress = min(1.0, (now - lc.start_time) / LANE_CHANGE_DURATION_MS)
            v.lane_pos = lc.from_lane + (lc.to_lane - lc.from_lane) * progress
            if progress >= 1.0:
                v.lane_pos = float(lc.to_lane)
                v.lane_change = None


def perceive(world: World, observer: LongTermId,
             range_m: float = DEFAULT_PERCEPTION_RANGE_M,
             now: int = 0) -> PerceptionSnapshot:
    """Noiseless snapshot of every other vehicle within longitudinal range."""
    me = world.vehicles[observer]
    observed = tuple(
        ObservedVehicle(v.lane, v.s, v.width, v.length)
        for vid in world._ids
        if vid != observer
        for v in (world.vehicles[vid],)
        if abs(v.s - me.s) <= range_m
    )
    return PerceptionSnapshot(observer=observer, timestamp=now, observed=observed)


def encode_bsm_body(bsm: Bsm) -> bytes:
    return _BSM_BODY.pack(bsm.source_id, bsm.timestamp, bsm.lane,
                          bsm.s, bsm.speed, bsm.width, bsm.length)


def make_bsm(vehicle: VehicleState, cred: PseudonymCredential, now: int) -> Bsm:
    """Build and sign one beacon carrying the vehicle's ground-truth state."""
    unsigned = Bsm(source_id=cred.station_id, timestamp=now, lane=vehicle.lane,
                   s=vehicle.s, speed=vehicle.speed, width=vehicle.width,
                   length=vehicle.length)
    env = sign(encode_bsm_body(unsigned), cred, now)
    return replace(unsigned, signature=env)


def emit_bsms(world: World, creds: dict[LongTermId, PseudonymCredential],
              now: int) -> list[Bsm]:
    """One signed beacon per beaconing vehicle; cadence is 100 ms."""
    if now % BSM_PERIOD_MS != 0:
        raise ValueError("beacons are emitted on the 100 ms grid")
    out = []
    for vid in world._ids:
        v = world.vehicles[vid]
        if v.bsm_enabled:
            out.append(make_bsm(v, creds[vid], now))
    return out


def average_neighbor_speed(bsms: list[tuple[int, Bsm]], now: int,
                           window_ms: int = NEIGHBOR_SPEED_WINDOW_MS
                           ) -> Optional[float]:
    """Mean speed over beacons received in the trailing window, or None."""
    speeds = [b.speed for ts, b in bsms if now - ts <= window_ms]
    if not speeds:
        return None
    return sum(speeds) / len(speeds)
