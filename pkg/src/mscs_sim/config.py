"""Scenario configuration: schema, validation and the reference setup.

Configs are plain JSON documents. Validation reports the path of the first
offending field so a bad config fails fast with a usable message.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields as dc_fields, replace
from pathlib import Path
from typing import Any, Optional

from .attacks import AttackId, AttackSpec, Fig4Plan, fig4_scenario, validate_spec
from .detection import (
    ALL_DETECTORS,
    DEFAULT_DETECTORS,
    DetectorId,
    DetectorThresholds,
)
from .identity import LongTermId
from .mscm import StationId
from .world import MapModel

BSM_CADENCE_MS = 100


class ConfigError(Exception):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def station_id_for(long_term: LongTermId, index: int = 0) -> StationId:
    """Deterministic pseudonym id for a vehicle's k-th credential."""
    return long_term * 256 + index


@dataclass(frozen=True)
class VehicleConfig:
    long_term: LongTermId
    lane: int
    s: float
    speed: float
    width: float = 1.8
    length: float = 4.5
    is_special: bool = False
    credential_count: int = 1
    bsm_enabled: bool = True


@dataclass(frozen=True)
class ChannelConfig:
    loss_prob: float = 0.0
    latency_ms: int = 100
    range_m: float = 300.0


@dataclass(frozen=True)
class RequestGeneratorConfig:
    rate_per_min: float = 2.0
    enabled: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    duration_ms: int
    road: MapModel
    vehicles: tuple[VehicleConfig, ...]
    tick_ms: int = 100
    attacks: tuple[AttackSpec, ...] = ()
    fig4: Optional[Fig4Plan] = None
    channel: ChannelConfig = ChannelConfig()
    detectors: frozenset[DetectorId] = DEFAULT_DETECTORS
    thresholds: DetectorThresholds = DetectorThresholds()
    request_generator: RequestGeneratorConfig = RequestGeneratorConfig()
    perception_range_m: float = 100.0
    spectator_detection: bool = True
    revoke_on_report: bool = False
    revocation_delay_ms: int = 0


def _require(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise ConfigError(f"{path}.{key}", "missing required key")
    return obj[key]


def _typed(value: Any, kinds, path: str):
    if isinstance(value, bool) and bool not in (
            kinds if isinstance(kinds, tuple) else (kinds,)):
        raise ConfigError(path, f"expected {kinds}, got bool")
    if not isinstance(value, kinds):
        raise ConfigError(path, f"expected {kinds}, got {type(value).__name__}")
    return value


def _parse_detectors(spec: Any, path: str) -> frozenset[DetectorId]:
    if spec == "default":
        return DEFAULT_DETECTORS
    if spec == "all":
        return ALL_DETECTORS
    if not isinstance(spec, list):
        raise ConfigError(path, "expected 'default', 'all', or a list of ids")
    by_value = {d.value: d for d in DetectorId}
    out = set()
    for i, name in enumerate(spec):
        if name not in by_value:
            raise ConfigError(f"{path}[{i}]", f"unknown detector {name!r}")
        out.add(by_value[name])
    return frozenset(out)


def parse_detector_list(names: str) -> frozenset[DetectorId]:
    """Parse a comma-separated detector list such as 'D1,D5,D7x'."""
    return _parse_detectors([n.strip() for n in names.split(",") if n.strip()],
                            "detectors")


def from_dict(doc: dict) -> ScenarioConfig:
    """Validate a JSON document into a scenario, reporting the field path."""
    if not isinstance(doc, dict):
        raise ConfigError("$", "top level must be an object")

    seed = _typed(_require(doc, "seed", "$"), int, "$.seed")
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("$.seed", "must fit in 64 bits")
    duration = _typed(_require(doc, "duration_ms", "$"), int, "$.duration_ms")
    if duration <= 0:
        raise ConfigError("$.duration_ms", "must be positive")
    tick_ms = _typed(doc.get("tick_ms", 100), int, "$.tick_ms")
    if tick_ms <= 0 or BSM_CADENCE_MS % tick_ms != 0:
        raise ConfigError("$.tick_ms", "must divide the 100 ms beacon cadence")

    road_doc = _typed(_require(doc, "map", "$"), dict, "$.map")
    road = MapModel(
        lane_count=_typed(_require(road_doc, "lane_count", "$.map"), int,
                          "$.map.lane_count"),
        lane_width=float(_typed(_require(road_doc, "lane_width", "$.map"),
                                (int, float), "$.map.lane_width")),
        speed_limit=float(_typed(_require(road_doc, "speed_limit", "$.map"),
                                 (int, float), "$.map.speed_limit")),
        road_length=float(_typed(_require(road_doc, "road_length", "$.map"),
                                 (int, float), "$.map.road_length")),
    )
    if road.lane_count < 1:
        raise ConfigError("$.map.lane_count", "must be at least 1")

    vehicles = []
    seen_ids: set[int] = set()
    vehicle_docs = _typed(_require(doc, "vehicles", "$"), list, "$.vehicles")
    if not vehicle_docs:
        raise ConfigError("$.vehicles", "at least one vehicle is required")
    for i, vdoc in enumerate(vehicle_docs):
        path = f"$.vehicles[{i}]"
        vdoc = _typed(vdoc, dict, path)
        long_term = _typed(_require(vdoc, "long_term", path), int,
                           f"{path}.long_term")
        if not 0 < long_term < 2 ** 24:
            raise ConfigError(f"{path}.long_term",
                              "must be positive and below 2^24")
        if long_term in seen_ids:
            raise ConfigError(f"{path}.long_term", "duplicate vehicle id")
        seen_ids.add(long_term)
        lane = _typed(_require(vdoc, "lane", path), int, f"{path}.lane")
        if not 0 <= lane < road.lane_count:
            raise ConfigError(f"{path}.lane", "off the configured road")
        vehicles.append(VehicleConfig(
            long_term=long_term,
            lane=lane,
            s=float(_typed(_require(vdoc, "s", path), (int, float),
                           f"{path}.s")),
            speed=float(_typed(_require(vdoc, "speed", path), (int, float),
                               f"{path}.speed")),
            width=float(vdoc.get("width", 1.8)),
            length=float(vdoc.get("length", 4.5)),
            is_special=bool(vdoc.get("is_special", False)),
            credential_count=_typed(vdoc.get("credential_count", 1), int,
                                    f"{path}.credential_count"),
            bsm_enabled=bool(vdoc.get("bsm_enabled", True)),
        ))
        if vehicles[-1].credential_count < 1:
            raise ConfigError(f"{path}.credential_count", "must be at least 1")
        if vehicles[-1].speed < 0:
            raise ConfigError(f"{path}.speed", "must be non-negative")

    by_id = {v.long_term: v for v in vehicles}

    attacks = []
    for i, adoc in enumerate(_typed(doc.get("attacks", []), list, "$.attacks")):
        path = f"$.attacks[{i}]"
        adoc = _typed(adoc, dict, path)
        raw_id = _require(adoc, "id", path)
        by_value = {a.value: a for a in AttackId}
        if raw_id not in by_value:
            raise ConfigError(f"{path}.id", f"unknown attack {raw_id!r}")
        attacker = _typed(_require(adoc, "attacker", path), int,
                          f"{path}.attacker")
        if attacker not in by_id:
            raise ConfigError(f"{path}.attacker", "references unknown vehicle")
        spec = AttackSpec(id=by_value[raw_id], attacker=attacker,
                          params=dict(adoc.get("params", {})))
        try:
            validate_spec(spec, by_id[attacker].credential_count)
        except Exception as err:
            raise ConfigError(f"{path}.params", str(err)) from err
        attacks.append(spec)

    fig4 = None
    if "fig4" in doc:
        fdoc = _typed(doc["fig4"], dict, "$.fig4")
        for key in ("attacker", "victim_a", "victim_b"):
            who = _typed(_require(fdoc, key, "$.fig4"), int, f"$.fig4.{key}")
            if who not in by_id:
                raise ConfigError(f"$.fig4.{key}", "references unknown vehicle")
        try:
            fig4 = fig4_scenario(
                attacker=fdoc["attacker"],
                victim_a=station_id_for(fdoc["victim_a"]),
                victim_b=station_id_for(fdoc["victim_b"]),
                t1_ms=_typed(fdoc.get("t1_ms", 1000), int, "$.fig4.t1_ms"),
                t2_ms=_typed(fdoc.get("t2_ms", 2000), int, "$.fig4.t2_ms"),
                t3_ms=_typed(fdoc.get("t3_ms", 10000), int, "$.fig4.t3_ms"),
                overhearing=bool(fdoc.get("overhearing", True)),
            )
        except Exception as err:
            raise ConfigError("$.fig4", str(err)) from err

    cdoc = _typed(doc.get("channel", {}), dict, "$.channel")
    channel = ChannelConfig(
        loss_prob=float(cdoc.get("loss_prob", 0.0)),
        latency_ms=_typed(cdoc.get("latency_ms", 100), int,
                          "$.channel.latency_ms"),
        range_m=float(cdoc.get("range_m", 300.0)),
    )
    if not 0.0 <= channel.loss_prob <= 1.0:
        raise ConfigError("$.channel.loss_prob", "must lie in [0, 1]")
    if channel.latency_ms < 0:
        raise ConfigError("$.channel.latency_ms", "must be non-negative")

    ddoc = _typed(doc.get("detectors", {}), dict, "$.detectors")
    detectors = _parse_detectors(ddoc.get("active", "default"),
                                 "$.detectors.active")
    overrides = _typed(ddoc.get("thresholds", {}), dict,
                       "$.detectors.thresholds")
    valid_keys = {f.name for f in dc_fields(DetectorThresholds)}
    unknown = set(overrides) - valid_keys
    if unknown:
        raise ConfigError("$.detectors.thresholds",
                          f"unknown keys {sorted(unknown)}")
    thresholds = replace(DetectorThresholds(), **overrides)

    gdoc = _typed(doc.get("request_generator", {}), dict, "$.request_generator")
    generator = RequestGeneratorConfig(
        rate_per_min=float(gdoc.get("rate_per_min", 2.0)),
        enabled=bool(gdoc.get("enabled", True)),
    )
    if generator.rate_per_min < 0:
        raise ConfigError("$.request_generator.rate_per_min",
                          "must be non-negative")

    return ScenarioConfig(
        seed=seed,
        duration_ms=duration,
        tick_ms=tick_ms,
        road=road,
        vehicles=tuple(vehicles),
        attacks=tuple(attacks),
        fig4=fig4,
        channel=channel,
        detectors=detectors,
        thresholds=thresholds,
        request_generator=generator,
        perception_range_m=float(doc.get("perception_range_m", 100.0)),
        spectator_detection=bool(doc.get("spectator_detection", True)),
        revoke_on_report=bool(doc.get("revoke_on_report", False)),
        revocation_delay_ms=_typed(doc.get("revocation_delay_ms", 0), int,
                                   "$.revocation_delay_ms"),
    )


def load(path: str | Path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError("$", f"not valid JSON: {err}") from err
    return from_dict(doc)


def reference_scenario(seed: int, attacks: Optional[list[dict]] = None,
                       duration_ms: int = 300000,
                       detectors: Any = "default",
                       request_rate_per_min: float = 12.0) -> ScenarioConfig:
    """The standard benchmark world: 3 lanes, 5 honest vehicles, 1 attacker.

    Vehicles share one speed so spacing stays constant; the attacker (id 6)
    sits mid-pack so its emissions reach several observers. Per-lane spacing
    leaves honest reservation corridors disjoint by construction.
    """
    doc = {
        "seed": seed,
        "duration_ms": duration_ms,
        "tick_ms": 100,
        "map": {"lane_count": 3, "lane_width": 3.5, "speed_limit": 130.0,
                "road_length": 20000.0},
        "vehicles": [
            {"long_term": 1, "lane": 0, "s": 0.0, "speed": 100.0},
            {"long_term": 2, "lane": 1, "s": 50.0, "speed": 100.0},
            {"long_term": 3, "lane": 0, "s": 150.0, "speed": 100.0},
            {"long_term": 4, "lane": 1, "s": 200.0, "speed": 100.0},
            {"long_term": 5, "lane": 2, "s": 250.0, "speed": 100.0},
            {"long_term": 6, "lane": 2, "s": 100.0, "speed": 100.0,
             "credential_count": 3},
        ],
        "attacks": attacks or [],
        "channel": {"loss_prob": 0.05, "latency_ms": 100, "range_m": 300.0},
        "detectors": {"active": detectors},
        "request_generator": {"rate_per_min": request_rate_per_min,
                              "enabled": True},
    }
    return from_dict(doc)


def fig4_reference_scenario(seed: int, d7x_enabled: bool,
                            duration_ms: int = 20000) -> ScenarioConfig:
    """Two side-by-side victims and an attacker between them, one lane over."""
    detectors = sorted(d.value for d in DEFAULT_DETECTORS
                       if d7x_enabled
                       or d != DetectorId.D7X_CROSS_SESSION_OVERLAP)
    doc = {
        "seed": seed,
        "duration_ms": duration_ms,
        "tick_ms": 100,
        "map": {"lane_count": 3, "lane_width": 3.5, "speed_limit": 130.0,
                "road_length": 20000.0},
        "vehicles": [
            {"long_term": 1, "lane": 0, "s": 100.0, "speed": 100.0},
            {"long_term": 2, "lane": 2, "s": 100.0, "speed": 100.0},
            {"long_term": 3, "lane": 1, "s": 100.0, "speed": 100.0},
        ],
        "fig4": {"attacker": 3, "victim_a": 1, "victim_b": 2,
                 "t1_ms": 1000, "t2_ms": 2000, "t3_ms": 10000,
                 "overhearing": True},
        "channel": {"loss_prob": 0.0, "latency_ms": 100, "range_m": 300.0},
        "detectors": {"active": detectors},
        "request_generator": {"enabled": False},
    }
    return from_dict(doc)
