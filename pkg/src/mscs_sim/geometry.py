"""Space-time geometry for road-resource reservations.

A sub-maneuver's reservation is treated as a prism: a time interval crossed
with a 2D footprint on the road surface. Footprints are axis-aligned
rectangles in (lateral lane units, longitudinal meters) for lane segments,
or simple polygons for geo regions. Two reservations conflict when their
time intervals intersect and their footprints share positive area.

Lane-segment footprints are inflated by the executant's body: half the
width laterally (converted to lane units) and half the length at each
longitudinal end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .mscm import GeoRegion, LaneSegment, SubManeuver, TargetRoadResource, TrrType

DEFAULT_LANE_WIDTH_M = 3.5


@dataclass(frozen=True)
class Rect:
    """Axis-aligned footprint: lateral extent in lane units, s in meters."""

    lat_lo: float
    lat_hi: float
    s_lo: float
    s_hi: float


@dataclass(frozen=True)
class PolyFootprint:
    """Polygon footprint with vertices (s meters, lateral lane units)."""

    points: tuple[tuple[float, float], ...]


Footprint = Union[Rect, PolyFootprint]


@dataclass(frozen=True)
class SpaceTimeRegion:
    start_time: int
    end_time: int
    footprint: Footprint


def footprint_of(trr: TargetRoadResource, width_m: float, length_m: float,
                 base_lane: float = 0.0,
                 lane_width_m: float = DEFAULT_LANE_WIDTH_M) -> Footprint:
    """Resolve a road resource into a footprint.

    ``base_lane`` anchors the transmitter-relative lane offset; pass the
    transmitter's lane to obtain absolute coordinates, or leave it at zero to
    compare resources from the same transmitter in its own frame.
    """
    half_lane = max(width_m, 0.0) / (2.0 * lane_width_m)
    half_len = max(length_m, 0.0) / 2.0
    if isinstance(trr.location, LaneSegment):
        center = base_lane + trr.location.lane_offset
        return Rect(center - half_lane, center + half_lane,
                    trr.location.start_s - half_len,
                    trr.location.end_s + half_len)
    pts = tuple((x, base_lane + y / lane_width_m) for x, y in trr.location.polygon)
    return PolyFootprint(pts)


def region_of(sub: SubManeuver, base_lane: float = 0.0,
              lane_width_m: float = DEFAULT_LANE_WIDTH_M) -> SpaceTimeRegion:
    return SpaceTimeRegion(
        sub.start_time, sub.end_time,
        footprint_of(sub.trr, sub.executant_width, sub.executant_length,
                     base_lane, lane_width_m))


def times_intersect(a: SpaceTimeRegion, b: SpaceTimeRegion) -> bool:
    return max(a.start_time, b.start_time) <= min(a.end_time, b.end_time)


def _rects_overlap(a: Rect, b: Rect) -> bool:
    # Positive-area intersection: shared edges or corners do not count.
    return (min(a.lat_hi, b.lat_hi) > max(a.lat_lo, b.lat_lo)
            and min(a.s_hi, b.s_hi) > max(a.s_lo, b.s_lo))


def _shapely_polygon(fp: Footprint):
    from shapely.geometry import Polygon, box

    if isinstance(fp, Rect):
        return box(fp.s_lo, fp.lat_lo, fp.s_hi, fp.lat_hi)
    return Polygon(fp.points)


def footprints_overlap(a: Footprint, b: Footprint) -> bool:
    """True iff the footprints intersect with positive area."""
    if isinstance(a, Rect) and isinstance(b, Rect):
        return _rects_overlap(a, b)
    pa, pb = _shapely_polygon(a), _shapely_polygon(b)
    inter = pa.intersection(pb)
    return inter.area > 0.0


def regions_conflict(a: SpaceTimeRegion, b: SpaceTimeRegion) -> bool:
    return times_intersect(a, b) and footprints_overlap(a.footprint, b.footprint)
