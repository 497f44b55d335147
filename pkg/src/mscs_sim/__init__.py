"""Maneuver-coordination security sandbox.

A deterministic simulation of V2X maneuver sharing: the message set and
negotiation protocol, a catalog of sixteen attacks with an injection
harness, per-defense misbehavior detectors, and the accompanying risk
assessment engine.
"""

__version__ = "0.1.0"

from .mscm import (  # noqa: F401
    DecodeError,
    Maneuver,
    Mscm,
    MscmType,
    SubManeuver,
    TargetRoadResource,
    decode,
    encode,
)
from .risk import CriterionRating, overall_rating  # noqa: F401
