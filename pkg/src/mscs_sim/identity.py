"""Pseudonym credentials, message signing, verification and revocation.

The signature scheme is a desk-scale stand-in for certificate-based V2X
message signing: a keyed digest (HMAC-SHA256 truncated to 16 bytes) over the
encoded message body. The threat model under study is authenticated-but-wrong
data, not cryptanalysis, so a symmetric tag keeps runs deterministic and
dependency-free while the interface stays narrow enough to slot in a real
asymmetric scheme later.

A station may hold several simultaneously valid credentials; the ghost
negotiation attack depends on that. Credential secrets live only in the
directory, never on the wire.
"""

from __future__ import annotations

import hmac
import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .mscm import SignatureEnvelope, StationId

LongTermId = int

TAG_LEN = 16


class RejectReason(Enum):
    UNKNOWN_SIGNER = "unknown_signer"
    BAD_TAG = "bad_tag"
    EXPIRED = "expired"
    REVOKED = "revoked"


class ExpiredCredential(Exception):
    pass


@dataclass(frozen=True)
class VehicleCapabilities:
    """Optional capability attestation carried by a credential.

    Extension point only: no detector consumes it by default.
    """

    has_camera: bool = True
    has_map: bool = True


@dataclass(frozen=True)
class PseudonymCredential:
    station_id: StationId
    secret: bytes
    owner: LongTermId
    valid_from: int
    valid_to: int
    is_special: bool = False
    capabilities: Optional[VehicleCapabilities] = None


@dataclass(frozen=True)
class VerifyResult:
    accepted: bool
    reason: Optional[RejectReason] = None

    def __bool__(self) -> bool:
        return self.accepted


ACCEPT = VerifyResult(True)


def _tag(secret: bytes, payload: bytes) -> bytes:
    return hmac.new(secret, payload, hashlib.sha256).digest()[:TAG_LEN]


def sign(payload: bytes, cred: PseudonymCredential, now: int) -> SignatureEnvelope:
    """Produce the authentication envelope for a payload.

    Deterministic: same credential and payload always yield the same tag.
    """
    if not cred.valid_from <= now <= cred.valid_to:
        raise ExpiredCredential(
            f"credential {cred.station_id} not valid at t={now}")
    return SignatureEnvelope(signer_id=cred.station_id,
                             tag=_tag(cred.secret, payload))


class CredentialDirectory:
    """All issued credentials, indexed by pseudonym and by owner."""

    def __init__(self) -> None:
        self._by_station: dict[StationId, PseudonymCredential] = {}
        self._by_owner: dict[LongTermId, list[PseudonymCredential]] = {}

    def add(self, cred: PseudonymCredential) -> None:
        if cred.station_id in self._by_station:
            raise ValueError(f"duplicate pseudonym {cred.station_id}")
        if cred.station_id == 0:
            raise ValueError("station id 0 is reserved")
        self._by_station[cred.station_id] = cred
        self._by_owner.setdefault(cred.owner, []).append(cred)

    def get(self, station_id: StationId) -> Optional[PseudonymCredential]:
        return self._by_station.get(station_id)

    def owned_by(self, owner: LongTermId) -> list[PseudonymCredential]:
        return list(self._by_owner.get(owner, []))

    def owner_of(self, station_id: StationId) -> Optional[LongTermId]:
        cred = self._by_station.get(station_id)
        return cred.owner if cred else None

    def is_special(self, station_id: StationId) -> bool:
        cred = self._by_station.get(station_id)
        return bool(cred and cred.is_special)

    def station_ids(self) -> list[StationId]:
        return sorted(self._by_station)


class RevocationList:
    def __init__(self, revoked: Optional[set[StationId]] = None) -> None:
        self._revoked: set[StationId] = set(revoked or ())

    def __contains__(self, station_id: StationId) -> bool:
        return station_id in self._revoked

    def __len__(self) -> int:
        return len(self._revoked)

    def ids(self) -> frozenset[StationId]:
        return frozenset(self._revoked)


def revoke(crl: RevocationList, station_id: StationId) -> RevocationList:
    """Add a pseudonym to the revocation list; idempotent."""
    return RevocationList(set(crl.ids()) | {station_id})


def verify(env: SignatureEnvelope, payload: bytes, store: CredentialDirectory,
           crl: RevocationList, now: int) -> VerifyResult:
    """Accept iff the tag matches an unrevoked, time-valid credential."""
    cred = store.get(env.signer_id)
    if cred is None:
        return VerifyResult(False, RejectReason.UNKNOWN_SIGNER)
    if env.signer_id in crl:
        return VerifyResult(False, RejectReason.REVOKED)
    if not cred.valid_from <= now <= cred.valid_to:
        return VerifyResult(False, RejectReason.EXPIRED)
    if not hmac.compare_digest(env.tag, _tag(cred.secret, payload)):
        return VerifyResult(False, RejectReason.BAD_TAG)
    return ACCEPT


def derive_secret(seed: int, station_id: StationId) -> bytes:
    """Deterministic per-credential secret for scenario setup."""
    return hashlib.sha256(f"{seed}:{station_id}".encode()).digest()[:16]
