"""Maneuver coordination message (MSCM) data model and wire codec.

The wire format is a project-defined tag-length-value encoding: every field
is (tag: u8, length: u16 LE, payload), the whole message is framed by the
magic bytes ``MS`` plus a u32 LE total length. Integers are little-endian,
floating point fields are IEEE-754 binary64. The format is deterministic and
self-delimiting, so ``decode(encode(m)) == m`` holds bit-exactly for every
valid message.

Structural validity (which fields may appear for which message type, tag
consistency of the road-resource variant, list bounds) is enforced here.
Semantic plausibility of field values (speeds, dimensions, time ordering)
is deliberately *not* enforced: hostile values must be representable so the
detection layer has something to judge.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional, Union

MAGIC = b"MS"
FRAME_HEADER_LEN = 6  # magic (2) + total length (4)
MAX_SUB_MANEUVERS = 64
MAX_POLYGON_VERTICES = 16
MIN_POLYGON_VERTICES = 3
MAX_ID_LIST_LEN = 255
MAX_TIMESTAMP = (1 << 48) - 1

# Disagreement reason codes carried by a Response.
REASON_CONFLICT_WITH_PLAN = 0
REASON_IMPLAUSIBLE_REQUEST = 1
REASON_UNSPECIFIED = 255

StationId = int


class MscmType(IntEnum):
    REQUEST = 1
    RESPONSE = 2
    CANCEL = 3
    COMPLETE = 4
    SPECIAL_ANNOUNCE = 5


class ManeuverStatus(IntEnum):
    """Per-sub-maneuver execution status as claimed by the transmitter."""

    PROPOSED = 0
    ACCEPTED = 1
    EXECUTING = 2


class ExecutionStatus(IntEnum):
    CANCELLED = 0
    COMPLETED = 1


class TrrType(IntEnum):
    LANE_SEGMENT = 0
    GEO_REGION = 1


class ErrorKind(Enum):
    TRUNCATED = "truncated"
    MISSING_MANDATORY = "missing_mandatory"
    ILLEGAL_FIELD = "illegal_field"
    BAD_TAG = "bad_tag"
    TRR_MISMATCH = "trr_mismatch"


class DecodeError(Exception):
    """Raised for any byte sequence that does not decode to a valid message.

    ``claimed_signer`` carries the signer id salvaged from an intact
    signature envelope, if one was parseable; misbehavior reporting uses it
    to attribute otherwise undecodable transmissions.
    """

    def __init__(self, kind: ErrorKind, field_name: Optional[str] = None,
                 detail: str = "", claimed_signer: StationId = 0):
        self.kind = kind
        self.field_name = field_name
        self.detail = detail
        self.claimed_signer = claimed_signer
        where = f" field={field_name}" if field_name else ""
        extra = f" ({detail})" if detail else ""
        super().__init__(f"{kind.value}{where}{extra}")


class StructuralError(Exception):
    """Raised by encode when a message violates the structural rules."""

    def __init__(self, kind: ErrorKind, field_name: Optional[str] = None,
                 detail: str = ""):
        self.kind = kind
        self.field_name = field_name
        self.detail = detail
        where = f" field={field_name}" if field_name else ""
        extra = f" ({detail})" if detail else ""
        super().__init__(f"{kind.value}{where}{extra}")


class UnsupportedMutation(Exception):
    """Raised when a hostile mutation does not apply to the message type."""


@dataclass(frozen=True)
class LaneSegment:
    """A stretch of one lane, offset in lanes relative to the transmitter."""

    lane_offset: int
    start_s: float
    end_s: float


@dataclass(frozen=True)
class GeoRegion:
    """A simple polygon in road coordinates (s along road, lateral meters)."""

    polygon: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class TargetRoadResource:
    trr_type: TrrType
    location: Union[LaneSegment, GeoRegion]


@dataclass(frozen=True)
class ReasonCode:
    agree: bool
    code: int = 0

    @staticmethod
    def agreed() -> "ReasonCode":
        return ReasonCode(agree=True, code=0)

    @staticmethod
    def disagree(code: int = REASON_UNSPECIFIED) -> "ReasonCode":
        return ReasonCode(agree=False, code=code)


@dataclass(frozen=True)
class SubManeuver:
    executant_id: StationId
    current_status: ManeuverStatus
    trr: TargetRoadResource
    start_time: int
    end_time: int
    min_speed: float
    max_speed: float
    executant_width: float
    executant_length: float


@dataclass(frozen=True)
class Maneuver:
    sub_maneuvers: tuple[SubManeuver, ...]


@dataclass(frozen=True)
class SignatureEnvelope:
    signer_id: StationId
    tag: bytes


@dataclass(frozen=True)
class Mscm:
    msg_type: MscmType
    source_id: StationId
    msg_timestamp: int
    maneuver_id: int
    destination_ids: tuple[StationId, ...]
    executant_ids: tuple[StationId, ...] = ()
    maneuver: Optional[Maneuver] = None
    reason_code: Optional[ReasonCode] = None
    execution_status: Optional[ExecutionStatus] = None
    signature: Optional[SignatureEnvelope] = None


# Hostile encoder mutations (attack arms A1 and A2 are emitted through
# these so the regular encoder can keep rejecting invalid structures).

@dataclass(frozen=True)
class OmitField:
    field_name: str


@dataclass(frozen=True)
class MismatchTrrTag:
    pass


StructuralMutation = Union[OmitField, MismatchTrrTag]


_TAG_MSG_TYPE = 1
_TAG_SOURCE_ID = 2
_TAG_MSG_TIMESTAMP = 3
_TAG_MANEUVER_ID = 4
_TAG_DESTINATION_IDS = 5
_TAG_EXECUTANT_IDS = 6
_TAG_MANEUVER = 7
_TAG_REASON_CODE = 8
_TAG_EXECUTION_STATUS = 9
_TAG_SIGNATURE = 10

_TAG_NAMES = {
    _TAG_MSG_TYPE: "msg_type",
    _TAG_SOURCE_ID: "source_id",
    _TAG_MSG_TIMESTAMP: "msg_timestamp",
    _TAG_MANEUVER_ID: "maneuver_id",
    _TAG_DESTINATION_IDS: "destination_ids",
    _TAG_EXECUTANT_IDS: "executant_ids",
    _TAG_MANEUVER: "maneuver",
    _TAG_REASON_CODE: "reason_code",
    _TAG_EXECUTION_STATUS: "execution_status",
    _TAG_SIGNATURE: "signature",
}
_NAME_TAGS = {name: tag for tag, name in _TAG_NAMES.items()}

# Which situational fields each message type must carry / must not carry.
_REQUIRED_SITUATIONAL = {
    MscmType.REQUEST: ("executant_ids", "maneuver"),
    MscmType.SPECIAL_ANNOUNCE: ("executant_ids", "maneuver"),
    MscmType.RESPONSE: ("reason_code",),
    MscmType.CANCEL: ("execution_status",),
    MscmType.COMPLETE: ("execution_status",),
}
_ALL_SITUATIONAL = ("executant_ids", "maneuver", "reason_code", "execution_status")

_SUB_FIXED = struct.Struct("<IB")  # executant_id, current_status
_LANE_SEG = struct.Struct("<bdd")  # lane_offset, start_s, end_s
_POINT = struct.Struct("<dd")


def required_fields(msg_type: MscmType) -> tuple[str, ...]:
    return _REQUIRED_SITUATIONAL[msg_type]


def _present(msg: Mscm, name: str) -> bool:
    if name == "executant_ids":
        return bool(msg.executant_ids)
    return getattr(msg, name) is not None


def _check_finite(value: float, field_name: str, exc: type) -> None:
    # NaN payloads would break bit-exact roundtrip equality; infinities are
    # not meaningful road coordinates either.
    if value != value or value in (float("inf"), float("-inf")):
        raise exc(ErrorKind.BAD_TAG, field_name, "non-finite value")


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def on_segment(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_segment(p1, p2, p3):
        return True
    if o2 == 0 and on_segment(p1, p2, p4):
        return True
    if o3 == 0 and on_segment(p3, p4, p1):
        return True
    if o4 == 0 and on_segment(p3, p4, p2):
        return True
    return False


def polygon_is_simple(polygon: tuple[tuple[float, float], ...]) -> bool:
    """True when no two non-adjacent edges touch and no edge is degenerate."""
    n = len(polygon)
    edges = [(polygon[i], polygon[(i + 1) % n]) for i in range(n)]
    for a, b in edges:
        if a == b:
            return False
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue  # adjacent edges legitimately share a vertex
            if _segments_properly_intersect(*edges[i], *edges[j]):
                return False
    return True


def _validate_trr(trr: TargetRoadResource, exc: type) -> None:
    if trr.trr_type == TrrType.LANE_SEGMENT:
        if not isinstance(trr.location, LaneSegment):
            raise exc(ErrorKind.TRR_MISMATCH, "trr")
        seg = trr.location
        if not -128 <= seg.lane_offset <= 127:
            raise exc(ErrorKind.BAD_TAG, "lane_offset", "outside signed 8-bit range")
        _check_finite(seg.start_s, "start_s", exc)
        _check_finite(seg.end_s, "end_s", exc)
        if not seg.start_s < seg.end_s:
            raise exc(ErrorKind.BAD_TAG, "lane_segment", "start_s must precede end_s")
    elif trr.trr_type == TrrType.GEO_REGION:
        if not isinstance(trr.location, GeoRegion):
            raise exc(ErrorKind.TRR_MISMATCH, "trr")
        poly = trr.location.polygon
        if not MIN_POLYGON_VERTICES <= len(poly) <= MAX_POLYGON_VERTICES:
            raise exc(ErrorKind.BAD_TAG, "polygon", "vertex count out of bounds")
        for x, y in poly:
            _check_finite(x, "polygon", exc)
            _check_finite(y, "polygon", exc)
        if not polygon_is_simple(poly):
            raise exc(ErrorKind.BAD_TAG, "polygon", "self-intersecting polygon")
    else:
        raise exc(ErrorKind.BAD_TAG, "trr_type", "unknown road resource type")


def _validate_sub(sub: SubManeuver, executant_ids: tuple[StationId, ...],
                  exc: type) -> None:
    if not 0 < sub.executant_id <= 0xFFFFFFFF:
        raise exc(ErrorKind.BAD_TAG, "executant_id", "reserved or out of range")
    if sub.executant_id not in executant_ids:
        raise exc(ErrorKind.BAD_TAG, "executant_id",
                  "sub-maneuver executant not listed in executant_ids")
    if not isinstance(sub.current_status, ManeuverStatus):
        raise exc(ErrorKind.BAD_TAG, "current_status")
    for name in ("start_time", "end_time"):
        value = getattr(sub, name)
        if not 0 <= value <= MAX_TIMESTAMP:
            raise exc(ErrorKind.BAD_TAG, name, "outside unsigned 48-bit range")
    for name in ("min_speed", "max_speed", "executant_width", "executant_length"):
        _check_finite(getattr(sub, name), name, exc)
    _validate_trr(sub.trr, exc)


def validate_structure(msg: Mscm, *, require_signature: bool = True,
                       exc: type = StructuralError) -> None:
    """Check the mandatory/situational matrix and all structural invariants."""
    if not isinstance(msg.msg_type, MscmType):
        raise exc(ErrorKind.BAD_TAG, "msg_type")
    if not 0 < msg.source_id <= 0xFFFFFFFF:
        raise exc(ErrorKind.BAD_TAG, "source_id", "reserved or out of range")
    if not 0 <= msg.msg_timestamp <= MAX_TIMESTAMP:
        raise exc(ErrorKind.BAD_TAG, "msg_timestamp", "outside unsigned 48-bit range")
    if not 0 <= msg.maneuver_id <= 0xFFFFFFFFFFFFFFFF:
        raise exc(ErrorKind.BAD_TAG, "maneuver_id", "outside unsigned 64-bit range")
    if not msg.destination_ids:
        raise exc(ErrorKind.MISSING_MANDATORY, "destination_ids")
    if len(msg.destination_ids) > MAX_ID_LIST_LEN:
        raise exc(ErrorKind.BAD_TAG, "destination_ids", "list too long")
    if len(msg.executant_ids) > MAX_ID_LIST_LEN:
        raise exc(ErrorKind.BAD_TAG, "executant_ids", "list too long")
    for dest in msg.destination_ids:
        if not 0 <= dest <= 0xFFFFFFFF:
            raise exc(ErrorKind.BAD_TAG, "destination_ids", "id out of range")

    required = _REQUIRED_SITUATIONAL[msg.msg_type]
    for name in required:
        if not _present(msg, name):
            raise exc(ErrorKind.MISSING_MANDATORY, name)
    for name in _ALL_SITUATIONAL:
        if name not in required and _present(msg, name):
            raise exc(ErrorKind.ILLEGAL_FIELD, name)

    if msg.executant_ids:
        if not set(msg.executant_ids) <= set(msg.destination_ids):
            raise exc(ErrorKind.BAD_TAG, "executant_ids",
                      "executants must be addressed in destination_ids")
        for ex in msg.executant_ids:
            if ex == 0:
                raise exc(ErrorKind.BAD_TAG, "executant_ids", "reserved id 0")

    if msg.maneuver is not None:
        subs = msg.maneuver.sub_maneuvers
        if not subs:
            raise exc(ErrorKind.BAD_TAG, "maneuver", "empty sub-maneuver list")
        if len(subs) > MAX_SUB_MANEUVERS:
            raise exc(ErrorKind.BAD_TAG, "maneuver", "too many sub-maneuvers")
        for sub in subs:
            _validate_sub(sub, msg.executant_ids, exc)

    if msg.reason_code is not None:
        if not 0 <= msg.reason_code.code <= 255:
            raise exc(ErrorKind.BAD_TAG, "reason_code", "code outside 8-bit range")
    if msg.execution_status is not None:
        if not isinstance(msg.execution_status, ExecutionStatus):
            raise exc(ErrorKind.BAD_TAG, "execution_status")

    if require_signature:
        if msg.signature is None:
            raise exc(ErrorKind.MISSING_MANDATORY, "signature")
    if msg.signature is not None:
        if not 0 <= msg.signature.signer_id <= 0xFFFFFFFF:
            raise exc(ErrorKind.BAD_TAG, "signature", "signer id out of range")
        if len(msg.signature.tag) != 16:
            raise exc(ErrorKind.BAD_TAG, "signature", "tag must be 16 bytes")


def _tlv(tag: int, payload: bytes) -> bytes:
    return struct.pack("<BH", tag, len(payload)) + payload


def _encode_trr(trr: TargetRoadResource) -> bytes:
    if isinstance(trr.location, LaneSegment):
        loc_tag = TrrType.LANE_SEGMENT
        payload = _LANE_SEG.pack(trr.location.lane_offset,
                                 trr.location.start_s, trr.location.end_s)
    else:
        loc_tag = TrrType.GEO_REGION
        pts = trr.location.polygon
        payload = bytes([len(pts)]) + b"".join(_POINT.pack(x, y) for x, y in pts)
    return bytes([trr.trr_type, loc_tag]) + payload


def _encode_sub(sub: SubManeuver) -> bytes:
    body = (_SUB_FIXED.pack(sub.executant_id, sub.current_status)
            + sub.start_time.to_bytes(6, "little")
            + sub.end_time.to_bytes(6, "little")
            + struct.pack("<dddd", sub.min_speed, sub.max_speed,
                          sub.executant_width, sub.executant_length)
            + _encode_trr(sub.trr))
    return struct.pack("<H", len(body)) + body


def encode_body(msg: Mscm) -> bytes:
    """Encode every field except the signature envelope.

    This is the byte sequence signatures are computed over.
    """
    validate_structure(msg, require_signature=False)
    parts = [
        _tlv(_TAG_MSG_TYPE, bytes([msg.msg_type])),
        _tlv(_TAG_SOURCE_ID, struct.pack("<I", msg.source_id)),
        _tlv(_TAG_MSG_TIMESTAMP, msg.msg_timestamp.to_bytes(6, "little")),
        _tlv(_TAG_MANEUVER_ID, struct.pack("<Q", msg.maneuver_id)),
        _tlv(_TAG_DESTINATION_IDS,
             b"".join(struct.pack("<I", d) for d in msg.destination_ids)),
    ]
    if msg.executant_ids:
        parts.append(_tlv(_TAG_EXECUTANT_IDS,
                          b"".join(struct.pack("<I", e) for e in msg.executant_ids)))
    if msg.maneuver is not None:
        parts.append(_tlv(_TAG_MANEUVER,
                          b"".join(_encode_sub(s) for s in msg.maneuver.sub_maneuvers)))
    if msg.reason_code is not None:
        parts.append(_tlv(_TAG_REASON_CODE,
                          bytes([1 if msg.reason_code.agree else 0,
                                 msg.reason_code.code])))
    if msg.execution_status is not None:
        parts.append(_tlv(_TAG_EXECUTION_STATUS, bytes([msg.execution_status])))
    return b"".join(parts)


def _frame(tlv_bytes: bytes) -> bytes:
    total = FRAME_HEADER_LEN + len(tlv_bytes)
    return MAGIC + struct.pack("<I", total) + tlv_bytes


def encode(msg: Mscm) -> bytes:
    """Serialize a structurally valid, signed message."""
    validate_structure(msg, require_signature=True)
    body = encode_body(msg)
    sig = _tlv(_TAG_SIGNATURE, struct.pack("<I", msg.signature.signer_id)
               + msg.signature.tag)
    return _frame(body + sig)


def encode_hostile(msg: Mscm, mutation: StructuralMutation) -> bytes:
    """Serialize with a deliberate structural defect.

    The output must be rejected by decode; it exists so the malformed-message
    attack arms can be emitted without loosening encode's own checks.
    """
    raw = encode(msg)
    tlvs = raw[FRAME_HEADER_LEN:]
    if isinstance(mutation, OmitField):
        tag = _NAME_TAGS.get(mutation.field_name)
        if tag is None:
            raise UnsupportedMutation(f"unknown field {mutation.field_name!r}")
        pieces = []
        removed = False
        for t, payload in _iter_tlvs_strict(tlvs):
            if t == tag:
                removed = True
                continue
            pieces.append(_tlv(t, payload))
        if not removed:
            raise UnsupportedMutation(
                f"{mutation.field_name!r} not present for {msg.msg_type.name}")
        return _frame(b"".join(pieces))
    if isinstance(mutation, MismatchTrrTag):
        if msg.maneuver is None:
            raise UnsupportedMutation(f"{msg.msg_type.name} carries no maneuver")
        pieces = []
        for t, payload in _iter_tlvs_strict(tlvs):
            if t == _TAG_MANEUVER:
                # Flip the location variant tag of the first sub-maneuver so
                # the declared trr_type no longer matches the payload format.
                sub_len = struct.unpack_from("<H", payload, 0)[0]
                loc_off = 2 + _SUB_FIXED.size + 12 + 32 + 1  # after trr_type byte
                if loc_off >= 2 + sub_len:
                    raise UnsupportedMutation("sub-maneuver too short to mutate")
                flipped = 1 - payload[loc_off]
                payload = payload[:loc_off] + bytes([flipped]) + payload[loc_off + 1:]
            pieces.append(_tlv(t, payload))
        return _frame(b"".join(pieces))
    raise UnsupportedMutation(f"unsupported mutation {mutation!r}")


def _iter_tlvs_strict(data: bytes):
    """Iterate (tag, payload) over well-formed TLV bytes produced by encode."""
    offset = 0
    while offset < len(data):
        tag, length = struct.unpack_from("<BH", data, offset)
        offset += 3
        yield tag, data[offset:offset + length]
        offset += length


def _parse_tlvs(data: bytes) -> dict[int, bytes]:
    fields: dict[int, bytes] = {}
    offset = 0
    last_tag = 0
    while offset < len(data):
        if offset + 3 > len(data):
            raise DecodeError(ErrorKind.TRUNCATED, detail="partial field header")
        tag, length = struct.unpack_from("<BH", data, offset)
        offset += 3
        if offset + length > len(data):
            raise DecodeError(ErrorKind.TRUNCATED,
                              _TAG_NAMES.get(tag, str(tag)),
                              "field payload exceeds frame",
                              claimed_signer=_salvage_signer(fields))
        if tag not in _TAG_NAMES:
            raise DecodeError(ErrorKind.BAD_TAG, str(tag), "unknown field tag",
                              claimed_signer=_salvage_signer(fields))
        if tag <= last_tag:
            raise DecodeError(ErrorKind.BAD_TAG, _TAG_NAMES[tag],
                              "duplicate or out-of-order field",
                              claimed_signer=_salvage_signer(fields))
        fields[tag] = data[offset:offset + length]
        offset += length
        last_tag = tag
    return fields


def _salvage_signer(fields: dict[int, bytes]) -> StationId:
    payload = fields.get(_TAG_SIGNATURE)
    if payload is not None and len(payload) == 20:
        return struct.unpack_from("<I", payload, 0)[0]
    return 0


def _u32_list(payload: bytes, name: str, signer: StationId) -> tuple[int, ...]:
    if len(payload) % 4 != 0:
        raise DecodeError(ErrorKind.BAD_TAG, name, "payload not a multiple of 4",
                          claimed_signer=signer)
    count = len(payload) // 4
    if count > MAX_ID_LIST_LEN:
        raise DecodeError(ErrorKind.BAD_TAG, name, "list too long",
                          claimed_signer=signer)
    return struct.unpack(f"<{count}I", payload)


def _decode_trr(payload: bytes, offset: int, signer: StationId
                ) -> tuple[TargetRoadResource, int]:
    if offset + 2 > len(payload):
        raise DecodeError(ErrorKind.TRUNCATED, "trr", claimed_signer=signer)
    type_byte, loc_tag = payload[offset], payload[offset + 1]
    offset += 2
    try:
        trr_type = TrrType(type_byte)
    except ValueError:
        raise DecodeError(ErrorKind.BAD_TAG, "trr_type", "unknown type",
                          claimed_signer=signer) from None
    if loc_tag not in (TrrType.LANE_SEGMENT, TrrType.GEO_REGION):
        raise DecodeError(ErrorKind.BAD_TAG, "trr_location", "unknown variant",
                          claimed_signer=signer)
    if loc_tag != trr_type:
        raise DecodeError(ErrorKind.TRR_MISMATCH, "trr",
                          "location variant does not match trr_type",
                          claimed_signer=signer)
    if loc_tag == TrrType.LANE_SEGMENT:
        if offset + _LANE_SEG.size > len(payload):
            raise DecodeError(ErrorKind.TRUNCATED, "lane_segment",
                              claimed_signer=signer)
        lane_offset, start_s, end_s = _LANE_SEG.unpack_from(payload, offset)
        offset += _LANE_SEG.size
        location: Union[LaneSegment, GeoRegion] = LaneSegment(
            lane_offset, start_s, end_s)
    else:
        if offset + 1 > len(payload):
            raise DecodeError(ErrorKind.TRUNCATED, "polygon", claimed_signer=signer)
        count = payload[offset]
        offset += 1
        if offset + count * _POINT.size > len(payload):
            raise DecodeError(ErrorKind.TRUNCATED, "polygon", claimed_signer=signer)
        pts = []
        for _ in range(count):
            pts.append(_POINT.unpack_from(payload, offset))
            offset += _POINT.size
        location = GeoRegion(tuple(pts))
    return TargetRoadResource(trr_type, location), offset


def _decode_maneuver(payload: bytes, signer: StationId) -> Maneuver:
    subs = []
    offset = 0
    while offset < len(payload):
        if offset + 2 > len(payload):
            raise DecodeError(ErrorKind.TRUNCATED, "maneuver", claimed_signer=signer)
        sub_len = struct.unpack_from("<H", payload, offset)[0]
        offset += 2
        end = offset + sub_len
        if end > len(payload):
            raise DecodeError(ErrorKind.TRUNCATED, "maneuver", claimed_signer=signer)
        fixed_len = _SUB_FIXED.size + 12 + 32
        if sub_len < fixed_len:
            raise DecodeError(ErrorKind.TRUNCATED, "sub_maneuver",
                              claimed_signer=signer)
        executant_id, status_byte = _SUB_FIXED.unpack_from(payload, offset)
        pos = offset + _SUB_FIXED.size
        start_time = int.from_bytes(payload[pos:pos + 6], "little")
        end_time = int.from_bytes(payload[pos + 6:pos + 12], "little")
        pos += 12
        min_speed, max_speed, width, length = struct.unpack_from("<dddd", payload, pos)
        pos += 32
        try:
            status = ManeuverStatus(status_byte)
        except ValueError:
            raise DecodeError(ErrorKind.BAD_TAG, "current_status", "unknown status",
                              claimed_signer=signer) from None
        trr, pos = _decode_trr(payload, pos, signer)
        if pos != end:
            raise DecodeError(ErrorKind.BAD_TAG, "sub_maneuver",
                              "length prefix does not match content",
                              claimed_signer=signer)
        subs.append(SubManeuver(executant_id, status, trr, start_time, end_time,
                                min_speed, max_speed, width, length))
        offset = end
        if len(subs) > MAX_SUB_MANEUVERS:
            raise DecodeError(ErrorKind.BAD_TAG, "maneuver",
                              "too many sub-maneuvers", claimed_signer=signer)
    if not subs:
        raise DecodeError(ErrorKind.BAD_TAG, "maneuver", "empty sub-maneuver list",
                          claimed_signer=signer)
    return Maneuver(tuple(subs))


def decode(data: bytes) -> Mscm:
    """Parse untrusted bytes into a structurally valid message.

    Raises DecodeError naming the first violation; never aborts on any input.
    """
    if len(data) < FRAME_HEADER_LEN:
        raise DecodeError(ErrorKind.TRUNCATED, detail="shorter than frame header")
    if data[:2] != MAGIC:
        raise DecodeError(ErrorKind.BAD_TAG, "magic", "bad frame magic")
    total = struct.unpack_from("<I", data, 2)[0]
    if total > len(data):
        raise DecodeError(ErrorKind.TRUNCATED, detail="frame length exceeds input")
    if total != len(data):
        raise DecodeError(ErrorKind.BAD_TAG, "frame", "trailing bytes after frame")

    fields = _parse_tlvs(data[FRAME_HEADER_LEN:total])
    signer = _salvage_signer(fields)

    def require(tag: int) -> bytes:
        payload = fields.get(tag)
        if payload is None:
            raise DecodeError(ErrorKind.MISSING_MANDATORY, _TAG_NAMES[tag],
                              claimed_signer=signer)
        return payload

    type_payload = require(_TAG_MSG_TYPE)
    if len(type_payload) != 1:
        raise DecodeError(ErrorKind.BAD_TAG, "msg_type", "bad length",
                          claimed_signer=signer)
    try:
        msg_type = MscmType(type_payload[0])
    except ValueError:
        raise DecodeError(ErrorKind.BAD_TAG, "msg_type", "unknown message type",
                          claimed_signer=signer) from None

    source_payload = require(_TAG_SOURCE_ID)
    if len(source_payload) != 4:
        raise DecodeError(ErrorKind.BAD_TAG, "source_id", "bad length",
                          claimed_signer=signer)
    source_id = struct.unpack("<I", source_payload)[0]

    ts_payload = require(_TAG_MSG_TIMESTAMP)
    if len(ts_payload) != 6:
        raise DecodeError(ErrorKind.BAD_TAG, "msg_timestamp", "bad length",
                          claimed_signer=signer)
    msg_timestamp = int.from_bytes(ts_payload, "little")

    mid_payload = require(_TAG_MANEUVER_ID)
    if len(mid_payload) != 8:
        raise DecodeError(ErrorKind.BAD_TAG, "maneuver_id", "bad length",
                          claimed_signer=signer)
    maneuver_id = struct.unpack("<Q", mid_payload)[0]

    destination_ids = _u32_list(require(_TAG_DESTINATION_IDS),
                                "destination_ids", signer)

    executant_ids: tuple[StationId, ...] = ()
    if _TAG_EXECUTANT_IDS in fields:
        executant_ids = _u32_list(fields[_TAG_EXECUTANT_IDS],
                                  "executant_ids", signer)
        if not executant_ids:
            raise DecodeError(ErrorKind.BAD_TAG, "executant_ids", "empty list",
                              claimed_signer=signer)

    maneuver = None
    if _TAG_MANEUVER in fields:
        maneuver = _decode_maneuver(fields[_TAG_MANEUVER], signer)

    reason_code = None
    if _TAG_REASON_CODE in fields:
        payload = fields[_TAG_REASON_CODE]
        if len(payload) != 2 or payload[0] not in (0, 1):
            raise DecodeError(ErrorKind.BAD_TAG, "reason_code", "bad payload",
                              claimed_signer=signer)
        reason_code = ReasonCode(agree=payload[0] == 1, code=payload[1])

    execution_status = None
    if _TAG_EXECUTION_STATUS in fields:
        payload = fields[_TAG_EXECUTION_STATUS]
        if len(payload) != 1:
            raise DecodeError(ErrorKind.BAD_TAG, "execution_status", "bad length",
                              claimed_signer=signer)
        try:
            execution_status = ExecutionStatus(payload[0])
        except ValueError:
            raise DecodeError(ErrorKind.BAD_TAG, "execution_status",
                              "unknown status", claimed_signer=signer) from None

    sig_payload = require(_TAG_SIGNATURE)
    if len(sig_payload) != 20:
        raise DecodeError(ErrorKind.BAD_TAG, "signature", "bad length",
                          claimed_signer=signer)
    signature = SignatureEnvelope(struct.unpack_from("<I", sig_payload, 0)[0],
                                  sig_payload[4:])

    msg = Mscm(msg_type=msg_type, source_id=source_id,
               msg_timestamp=msg_timestamp, maneuver_id=maneuver_id,
               destination_ids=destination_ids, executant_ids=executant_ids,
               maneuver=maneuver, reason_code=reason_code,
               execution_status=execution_status, signature=signature)
    try:
        validate_structure(msg, require_signature=True, exc=DecodeError)
    except DecodeError as err:
        err.claimed_signer = signer
        raise
    return msg


def split_signature(data: bytes) -> tuple[bytes, SignatureEnvelope]:
    """Return (signed body bytes, envelope) from an encoded message.

    The body is exactly the byte range signatures are computed over; callers
    verify the envelope against it without re-encoding.
    """
    if len(data) < FRAME_HEADER_LEN or data[:2] != MAGIC:
        raise DecodeError(ErrorKind.BAD_TAG, "magic", "bad frame magic")
    tlvs = data[FRAME_HEADER_LEN:]
    offset = 0
    while offset < len(tlvs):
        if offset + 3 > len(tlvs):
            raise DecodeError(ErrorKind.TRUNCATED, detail="partial field header")
        tag, length = struct.unpack_from("<BH", tlvs, offset)
        if tag == _TAG_SIGNATURE:
            payload = tlvs[offset + 3:offset + 3 + length]
            if len(payload) != 20:
                raise DecodeError(ErrorKind.BAD_TAG, "signature", "bad length")
            env = SignatureEnvelope(struct.unpack_from("<I", payload, 0)[0],
                                    payload[4:])
            return tlvs[:offset], env
        offset += 3 + length
    raise DecodeError(ErrorKind.MISSING_MANDATORY, "signature")
