"""Container file format: metadata + click map + framed payload.

Wire layout (little-endian throughout, see FORMAT.md for the normative
byte-level description):

    metadata section:
        "MDTA" | version:u16 | request_id:u32 | content_type:u8 |
        payload_length:u32 | frame_count:u16 | image_width:u16 |
        image_height:u16 | strip_height:u16 | created_at:u64 |
        source_len:u16 | source bytes
    link section:
        "LNKS" | count:u16 | count * (x:u16 y:u16 w:u16 h:u16
                                      url_len:u16 url bytes)
    data marker:
        "SDTA"
    payload frames, each:
        "C137" | seq:u16 | length:u16 | payload | crc32:u32

The frame CRC covers seq || length || payload.  seq 0xFFFF with an
empty payload is the reserved keepalive frame (12 bytes on the wire).

For transmission the metadata+link section is itself chopped into
frames (seq 0..k-1) ahead of the payload frames, so the same framing
and FEC protect it; `frame_transmission` / `decode_transmission`
implement that path.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

FORMAT_VERSION = 1
FRAME_PAYLOAD_MAX = 500
FRAME_OVERHEAD = 12  # magic(4) + seq(2) + length(2) + crc(4)
KEEPALIVE_SEQ = 0xFFFF
MAX_STRING_BYTES = 1024
MAX_LINKS = 65535
MAX_IMAGE_HEIGHT = 10_000
IMAGE_WIDTH = 320

MAGIC_META = b"MDTA"
MAGIC_LINKS = b"LNKS"
MAGIC_DATA = b"SDTA"
MAGIC_FRAME = b"C137"

_META_FIXED = struct.Struct("<HIBIHHHHQ")
_LINK_FIXED = struct.Struct("<HHHHH")
_FRAME_HEAD = struct.Struct("<HH")


class FormatError(ValueError):
    """Base class for container parse/serialize failures."""


class MissingMagic(FormatError):
    pass


class Truncated(FormatError):
    pass


class MalformedLinks(FormatError):
    pass


class BadMagic(FormatError):
    pass


class BadCrc(FormatError):
    """CRC mismatch: the frame counts as lost."""


class ContentType(IntEnum):
    WEBPAGE = 0
    LLM_TEXT = 1


@dataclass(frozen=True)
class SonicMetadata:
    request_id: int
    content_type: ContentType
    payload_length: int
    frame_count: int
    image_width: int = 0
    image_height: int = 0
    strip_height: int = 0
    source: str = ""
    created_at: int = 0

    def validate(self) -> None:
        if self.image_width not in (0, IMAGE_WIDTH):
            raise FormatError(f"image_width must be 0 or {IMAGE_WIDTH}")
        if self.image_height > MAX_IMAGE_HEIGHT:
            raise FormatError(f"image_height > {MAX_IMAGE_HEIGHT}")
        if self.frame_count != frame_count_for(self.payload_length):
            raise FormatError("frame_count inconsistent with payload_length")
        if len(self.source.encode("utf-8")) > MAX_STRING_BYTES:
            raise FormatError("source string exceeds 1024 bytes")


@dataclass(frozen=True)
class ClickMapEntry:
    x: int
    y: int
    w: int
    h: int
    target_url: str

    def validate(self, image_width: int, image_height: int) -> None:
        if self.w <= 0 or self.h <= 0:
            raise FormatError("click box must have positive size")
        if self.x < 0 or self.x + self.w > image_width:
            raise FormatError("click box exceeds image width")
        if self.y < 0 or self.y + self.h > image_height:
            raise FormatError("click box exceeds image height")


@dataclass(frozen=True)
class Frame:
    seq: int
    payload: bytes
    crc: int

    @property
    def is_keepalive(self) -> bool:
        return self.seq == KEEPALIVE_SEQ and not self.payload


@dataclass
class SonicFile:
    metadata: SonicMetadata
    click_map: list[ClickMapEntry] = field(default_factory=list)
    payload: bytes = b""


def frame_count_for(payload_length: int) -> int:
    return math.ceil(payload_length / FRAME_PAYLOAD_MAX)


def frame_crc(seq: int, payload: bytes) -> int:
    return zlib.crc32(_FRAME_HEAD.pack(seq, len(payload)) + payload) & 0xFFFFFFFF


def make_frame(seq: int, payload: bytes) -> Frame:
    if len(payload) > FRAME_PAYLOAD_MAX:
        raise FormatError(f"frame payload exceeds {FRAME_PAYLOAD_MAX} bytes")
    return Frame(seq=seq, payload=payload, crc=frame_crc(seq, payload))


def keepalive_frame() -> Frame:
    return make_frame(KEEPALIVE_SEQ, b"")


def serialize_metadata(meta: SonicMetadata, links: list[ClickMapEntry]) -> bytes:
    """Serialize the metadata + link sections, ending with the SDTA marker."""
    if len(links) > MAX_LINKS:
        raise FormatError(f"too many click-map entries ({len(links)})")
    source = meta.source.encode("utf-8")
    if len(source) > MAX_STRING_BYTES:
        raise FormatError("source string exceeds 1024 bytes")
    out = bytearray()
    out += MAGIC_META
    out += _META_FIXED.pack(
        FORMAT_VERSION,
        meta.request_id,
        int(meta.content_type),
        meta.payload_length,
        meta.frame_count,
        meta.image_width,
        meta.image_height,
        meta.strip_height,
        meta.created_at,
    )
    out += struct.pack("<H", len(source))
    out += source
    out += MAGIC_LINKS
    out += struct.pack("<H", len(links))
    for link in links:
        url = link.target_url.encode("utf-8")
        if len(url) > MAX_STRING_BYTES:
            raise FormatError("target_url exceeds 1024 bytes")
        out += _LINK_FIXED.pack(link.x, link.y, link.w, link.h, len(url))
        out += url
    out += MAGIC_DATA
    return bytes(out)


def parse_metadata(data: bytes) -> tuple[SonicMetadata, list[ClickMapEntry], int]:
    """Inverse of `serialize_metadata`.

    Returns the metadata, the click map, and the offset just past the
    SDTA marker (i.e. where payload bytes begin).
    """
    if not data.startswith(MAGIC_META):
        raise MissingMagic("no MDTA magic at start of metadata section")
    pos = len(MAGIC_META)
    end = pos + _META_FIXED.size
    if len(data) < end:
        raise Truncated("metadata fields truncated")
    (
        version,
        request_id,
        content_type,
        payload_length,
        frame_count,
        image_width,
        image_height,
        strip_height,
        created_at,
    ) = _META_FIXED.unpack(data[pos:end])
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    pos = end
    if len(data) < pos + 2:
        raise Truncated("source length truncated")
    (source_len,) = struct.unpack_from("<H", data, pos)
    pos += 2
    if len(data) < pos + source_len:
        raise Truncated("source string truncated")
    source = data[pos : pos + source_len].decode("utf-8")
    pos += source_len

    if data[pos : pos + 4] != MAGIC_LINKS:
        raise MalformedLinks("LNKS magic not found after metadata")
    pos += 4
    if len(data) < pos + 2:
        raise Truncated("link count truncated")
    (count,) = struct.unpack_from("<H", data, pos)
    pos += 2
    links: list[ClickMapEntry] = []
    for _ in range(count):
        if len(data) < pos + _LINK_FIXED.size:
            raise MalformedLinks("link entry truncated")
        x, y, w, h, url_len = _LINK_FIXED.unpack_from(data, pos)
        pos += _LINK_FIXED.size
        if len(data) < pos + url_len:
            raise MalformedLinks("link url truncated")
        url = data[pos : pos + url_len].decode("utf-8")
        pos += url_len
        links.append(ClickMapEntry(x=x, y=y, w=w, h=h, target_url=url))

    if data[pos : pos + 4] != MAGIC_DATA:
        raise MalformedLinks("SDTA marker not found after link section")
    pos += 4

    try:
        ctype = ContentType(content_type)
    except ValueError as e:
        raise FormatError(f"unknown content type {content_type}") from e
    meta = SonicMetadata(
        request_id=request_id,
        content_type=ctype,
        payload_length=payload_length,
        frame_count=frame_count,
        image_width=image_width,
        image_height=image_height,
        strip_height=strip_height,
        source=source,
        created_at=created_at,
    )
    return meta, links, pos


def frame_payload(payload: bytes, first_seq: int = 0) -> list[Frame]:
    """Chop a payload into CRC-protected frames of at most 500 bytes."""
    n = frame_count_for(len(payload))
    if first_seq + n > KEEPALIVE_SEQ:
        raise FormatError("payload too large for 16-bit frame numbering")
    frames = []
    for i in range(n):
        chunk = payload[i * FRAME_PAYLOAD_MAX : (i + 1) * FRAME_PAYLOAD_MAX]
        frames.append(make_frame(first_seq + i, chunk))
    return frames


def serialize_frame(frame: Frame) -> bytes:
    if len(frame.payload) > FRAME_PAYLOAD_MAX:
        raise FormatError("frame payload too large")
    return (
        MAGIC_FRAME
        + _FRAME_HEAD.pack(frame.seq, len(frame.payload))
        + frame.payload
        + struct.pack("<I", frame.crc)
    )


def parse_frame(data: bytes) -> Frame:
    frame, _ = parse_frame_at(data, 0)
    return frame


def parse_frame_at(data: bytes, offset: int) -> tuple[Frame, int]:
    """Parse one frame starting at `offset`; returns (frame, next offset).

    Trailing bytes beyond the frame are ignored, so zero-padded channel
    slots parse cleanly.
    """
    if data[offset : offset + 4] != MAGIC_FRAME:
        raise BadMagic("frame does not start with C137")
    pos = offset + 4
    if len(data) < pos + 4:
        raise Truncated("frame header truncated")
    seq, length = _FRAME_HEAD.unpack_from(data, pos)
    pos += 4
    if length > FRAME_PAYLOAD_MAX:
        raise BadCrc("declared frame length exceeds maximum")
    if len(data) < pos + length + 4:
        raise Truncated("frame body truncated")
    payload = data[pos : pos + length]
    pos += length
    (crc,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if crc != frame_crc(seq, payload):
        raise BadCrc("frame CRC mismatch")
    return Frame(seq=seq, payload=payload, crc=crc), pos


@dataclass
class ReassemblyResult:
    payload: bytes
    missing_mask: np.ndarray  # bool per payload byte
    frames_received: int
    frame_count: int

    @property
    def loss_percent(self) -> float:
        if self.frame_count == 0:
            return 0.0
        return 100.0 * (self.frame_count - self.frames_received) / self.frame_count

    @property
    def complete(self) -> bool:
        return self.frames_received == self.frame_count


def reassemble(meta: SonicMetadata, frames: list[Frame] | set[Frame]) -> ReassemblyResult:
    """Rebuild the payload from whatever payload frames arrived.

    Bytes of missing frames are zero-filled and flagged in the mask;
    partial reassembly is the normal case, not an error.  Duplicate
    frames are harmless (identical content, last wins).
    """
    n = meta.frame_count
    buf = bytearray(meta.payload_length)
    mask = np.ones(meta.payload_length, dtype=bool)
    seen: set[int] = set()
    for frame in frames:
        if frame.is_keepalive or frame.seq >= n:
            continue
        start = frame.seq * FRAME_PAYLOAD_MAX
        expected = min(FRAME_PAYLOAD_MAX, meta.payload_length - start)
        chunk = frame.payload[:expected]
        buf[start : start + len(chunk)] = chunk
        mask[start : start + len(chunk)] = False
        seen.add(frame.seq)
    return ReassemblyResult(
        payload=bytes(buf),
        missing_mask=mask,
        frames_received=len(seen),
        frame_count=n,
    )


def serialize_file(f: SonicFile) -> bytes:
    """On-disk layout: metadata section, link section, SDTA, payload frames."""
    f.metadata.validate()
    head = serialize_metadata(f.metadata, f.click_map)
    frames = frame_payload(f.payload)
    return head + b"".join(serialize_frame(fr) for fr in frames)


def parse_file(data: bytes) -> SonicFile:
    meta, links, pos = parse_metadata(data)
    frames = []
    while pos < len(data):
        frame, pos = parse_frame_at(data, pos)
        frames.append(frame)
    result = reassemble(meta, frames)
    if not result.complete:
        raise Truncated("payload frames missing from file")
    return SonicFile(metadata=meta, click_map=links, payload=result.payload)


def frame_transmission(f: SonicFile) -> list[Frame]:
    """Frame a file for the air: metadata frames first, then payload frames.

    Metadata occupies frames seq 0..k-1 so the framing/FEC path protects
    it the same way; payload frames continue at seq k and are re-based
    during decode.
    """
    f.metadata.validate()
    head = serialize_metadata(f.metadata, f.click_map)
    head_frames = frame_payload(head)
    payload_frames = frame_payload(f.payload, first_seq=len(head_frames))
    return head_frames + payload_frames


@dataclass
class DecodedTransmission:
    metadata: SonicMetadata
    click_map: list[ClickMapEntry]
    reassembly: ReassemblyResult

    @property
    def payload(self) -> bytes:
        return self.reassembly.payload


def decode_transmission(frames: list[Frame]) -> DecodedTransmission:
    """Inverse of `frame_transmission` over a (possibly lossy) frame set.

    Raises MissingMagic/Truncated/MalformedLinks when the metadata
    region is incomplete — the transmission cannot be attributed and is
    discarded upstream.  Payload loss is reported, not raised.
    """
    by_seq = {fr.seq: fr for fr in frames if not fr.is_keepalive}
    head = bytearray()
    seq = 0
    while True:
        fr = by_seq.get(seq)
        if fr is None:
            raise Truncated("metadata frame missing")
        head += fr.payload
        try:
            meta, links, head_len = parse_metadata(bytes(head))
        except MissingMagic:
            raise
        except (Truncated, MalformedLinks) as e:
            # may merely need the next metadata frame; heals unless the
            # frame sequence runs dry
            if seq + 1 not in by_seq:
                raise Truncated("metadata frame missing") from e
            seq += 1
            continue
        break
    head_frame_count = frame_count_for(head_len)
    payload_frames = [
        Frame(seq=fr.seq - head_frame_count, payload=fr.payload, crc=fr.crc)
        for fr in by_seq.values()
        if fr.seq >= head_frame_count
    ]
    result = reassemble(meta, payload_frames)
    return DecodedTransmission(metadata=meta, click_map=links, reassembly=result)
