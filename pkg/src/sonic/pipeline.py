"""End-to-end encode/decode glue between the container format, FEC,
modem, and channel layers.

Channel framing: every frame serializes to at most 512 bytes (500-byte
payload + 12 overhead) and is zero-padded to exactly that slot size, so
one protected slot always occupies `protected_slot_size()` channel
bytes and a transmission's channel stream splits back into slots by
plain arithmetic.  Keepalives are padded the same way for uniformity.

Two channel representations:

* slot list (audio path): pad + FEC-protect each frame, concatenate,
  modulate.  Bit errors surface as FEC or CRC failures per slot.
* frame list (fast path): raw serialized frames, dropped whole by the
  frame-level channel model.  Used by loss sweeps and queue studies
  where modem physics are not under test.
"""

from __future__ import annotations

from dataclasses import dataclass

from sonic import fec as fec_mod
from sonic import format as sf
from sonic import modem as modem_mod
from sonic.fec import FecConfig, FecLoss
from sonic.format import Frame, SonicFile
from sonic.modem import ModulationProfile, PcmChunk
from sonic.renderer import PageCapture, StripSet, encode_strip_payload

SLOT_BYTES = sf.FRAME_PAYLOAD_MAX + sf.FRAME_OVERHEAD  # 512


def pad_slot(frame_bytes: bytes) -> bytes:
    if len(frame_bytes) > SLOT_BYTES:
        raise ValueError("serialized frame exceeds slot size")
    return frame_bytes + bytes(SLOT_BYTES - len(frame_bytes))


def protected_slot_size(cfg: FecConfig = fec_mod.DEFAULT_FEC) -> int:
    return fec_mod.protected_length(SLOT_BYTES, cfg)


def build_webpage_file(
    request_id: int,
    capture: PageCapture,
    strips: StripSet,
    created_at: int = 0,
) -> SonicFile:
    payload = encode_strip_payload(strips)
    meta = sf.SonicMetadata(
        request_id=request_id,
        content_type=sf.ContentType.WEBPAGE,
        payload_length=len(payload),
        frame_count=sf.frame_count_for(len(payload)),
        image_width=strips.width,
        image_height=strips.height,
        strip_height=strips.strip_height,
        source=capture.source_url,
        created_at=created_at,
    )
    return SonicFile(metadata=meta, click_map=capture.links, payload=payload)


def build_llm_file(request_id: int, prompt: str, payload: bytes, created_at: int = 0) -> SonicFile:
    meta = sf.SonicMetadata(
        request_id=request_id,
        content_type=sf.ContentType.LLM_TEXT,
        payload_length=len(payload),
        frame_count=sf.frame_count_for(len(payload)),
        source=prompt[:256],
        created_at=created_at,
    )
    return SonicFile(metadata=meta, click_map=[], payload=payload)


def encode_frames(f: SonicFile) -> list[bytes]:
    """Raw serialized frames (fast channel path)."""
    return [sf.serialize_frame(fr) for fr in sf.frame_transmission(f)]


def encode_slots(f: SonicFile, cfg: FecConfig = fec_mod.DEFAULT_FEC) -> list[bytes]:
    """FEC-protected fixed-size slots (audio path)."""
    return [fec_mod.protect(pad_slot(b), cfg) for b in encode_frames(f)]


def keepalive_slot(cfg: FecConfig = fec_mod.DEFAULT_FEC) -> bytes:
    return fec_mod.protect(pad_slot(sf.serialize_frame(sf.keepalive_frame())), cfg)


@dataclass
class SlotDecode:
    frames: list[Frame]
    slots_total: int
    slots_lost: int
    keepalive: bool  # transmission consisted solely of keepalive frames


def decode_channel_bytes(data: bytes, cfg: FecConfig = fec_mod.DEFAULT_FEC) -> SlotDecode:
    """Split one demodulated transmission back into frames.

    Slots that fail FEC or frame CRC count as lost; a trailing partial
    slot (stream cut mid-transmission) is dropped and counted.
    """
    size = protected_slot_size(cfg)
    total = -(-len(data) // size) if data else 0
    frames: list[Frame] = []
    lost = 0
    for i in range(total):
        chunk = data[i * size : (i + 1) * size]
        if len(chunk) < size:
            lost += 1
            continue
        try:
            frame_bytes = fec_mod.recover(chunk, cfg)
            frame = sf.parse_frame(frame_bytes)
        except (FecLoss, sf.FormatError):
            lost += 1
            continue
        frames.append(frame)
    keepalive = bool(frames) and all(fr.is_keepalive for fr in frames)
    return SlotDecode(frames=frames, slots_total=total, slots_lost=lost, keepalive=keepalive)


def parse_frame_blobs(blobs: list[bytes]) -> list[Frame]:
    """Fast path: parse surviving raw frames, skipping damaged ones."""
    frames = []
    for blob in blobs:
        try:
            frames.append(sf.parse_frame(blob))
        except sf.FormatError:
            continue
    return frames


def transmission_to_audio(
    f: SonicFile,
    cfg: FecConfig = fec_mod.DEFAULT_FEC,
    profile: ModulationProfile = modem_mod.DEFAULT_PROFILE,
) -> PcmChunk:
    return modem_mod.modulate(b"".join(encode_slots(f, cfg)), profile)


def air_seconds_for_slots(
    n_slots: int,
    cfg: FecConfig = fec_mod.DEFAULT_FEC,
    profile: ModulationProfile = modem_mod.DEFAULT_PROFILE,
) -> float:
    """Analytic air time of a transmission without rendering audio."""
    nbytes = n_slots * protected_slot_size(cfg)
    return modem_mod.transmission_air_samples(nbytes, profile) / profile.sample_rate
