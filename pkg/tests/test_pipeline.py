import numpy as np
import pytest

from sonic import fec, pipeline
from sonic import format as sf


def slot_for(payload: bytes, seq: int = 0) -> bytes:
    return pipeline.pad_slot(sf.serialize_frame(sf.make_frame(seq, payload)))


class TestSlots:
    def test_full_frame_is_exactly_one_slot(self):
        wire = sf.serialize_frame(sf.make_frame(0, bytes(500)))
        assert len(wire) == pipeline.SLOT_BYTES

    def test_protected_slot_size_constant(self):
        rng = np.random.default_rng(0)
        sizes = {
            len(fec.protect(slot_for(rng.bytes(n)))) for n in (0, 1, 250, 500)
        }
        assert sizes == {pipeline.protected_slot_size()}

    def test_oversized_frame_rejected(self):
        with pytest.raises(ValueError):
            pipeline.pad_slot(bytes(513))


class TestDecodeChannelBytes:
    def test_clean_round_trip(self):
        rng = np.random.default_rng(1)
        payload = rng.bytes(2600)
        f = sf.SonicFile(
            metadata=sf.SonicMetadata(
                request_id=3,
                content_type=sf.ContentType.LLM_TEXT,
                payload_length=len(payload),
                frame_count=sf.frame_count_for(len(payload)),
                source="t",
            ),
            payload=payload,
        )
        channel_bytes = b"".join(pipeline.encode_slots(f))
        decode = pipeline.decode_channel_bytes(channel_bytes)
        assert decode.slots_lost == 0
        decoded = sf.decode_transmission(decode.frames)
        assert decoded.payload == payload

    def test_keepalive_detected(self):
        decode = pipeline.decode_channel_bytes(pipeline.keepalive_slot())
        assert decode.keepalive
        assert decode.slots_total == 1

    def test_truncated_tail_counts_lost(self):
        data = pipeline.keepalive_slot() + b"\x00" * 100
        decode = pipeline.decode_channel_bytes(data)
        assert decode.slots_total == 2
        assert decode.slots_lost == 1

    def test_no_silent_corruption(self):
        # joint FEC+CRC property: under heavy bit errors a slot either
        # recovers to the exact original frame or counts as lost;
        # miscorrections that slip past RS are caught by the frame CRC
        rng = np.random.default_rng(2)
        payload = rng.bytes(500)
        frame = sf.make_frame(7, payload)
        slot = fec.protect(pipeline.pad_slot(sf.serialize_frame(frame)))
        accepted_wrong = 0
        recovered = lost = 0
        for _ in range(300):
            bits = np.unpackbits(np.frombuffer(slot, dtype=np.uint8))
            flips = rng.random(bits.size) < rng.uniform(0.005, 0.08)
            rx = np.packbits(bits ^ flips).tobytes()
            decode = pipeline.decode_channel_bytes(rx)
            if decode.frames:
                recovered += 1
                if decode.frames[0] != frame:
                    accepted_wrong += 1
            else:
                lost += 1
        assert accepted_wrong == 0
        assert recovered > 0 and lost > 0  # the sweep spans both regimes
