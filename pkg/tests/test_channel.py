import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sonic import channel, modem
from sonic.channel import ChannelConditions, LossModel, frame_loss_prob


MODEL = LossModel()


class TestLossCurve:
    def test_midpoint(self):
        p = frame_loss_prob(MODEL.p50_rssi, MODEL)
        assert p == pytest.approx(0.505, abs=0.001)

    def test_strong_signal_near_floor(self):
        assert frame_loss_prob(-50.0, MODEL) <= 0.02

    def test_dead_signal(self):
        assert frame_loss_prob(-105.0, MODEL) >= 0.97

    def test_monotone_non_increasing_in_rssi(self):
        grid = np.linspace(-120, -40, 400)
        probs = [frame_loss_prob(r, MODEL) for r in grid]
        assert all(a >= b for a, b in zip(probs, probs[1:]))

    def test_invalid_model_rejected(self):
        with pytest.raises(ValueError):
            LossModel(slope=-1.0).validate()
        with pytest.raises(ValueError):
            LossModel(floor=1.5).validate()


class TestFrameChannel:
    def test_p_zero_all_survive(self):
        cond = ChannelConditions(rssi_dbm=-40.0, seed=1)
        mask = channel.frame_drop_mask(10_000, cond, LossModel(floor=0.0))
        assert not mask.any()

    def test_p_one_none_survive(self):
        cond = ChannelConditions(rssi_dbm=-130.0, seed=1)
        mask = channel.frame_drop_mask(5000, cond, LossModel(floor=0.0))
        # logistic(0.8*41) is 1.0 to double precision
        assert mask.all()

    def test_deterministic(self):
        cond = ChannelConditions(rssi_dbm=-85.0, seed=42)
        frames = list(range(500))
        a = channel.apply_frame_channel(frames, cond, MODEL)
        b = channel.apply_frame_channel(frames, cond, MODEL)
        assert a == b

    def test_order_preserved(self):
        cond = ChannelConditions(rssi_dbm=-88.0, seed=3)
        survivors = channel.apply_frame_channel(list(range(1000)), cond, MODEL)
        assert survivors == sorted(survivors)

    @pytest.mark.parametrize("rssi", [-75.0, -85.0, -89.0, -93.0, -100.0])
    def test_empirical_rate_matches_model(self, rssi):
        # 10k frames, +-1% absolute of the stationary probability
        cond = ChannelConditions(rssi_dbm=rssi, seed=7)
        mask = channel.frame_drop_mask(10_000, cond, MODEL)
        assert mask.mean() == pytest.approx(frame_loss_prob(rssi, MODEL), abs=0.01)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_monotonicity_in_rssi(self, seed):
        # same seed: improving the signal never drops more frames
        drops = []
        for rssi in (-100.0, -92.0, -86.0, -70.0, -50.0):
            cond = ChannelConditions(rssi_dbm=rssi, seed=seed)
            drops.append(channel.frame_drop_mask(2000, cond, MODEL).sum())
        assert all(a >= b for a, b in zip(drops, drops[1:]))

    def test_bursts_clump_losses(self):
        # dropped frames should be measurably clumpier than independent
        cond = ChannelConditions(rssi_dbm=-89.0, seed=5, burst_mean_frames=4.0)
        mask = channel.frame_drop_mask(50_000, cond, MODEL)
        p = mask.mean()
        joint = (mask[1:] & mask[:-1]).mean()
        assert joint > 1.15 * p * p

    def test_calibration_shape(self):
        # deployment-curve anchors: low loss in the strong bins, heavy
        # loss below -90 dBm
        sweep = channel.sweep_loss([-50, -60, -70, -80, -95, -100], 120, 100, MODEL)
        for rssi in (-50, -60, -70, -80):
            assert np.median(sweep[rssi]) < 0.20
        for rssi in (-95, -100):
            assert np.median(sweep[rssi]) > 0.90


class TestAudioChannel:
    def test_zero_length(self):
        out = channel.apply_audio_channel(
            modem.PcmChunk(np.zeros(0, dtype=np.int16)), ChannelConditions(rssi_dbm=-60)
        )
        assert out.samples.size == 0

    def test_length_preserved(self):
        pcm = modem.PcmChunk(np.ones(10_000, dtype=np.int16) * 1000)
        out = channel.apply_audio_channel(pcm, ChannelConditions(rssi_dbm=-70, seed=2))
        assert out.samples.size == pcm.samples.size

    def test_snr_map_clamps(self):
        assert channel.snr_for_rssi(-60.0) == 40.0
        assert channel.snr_for_rssi(-115.0) == 5.0
        assert channel.snr_for_rssi(-130.0) == 0.0

    def test_strong_signal_decodes_clean(self):
        payload = np.random.default_rng(0).bytes(1200)
        pcm = modem.modulate(payload)
        ok = 0
        for seed in range(20):
            out = channel.apply_audio_channel(pcm, ChannelConditions(rssi_dbm=-60, seed=seed))
            got = modem.demodulate([out])
            ok += len(got) == 1 and got[0][0] == payload
        assert ok == 20

    def test_dead_signal_no_sync_or_heavy_loss(self):
        payload = np.random.default_rng(1).bytes(1200)
        pcm = modem.modulate(payload)
        for seed in range(20):
            out = channel.apply_audio_channel(pcm, ChannelConditions(rssi_dbm=-115, seed=seed))
            got = modem.demodulate([out])
            if got:
                # anything detected must be badly damaged
                assert all(b != payload for b, _ in got)

    def test_deterministic(self):
        pcm = modem.PcmChunk((np.sin(np.arange(30000) * 0.1) * 20000).astype(np.int16))
        cond = ChannelConditions(rssi_dbm=-90, seed=11)
        a = channel.apply_audio_channel(pcm, cond)
        b = channel.apply_audio_channel(pcm, cond)
        assert (a.samples == b.samples).all()
