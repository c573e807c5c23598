import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sonic import modem
from sonic.modem import Constellation, ModulationProfile, PcmChunk


@pytest.fixture(scope="module")
def profile():
    return ModulationProfile()


def add_awgn(samples: np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    x = samples.astype(np.float64) / 32768.0
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, np.sqrt(np.mean(x**2) / 10 ** (snr_db / 10)), x.size)
    return np.clip((x + noise) * 32768.0, -32768, 32767).astype(np.int16)


class TestProfile:
    def test_default_profile_valid(self, profile):
        profile.validate()
        lo, hi = profile.band
        assert 300.0 < lo and hi < 15000.0

    def test_default_rate_near_10kbps(self, profile):
        rate = modem.effective_throughput(profile)
        assert 8000.0 <= rate <= 12000.0

    def test_bpsk_rate_exactly_half(self, profile):
        bpsk = ModulationProfile(constellation=Constellation.BPSK)
        assert modem.effective_throughput(bpsk) == modem.effective_throughput(profile) / 2

    def test_out_of_band_profile_rejected(self):
        with pytest.raises(modem.ProfileError):
            ModulationProfile(center_freq=14800.0).validate()


class TestModulate:
    def test_empty_payload_is_sync_block_and_tail(self, profile):
        pcm = modem.modulate(b"", profile)
        assert len(pcm.samples) == modem.transmission_air_samples(0, profile)
        assert len(pcm.samples) == 3 * profile.symbol_len + 882

    def test_throughput_anchor_1250_bytes(self, profile):
        pcm = modem.modulate(bytes(1250), profile)
        overhead = 3 * profile.symbol_len + int(0.02 * profile.sample_rate)
        payload_s = (len(pcm.samples) - overhead) / profile.sample_rate
        assert 0.8 <= payload_s <= 1.2  # 1250 B at ~10 kbps is ~1 s

    def test_peak_amplitude_headroom(self, profile):
        pcm = modem.modulate(np.random.default_rng(0).bytes(3000), profile)
        assert np.abs(pcm.samples).max() <= 0.89 * 32767 + 1

    def test_band_occupancy(self, profile):
        pcm = modem.modulate(np.random.default_rng(1).bytes(5000), profile)
        x = pcm.samples.astype(np.float64)
        power = np.abs(np.fft.rfft(x)) ** 2
        freqs = np.fft.rfftfreq(x.size, 1.0 / profile.sample_rate)
        lo, hi = profile.band
        inband = power[(freqs >= lo) & (freqs <= hi)].sum() / power.sum()
        assert inband >= 0.95


class TestDemodulate:
    @given(st.binary(min_size=0, max_size=4000))
    @settings(max_examples=25, deadline=None)
    def test_noiseless_round_trip(self, payload):
        profile = ModulationProfile()
        got = modem.demodulate([modem.modulate(payload, profile)], profile)
        assert len(got) == 1
        assert got[0][0] == payload
        assert got[0][1].header_ok

    def test_round_trip_100kb(self, profile):
        payload = np.random.default_rng(5).bytes(100_000)
        got = modem.demodulate([modem.modulate(payload, profile)], profile)
        assert got[0][0] == payload

    def test_silence_no_sync(self, profile):
        out = modem.demodulate([PcmChunk(np.zeros(44100, dtype=np.int16))], profile)
        assert out == []

    def test_awgn_30db_monte_carlo(self, profile):
        payload = np.random.default_rng(2).bytes(1500)
        pcm = modem.modulate(payload, profile)
        ok = 0
        trials = 100
        for seed in range(trials):
            got = modem.demodulate([PcmChunk(add_awgn(pcm.samples, 30.0, seed))], profile)
            ok += len(got) == 1 and got[0][0] == payload
        assert ok >= 0.99 * trials

    def test_chunking_invariance(self, profile):
        payload = np.random.default_rng(3).bytes(2500)
        stream = np.concatenate([modem.modulate(payload, profile).samples] * 2)
        whole = modem.demodulate([PcmChunk(stream)], profile)
        rng = np.random.default_rng(9)
        for _ in range(5):
            cuts = np.sort(rng.choice(stream.size, rng.integers(1, 80), replace=False))
            chunks = [PcmChunk(part) for part in np.split(stream, cuts)]
            assert [b for b, _ in modem.demodulate(chunks, profile)] == [b for b, _ in whole]

    def test_leading_noise_below_minus20dbfs(self, profile):
        payload = np.random.default_rng(4).bytes(800)
        pcm = modem.modulate(payload, profile)
        rng = np.random.default_rng(11)
        for lead_s in (0.0, 0.5, 2.0):
            lead = (rng.normal(0, 0.1, int(lead_s * 44100)) * 32768).astype(np.int16)
            got = modem.demodulate([PcmChunk(np.concatenate([lead, pcm.samples]))], profile)
            assert len(got) == 1 and got[0][0] == payload

    def test_back_to_back_transmissions(self, profile):
        payloads = [np.random.default_rng(i).bytes(600 + 100 * i) for i in range(4)]
        stream = np.concatenate([modem.modulate(pl, profile).samples for pl in payloads])
        got = modem.demodulate([PcmChunk(stream)], profile)
        assert [b for b, _ in got] == payloads

    def test_sync_report_fields(self, profile):
        payload = b"report-me"
        got = modem.demodulate([modem.modulate(payload, profile)], profile)
        report = got[0][1]
        assert report.corr_peak >= 0.9
        assert report.snr_db_est > 30.0
        assert report.nbytes == len(payload)


class TestThroughputMeasured:
    def test_measured_rate_matches_analytic(self, profile):
        # ~60 s fixture; measured from sample counts, not wall clock
        analytic = modem.effective_throughput(profile)
        nbytes = int(analytic * 60 / 8)
        payload = np.random.default_rng(6).bytes(nbytes)
        pcm = modem.modulate(payload, profile)
        overhead = 3 * profile.symbol_len + int(0.02 * profile.sample_rate)
        payload_s = (len(pcm.samples) - overhead) / profile.sample_rate
        measured = nbytes * 8 / payload_s
        assert abs(measured - analytic) / analytic < 0.05


class TestWav:
    def test_silence_file_size(self, tmp_path, profile):
        path = tmp_path / "s.wav"
        modem.write_wav(PcmChunk(np.zeros(44100, dtype=np.int16)), path)
        assert path.stat().st_size == 44 + 88200

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_round_trip(self, seed):
        import tempfile, os

        rng = np.random.default_rng(seed)
        pcm = PcmChunk(rng.integers(-32768, 32768, 5000).astype(np.int16))
        fd, path = tempfile.mkstemp(suffix=".wav")
        os.close(fd)
        try:
            modem.write_wav(pcm, path)
            back = modem.read_wav(path)
            assert back.sample_rate == pcm.sample_rate
            assert (back.samples == pcm.samples).all()
        finally:
            os.unlink(path)

    def test_stereo_rejected(self, tmp_path):
        import wave

        path = tmp_path / "stereo.wav"
        with wave.open(str(path), "wb") as w:
            w.setnchannels(2)
            w.setsampwidth(2)
            w.setframerate(44100)
            w.writeframes(bytes(400))
        with pytest.raises(modem.UnsupportedWav):
            modem.read_wav(path)
