"""OFDM software modem: channel bytes <-> PCM audio / WAV files.

Numerology (default profile): 44.1 kHz sample rate, FFT size 512
(86.13 Hz subcarrier spacing), cyclic prefix 128 samples, 92 subcarriers
centered on 9.2 kHz, QPSK with 8 BPSK pilots.  That yields
84 data carriers * 2 bits / 14.51 ms = 11.58 kbps net payload rate.

Every transmission is laid out as

    preamble (2 identical known symbols) | header symbol | payload
    symbols | 20 ms silence

The header symbol carries the payload byte count (u32 + 16-bit check),
BPSK-coded, so the receiver knows exactly how many symbols follow; the
stream demodulator synchronizes on the preamble by normalized
cross-correlation and re-arms after every transmission or failed
header, which makes it robust to dropouts.
"""

from __future__ import annotations

import struct
import wave
import zlib
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
from scipy.signal import oaconvolve


class Constellation(Enum):
    BPSK = "bpsk"
    QPSK = "qpsk"

    @property
    def bits_per_symbol(self) -> int:
        return 1 if self is Constellation.BPSK else 2


class UnsupportedWav(ValueError):
    pass


class ProfileError(ValueError):
    pass


@dataclass
class PcmChunk:
    samples: np.ndarray  # int16
    sample_rate: int = 44100

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class ModulationProfile:
    sample_rate: int = 44100
    fft_size: int = 512
    cyclic_prefix_len: int = 128
    n_subcarriers: int = 92
    center_freq: float = 9200.0
    constellation: Constellation = Constellation.QPSK
    n_pilots: int = 8
    sync_threshold: float = 0.6
    amplitude_headroom: float = 0.89
    tail_silence_s: float = 0.020

    @property
    def subcarrier_spacing(self) -> float:
        return self.sample_rate / self.fft_size

    @property
    def symbol_len(self) -> int:
        return self.fft_size + self.cyclic_prefix_len

    @cached_property
    def occupied_bins(self) -> np.ndarray:
        center_bin = round(self.center_freq / self.subcarrier_spacing)
        lo = center_bin - self.n_subcarriers // 2
        return np.arange(lo, lo + self.n_subcarriers)

    @cached_property
    def pilot_positions(self) -> np.ndarray:
        # spread across the band, endpoints included for the phase fit
        return np.round(np.linspace(0, self.n_subcarriers - 1, self.n_pilots)).astype(int)

    @cached_property
    def data_positions(self) -> np.ndarray:
        mask = np.ones(self.n_subcarriers, dtype=bool)
        mask[self.pilot_positions] = False
        return np.nonzero(mask)[0]

    @cached_property
    def pilot_values(self) -> np.ndarray:
        rng = np.random.default_rng(0xC137)
        return (1.0 - 2.0 * rng.integers(0, 2, self.n_pilots)).astype(complex)

    @property
    def bits_per_ofdm_symbol(self) -> int:
        return len(self.data_positions) * self.constellation.bits_per_symbol

    @cached_property
    def preamble(self) -> np.ndarray:
        """Known float waveform: 2 distinct pseudo-random OFDM symbols.

        Distinct symbols keep the matched-filter autocorrelation free of
        the half-length plateau a repeated symbol would produce, so the
        sync peak is unambiguous even right after a silent gap.
        """
        rng = np.random.default_rng(0x5051)
        parts = []
        for _ in range(2):
            phases = rng.integers(0, 4, self.n_subcarriers)
            values = np.exp(1j * (np.pi / 4 + np.pi / 2 * phases))
            parts.append(self._assemble_symbol(values))
        return np.concatenate(parts)

    @property
    def band(self) -> tuple[float, float]:
        bins = self.occupied_bins
        df = self.subcarrier_spacing
        return (bins[0] - 0.5) * df, (bins[-1] + 0.5) * df

    def validate(self) -> None:
        lo, hi = self.band
        if not (300.0 < lo and hi < 15000.0):
            raise ProfileError(f"occupied band [{lo:.0f}, {hi:.0f}] Hz outside FM audio passband")
        if self.n_pilots < 2 or self.n_pilots >= self.n_subcarriers:
            raise ProfileError("need >=2 pilots and at least one data carrier")
        if self.occupied_bins[-1] >= self.fft_size // 2:
            raise ProfileError("subcarriers exceed Nyquist")

    def _assemble_symbol(self, values: np.ndarray) -> np.ndarray:
        spec = np.zeros(self.fft_size // 2 + 1, dtype=complex)
        spec[self.occupied_bins] = values
        body = np.fft.irfft(spec, self.fft_size)
        return np.concatenate([body[-self.cyclic_prefix_len :], body])


DEFAULT_PROFILE = ModulationProfile()


@dataclass
class SyncReport:
    start_sample: int
    corr_peak: float
    snr_db_est: float
    header_ok: bool
    n_symbols: int = 0
    nbytes: int = 0


def effective_throughput(profile: ModulationProfile) -> float:
    """Analytic net payload rate in bits/s (CP and pilots accounted,
    preamble amortization excluded)."""
    return profile.bits_per_ofdm_symbol * profile.sample_rate / profile.symbol_len


def _header_bits(nbytes: int, profile: ModulationProfile) -> np.ndarray:
    payload = struct.pack("<I", nbytes)
    check = struct.pack("<H", zlib.crc32(payload) & 0xFFFF)
    bits = np.unpackbits(np.frombuffer(payload + check, dtype=np.uint8))
    out = np.zeros(len(profile.data_positions), dtype=np.uint8)
    out[: bits.size] = bits
    return out


def _parse_header_bits(bits: np.ndarray) -> int | None:
    data = np.packbits(bits[:48]).tobytes()
    (nbytes,) = struct.unpack("<I", data[:4])
    (check,) = struct.unpack("<H", data[4:6])
    if check != zlib.crc32(data[:4]) & 0xFFFF:
        return None
    return nbytes


def _map_bits(bits: np.ndarray, constellation: Constellation) -> np.ndarray:
    if constellation is Constellation.BPSK:
        return (1.0 - 2.0 * bits).astype(complex)
    pairs = bits.reshape(-1, 2)
    re = 1.0 - 2.0 * pairs[:, 0]
    im = 1.0 - 2.0 * pairs[:, 1]
    return (re + 1j * im) / np.sqrt(2.0)


def _demap_symbols(symbols: np.ndarray, constellation: Constellation) -> np.ndarray:
    if constellation is Constellation.BPSK:
        return (symbols.real < 0).astype(np.uint8).ravel()
    out = np.empty(symbols.size * 2, dtype=np.uint8)
    out[0::2] = (symbols.real < 0).astype(np.uint8).ravel()
    out[1::2] = (symbols.imag < 0).astype(np.uint8).ravel()
    return out


def modulate(channel_bytes: bytes, profile: ModulationProfile = DEFAULT_PROFILE) -> PcmChunk:
    """Render one transmission to 16-bit PCM."""
    profile.validate()
    n_data = len(profile.data_positions)
    bits_per_sym = profile.bits_per_ofdm_symbol
    nbytes = len(channel_bytes)
    n_sym = -(-nbytes * 8 // bits_per_sym) if nbytes else 0

    pieces = [profile.preamble]
    header_vals = _map_bits(_header_bits(nbytes, profile), Constellation.BPSK)
    pieces.append(_assemble_data_symbol(header_vals, profile))

    if n_sym:
        bits = np.unpackbits(np.frombuffer(channel_bytes, dtype=np.uint8))
        bits = np.concatenate([bits, np.zeros(n_sym * bits_per_sym - bits.size, dtype=np.uint8)])
        values = _map_bits(bits, profile.constellation).reshape(n_sym, n_data)
        spec = np.zeros((n_sym, profile.fft_size // 2 + 1), dtype=complex)
        spec[:, profile.occupied_bins[profile.data_positions]] = values
        spec[:, profile.occupied_bins[profile.pilot_positions]] = profile.pilot_values
        body = np.fft.irfft(spec, profile.fft_size, axis=1)
        with_cp = np.concatenate([body[:, -profile.cyclic_prefix_len :], body], axis=1)
        pieces.append(with_cp.ravel())

    pieces.append(np.zeros(int(profile.tail_silence_s * profile.sample_rate)))
    wave_f = np.concatenate(pieces)
    peak = np.abs(wave_f).max()
    scale = profile.amplitude_headroom * 32767.0 / peak if peak > 0 else 0.0
    samples = np.round(wave_f * scale).astype(np.int16)
    return PcmChunk(samples=samples, sample_rate=profile.sample_rate)


def _assemble_data_symbol(values: np.ndarray, profile: ModulationProfile) -> np.ndarray:
    spec = np.zeros(profile.fft_size // 2 + 1, dtype=complex)
    spec[profile.occupied_bins[profile.data_positions]] = values
    spec[profile.occupied_bins[profile.pilot_positions]] = profile.pilot_values
    body = np.fft.irfft(spec, profile.fft_size)
    return np.concatenate([body[-profile.cyclic_prefix_len :], body])


def transmission_air_samples(nbytes: int, profile: ModulationProfile = DEFAULT_PROFILE) -> int:
    """Sample count modulate() will produce for nbytes of channel data."""
    n_sym = -(-nbytes * 8 // profile.bits_per_ofdm_symbol) if nbytes else 0
    return (
        profile.symbol_len * 2  # preamble
        + profile.symbol_len  # header
        + n_sym * profile.symbol_len
        + int(profile.tail_silence_s * profile.sample_rate)
    )


class Demodulator:
    """Stateful stream demodulator: feed PCM, collect transmissions.

    Single-consumer: one instance must not be fed from multiple threads.
    Output is independent of how the stream is chunked.
    """

    GUARD = 8  # FFT window backs into the CP this many samples

    def __init__(self, profile: ModulationProfile = DEFAULT_PROFILE):
        profile.validate()
        self.profile = profile
        self._buf = np.empty(0, dtype=np.float64)
        self._base = 0  # absolute stream index of _buf[0]
        self._state = "search"
        self._sync_at = 0  # absolute index of preamble start
        self._corr_peak = 0.0
        self._nbytes = 0
        self._n_sym = 0
        pre = profile.preamble
        self._pre = pre / np.linalg.norm(pre)
        self._pre_len = pre.size

    def push(self, chunk: PcmChunk | np.ndarray) -> list[tuple[bytes, SyncReport]]:
        samples = chunk.samples if isinstance(chunk, PcmChunk) else chunk
        if isinstance(chunk, PcmChunk) and chunk.sample_rate != self.profile.sample_rate:
            raise UnsupportedWav(f"sample rate {chunk.sample_rate} does not match profile")
        if samples.size:
            x = samples.astype(np.float64)
            if samples.dtype == np.int16:
                x /= 32768.0
            self._buf = np.concatenate([self._buf, x])
        out: list[tuple[bytes, SyncReport]] = []
        while self._step(out):
            pass
        return out

    def flush(self) -> list[tuple[bytes, SyncReport]]:
        """Stream ended: drop any incomplete transmission."""
        self._buf = np.empty(0, dtype=np.float64)
        self._state = "search"
        return []

    # internal: returns True when progress was made and another pass may help
    def _step(self, out: list) -> bool:
        if self._state == "search":
            return self._search()
        if self._state == "header":
            return self._read_header()
        return self._read_payload(out)

    def _search(self) -> bool:
        refine = self._pre_len // 2
        lp = self._pre_len
        # candidate t needs samples through t + lp + refine for refinement
        limit = self._buf.size - (lp + refine)
        if limit <= 0:
            return False
        ncc = self._ncc(0, self._buf.size - lp + 1)
        hits = np.nonzero(ncc[:limit] >= self.profile.sync_threshold)[0]
        if hits.size == 0:
            # everything before `limit` is scanned clean
            self._drop(limit)
            return False
        c = int(hits[0])
        t = c + int(np.argmax(ncc[c : c + refine]))
        self._sync_at = self._base + t
        self._corr_peak = float(ncc[t])
        self._state = "header"
        return True

    def _ncc(self, lo: int, hi: int) -> np.ndarray:
        seg = self._buf[lo : hi + self._pre_len - 1]
        mf = oaconvolve(seg, self._pre[::-1], mode="valid")
        sq = np.concatenate([[0.0], np.cumsum(seg * seg)])
        energy = sq[self._pre_len :] - sq[: mf.size]
        return mf / np.sqrt(np.maximum(energy, 1e-12))

    def _drop(self, n: int) -> None:
        self._buf = self._buf[n:]
        self._base += n

    def _read_header(self) -> bool:
        start = self._sync_at - self._base + self._pre_len
        if start + self.profile.symbol_len > self._buf.size:
            return False
        bins, _ = self._demod_symbols(start, 1)
        bits = _demap_symbols(bins, Constellation.BPSK)
        nbytes = _parse_header_bits(bits)
        if nbytes is None or nbytes > 1 << 24:
            # false or broken sync: hop half a preamble forward so a
            # genuine preamble just behind the false peak still syncs
            self._drop(self._sync_at - self._base + self._pre_len // 2)
            self._state = "search"
            return True
        self._nbytes = nbytes
        self._n_sym = -(-nbytes * 8 // self.profile.bits_per_ofdm_symbol) if nbytes else 0
        self._state = "payload"
        return True

    def _read_payload(self, out: list) -> bool:
        p = self.profile
        data_start = self._sync_at - self._base + self._pre_len + p.symbol_len
        end = data_start + self._n_sym * p.symbol_len
        if end > self._buf.size:
            return False
        if self._n_sym:
            bins, snr = self._demod_symbols(data_start, self._n_sym)
            bits = _demap_symbols(bins, p.constellation)
            data = np.packbits(bits).tobytes()[: self._nbytes]
        else:
            data, snr = b"", float("inf")
        out.append(
            (
                data,
                SyncReport(
                    start_sample=self._sync_at,
                    corr_peak=self._corr_peak,
                    snr_db_est=snr,
                    header_ok=True,
                    n_symbols=self._n_sym,
                    nbytes=self._nbytes,
                ),
            )
        )
        self._drop(end)
        self._state = "search"
        return True

    def _demod_symbols(self, start: int, n_sym: int) -> tuple[np.ndarray, float]:
        """FFT + pilot equalization; returns data-carrier values and an
        SNR estimate from pilot residuals."""
        p = self.profile
        offs = start + np.arange(n_sym)[:, None] * p.symbol_len + p.cyclic_prefix_len - self.GUARD
        windows = self._buf[offs + np.arange(p.fft_size)[None, :]]
        spec = np.fft.rfft(windows, axis=1)[:, p.occupied_bins]

        pilots = spec[:, p.pilot_positions]
        ref = p.pilot_values[None, :]
        ratio = pilots * np.conj(ref)
        # linear phase (timing) from adjacent pilot pairs, then intercept
        k = p.pilot_positions.astype(float)
        dk = np.diff(k)
        pair = ratio[:, 1:] * np.conj(ratio[:, :-1])
        slope = np.angle(np.sum(pair / dk[None, :] ** 0, axis=1)) / np.mean(dk)
        derot = ratio * np.exp(-1j * slope[:, None] * k[None, :])
        intercept = np.angle(np.sum(derot, axis=1))
        gain = np.abs(pilots).mean(axis=1) / np.abs(ref).mean()
        gain = np.maximum(gain, 1e-9)

        kk = np.arange(p.n_subcarriers, dtype=float)[None, :]
        correction = np.exp(-1j * (intercept[:, None] + slope[:, None] * kk)) / gain[:, None]
        eq = spec * correction

        resid = eq[:, p.pilot_positions] - ref
        noise = np.mean(np.abs(resid) ** 2)
        snr = 10.0 * np.log10(1.0 / noise) if noise > 0 else float("inf")
        return eq[:, p.data_positions], float(snr)


def demodulate(
    chunks, profile: ModulationProfile = DEFAULT_PROFILE
) -> list[tuple[bytes, SyncReport]]:
    """Run a whole chunk sequence through a fresh Demodulator.

    Returns one (channel_bytes, report) pair per detected transmission;
    an empty list is the NO_SYNC outcome and is not an error.
    """
    demod = Demodulator(profile)
    out: list[tuple[bytes, SyncReport]] = []
    for chunk in chunks:
        out.extend(demod.push(chunk))
    out.extend(demod.flush())
    return out


def write_wav(pcm: PcmChunk, path) -> None:
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(pcm.sample_rate)
        w.writeframes(pcm.samples.astype("<i2").tobytes())


def read_wav(path) -> PcmChunk:
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1:
            raise UnsupportedWav("only mono WAV files are supported")
        if w.getsampwidth() != 2:
            raise UnsupportedWav("only 16-bit PCM WAV files are supported")
        if w.getcomptype() != "NONE":
            raise UnsupportedWav("compressed WAV variants are not supported")
        raw = w.readframes(w.getnframes())
        samples = np.frombuffer(raw, dtype="<i2")
        return PcmChunk(samples=samples, sample_rate=w.getframerate())
