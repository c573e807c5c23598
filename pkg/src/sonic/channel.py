"""Simulated broadcast channel: RSSI -> frame loss / audio degradation.

Two operating modes keyed off the same RSSI value:

* frame level (fast): drop whole protected frames with a two-state
  Gilbert-Elliott process whose stationary loss rate equals
  `frame_loss_prob(rssi)` and whose bad-state dwell averages
  `burst_mean_frames`.  Used for queue/scale experiments and the loss
  sweeps.
* audio level (full): additive white Gaussian noise at an SNR derived
  from RSSI plus burst dropouts (zeroed segments), feeding the real
  demodulator.  Used for modem validation.

The logistic loss curve is a calibration artifact fitted to deployment
narrative anchors (the parameters live in calibration.toml), not a
propagation model; likewise the rssi->SNR map is a linear convenience.

The Gilbert-Elliott construction keeps the state path independent of
the loss probability (50/50 stationary occupancy, equal mean dwell in
both states) and modulates only the per-state drop probabilities
(h_bad = min(1, 2p), h_good = max(0, 2p - 1)).  Stationary loss is
exactly p, losses clump in bad-state dwells, and for a fixed seed the
dropped set grows monotonically with p, which makes loss monotone in
RSSI by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, TypeVar

import numpy as np

from sonic.modem import PcmChunk

T = TypeVar("T")


@dataclass(frozen=True)
class ChannelConditions:
    rssi_dbm: float
    seed: int = 0
    burst_mean_frames: float = 2.0

    def validate(self) -> None:
        if not math.isfinite(self.rssi_dbm):
            raise ValueError("rssi must be finite")
        if self.burst_mean_frames < 1:
            raise ValueError("burst_mean_frames must be >= 1")


@dataclass(frozen=True)
class LossModel:
    p50_rssi: float = -89.0
    slope: float = 0.8
    floor: float = 0.01

    def validate(self) -> None:
        if self.slope <= 0:
            raise ValueError("slope must be positive for monotone loss")
        if not 0.0 <= self.floor < 1.0:
            raise ValueError("floor must lie in [0, 1)")


DEFAULT_LOSS_MODEL = LossModel()


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def frame_loss_prob(rssi_dbm: float, model: LossModel = DEFAULT_LOSS_MODEL) -> float:
    """Stationary per-frame loss probability at a given RSSI."""
    raw = _logistic(-model.slope * (rssi_dbm - model.p50_rssi))
    return model.floor + (1.0 - model.floor) * raw


def burst_probability(rssi_dbm: float, model: LossModel = DEFAULT_LOSS_MODEL) -> float:
    """Dropout-burst rate for the audio path: the logistic term without
    the residual floor (AWGN already models residual errors)."""
    return _logistic(-model.slope * (rssi_dbm - model.p50_rssi))


def frame_drop_mask(
    n_frames: int,
    cond: ChannelConditions,
    model: LossModel = DEFAULT_LOSS_MODEL,
    p_override: float | None = None,
) -> np.ndarray:
    """Boolean drop mask for n consecutive frames; deterministic per seed."""
    cond.validate()
    model.validate()
    p = frame_loss_prob(cond.rssi_dbm, model) if p_override is None else p_override
    if n_frames == 0:
        return np.zeros(0, dtype=bool)
    rng = np.random.default_rng(cond.seed)
    u_state = rng.random(n_frames + 1)
    u_drop = rng.random(n_frames)

    switch = 1.0 / cond.burst_mean_frames
    states = np.empty(n_frames, dtype=bool)  # True = bad
    s = u_state[0] < 0.5
    for i in range(n_frames):
        states[i] = s
        if u_state[i + 1] < switch:
            s = not s
    h_bad = min(1.0, 2.0 * p)
    h_good = max(0.0, 2.0 * p - 1.0)
    thresholds = np.where(states, h_bad, h_good)
    return u_drop < thresholds


def apply_frame_channel(
    frames: Sequence[T],
    cond: ChannelConditions,
    model: LossModel = DEFAULT_LOSS_MODEL,
) -> list[T]:
    """Return the frames that survive the lossy channel, order preserved."""
    mask = frame_drop_mask(len(frames), cond, model)
    return [f for f, dropped in zip(frames, mask) if not dropped]


def snr_for_rssi(rssi_dbm: float) -> float:
    """Linear rssi->SNR map, clamped to [0, 40] dB."""
    return float(np.clip(rssi_dbm + 120.0, 0.0, 40.0))


# roughly the air time of one 512-byte protected slot at the default
# modem profile; dropout granularity for the audio path
DROPOUT_SEGMENT_SAMPLES = 37_120


def apply_audio_channel(
    pcm: PcmChunk,
    cond: ChannelConditions,
    model: LossModel = DEFAULT_LOSS_MODEL,
    dropouts: bool = True,
    segment_samples: int = DROPOUT_SEGMENT_SAMPLES,
) -> PcmChunk:
    """Degrade audio: AWGN at the RSSI-derived SNR plus burst dropouts."""
    cond.validate()
    if pcm.samples.size == 0:
        return PcmChunk(samples=pcm.samples.copy(), sample_rate=pcm.sample_rate)
    x = pcm.samples.astype(np.float64) / 32768.0
    rng = np.random.default_rng(cond.seed)

    if dropouts:
        n_seg = -(-x.size // segment_samples)
        seg_cond = ChannelConditions(
            rssi_dbm=cond.rssi_dbm,
            seed=cond.seed ^ 0xD20F,
            burst_mean_frames=cond.burst_mean_frames,
        )
        mask = frame_drop_mask(n_seg, seg_cond, model, p_override=burst_probability(cond.rssi_dbm, model))
        for i in np.nonzero(mask)[0]:
            x[i * segment_samples : (i + 1) * segment_samples] = 0.0

    snr_db = snr_for_rssi(cond.rssi_dbm)
    sig_power = np.mean((pcm.samples.astype(np.float64) / 32768.0) ** 2)
    noise = rng.normal(0.0, math.sqrt(sig_power / 10 ** (snr_db / 10.0)), x.size)
    out = np.clip((x + noise) * 32768.0, -32768, 32767).astype(np.int16)
    return PcmChunk(samples=out, sample_rate=pcm.sample_rate)


def sweep_loss(
    rssi_values: Sequence[float],
    n_frames: int,
    n_seeds: int,
    model: LossModel = DEFAULT_LOSS_MODEL,
    burst_mean_frames: float = 2.0,
) -> dict[float, np.ndarray]:
    """Per-RSSI empirical loss fractions over seeded transmissions of
    n_frames each; the raw material for the loss-vs-RSSI calibration."""
    out: dict[float, np.ndarray] = {}
    for rssi in rssi_values:
        losses = np.empty(n_seeds)
        for seed in range(n_seeds):
            cond = ChannelConditions(rssi_dbm=rssi, seed=seed, burst_mean_frames=burst_mean_frames)
            losses[seed] = frame_drop_mask(n_frames, cond, model).mean()
        out[rssi] = losses
    return out
