"""TOML config loading: one file configures modem, FEC, channel,
server, and simulator; every section is optional and missing keys fall
back to the code defaults (which mirror calibration.toml).

LLM endpoint credentials come from [endpoints] or the SONIC_LLM_URL /
SONIC_LLM_KEY environment variables.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from sonic.channel import LossModel
from sonic.fec import FecConfig, InnerCode, OuterCode
from sonic.modem import Constellation, ModulationProfile
from sonic.queue_sim import ServiceModel
from sonic.server import ServerConfig, TransmissionWindow


@dataclass
class EndpointConfig:
    llm_url: str = ""
    llm_key: str = ""
    llm_mode: str = "stub"  # "stub" | "http"
    uplink_url: str = ""  # client -> server forwarding


@dataclass
class AppConfig:
    profile: ModulationProfile = field(default_factory=ModulationProfile)
    fec: FecConfig = field(default_factory=FecConfig)
    loss_model: LossModel = field(default_factory=LossModel)
    burst_mean_frames: float = 2.0
    service_model: ServiceModel = field(default_factory=ServiceModel)
    server: ServerConfig = field(default_factory=ServerConfig)
    endpoints: EndpointConfig = field(default_factory=EndpointConfig)


def _modem_from(d: dict) -> ModulationProfile:
    return ModulationProfile(
        sample_rate=int(d.get("sample_rate", 44100)),
        fft_size=int(d.get("fft_size", 512)),
        cyclic_prefix_len=int(d.get("cyclic_prefix_len", 128)),
        n_subcarriers=int(d.get("n_subcarriers", 92)),
        center_freq=float(d.get("center_freq", 9200.0)),
        constellation=Constellation(d.get("constellation", "qpsk")),
        n_pilots=int(d.get("n_pilots", 8)),
        sync_threshold=float(d.get("sync_threshold", 0.6)),
        amplitude_headroom=float(d.get("amplitude_headroom", 0.89)),
    )


def _fec_from(d: dict) -> FecConfig:
    return FecConfig(
        inner=InnerCode(d.get("inner", "conv_r12_k9")),
        outer=OuterCode(d.get("outer", "rs_255_223")),
        interleaver_depth=int(d.get("interleaver_depth", 4)),
    )


def _loss_from(d: dict) -> LossModel:
    return LossModel(
        p50_rssi=float(d.get("p50_rssi", -89.0)),
        slope=float(d.get("slope", 0.8)),
        floor=float(d.get("floor", 0.01)),
    )


def _service_from(d: dict) -> ServiceModel:
    return ServiceModel(
        url_median_bytes=float(d.get("url_median_bytes", 335_000.0)),
        url_sigma=float(d.get("url_sigma", 0.25)),
        gpt_median_bytes=float(d.get("gpt_median_bytes", 1_500.0)),
        gpt_sigma=float(d.get("gpt_sigma", 0.6)),
        bytes_per_second=float(d.get("bytes_per_second", 1250.0)),
        per_item_overhead_s=float(d.get("per_item_overhead_s", 3.0)),
    )


def load_config(path: str | Path | None = None) -> AppConfig:
    data: dict = {}
    if path is not None:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    modem_d = data.get("modem", {})
    fec_d = data.get("fec", {})
    chan_d = data.get("channel", {})
    sim_d = data.get("queue_sim", {})
    srv_d = data.get("server", {})
    ep_d = data.get("endpoints", {})

    profile = _modem_from(modem_d)
    fec = _fec_from(fec_d)
    server = ServerConfig(
        window=TransmissionWindow.parse(
            srv_d.get("window_start", "22:00"), srv_d.get("window_end", "05:00")
        ),
        tz_offset_hours=float(srv_d.get("tz_offset_hours", 0.0)),
        quota_per_day=int(srv_d.get("quota_per_day", 10)),
        queue_bound=int(srv_d.get("queue_bound", 10_000)),
        keepalive_interval_s=float(srv_d.get("keepalive_interval_s", 5.0)),
        push_k=int(srv_d.get("push_k", 3)),
        hub_size=int(srv_d.get("hub_size", 20)),
        strip_quality=int(srv_d.get("strip_quality", 10)),
        strip_height=int(srv_d.get("strip_height", 64)),
        nav_timeout_s=float(srv_d.get("nav_timeout_s", 30.0)),
        fec=fec,
        profile=profile,
    )
    endpoints = EndpointConfig(
        llm_url=os.environ.get("SONIC_LLM_URL", ep_d.get("llm_url", "")),
        llm_key=os.environ.get("SONIC_LLM_KEY", ep_d.get("llm_key", "")),
        llm_mode=ep_d.get("llm_mode", "stub"),
        uplink_url=ep_d.get("uplink_url", ""),
    )
    return AppConfig(
        profile=profile,
        fec=fec,
        loss_model=_loss_from(chan_d),
        burst_mean_frames=float(chan_d.get("burst_mean_frames", 2.0)),
        service_model=_service_from(sim_d),
        server=server,
        endpoints=endpoints,
    )
