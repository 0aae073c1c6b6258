"""Shared builders for kernel/optimizer/simulation tests."""

import math

from hopbound.kernel import (
    LinkService,
    PathModel,
    link_from_shannon,
    stability_boundary,
    stability_margin,
)
from hopbound.mellin import ArrivalModel, ShannonRayleighService
from hopbound.scenario import (
    DEFAULT_NOISE_W,
    PathGeometry,
    Scenario,
    ShannonCapacity,
    Transceiver,
    WirelessHartFrames,
)


def db(x: float) -> float:
    return 10.0 ** (x / 10.0)


def ray_link(snr_db: float, c_sym: float = 20.0) -> LinkService:
    svc = ShannonRayleighService(mean_snr=db(snr_db), symbols_per_slot=c_sym)
    return link_from_shannon(svc, label=f"{snr_db}dB")


def ray_path(snr_dbs, rate_bits: float = 20.0, c_sym: float = 20.0) -> PathModel:
    links = tuple(ray_link(v, c_sym) for v in snr_dbs)
    return PathModel(links=links, arrival=ArrivalModel(rate_bits=rate_bits))


def const_link(m_value: float, label: str = "") -> LinkService:
    """Synthetic link whose service transform is m_value at every argument."""
    return LinkService(label=label or f"M={m_value}", mean_snr=1.0,
                       log_mellin_at=lambda u, _m=math.log(m_value): _m)


def random_stable_path(rng, n_links: int, rate_lo: float = 5.0, rate_hi: float = 30.0):
    """Random Rayleigh path plus an interior s at which it is comfortably stable."""
    while True:
        dbs = [rng.uniform(3.0, 22.0) for _ in range(n_links)]
        rate = rng.uniform(rate_lo, rate_hi)
        path = ray_path(dbs, rate)
        try:
            b = stability_boundary(path)
        except Exception:
            continue
        s = rng.uniform(0.15, 0.85) * b
        if stability_margin(path, s) < 0.995:
            return path, s, b


def bruteforce_horizon(path, s: float, safety: int = 40) -> int:
    """Horizon keeping the truncated geometric tail below 1e-12 of the head."""
    rho = stability_margin(path, s)
    need = math.log(1e-14) / math.log(rho)
    return int(need) + safety


def snr_scenario(snr_dbs, rate_bits: float = 20.0, c_sym: float = 20.0,
                 whart_frame_bits: int = 0, batteries=None) -> Scenario:
    """Scenario whose link SNRs at maximum power are exactly snr_dbs."""
    trx = Transceiver()
    gains = tuple(db(v) * DEFAULT_NOISE_W / trx.p_max_w for v in snr_dbs)
    service = (WirelessHartFrames(whart_frame_bits) if whart_frame_bits
               else ShannonCapacity(c_sym))
    return Scenario(geometry=PathGeometry(gains=gains), service=service,
                    arrival=ArrivalModel(rate_bits=rate_bits), transceiver=trx,
                    batteries_j=batteries, scenario_id="test")
