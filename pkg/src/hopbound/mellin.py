"""Mellin transforms of SNR-domain arrival and service increments.

Cumulative bit-domain processes are mapped to the SNR domain through the
exponential function, so per-slot increments become the random factors
e^{r_a} (arrivals) and g(snr) (service).  The Mellin transform of a factor X
at argument u is E[X^(u-1)]; it always equals 1 at u = 1.  Values are
computed in log space internally because kernel numerators raise them to
large powers.
"""

import math
from dataclasses import dataclass

from .special import log_upper_incomplete_gamma

__all__ = [
    "ArrivalModel",
    "ShannonRayleighService",
    "WirelessHartService",
    "mellin_arrival",
    "mellin_service_shannon",
    "mellin_service_whart",
]

_LN2 = math.log(2.0)


def _exp_or_inf(logv: float) -> float:
    if logv > 709.0:
        return math.inf
    return math.exp(logv)


@dataclass(frozen=True)
class ArrivalModel:
    """Constant-rate arrivals of ``rate_bits`` bits every ``interval_slots`` steps.

    The analysis treats one interval as one time step, so the per-increment
    Mellin transform at argument u is exp(rate_bits * (u - 1)).
    """

    rate_bits: float
    interval_slots: int = 1

    def __post_init__(self):
        if not (self.rate_bits >= 0.0 and math.isfinite(self.rate_bits)):
            raise ValueError(f"rate_bits must be finite and >= 0, got {self.rate_bits}")
        if self.interval_slots < 1:
            raise ValueError(f"interval_slots must be >= 1, got {self.interval_slots}")

    def log_mellin_at(self, u: float) -> float:
        return self.rate_bits * (u - 1.0)

    def mellin_at(self, u: float) -> float:
        return _exp_or_inf(self.log_mellin_at(u))


@dataclass(frozen=True)
class ShannonRayleighService:
    """Rayleigh block-fading link serving C log2(1 + snr) bits per slot.

    The SNR-domain service increment is (1 + snr)^c_nat with snr exponential
    with mean ``mean_snr`` and c_nat = symbols_per_slot / ln 2.
    """

    mean_snr: float
    symbols_per_slot: float

    def __post_init__(self):
        if not (self.mean_snr > 0.0 and math.isfinite(self.mean_snr)):
            raise ValueError(f"mean_snr must be finite and > 0, got {self.mean_snr}")
        if not (self.symbols_per_slot > 0.0):
            raise ValueError(f"symbols_per_slot must be > 0, got {self.symbols_per_slot}")

    @property
    def c_nat(self) -> float:
        return self.symbols_per_slot / _LN2

    def log_mellin_at(self, u: float) -> float:
        # E[(1+snr)^(c(u-1))] = e^(1/m) m^(c(u-1)) Gamma(c(u-1)+1, 1/m), m = mean_snr
        if u == 1.0:
            return 0.0
        m = self.mean_snr
        c_shift = self.c_nat * (u - 1.0)
        return 1.0 / m + c_shift * math.log(m) + log_upper_incomplete_gamma(c_shift + 1.0, 1.0 / m)

    def mellin_at(self, u: float) -> float:
        return _exp_or_inf(self.log_mellin_at(u))


@dataclass(frozen=True)
class WirelessHartService:
    """Slotted link moving ``frame_bits`` bits with probability ``success_prob``.

    Bernoulli service in the SNR domain: the per-step Mellin transform at
    argument u is 1 + (e^(frame_bits (u-1)) - 1) * success_prob.
    """

    frame_bits: int
    success_prob: float

    def __post_init__(self):
        if self.frame_bits <= 0:
            raise ValueError(f"frame_bits must be positive, got {self.frame_bits}")
        if not (0.0 <= self.success_prob <= 1.0):
            raise ValueError(f"success_prob must be in [0, 1], got {self.success_prob}")

    def log_mellin_at(self, u: float) -> float:
        q = self.success_prob
        e = self.frame_bits * (u - 1.0)
        if q == 1.0:
            return e
        if q == 0.0:
            return 0.0
        if e > 30.0:
            # e^e dominates: log(1 + q(e^e - 1)) = e + log q + log1p((1-q) e^-e / q)
            return e + math.log(q) + math.log1p((1.0 - q) * math.exp(-e) / q)
        # no cancellation for e near 0 or very negative
        return math.log1p(q * math.expm1(e))

    def mellin_at(self, u: float) -> float:
        return _exp_or_inf(self.log_mellin_at(u))


def mellin_arrival(arrival: ArrivalModel, s: float) -> float:
    """Arrival-process Mellin transform evaluated at argument 1 + s."""
    if not math.isfinite(s):
        raise ValueError(f"s must be finite, got {s}")
    return arrival.mellin_at(1.0 + s)


def mellin_service_shannon(svc: ShannonRayleighService, u: float) -> float:
    """Service-increment Mellin transform of a Shannon/Rayleigh link at argument u."""
    if not math.isfinite(u):
        raise ValueError(f"u must be finite, got {u}")
    return svc.mellin_at(u)


def mellin_service_whart(svc: WirelessHartService, u: float) -> float:
    """Service-increment Mellin transform of a WirelessHART link at argument u."""
    if not math.isfinite(u):
        raise ValueError(f"u must be finite, got {u}")
    return svc.mellin_at(u)
