"""Physical-layer and platform models plus scenario configuration files.

Maps node placement to mean link SNRs, accounts transceiver energy per
superframe, derives battery durations, and reads/writes the INI scenario
format consumed by the CLI.

Calibration: the radio propagation constants are not tied to any particular
measurement.  The defaults are a path-loss exponent of 3.0, a noise power of
-101 dBm (thermal noise in a 2 MHz channel at -111 dBm plus a 10 dB receiver
noise figure) and a reference gain chosen so that a 20 m link driven at
4 dBm sees a mean SNR of 15 dB.  Absolute power figures are only comparable
between runs that share this calibration fingerprint, which is why every
CLI result row carries it.
"""

import configparser
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Union

from .mellin import ArrivalModel, ShannonRayleighService, WirelessHartService
from .kernel import CrossTraffic, PathModel, apply_cross_traffic, link_from_shannon, link_from_whart
from .special import frame_success_prob

__all__ = [
    "PathGeometry",
    "Transceiver",
    "ShannonCapacity",
    "WirelessHartFrames",
    "Scenario",
    "snr_from_power",
    "path_gain",
    "energy_per_superframe",
    "battery_duration",
    "battery_presets",
    "power_floors",
    "dbm_to_watts",
    "watts_to_dbm",
    "load_scenarios",
    "parse_scenarios",
    "scenario_to_ini",
    "DEFAULT_NOISE_W",
    "DEFAULT_PATHLOSS_EXPONENT",
    "DEFAULT_REFERENCE_GAIN",
]

DEFAULT_PATHLOSS_EXPONENT = 3.0
DEFAULT_NOISE_W = 10.0 ** (-13.1)   # -101 dBm
DEFAULT_REFERENCE_GAIN = 8.0e-6     # 20 m at 4 dBm -> 15 dB mean SNR at default noise


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def watts_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w / 1e-3)


def snr_from_power(p: float, gain: float, noise: float) -> float:
    """Mean SNR p * gain / noise of a link (all linear units)."""
    if noise <= 0.0:
        raise ValueError(f"noise must be > 0, got {noise}")
    return p * gain / noise


def path_gain(d: float, eta: float = DEFAULT_PATHLOSS_EXPONENT,
              k0: float = DEFAULT_REFERENCE_GAIN) -> float:
    """Distance-law mean channel gain k0 * d^-eta of a link of length d meters."""
    if d <= 0.0:
        raise ValueError(f"distance must be > 0, got {d}")
    return k0 * d ** (-eta)


@dataclass(frozen=True)
class PathGeometry:
    """Link geometry: either lengths in meters (with a path-loss law) or raw gains."""

    lengths_m: Optional[tuple] = None
    gains: Optional[tuple] = None
    pathloss_exponent: float = DEFAULT_PATHLOSS_EXPONENT
    reference_gain: float = DEFAULT_REFERENCE_GAIN

    def __post_init__(self):
        if (self.lengths_m is None) == (self.gains is None):
            raise ValueError("provide exactly one of lengths_m or gains")
        if self.lengths_m is not None:
            object.__setattr__(self, "lengths_m", tuple(float(v) for v in self.lengths_m))
            if any(v <= 0 for v in self.lengths_m):
                raise ValueError("link lengths must be positive")
        if self.gains is not None:
            object.__setattr__(self, "gains", tuple(float(v) for v in self.gains))
            if any(v <= 0 for v in self.gains):
                raise ValueError("link gains must be positive")

    @property
    def n_links(self) -> int:
        return len(self.lengths_m if self.lengths_m is not None else self.gains)

    def link_gains(self) -> tuple:
        if self.gains is not None:
            return self.gains
        return tuple(path_gain(d, self.pathloss_exponent, self.reference_gain)
                     for d in self.lengths_m)


@dataclass(frozen=True)
class Transceiver:
    """Low-power radio parameters (defaults follow a 2.4 GHz 802.15.4 part)."""

    p_min_w: float = dbm_to_watts(-17.0)
    p_max_w: float = dbm_to_watts(4.0)
    i_idle_a: float = 0.2e-6
    i_rx_a: float = 11.8e-3
    supply_v: float = 3.0
    t_slot_s: float = 10e-3
    t_tx_s: float = 4.256e-3
    t_ack_s: float = 0.8e-3
    tx_overhead_w: float = 15e-3

    def __post_init__(self):
        if self.p_min_w > self.p_max_w:
            raise ValueError("p_min_w must not exceed p_max_w")
        if self.t_tx_s + self.t_ack_s > self.t_slot_s:
            raise ValueError("t_tx + t_ack must fit into one slot")


@dataclass(frozen=True)
class ShannonCapacity:
    """Service model: C log2(1 + snr) bits per slot over a Rayleigh link."""

    symbols_per_slot: float = 20.0


@dataclass(frozen=True)
class WirelessHartFrames:
    """Service model: one frame_bits frame per slot, round-robin superframes."""

    frame_bits: int = 1016  # 127 bytes


@dataclass(frozen=True)
class Scenario:
    """Complete system description for bounds, optimization and simulation.

    In the Shannon model the time step of the analysis is one slot and the
    arrival rate is bits per slot.  In the WirelessHART model the step is one
    superframe (n_links slots of t_slot_s each) and the arrival rate is bits
    per superframe.
    """

    geometry: PathGeometry
    service: Union[ShannonCapacity, WirelessHartFrames]
    arrival: ArrivalModel
    noise_w: float = DEFAULT_NOISE_W
    transceiver: Transceiver = field(default_factory=Transceiver)
    batteries_j: Optional[tuple] = None
    cross_traffic: Optional[tuple] = None
    scenario_id: str = ""

    def __post_init__(self):
        if self.noise_w <= 0:
            raise ValueError("noise_w must be > 0")
        if self.batteries_j is not None:
            object.__setattr__(self, "batteries_j", tuple(float(b) for b in self.batteries_j))
            if len(self.batteries_j) != self.n_links:
                raise ValueError("batteries_j must have one entry per transmitter")
            if any(b < 0 for b in self.batteries_j):
                raise ValueError("battery charges must be >= 0")
        if self.cross_traffic is not None:
            object.__setattr__(self, "cross_traffic", tuple(float(c) for c in self.cross_traffic))
            if len(self.cross_traffic) != self.n_links:
                raise ValueError("cross_traffic must have one entry per link")

    @property
    def n_links(self) -> int:
        return self.geometry.n_links

    @property
    def is_whart(self) -> bool:
        return isinstance(self.service, WirelessHartFrames)

    def mean_snrs(self, powers) -> tuple:
        gains = self.geometry.link_gains()
        if len(powers) != len(gains):
            raise ValueError(f"expected {len(gains)} powers, got {len(powers)}")
        return tuple(snr_from_power(p, g, self.noise_w) for p, g in zip(powers, gains))

    def link_services(self, powers) -> tuple:
        links = []
        for n, snr in enumerate(self.mean_snrs(powers)):
            if self.is_whart:
                q = frame_success_prob(snr, self.service.frame_bits)
                svc = WirelessHartService(frame_bits=self.service.frame_bits, success_prob=q)
                link = link_from_whart(svc, mean_snr=snr, label=f"link{n + 1}")
            else:
                svc = ShannonRayleighService(mean_snr=snr,
                                             symbols_per_slot=self.service.symbols_per_slot)
                link = link_from_shannon(svc, label=f"link{n + 1}")
            if self.cross_traffic is not None:
                link = apply_cross_traffic(link, CrossTraffic(self.cross_traffic[n]))
            links.append(link)
        return tuple(links)

    def path_for_powers(self, powers) -> PathModel:
        return PathModel(links=self.link_services(powers), arrival=self.arrival)

    def calibration_fingerprint(self) -> str:
        g = self.geometry
        return (f"eta={g.pathloss_exponent:g};k0={g.reference_gain:g};"
                f"noise_w={self.noise_w:g};overhead_w={self.transceiver.tx_overhead_w:g}")


def min_feasible_power(link_gain: float, arrival: ArrivalModel, service_model,
                       noise: float, transceiver: Optional[Transceiver] = None) -> float:
    """Smallest transmit power at which the link can carry the flow at all.

    Shannon model: closed form of C log2(1 + p g / noise) >= rate at the mean
    channel gain.  WirelessHART model: the transceiver minimum.
    """
    if isinstance(service_model, WirelessHartFrames):
        return (transceiver or Transceiver()).p_min_w
    rate = arrival.rate_bits / arrival.interval_slots
    if rate <= 0.0:
        return 0.0
    return noise * (2.0 ** (rate / service_model.symbols_per_slot) - 1.0) / link_gain


def power_floors(scenario: Scenario) -> tuple:
    """Per-node lower power limits: feasibility floor and transceiver minimum."""
    floors = []
    for g in scenario.geometry.link_gains():
        feas = min_feasible_power(g, scenario.arrival, scenario.service,
                                  scenario.noise_w, scenario.transceiver)
        floors.append(max(feas, scenario.transceiver.p_min_w))
    return tuple(floors)


def energy_per_superframe(node_index: int, n_links: int, p: float, trx: Transceiver) -> float:
    """Energy in joules one transmitter spends during a superframe of n_links slots.

    Node n transmits in slot n (frame out, ACK back) and, unless it is the
    source, receives in slot n-1 (frame in, ACK out).  All remaining time in
    the superframe idles.  The transmit draw is radiated power plus a constant
    circuit overhead; reception and idling draw fixed currents at the supply
    voltage.
    """
    if not 1 <= node_index <= n_links:
        raise ValueError(f"node_index must be in [1, {n_links}], got {node_index}")
    v = trx.supply_v
    idle_p = trx.i_idle_a * v
    rx_p = trx.i_rx_a * v
    slot_idle = trx.t_slot_s - trx.t_tx_s - trx.t_ack_s

    tx_slot = (p + trx.tx_overhead_w) * trx.t_tx_s + rx_p * trx.t_ack_s + idle_p * slot_idle
    active_slots = 1
    rx_slot = 0.0
    if node_index > 1:
        rx_slot = rx_p * trx.t_tx_s + (p + trx.tx_overhead_w) * trx.t_ack_s + idle_p * slot_idle
        active_slots = 2
    idle_slots = (n_links - active_slots) * idle_p * trx.t_slot_s
    return tx_slot + rx_slot + idle_slots


def battery_duration(charge_j: float, e_per_superframe_j: float) -> float:
    """Superframes until depletion; +inf when consumption is zero."""
    if charge_j < 0:
        raise ValueError("charge must be >= 0")
    if e_per_superframe_j <= 0.0:
        return math.inf
    return charge_j / e_per_superframe_j


def battery_durations(scenario: Scenario, powers, charges=None,
                      simplified: bool = False) -> tuple:
    """Battery duration of every transmitter at the given power allocation.

    ``simplified`` replaces the transceiver energy model with charge/(p*T),
    the bare radiated-energy form.
    """
    charges = charges if charges is not None else scenario.batteries_j
    if charges is None:
        raise ValueError("scenario has no battery charges")
    n = scenario.n_links
    trx = scenario.transceiver
    out = []
    for i, (b, p) in enumerate(zip(charges, powers), start=1):
        if simplified:
            e = p * trx.t_slot_s * n
        else:
            e = energy_per_superframe(i, n, p, trx)
        out.append(battery_duration(b, e))
    return tuple(out)


def battery_presets(kind: str, geometry: PathGeometry, total: float) -> tuple:
    """Split a total charge budget across transmitters.

    equal: uniform.  proportional: shares proportional to each link's path
    loss, so the weakest link gets the most charge.  inverse-proportional:
    shares proportional to the link gain instead.
    """
    gains = geometry.link_gains()
    if kind == "equal":
        weights = [1.0] * len(gains)
    elif kind == "proportional":
        weights = [1.0 / g for g in gains]
    elif kind == "inverse-proportional":
        weights = list(gains)
    else:
        raise ValueError(f"unknown battery preset {kind!r}")
    wsum = sum(weights)
    return tuple(total * w / wsum for w in weights)


# ---------------------------------------------------------------------------
# Scenario files (INI format, units spelled out in the key names)
# ---------------------------------------------------------------------------

def _floats(text: str) -> list:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _paths_from_section(sec) -> list:
    """[path] may hold one line of lengths or several (one path per line)."""
    if "lengths_m" in sec:
        rows = [r for r in sec["lengths_m"].splitlines() if r.strip()]
        return [("lengths", _floats(r)) for r in rows]
    if "gains" in sec:
        rows = [r for r in sec["gains"].splitlines() if r.strip()]
        return [("gains", _floats(r)) for r in rows]
    raise ValueError("[path] needs lengths_m or gains")


def parse_scenarios(text: str, overrides: Optional[dict] = None) -> list:
    """Parse scenario INI text into a list of Scenario objects.

    ``overrides`` maps dotted keys like "qos.target_eps" or
    "service.symbols_per_slot" onto replacement values (strings), applied
    before construction.  A [path] section with several length rows yields
    one Scenario per row, sharing every other setting.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.read_string(text)
    if overrides:
        for dotted, value in overrides.items():
            section, _, key = dotted.partition(".")
            if not key:
                raise ValueError(f"override {dotted!r} is not of the form section.key")
            if not cp.has_section(section):
                cp.add_section(section)
            cp.set(section, key, str(value))

    if not cp.has_section("path"):
        raise ValueError("scenario file needs a [path] section")
    psec = cp["path"]
    eta = psec.getfloat("pathloss_exponent", DEFAULT_PATHLOSS_EXPONENT)
    k0 = psec.getfloat("reference_gain", DEFAULT_REFERENCE_GAIN)

    ssec = cp["service"] if cp.has_section("service") else {}
    model = str(ssec.get("model", "shannon")).strip().lower()
    if model == "shannon":
        service = ShannonCapacity(symbols_per_slot=float(ssec.get("symbols_per_slot", 20.0)))
    elif model in ("wirelesshart", "whart"):
        if "frame_bytes" in ssec:
            frame_bits = int(round(float(ssec["frame_bytes"]) * 8))
        else:
            frame_bits = int(float(ssec.get("frame_bits", 1016)))
        service = WirelessHartFrames(frame_bits=frame_bits)
    else:
        raise ValueError(f"unknown service model {model!r}")

    asec = cp["arrival"] if cp.has_section("arrival") else {}
    arrival = ArrivalModel(
        rate_bits=float(asec.get("rate_bits", 20.0)),
        interval_slots=int(float(asec.get("interval_slots", 1))),
    )

    noise_w = DEFAULT_NOISE_W
    if cp.has_section("noise"):
        nsec = cp["noise"]
        if "noise_w" in nsec:
            noise_w = nsec.getfloat("noise_w")
        elif "noise_dbm" in nsec:
            noise_w = dbm_to_watts(nsec.getfloat("noise_dbm"))

    trx = Transceiver()
    if cp.has_section("transceiver"):
        t = cp["transceiver"]
        def _power_w(key: str, default: float) -> float:
            if f"{key}_w" in t:
                return t.getfloat(f"{key}_w")
            if f"{key}_dbm" in t:
                return dbm_to_watts(t.getfloat(f"{key}_dbm"))
            return default

        def _scaled(base_key: str, scaled_key: str, scale: float, default: float) -> float:
            if base_key in t:
                return t.getfloat(base_key)
            if scaled_key in t:
                return t.getfloat(scaled_key) * scale
            return default

        trx = Transceiver(
            p_min_w=_power_w("p_min", trx.p_min_w),
            p_max_w=_power_w("p_max", trx.p_max_w),
            i_idle_a=_scaled("idle_current_a", "idle_current_ua", 1e-6, trx.i_idle_a),
            i_rx_a=_scaled("rx_current_a", "rx_current_ma", 1e-3, trx.i_rx_a),
            supply_v=t.getfloat("supply_v", trx.supply_v),
            t_slot_s=_scaled("slot_s", "slot_ms", 1e-3, trx.t_slot_s),
            t_tx_s=_scaled("tx_s", "tx_ms", 1e-3, trx.t_tx_s),
            t_ack_s=_scaled("ack_s", "ack_ms", 1e-3, trx.t_ack_s),
            tx_overhead_w=_scaled("tx_overhead_w", "tx_overhead_mw", 1e-3, trx.tx_overhead_w),
        )

    base_id = cp.get("scenario", "id", fallback="scenario") if cp.has_section("scenario") else "scenario"

    scenarios = []
    rows = _paths_from_section(psec)
    for idx, (kind, values) in enumerate(rows):
        if kind == "lengths":
            geometry = PathGeometry(lengths_m=tuple(values), pathloss_exponent=eta, reference_gain=k0)
        else:
            geometry = PathGeometry(gains=tuple(values), pathloss_exponent=eta, reference_gain=k0)

        batteries = None
        if cp.has_section("batteries"):
            b = cp["batteries"]
            if "charges_j" in b:
                batteries = tuple(_floats(b["charges_j"]))
            elif "charges_mah" in b:
                batteries = tuple(v * 3.6 * trx.supply_v for v in _floats(b["charges_mah"]))
            elif "preset" in b:
                total = b.getfloat("total_j", 0.0)
                if "total_mah" in b:
                    total = b.getfloat("total_mah") * 3.6 * trx.supply_v
                batteries = battery_presets(b["preset"].strip(), geometry, total)

        cross = None
        if cp.has_section("cross_traffic"):
            vals = _floats(cp["cross_traffic"].get("rate_bits", "0"))
            if len(vals) == 1:
                vals = vals * geometry.n_links
            cross = tuple(vals)

        sid = base_id if len(rows) == 1 else f"{base_id}[{idx}]"
        scenarios.append(Scenario(
            geometry=geometry, service=service, arrival=arrival, noise_w=noise_w,
            transceiver=trx, batteries_j=batteries, cross_traffic=cross, scenario_id=sid,
        ))
    return scenarios


def load_scenarios(path: str, overrides: Optional[dict] = None) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenarios(fh.read(), overrides)


def scenario_to_ini(sc: Scenario) -> str:
    """Serialize one scenario back to INI text (round-trips field-wise)."""
    cp = configparser.ConfigParser()
    cp["scenario"] = {"id": sc.scenario_id or "scenario"}
    g = sc.geometry
    psec = {"pathloss_exponent": repr(g.pathloss_exponent), "reference_gain": repr(g.reference_gain)}
    if g.lengths_m is not None:
        psec["lengths_m"] = " ".join(repr(v) for v in g.lengths_m)
    else:
        psec["gains"] = " ".join(repr(v) for v in g.gains)
    cp["path"] = psec
    if sc.is_whart:
        cp["service"] = {"model": "wirelesshart", "frame_bits": str(sc.service.frame_bits)}
    else:
        cp["service"] = {"model": "shannon", "symbols_per_slot": repr(sc.service.symbols_per_slot)}
    cp["arrival"] = {"rate_bits": repr(sc.arrival.rate_bits),
                     "interval_slots": str(sc.arrival.interval_slots)}
    cp["noise"] = {"noise_w": repr(sc.noise_w)}
    t = sc.transceiver
    cp["transceiver"] = {
        "p_min_w": repr(t.p_min_w),
        "p_max_w": repr(t.p_max_w),
        "idle_current_a": repr(t.i_idle_a),
        "rx_current_a": repr(t.i_rx_a),
        "supply_v": repr(t.supply_v),
        "slot_s": repr(t.t_slot_s),
        "tx_s": repr(t.t_tx_s),
        "ack_s": repr(t.t_ack_s),
        "tx_overhead_w": repr(t.tx_overhead_w),
    }
    if sc.batteries_j is not None:
        cp["batteries"] = {"charges_j": " ".join(repr(v) for v in sc.batteries_j)}
    if sc.cross_traffic is not None:
        cp["cross_traffic"] = {"rate_bits": " ".join(repr(v) for v in sc.cross_traffic)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
