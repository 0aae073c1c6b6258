"""Monte-Carlo validation of the delay bounds and simulation-based refinement.

A discrete-time simulator of the multi-hop queue (fluid Shannon service or
slotted frame transfer) estimates the end-to-end delay-violation probability
with Wilson confidence intervals.  Two interchangeable engines exist: a
compiled core (hopbound.sim._core, built from Cython) and a pure-Python
fallback (hopbound.sim._pycore).  They are written to produce bit-identical
results; selection happens at import, overridable with the environment
variable HOPBOUND_SIM_BACKEND or per call via SimConfig.backend.

The random streams are counter-based and keyed by (seed, link, step), so a
run is reproducible regardless of engine, link count or evaluation order.
"""

import math
import os
import warnings
from dataclasses import dataclass
from typing import Optional

from ..optimize import BatteryState, PowerAllocation, QoSTarget
from ..scenario import Scenario, battery_durations, power_floors

__all__ = [
    "SimConfig",
    "DelayStats",
    "simulate_path",
    "sim_minimize_power",
    "sim_maximize_lifetime",
    "available_backends",
    "default_backend",
]

_MASK64 = (1 << 64) - 1

_BACKENDS = {}
from . import _pycore  # noqa: E402

_BACKENDS["python"] = _pycore
try:
    from . import _core  # noqa: E402

    _BACKENDS["cython"] = _core
except ImportError:
    _core = None


def available_backends() -> tuple:
    return tuple(sorted(_BACKENDS))


def default_backend() -> str:
    env = os.environ.get("HOPBOUND_SIM_BACKEND", "").strip().lower()
    if env:
        if env not in _BACKENDS:
            raise RuntimeError(
                f"HOPBOUND_SIM_BACKEND={env!r} but only {available_backends()} are available"
            )
        return env
    return "cython" if "cython" in _BACKENDS else "python"


@dataclass(frozen=True)
class SimConfig:
    slots: int = 10_000_000
    seed: int = 1
    warmup_slots: int = 10_000
    scheduling: str = "auto"  # per-slot-all-links | round-robin-superframe | auto
    backend: Optional[str] = None
    backlog_limit_bits: float = 5e7

    def __post_init__(self):
        if self.slots <= self.warmup_slots:
            raise ValueError("slots must exceed warmup_slots")
        if self.scheduling not in ("auto", "per-slot-all-links", "round-robin-superframe"):
            raise ValueError(f"unknown scheduling {self.scheduling!r}")
        if self.backend is not None and self.backend not in _BACKENDS:
            raise ValueError(f"backend {self.backend!r} not available; have {available_backends()}")


def _wilson(k: int, n: int, z: float = 1.959963984540054) -> tuple:
    if n <= 0:
        return 0.0, 0.0, 1.0
    p = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    return p, max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class DelayStats:
    """Empirical delay-violation estimates with 95% Wilson intervals.

    ``unit`` is "slots" (fluid Shannon) or "superframes" (round-robin frame
    mode); all delays and targets are counted in that unit.
    """

    targets: tuple
    estimates: tuple
    ci_low: tuple
    ci_high: tuple
    samples: int
    unit: str
    mean_delay_steps: float
    mean_backlog_bits: float
    mean_bit_delay_steps: float
    diverged: bool
    backend: str
    seed: int

    def violation(self, w: int) -> float:
        return self.estimates[self.targets.index(w)]

    def ci(self, w: int) -> tuple:
        i = self.targets.index(w)
        return self.ci_low[i], self.ci_high[i]

    def as_map(self) -> dict:
        return {
            w: (self.estimates[i], self.ci_low[i], self.ci_high[i], self.samples)
            for i, w in enumerate(self.targets)
        }


def _powers_of(allocation) -> tuple:
    if isinstance(allocation, PowerAllocation):
        return tuple(allocation.powers_w)
    return tuple(float(p) for p in allocation)


def simulate_path(scenario: Scenario, allocation, targets, cfg: Optional[SimConfig] = None) -> DelayStats:
    """Simulate the multi-hop queue and estimate P[delay > w] for each target.

    ``allocation`` is a PowerAllocation or a plain per-node power sequence.
    Shannon scenarios run per-slot fluid service on every link; WirelessHART
    scenarios run one round-robin superframe of n_links slots per step and
    report delays in superframes (cfg.slots still counts slots).  Per-slot
    frame successes are drawn at the instantaneous fading SNR.
    """
    cfg = cfg or SimConfig()
    if scenario.cross_traffic is not None and any(c > 0 for c in scenario.cross_traffic):
        raise ValueError("cross-traffic is handled analytically (leftover service), not simulated")
    powers = _powers_of(allocation)
    gbars = scenario.mean_snrs(powers)
    targets = tuple(int(w) for w in targets)
    if any(w < 0 for w in targets):
        raise ValueError("delay targets must be >= 0")
    backend = cfg.backend or default_backend()
    engine = _BACKENDS[backend]
    seed = cfg.seed & _MASK64

    whart = scenario.is_whart
    if cfg.scheduling == "per-slot-all-links" and whart:
        raise ValueError("WirelessHART scenarios require round-robin-superframe scheduling")
    if cfg.scheduling == "round-robin-superframe" and not whart:
        raise ValueError("round-robin-superframe scheduling requires a WirelessHART scenario")

    if whart:
        steps = cfg.slots // scenario.n_links
        warmup = max(1, cfg.warmup_slots // scenario.n_links)
        unit = "superframes"
        if scenario.arrival.interval_slots != 1:
            raise ValueError("WirelessHART arrivals are per superframe (interval_slots must be 1)")
    else:
        steps = cfg.slots
        warmup = max(1, cfg.warmup_slots)
        unit = "slots"

    tail = max(256, 2 * max(targets, default=0) + 64)
    if steps <= warmup + tail + 16:
        raise ValueError(
            f"simulation too short: {steps} steps for warmup={warmup} and tail={tail}"
        )

    rate = scenario.arrival.rate_bits
    if whart:
        hist, samples, wsum, backlog_sum, gap_sum, diverged, steps_run = engine.run_whart(
            seed, list(gbars), scenario.service.frame_bits, rate,
            steps, warmup, tail, cfg.backlog_limit_bits,
        )
    else:
        cnat = scenario.service.symbols_per_slot / math.log(2.0)
        hist, samples, wsum, backlog_sum, gap_sum, diverged, steps_run = engine.run_fluid(
            seed, list(gbars), cnat, rate, scenario.arrival.interval_slots,
            steps, warmup, tail, cfg.backlog_limit_bits,
        )

    if diverged:
        warnings.warn(
            "queue backlog exceeded the divergence threshold; the configuration is "
            "unstable and the returned statistics are partial",
            RuntimeWarning,
            stacklevel=2,
        )

    # suffix sums of the histogram give the violation counts per target
    suffix = [0] * (len(hist) + 1)
    for v in range(len(hist) - 1, -1, -1):
        suffix[v] = suffix[v + 1] + hist[v]
    estimates, lows, highs = [], [], []
    for w in targets:
        k = suffix[w + 1] if w + 1 < len(suffix) else 0
        p, lo, hi = _wilson(k, samples)
        estimates.append(p)
        lows.append(lo)
        highs.append(hi)

    sample_end = steps - tail
    nb = max(0, min(sample_end, steps_run) - warmup)
    lam = rate / (scenario.arrival.interval_slots if not whart else 1)
    mean_backlog = backlog_sum / nb if nb else 0.0
    mean_bit_delay = (gap_sum / nb) / lam if nb and lam > 0 else 0.0
    return DelayStats(
        targets=targets,
        estimates=tuple(estimates),
        ci_low=tuple(lows),
        ci_high=tuple(highs),
        samples=samples,
        unit=unit,
        mean_delay_steps=(wsum / samples) if samples else 0.0,
        mean_backlog_bits=mean_backlog,
        mean_bit_delay_steps=mean_bit_delay,
        diverged=diverged,
        backend=backend,
        seed=seed,
    )


def _noise_warning(eps_hat: float, target_eps: float, ci: tuple, tol: float) -> None:
    half = 0.5 * (ci[1] - ci[0])
    if half > tol:
        warnings.warn(
            f"simulation noise (CI halfwidth {half:.2e}) exceeds the eps tolerance "
            f"{tol:.2e}; achieved {eps_hat:.3e} against target {target_eps:.3e}",
            RuntimeWarning,
            stacklevel=3,
        )


def sim_minimize_power(scenario: Scenario, qos: QoSTarget, start: PowerAllocation,
                       cfg: Optional[SimConfig] = None, delta_p_init_w: float = 1e-5,
                       max_halvings: int = 15, max_iterations: int = 10_000) -> PowerAllocation:
    """Refine a bound-based allocation against the simulated violation probability.

    Same greedy descent as the bound-based scheme, but the constraint check is
    the simulated P[delay > target] under common random numbers (one fixed
    seed for every evaluation).  The step starts at 0.01 mW and halves at most
    ``max_halvings`` times when the chosen reduction violates the target.
    Only accepting steps can occur, so the returned total never exceeds the
    starting total.
    """
    cfg = cfg or SimConfig(slots=1_000_000)
    floors = tuple(min(f, max(start.powers_w)) for f in power_floors(scenario))
    w = qos.target_delay

    def sim_eps(powers) -> tuple:
        st = simulate_path(scenario, powers, (w,), cfg)
        return st.violation(w), st

    powers = list(start.powers_w)
    eps_hat, stats = sim_eps(powers)
    if eps_hat > qos.target_eps:
        _noise_warning(eps_hat, qos.target_eps, stats.ci(w), qos.eps_tolerance)
        return PowerAllocation(powers_w=tuple(powers), achieved_eps=eps_hat, s_star=math.nan,
                               converged=False, iterations=0,
                               note="starting allocation violates the target in simulation")

    dp = delta_p_init_w
    halvings = 0
    iterations = 0
    note = ""
    while iterations < max_iterations:
        iterations += 1
        best = None
        for i in range(len(powers)):
            candidate = max(powers[i] - dp, floors[i])
            step = powers[i] - candidate
            if step <= 0.0:
                continue
            trial = list(powers)
            trial[i] = candidate
            eps_i, _ = sim_eps(trial)
            grad = abs(eps_hat - eps_i) / step
            if best is None or grad < best[0]:
                best = (grad, i, trial, eps_i)
        if best is None:
            note = "all links at minimum power"
            break
        if best[3] <= qos.target_eps:
            powers = best[2]
            eps_hat = best[3]
        else:
            halvings += 1
            if halvings > max_halvings:
                note = f"power step halved {max_halvings} times"
                break
            dp *= 0.5
    else:
        note = "iteration cap exceeded"

    _, stats = sim_eps(powers)
    _noise_warning(eps_hat, qos.target_eps, stats.ci(w), qos.eps_tolerance)
    return PowerAllocation(powers_w=tuple(powers), achieved_eps=eps_hat, s_star=math.nan,
                           converged=True, iterations=iterations, note=note)


def sim_maximize_lifetime(scenario: Scenario, batteries: BatteryState, qos: QoSTarget,
                          start: PowerAllocation, cfg: Optional[SimConfig] = None,
                          delta_p_init_w: float = 1e-5, max_halvings: int = 15,
                          max_iterations: int = 10_000,
                          simplified_battery: bool = False) -> tuple:
    """Simulation-based network lifetime refinement from a bound-based start.

    Each step lowers the power of the node(s) with the least remaining battery
    duration, keeping the simulated violation probability at or below the
    target.  Returns (PowerAllocation, minimal battery duration in
    superframes).
    """
    cfg = cfg or SimConfig(slots=1_000_000)
    charges = tuple(batteries.charges_j)
    floors = tuple(min(f, max(start.powers_w)) for f in power_floors(scenario))
    w = qos.target_delay

    def sim_eps(powers) -> tuple:
        st = simulate_path(scenario, powers, (w,), cfg)
        return st.violation(w), st

    def thetas(powers) -> tuple:
        return battery_durations(scenario, powers, charges, simplified=simplified_battery)

    powers = list(start.powers_w)
    eps_hat, stats = sim_eps(powers)
    if eps_hat > qos.target_eps:
        _noise_warning(eps_hat, qos.target_eps, stats.ci(w), qos.eps_tolerance)
        alloc = PowerAllocation(powers_w=tuple(powers), achieved_eps=eps_hat, s_star=math.nan,
                                converged=False, iterations=0,
                                note="starting allocation violates the target in simulation")
        return alloc, min(thetas(powers))

    dp = delta_p_init_w
    halvings = 0
    iterations = 0
    note = ""
    while iterations < max_iterations:
        iterations += 1
        th = thetas(powers)
        th_min = min(th)
        group = [i for i, v in enumerate(th)
                 if v <= th_min * (1.0 + 1e-12) and powers[i] > floors[i] * (1.0 + 1e-12)]
        if not group:
            note = "battery-critical links at minimum power"
            break
        step = dp / len(group)
        trial = list(powers)
        for i in group:
            trial[i] = max(powers[i] - step, floors[i])
        eps_t, _ = sim_eps(trial)
        if eps_t <= qos.target_eps:
            powers = trial
            eps_hat = eps_t
        else:
            halvings += 1
            if halvings > max_halvings:
                note = f"power step halved {max_halvings} times"
                break
            dp *= 0.5
    else:
        note = "iteration cap exceeded"

    _, stats = sim_eps(powers)
    _noise_warning(eps_hat, qos.target_eps, stats.ci(w), qos.eps_tolerance)
    alloc = PowerAllocation(powers_w=tuple(powers), achieved_eps=eps_hat, s_star=math.nan,
                            converged=True, iterations=iterations, note=note)
    return alloc, min(thetas(powers))
