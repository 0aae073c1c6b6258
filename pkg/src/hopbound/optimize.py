"""Bound-driven transmit-power allocation.

Three schemes over one evaluation primitive (the end-to-end delay-violation
bound of hopbound.kernel):

* minimize_power: greedy per-link descent from maximum power, picking at each
  step the link whose reduction degrades the bound least, with step halving
  on overshoot.
* maximize_lifetime: same descent, but the reduced links are those with the
  currently shortest battery duration.
* uniform baselines: fixed maximum power (QoS-agnostic) and the largest
  uniform reduction that still meets the target (QoS-aware).

All schemes keep the bound at or below the target at every accepted step and
stop once the achieved bound sits inside (eps - eps_tolerance, eps), no link
can move, or the iteration cap hits.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .kernel import (
    DEFAULT_S_MAX,
    InfeasibleError,
    PathModel,
    kernel_path,
    stability_boundary,
)
from .scenario import Scenario, battery_durations, min_feasible_power, power_floors

__all__ = [
    "QoSTarget",
    "OptimizerConfig",
    "PowerAllocation",
    "BatteryState",
    "minimize_convex",
    "search_s",
    "minimize_power",
    "maximize_lifetime",
    "qos_agnostic_baseline",
    "qos_aware_baseline",
    "path_norm",
    "min_feasible_power",
]


@dataclass(frozen=True)
class QoSTarget:
    """Target delay (steps) violated with probability at most target_eps."""

    target_delay: int
    target_eps: float
    eps_tolerance: float = 0.0  # 0 picks the default of target_eps / 10

    def __post_init__(self):
        if self.target_delay < 1:
            raise ValueError(f"target_delay must be >= 1, got {self.target_delay}")
        if not 0.0 < self.target_eps < 1.0:
            raise ValueError(f"target_eps must be in (0, 1), got {self.target_eps}")
        if self.eps_tolerance == 0.0:
            object.__setattr__(self, "eps_tolerance", self.target_eps / 10.0)
        if not 0.0 < self.eps_tolerance < self.target_eps:
            raise ValueError("eps_tolerance must lie in (0, target_eps)")


@dataclass(frozen=True)
class OptimizerConfig:
    p_max_w: Optional[float] = None      # None: use the transceiver maximum
    delta_p_init_w: float = 1e-4
    delta_p_min_w: float = 1e-9
    s_interval_min: float = 1e-6
    max_iterations: int = 10_000
    s_max: float = DEFAULT_S_MAX
    simplified_battery: bool = False     # theta = B / (p T) instead of the energy model

    def __post_init__(self):
        if not 0.0 < self.delta_p_min_w <= self.delta_p_init_w:
            raise ValueError("need 0 < delta_p_min_w <= delta_p_init_w")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass(frozen=True)
class PowerAllocation:
    powers_w: tuple
    achieved_eps: float
    s_star: float
    converged: bool
    iterations: int
    feasible: bool = True
    note: str = ""

    @property
    def total_w(self) -> float:
        return sum(self.powers_w)


@dataclass(frozen=True)
class BatteryState:
    charges_j: tuple
    durations: tuple

    @property
    def min_duration(self) -> float:
        return min(self.durations)


def path_norm(lengths) -> float:
    """Heterogeneity measure of a path: sum of pairwise length differences."""
    ls = list(lengths)
    return sum(abs(ls[i] - ls[j]) for i in range(len(ls)) for j in range(i + 1, len(ls)))


def minimize_convex(f: Callable[[float], float], lo: float, hi: float,
                    delta_min: float, max_levels: int = 200) -> float:
    """Minimizer of a convex scalar function by five-point interval splitting.

    The interval is cut at its quarter points l, m, r; the sampled gradients
    decide whether the minimum lies in (lo, m), (m, hi) or (l, r), and the
    search recurses until the quarter width drops to delta_min, returning the
    final midpoint.  Evaluations are cached across levels (children reuse the
    parent's grid points).
    """
    if not hi > lo:
        raise ValueError(f"empty interval ({lo}, {hi})")
    cache: dict = {}

    def ev(x: float) -> float:
        v = cache.get(x)
        if v is None:
            v = f(x)
            cache[x] = v
        return v

    a, b = lo, hi
    for _ in range(max_levels):
        quarter = 0.25 * (b - a)
        l, m, r = a + quarter, a + 2.0 * quarter, a + 3.0 * quarter
        if quarter <= delta_min:
            return m
        fa, fl, fm, fr, fb = ev(a), ev(l), ev(m), ev(r), ev(b)
        if math.isinf(fl) and math.isinf(fm) and math.isinf(fr):
            raise InfeasibleError("objective is infinite across the search interval")
        if fb > fr > fm > fl:
            b = m
        elif fa > fl > fm > fr:
            a = m
        elif fb > fr > fm and fa > fl > fm:
            a, b = l, r
        else:
            # Plateaus or exact ties: bracket the best interior sample.
            best = min((fm, m), (fl, l), (fr, r))[1]
            if best == l:
                b = m
            elif best == r:
                a = m
            else:
                a, b = l, r
    return 0.5 * (a + b)


def search_s(path: PathModel, w: int, interval: tuple, delta_min: float) -> float:
    """Transform argument s minimizing the path kernel over (interval)."""
    lo, hi = interval
    if not (hi > lo >= 0.0):
        raise InfeasibleError(f"empty stability interval ({lo}, {hi})")

    def f(s: float) -> float:
        if s <= lo or s >= hi:
            return math.inf
        ev = kernel_path(path, s, w)
        return ev.value if ev.stable else math.inf

    return minimize_convex(f, lo, hi, delta_min)


def _bound_evaluator(scenario: Scenario, qos: QoSTarget, cfg: OptimizerConfig):
    """Returns powers -> (achieved bound, minimizing s); (inf, nan) if unstable."""

    def evaluate(powers) -> tuple:
        path = scenario.path_for_powers(powers)
        try:
            b = stability_boundary(path, s_max=cfg.s_max)
            s_star = search_s(path, qos.target_delay, (0.0, b), cfg.s_interval_min)
        except InfeasibleError:
            return math.inf, math.nan
        return kernel_path(path, s_star, qos.target_delay).value, s_star

    return evaluate


def _fail_allocation(powers, eps_hat: float, s_star: float, note: str) -> PowerAllocation:
    return PowerAllocation(powers_w=tuple(powers), achieved_eps=eps_hat, s_star=s_star,
                           converged=False, iterations=0, feasible=False, note=note)


def _descend(scenario: Scenario, qos: QoSTarget, cfg: OptimizerConfig,
             select: Callable) -> PowerAllocation:
    """Shared greedy descent: ``select(powers, dp, eps_hat, s_star, floors)``
    returns the candidate power vector for the next step or None."""
    evaluate = _bound_evaluator(scenario, qos, cfg)
    p_max = cfg.p_max_w if cfg.p_max_w is not None else scenario.transceiver.p_max_w
    floors = tuple(min(f, p_max) for f in power_floors(scenario))
    powers = [p_max] * scenario.n_links

    eps_hat, s_star = evaluate(powers)
    if eps_hat > qos.target_eps:
        return _fail_allocation(powers, eps_hat, s_star,
                                "target violation probability unreachable at maximum power")

    window_lo = qos.target_eps - qos.eps_tolerance
    dp = cfg.delta_p_init_w
    converged = False
    note = ""
    iterations = 0
    while iterations < cfg.max_iterations:
        if window_lo < eps_hat < qos.target_eps:
            converged = True
            break
        trial = select(powers, dp, eps_hat, s_star, floors)
        if trial is None:
            if all(p <= f * (1.0 + 1e-12) for p, f in zip(powers, floors)):
                note = "all links at minimum power"
                converged = window_lo < eps_hat < qos.target_eps
                break
            # every candidate step overshoots into instability: refine the step
            if dp * 0.5 >= cfg.delta_p_min_w:
                dp *= 0.5
                iterations += 1
                continue
            note = "power step floor reached"
            converged = window_lo < eps_hat < qos.target_eps
            break
        iterations += 1
        eps_trial, s_trial = evaluate(trial)
        if eps_trial > qos.target_eps:
            # overshoot: keep the last feasible allocation, refine the step
            if dp * 0.5 >= cfg.delta_p_min_w:
                dp *= 0.5
                continue
            converged = window_lo < eps_hat < qos.target_eps
            note = "power step floor reached"
            break
        powers = trial
        eps_hat, s_star = eps_trial, s_trial
    else:
        note = "iteration cap exceeded"

    return PowerAllocation(powers_w=tuple(powers), achieved_eps=eps_hat, s_star=s_star,
                           converged=converged, iterations=iterations, note=note)


def minimize_power(scenario: Scenario, qos: QoSTarget,
                   cfg: Optional[OptimizerConfig] = None) -> PowerAllocation:
    """Greedy bound-based minimization of the total transmit power.

    Starts every node at maximum power and repeatedly lowers the link whose
    power reduction raises the end-to-end bound the least (smallest absolute
    kernel gradient at the current s, ties to the lowest index).  A step that
    would push the bound past the target is rolled back and the step size
    halves, down to delta_p_min_w.
    """
    cfg = cfg or OptimizerConfig()
    return _descend(scenario, qos, cfg, _gradient_selector(scenario, qos))


def _gradient_selector(scenario: Scenario, qos: QoSTarget):
    def select(powers, dp, eps_hat, s_star, floors):
        if math.isnan(s_star):
            return None
        best_idx = -1
        best_grad = math.inf
        for i, p in enumerate(powers):
            candidate = max(p - dp, floors[i])
            step = p - candidate
            if step <= 0.0:
                continue
            probe = list(powers)
            probe[i] = candidate
            value = kernel_path(scenario.path_for_powers(probe), s_star,
                                qos.target_delay).value
            grad = abs(value - eps_hat) / step
            if grad < best_grad:
                best_grad, best_idx = grad, i
        if best_idx < 0:
            return None
        trial = list(powers)
        trial[best_idx] = max(powers[best_idx] - dp, floors[best_idx])
        return trial

    return select


def maximize_lifetime(scenario: Scenario, batteries: BatteryState, qos: QoSTarget,
                      cfg: Optional[OptimizerConfig] = None) -> tuple:
    """Bound-based network lifetime maximization.

    Same descent as minimize_power, but each step lowers the transmit power
    of the node(s) whose battery would currently deplete first, splitting the
    step evenly across ties.  Battery durations are recomputed from the
    transceiver energy model after every accepted step.  Returns the final
    allocation together with the refreshed BatteryState.
    """
    cfg = cfg or OptimizerConfig()
    charges = tuple(batteries.charges_j)
    if len(charges) != scenario.n_links:
        raise ValueError("battery vector length must match transmitter count")

    def select(powers, dp, eps_hat, s_star, floors):
        thetas = battery_durations(scenario, powers, charges,
                                   simplified=cfg.simplified_battery)
        theta_min = min(thetas)
        group = [i for i, th in enumerate(thetas)
                 if th <= theta_min * (1.0 + 1e-12) and powers[i] > floors[i] * (1.0 + 1e-12)]
        if not group:
            return None
        step = dp / len(group)
        trial = list(powers)
        for i in group:
            trial[i] = max(powers[i] - step, floors[i])
        if all(trial[i] >= powers[i] for i in group):
            return None
        return trial

    allocation = _descend(scenario, qos, cfg, select)
    final = BatteryState(
        charges_j=charges,
        durations=battery_durations(scenario, allocation.powers_w, charges,
                                    simplified=cfg.simplified_battery),
    )
    return allocation, final


def qos_agnostic_baseline(scenario: Scenario, qos: Optional[QoSTarget] = None,
                          cfg: Optional[OptimizerConfig] = None) -> PowerAllocation:
    """Uniform maximum power on every node, with its resulting bound."""
    cfg = cfg or OptimizerConfig()
    p_max = cfg.p_max_w if cfg.p_max_w is not None else scenario.transceiver.p_max_w
    powers = [p_max] * scenario.n_links
    if qos is not None:
        eps_hat, s_star = _bound_evaluator(scenario, qos, cfg)(powers)
    else:
        eps_hat, s_star = math.nan, math.nan
    return PowerAllocation(powers_w=tuple(powers), achieved_eps=eps_hat, s_star=s_star,
                           converged=True, iterations=0, note="qos-agnostic baseline")


def qos_aware_baseline(scenario: Scenario, qos: QoSTarget,
                       cfg: Optional[OptimizerConfig] = None) -> PowerAllocation:
    """Largest uniform power reduction that still meets the target bound.

    Every node shares one power value, lowered from the maximum in steps of
    delta_p_init_w with halving on overshoot, exactly like the per-link
    scheme but locked to uniform allocations.
    """
    cfg = cfg or OptimizerConfig()
    p_max = cfg.p_max_w if cfg.p_max_w is not None else scenario.transceiver.p_max_w
    floor = min(max(power_floors(scenario)), p_max)

    def select(powers, dp, eps_hat, s_star, floors):
        u = powers[0]
        if u <= floor * (1.0 + 1e-12):
            return None
        u_new = max(u - dp, floor)
        return [u_new] * len(powers)

    result = _descend(scenario, qos, cfg, select)
    if result.feasible:
        result = PowerAllocation(powers_w=result.powers_w, achieved_eps=result.achieved_eps,
                                 s_star=result.s_star, converged=result.converged,
                                 iterations=result.iterations,
                                 note=(result.note + " (uniform)").strip())
    return result
