"""Delay-violation kernels of buffered fading links and their cascades.

The kernel K(s, -w) of a stable buffered link upper-bounds the steady-state
probability that the queueing delay exceeds w steps:

    P[W > w] <= inf_{s > 0} K(s, -w),
    K(s, -w) = Mg(1-s)^w / (1 - Ma(1+s) * Mg(1-s)),

where Ma and Mg are the per-increment Mellin transforms of the SNR-domain
arrival and service processes.  A cascade of independent links has a kernel
obtained recursively from its one-link-shorter subpaths; the recursion is
evaluated here with a memoized subpath table, and a direct nested-sum
evaluation is provided as an independent oracle.

All internal arithmetic runs on log-Mellin values so that extreme transform
arguments cannot overflow intermediate factors.
"""

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Sequence, Union

from .mellin import ArrivalModel, ShannonRayleighService, WirelessHartService

__all__ = [
    "InfeasibleError",
    "LinkService",
    "PathModel",
    "KernelEvaluation",
    "CrossTraffic",
    "link_from_shannon",
    "link_from_whart",
    "stability_margin",
    "stability_boundary",
    "kernel_single",
    "kernel_path",
    "kernel_path_bruteforce",
    "violation_bound",
    "delay_bound_for_eps",
    "apply_cross_traffic",
]

# Two service Mellin values closer than this (relative) make the recursion
# coefficients blow up; the later link is nudged by _PERTURB_REL instead.
_DEGENERATE_REL = 1e-9
_PERTURB_REL = 1e-6

# Default cap for the stability boundary when no s breaks stability
# (deterministic drain faster than arrivals).
DEFAULT_S_MAX = 50.0

PickM = Union[None, int, Callable[[int], int]]


class InfeasibleError(RuntimeError):
    """No parameter choice can satisfy the requested stability/QoS condition."""


def _exp_or_inf(logv: float) -> float:
    if logv > 709.0:
        return math.inf
    return math.exp(logv)


@dataclass(frozen=True)
class LinkService:
    """One buffered link: per-increment log-Mellin evaluator plus metadata."""

    label: str
    mean_snr: float
    log_mellin_at: Callable[[float], float]

    def mellin_at(self, u: float) -> float:
        return _exp_or_inf(self.log_mellin_at(u))


@dataclass(frozen=True)
class PathModel:
    """Ordered cascade of links fed by one constant-rate flow."""

    links: tuple
    arrival: ArrivalModel

    def __post_init__(self):
        if len(self.links) < 1:
            raise ValueError("a path needs at least one link")
        object.__setattr__(self, "links", tuple(self.links))

    @property
    def hops(self) -> int:
        return len(self.links)


@dataclass(frozen=True)
class KernelEvaluation:
    s: float
    w: int
    value: float
    stable: bool
    perturbed: bool = False


@dataclass(frozen=True)
class CrossTraffic:
    """Independent constant-rate cross-flow sharing a link, in bits per step."""

    rate_bits: float

    def __post_init__(self):
        if self.rate_bits < 0.0:
            raise ValueError(f"rate_bits must be >= 0, got {self.rate_bits}")


def link_from_shannon(svc: ShannonRayleighService, label: str = "") -> LinkService:
    return LinkService(label=label, mean_snr=svc.mean_snr, log_mellin_at=svc.log_mellin_at)


def link_from_whart(svc: WirelessHartService, mean_snr: float = 1.0, label: str = "") -> LinkService:
    return LinkService(label=label, mean_snr=mean_snr, log_mellin_at=svc.log_mellin_at)


def apply_cross_traffic(link: LinkService, cross: CrossTraffic) -> LinkService:
    """Leftover service of ``link`` once an independent cross-flow is served.

    The per-increment Mellin transform at argument u picks up the factor
    e^(k_c (1 - u)); with k_c = 0 the link is returned unchanged.
    """
    if cross.rate_bits == 0.0:
        return link
    base = link.log_mellin_at
    k_c = cross.rate_bits

    def leftover(u: float) -> float:
        return k_c * (1.0 - u) + base(u)

    return replace(link, label=f"{link.label}+cross", log_mellin_at=leftover)


def _log_margins(path: PathModel, s: float) -> list:
    la = path.arrival.log_mellin_at(1.0 + s)
    return [la + link.log_mellin_at(1.0 - s) for link in path.links]


def stability_margin(path: PathModel, s: float) -> float:
    """max over links of Ma(1+s) * Mg(1-s); the path is stable at s iff < 1."""
    if not (s > 0.0):
        raise ValueError(f"s must be > 0, got {s}")
    return _exp_or_inf(max(_log_margins(path, s)))


def stability_boundary(path: PathModel, s_max: float = DEFAULT_S_MAX, rel_tol: float = 1e-9) -> float:
    """Upper end b of the stability interval (0, b), located by bisection.

    Returns ``s_max`` when the margin never reaches 1 below it (deterministic
    drain faster than the arrivals).  Raises InfeasibleError when no stable s
    exists, i.e. the margin is already >= 1 arbitrarily close to 0.
    """

    def log_margin(s: float) -> float:
        return max(_log_margins(path, s))

    lo = 0.0
    found = False
    for probe in (1e-6, 1e-9, 1e-12):
        if log_margin(probe) < 0.0:
            lo = probe
            found = True
            break
    if not found:
        raise InfeasibleError(
            "stability condition fails for all s > 0 "
            "(mean arrival rate is not below the mean service rate on every link)"
        )

    hi = lo
    while hi < s_max:
        hi = min(2.0 * hi, s_max)
        if log_margin(hi) >= 0.0:
            break
        lo = hi
    if log_margin(hi) < 0.0:
        return s_max

    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if log_margin(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def _resolve_pick_m(pick_m: PickM) -> Callable[[int], int]:
    if pick_m is None:
        return lambda n: n - 1
    if isinstance(pick_m, int):
        fixed = pick_m
        return lambda n: min(fixed, n - 1)
    return pick_m


def _separate_degenerate(logms: list) -> bool:
    """Nudge later links whose Mellin values collide with an earlier one.

    A relative gap below _DEGENERATE_REL between two service transforms makes
    the recursion coefficients 1/(1 - Mi/Mj) explode, so the later value is
    shifted by a relative _PERTURB_REL (continuity bounds the kernel error by
    the same order).  Returns True when any value was adjusted.
    """
    perturbed = False
    for j in range(1, len(logms)):
        guard = 0
        while any(abs(logms[j] - logms[i]) < _DEGENERATE_REL for i in range(j)) and guard < 64:
            logms[j] += _PERTURB_REL
            perturbed = True
            guard += 1
    return perturbed


def _kernel_value_from_logs(la: float, logms: Sequence[float], w: int,
                            pick_m: PickM = None) -> float:
    """Cascade kernel from per-link log-Mellin values (stability assumed)."""
    pick = _resolve_pick_m(pick_m)
    memo = {}

    def single(j: int) -> float:
        rho_log = la + logms[j]
        denom = -math.expm1(rho_log)  # 1 - rho, in (0, 1]
        return _exp_or_inf(w * logms[j] - math.log(denom))

    def rec(key: tuple) -> float:
        if len(key) == 1:
            return single(key[0])
        got = memo.get(key)
        if got is not None:
            return got
        m_pos = pick(len(key))
        if not 1 <= m_pos <= len(key) - 1:
            raise ValueError(f"pick_m returned {m_pos} for a {len(key)}-link subpath")
        last = key[-1]
        m_idx = key[m_pos - 1]
        dm = logms[m_idx] - logms[last]
        coeff_last = 1.0 / (-math.expm1(dm))  # M_N / (M_N - M_m)
        coeff_m = 1.0 - coeff_last            # M_m / (M_m - M_N)
        without_m = key[: m_pos - 1] + key[m_pos:]
        val = coeff_last * rec(without_m) + coeff_m * rec(key[:-1])
        memo[key] = val
        return val

    return rec(tuple(range(len(logms))))


def kernel_single(link: LinkService, arrival: ArrivalModel, s: float, w: int) -> KernelEvaluation:
    """Steady-state kernel Mg(1-s)^w / (1 - Ma(1+s) Mg(1-s)) of one link."""
    if not (s > 0.0):
        raise ValueError(f"s must be > 0, got {s}")
    if w < 0:
        raise ValueError(f"w must be >= 0, got {w}")
    la = arrival.log_mellin_at(1.0 + s)
    logm = link.log_mellin_at(1.0 - s)
    if la + logm >= 0.0:
        return KernelEvaluation(s=s, w=w, value=math.inf, stable=False)
    denom = -math.expm1(la + logm)
    value = _exp_or_inf(w * logm - math.log(denom))
    return KernelEvaluation(s=s, w=w, value=value, stable=True)


def kernel_path(path: PathModel, s: float, w: int, pick_m: PickM = None) -> KernelEvaluation:
    """End-to-end kernel of a cascade, by the memoized subpath recursion.

    Equal service transforms are perturbed apart first (see
    _separate_degenerate); the ``perturbed`` flag on the result records it.
    ``pick_m`` overrides which earlier link is split off at each recursion
    level (1-based, default len-1); any valid choice yields the same value.
    """
    if not (s > 0.0):
        raise ValueError(f"s must be > 0, got {s}")
    if w < 0:
        raise ValueError(f"w must be >= 0, got {w}")
    la = path.arrival.log_mellin_at(1.0 + s)
    logms = [link.log_mellin_at(1.0 - s) for link in path.links]
    if max(la + lm for lm in logms) >= 0.0:
        return KernelEvaluation(s=s, w=w, value=math.inf, stable=False)
    if len(logms) == 1:
        return kernel_single(path.links[0], path.arrival, s, w)
    perturbed = _separate_degenerate(logms)
    value = _kernel_value_from_logs(la, logms, w, pick_m)
    return KernelEvaluation(s=s, w=w, value=value, stable=True, perturbed=perturbed)


def kernel_path_bruteforce(path: PathModel, s: float, w: int, horizon: int) -> float:
    """Direct evaluation of the cascade kernel by truncated nested summation.

    Builds the cascade service transform over interval lengths by the forward
    composition rule f_n(d) = Mg_n * f_n(d-1) + f_(n-1)(d) and sums
    sum_{j=0}^{horizon} Ma(1+s)^j * f_N(j + w).  Serves as the independent
    oracle for kernel_path; emits a precision warning when the truncated tail
    is not negligible.
    """
    if not (s > 0.0):
        raise ValueError(f"s must be > 0, got {s}")
    la = path.arrival.log_mellin_at(1.0 + s)
    logms = [link.log_mellin_at(1.0 - s) for link in path.links]
    if max(la + lm for lm in logms) >= 0.0:
        raise InfeasibleError(f"path is unstable at s={s}; the kernel sum diverges")
    # Rescale every interval length d by max(Mg)^d: the composed transform then
    # grows at most polynomially and the geometric weight becomes rho_max^j < 1,
    # so no intermediate of the sum can over- or underflow.
    log_mmax = max(logms)
    ms = [math.exp(lm - log_mmax) for lm in logms]
    rho_max = math.exp(la + log_mmax)

    length = w + horizon + 1
    f = [1.0] * length
    for d in range(1, length):
        f[d] = f[d - 1] * ms[0]
    for m in ms[1:]:
        prev = 1.0
        for d in range(1, length):
            prev = m * prev + f[d]
            f[d] = prev

    total = 0.0
    rho_pow = 1.0
    term = 0.0
    for j in range(horizon + 1):
        term = rho_pow * f[j + w]
        total += term
        rho_pow *= rho_max
    total *= _exp_or_inf(w * log_mmax)
    term *= _exp_or_inf(w * log_mmax)
    tail = term * rho_max / (1.0 - rho_max)
    if tail > 1e-12 * total:
        warnings.warn(
            f"kernel_path_bruteforce horizon={horizon} leaves a relative tail "
            f"of ~{tail / total:.2e}",
            RuntimeWarning,
            stacklevel=2,
        )
    return total


def violation_bound(path: PathModel, w: int, s_max: float = DEFAULT_S_MAX,
                    delta_min: float = 1e-6) -> tuple:
    """Delay-violation probability bound inf_s K(s, -w) and its minimizer.

    Returns (epsilon, s_star).  Values above 1 are reported as-is (vacuous
    bound); infeasible stability raises InfeasibleError.
    """
    from .optimize import search_s  # deferred: optimize builds on this module

    b = stability_boundary(path, s_max=s_max)
    s_star = search_s(path, w, (0.0, b), delta_min)
    return kernel_path(path, s_star, w).value, s_star


def delay_bound_for_eps(path: PathModel, eps: float, w_max: int = 10_000,
                        s_max: float = DEFAULT_S_MAX, delta_min: float = 1e-6) -> int:
    """Smallest target delay w whose violation bound is at most ``eps``.

    Exponential bracketing followed by binary search over w; the bound is
    monotone non-increasing in w.  Raises InfeasibleError when even
    ``w_max`` cannot meet ``eps``.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must be in (0, 1), got {eps}")

    def bound(w: int) -> float:
        return violation_bound(path, w, s_max=s_max, delta_min=delta_min)[0]

    if bound(0) <= eps:
        return 0
    lo, hi = 0, 1
    while bound(hi) > eps:
        lo = hi
        hi *= 2
        if hi > w_max:
            if bound(w_max) > eps:
                raise InfeasibleError(
                    f"violation bound stays above eps={eps} up to w_max={w_max}"
                )
            hi = w_max
            break
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bound(mid) <= eps:
            hi = mid
        else:
            lo = mid
    return hi
