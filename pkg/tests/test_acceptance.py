"""Acceptance suite: one test per release criterion, at its stated tolerance.

Each criterion prints one “[acceptance] … PASS/FAIL” line (run with -s to see
them all); the stated wall-clock budget is asserted together with the
numerical tolerances.
"""

import contextlib
import itertools
import math
import random
import time

import numpy as np
import pytest

from helpers import bruteforce_horizon, random_stable_path, snr_scenario
from hopbound.kernel import (
    InfeasibleError,
    PathModel,
    kernel_path,
    kernel_path_bruteforce,
    link_from_whart,
    stability_boundary,
    violation_bound,
)
from hopbound.mellin import ArrivalModel, ShannonRayleighService, WirelessHartService
from hopbound.optimize import (
    BatteryState,
    QoSTarget,
    maximize_lifetime,
    minimize_power,
    path_norm,
    qos_agnostic_baseline,
    qos_aware_baseline,
)
from hopbound.scenario import (
    PathGeometry,
    Scenario,
    ShannonCapacity,
    WirelessHartFrames,
    battery_durations,
    battery_presets,
)
from hopbound.sim import SimConfig, sim_maximize_lifetime, sim_minimize_power, simulate_path
from hopbound.special import upper_incomplete_gamma

TABLE1 = [
    ((20.0, 19.0, 21.0), 4.0),
    ((20.0, 30.0, 10.0), 40.0),
    ((5.0, 28.0, 27.0), 46.0),
    ((20.0, 35.0, 5.0), 60.0),
    ((5.0, 40.0, 15.0), 70.0),
    ((5.0, 50.5, 4.5), 92.0),
]


@contextlib.contextmanager
def criterion(num: int, name: str, limit_s: float):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[acceptance] criterion {num} ({name}): FAIL "
              f"after {time.perf_counter() - t0:.1f}s")
        raise
    elapsed = time.perf_counter() - t0
    print(f"[acceptance] criterion {num} ({name}): PASS "
          f"({elapsed:.1f}s of {limit_s:.0f}s budget)")
    assert elapsed < limit_s, f"criterion {num} exceeded its {limit_s}s budget"


def shannon_scenario(lengths) -> Scenario:
    return Scenario(geometry=PathGeometry(lengths_m=lengths),
                    service=ShannonCapacity(20.0), arrival=ArrivalModel(rate_bits=20.0))


def whart_scenario(lengths, batteries) -> Scenario:
    return Scenario(geometry=PathGeometry(lengths_m=lengths),
                    service=WirelessHartFrames(1016), arrival=ArrivalModel(rate_bits=80.0),
                    batteries_j=batteries)


def test_criterion_1_mellin_identities():
    with criterion(1, "Mellin identities", 1.0):
        arr = ArrivalModel(rate_bits=23.7)
        wh = WirelessHartService(frame_bits=1016, success_prob=0.61)
        for mean in (0.3, 3.1622776601683795, 42.0):
            sh = ShannonRayleighService(mean_snr=mean, symbols_per_slot=17.0)
            assert abs(sh.mellin_at(1.0) - 1.0) <= 1e-10
            unit = ShannonRayleighService(mean_snr=mean, symbols_per_slot=math.log(2.0))
            assert abs(unit.mellin_at(2.0) - (1.0 + mean)) <= 1e-10 * (1.0 + mean)
        assert abs(arr.mellin_at(1.0) - 1.0) <= 1e-10
        assert abs(wh.mellin_at(1.0) - 1.0) <= 1e-10


def test_criterion_2_gamma_vs_quadrature():
    from test_special import gamma_quad_oracle

    with criterion(2, "incomplete gamma vs quadrature", 10.0):
        rng = random.Random(20240802)
        for _ in range(200):
            a = rng.uniform(-3.0, 5.0)
            x = rng.uniform(1e-6, 20.0)
            ref = gamma_quad_oracle(a, x)
            assert abs(upper_incomplete_gamma(a, x) - ref) <= 1e-9 * abs(ref), (a, x)


def test_criterion_3_recursion_correctness():
    with criterion(3, "cascade recursion vs nested-sum oracle", 30.0):
        # worked two-hop value
        from test_kernel import ARR_12
        from helpers import const_link

        path = PathModel(links=(const_link(0.8), const_link(0.6)), arrival=ARR_12)
        assert kernel_path(path, 1.0, 2).value == pytest.approx(60.1428571429, rel=1e-9)

        rng = random.Random(31337)
        for n_links in (2, 3):
            for _ in range(50):
                p, s, _b = random_stable_path(rng, n_links)
                w = rng.randint(0, 10)
                ref = kernel_path_bruteforce(p, s, w, bruteforce_horizon(p, s))
                assert kernel_path(p, s, w).value == pytest.approx(ref, rel=1e-8)

        for _ in range(10):
            p, s, _b = random_stable_path(rng, 3)
            w = rng.randint(0, 8)
            base = kernel_path(p, s, w, pick_m=lambda n: n - 1).value
            assert kernel_path(p, s, w, pick_m=lambda n: 1).value == pytest.approx(base, rel=1e-10)
            for perm in itertools.permutations(p.links):
                v = kernel_path(PathModel(links=perm, arrival=p.arrival), s, w).value
                assert v == pytest.approx(base, rel=1e-10)


def _random_whart_path(rng):
    while True:
        n = rng.choice([1, 2, 3])
        qs = [rng.uniform(0.2, 0.99) for _ in range(n)]
        links = tuple(link_from_whart(WirelessHartService(1016, q), 1.0) for q in qs)
        rate = rng.uniform(0.1, 0.6) * 1016.0 * min(qs)
        p = PathModel(links=links, arrival=ArrivalModel(rate_bits=rate))
        try:
            b = stability_boundary(p)
        except InfeasibleError:
            continue
        return p, b


def test_criterion_4_convexity():
    with criterion(4, "kernel convexity in s", 30.0):
        rng = random.Random(4004)
        instances = []
        for _ in range(20):
            p, _s, b = random_stable_path(rng, rng.choice([1, 2, 3]))
            instances.append((p, b))
        for _ in range(20):
            instances.append(_random_whart_path(rng))
        for p, b in instances:
            w = rng.randint(1, 10)
            grid = [b * i / 101.0 for i in range(1, 101)]
            vals = [kernel_path(p, s, w).value for s in grid]
            for i in range(1, 99):
                trip = vals[i - 1:i + 2]
                if all(math.isfinite(v) for v in trip):
                    assert trip[0] - 2.0 * trip[1] + trip[2] >= -1e-9 * abs(trip[1])


def test_criterion_5_bound_dominance_and_decay():
    with criterion(5, "simulation dominance and decay match", 600.0):
        ws = list(range(2, 13))
        for snrs in ([5.0], [15.0, 20.0, 5.0]):
            sc = snr_scenario(snrs, rate_bits=20.0, c_sym=20.0)
            powers = [sc.transceiver.p_max_w] * len(snrs)
            path = sc.path_for_powers(powers)
            bounds = [violation_bound(path, w)[0] for w in ws]
            assert all(a > b for a, b in zip(bounds, bounds[1:]))  # monotone in w
            stats = simulate_path(sc, powers, ws, SimConfig(slots=10_000_000, seed=42))
            for i, w in enumerate(ws):
                est, hi = stats.estimates[i], stats.ci_high[i]
                count = round(est * stats.samples)
                assert est <= bounds[i], (snrs, w)
                if count > 0:
                    assert hi <= bounds[i], (snrs, w)
            slope_bound = np.polyfit(ws, np.log(bounds), 1)[0]
            pts = [(w, e) for w, e in zip(ws, stats.estimates) if e * stats.samples >= 30]
            assert len(pts) >= 4
            slope_emp = np.polyfit([v[0] for v in pts], np.log([v[1] for v in pts]), 1)[0]
            assert abs(slope_emp - slope_bound) <= 0.15 * abs(slope_bound), snrs


def test_criterion_6_agnostic_baseline_identity():
    with criterion(6, "uniform maximum-power total", 1.0):
        sc = shannon_scenario((20.0, 19.0, 21.0))
        agn = qos_agnostic_baseline(sc)
        assert agn.total_w * 1e3 == pytest.approx(7.5357, rel=1e-3)


def test_criterion_7_optimizer_contracts():
    with criterion(7, "power-minimization contracts on all paths", 300.0):
        eps = 1e-3
        for lengths, _norm in TABLE1:
            sc = shannon_scenario(lengths)
            savings = []
            for w in (5, 10, 20):
                qos = QoSTarget(target_delay=w, target_eps=eps)
                alloc = minimize_power(sc, qos)
                aware = qos_aware_baseline(sc, qos)
                agnostic = qos_agnostic_baseline(sc, qos)
                if not alloc.feasible:
                    # explicit failure is allowed; baselines must agree it is hard
                    assert not alloc.converged
                    assert alloc.total_w == pytest.approx(agnostic.total_w, rel=1e-12)
                    continue
                assert alloc.converged, (lengths, w, alloc.note)
                assert qos.target_eps - qos.eps_tolerance < alloc.achieved_eps < qos.target_eps
                check, _ = violation_bound(sc.path_for_powers(alloc.powers_w), w)
                assert check <= eps
                assert alloc.total_w <= aware.total_w * (1.0 + 1e-12)
                assert aware.total_w <= agnostic.total_w * (1.0 + 1e-12)
                saving = 1.0 - alloc.total_w / agnostic.total_w
                assert saving > 0.0
                savings.append((w, saving))
            for (w1, s1), (w2, s2) in zip(savings, savings[1:]):
                assert s2 >= s1 - 1e-12, (lengths, w1, w2)


def test_criterion_8_path_norms_exact():
    with criterion(8, "path heterogeneity norms", 1.0):
        for lengths, norm in TABLE1:
            assert path_norm(lengths) == norm


def _lifetime_extension(sc: Scenario, qos: QoSTarget) -> float:
    alloc, state = maximize_lifetime(sc, BatteryState(sc.batteries_j, ()), qos)
    agn = min(battery_durations(sc, [sc.transceiver.p_max_w] * sc.n_links, sc.batteries_j))
    assert alloc.achieved_eps <= qos.target_eps
    return 100.0 * (state.min_duration / agn - 1.0)


def test_criterion_9_lifetime_trends():
    with criterion(9, "lifetime extension orderings", 600.0):
        qos = QoSTarget(target_delay=10, target_eps=1e-3)
        total_j = 3 * 7200.0

        equal_ext = []
        for lengths, norm in TABLE1:
            geo = PathGeometry(lengths_m=lengths)
            sc = whart_scenario(lengths, battery_presets("equal", geo, total_j))
            equal_ext.append((norm, _lifetime_extension(sc, qos)))
        # equal charges: extension falls with heterogeneity, strictly at the ends
        exts = [e for _n, e in equal_ext]
        assert all(a >= b - 1e-9 for a, b in zip(exts, exts[1:])), equal_ext
        assert exts[0] > exts[-1]

        prop_ext = {}
        for lengths, norm in (TABLE1[0], TABLE1[-1]):
            geo = PathGeometry(lengths_m=lengths)
            sc = whart_scenario(lengths, battery_presets("proportional", geo, total_j))
            prop_ext[norm] = _lifetime_extension(sc, qos)
        # proportional charges reverse the ordering of the extreme paths
        assert prop_ext[92.0] > prop_ext[4.0], prop_ext


def test_criterion_10_simulation_vs_bound_gap():
    with criterion(10, "simulation-based refinement gaps", 1800.0):
        sim_cfg = SimConfig(slots=1_000_000, warmup_slots=10_000, seed=2718)

        # total-power refinement never exceeds the bound-based total
        for lengths in ((20.0, 19.0, 21.0), (5.0, 40.0, 15.0)):
            sc = Scenario(geometry=PathGeometry(lengths_m=lengths),
                          service=ShannonCapacity(20.0), arrival=ArrivalModel(rate_bits=30.0))
            qos = QoSTarget(target_delay=10, target_eps=1e-3)
            start = minimize_power(sc, qos)
            assert start.feasible, lengths
            import warnings as _w

            with _w.catch_warnings():
                _w.simplefilter("ignore", RuntimeWarning)
                refined = sim_minimize_power(sc, qos, start, sim_cfg)
            assert refined.total_w <= start.total_w * (1.0 + 1e-12), lengths
            assert refined.achieved_eps <= qos.target_eps

        # lifetime refinement only improves the minimal duration, and by little
        qos = QoSTarget(target_delay=10, target_eps=1e-3)
        for lengths in ((20.0, 19.0, 21.0), (20.0, 35.0, 5.0)):
            geo = PathGeometry(lengths_m=lengths)
            sc = whart_scenario(lengths, battery_presets("equal", geo, 3 * 7200.0))
            start, state = maximize_lifetime(sc, BatteryState(sc.batteries_j, ()), qos)
            import warnings as _w

            with _w.catch_warnings():
                _w.simplefilter("ignore", RuntimeWarning)
                refined, theta = sim_maximize_lifetime(
                    sc, BatteryState(sc.batteries_j, ()), qos, start, sim_cfg)
            assert theta >= state.min_duration * (1.0 - 1e-12), lengths
            gain = theta / state.min_duration - 1.0
            assert gain <= 0.15, (lengths, gain)
            assert refined.achieved_eps <= qos.target_eps


def test_criterion_11_csv_determinism(tmp_path, capsys):
    from hopbound.cli import main as cli_main

    with criterion(11, "byte-identical CSV for fixed seed", 120.0):
        scen = str(tmp_path / "sc.ini")
        with open(scen, "w") as fh:
            fh.write("[scenario]\nid = det\n[path]\ngains = 1.0e-10\n"
                     "[service]\nmodel = shannon\nsymbols_per_slot = 20\n"
                     "[arrival]\nrate_bits = 20\n[qos]\ntarget_delay = 6\ntarget_eps = 1e-2\n")
        for verb_args in (
            ["validate", "--w", "2..5", "--slots", "300000", "--seed", "9"],
            ["minimize"],
            ["simulate", "--w", "3,5", "--slots", "200000", "--seed", "4"],
        ):
            f1, f2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
            assert cli_main(verb_args + ["--scenario", scen, "--out", str(f1)]) == 0
            assert cli_main(verb_args + ["--scenario", scen, "--out", str(f2)]) == 0
            capsys.readouterr()
            assert f1.read_bytes() == f2.read_bytes(), verb_args[0]
