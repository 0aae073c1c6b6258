"""Command-line front end.

Subcommands:
    bound     violation-probability bound over a grid of target delays
    invert    smallest target delay meeting a violation probability
    minimize  bound-based transmit-power minimization plus uniform baselines
    lifetime  bound-based network lifetime maximization plus baseline
    simulate  Monte-Carlo delay-violation estimates
    validate  paired bound and simulation with a dominance verdict
    sweep     Cartesian parameter sweeps dispatching to another verb
    norm      path heterogeneity norm of the scenario paths

Rows are emitted as CSV (default) or an aligned table.  CSV output is
byte-deterministic for a fixed seed and configuration; wall-clock runtime is
shown only in table format so that repeated runs stay identical.  Every row
carries the propagation-calibration fingerprint; absolute power values are
comparable only within one fingerprint.
"""

import argparse
import configparser
import csv
import io
import itertools
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from .kernel import InfeasibleError, delay_bound_for_eps, violation_bound
from .optimize import (
    BatteryState,
    OptimizerConfig,
    PowerAllocation,
    QoSTarget,
    maximize_lifetime,
    minimize_power,
    path_norm,
    qos_agnostic_baseline,
    qos_aware_baseline,
)
from .scenario import Scenario, battery_durations, battery_presets, load_scenarios
from .sim import SimConfig, sim_maximize_lifetime, sim_minimize_power, simulate_path

CSV_SCHEMA = "hopbound-csv/1"
COLUMNS = ["scenario", "verb", "w", "eps_target", "eps_achieved", "s_star",
           "powers_mw", "total_mw", "min_theta_sf", "detail", "calibration"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def _row(scenario: Scenario, verb: str, w=None, eps_target=None, eps_achieved=None,
         s_star=None, powers_w=None, min_theta=None, detail="") -> dict:
    powers_mw = ";".join(repr(p * 1e3) for p in powers_w) if powers_w else ""
    total_mw = sum(powers_w) * 1e3 if powers_w else None
    return {
        "scenario": scenario.scenario_id or "scenario",
        "verb": verb,
        "w": w,
        "eps_target": eps_target,
        "eps_achieved": eps_achieved,
        "s_star": s_star,
        "powers_mw": powers_mw,
        "total_mw": total_mw,
        "min_theta_sf": min_theta,
        "detail": detail,
        "calibration": scenario.calibration_fingerprint(),
    }


def _parse_w(text: str) -> list:
    """Accepts '10', '2..12', '2..12..2' or '2,5,10'."""
    text = text.strip()
    if ".." in text:
        parts = text.split("..")
        if len(parts) == 2:
            lo, hi, step = int(parts[0]), int(parts[1]), 1
        elif len(parts) == 3:
            lo, hi, step = int(parts[0]), int(parts[1]), int(parts[2])
        else:
            raise ValueError(f"bad delay range {text!r}")
        return list(range(lo, hi + 1, step))
    if "," in text:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    return [int(text)]


def _qos_from_args(args, scenario_qos: dict) -> QoSTarget:
    w = args.w_list[0] if args.w_list else scenario_qos.get("target_delay")
    eps = args.eps if args.eps is not None else scenario_qos.get("target_eps")
    if w is None or eps is None:
        raise ValueError("need a target delay (--w) and violation probability (--eps), "
                         "from the flags or a [qos] section")
    tol = args.eps_tol if args.eps_tol is not None else scenario_qos.get("eps_tolerance", 0.0)
    return QoSTarget(target_delay=int(w), target_eps=float(eps), eps_tolerance=float(tol or 0.0))


def _parse_qos_section(path: str, overrides: dict) -> dict:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path, "r", encoding="utf-8") as fh:
        cp.read_string(fh.read())
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if key and cp.has_section(section):
            cp.set(section, key, str(value))
        elif key:
            cp.add_section(section)
            cp.set(section, key, str(value))
    if not cp.has_section("qos"):
        return {}
    q = cp["qos"]
    out = {}
    if "target_delay" in q:
        out["target_delay"] = q.getint("target_delay")
    if "target_eps" in q:
        out["target_eps"] = q.getfloat("target_eps")
    if "eps_tolerance" in q:
        out["eps_tolerance"] = q.getfloat("eps_tolerance")
    return out


def _alloc_detail(alloc: PowerAllocation) -> str:
    bits = [f"converged={str(alloc.converged).lower()}", f"iterations={alloc.iterations}"]
    if not alloc.feasible:
        bits.append("status=fail")
    if alloc.note:
        bits.append(f"note={alloc.note}")
    return ";".join(bits)


def _pmax_powers(sc: Scenario, cfg: OptimizerConfig) -> list:
    p_max = cfg.p_max_w if cfg.p_max_w is not None else sc.transceiver.p_max_w
    return [p_max] * sc.n_links


def run_bound(sc, args, rows):
    status = EXIT_OK
    cfg = OptimizerConfig()
    powers = _pmax_powers(sc, cfg)
    path = sc.path_for_powers(powers)
    for w in args.w_list or [10]:
        try:
            eps, s_star = violation_bound(path, w, delta_min=cfg.s_interval_min)
        except InfeasibleError as exc:
            rows.append(_row(sc, "bound", w=w, powers_w=powers, detail=f"infeasible={exc}"))
            status = EXIT_INFEASIBLE
            continue
        rows.append(_row(sc, "bound", w=w, eps_achieved=eps, s_star=s_star, powers_w=powers))
    return status


def run_invert(sc, args, rows):
    if args.eps is None:
        raise ValueError("invert needs --eps")
    cfg = OptimizerConfig()
    powers = _pmax_powers(sc, cfg)
    path = sc.path_for_powers(powers)
    try:
        w = delay_bound_for_eps(path, args.eps, delta_min=cfg.s_interval_min)
    except InfeasibleError as exc:
        rows.append(_row(sc, "invert", eps_target=args.eps, powers_w=powers,
                         detail=f"infeasible={exc}"))
        return EXIT_INFEASIBLE
    rows.append(_row(sc, "invert", w=w, eps_target=args.eps, powers_w=powers))
    return EXIT_OK


def _verify_bound(sc, qos, alloc) -> str:
    """Defense in depth: re-check the constraint of an emitted allocation."""
    if not alloc.feasible:
        return "verified=fail"
    try:
        eps, _ = violation_bound(sc.path_for_powers(alloc.powers_w), qos.target_delay)
    except InfeasibleError:
        return "verified=false"
    return f"verified={str(eps <= qos.target_eps).lower()}"


def run_minimize(sc, args, rows, scenario_qos):
    qos = _qos_from_args(args, scenario_qos)
    cfg = OptimizerConfig()
    status = EXIT_OK
    alloc = minimize_power(sc, qos, cfg)
    agnostic = qos_agnostic_baseline(sc, qos, cfg)
    aware = qos_aware_baseline(sc, qos, cfg)
    baseline = agnostic if args.baseline == "agnostic" else aware
    if alloc.feasible and baseline.feasible and baseline.total_w > 0:
        saving = 100.0 * (1.0 - alloc.total_w / baseline.total_w)
        saving_txt = f"saving_vs_{args.baseline}_pct={saving:.4f};"
    else:
        saving_txt = ""
        status = EXIT_INFEASIBLE
    rows.append(_row(sc, "minimize", w=qos.target_delay, eps_target=qos.target_eps,
                     eps_achieved=alloc.achieved_eps, s_star=alloc.s_star,
                     powers_w=alloc.powers_w,
                     detail=f"scheme=gradient;{saving_txt}{_alloc_detail(alloc)};{_verify_bound(sc, qos, alloc)}"))
    rows.append(_row(sc, "minimize", w=qos.target_delay, eps_target=qos.target_eps,
                     eps_achieved=aware.achieved_eps, s_star=aware.s_star,
                     powers_w=aware.powers_w,
                     detail=f"scheme=qos-aware;{_alloc_detail(aware)};{_verify_bound(sc, qos, aware)}"))
    rows.append(_row(sc, "minimize", w=qos.target_delay, eps_target=qos.target_eps,
                     eps_achieved=agnostic.achieved_eps, s_star=agnostic.s_star,
                     powers_w=agnostic.powers_w, detail="scheme=qos-agnostic"))
    if args.simulate_refine:
        sim_cfg = SimConfig(slots=args.slots or 1_000_000, seed=args.seed)
        refined = sim_minimize_power(sc, qos, alloc if alloc.feasible else agnostic, sim_cfg)
        rows.append(_row(sc, "minimize", w=qos.target_delay, eps_target=qos.target_eps,
                         eps_achieved=refined.achieved_eps, powers_w=refined.powers_w,
                         detail=f"scheme=sim-refined;{_alloc_detail(refined)}"))
    return status


def _batteries(sc: Scenario) -> tuple:
    if sc.batteries_j is not None:
        return sc.batteries_j
    # no [batteries] section: one full charge unit per node
    return battery_presets("equal", sc.geometry, float(sc.n_links) * 7200.0)


def run_lifetime(sc, args, rows, scenario_qos):
    qos = _qos_from_args(args, scenario_qos)
    cfg = OptimizerConfig()
    charges = _batteries(sc)
    status = EXIT_OK
    alloc, bstate = maximize_lifetime(sc, BatteryState(charges, ()), qos, cfg)
    if not alloc.feasible:
        status = EXIT_INFEASIBLE
    agn_powers = _pmax_powers(sc, cfg)
    agn_theta = min(battery_durations(sc, agn_powers, charges))
    ext = (100.0 * (bstate.min_duration / agn_theta - 1.0)) if agn_theta > 0 else math.nan
    rows.append(_row(sc, "lifetime", w=qos.target_delay, eps_target=qos.target_eps,
                     eps_achieved=alloc.achieved_eps, s_star=alloc.s_star,
                     powers_w=alloc.powers_w, min_theta=bstate.min_duration,
                     detail=f"scheme=battery-gradient;extension_vs_agnostic_pct={ext:.4f};"
                            f"{_alloc_detail(alloc)};{_verify_bound(sc, qos, alloc)}"))
    rows.append(_row(sc, "lifetime", w=qos.target_delay, eps_target=qos.target_eps,
                     powers_w=agn_powers, min_theta=agn_theta, detail="scheme=qos-agnostic"))
    if args.simulate_refine:
        sim_cfg = SimConfig(slots=args.slots or 1_000_000, seed=args.seed)
        refined, theta = sim_maximize_lifetime(sc, BatteryState(charges, ()), qos, alloc, sim_cfg)
        rows.append(_row(sc, "lifetime", w=qos.target_delay, eps_target=qos.target_eps,
                         eps_achieved=refined.achieved_eps, powers_w=refined.powers_w,
                         min_theta=theta, detail=f"scheme=sim-refined;{_alloc_detail(refined)}"))
    return status


def run_simulate(sc, args, rows):
    cfg = SimConfig(slots=args.slots or 10_000_000, seed=args.seed)
    powers = _pmax_powers(sc, OptimizerConfig())
    stats = simulate_path(sc, powers, args.w_list or [10], cfg)
    for i, w in enumerate(stats.targets):
        rows.append(_row(sc, "simulate", w=w, eps_achieved=stats.estimates[i], powers_w=powers,
                         detail=f"ci_low={stats.ci_low[i]:.6e};ci_high={stats.ci_high[i]:.6e};"
                                f"samples={stats.samples};unit={stats.unit};seed={stats.seed}"))
    return EXIT_OK


def run_validate(sc, args, rows):
    ws = args.w_list or list(range(2, 13))
    cfg = SimConfig(slots=args.slots or 10_000_000, seed=args.seed)
    powers = _pmax_powers(sc, OptimizerConfig())
    path = sc.path_for_powers(powers)
    stats = simulate_path(sc, powers, ws, cfg)
    all_dom = True
    for i, w in enumerate(ws):
        eps, s_star = violation_bound(path, w)
        est, hi = stats.estimates[i], stats.ci_high[i]
        count = round(est * stats.samples)
        dominates = est <= eps and (count == 0 or hi <= eps)
        all_dom = all_dom and dominates
        rows.append(_row(sc, "validate", w=w, eps_achieved=est, s_star=s_star, powers_w=powers,
                         detail=f"bound={eps:.6e};ci_high={hi:.6e};samples={stats.samples};"
                                f"dominates={str(dominates).lower()}"))
    print(f"bound dominates: {str(all_dom).lower()}", file=sys.stderr)
    return EXIT_OK


def run_norm(sc, args, rows):
    if sc.geometry.lengths_m is None:
        raise ValueError("norm needs link lengths, not raw gains")
    rows.append(_row(sc, "norm", detail=f"path_norm={_fmt(path_norm(sc.geometry.lengths_m))}"))
    return EXIT_OK


def _run_verb(verb, sc, args, rows, scenario_qos):
    if verb == "bound":
        return run_bound(sc, args, rows)
    if verb == "invert":
        return run_invert(sc, args, rows)
    if verb == "minimize":
        return run_minimize(sc, args, rows, scenario_qos)
    if verb == "lifetime":
        return run_lifetime(sc, args, rows, scenario_qos)
    if verb == "simulate":
        return run_simulate(sc, args, rows)
    if verb == "validate":
        return run_validate(sc, args, rows)
    if verb == "norm":
        return run_norm(sc, args, rows)
    raise ValueError(f"unknown verb {verb!r}")


def run_sweep(args, overrides) -> tuple:
    """Cartesian sweep dispatching to --verb; workers fan out per combination."""
    if not args.sweep:
        raise ValueError("sweep needs at least one --sweep key=v1,v2,...")
    keys = []
    value_lists = []
    for spec in args.sweep:
        key, _, vals = spec.partition("=")
        if not vals:
            raise ValueError(f"bad --sweep {spec!r}; expected key=v1,v2,...")
        keys.append(key)
        value_lists.append([v.strip() for v in vals.split(",") if v.strip()])
    combos = list(itertools.product(*value_lists))

    def one(combo):
        local = dict(overrides)
        local.update(dict(zip(keys, combo)))
        scenarios = load_scenarios(args.scenario, local)
        scenario_qos = _parse_qos_section(args.scenario, local)
        tag = ",".join(f"{k}={v}" for k, v in zip(keys, combo))
        local_rows = []
        status = EXIT_OK
        for sc in scenarios:
            sc = Scenario(geometry=sc.geometry, service=sc.service, arrival=sc.arrival,
                          noise_w=sc.noise_w, transceiver=sc.transceiver,
                          batteries_j=sc.batteries_j, cross_traffic=sc.cross_traffic,
                          scenario_id=f"{sc.scenario_id}|{tag}")
            status = max(status, _run_verb(args.verb, sc, args, local_rows, scenario_qos))
        return local_rows, status

    rows = []
    status = EXIT_OK
    with ThreadPoolExecutor(max_workers=min(8, len(combos))) as pool:
        for local_rows, st in pool.map(one, combos):
            rows.extend(local_rows)
            status = max(status, st)
    return rows, status


def _emit(rows, fmt: str, out, runtime_s: float) -> None:
    if fmt == "csv":
        out.write(f"# {CSV_SCHEMA}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in rows:
            writer.writerow([_fmt(r[c]) for c in COLUMNS])
    else:
        cols = COLUMNS + ["runtime_s"]
        table = [[_fmt(r[c]) for c in COLUMNS] + [f"{runtime_s:.2f}"] for r in rows]
        widths = [max(len(c), *(len(row[i]) for row in table)) if table else len(c)
                  for i, c in enumerate(cols)]
        out.write("  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip() + "\n")
        for row in table:
            out.write("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hopbound",
                                     description="Delay bounds and power optimization "
                                                 "for multi-hop fading paths")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("bound", "invert", "minimize", "lifetime", "simulate", "validate",
                 "sweep", "norm"):
        p = sub.add_parser(verb)
        p.add_argument("--scenario", required=verb != "norm", help="scenario INI file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-path override, e.g. qos.target_eps=1e-4")
        p.add_argument("--w", dest="w", default=None,
                       help="target delay: INT, LO..HI, LO..HI..STEP or comma list")
        p.add_argument("--eps", type=float, default=None, help="target violation probability")
        p.add_argument("--eps-tol", type=float, default=None, help="convergence window width")
        p.add_argument("--slots", type=int, default=None, help="simulation length in slots")
        p.add_argument("--seed", type=int, default=1, help="simulation seed")
        p.add_argument("--baseline", choices=("agnostic", "aware"), default="agnostic")
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--format", choices=("csv", "table"), default="csv")
        if verb == "norm":
            p.add_argument("--lengths", default=None,
                           help="link lengths in meters, e.g. '20 19 21' (instead of --scenario)")
        if verb == "sweep":
            p.add_argument("--verb", dest="inner_verb", required=True,
                           choices=("bound", "invert", "minimize", "lifetime",
                                    "simulate", "validate", "norm"))
            p.add_argument("--sweep", action="append", default=[], metavar="KEY=V1,V2,...",
                           help="swept dotted key with comma-separated values (repeatable)")
        if verb in ("minimize", "lifetime"):
            p.add_argument("--simulate-refine", action="store_true",
                           help="append a simulation-refined allocation row")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.w_list = _parse_w(args.w) if args.w else None
    if not hasattr(args, "simulate_refine"):
        args.simulate_refine = False

    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            print(f"error: --set {item!r} is not KEY=VALUE", file=sys.stderr)
            return EXIT_ERROR
        overrides[key] = value

    t0 = time.perf_counter()
    rows = []
    try:
        if args.verb == "sweep":
            args.verb = args.inner_verb
            rows, status = run_sweep(args, overrides)
        elif args.verb == "norm" and args.lengths:
            lengths = [float(tok) for tok in args.lengths.replace(",", " ").split()]
            print(_fmt(path_norm(lengths)), file=sys.stdout)
            return EXIT_OK
        else:
            scenarios = load_scenarios(args.scenario, overrides)
            scenario_qos = _parse_qos_section(args.scenario, overrides)
            status = EXIT_OK
            for sc in scenarios:
                status = max(status, _run_verb(args.verb, sc, args, rows, scenario_qos))
    except (InfeasibleError,) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, ValueError, KeyError, ArithmeticError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    runtime = time.perf_counter() - t0

    text = io.StringIO()
    _emit(rows, args.format, text, runtime)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text.getvalue())
    else:
        sys.stdout.write(text.getvalue())
    return status


if __name__ == "__main__":
    sys.exit(main())
