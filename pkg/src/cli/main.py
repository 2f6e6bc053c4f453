"""twoscale command line: lockin, rate, bounds and gtd subcommands.

Exit codes: 0 on success, 2 for configuration errors, 3 for failures hit
while computing. Output files are written only once the computation has
finished.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict
from typing import List, Optional

import numpy as np

from src.bounds import (
    build_ledger,
    epsilon_for_horizon,
    lockin_bound,
    n0_double_prime,
    projected_bound,
    projected_n0_prime,
    radius_assumptions,
    rate_exponent,
    threshold_n0,
    threshold_n1,
    threshold_terms,
)
from src.common import config_loader
from src.common.errors import ConfigError, RuntimeFailure, TwoScaleError
from src.harness import emit_report, jsonable, load_experiment, run_lock_in, run_rate_fit
from src.harness.config import build_instance
from src.model.radii import Radii
from src.model.schedule import PolynomialSchedule, schedule_from_dict
from src.rl import GTDVariant, closed_form_x1, exact_matrices, gtd_spec, mspbe, neu, random_mrp
from src.spectral import spectral_constants
from src.storage.run_store import atomic_write_json, atomic_write_text

logger = logging.getLogger("cli.main")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
SWEEP_POINTS = 12
BOUNDS_KEYS = ("spec", "gtd", "schedule", "radii", "noise", "eps", "eps1", "eps2", "n0", "safety",
               "q_fraction", "kappa", "delta", "horizon")


def _setup_logging(config):
    logging.basicConfig(
        level=getattr(logging, config_loader.log_level(config), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twoscale", description="Linear two-timescale stochastic approximation lab.")
    parser.add_argument("--ini", default=None, help="path to config.ini (default: the project root one)")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, what in (("lockin", "empirical lock-in frequency against the probability bound"),
                       ("rate", "empirical convergence rate of the projected iterates")):
        p = sub.add_parser(name, help=what, description=what)
        p.add_argument("--config", required=True, help="experiment JSON config, or a manifest.json from an earlier run")
        p.add_argument("--out", default=None, help="output directory (overrides the config's 'out')")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes; 0 means one per CPU (env TWOSCALE_WORKERS)")
        if name == "rate":
            p.add_argument("--strict", action="store_true", help="fail when the fit window has R^2 < 0.5")

    b = sub.add_parser("bounds", help="constant ledger, thresholds and probability bounds",
                       description="Evaluate the constant ledger, the thresholds N0, N1, N0' and both lock-in bounds.")
    b.add_argument("--spec", default=None, help="spec JSON (v1, Gamma1, W1, v2, Gamma2, W2)")
    b.add_argument("--config", default=None, help="experiment JSON config; flags override its values")
    b.add_argument("--eps", type=float, default=None, help="eps: radius of both target balls (eps1 = eps2 = eps)")
    b.add_argument("--eps1", type=float, default=None, help="eps1: target radius for |theta_n - theta*|")
    b.add_argument("--eps2", type=float, default=None, help="eps2: target radius for |z_n|")
    b.add_argument("--n0", type=int, default=None, help="n0: starting index of the lock-in event (default N0)")
    b.add_argument("--r1in", type=float, default=None, help="R1^in: inner radius around theta*")
    b.add_argument("--r2in", type=float, default=None, help="R2^in: inner radius around z = 0")
    b.add_argument("--r2out", type=float, default=None, help="R2^out: outer radius for z, above R2^in")
    b.add_argument("--m1", type=float, default=None, help="m1: slow-iterate noise bound, |M1| <= m1 (1 + |theta| + |w|)")
    b.add_argument("--m2", type=float, default=None, help="m2: fast-iterate noise bound, |M2| <= m2 (1 + |theta| + |w|)")
    b.add_argument("--alpha", type=float, default=None, help="alpha exponent: slow stepsize alpha_n = 1/(n+1)^alpha")
    b.add_argument("--beta", type=float, default=None, help="beta exponent: fast stepsize beta_n = 1/(n+1)^beta")
    b.add_argument("--safety", type=float, default=None, help="safety: fraction of the spectral abscissa used for q1, q2")
    b.add_argument("--q-fraction", type=float, default=None, help="q / qMin: joint decay rate as a fraction of min(q1, q2)")
    b.add_argument("--kappa", type=float, default=None, help="kappa in (0, 1): slack of the closed-form series tail")
    b.add_argument("--delta", type=float, default=None, help="delta: failure probability for N0'' and eps(n)")
    b.add_argument("--horizon", type=int, default=None, help="n: horizon for the eps(n) inversion")
    b.add_argument("--format", choices=("json", "csv", "table"), default="json", help="stdout format")
    b.add_argument("--sweep", choices=("eps", "n0"), default=None, help="geometric sweep over eps or n0, emitted as CSV")
    b.add_argument("--out", default=None, help="directory for bounds.json (or sweep.csv)")

    g = sub.add_parser("gtd", help="generate an MRP and the two-timescale spec of a GTD method",
                       description="Generate a random MRP and the linear two-timescale spec of GTD(0), GTD2 or TDC.")
    g.add_argument("--variant", default="gtd0", help="gtd0, gtd2 or tdc")
    g.add_argument("--states", type=int, default=5, help="|S|: number of states")
    g.add_argument("--dim", type=int, default=3, help="d: feature dimension")
    g.add_argument("--gamma", type=float, default=0.9, help="gamma in [0, 1): discount factor")
    g.add_argument("--seed", type=int, default=0, help="seed of the MRP generator")
    g.add_argument("--out", default=None, help="output directory for mrp.json, spec.json and gtd.json")
    return parser


# experiments

def _experiment(args, config, kind: str) -> int:
    cfg = load_experiment(args.config)
    out_dir = args.out or cfg.out or os.path.join(config.get("RUN", "out_dir", fallback="runs"), kind)
    workers = args.workers if args.workers is not None else config_loader.workers(config)
    if workers <= 0:
        workers = os.cpu_count() or 1
    if kind == "lockin":
        result = run_lock_in(cfg, workers)
    else:
        result = run_rate_fit(cfg, workers, strict=args.strict)
    emit_report(result, cfg, out_dir, registry=config_loader.registry_path(config))
    print(json.dumps(jsonable(result.summary()), indent=2, sort_keys=True))
    return EXIT_OK


# bounds

def _bounds_data(args) -> dict:
    data = {}
    base_dir = None
    if args.config:
        data = config_loader.load_json_config(args.config)
        data = {k: v for k, v in data.items() if k in BOUNDS_KEYS}
        base_dir = os.path.dirname(os.path.abspath(args.config))
    if args.spec:
        data.pop("gtd", None)
        data["spec"] = config_loader.load_json_config(args.spec)
    for key in ("r1in", "r2in", "r2out"):
        value = getattr(args, key)
        if value is not None:
            data.setdefault("radii", {})
            data["radii"] = dict(data["radii"], **{key: value})
    if args.m1 is not None or args.m2 is not None:
        noise = dict(data.get("noise", {}), kind="sphere")
        if args.m1 is not None:
            noise["c1"] = args.m1
        if args.m2 is not None:
            noise["c2"] = args.m2
        data["noise"] = noise
    if args.alpha is not None or args.beta is not None:
        sched = data.get("schedule", {})
        if not isinstance(sched, dict):
            sched = {}
        sched = dict(sched, kind="polynomial")
        if args.alpha is not None:
            sched["alpha"] = args.alpha
        if args.beta is not None:
            sched["beta"] = args.beta
        data["schedule"] = sched
    if args.eps is not None:
        data["eps"] = args.eps
        data.pop("eps1", None)
        data.pop("eps2", None)
    for key in ("eps1", "eps2", "n0", "safety", "kappa", "delta", "horizon"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    if args.q_fraction is not None:
        data["q_fraction"] = args.q_fraction
    data["_base_dir"] = base_dir
    return data


def _epsilons(data):
    if "eps" in data:
        return float(data["eps"]), float(data["eps"])
    if "eps1" in data and "eps2" in data:
        return float(data["eps1"]), float(data["eps2"])
    raise ConfigError("give --eps, or both --eps1 and --eps2")


def _bounds_instance(data, config):
    base_dir = data.pop("_base_dir", None)
    if "spec" not in data and "gtd" not in data:
        raise ConfigError("give --spec or a --config naming a spec or gtd instance")
    spec, _, noise_bounds, _ = build_instance(data, base_dir)
    if "schedule" not in data:
        raise ConfigError("give --alpha and --beta, or a config with a 'schedule'")
    sched = data["schedule"]
    if isinstance(sched, str):
        path = sched if base_dir is None or os.path.isabs(sched) else os.path.join(base_dir, sched)
        sched = config_loader.load_json_config(path)
    schedule = schedule_from_dict(sched)
    radii = data.get("radii") or {}
    missing = [k for k in ("r1in", "r2in", "r2out") if k not in radii]
    if missing:
        raise ConfigError(f"radius '{missing[0]}' is required (--{missing[0]})")
    radii = Radii(float(radii["r1in"]), float(radii["r2in"]), float(radii["r2out"]))
    safety = float(data.get("safety", config_loader.get_float(config, "SPECTRAL", "safety")))
    q_fraction = float(data.get("q_fraction", config_loader.get_float(config, "SPECTRAL", "q_fraction")))
    spectral = spectral_constants(spec, safety=safety, q_fraction=q_fraction,
                                  grid_points=config_loader.get_int(config, "SPECTRAL", "grid_points"),
                                  slack=config_loader.get_float(config, "SPECTRAL", "slack"))
    ledger = build_ledger(spec, spectral, radii, noise_bounds)
    return spec, schedule, radii, noise_bounds, spectral, ledger


def _projected_section(ledger, schedule, eps, n0, data, kappa, cap) -> dict:
    if not isinstance(schedule, PolynomialSchedule):
        return {"skipped": "sparsely projected bounds need a polynomial schedule"}
    a, b = schedule.alpha_exp, schedule.beta_exp
    section = {"assumptions": radius_assumptions(ledger)}
    try:
        n0p = projected_n0_prime(ledger, eps, a, b)
    except ConfigError as exc:
        section["skipped"] = f"{exc.qualified_name}: {exc}"
        return section
    n0_prime = n0 if n0 is not None and n0 >= 1 and n0 & (n0 - 1) == 0 else n0p.power_of_two
    if n0 is not None and n0_prime != n0:
        logger.warning(f"--n0 {n0} is not a power of two; the projected bound uses n0' = {n0_prime}")
    section["N0_prime"] = n0p.to_dict()
    section["bound"] = projected_bound(ledger, eps, a, b, n0_prime, kappa=kappa, cap=cap).to_dict()
    delta = float(data.get("delta", 0.05))
    section["delta"] = delta
    section["N0_double_prime"] = n0_double_prime(ledger, eps, delta, a, b, kappa=kappa, cap=cap)
    if "horizon" in data:
        try:
            section["eps_for_horizon"] = epsilon_for_horizon(ledger, int(data["horizon"]), delta, a, b,
                                                             kappa=kappa, cap=cap)
        except ConfigError as exc:
            section["eps_for_horizon"] = f"{exc.qualified_name}: {exc}"
    section["rate_exponent"] = rate_exponent(a, b)
    return section


def _sweep_rows(ledger, schedule, eps1, eps2, n0, axis, kappa, direct_terms, cap):
    rows = []
    if axis == "eps":
        r = ledger.radii
        top = min(r.r1in, 4.0 * ledger["La"], r.r2in, r.r2out - r.r2in) * 0.99
        ratio1, ratio2 = eps1 / max(eps1, eps2), eps2 / max(eps1, eps2)
        grid = [(top * ratio1 * 2.0 ** -k, top * ratio2 * 2.0 ** -k) for k in range(SWEEP_POINTS)][::-1]
        for e1, e2 in grid:
            _, _, n0_min = threshold_n0(ledger, schedule, e1, e2)
            start = n0 if n0 is not None else n0_min
            bound = lockin_bound(ledger, schedule, start, e1, e2, kappa=kappa, direct_terms=direct_terms,
                                 scan_cap=cap)
            _, _, n1 = threshold_n1(ledger, schedule, start, e1, e2)
            rows.append([min(e1, e2), bound.bound, bound.vacuous, n0_min, n1])
    else:
        _, _, n0_min = threshold_n0(ledger, schedule, eps1, eps2)
        for k in range(SWEEP_POINTS):
            start = 16 * 4 ** k
            bound = lockin_bound(ledger, schedule, start, eps1, eps2, kappa=kappa, direct_terms=direct_terms,
                                 scan_cap=cap)
            _, _, n1 = threshold_n1(ledger, schedule, start, eps1, eps2)
            rows.append([start, bound.bound, bound.vacuous, n0_min, n1])
    return rows


def _table(report: dict) -> str:
    lines = ["ledger"]
    for entry in report["ledger"]["entries"]:
        lines.append(f"  {entry['name']:<8} {entry['value']!s:<24} {entry['formula']}")
    lines.append("thresholds")
    for key, value in report["thresholds"].items():
        lines.append(f"  {key:<10} {value}")
    lines.append("lock-in bound")
    for key, value in report["lockin_bound"].items():
        lines.append(f"  {key:<14} {value}")
    lines.append("projected lock-in bound")
    t2 = report["projected"]
    for key in ("skipped", "N0_double_prime", "eps_for_horizon", "rate_exponent"):
        if key in t2:
            lines.append(f"  {key:<16} {t2[key]}")
    if "bound" in t2:
        lines.append(f"  {'bound':<16} {t2['bound']['bound']}")
        lines.append(f"  {'n0_prime':<16} {t2['bound']['n0_prime']}")
    return "\n".join(lines) + "\n"


def _flat_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["section", "name", "value"])

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                walk(f"{prefix}.{k}" if prefix else str(k), v)
        elif isinstance(obj, list) and obj and isinstance(obj[0], dict) and "name" in obj[0]:
            for item in obj:
                writer.writerow([prefix, item["name"], item.get("value")])
        else:
            section, _, name = prefix.rpartition(".")
            writer.writerow([section, name, json.dumps(obj) if isinstance(obj, (list, dict)) else obj])

    walk("", report)
    return buf.getvalue()


def _bounds(args, config) -> int:
    data = _bounds_data(args)
    eps1, eps2 = _epsilons(data)
    spec, schedule, radii, noise_bounds, spectral, ledger = _bounds_instance(data, config)
    kappa = float(data.get("kappa", config_loader.get_float(config, "BOUNDS", "kappa")))
    direct_terms = config_loader.get_int(config, "BOUNDS", "direct_terms")
    cap = config_loader.get_int(config, "BOUNDS", "scan_cap")
    n0 = data.get("n0")

    if args.sweep:
        rows = _sweep_rows(ledger, schedule, eps1, eps2, n0, args.sweep, kappa, direct_terms, cap)
        header = [args.sweep, "lockin_bound", "vacuous", "N0", "N1"]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        text = buf.getvalue()
        if args.out:
            atomic_write_text(os.path.join(args.out, "sweep.csv"), text)
        sys.stdout.write(text)
        return EXIT_OK

    terms = threshold_terms(ledger, schedule, eps1, eps2, n0=n0)
    bound1 = lockin_bound(ledger, schedule, terms.n0, eps1, eps2, kappa=kappa, direct_terms=direct_terms,
                          scan_cap=cap)
    report = {
        "spec": spec.to_dict(),
        "schedule": schedule.to_dict(),
        "radii": radii.to_dict(),
        "noise_bounds": {"m1": noise_bounds.m1, "m2": noise_bounds.m2},
        "spectral": spectral.to_dict(),
        "ledger": ledger.to_dict(),
        "derived_radii": asdict(ledger.derived_radii()),
        "thresholds": terms.to_dict(),
        "lockin_bound": bound1.to_dict(),
        "projected": _projected_section(ledger, schedule, min(eps1, eps2), n0, data, kappa, cap),
    }
    report = jsonable(report)
    if args.out:
        atomic_write_json(os.path.join(args.out, "bounds.json"), report)
    if args.format == "json":
        sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    elif args.format == "csv":
        sys.stdout.write(_flat_csv(report))
    else:
        sys.stdout.write(_table(report))
    return EXIT_OK


# gtd

def _gtd(args, config) -> int:
    variant = GTDVariant.parse(args.variant)
    out_dir = args.out or os.path.join(config.get("RUN", "out_dir", fallback="runs"),
                                       f"gtd-{variant.value}-{args.seed}")
    mdp = random_mrp(args.states, args.dim, args.gamma, args.seed)
    spec, bounds = gtd_spec(mdp, variant)
    matrices = exact_matrices(mdp)
    x1_gap = float(np.max(np.abs(closed_form_x1(matrices, variant) - spec.x1)))
    summary = {
        "variant": variant.value,
        "states": mdp.n_states,
        "d": mdp.d,
        "gamma": mdp.gamma,
        "seed": args.seed,
        "stationary_distribution": mdp.pi.tolist(),
        "noise_bounds": {"m1": bounds.m1, "m2": bounds.m2},
        "theta_star": spec.theta_star.tolist(),
        "x1_closed_form_max_gap": x1_gap,
        "mspbe_at_theta_star": mspbe(matrices, spec.theta_star),
        "neu_at_theta_star": neu(matrices, spec.theta_star),
    }
    if x1_gap > 1e-10:
        logger.warning(f"closed-form X1 differs from the generic one by {x1_gap:.3e}")
    atomic_write_json(os.path.join(out_dir, "mrp.json"), jsonable(mdp.to_dict()))
    atomic_write_json(os.path.join(out_dir, "spec.json"), jsonable(spec.to_dict()))
    atomic_write_json(os.path.join(out_dir, "gtd.json"), jsonable(summary))
    logger.info(f"{variant.value} instance written to '{out_dir}'")
    print(json.dumps(jsonable(summary), indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "lockin": lambda args, config: _experiment(args, config, "lockin"),
    "rate": lambda args, config: _experiment(args, config, "rate"),
    "bounds": _bounds,
    "gtd": _gtd,
}


def parse_and_dispatch(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK

    try:
        config = config_loader.load_config(args.ini)
        _setup_logging(config)
        return COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"error [{exc.qualified_name}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeFailure as exc:
        print(f"error [{exc.qualified_name}]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except TwoScaleError as exc:
        print(f"error [{exc.qualified_name}]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
