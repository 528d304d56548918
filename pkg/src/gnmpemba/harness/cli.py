"""``gnmpemba`` command line.

Exit codes: 0 success, 1 physics-invariant violation, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .. import __version__
from ..evolution import InvariantViolation, save_checkpoint
from ..protocols import (
    StateStore,
    classify_steady_state,
    label_from_theta,
    run_pme,
    run_qme,
    run_quench,
    scan_phase_diagram,
    steady_state,
)
from .config import COMMANDS, ConfigError, evolution_config, load_config, model_params, steady_evolution_config
from .io import RunManifest, fmt, write_json, write_timeseries

log = logging.getLogger("gnmpemba")

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 1, 2


def _store(cfg):
    return StateStore(cfg["store"]) if cfg["store"] else None


def cmd_scan(cfg, out: Path, manifest: RunManifest):
    base = model_params(cfg)
    sc = cfg["scan"]
    if sc["points"] is not None:
        # arbitrary point list: run each as a 1x1 grid
        rows = []
        for mu, g in sc["points"]:
            pmap = scan_phase_diagram([mu], [g], base, seeds=cfg["seeds"], workers=1,
                                      config=steady_evolution_config(cfg), store=_store(cfg),
                                      strategy=cfg["steady"]["strategy"])
            rows.append((float(mu), float(g), pmap.labels[0][0]))
            manifest.failures.update({f"{mu},{g}": v for v in pmap.failures.values()})
        boundary = []
    else:
        pmap = scan_phase_diagram(sc["mus"], sc["gs"], base, seeds=cfg["seeds"], workers=cfg["workers"],
                                  config=steady_evolution_config(cfg), store=_store(cfg),
                                  strategy=cfg["steady"]["strategy"])
        rows = [(float(mu), float(g), pmap.labels[i][k]) for i, g in enumerate(pmap.gs) for k, mu in enumerate(pmap.mus)]
        manifest.failures.update({str(k): v for k, v in pmap.failures.items()})
        boundary = pmap.boundary_points()
    with open(out / "phase_map.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mu", "g", "label", "kind", "nu", "amplitude", "frustrated"])
        for mu, g, lab in rows:
            if lab is None:
                w.writerow([fmt(mu), fmt(g), "FAILED", "", "", "", ""])
            else:
                w.writerow([fmt(mu), fmt(g), str(lab), lab.kind, "" if lab.dominant_nu is None else lab.dominant_nu,
                            fmt(lab.amplitude), int(lab.frustrated)])
    write_json(out / "boundary.json", [{"mu": b[0], "g": b[1], "between": [b[2], b[3]]} for b in boundary])


def cmd_steady(cfg, out, manifest):
    p = model_params(cfg)
    for seed in cfg["seeds"]:
        res = steady_state(p, seed, strategy=cfg["steady"]["strategy"], config=steady_evolution_config(cfg),
                           store=_store(cfg))
        lab = label_from_theta(res.theta, p.g)
        save_checkpoint(out / f"steady_seed{seed}.gnth", res.theta, res.effort)
        write_json(out / f"steady_seed{seed}.json", {
            "label": str(lab), "kind": lab.kind, "nu": lab.dominant_nu, "amplitude": lab.amplitude,
            "converged": res.converged, "effort": res.effort, "method": res.method, "residual": res.residual,
            "deltaJ": float(np.mean(res.sigma)),
        })
    if len(cfg["seeds"]) > 1:
        lab = classify_steady_state(p, cfg["seeds"], config=steady_evolution_config(cfg), store=_store(cfg),
                                    strategy=cfg["steady"]["strategy"])
        write_json(out / "label.json", {"label": str(lab), "frustrated": lab.frustrated})


def cmd_quench(cfg, out, manifest):
    base = model_params(cfg)
    q = cfg["quench"]
    res = run_quench(base.with_point(*q["p_in"]), base.with_point(*q["p_eq"]),
                     evolution_config(cfg).replace(t_max=float(q["t_max"])),
                     seed=cfg["seeds"][0], store=_store(cfg), steady_cfg=steady_evolution_config(cfg))
    write_timeseries(res.record, out / "trajectory.csv", scalars={"M": res.M, "Mhat": res.Mhat})
    with open(out / "fidelity_bw.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "F_bw"])
        for t, f in zip(res.F_bw_times, res.F_bw):
            w.writerow([fmt(t), fmt(f)])
    write_json(out / "dpt.json", res.dpt.to_dict())


def cmd_pme(cfg, out, manifest):
    base = model_params(cfg)
    p = cfg["pme"]
    res = run_pme(p["S"], p["A"], p["F"], base, switch_policy=p["switch_policy"], t_switch=p["t_switch"],
                  threshold=float(p["threshold"]), horizon=float(p["horizon"]),
                  checkpoint_every=float(p["checkpoint_every"]), config=evolution_config(cfg),
                  seed=cfg["seeds"][0], store=_store(cfg), steady_cfg=steady_evolution_config(cfg))
    write_json(out / "pme.json", res.summary())
    for name in ("direct", "leg1", "leg2"):
        leg = getattr(res, name)
        if leg is None:
            continue
        with open(out / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "M", "envelope"])
            for row in zip(leg.times, leg.M, leg.envelope):
                w.writerow([fmt(x) for x in row])


def cmd_qme(cfg, out, manifest):
    base = model_params(cfg)
    q = cfg["qme"]
    res = run_qme(q["initial"], q["target"], base, threshold=float(q["threshold"]),
                  check_thresholds=[float(x) for x in q["check_thresholds"]], horizon=float(q["horizon"]),
                  config=evolution_config(cfg), workers=cfg["workers"], store=_store(cfg),
                  steady_cfg=steady_evolution_config(cfg))
    write_json(out / "qme.json", {
        "classification": res.classification,
        "partial": res.partial,
        "ordering_stable": res.ordering_stable,
        "tau_order": res.tau_order(),
        "distance_order": res.distance_order(),
        "pairs": res.pairs,
        "copies": [{"point": c.point, "D_E": c.D_E, "tau": c.tau, "pre_quench_nu": c.pre_quench_nu,
                    "taus": {fmt(k): v for k, v in c.taus.items()}} for c in res.copies],
    })
    for i, c in enumerate(res.copies):
        with open(out / f"copy{i + 1}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "Mhat", "envelope"])
            for row in zip(c.times, c.Mhat, c.envelope):
                w.writerow([fmt(x) for x in row])


def cmd_validate(cfg, out, manifest):
    from .validate import run_all

    if not run_all(sys.stdout):
        raise InvariantViolation("validation suite failed")


def cmd_plot(cfg, out, manifest):
    from .plot import plot_any

    for p in plot_any(cfg["plot"]["input"]):
        log.info("wrote %s", p)


HANDLERS = {
    "scan": cmd_scan,
    "steady": cmd_steady,
    "quench": cmd_quench,
    "pme": cmd_pme,
    "qme": cmd_qme,
    "validate": cmd_validate,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gnmpemba", description="Dissipative lattice Gross-Neveu simulations.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("overrides", nargs="*", help="dotted key=value settings, e.g. model.L=40")
    ap.add_argument("-c", "--config", help="YAML config file")
    ap.add_argument("-o", "--output", help="output directory (same as output=...)")
    ap.add_argument("-w", "--workers", type=int, help="worker processes (same as workers=...)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def cli_main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    overrides = list(args.overrides)
    if args.output:
        overrides.append(f"output={args.output}")
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    try:
        cfg = load_config(args.config, overrides, command=args.command)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG

    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config=cfg, version=__version__,
                           seeds={"master_seed": cfg["master_seed"], "seeds": cfg["seeds"]})
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        HANDLERS[args.command](cfg, out, manifest)
    except InvariantViolation as exc:
        log.error("invariant violation: %s", exc)
        manifest.status, code = f"invariant violation: {exc}", EXIT_INVARIANT
    except (ValueError, KeyError) as exc:
        log.error("bad input: %s", exc)
        manifest.status, code = f"config error: {exc}", EXIT_CONFIG
    manifest.wall_time = time.perf_counter() - t0
    manifest.write(out)
    log.info("done in %.1fs, outputs in %s", manifest.wall_time, out)
    return code


def main():  # console-script entry
    sys.exit(cli_main())
