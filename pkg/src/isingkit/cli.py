"""Command-line surface.

Every subcommand takes ``--config`` (a JSON key-value file) plus flag
overrides; outputs are deterministic given the seeds and written atomically,
so partial results never land on disk when a run fails.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import random
import sys
from fractions import Fraction

from .energy import MagneticField
from .experiments import (GrowthModelParams, RunConfig,
                          growth_threshold_from_constants,
                          run_growth_model, run_infection_microscopic,
                          run_nucleation, run_stc_audit, _rows_to_csv,
                          _write_atomic, write_nucleation_outputs,
                          write_stc_audit_outputs)
from .landscape import (critical_constants, enumerate_landscape,
                        landscape_to_csv, maximal_compounds, maximal_cycles,
                        partition_to_csv)
from .lattice import BoundaryCondition, BoxGeometry, Configuration, build_context
from .isoperimetry import oracle_table_csv
from .kmc import (EventStream, evolve_graphical, evolve_rejection_free,
                  pred_all_plus)
from .wgraph import (exit_oracle_linear, exit_point_law, expected_exit_time,
                     random_rate_matrix)


def _load_config(args, experiment):
    data = {"experiment": experiment}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            data.update(json.load(fh))
    for key in ("dims", "bc", "h", "beta", "replicas", "seed", "block_side",
                "eligibility_defect", "stc_threshold_D", "out_dir", "mode"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    caps = data.setdefault("caps", {})
    if getattr(args, "caps_events", None) is not None:
        caps["events"] = args.caps_events
    if getattr(args, "caps_time", None) is not None:
        caps["time"] = args.caps_time
    data["experiment"] = experiment
    return RunConfig.from_dict(data)


def _parse_dims(text):
    return [int(x) for x in text.replace("x", ",").split(",") if x]


def _parse_betas(text):
    return [float(x) for x in text.split(",") if x]


def _add_common(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--dims", type=_parse_dims)
    p.add_argument("--bc", help="all_minus | all_plus | n_pm_<n>")
    p.add_argument("--h", help="field token, e.g. sqrt2/2 or 0.5")
    p.add_argument("--beta", type=_parse_betas)
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--caps-events", type=int, dest="caps_events")
    p.add_argument("--caps-time", type=float, dest="caps_time")
    p.add_argument("--out-dir", dest="out_dir")


def _cmd_constants(args):
    h = MagneticField(args.h)
    const = critical_constants(args.d, h, verify_oracle=False)
    rows = []
    for n in range(1, args.d + 1):
        rows.append({"n": n, "l_c": const.l_c[n], "m": const.m[n],
                     "gamma_bonds": const.gammas[n].bonds,
                     "gamma_pluses": const.gammas[n].pluses,
                     "gamma": float(const.gammas[n].value),
                     "kappa": float(const.kappas[n]),
                     "L": float(const.Ls[n]),
                     "argmax_ties": const.argmax_ties[n]})
    print(json.dumps({"d": args.d, "h": h.token, "table": rows},
                     indent=2, sort_keys=True))
    return 0


def _cmd_landscape(args):
    ctx = build_context(BoxGeometry(tuple(args.dims)),
                        _bc_from_label(args.bc or "all_minus"),
                        MagneticField(args.h))
    graph = enumerate_landscape(ctx)
    full = (1 << ctx.n_sites) - 1
    y = frozenset(graph.states()) - {full}
    part = maximal_compounds(graph, y) if args.partition == "compounds" \
        else maximal_cycles(graph, y)
    out_dir = args.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    buf = io.StringIO()
    landscape_to_csv(graph, buf)
    _write_atomic(os.path.join(out_dir, "states.csv"), buf.getvalue())
    assign, summary = io.StringIO(), io.StringIO()
    partition_to_csv(graph, part, assign, summary)
    _write_atomic(os.path.join(out_dir, "partition.csv"), assign.getvalue())
    _write_atomic(os.path.join(out_dir, "blocks.csv"), summary.getvalue())
    print(f"wrote {out_dir}/states.csv, partition.csv, blocks.csv "
          f"({graph.n_states} states, {len(part.blocks)} blocks)")
    return 0


def _cmd_wgraph_check(args):
    rng = random.Random(args.seed or 0)
    worst_tv, worst_rel = 0.0, 0.0
    for _ in range(args.count):
        n = rng.randrange(2, args.max_states + 1)
        rm = random_rate_matrix(rng, n, dense=(n <= 5 and rng.random() < 0.5))
        k = rng.randrange(1, n)
        w = rng.sample(range(n), k)
        x = rng.choice([s for s in range(n) if s not in w])
        dist = exit_point_law(rm, w, x)
        t = expected_exit_time(rm, w, x)
        dist_o, t_o = exit_oracle_linear(rm, w, x)
        tv = 0.5 * sum(abs(dist[s] - dist_o[s]) for s in w)
        rel = abs(t - t_o) / t_o if t_o else 0.0
        worst_tv, worst_rel = max(worst_tv, tv), max(worst_rel, rel)
    print(json.dumps({"instances": args.count, "max_tv": worst_tv,
                      "max_rel_time_err": worst_rel,
                      "pass": worst_tv <= 1e-9 and worst_rel <= 1e-9}))
    return 0 if worst_tv <= 1e-9 and worst_rel <= 1e-9 else 1


def _cmd_simulate(args):
    ctx = build_context(BoxGeometry(tuple(args.dims)),
                        _bc_from_label(args.bc or "all_minus"),
                        MagneticField(args.h))
    alpha = Configuration.all_minus(ctx.geometry)
    beta = args.beta[0]
    stop = pred_all_plus() if args.stop == "all_plus" else None
    if args.mode == "graphical":
        traj = evolve_graphical(EventStream(args.seed or 1), ctx, alpha, beta,
                                stop=stop, horizon=args.caps_time or 100.0)
    else:
        traj = evolve_rejection_free(args.seed or 1, ctx, alpha, beta,
                                     stop=stop, time_cap=args.caps_time,
                                     max_events=args.caps_events or 1_000_000)
    out_dir = args.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    buf = io.StringIO()
    traj.to_csv(buf)
    _write_atomic(os.path.join(out_dir, "trajectory.csv"), buf.getvalue())
    _write_atomic(os.path.join(out_dir, "summary.json"), traj.summary_json())
    print(f"wrote {out_dir}/trajectory.csv ({len(traj.events)} events, "
          f"stop: {traj.stop_reason})")
    return 0


def _cmd_nucleation(args):
    config = _load_config(args, "nucleation")
    report = run_nucleation(config)
    if config.out_dir:
        write_nucleation_outputs(report, config.out_dir)
    fits = {k: {kk: vv for kk, vv in v.items() if kk != "replicas"}
            for k, v in report["fits"].items()}
    print(json.dumps({"fits": fits, "constants": report["constants"]},
                     indent=2, sort_keys=True, default=str))
    return 0


def _cmd_infection(args):
    config = _load_config(args, "infection")
    report = run_infection_microscopic(config)
    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
        rows = [{k: r[k] for k in ("replica", "seed", "beta",
                                   "first_infection_time", "censored",
                                   "deinfections")}
                for r in report["rows"]]
        _write_atomic(os.path.join(config.out_dir, "results.csv"),
                      _rows_to_csv(rows, ["replica", "seed", "beta",
                                          "first_infection_time", "censored",
                                          "deinfections"]))
    print(json.dumps({"persistence": report["persistence"],
                      "fit": report.get("fit", {})},
                     indent=2, sort_keys=True, default=str))
    return 0


def _cmd_growth_model(args):
    params = GrowthModelParams(d=args.d, gamma=args.gamma,
                               kappa_prev=args.kappa_prev, L=args.L,
                               betas=args.beta, replicas=args.replicas or 200,
                               seed=args.seed or 1)
    report = run_growth_model(params)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        _write_atomic(os.path.join(args.out_dir, "results.csv"),
                      _rows_to_csv(report["rows"],
                                   ["replica", "seed", "beta", "coverage_time",
                                    "censored", "side"]))
        _write_atomic(os.path.join(args.out_dir, "fit.json"),
                      json.dumps({"fit": report.get("fit", {}),
                                  "kappa_target": report["kappa_target"],
                                  "flags": report["flags"]},
                                 indent=2, sort_keys=True, default=str))
    print(json.dumps({"fit": report.get("fit", {}),
                      "kappa_target": report["kappa_target"]},
                     indent=2, sort_keys=True, default=str))
    return 0


def _cmd_isoperimetry(args):
    buf = io.StringIO()
    oracle_table_csv(args.d, args.vmax, buf)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        _write_atomic(os.path.join(args.out_dir, "isoperimetry.csv"),
                      buf.getvalue())
    print(buf.getvalue().strip())
    return 0


def _cmd_stc_audit(args):
    config = _load_config(args, "stc_audit")
    report = run_stc_audit(config)
    if config.out_dir:
        write_stc_audit_outputs(report, config.out_dir)
    print(json.dumps({k: report[k] for k in ("max_diam", "threshold_D",
                                             "passed", "beta")},
                     indent=2, sort_keys=True))
    return 0 if report["passed"] else 1


def _cmd_growth_threshold(args):
    h = MagneticField(args.h)
    const = critical_constants(args.d, h, verify_oracle=False)
    L = Fraction(args.L).limit_denominator(10**6) if h.rational is not None \
        else float(args.L)
    result = growth_threshold_from_constants(const, args.d, L)
    print(json.dumps({k: str(v) for k, v in result.items()}, indent=2,
                     sort_keys=True))
    return 0 if result["equal"] else 1


def _bc_from_label(label):
    if label == "all_minus":
        return BoundaryCondition.all_minus()
    if label == "all_plus":
        return BoundaryCondition.all_plus()
    if label.startswith("n_pm_"):
        return BoundaryCondition.n_pm(int(label.rsplit("_", 1)[1]))
    raise ValueError(f"unknown boundary kind {label!r}")


def build_parser():
    parser = argparse.ArgumentParser(prog="isingkit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("constants", help="critical droplet constants table")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--h", required=True)
    p.set_defaults(func=_cmd_constants)

    p = sub.add_parser("landscape", help="enumerate, partition and export")
    _add_common(p)
    p.add_argument("--partition", choices=["cycles", "compounds"],
                   default="compounds")
    p.set_defaults(func=_cmd_landscape)

    p = sub.add_parser("wgraph-check", help="graph sums vs linear oracle")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--max-states", type=int, default=8, dest="max_states")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_wgraph_check)

    p = sub.add_parser("simulate", help="single trajectory export")
    _add_common(p)
    p.add_argument("--mode", choices=["graphical", "rejection_free"],
                   default="rejection_free")
    p.add_argument("--stop", choices=["all_plus", "none"], default="none")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("nucleation", help="Arrhenius nucleation experiment")
    _add_common(p)
    p.add_argument("--mode", choices=["graphical", "rejection_free"])
    p.set_defaults(func=_cmd_nucleation)

    p = sub.add_parser("infection", help="microscopic infection process")
    _add_common(p)
    p.add_argument("--block-side", type=int, dest="block_side")
    p.add_argument("--eligibility-defect", type=int, dest="eligibility_defect")
    p.set_defaults(func=_cmd_infection)

    p = sub.add_parser("growth-model", help="abstract renormalized growth")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--kappa-prev", type=float, required=True, dest="kappa_prev")
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--beta", type=_parse_betas, required=True)
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=_cmd_growth_model)

    p = sub.add_parser("isoperimetry", help="minimal-perimeter oracle table")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--vmax", type=int, required=True)
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=_cmd_isoperimetry)

    p = sub.add_parser("stc-audit", help="pre-nucleation cluster diameters")
    _add_common(p)
    p.add_argument("--stc-threshold-D", type=int, dest="stc_threshold_D")
    p.set_defaults(func=_cmd_stc_audit)

    p = sub.add_parser("growth-threshold", help="relaxation threshold identity")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--h", required=True)
    p.add_argument("--L", type=float, required=True)
    p.set_defaults(func=_cmd_growth_threshold)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage()
        return 2
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
