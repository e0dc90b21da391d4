"""Command-line surface: reproducible solves, sensitivity runs, and
self-validation. Exit codes: 0 success, 1 domain error (infeasible hour,
rank deficiency, ...), 2 usage or parse error."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from . import hvac_model as hm
from . import scenario as sc
from . import sensitivity as sn
from .baseline_opt import SolverConfig, kkt_report, solve_baseline, verify_kkt
from .errors import GridbaseError, ProfileParseError

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _emit(doc: dict) -> None:
    json.dump(_jsonable(doc), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _load_params(path: str | None) -> hm.HvacParameters:
    path = path or os.environ.get("GRIDBASE_PARAMS")
    if path is None:
        return hm.HvacParameters()
    return hm.load_parameters(path)


def _load_hour(args, params) -> hm.ExogenousVector:
    profile = sc.load_profile(args.profile, params)
    for h in profile.hours:
        if h.hour_index == args.hour:
            return hm.ExogenousVector(t_oa=h.t_oa, zones=h.zones,
                                      params=params)
    raise ProfileParseError(
        f"hour {args.hour} not present in {args.profile}")


def _mask_list(text: str) -> list:
    labels = [s.strip() for s in text.split(",") if s.strip()]
    return labels


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_solve(args) -> int:
    params = _load_params(args.params)
    w = _load_hour(args, params)
    cfg = SolverConfig(rng_seed=args.seed)
    kkt = solve_baseline(w, cfg)
    _emit(kkt_report(kkt, w, cfg))
    return EXIT_OK


def _sensitivity_objects(args):
    params = _load_params(args.params)
    w = _load_hour(args, params)
    cfg = SolverConfig(rng_seed=args.seed)
    kkt = solve_baseline(w, cfg)
    spec = sn.uncertainty_spec(w, _mask_list(args.mask), args.alpha)
    op = sn.build_operator(kkt, w, spec, cfg)
    return w, cfg, kkt, spec, op


def _cmd_sensitivity(args) -> int:
    w, cfg, kkt, spec, op = _sensitivity_objects(args)
    report = sn.sensitivity_report(op, w, spec, n_samples=args.samples,
                                   seed=args.seed)
    report["parameters"] = hm.dump_parameters(w.params)
    _emit(report)
    return EXIT_OK


def _cmd_bound(args) -> int:
    w, cfg, kkt, spec, op = _sensitivity_objects(args)
    if args.method == "sample":
        result = sn.sample_bound(op, w, spec, args.samples, args.seed)
    else:
        qm = sn.quadratic_model(op, w, spec)
        method = ("holder_half" if args.method == "holder"
                  else "holder_paper_literal")
        result = sn.holder_bound(qm, spec, method)
    doc = {
        "version": __version__,
        "beta_W": result.beta,
        "method": result.method,
        "samples": result.samples,
        "seed": result.seed,
        "argmax_dw": (None if result.argmax_dw is None
                      else list(result.argmax_dw)),
        "mask": list(spec.mask),
        "alpha": spec.alpha,
        "J0_W": kkt.j0,
        "parameters": hm.dump_parameters(w.params),
    }
    _emit(doc)
    return EXIT_OK


def _cmd_run_day(args) -> int:
    params = _load_params(args.params)
    profile = sc.load_profile(args.profile, params)
    cfg = SolverConfig(rng_seed=args.seed)
    results = sc.run_day(profile, _mask_list(args.mask), args.alpha,
                         cfg=cfg, params=params, n_samples=args.samples,
                         seed=args.seed, max_workers=args.threads)
    sc.export_results(results, args.out, args.format)
    summary = {
        "version": __version__,
        "profile": args.profile,
        "label": profile.label,
        "hours": len(results),
        "failed_hours": sum(1 for r in results if r.j0 != r.j0),
        "mask": _mask_list(args.mask),
        "alpha": args.alpha,
        "seed": args.seed,
        "samples": args.samples,
        "out": args.out,
        "format": args.format,
        "parameters": hm.dump_parameters(params),
    }
    _emit(summary)
    return EXIT_OK


def _cmd_synth(args) -> int:
    profile = sc.synth_profile(args.day, args.seed)
    sc.write_profile(profile, args.out)
    _emit({
        "version": __version__,
        "day": args.day,
        "seed": args.seed,
        "hours": len(profile.hours),
        "out": args.out,
    })
    return EXIT_OK


def _cmd_validate(args) -> int:
    params = _load_params(args.params)
    checks = []

    def check(name, ok, detail=""):
        checks.append((name, bool(ok), detail))

    # equipment-curve identities at rated conditions
    c = params.c_f
    f_pl1 = c[0] + c[1] + c[2] + c[3]
    check("fan part-load curve at design flow",
          abs(f_pl1 - 0.9898) < 1e-12, f"f_pl(1) = {f_pl1!r}")
    b = params.c_b
    check("boiler efficiency curve at rated load",
          abs(b[0] + b[1] + b[2] - 1.0) < 1e-12)
    g = params.c_g
    check("chiller generation curve at rated load",
          abs(g[0] + g[1] + g[2] - 1.00003) < 1e-12)

    q = np.array([-5200.0, -4100.0, -6300.0, -3800.0, -4700.0])
    tsp = np.array([23.0, 23.5, 22.5, 24.0, 23.0])
    v = np.array([0.10, 0.08, 0.12, 0.07, 0.09])
    w = hm.make_exogenous(34.0, q, tsp, v, params)
    cfg = SolverConfig()
    kkt = solve_baseline(w, cfg)
    res = verify_kkt(kkt.x0, kkt.lam, w, cfg)
    check("baseline KKT residuals within tolerance",
          res.stationarity_residual <= cfg.kkt_tol
          and res.complementarity_residual <= cfg.kkt_tol
          and res.feasibility_violation <= cfg.feas_tol)

    spec = sn.uncertainty_spec(w, ["T_oa", "Q_zone_1", "c_f_2"], 0.01)
    op = sn.build_operator(kkt, w, spec, cfg)
    err = sn.verify_operator_fd(kkt, w, spec, n_probes=50, seed=0)
    check("KKT-map Jacobians match finite differences", err <= 1e-6,
          f"max relative error {err:.3e}")

    qm = sn.quadratic_model(op, w, spec)
    b_half = sn.holder_bound(qm, spec, "holder_half")
    b_lit = sn.holder_bound(qm, spec, "holder_paper_literal")
    rng = np.random.default_rng(0)
    dws = rng.uniform(-1.0, 1.0, (20000, len(spec.indices))) \
        * spec.masked_delta[None, :]
    qmax = max(abs(sn.quadratic_value(qm, d)) for d in dws)
    check("analytic bound dominates quadratic-model samples",
          qmax <= b_half.beta * (1 + 1e-9),
          f"sampled {qmax:.6g} <= bound {b_half.beta:.6g}")
    mc = sn.sample_bound(op, w, spec, 20000, seed=1)
    check("analytic bound dominates sampled true cost change",
          mc.beta <= b_lit.beta * (1 + 1e-9),
          f"sampled {mc.beta:.6g} <= bound {b_lit.beta:.6g}")

    failed = [c for c in checks if not c[1]]
    for name, ok, detail in checks:
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        if detail:
            line += f"  ({detail})"
        print(line)
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_OK if not failed else EXIT_DOMAIN


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridbase",
        description="Hourly optimal-baseline HVAC forecaster with "
                    "KKT-based sensitivity bounds.",
        epilog="Mask labels are the exogenous registry labels, e.g. "
               "T_oa, Q_zone_3, T_sp_1, m_oa_min_2, c_f_1..c_f_4, "
               "c_b_1..c_b_3, c_g_1..c_g_3, delta_P, m_design, "
               "Q_b_rated, Q_e_rated, alpha_el, alpha_ng. "
               "GRIDBASE_PARAMS may point at a default parameter file.")
    parser.add_argument("--version", action="version",
                        version=f"gridbase {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--params", default=None,
                       help="JSON parameter file (default: GRIDBASE_PARAMS "
                            "or built-in nominal values)")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("solve", help="solve one profile hour")
    p.add_argument("--profile", required=True)
    p.add_argument("--hour", type=int, required=True)
    add_common(p)
    p.set_defaults(func=_cmd_solve)

    def add_sens_flags(p):
        p.add_argument("--profile", required=True)
        p.add_argument("--hour", type=int, required=True)
        p.add_argument("--mask", required=True,
                       help="comma-separated exogenous labels")
        p.add_argument("--alpha", type=float, required=True)
        p.add_argument("--samples", type=int, default=sc.DEFAULT_SAMPLES)
        add_common(p)

    p = sub.add_parser("sensitivity", help="sensitivity report for one hour")
    add_sens_flags(p)
    p.set_defaults(func=_cmd_sensitivity)

    p = sub.add_parser("bound", help="uncertainty bound for one hour")
    add_sens_flags(p)
    p.add_argument("--method", choices=("holder", "holder-literal", "sample"),
                   default="holder")
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("run-day", help="solve and analyze a whole profile")
    p.add_argument("--profile", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--samples", type=int, default=sc.DEFAULT_SAMPLES)
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: logical cores)")
    add_common(p)
    p.set_defaults(func=_cmd_run_day)

    p = sub.add_parser("synth", help="write a synthetic day profile")
    p.add_argument("--day", choices=sc.DAY_TYPES, required=True)
    p.add_argument("--out", required=True)
    add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("validate", help="run the self-check suite")
    add_common(p)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProfileParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GridbaseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
