"""Command line interface.

Subcommands:

* ``tau``        print the discrepancy constant tau(c)
* ``solve``      solve one model problem, optionally with a dimension rule
* ``table``      run the experiment protocol and write the CSV table
* ``stability``  estimate the stability constants over a range of n

Options may come from a flat key-value config file (``--config``); command
line flags override file entries.
"""

import argparse
import sys

import numpy as np

from .harness import (ExperimentConfig, error_vs_power, gen_noise,
                      parse_config_file, run_table, subseed, write_table_csv)
from .operators import CollocationScheme, Kernel, model_rhs
from .rules import (choose_n_apriori, choose_n_discrepancy,
                    choose_n_monotone_error, tau_of_c)
from .solvers import (least_error_grid, residual, solve_collocation,
                      solve_least_error, solve_least_squares)
from .spaces import SampledFunction, SpaceSpec
from .splines import Mesh
from .config import SUP_SAMPLES_PER_CELL


def _float_list(text):
    return tuple(float(x) for x in str(text).split(","))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="projreg",
        description="Regularization by projection for first-kind integral "
                    "equations on [0,1].")
    sub = parser.add_subparsers(dest="command", required=True)

    p_tau = sub.add_parser("tau", help="print tau(c)")
    p_tau.add_argument("--c", type=_float_list, required=True,
                       help="comma-separated collocation parameters in (0.5,1)")

    p_solve = sub.add_parser("solve", help="solve a single model problem")
    p_solve.add_argument("--method", default="collocation",
                         choices=["collocation", "least-squares", "least-error"])
    p_solve.add_argument("--l", type=int, default=2, help="kernel order")
    p_solve.add_argument("--k", type=int, default=2, help="spline order")
    p_solve.add_argument("--c", type=_float_list, default=(0.7, 1.0),
                         help="collocation parameters, e.g. 0.7,1")
    p_solve.add_argument("--n", type=int, default=8, help="number of cells")
    p_solve.add_argument("--n-max", type=int, default=50)
    p_solve.add_argument("--delta", type=float, default=0.0, help="noise level")
    p_solve.add_argument("--seed", type=int, default=1)
    p_solve.add_argument("--r-exp", type=float, default=0.5,
                         help="exact solution exponent: u*(s) = s^r")
    p_solve.add_argument("--p", type=float, default=2.0,
                         help="solution space exponent (least error, errors)")
    p_solve.add_argument("--r", type=float, default=2.0,
                         help="data space exponent (least squares)")
    p_solve.add_argument("--rule", choices=["apriori", "dp", "me"],
                         help="choose n by a rule instead of --n")
    p_solve.add_argument("--b", type=float, help="discrepancy constant")
    p_solve.add_argument("--theta", type=float, default=0.5,
                         help="a priori rule exponent")
    p_solve.add_argument("--out", help="write solution samples to CSV")

    p_table = sub.add_parser("table", help="run the experiment table")
    p_table.add_argument("--config", help="flat key=value config file")
    p_table.add_argument("--c", type=_float_list)
    p_table.add_argument("--delta", type=_float_list)
    p_table.add_argument("--r-exp", type=_float_list)
    p_table.add_argument("--n-max", type=int)
    p_table.add_argument("--k", type=int)
    p_table.add_argument("--l", type=int)
    p_table.add_argument("--b", type=float)
    p_table.add_argument("--p", type=float, help="error norm exponent")
    p_table.add_argument("--seed", type=int)
    p_table.add_argument("--repetitions", type=int)
    p_table.add_argument("--out")

    p_stab = sub.add_parser("stability", help="stability constant reports")
    p_stab.add_argument("--l", type=int, default=2)
    p_stab.add_argument("--k", type=int, default=2)
    p_stab.add_argument("--c", type=_float_list, default=(0.7, 1.0))
    p_stab.add_argument("--n", type=_float_list, default=(4, 8, 16))
    p_stab.add_argument("--p", type=float, default=2.0)
    p_stab.add_argument("--budget", type=int, default=200)
    p_stab.add_argument("--seed", type=int, default=1)
    p_stab.add_argument("--out", help="CSV output path")
    return parser


def cmd_tau(args):
    for c in args.c:
        print(f"tau({c:g}) = {tau_of_c(c):.6g}")
    return 0


def _solve_once(args, n):
    kernel = Kernel.volterra(args.l)
    scheme = CollocationScheme(Mesh(n), args.c)
    nodes = scheme.nodes()
    f_exact = model_rhs(args.r_exp, args.l, nodes)
    noise = gen_noise(nodes, args.delta, subseed(args.seed, n))
    f_noisy = f_exact + noise

    if args.method == "collocation":
        result = solve_collocation(kernel, scheme, args.k, f_noisy)
    elif args.method == "least-error":
        result = solve_least_error(kernel, scheme, f_noisy,
                                   SpaceSpec("Lp", args.p))
    else:
        f_fn = lambda t: model_rhs(args.r_exp, args.l, t) \
            + np.interp(t, nodes, noise)
        f_delta = SampledFunction.from_callable(f_fn, mesh=scheme.mesh)
        result = solve_least_squares(kernel, scheme.mesh, args.k, f_delta,
                                     SpaceSpec("Lp", args.r))
    dense = np.linspace(0.0, 1.0, SUP_SAMPLES_PER_CELL * n + 1)
    f_ext = model_rhs(args.r_exp, args.l, dense) + np.interp(dense, nodes, noise)
    residual(result, SampledFunction(dense, f_ext), SpaceSpec("C"))
    return result


def cmd_solve(args):
    n = args.n
    if args.rule == "apriori":
        if args.delta <= 0:
            print("a priori rule needs --delta > 0", file=sys.stderr)
            return 2
        n = choose_n_apriori(args.delta, args.l, args.theta)
        print(f"a priori rule: n = {n}")
        result = _solve_once(args, n)
    elif args.rule == "dp":
        b = args.b
        if b is None:
            b = 1.01 + tau_of_c(args.c[0])
        trace = choose_n_discrepancy(lambda m: _solve_once(args, m),
                                     args.delta, b, args.n_max)
        if not trace.reached:
            print(f"discrepancy principle not reached up to n = {args.n_max}")
            return 1
        n = trace.chosen_n
        print(f"discrepancy principle (b = {b:.4g}): n = {n}")
        result = _solve_once(args, n)
    elif args.rule == "me":
        if args.method != "least-error":
            print("the monotone error rule applies to --method least-error",
                  file=sys.stderr)
            return 2
        result = _me_rule_solve(args)
        if result is None:
            return 1
    else:
        result = _solve_once(args, n)

    n_used = result.u.mesh.n if hasattr(result.u, "mesh") else n
    print(f"method        : {result.method}")
    print(f"n             : {n_used}")
    print(f"residual@nodes: {result.residual_nodes:.3e}")
    if result.residual_C is not None:
        print(f"residual C    : {result.residual_C:.3e}")
    print(f"L1 error vs s^{args.r_exp:g}: "
          f"{error_vs_power(_evalable(result), args.r_exp, p=1.0):.6g}")
    print(f"iterations    : {result.iterations}, converged: {result.converged}")
    print(f"condition     : {result.condition_estimate:.3e}")
    if args.out:
        ts = np.linspace(0.0, 1.0, 513)
        vals = result.eval_fn(ts)
        import csv as _csv
        with open(args.out, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["t", "u"])
            for t, v in zip(ts, vals):
                writer.writerow([repr(float(t)), repr(float(v))])
        print(f"wrote {args.out}")
    return 0


class _EvalWrapper:
    """Adapts a SolveResult's on-demand evaluator to error_vs_power."""

    def __init__(self, result):
        self.eval = result.eval_fn
        self.mesh = getattr(result.u, "mesh", None)


def _evalable(result):
    return _EvalWrapper(result)


def _me_rule_solve(args):
    kernel = Kernel.volterra(args.l)
    family = []
    n = 1
    while n <= args.n_max:
        family.append(n)
        n *= 2
    finest = CollocationScheme(Mesh(family[-1]), (1.0,))
    breaks = least_error_grid(finest)
    spec = SpaceSpec("Lp", args.p)
    noise_fine = gen_noise(finest.nodes(), args.delta, subseed(args.seed, 0))

    def solve_at(m):
        scheme = CollocationScheme(Mesh(m), (1.0,))
        nodes = scheme.nodes()
        idx = np.searchsorted(finest.nodes(), nodes)
        f_nodes = model_rhs(args.r_exp, args.l, nodes) + noise_fine[idx]
        res = solve_least_error(kernel, scheme, f_nodes, spec,
                                quad_breaks=breaks)
        res.diagnostics["f_nodes"] = f_nodes
        return res

    trace = choose_n_monotone_error(solve_at, args.delta, family,
                                    q=max(2.0, args.p))
    if not trace.reached:
        print(f"monotone error rule not reached within family {family}")
        return None
    print(f"monotone error rule: n = {trace.chosen_n}")
    return solve_at(trace.chosen_n)


def cmd_table(args):
    overrides = {
        "c": args.c, "delta": args.delta, "r_exp": args.r_exp,
        "n_max": args.n_max, "k": args.k, "l": args.l, "b": args.b,
        "error_p": args.p, "seed": args.seed, "repetitions": args.repetitions,
        "out": args.out,
    }
    if args.config:
        config = ExperimentConfig.from_file(args.config, **overrides)
    else:
        config = ExperimentConfig.from_mapping(
            {k: v for k, v in overrides.items() if v is not None})
    rows = run_table(config)
    path = write_table_csv(rows, config.out)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def cmd_stability(args):
    from .stability import reports_to_csv, stability_report
    kernel = Kernel.volterra(args.l)
    reports = []
    for n in args.n:
        scheme = CollocationScheme(Mesh(int(n)), args.c)
        rep = stability_report(kernel, scheme, args.k, SpaceSpec("Lp", args.p),
                               budget=args.budget, seed=args.seed)
        reports.append(rep)
        print(f"n={rep.n:4d}  kappa={rep.kappa:.6g}  tau={rep.tau:.6g}  "
              f"kappa~={rep.kappa_tilde:.6g}  kappa*={rep.kappa_star:.6g}  "
              f"[{rep.method}]")
    if args.out:
        reports_to_csv(reports, args.out)
        print(f"wrote {args.out}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"tau": cmd_tau, "solve": cmd_solve, "table": cmd_table,
                "stability": cmd_stability}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
