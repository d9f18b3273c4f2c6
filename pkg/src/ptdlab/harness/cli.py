"""``ptdlab`` command line.

Exit status: 0 on success, 1 when a published-value comparison fails,
2 on invalid input (bad flags, config or MDP file).
"""

import argparse
import io
import sys

import numpy as np

from .. import linalg
from ..analysis import (counterexample_report, expected_model, fixed_point, forward_backward_residual,
                        lemma_audit, td_lambda_key_matrix)
from ..exceptions import DegenerateChain, MdpFormatError, PtdlabError
from ..mdp import induce_chain, parse_mdp
from .config import ConfigError, ExperimentConfig, parse_sweep
from .records import fmt, write_csv
from .runner import run_cells

EXIT_OK, EXIT_MISMATCH, EXIT_INVALID = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def _matrix_lines(name, M):
    lines = [f"{name} ="]
    for row in np.atleast_2d(M):
        lines.append("  [" + "  ".join(f"{x: .6f}" for x in row) + "]")
    return lines


def cmd_counterexamples(args):
    report = counterexample_report()
    print(report.render())
    if args.csv:
        cols = ["example", "algo", "entry", "computed", "expected", "tol", "abs_error", "entry_ok",
                "pd", "expected_pd", "passed"]
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        for r in report.rows():
            buf.write(",".join(fmt(r[c]) if isinstance(r[c], float) else str(r[c]).lower()
                               if isinstance(r[c], bool) else str(r[c]) for c in cols) + "\n")
        _emit(buf.getvalue(), args.csv)
    return EXIT_OK if report.passed else EXIT_MISMATCH


def cmd_keymatrix(args):
    try:
        with open(args.mdp) as fh:
            mdp, policy, phi, beta = parse_mdp(fh.read())
        P_pi, r_pi = induce_chain(mdp, policy)
        d_pi = linalg.stationary_distribution(P_pi)
        model = expected_model(phi, P_pi, r_pi, d_pi, beta, mdp.gamma)
    except OSError as exc:
        print(f"error: cannot read {args.mdp}: {exc.strerror}", file=sys.stderr)
        return EXIT_INVALID
    except MdpFormatError as exc:
        print(f"error: {args.mdp}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (DegenerateChain, PtdlabError, ValueError) as exc:
        print(f"error: {args.mdp}: {exc}", file=sys.stderr)
        return EXIT_INVALID

    rows = []
    if args.algo == "td-lambda":
        A = td_lambda_key_matrix(phi, P_pi, d_pi, 1.0 - beta, mdp.gamma)
        pd = linalg.is_positive_definite(A)
        lines = [f"algo: td-lambda (lambda = 1 - beta), gamma = {mdp.gamma:g}"]
        lines += _matrix_lines("A", A)
        lines.append(f"positive definite: {'yes' if pd else 'no'}")
        rows += [("A", f"{i}{j}", v) for (i, j), v in np.ndenumerate(A)]
        rows.append(("pd", "", float(pd)))
    else:
        A = model.A
        pd = linalg.is_positive_definite(A)
        audit = lemma_audit(model)
        w_star, pbe = fixed_point(model, phi, d_pi)
        rng = np.random.default_rng(0)
        probes = [np.zeros(phi.shape[1]), w_star] + [rng.normal(size=phi.shape[1]) for _ in range(8)]
        resid = max(forward_backward_residual(model, phi, d_pi, w) for w in probes)
        lines = [f"algo: ptd, gamma = {mdp.gamma:g}"]
        lines += _matrix_lines("A", A)
        lines += _matrix_lines("b", model.b[None, :])
        lines.append(f"positive definite: {'yes' if pd else 'no'}")
        lines.append("lemma audit:")
        lines.append(f"  row sums positive:     {audit.row_sums_positive}")
        lines.append(f"  diagonal positive:     {audit.diag_positive}")
        lines.append(f"  column sums positive:  {audit.col_sums_positive}")
        lines.append(f"  key matrix PD:         {audit.pd}")
        lines.append(f"  stationarity residual: {audit.stationarity_identity_residual:.3e}")
        lines.append(f"forward/backward residual (max over {len(probes)} w): {resid:.3e}")
        lines += _matrix_lines("w*", w_star[None, :])
        lines.append(f"projected Bellman error at w*: {pbe:.3e}")
        rows += [("A", f"{i}{j}", v) for (i, j), v in np.ndenumerate(A)]
        rows += [("b", str(i), v) for i, v in enumerate(model.b)]
        rows += [("pd", "", float(pd)), ("lemma_all_pass", "", float(audit.all_pass)),
                 ("stationarity_residual", "", audit.stationarity_identity_residual),
                 ("forward_backward_residual", "", resid), ("pbe", "", pbe)]
        rows += [("w_star", str(i), v) for i, v in enumerate(w_star)]
    print("\n".join(lines))
    if args.csv:
        buf = io.StringIO()
        buf.write("quantity,index,value\n")
        for q, idx, v in rows:
            buf.write(f"{q},{idx},{fmt(v)}\n")
        _emit(buf.getvalue(), args.csv)
    return EXIT_OK


def _config_from_args(args):
    return ExperimentConfig(
        env=args.env, algo=args.algo, alpha=args.alpha, episodes=args.episodes, seeds=args.seeds,
        seed_base=args.seed_base, metric=args.metric, beta=args.beta, lam=args.lam,
        interest=args.interest, setting=args.setting, corridor_len=args.len, n=args.n,
        hidden=args.hidden, actor_alpha=args.actor_alpha, condition=args.condition,
    ).validate()


def _write_rows(rows, out):
    buf = io.StringIO()
    write_csv(rows, buf)
    _emit(buf.getvalue(), out)


def cmd_run(args):
    try:
        cfg = _config_from_args(args)
        rows = run_cells([cfg])
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _write_rows(rows, args.out)
    return EXIT_OK


def cmd_sweep(args):
    try:
        with open(args.config) as fh:
            cells = parse_sweep(fh.read())
        rows = run_cells(cells)
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _write_rows(rows, args.out)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="ptdlab", description="Preferential TD analysis and experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    an = sub.add_parser("analyze", help="exact expected-update analysis")
    an_sub = an.add_subparsers(dest="target", required=True, parser_class=_Parser)
    ce = an_sub.add_parser("counterexamples", help="two-state counterexamples against published values")
    ce.add_argument("--csv", help="also write machine-readable rows to this path ('-' for stdout)")
    ce.set_defaults(func=cmd_counterexamples)
    km = an_sub.add_parser("keymatrix", help="key matrix and audits for an MDP file")
    km.add_argument("--mdp", required=True, help="MDP description file")
    km.add_argument("--algo", choices=("ptd", "td-lambda"), default="ptd")
    km.add_argument("--csv", help="also write machine-readable rows to this path")
    km.set_defaults(func=cmd_keymatrix)

    run = sub.add_parser("run", help="learning curves for one configuration")
    run.add_argument("--env", required=True)
    run.add_argument("--algo", required=True)
    run.add_argument("--alpha", type=float, required=True, help="step size (critic step size on cartpole)")
    run.add_argument("--beta", type=float, help="constant preference (default: the env's per-state values)")
    run.add_argument("--lambda", dest="lam", type=float, help="constant lambda")
    run.add_argument("--interest", type=float, help="constant ETD interest")
    run.add_argument("--episodes", type=int, default=10)
    run.add_argument("--seeds", type=int, default=1)
    run.add_argument("--seed-base", type=int, default=0)
    run.add_argument("--metric", help="rmse or mse (return or beta-percent on cartpole)")
    run.add_argument("--setting", default="linear", help="linear, semilinear, forward or backward (grids)")
    run.add_argument("--len", type=int, default=5, help="corridor length")
    run.add_argument("--n", type=int, default=8, help="grid side")
    run.add_argument("--hidden", type=int, help="hidden units of the value net or actor")
    run.add_argument("--actor-alpha", type=float, help="actor step size on cartpole")
    run.add_argument("--condition", type=int, default=1, help="cartpole threshold condition")
    run.add_argument("--out", help="CSV path (default stdout)")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="Cartesian sweep from a config file")
    sw.add_argument("config")
    sw.add_argument("--out", help="CSV path (default stdout)")
    sw.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
