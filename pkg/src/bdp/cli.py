"""Command line runner: ``bdp <subcommand> --config FILE [--out DIR] [--seed N]``.

Exit status: 0 completed or Pass, 2 Fail, 3 Inconclusive, 1 error.
"""

import argparse
import csv
import io
import os
import sys

from .config import COMMANDS, parse_config, parse_fn_spec
from .errors import BDPError, ValidationError

EXIT_OK, EXIT_ERROR, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3
_VERDICT_EXIT = {"Pass": EXIT_OK, "Fail": EXIT_FAIL, "Inconclusive": EXIT_INCONCLUSIVE}


def _csv(rows, header):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _flag(ok):
    return "" if ok is None else (ok if isinstance(ok, str) else str(bool(ok)).lower())


class _Run:
    def __init__(self, plan, out_dir, command):
        self.plan, self.out_dir, self.command = plan, out_dir, command
        self.written = []

    def write(self, text, suffix=""):
        os.makedirs(self.out_dir, exist_ok=True)
        name = f"{self.command}-{self.plan.digest}{suffix}.csv"
        path = os.path.join(self.out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.written.append(path)
        return path


def _table(plan):
    from .scale import scale_speed
    return scale_speed(plan.rates)


def _need_triple(plan):
    if plan.triple is None:
        raise ValidationError("triple", "this subcommand needs a [triple] section")
    return plan.triple


def _solve_ctrl(plan, prefix):
    from .resolvent import SolveControls
    kw = {}
    if f"{prefix}.tol" in plan.values:
        kw["tol"] = plan.values[f"{prefix}.tol"]
    if f"{prefix}.Nmax" in plan.values:
        kw["Nmax"] = plan.values[f"{prefix}.Nmax"]
    return SolveControls(**kw)


def cmd_classify(plan, run):
    from .scale import classify_boundary
    from .triple import check_admissible
    table = _table(plan)
    bc = classify_boundary(plan.rates, tol=plan.get("classify.tol", 1e-8), table=table)
    rows = [("R", bc.R_value, bc.R_tail, ""), ("S", bc.S_value, bc.S_tail, ""),
            ("prefix_len", float(bc.prefix_len), 0.0, ""), ("certified", float(bc.certified), 0.0, "")]
    if plan.triple is not None and bc.kind in ("Regular", "Exit"):
        rep = check_admissible(plan.triple, table, bc)
        rows += [(q, v, b, _flag(ok)) for q, v, b, ok in rep.rows()]
        rows.append(("admissible", float(rep.admissible), 0.0, _flag(rep.admissible)))
    run.write(_csv(rows, ["quantity", "value", "bound", "pass"]))
    print(bc.kind)
    return EXIT_OK


def cmd_resolvent(plan, run):
    from .resolvent import full_resolvent_field
    from .states import CEMETERY_CODE, INFINITY_CODE
    table = _table(plan)
    f = parse_fn_spec(plan.get("resolvent.f", "const:1"))
    K = plan.get("resolvent.states", 16)
    ctrl = _solve_ctrl(plan, "resolvent")
    rows = []
    for a in plan.get("resolvent.alpha", [1.0]):
        F = full_resolvent_field(plan.rates, table, plan.triple, a, f, ctrl, probe=K)
        for k in range(min(K, F.values.size - 1) + 1):
            rows.append((a, k, float(F.values[k]), F.error_bound))
        rows.append((a, INFINITY_CODE, F.value_inf, F.error_bound))
        rows.append((a, CEMETERY_CODE, F.value_cem, 0.0))
    run.write(_csv(rows, ["alpha", "state", "value", "error_bound"]))
    return EXIT_OK


def _scheme(plan, table, name, key):
    from . import schemes
    triple = _need_triple(plan)
    if name == "truncation":
        return schemes.truncation_scheme(triple)
    if name == "tailshift":
        return schemes.tailshift_scheme(triple)
    if name == "wang":
        return schemes.wang_scheme(plan.rates, table, triple)
    if name == "constant":
        return schemes.constant_scheme(triple)
    raise ValidationError(key, f"unknown scheme {name!r}")


def cmd_approx(plan, run):
    from .schemes import resolvent_convergence_report, triple_convergence_report, wang_limit_checks
    table = _table(plan)
    target = _need_triple(plan)
    seq = _scheme(plan, table, plan.get("approx.scheme", "truncation"), "approx.scheme")
    n_grid = plan.get("approx.n_grid", [2, 4, 8, 16, 32])
    alphas = plan.get("approx.alphas", [1.0])
    thr = plan.get("approx.threshold", 1e-6)
    wanted = [w.strip() for w in plan.get("approx.reports", "triple,resolvent").split(",") if w.strip()]
    unknown = set(wanted) - {"triple", "resolvent", "wang_limits"}
    if unknown:
        raise ValidationError("approx.reports", f"unknown report(s) {sorted(unknown)}")
    reports = []
    if "triple" in wanted:
        reports.append(triple_convergence_report(plan.rates, table, seq, target, alphas, n_grid,
                                                 k_probe=plan.get("approx.k_probe", 8), threshold=thr))
    if "resolvent" in wanted:
        f = parse_fn_spec(plan.get("approx.f", "indicator:0"))
        for a in alphas:
            reports.append(resolvent_convergence_report(plan.rates, table, seq, target, a, f,
                                                        K=plan.get("approx.K", 32), n_grid=n_grid,
                                                        threshold=thr))
    if "wang_limits" in wanted:
        reports.append(wang_limit_checks(plan.rates, table, alphas, plan.get("approx.k_probe", 0), n_grid))
    rows = []
    for rep in reports:
        rows.extend((n, q, v, b, _flag(ok)) for n, q, v, b, ok in rep.rows)
    run.write(_csv(rows, ["n", "quantity", "value", "bound", "pass"]))
    for rep in reports:
        for q, ok in rep.clause_pass().items():
            if ok is not None:
                print(f"{q}: {'pass' if ok else 'fail'}")
    return EXIT_OK


def _sim_ctrl(plan, seed):
    from .pathsim import SimControls
    return SimControls(cap=plan.get("sim.cap", 256), horizon=plan.get("sim.horizon", 10.0),
                       rng_seed=seed, max_events=plan.get("sim.max_events", 10**6))


def cmd_simulate(plan, run):
    from .mc import split_seed
    from .pathsim import simulate_doob, simulate_minimal, simulate_wang_approximant
    table = _table(plan)
    proc = plan.get("simulate.process", "minimal" if plan.triple is None else "doob")
    i0 = plan.get("simulate.i0", 0)
    count = plan.get("simulate.count", 1)
    master = plan.seed if plan.seed is not None else 0
    for i in range(count):
        ctrl = _sim_ctrl(plan, split_seed(master, i))
        if proc == "minimal":
            p = simulate_minimal(plan.rates, table, i0, ctrl)
        elif proc == "doob":
            p = simulate_doob(plan.rates, table, _need_triple(plan), i0, ctrl)
        else:
            if "simulate.n" not in plan.values:
                raise ValidationError("simulate.n", "required for process=wang")
            p = simulate_wang_approximant(plan.rates, table, _need_triple(plan), plan.values["simulate.n"], i0, ctrl)
        run.write(p.to_csv(), suffix=f"-{i}")
    return EXIT_OK


def cmd_distance(plan, run):
    from .metrics import dprime, local_uniform_distance, skorohod_j1_upper
    from .pathsim import CadlagPath
    paths = []
    for key in ("distance.path1", "distance.path2"):
        if key not in plan.values:
            raise ValidationError(key, "required")
        p = plan.values[key]
        if plan.source and not os.path.isabs(p):
            p = os.path.join(os.path.dirname(os.path.abspath(plan.source)), p)
        paths.append(CadlagPath.load(p))
    p1, p2 = paths
    Jmax = plan.get("distance.Jmax", 40)
    T = plan.get("distance.T", min(p1.horizon, p2.horizon))
    d, tail = dprime(p1, p2, Jmax)
    rows = [("dprime", d, tail), ("j1_upper", skorohod_j1_upper(p1, p2, T, plan.get("distance.grid", 4)), 0.0),
            ("local_uniform", local_uniform_distance(p1, p2, T), 0.0)]
    run.write(_csv(rows, ["metric", "value", "bound"]))
    return EXIT_OK


def cmd_mc(plan, run, workers=None):
    from .mc import dprime_as_convergence_experiment, fdd_convergence_experiment
    table = _table(plan)
    target = _need_triple(plan)
    seed = plan.seed if plan.seed is not None else 0
    exp = plan.get("mc.experiment", "fdd")
    n_grid = plan.get("mc.n_grid", [2, 4, 8, 16])
    count = plan.get("mc.count", 200)
    workers = workers if workers is not None else plan.get("mc.workers", 1)
    cap = plan.get("sim.cap", 256)
    max_events = plan.get("sim.max_events", 10**6)
    if exp == "dprime":
        rep = dprime_as_convergence_experiment(plan.rates, table, target, n_grid, count,
                                               plan.get("mc.horizon", plan.get("sim.horizon", 10.0)), seed,
                                               i0=plan.get("mc.i0", 0), cap=cap, Jmax=plan.get("mc.Jmax", 40),
                                               threshold=plan.get("mc.threshold", 0.02), workers=workers,
                                               max_events=max_events)
    else:
        times = plan.get("mc.times", [0.5])
        specs = [s for s in plan.get("mc.test_fns", "indicator:0").split(";") if s.strip()]
        if len(specs) == 1 and len(times) > 1:
            specs = specs * len(times)
        if len(specs) != len(times):
            raise ValidationError("mc.test_fns", f"{len(specs)} functions for {len(times)} times")
        fns = [parse_fn_spec(s) for s in specs]
        seq = _scheme(plan, table, plan.get("mc.scheme", "constant"), "mc.scheme")
        rep = fdd_convergence_experiment(plan.rates, table, seq, target, times, fns, n_grid, count, seed,
                                         i0=plan.get("mc.i0", 0), cap=cap, horizon=plan.get("mc.horizon"),
                                         workers=workers, max_events=max_events)
    run.write(rep.to_csv())
    print(rep.verdict_line())
    return _VERDICT_EXIT[rep.verdict]


_HANDLERS = {"classify": cmd_classify, "resolvent": cmd_resolvent, "approx": cmd_approx,
             "simulate": cmd_simulate, "distance": cmd_distance, "mc": cmd_mc}


def build_parser():
    ap = argparse.ArgumentParser(prog="bdp", description="Birth-death boundary experiments")
    ap.add_argument("subcommand", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="experiment configuration file")
    ap.add_argument("--out", default="./out", help="output directory (default ./out)")
    ap.add_argument("--seed", type=int, default=None, help="master seed (overrides mc.seed and BDP_SEED)")
    ap.add_argument("--workers", type=int, default=None, help="worker threads for mc")
    return ap


def _resolve_seed(plan, cli_seed):
    seed = plan.seed
    env = os.environ.get("BDP_SEED")
    if env is not None and env.strip():
        try:
            seed = int(env)
        except ValueError:
            raise ValidationError("BDP_SEED", f"not an integer: {env!r}") from None
    if cli_seed is not None:
        seed = cli_seed
    return seed


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        plan = parse_config(args.config)
        cmd = plan.command
        if cmd is not None and cmd != args.subcommand:
            raise ValidationError("command", f"config is for {cmd!r}, not {args.subcommand!r}")
        plan.seed = _resolve_seed(plan, args.seed)
        run = _Run(plan, args.out, args.subcommand)
        if args.subcommand == "mc":
            return cmd_mc(plan, run, workers=args.workers)
        return _HANDLERS[args.subcommand](plan, run)
    except BDPError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: bdp.{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
