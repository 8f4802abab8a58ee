"""Command-line interface.

Exit codes: 0 success, 2 infeasible, 3 invalid input, 4 refused scale.
"""
from __future__ import annotations

import argparse
import json
import sys

from .centered import CenteredInstance, build_centered
from .errors import Infeasible, RefusedScale, StructuralError
from .harness.experiment import ALGORITHMS, load_config, run_experiment, run_solver
from .harness.generators import gen_centered_instance, gen_dominating_set_reduction, gen_random_instance, graph_family
from .instance import Instance, validate_instance
from .io import _num, centered_to_dict, dumps_instance, read_instance, write_assignment, _dumps
from .transport import assign_open
from .uncap import bicriteria_greedy, local_search_kmedian

EXIT_OK, EXIT_INFEASIBLE, EXIT_INVALID, EXIT_REFUSED = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _stats_line(record: dict):
    print(json.dumps(record, sort_keys=True, default=_num))


def _base(problem) -> Instance:
    return problem.base if isinstance(problem, CenteredInstance) else problem


def _uncap(inst: Instance, mode: str, k: int, eps: float):
    if mode == "greedy":
        return bicriteria_greedy(inst, k, eps)
    return local_search_kmedian(inst, k)


# --- subcommands ---

def cmd_gen(a) -> int:
    if a.graph:
        edges, n = graph_family(a.graph, a.n, a.seed)
        text = dumps_instance(gen_dominating_set_reduction(edges, n, a.k).instance)
    elif a.ell:
        c = gen_centered_instance(a.n_f, a.n_c, a.k, a.ell, a.cap_range, a.seed)
        text = _dumps(centered_to_dict(c))
    else:
        text = dumps_instance(gen_random_instance(a.n_f, a.n_c, a.k, a.cap_range, a.seed))
    _emit(text, a.out)
    return EXIT_OK


def cmd_validate(a) -> int:
    problem = read_instance(a.instance)
    problems = validate_instance(_base(problem), triangle=a.triangle)
    if isinstance(problem, CenteredInstance):
        problems += [f"centered metric: {p}" for p in problem.d_ell.violations(triangle=a.triangle)]
    for p in problems:
        print(p)
    if problems:
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def cmd_center(a) -> int:
    inst = _base(read_instance(a.instance))
    k = inst.k if a.k is None else a.k
    seed = _uncap(inst, a.mode, k, a.epsilon)
    centered = build_centered(inst, seed)
    _emit(_dumps(centered_to_dict(centered)), a.out)
    if a.stats:
        _stats_line({"stage": "center", "ell": centered.ell, "uncap_cost": seed.cost,
                     "open": list(seed.open)})
    return EXIT_OK


def cmd_assign(a) -> int:
    problem = read_instance(a.instance)
    inst = _base(problem)
    try:
        opened = [int(x) for x in a.open.split(",") if x.strip()]
    except ValueError:
        raise StructuralError(f"--open must be a comma-separated index list, got {a.open!r}") from None
    for f in opened:
        if not 0 <= f < inst.n_facilities:
            raise StructuralError(f"--open lists {f}, not a facility index")
    metric = problem.d_ell if isinstance(problem, CenteredInstance) else None
    phi, c = assign_open(inst, opened, metric)
    _report(phi, inst, c, a.out)
    if a.stats:
        _stats_line({"stage": "assign", "open": sorted(opened), "cost": c})
    return EXIT_OK


def cmd_uncap(a) -> int:
    inst = _base(read_instance(a.instance))
    k = inst.k if a.k is None else a.k
    sol = _uncap(inst, a.mode, k, a.epsilon)
    print(json.dumps({"open": list(sol.open), "psi": [sol.psi[c] for c in inst.clients],
                      "cost": _num(sol.cost)}))
    if a.stats:
        _stats_line({"stage": "uncap", "mode": a.mode, "ell": len(sol.open),
                     "ell_budget": sol.ell_budget, "cost": sol.cost, **sol.stats})
    return EXIT_OK


def _report(phi, inst, c, out):
    if out:
        write_assignment(phi, inst, out, c)
    else:
        print(json.dumps({"phi": phi.as_list(inst.clients), "open": sorted(phi.open), "cost": _num(c)}))


def cmd_solve(a) -> int:
    problem = read_instance(a.instance)
    inst = _base(problem)
    sol = run_solver(problem, a.algorithm, a.k, a.epsilon, a.samples, a.seed, a.allow_large)
    _report(sol.assignment, inst, sol.cost, a.out)
    if a.stats:
        _stats_line({"stage": "solve", "algorithm": a.algorithm, "seed": a.seed,
                     "epsilon": a.epsilon, "k": inst.k if a.k is None else a.k,
                     "open": sorted(sol.assignment.open), **sol.stats, "cost": sol.cost})
    return EXIT_OK


def cmd_bench(a) -> int:
    report = run_experiment(load_config(a.config))
    sys.stdout.write(report.to_table())
    if a.jsonl:
        with open(a.jsonl, "w") as fh:
            fh.write(report.to_jsonl())
    if a.stats:
        sys.stdout.write(report.to_jsonl())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ckm", description="Capacitated k-median solvers and experiment harness.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--n-f", type=int, default=5)
    g.add_argument("--n-c", type=int, default=6)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--cap-range", type=int, nargs=2, metavar=("LO", "HI"))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--ell", type=int, help="emit a centered instance with this many centers")
    g.add_argument("--graph", choices=["path", "cycle", "star", "random"],
                   help="emit the k-median instance of a graph family (dominating-set reduction)")
    g.add_argument("--n", type=int, default=6, help="graph size for --graph")
    g.add_argument("--out")
    g.set_defaults(fn=cmd_gen)

    v = sub.add_parser("validate", help="check an instance file")
    v.add_argument("instance")
    v.add_argument("--triangle", action="store_true", help="also check the triangle inequality")
    v.set_defaults(fn=cmd_validate)

    c = sub.add_parser("center", help="emit the centered instance around an uncapacitated solution")
    c.add_argument("instance")
    c.add_argument("--mode", choices=["greedy", "local-search"], default="greedy")
    c.add_argument("--epsilon", type=float, default=0.5)
    c.add_argument("--k", type=int)
    c.add_argument("--out")
    c.add_argument("--stats", action="store_true")
    c.set_defaults(fn=cmd_center)

    s = sub.add_parser("assign", help="optimal assignment to a fixed open set")
    s.add_argument("instance")
    s.add_argument("--open", required=True, help="comma-separated facility indices")
    s.add_argument("--out")
    s.add_argument("--stats", action="store_true")
    s.set_defaults(fn=cmd_assign)

    u = sub.add_parser("uncap", help="uncapacitated k-median")
    u.add_argument("instance")
    u.add_argument("--mode", choices=["greedy", "local-search"], default="greedy")
    u.add_argument("--epsilon", type=float, default=0.5)
    u.add_argument("--k", type=int)
    u.add_argument("--stats", action="store_true")
    u.set_defaults(fn=cmd_uncap)

    so = sub.add_parser("solve", help="solve capacitated k-median")
    so.add_argument("instance")
    so.add_argument("--algorithm", choices=ALGORITHMS, default="fpt")
    so.add_argument("--epsilon", type=float, default=0.5)
    so.add_argument("--k", type=int)
    so.add_argument("--seed", type=int, default=0)
    so.add_argument("--samples", type=int, default=8)
    so.add_argument("--out")
    so.add_argument("--stats", action="store_true")
    so.add_argument("--allow-large", action="store_true", help="lift the exhaustive-search size guard")
    so.set_defaults(fn=cmd_solve)

    b = sub.add_parser("bench", help="run an experiment config against the oracle")
    b.add_argument("config")
    b.add_argument("--jsonl", help="also write machine-readable records here")
    b.add_argument("--stats", action="store_true", help="print the records after the table")
    b.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Infeasible as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except RefusedScale as e:
        print(f"refused: {e}", file=sys.stderr)
        return EXIT_REFUSED
    except StructuralError as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
