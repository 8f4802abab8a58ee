"""Experiment grid: generators x seeds x algorithms x epsilons, compared to the oracle."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .._parallel import pmap
from ..centered import CenteredInstance
from ..errors import Infeasible, InvariantViolation, RefusedScale, StructuralError
from ..fpt import solve_ckm, solve_nonuniform_centered, solve_uniform_centered
from ..instance import Instance, Solution, cost
from ..io import loads
from ..oracle import exact_ckm
from ..tree import solve_logk, solve_tree_centered
from .generators import gen_centered_instance, gen_random_instance

ALGORITHMS = ("fpt", "fpt-uniform", "tree", "oracle")


def run_solver(problem: Instance | CenteredInstance, algorithm: str, k: int | None = None,
               epsilon: float = 0.5, samples: int = 8, seed: int = 0,
               allow_large: bool = False) -> Solution:
    """Dispatch one solve.  Centered inputs are solved (and costed) in their centered metric."""
    if algorithm not in ALGORITHMS:
        raise StructuralError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    t0 = time.perf_counter()
    if isinstance(problem, CenteredInstance):
        inst = problem.base
        k = inst.k if k is None else k
        if algorithm == "fpt":
            sol = solve_nonuniform_centered(problem, k, epsilon)
        elif algorithm == "fpt-uniform":
            sol = solve_uniform_centered(problem, k)
        elif algorithm == "tree":
            sol = solve_tree_centered(problem, k, samples, seed)
        else:
            sol = exact_ckm(problem.as_instance(), k, allow_large)
        sol.stats.setdefault("algorithm", algorithm)
        sol.stats["input"] = "centered"
    else:
        inst = problem
        k = inst.k if k is None else k
        if algorithm == "fpt":
            sol = solve_ckm(inst, k, epsilon)
        elif algorithm == "fpt-uniform":
            if not inst.is_uniform:
                raise StructuralError("fpt-uniform needs equal capacities")
            sol = solve_ckm(inst, k, epsilon, uniform=True)
        elif algorithm == "tree":
            sol = solve_logk(inst, k, samples, seed)
        else:
            sol = exact_ckm(inst, k, allow_large)
    bad = sol.assignment.violations(inst, min(k, inst.n_facilities))
    if bad:
        raise InvariantViolation("; ".join(bad))
    sol.stats["total_wall_time_s"] = time.perf_counter() - t0
    return sol


# --- configuration ---

@dataclass(frozen=True)
class GeneratorSpec:
    name: str
    kind: str  # "random" or "centered"
    n_f: int
    n_c: int
    k: int
    cap_range: tuple[int, int] | None = None
    ell: int = 2

    def build(self, seed: int) -> Instance | CenteredInstance:
        if self.kind == "random":
            return gen_random_instance(self.n_f, self.n_c, self.k, self.cap_range, seed)
        return gen_centered_instance(self.n_f, self.n_c, self.k, self.ell, self.cap_range, seed)


@dataclass(frozen=True)
class ExperimentConfig:
    generators: tuple[GeneratorSpec, ...]
    seeds: tuple[int, ...]
    algorithms: tuple[str, ...]
    epsilons: tuple[float, ...] = (0.5,)
    samples: int = 8
    oracle: bool = True


def _expect(cond: bool, where: str, what: str):
    if not cond:
        raise StructuralError(f"config field {where}: {what}")


def _int(val, where: str, minimum: int) -> int:
    _expect(isinstance(val, int) and not isinstance(val, bool) and val >= minimum,
            where, f"expected an integer >= {minimum}, got {val!r}")
    return val


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a config object; errors name the offending field."""
    for key in ("generators", "seeds", "algorithms"):
        _expect(key in data, key, "missing")
    gens = data["generators"]
    _expect(isinstance(gens, list), "generators", "expected a list")
    specs = []
    for i, g in enumerate(gens):
        where = f"generators[{i}]"
        _expect(isinstance(g, dict), where, "expected an object")
        kind = g.get("kind", "random")
        _expect(kind in ("random", "centered"), f"{where}.kind", f"unknown kind {kind!r}")
        vals = {key: _int(g.get(key), f"{where}.{key}", 1) for key in ("n_f", "n_c", "k")}
        cap = g.get("cap_range")
        if cap is not None:
            _expect(isinstance(cap, list) and len(cap) == 2, f"{where}.cap_range", "expected [lo, hi]")
            cap = (_int(cap[0], f"{where}.cap_range[0]", 0), _int(cap[1], f"{where}.cap_range[1]", 0))
        ell = _int(g.get("ell", 2), f"{where}.ell", 1)
        specs.append(GeneratorSpec(str(g.get("name", f"g{i}")), kind, cap_range=cap, ell=ell, **vals))

    seeds = data["seeds"]
    if isinstance(seeds, dict):
        start = _int(seeds.get("start", 0), "seeds.start", 0)
        seeds = list(range(start, start + _int(seeds.get("count"), "seeds.count", 0)))
    _expect(isinstance(seeds, list), "seeds", "expected a list or {start, count}")
    seeds = tuple(_int(s, f"seeds[{i}]", 0) for i, s in enumerate(seeds))

    algs = data["algorithms"]
    _expect(isinstance(algs, list), "algorithms", "expected a list")
    for i, a in enumerate(algs):
        _expect(a in ALGORITHMS, f"algorithms[{i}]", f"unknown algorithm {a!r}")

    eps = data.get("epsilons", [0.5])
    _expect(isinstance(eps, list) and eps, "epsilons", "expected a nonempty list")
    for i, e in enumerate(eps):
        _expect(isinstance(e, (int, float)) and not isinstance(e, bool) and e > 0,
                f"epsilons[{i}]", f"expected a positive number, got {e!r}")
    oracle = data.get("oracle", True)
    _expect(isinstance(oracle, bool), "oracle", "expected true or false")
    return ExperimentConfig(tuple(specs), seeds, tuple(algs), tuple(float(e) for e in eps),
                            _int(data.get("samples", 8), "samples", 1), oracle)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise StructuralError(f"cannot read {path}: {e.strerror}") from None
    return parse_config(loads(text, str(path)))


# --- report ---

@dataclass
class Record:
    instance_id: str
    algorithm: str
    epsilon: float
    seed: int
    status: str  # ok | infeasible | refused | invalid
    cost: float | None = None
    oracle_cost: float | None = None
    ratio: float | None = None
    wall_time_s: float = 0.0
    stats: dict[str, Any] = field(default_factory=dict)
    message: str = ""

    def key(self):
        return (self.instance_id, self.algorithm, self.epsilon)


def ratio(c: float, opt: float) -> float:
    if opt > 0:
        return c / opt
    return 1.0 if c <= 1e-9 else math.inf


@dataclass
class ExperimentReport:
    records: list[Record]

    def max_ratio(self, algorithm: str | None = None) -> float | None:
        rs = [r.ratio for r in self.records
              if r.ratio is not None and (algorithm is None or r.algorithm == algorithm)]
        return max(rs) if rs else None

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r), sort_keys=True, default=str) + "\n" for r in self.records)

    def to_table(self) -> str:
        head = f"{'instance':<20} {'algorithm':<12} {'eps':>5} {'status':<10} {'cost':>12} {'oracle':>12} {'ratio':>8} {'time_s':>8}"
        lines = [head, "-" * len(head)]

        def fmt(x, spec):
            return "-" if x is None else format(x, spec)

        for r in self.records:
            lines.append(f"{r.instance_id:<20} {r.algorithm:<12} {r.epsilon:>5g} {r.status:<10} "
                         f"{fmt(r.cost, '12.4f')} {fmt(r.oracle_cost, '12.4f')} "
                         f"{fmt(r.ratio, '8.4f')} {r.wall_time_s:>8.3f}")
        return "\n".join(lines) + "\n"


def _run_one(task) -> Record:
    inst_id, problem, algorithm, eps, samples, seed = task
    t0 = time.perf_counter()
    rec = Record(inst_id, algorithm, eps, seed, "ok")
    try:
        sol = run_solver(problem, algorithm, epsilon=eps, samples=samples, seed=seed)
        base = problem.base if isinstance(problem, CenteredInstance) else problem
        d = problem.d_ell if isinstance(problem, CenteredInstance) else base.metric
        # trust the recomputed cost, not the solver's own figure
        rec.cost = cost(sol.assignment, d)
        rec.stats = {k: v for k, v in sol.stats.items()}
    except Infeasible as e:
        rec.status, rec.message = "infeasible", str(e)
    except RefusedScale as e:
        rec.status, rec.message = "refused", str(e)
    except StructuralError as e:
        # e.g. the uniform solver on mixed capacities; one bad cell must not sink the grid
        rec.status, rec.message = "invalid", str(e)
    rec.wall_time_s = time.perf_counter() - t0
    return rec


def run_experiment(config: ExperimentConfig | dict | str | Path) -> ExperimentReport:
    """Run the cross product; Infeasible and RefusedScale outcomes are recorded, not raised."""
    if isinstance(config, dict):
        config = parse_config(config)
    elif not isinstance(config, ExperimentConfig):
        config = load_config(config)
    problems = []
    for g in config.generators:
        for s in config.seeds:
            problems.append((f"{g.name}/{s}", g.build(s), s))
    tasks = [(iid, p, a, e, config.samples, s)
             for iid, p, s in problems for a in config.algorithms for e in config.epsilons]
    records = pmap(_run_one, tasks)

    if config.oracle and config.algorithms:
        oracle_tasks = [(iid, p, "oracle", 0.0, config.samples, s) for iid, p, s in problems]
        opt = {r.instance_id: r for r in pmap(_run_one, oracle_tasks)}
        for r in records:
            o = opt[r.instance_id]
            if o.status == "ok":
                r.oracle_cost = o.cost
                if r.status == "ok":
                    r.ratio = ratio(r.cost, o.cost)
    records.sort(key=Record.key)
    return ExperimentReport(records)
