"""Random generators with certified decompositions, the experiment harness,
and report emission.  All randomness flows from an explicit 64-bit seed."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Optional, Sequence

from .algebra import BudgetExceededError, HmChain, Relation, RelationalStructure
from .bubble import decide_csp
from .instances import (Constraint, CspInstance, PathDecomposition,
                        PathInstance, brute_force_solutions,
                        check_path_decomposition, path_solutions)
from .pathsolver import solve_path
from . import fileio


def close_under_chain(rel: Relation, hm: HmChain) -> Relation:
    """Smallest superset of the relation closed under applying each term
    rowwise to triples of its tuples."""
    tuples = set(rel.tuples)
    changed = True
    while changed:
        changed = False
        rows = sorted(tuples)
        for term in hm.terms:
            for a, b, c in product(rows, repeat=3):
                new = tuple(term.apply(x, y, z) for x, y, z in zip(a, b, c))
                if new not in tuples:
                    tuples.add(new)
                    changed = True
    return Relation.of(rel.arity, tuples)


def _random_relation(rng: random.Random, arity: int, domain_size: int,
                     density: float) -> Relation:
    tuples = {t for t in product(range(domain_size), repeat=arity)
              if rng.random() < density}
    return Relation.of(arity, tuples)


def gen_random_path_instance(S: RelationalStructure, length: int,
                             density: float, seed: int,
                             hm: Optional[HmChain] = None,
                             nonempty_unary: bool = True) -> PathInstance:
    """Deterministic random path instance.  With a chain supplied, every
    relation is closed under the chain's terms after sampling."""
    rng = random.Random(seed)
    d = S.domain_size
    unary = []
    for _ in range(length):
        rel = _random_relation(rng, 1, d, density)
        if nonempty_unary and rel.is_empty:
            rel = Relation.of(1, [(rng.randrange(d),)])
        if hm is not None and not rel.is_empty:
            rel = close_under_chain(rel, hm)
        unary.append(rel)
    binary = []
    for _ in range(max(length - 1, 0)):
        rel = _random_relation(rng, 2, d, density)
        if hm is not None and not rel.is_empty:
            rel = close_under_chain(rel, hm)
        binary.append(rel)
    return PathInstance(S, tuple(unary), tuple(binary))


def gen_random_pw_instance(S: RelationalStructure, width: int, bag_count: int,
                           seed: int, density: float = 0.7):
    """A chain-of-bags instance together with its certifying decomposition:
    consecutive bags overlap in one variable, so convexity holds by
    construction."""
    rng = random.Random(seed)
    binary_names = [n for n, r in S.relations.items() if r.arity == 2]
    unary_names = [n for n, r in S.relations.items() if r.arity == 1]
    bags = []
    start = 1
    for _ in range(bag_count):
        bag = tuple(range(start, start + width + 1))
        bags.append(frozenset(bag))
        start += width  # overlap of exactly one variable
    variables = tuple(sorted(set().union(*bags)))
    constraints = []
    for bag in bags:
        vs = sorted(bag)
        for u, w in product(vs, vs):
            if u < w and binary_names and rng.random() < density:
                constraints.append(Constraint((u, w), rng.choice(binary_names)))
        for u in vs:
            if unary_names and rng.random() < density / 2:
                constraints.append(Constraint((u,), rng.choice(unary_names)))
    J = CspInstance(S, variables, tuple(constraints))
    D = PathDecomposition(tuple(bags), width)
    assert check_path_decomposition(J, D)
    return J, D


@dataclass(frozen=True)
class ExperimentConfig:
    structure: str
    solvers: tuple = ("oracle", "path")
    trials: int = 100
    length_min: int = 2
    length_max: int = 8
    density: float = 0.6
    seed: int = 0
    budget: int = 2 ** 24
    hm_n_max: int = 2
    trace_dir: Optional[str] = None


@dataclass
class Report:
    config: ExperimentConfig
    verdicts: list = field(default_factory=list)  # per trial: dict solver->bool
    agreement: dict = field(default_factory=dict)  # (solver, solver) -> count
    timings: dict = field(default_factory=dict)  # solver -> seconds
    trace_refs: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def agreement_matrix(self) -> dict:
        return dict(self.agreement)

    def canonical_text(self) -> str:
        """Deterministic report body; timings are excluded so that repeated
        seeded runs are byte-identical."""
        lines = [f"structure: {self.config.structure}",
                 f"solvers: {','.join(self.config.solvers)}",
                 f"trials: {len(self.verdicts)}",
                 f"seed: {self.config.seed}"]
        for t, verdict in enumerate(self.verdicts):
            row = " ".join(f"{s}={'SAT' if verdict[s] else 'UNSAT'}"
                           for s in self.config.solvers if s in verdict)
            lines.append(f"trial {t}: {row}")
        for (a, b), count in sorted(self.agreement.items()):
            lines.append(f"agree {a}/{b}: {count}/{len(self.verdicts)}")
        for ref in self.trace_refs:
            lines.append(f"trace: {ref}")
        for err in self.errors:
            lines.append(f"error: {err}")
        return "\n".join(lines) + "\n"

    def timing_text(self) -> str:
        return "\n".join(f"{s}: {t:.3f}s" for s, t in sorted(self.timings.items()))


def run_experiment(cfg: ExperimentConfig) -> Report:
    from .algebra import find_hm_chain
    S = fileio.resolve_structure(cfg.structure)
    hm = find_hm_chain(S, cfg.hm_n_max)
    report = Report(cfg)
    timings = {s: 0.0 for s in cfg.solvers}
    for trial in range(cfg.trials):
        length = cfg.length_min + (trial % (cfg.length_max - cfg.length_min + 1))
        I = gen_random_path_instance(S, length, cfg.density,
                                     seed=cfg.seed * 1_000_003 + trial, hm=hm)
        verdict = {}
        for solver in cfg.solvers:
            t0 = time.perf_counter()
            try:
                if solver == "oracle":
                    verdict[solver] = bool(path_solutions(I, cfg.budget))
                elif solver == "path":
                    if hm is None:
                        raise ValueError("no chain found; path solver needs one")
                    v = solve_path(S, hm, I)
                    verdict[solver] = v.satisfiable
                    if not v.satisfiable and v.trace is not None \
                            and cfg.trace_dir is not None:
                        text = fileio.dump_trace(v.trace)
                        name = fileio.content_hash(text) + ".json"
                        path = Path(cfg.trace_dir) / name
                        path.write_text(text)
                        report.trace_refs.append(name)
                else:
                    raise ValueError(f"unknown solver {solver!r}")
            except BudgetExceededError as exc:
                report.errors.append(f"trial {trial} {solver}: {exc}")
            finally:
                timings[solver] += time.perf_counter() - t0
        report.verdicts.append(verdict)
        for i, a in enumerate(cfg.solvers):
            for b in cfg.solvers[i + 1:]:
                if a in verdict and b in verdict:
                    key = (a, b)
                    report.agreement.setdefault(key, 0)
                    if verdict[a] == verdict[b]:
                        report.agreement[key] += 1
    report.timings = timings
    return report
