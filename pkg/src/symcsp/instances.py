"""CSP instances, a brute-force oracle, path instances, and path
decompositions."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Optional, Sequence

from .algebra import BudgetExceededError, Relation, RelationalStructure


@dataclass(frozen=True)
class Constraint:
    scope: tuple
    relation: str

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(self.scope))


@dataclass(frozen=True)
class CspInstance:
    """Variables plus constraints (scope, relation name) over a structure."""

    structure: RelationalStructure
    variables: tuple
    constraints: tuple

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(
            self, "constraints",
            tuple(c if isinstance(c, Constraint) else Constraint(*c)
                  for c in self.constraints))

    @property
    def var_index(self) -> dict:
        return {v: i for i, v in enumerate(self.variables)}

    def constraint_relations(self) -> list:
        return [(c.scope, self.structure.relation(c.relation)) for c in self.constraints]


@dataclass(frozen=True)
class Solution:
    assignment: dict

    def __call__(self, v):
        return self.assignment[v]

    def restrict(self, vars_subset) -> "Solution":
        return Solution({v: self.assignment[v] for v in vars_subset})

    def as_vector(self, variables) -> tuple:
        return tuple(self.assignment[v] for v in variables)


def solution_satisfies(sol: Solution, inst: CspInstance) -> bool:
    for scope, rel in inst.constraint_relations():
        if tuple(sol.assignment[v] for v in scope) not in rel:
            return False
    return True


def validate_instance(inst: CspInstance) -> list:
    """Well-formedness report: empty list iff the instance is valid."""
    report = []
    vset = set(inst.variables)
    for c in inst.constraints:
        if c.relation not in inst.structure.relations:
            report.append(f"unknown relation {c.relation!r} in constraint {c.scope}")
            continue
        rel = inst.structure.relations[c.relation]
        if len(c.scope) != rel.arity:
            report.append(
                f"scope {c.scope} has length {len(c.scope)}, "
                f"but {c.relation} has arity {rel.arity}")
        for v in c.scope:
            if v not in vset:
                report.append(f"constraint {c.scope} uses undeclared variable {v!r}")
    return report


def brute_force_solutions(inst: CspInstance, budget: int = 2 ** 24) -> list:
    """All solutions, in lexicographic order of the assignment vector over
    the instance's variable order."""
    d = inst.structure.domain_size
    n = len(inst.variables)
    if d ** n > budget:
        raise BudgetExceededError(f"{d}^{n} assignments exceeds budget {budget}")
    idx = inst.var_index
    grounded = [([idx[v] for v in scope], rel)
                for scope, rel in inst.constraint_relations()]
    out = []
    for vec in product(range(d), repeat=n):
        if all(tuple(vec[i] for i in pos) in rel for pos, rel in grounded):
            out.append(Solution(dict(zip(inst.variables, vec))))
    return out


def is_satisfiable(inst: CspInstance, budget: int = 2 ** 24) -> bool:
    for _ in _iter_solutions(inst, budget):
        return True
    return False


def _iter_solutions(inst: CspInstance, budget: int = 2 ** 24):
    d = inst.structure.domain_size
    n = len(inst.variables)
    if d ** n > budget:
        raise BudgetExceededError(f"{d}^{n} assignments exceeds budget {budget}")
    idx = inst.var_index
    grounded = [([idx[v] for v in scope], rel)
                for scope, rel in inst.constraint_relations()]
    for vec in product(range(d), repeat=n):
        if all(tuple(vec[i] for i in pos) in rel for pos, rel in grounded):
            yield Solution(dict(zip(inst.variables, vec)))


def induced_subinstance(inst: CspInstance, U: Iterable) -> CspInstance:
    uset = set(U)
    if not uset <= set(inst.variables):
        raise ValueError("subinstance variables must be a subset")
    keep_vars = tuple(v for v in inst.variables if v in uset)
    keep = tuple(c for c in inst.constraints if set(c.scope) <= uset)
    return CspInstance(inst.structure, keep_vars, keep)


@dataclass(frozen=True)
class PathInstance:
    """A chain instance: unary relation B_i at each index 1..length and one
    binary relation between consecutive indices.  The binary relation may
    contain tuples outside B_i x B_{i+1}."""

    structure: RelationalStructure
    unary: tuple
    binary: tuple

    def __post_init__(self):
        object.__setattr__(self, "unary", tuple(self.unary))
        object.__setattr__(self, "binary", tuple(self.binary))
        if len(self.binary) != max(len(self.unary) - 1, 0):
            raise ValueError("need exactly one binary relation per consecutive pair")
        for rel in self.unary:
            if rel.arity != 1:
                raise ValueError("unary slot holds a non-unary relation")
        for rel in self.binary:
            if rel.arity != 2:
                raise ValueError("binary slot holds a non-binary relation")

    @property
    def length(self) -> int:
        return len(self.unary)

    def unary_at(self, i: int) -> Relation:
        return self.unary[i - 1]

    def binary_at(self, i: int) -> Relation:
        """Relation between indices i and i+1."""
        return self.binary[i - 1]

    def unary_set(self, i: int) -> frozenset:
        return frozenset(t[0] for t in self.unary[i - 1].tuples)

    def to_csp(self) -> CspInstance:
        """Materialize as a CspInstance with variables 1..length and fresh
        relation names U1..Uℓ, E1..E(ℓ-1)."""
        rels = dict(self.structure.relations)
        constraints = []
        for i, rel in enumerate(self.unary, start=1):
            rels[f"U{i}"] = rel
            constraints.append(Constraint((i,), f"U{i}"))
        for i, rel in enumerate(self.binary, start=1):
            rels[f"E{i}"] = rel
            constraints.append(Constraint((i, i + 1), f"E{i}"))
        struct = RelationalStructure(self.structure.domain_size, rels)
        return CspInstance(struct, tuple(range(1, self.length + 1)), constraints)


def path_solutions(I: PathInstance, budget: int = 2 ** 24) -> list:
    """All solutions of a path instance as dicts index -> value, in
    lexicographic vector order, via left-to-right dynamic programming."""
    ell = I.length
    if ell == 0:
        return []
    d = I.structure.domain_size
    if d ** ell > budget:
        raise BudgetExceededError(f"{d}^{ell} assignments exceeds budget {budget}")
    sols = []

    def rec(i: int, prefix: list):
        if i > ell:
            sols.append(Solution(dict(zip(range(1, ell + 1), prefix))))
            return
        for a in sorted(I.unary_set(i)):
            if i > 1 and (prefix[-1], a) not in I.binary_at(i - 1):
                continue
            rec(i + 1, prefix + [a])

    rec(1, [])
    return sols


def path_satisfiable(I: PathInstance) -> bool:
    """Decide by forward propagation of reachable value sets."""
    if I.length == 0:
        return False
    cur = I.unary_set(1)
    for i in range(1, I.length):
        nxt = I.unary_set(i + 1)
        cur = {b for (a, b) in I.binary_at(i).tuples if a in cur and b in nxt}
        if not cur:
            return False
    return bool(cur)


def path_restrict(I: PathInstance, a: int, b: int) -> PathInstance:
    if not (1 <= a <= b <= I.length):
        raise ValueError(f"window [{a},{b}] out of range for length {I.length}")
    return PathInstance(I.structure,
                        I.unary[a - 1:b],
                        I.binary[a - 1:b - 1])


@dataclass(frozen=True)
class PathDecomposition:
    bags: tuple
    width: int

    def __post_init__(self):
        object.__setattr__(self, "bags", tuple(frozenset(b) for b in self.bags))


def check_path_decomposition(inst: CspInstance, D: PathDecomposition) -> bool:
    for bag in D.bags:
        if len(bag) > D.width + 1:
            return False
    # convexity: each variable's bag indices form an interval
    for v in inst.variables:
        idxs = [i for i, bag in enumerate(D.bags) if v in bag]
        if idxs and idxs != list(range(idxs[0], idxs[-1] + 1)):
            return False
    for c in inst.constraints:
        if not any(set(c.scope) <= bag for bag in D.bags):
            return False
    return True


@dataclass(frozen=True)
class SatVerdict:
    satisfiable: bool
    witness: Optional[Solution] = None
    trace: Optional[object] = None
    notes: tuple = ()


def microstructure_dot(inst: CspInstance) -> str:
    """DOT text: a cluster per variable holding its admissible values and an
    edge per tuple of each binary constraint."""
    d = inst.structure.domain_size
    allowed = {v: set(range(d)) for v in inst.variables}
    binaries = []
    for scope, rel in inst.constraint_relations():
        if rel.arity == 1:
            allowed[scope[0]] &= {t[0] for t in rel.tuples}
        elif rel.arity == 2:
            binaries.append((scope, rel))
        else:
            raise ValueError("microstructure requires arity <= 2")
    lines = ["digraph microstructure {"]
    for ci, v in enumerate(inst.variables):
        lines.append(f'  subgraph cluster_{ci} {{ label="{v}";')
        for a in sorted(allowed[v]):
            lines.append(f'    "n_{v}_{a}" [label="{a}"];')
        lines.append("  }")
    for (u, w), rel in binaries:
        for (a, b) in rel.sorted_tuples():
            lines.append(f'  "n_{u}_{a}" -> "n_{w}_{b}";')
    lines.append("}")
    return "\n".join(lines)
