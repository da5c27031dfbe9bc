"""Power structures over k-tuples of the base domain, the flattening of
bounded-pathwidth instances into path instances over the power domain, and
the end-to-end decision pipeline.

Elements of the power domain are encoded as mixed-radix ranks of their
k-tuples, so they fit the plain integer domain convention."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional, Sequence

from .algebra import (HmChain, OperationTable, Relation, RelationalStructure,
                      rank_tuple, unrank_tuple)
from .instances import (CspInstance, PathDecomposition, PathInstance,
                        SatVerdict, Solution, brute_force_solutions,
                        check_path_decomposition, induced_subinstance)
from .pathsolver import solve_path


@dataclass(frozen=True)
class BubbleStructure:
    """The k-th power of a base structure.  Unary relations (subsets of the
    power domain definable by conjunctions of base relations) and the
    coordinate-equality binary relations are realized on demand."""

    base: RelationalStructure
    k: int

    @property
    def domain_size(self) -> int:
        return self.base.domain_size ** self.k

    def encode(self, t: Sequence[int]) -> int:
        if len(t) != self.k:
            raise ValueError("tuple length must be k")
        return rank_tuple(t, self.base.domain_size)

    def decode(self, e: int) -> tuple:
        return unrank_tuple(e, self.base.domain_size, self.k)

    def as_structure(self) -> RelationalStructure:
        return RelationalStructure(self.domain_size, {})

    def equality_relation(self, index_pairs) -> Relation:
        """Pairs of power elements agreeing on the given coordinate pairs:
        (a, b) present iff a_i = b_j for every (i, j) listed (0-based)."""
        pairs = set()
        d = self.base.domain_size
        for a in product(range(d), repeat=self.k):
            for b in product(range(d), repeat=self.k):
                if all(a[i] == b[j] for i, j in index_pairs):
                    pairs.add((self.encode(a), self.encode(b)))
        return Relation.of(2, pairs)

    def lift_chain(self, hm: HmChain) -> HmChain:
        """Apply each ternary term coordinatewise on k-tuples."""
        d = self.base.domain_size

        def lift(term: OperationTable) -> OperationTable:
            def fn(x, y, z):
                tx, ty, tz = (unrank_tuple(v, d, self.k) for v in (x, y, z))
                return rank_tuple(
                    tuple(term.apply(a, b, c) for a, b, c in zip(tx, ty, tz)), d)
            return OperationTable.from_function(self.domain_size, 3, fn)

        return HmChain(hm.n, tuple(lift(t) for t in hm.terms))


@dataclass(frozen=True)
class BagTuple:
    """A bag listed as a k-tuple: elements in increasing order, with the
    maximal element repeated to pad short bags."""

    variables: tuple

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))

    def __len__(self):
        return len(self.variables)


def bag_tuple(bag, k: int, order: Sequence) -> BagTuple:
    pos = {v: i for i, v in enumerate(order)}
    listed = sorted(bag, key=lambda v: pos[v])
    if len(listed) > k:
        raise ValueError(f"bag {set(bag)} larger than k={k}")
    listed += [listed[-1]] * (k - len(listed))
    return BagTuple(tuple(listed))


def normalize_bags(J: CspInstance, D: PathDecomposition) -> PathDecomposition:
    """Drop bags contained in a neighbor; the result has pairwise distinct,
    neighbor-incomparable bags and is still a valid decomposition."""
    if not check_path_decomposition(J, D):
        raise ValueError("invalid path decomposition")
    bags = list(D.bags)
    changed = True
    while changed:
        changed = False
        for i in range(len(bags) - 1):
            if bags[i] <= bags[i + 1]:
                del bags[i]
                changed = True
                break
            if bags[i + 1] < bags[i]:
                del bags[i + 1]
                changed = True
                break
    out = PathDecomposition(tuple(bags), D.width)
    assert check_path_decomposition(J, out)
    return out


def pathwidth_to_path(J: CspInstance, D: PathDecomposition,
                      order: Optional[Sequence] = None):
    """Flatten a decomposed instance into a path instance over the k-th
    power domain, k = width + 1.  Each position's unary relation lists the
    encoded bag solutions; consecutive positions are tied by the
    coordinate-equality relation of their shared variables.

    Returns (path instance, BubbleStructure, list of BagTuple)."""
    D = normalize_bags(J, D)
    k = D.width + 1
    bub = BubbleStructure(J.structure, k)
    if order is None:
        order = J.variables
    tuples = [bag_tuple(bag, k, order) for bag in D.bags]
    if len(set(t.variables for t in tuples)) != len(tuples):
        raise ValueError("bag tuples are not pairwise distinct")
    unary = []
    for bag, chi in zip(D.bags, tuples):
        sub = induced_subinstance(J, bag)
        sols = brute_force_solutions(sub)
        encoded = {(bub.encode(tuple(s(v) for v in chi.variables)),)
                   for s in sols}
        unary.append(Relation.of(1, encoded))
    binary = []
    for chi_a, chi_b in zip(tuples, tuples[1:]):
        index_pairs = {(i, j)
                       for i, u in enumerate(chi_a.variables)
                       for j, w in enumerate(chi_b.variables) if u == w}
        binary.append(bub.equality_relation(index_pairs))
    K = PathInstance(bub.as_structure(), tuple(unary), tuple(binary))
    return K, bub, tuples


def lift_solution(K_solution: Solution, bag_tuples: Sequence,
                  bub: BubbleStructure, J: CspInstance) -> Solution:
    """Read each original variable's value off any bag containing it; the
    coordinate-equality constraints force all reads to agree."""
    t = {}
    for i, chi in enumerate(bag_tuples, start=1):
        coords = bub.decode(K_solution(i))
        for j, v in enumerate(chi.variables):
            if v in t and t[v] != coords[j]:
                raise ValueError(f"inconsistent coordinate reads for {v!r}")
            t[v] = coords[j]
    for v in J.variables:
        if v not in t:
            t[v] = 0  # unconstrained variable outside every bag
    return Solution(t)


def width_bound(k: int, s: int) -> int:
    """Width sufficient for the flattening reduction: k * (s + 2)."""
    if k < 1 or s < 1:
        raise ValueError("positive inputs required")
    return k * (s + 2)


def width_bound_composed(k: int, s: int) -> int:
    """The alternative composed form (k + 2) * s; both forms are reported
    because the published bounds disagree."""
    if k < 1 or s < 1:
        raise ValueError("positive inputs required")
    return (k + 2) * s


def decide_csp(S: RelationalStructure, hm: HmChain, J: CspInstance,
               D: PathDecomposition,
               direct_len: Optional[int] = None) -> SatVerdict:
    """Flatten along the decomposition, decide the resulting path instance
    over the power domain, and lift the witness on success."""
    K, bub, tuples = pathwidth_to_path(J, D)
    hm_k = bub.lift_chain(hm)
    verdict = solve_path(bub.as_structure(), hm_k, K, direct_len=direct_len)
    if not verdict.satisfiable:
        return SatVerdict(False, witness=None, trace=verdict.trace,
                          notes=verdict.notes)
    lifted = lift_solution(verdict.witness, tuples, bub, J)
    return SatVerdict(True, witness=lifted, trace=None, notes=verdict.notes)
