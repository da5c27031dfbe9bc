"""Path-instance machinery: forward sets, backward edges, braids and their
zigzag solutions, window reachability relations, the gap-compression
reduction, the shrinking recursion that decides path instances, and the
symbolic width bounds."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Iterable, Optional, Sequence

from .algebra import BudgetExceededError, HmChain, Relation, RelationalStructure, \
    check_preserves
from .canon import CanonAtom, CanonDerivation, CanonStep, conj_atoms, \
    stack_derivation
from .instances import PathInstance, SatVerdict, Solution, path_restrict, \
    path_solutions

log = logging.getLogger(__name__)


class ShrinkError(RuntimeError):
    """A window contained no index at which the local solution set shrinks."""


def path_atoms(I: PathInstance) -> list:
    """The constraints of a path instance as grounded atoms over 1..length."""
    atoms = [CanonAtom((i,), I.unary_at(i)) for i in range(1, I.length + 1)]
    atoms += [CanonAtom((i, i + 1), I.binary_at(i)) for i in range(1, I.length)]
    return atoms


# ---------------------------------------------------------------------------
# profiles

@dataclass(frozen=True)
class PathProfile:
    forward_sets: tuple  # C_1..C_ell as frozensets
    backward_edges: tuple  # (binary index i, (b, c))
    subdirect_flags: tuple  # per binary constraint


def forward_sets(I: PathInstance) -> list:
    cur = I.unary_set(1)
    out = [frozenset(cur)]
    for i in range(1, I.length):
        nxt = I.unary_set(i + 1)
        cur = {b for (a, b) in I.binary_at(i).tuples if a in cur and b in nxt}
        out.append(frozenset(cur))
    return out


def is_subdirect_at(I: PathInstance, i: int) -> bool:
    bi, bj = I.unary_set(i), I.unary_set(i + 1)
    if not bi or not bj:
        return False
    inside = {(a, b) for (a, b) in I.binary_at(i).tuples if a in bi and b in bj}
    return bi <= {a for a, _ in inside} and bj <= {b for _, b in inside}


def path_profile(I: PathInstance) -> PathProfile:
    C = forward_sets(I)
    backward = []
    for i in range(1, I.length):
        bi = I.unary_set(i)
        for (b, c) in sorted(I.binary_at(i).tuples):
            if b in bi - C[i - 1] and c in C[i]:
                backward.append((i, (b, c)))
    flags = tuple(is_subdirect_at(I, i) for i in range(1, I.length))
    return PathProfile(tuple(C), tuple(backward), flags)


# ---------------------------------------------------------------------------
# braids and zigzag gluing

@dataclass(frozen=True)
class Braid:
    solutions: tuple  # n+1 solutions
    indices: tuple  # i_1 < ... < i_n

    @property
    def n(self) -> int:
        return len(self.indices)


def braid_valid(braid: Braid, I: PathInstance) -> bool:
    sols, idx = braid.solutions, braid.indices
    n = len(idx)
    if len(sols) != n + 1:
        return False
    if list(idx) != sorted(set(idx)):
        return False
    for s in sols:
        vec = [s(i) for i in range(1, I.length + 1)]
        for i in range(1, I.length + 1):
            if vec[i - 1] not in I.unary_set(i):
                return False
        for i in range(1, I.length):
            if (vec[i - 1], vec[i]) not in I.binary_at(i):
                return False
    if n == 1:
        # the gluing below needs the two solutions to meet at the index
        return sols[0](idx[0]) == sols[1](idx[0])
    for k in range(1, n):
        if sols[k](idx[k - 1]) != sols[k + 1](idx[k - 1]):
            return False
        if sols[k - 1](idx[k]) != sols[k](idx[k]):
            return False
    return True


def find_braid(I: PathInstance, n: int,
               required_edges: Optional[Sequence] = None,
               budget: int = 2 ** 22) -> Optional[Braid]:
    """Lexicographically first braid over (index vector, solution vector),
    found by exhaustive search over solutions of I."""
    sols = path_solutions(I)
    if not sols:
        return None
    ell = I.length
    counter = [0]

    def tick():
        counter[0] += 1
        if counter[0] > budget:
            raise BudgetExceededError("braid search budget exceeded")

    def crossings_ok(chosen: list, idx: tuple) -> bool:
        m = len(chosen) - 1  # highest assigned index k
        if n == 1 and m == 1:
            if chosen[0](idx[0]) != chosen[1](idx[0]):
                return False
        for k in range(1, n):
            if k + 1 <= m and chosen[k](idx[k - 1]) != chosen[k + 1](idx[k - 1]):
                return False
            if k <= m and chosen[k - 1](idx[k]) != chosen[k](idx[k]):
                return False
        return True

    def edges_ok(chosen: list, idx: tuple) -> bool:
        if not required_edges:
            return True
        for k in range(1, n):
            lo, hi = idx[k - 1], idx[k]
            s = chosen[k]
            if not any(lo <= j < hi and (s(j), s(j + 1)) == tuple(e)
                       for j, e in required_edges):
                return False
        return True

    for idx in combinations(range(1, ell + 1), n):
        def dfs(chosen: list) -> Optional[list]:
            tick()
            if len(chosen) == n + 1:
                return chosen if edges_ok(chosen, idx) else None
            for s in sols:
                cand = chosen + [s]
                if crossings_ok(cand, idx):
                    found = dfs(cand)
                    if found is not None:
                        return found
            return None

        found = dfs([])
        if found is not None:
            return Braid(tuple(found), tuple(idx))
    return None


def braid_to_solution(I: PathInstance, braid: Braid, hm: HmChain) -> Solution:
    """Glue the braid's solutions into a single solution using the chain of
    terms: the k-th block is the pointwise image of three neighbors."""
    n = hm.n
    if len(braid.solutions) != n + 1:
        raise ValueError("braid size does not match the chain length")
    ell = I.length
    sols = braid.solutions
    r = [None] * (n + 1)
    r[0] = sols[0]
    r[n] = sols[n]
    for k in range(1, n):
        term = hm.terms[k]
        r[k] = Solution({i: term.apply(sols[k - 1](i), sols[k](i), sols[k + 1](i))
                         for i in range(1, ell + 1)})
    idx = (0,) + braid.indices + (ell,)
    for k in range(1, n + 1):
        if r[k - 1](idx[k]) != r[k](idx[k]):
            raise ValueError(
                f"gluing equality fails at index {idx[k]}: invalid braid or chain")
    t = {}
    for k in range(n + 1):
        for i in range(idx[k] + 1, idx[k + 1] + 1):
            t[i] = r[k](i)
    return Solution(t)


# ---------------------------------------------------------------------------
# window reachability

@dataclass(frozen=True)
class LambdaRelation:
    i: int
    j: int
    pairs: Relation


def _window_reach(I: PathInstance, i: int, j: int, start_level: int,
                  start_values: Iterable) -> dict:
    """Undirected reachability inside levels i..j of the microstructure;
    returns reachable values per level."""
    reach = {k: set() for k in range(i, j + 1)}
    queue = deque()
    for a in start_values:
        if a in I.unary_set(start_level):
            reach[start_level].add(a)
            queue.append((start_level, a))
    while queue:
        k, a = queue.popleft()
        if k + 1 <= j:
            nxt = I.unary_set(k + 1)
            for (x, y) in I.binary_at(k).tuples:
                if x == a and y in nxt and y not in reach[k + 1]:
                    reach[k + 1].add(y)
                    queue.append((k + 1, y))
        if k - 1 >= i:
            prv = I.unary_set(k - 1)
            for (x, y) in I.binary_at(k - 1).tuples:
                if y == a and x in prv and x not in reach[k - 1]:
                    reach[k - 1].add(x)
                    queue.append((k - 1, x))
    return reach


def lambda_relation(I: PathInstance, i: int, j: int) -> LambdaRelation:
    if not (1 <= i <= j <= I.length):
        raise ValueError("window out of range")
    pairs = set()
    for a in sorted(I.unary_set(i)):
        reach = _window_reach(I, i, j, i, {a})
        for b in sorted(reach[j]):
            pairs.add((a, b))
    return LambdaRelation(i, j, Relation.of(2, pairs))


def _rho_relation(I: PathInstance, i: int, j: int, k: int) -> Relation:
    """Pairs (a, b) with a at level i, b at level k, connected within levels
    i..j of the window's microstructure."""
    pairs = set()
    for a in I.unary_set(i):
        reach = _window_reach(I, i, j, i, {a})
        for b in reach[k]:
            pairs.add((a, b))
    return Relation.of(2, pairs)


def lambda_derivation(I: PathInstance, i: int, j: int) -> CanonDerivation:
    """Width-3 derivation of the window reachability relation on (i, j),
    walking one level at a time; each step and its mirror are consistent."""
    if not (1 <= i <= j <= I.length):
        raise ValueError("window out of range")
    steps = [CanonStep(
        head=CanonAtom((i, i), Relation.of(
            2, {(a, a) for a in I.unary_set(i)})),
        sides=(CanonAtom((i,), I.unary_at(i)),),
        idb=None)]
    for k in range(i, j):
        rho_next = _rho_relation(I, i, j, k + 1)
        step = CanonStep(
            head=CanonAtom((i, k + 1), rho_next),
            sides=(CanonAtom((k, k + 1), I.binary_at(k)),
                   CanonAtom((k,), I.unary_at(k)),
                   CanonAtom((k + 1,), I.unary_at(k + 1))),
            idb=steps[-1].head)
        steps.append(step)
    return CanonDerivation(tuple(steps))


# ---------------------------------------------------------------------------
# gap compression

def build_I_lambda(I: PathInstance):
    """Keep the endpoints and the columns around each backward edge, and span
    every gap with the window reachability relation.  Returns the compressed
    instance together with the list of original indices it retains."""
    ell = I.length
    profile = path_profile(I)
    back_idx = sorted({i for i, _ in profile.backward_edges})
    keep = {1, ell}
    for i in back_idx:
        keep.add(i)
        keep.add(i + 1)
    U = sorted(keep)
    unary = [I.unary_at(u) for u in U]
    binary = []
    for u, u2 in zip(U, U[1:]):
        if u2 == u + 1:
            binary.append(I.binary_at(u))
        else:
            binary.append(lambda_relation(I, u, u2).pairs)
    return PathInstance(I.structure, tuple(unary), tuple(binary)), U


# ---------------------------------------------------------------------------
# interval solution sets and shrinking

@dataclass(frozen=True)
class IntervalSolutionSets:
    a: int
    b: int
    endpoint_pairs: Relation
    point_sets: dict  # index -> frozenset


def interval_solution_sets(I: PathInstance, a: int, b: int,
                           budget: int = 2 ** 24) -> IntervalSolutionSets:
    a2, b2 = max(1, a), min(b, I.length)
    window = path_restrict(I, a2, b2)
    sols = path_solutions(window, budget)
    pairs = set()
    points = {i: set() for i in range(a2, b2 + 1)}
    for s in sols:
        vec = [s(i) for i in range(1, window.length + 1)]
        pairs.add((vec[0], vec[-1]))
        for off, v in enumerate(vec):
            points[a2 + off].add(v)
    return IntervalSolutionSets(
        a2, b2, Relation.of(2, pairs),
        {i: frozenset(vs) for i, vs in points.items()})


def shrink_instance(I: PathInstance, L: int):
    """Select indices i_1 < ... < i_k, at most L apart, at which the
    three-column solution set is strictly smaller than the unary constraint,
    and rebuild the instance on those indices from interval solution sets.

    Returns (K, selected original indices).  Raises ShrinkError when some
    window of length L contains no such index."""
    ell = I.length
    selected = []
    lo = 1
    while True:
        hi = min(lo + L - 1, ell)
        pick = None
        for i in range(lo, hi + 1):
            local = interval_solution_sets(I, i - 1, i + 1).point_sets[i]
            if len(local) < len(I.unary_set(i)):
                pick = i
                break
        if pick is None:
            raise ShrinkError(
                f"no shrinking index in window [{lo},{hi}]")
        selected.append(pick)
        if ell - pick <= L:
            break
        lo = pick + 1
    k = len(selected)
    unary = []
    for j, i in enumerate(selected):
        middle = interval_solution_sets(I, i - 1, i + 1).point_sets[i]
        vals = set(middle)
        if j == 0:
            vals &= interval_solution_sets(I, 1, i).point_sets[i]
        if j == k - 1:
            vals &= interval_solution_sets(I, i, ell).point_sets[i]
        unary.append(Relation.of(1, {(v,) for v in vals}))
    binary = []
    for i, i2 in zip(selected, selected[1:]):
        binary.append(interval_solution_sets(I, i, i2).endpoint_pairs)
    return PathInstance(I.structure, tuple(unary), tuple(binary)), selected


# ---------------------------------------------------------------------------
# the decision procedure

def _unsat_wide_trace(I: PathInstance) -> CanonDerivation:
    """A single admissible step deriving the empty relation from the whole
    instance at once; its rule is consistent exactly because the instance is
    unsatisfiable."""
    return CanonDerivation((CanonStep(
        head=CanonAtom((1,), Relation.empty(1)),
        sides=tuple(path_atoms(I)),
        idb=None),))


def _window_derivation(I: PathInstance, a: int, b: int,
                       head: CanonAtom) -> CanonDerivation:
    """One-step derivation of a window summary relation from all constraints
    of the window [a, b]."""
    sides = [CanonAtom((i,), I.unary_at(i)) for i in range(a, b + 1)]
    sides += [CanonAtom((i, i + 1), I.binary_at(i)) for i in range(a, b)]
    return CanonDerivation((CanonStep(head=head, sides=tuple(sides), idb=None),))


def _witness(I: PathInstance) -> Optional[Solution]:
    C = forward_sets(I)
    if not C[-1]:
        return None
    vec = [min(C[-1])]
    for i in range(I.length - 1, 0, -1):
        rel = I.binary_at(i)
        prev = min(a for a in C[i - 1] if (a, vec[-1]) in rel)
        vec.append(prev)
    vec.reverse()
    return Solution(dict(zip(range(1, I.length + 1), vec)))


def solve_path(S: RelationalStructure, hm: HmChain, I: PathInstance,
               direct_len: Optional[int] = None,
               check_invariance: bool = False) -> SatVerdict:
    """Decide a path instance by recursive shrinking.  Short instances are
    decided by direct search; longer ones are compressed around their
    backward edges and shrunk onto indices where local solution sets drop,
    which reduces the maximum unary size.  Unsatisfiable verdicts carry a
    stacked derivation trace over the original instance."""
    if direct_len is None:
        direct_len = 2 * S.domain_size ** 2 + 2
    if check_invariance:
        for rel in I.unary + I.binary:
            for term in hm.terms:
                if not check_preserves(term, rel):
                    raise ValueError("instance relation not invariant under "
                                     "the supplied chain")
    notes = []
    sat, trace = _solve_rec(S, I, direct_len, notes)
    witness = _witness(I) if sat else None
    return SatVerdict(satisfiable=sat, witness=witness, trace=trace,
                      notes=tuple(notes))


def _solve_rec(S: RelationalStructure, I: PathInstance, direct_len: int,
               notes: list):
    ell = I.length
    for i in range(1, ell + 1):
        if not I.unary_set(i):
            trace = CanonDerivation((CanonStep(
                head=CanonAtom((i,), Relation.empty(1)),
                sides=(CanonAtom((i,), I.unary_at(i)),),
                idb=None),))
            return False, trace
    N = max(len(I.unary_set(i)) for i in range(1, ell + 1))
    if N == 1 and ell > 1:
        for i in range(1, ell):
            a = next(iter(I.unary_set(i)))
            b = next(iter(I.unary_set(i + 1)))
            if (a, b) not in I.binary_at(i):
                trace = CanonDerivation((CanonStep(
                    head=CanonAtom((i,), Relation.empty(1)),
                    sides=(CanonAtom((i,), I.unary_at(i)),
                           CanonAtom((i + 1,), I.unary_at(i + 1)),
                           CanonAtom((i, i + 1), I.binary_at(i))),
                    idb=None),))
                return False, trace
        return True, None
    if ell <= direct_len:
        sat = bool(forward_sets(I)[-1])
        return sat, None if sat else _unsat_wide_trace(I)

    I_lam, U = build_I_lambda(I)
    inner_lam = {}
    for p, u in enumerate(U, start=1):
        inner_lam[CanonAtom((u,), I_lam.unary_at(p))] = None
    for p, (u, u2) in enumerate(zip(U, U[1:]), start=1):
        atom = CanonAtom((u, u2), I_lam.binary_at(p))
        if u2 == u + 1:
            inner_lam[atom] = None
        else:
            inner_lam[atom] = lambda_derivation(I, u, u2)
    scope_map_lam = {p: (u,) for p, u in enumerate(U, start=1)}

    def stack_to_I(trace_lam: CanonDerivation) -> CanonDerivation:
        return stack_derivation(trace_lam, inner_lam, scope_map_lam,
                                power_k=1, base_domain_size=S.domain_size,
                                width_cap=max(ell, 4) + 4)

    if I_lam.length <= direct_len:
        sat = bool(forward_sets(I_lam)[-1])
        if sat:
            return True, None
        return False, stack_to_I(_unsat_wide_trace(I_lam))

    L = direct_len
    try:
        K, selected = shrink_instance(I_lam, L)
    except ShrinkError as exc:
        log.warning("fully subdirect window, deciding directly: %s", exc)
        notes.append(f"direct fallback: {exc}")
        sat = bool(forward_sets(I_lam)[-1])
        if sat:
            return True, None
        return False, stack_to_I(_unsat_wide_trace(I_lam))

    sat, trace_K = _solve_rec(S, K, direct_len, notes)
    if sat:
        return True, None
    # stack the refutation of K down to I_lambda, then down to I
    ell_lam = I_lam.length
    k = len(selected)
    inner_K = {}
    for j, i in enumerate(selected, start=1):
        head = CanonAtom((i,), K.unary_at(j))
        a = max(1, i - 1)
        b = min(i + 1, ell_lam)
        if j == 1:
            a = 1
        if j == k:
            b = ell_lam
        inner_K[head] = _window_derivation(I_lam, a, b, head)
    for j, (i, i2) in enumerate(zip(selected, selected[1:]), start=1):
        head = CanonAtom((i, i2), K.binary_at(j))
        inner_K[head] = _window_derivation(I_lam, i, i2, head)
    scope_map_K = {j: (i,) for j, i in enumerate(selected, start=1)}
    trace_lam = stack_derivation(trace_K, inner_K, scope_map_K,
                                 power_k=1, base_domain_size=S.domain_size,
                                 width_cap=max(ell_lam, 4) + 4)
    return False, stack_to_I(trace_lam)


# ---------------------------------------------------------------------------
# symbolic bounds

@dataclass(frozen=True)
class BoundsReport:
    n: int
    N: int
    m_values: dict
    f_values: dict


def f_bound(n: int, N: int, m_of: dict) -> BoundsReport:
    """The exact width recursion: f(n,1) = 2 and
    f(n,N) = f(n,N-1) + 2*m + 6."""
    f_values = {1: 2}
    for Np in range(2, N + 1):
        if Np not in m_of:
            raise KeyError(f"missing m value for N'={Np}")
        f_values[Np] = f_values[Np - 1] + 2 * m_of[Np] + 6
    return BoundsReport(n, N, dict(m_of), f_values)
