"""Finite relational structures, operations, polymorphisms, and
Hagemann-Mitschke chains.

Domain elements are plain ints in [0, domain_size).  Operation tables are
stored flat, indexed by the mixed-radix rank of the argument tuple (first
argument most significant).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Iterator, Optional, Sequence


class BudgetExceededError(RuntimeError):
    """An enumeration or search would exceed its configured budget."""


def rank_tuple(t: Sequence[int], base: int) -> int:
    r = 0
    for x in t:
        r = r * base + x
    return r


def unrank_tuple(r: int, base: int, length: int) -> tuple[int, ...]:
    out = []
    for _ in range(length):
        out.append(r % base)
        r //= base
    return tuple(reversed(out))


@dataclass(frozen=True)
class Relation:
    """A finite relation: a set of equal-length int tuples."""

    arity: int
    tuples: frozenset

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError("nullary relations are not allowed")
        if not isinstance(self.tuples, frozenset):
            object.__setattr__(self, "tuples", frozenset(self.tuples))
        for t in self.tuples:
            if len(t) != self.arity:
                raise ValueError(f"tuple {t} does not match arity {self.arity}")

    @staticmethod
    def of(arity: int, tuples: Iterable[Sequence[int]]) -> "Relation":
        return Relation(arity, frozenset(tuple(t) for t in tuples))

    @staticmethod
    def full(arity: int, domain_size: int) -> "Relation":
        return Relation(arity, frozenset(product(range(domain_size), repeat=arity)))

    @staticmethod
    def empty(arity: int) -> "Relation":
        return Relation(arity, frozenset())

    def __contains__(self, t) -> bool:
        return tuple(t) in self.tuples

    @property
    def is_empty(self) -> bool:
        return not self.tuples

    def intersection(self, other: "Relation") -> "Relation":
        if self.arity != other.arity:
            raise ValueError("arity mismatch in intersection")
        return Relation(self.arity, self.tuples & other.tuples)

    def project(self, coords: Sequence[int]) -> "Relation":
        return Relation.of(len(coords), {tuple(t[c] for c in coords) for t in self.tuples})

    def sorted_tuples(self) -> list:
        return sorted(self.tuples)


@dataclass(frozen=True)
class RelationalStructure:
    """A finite domain together with an ordered family of named relations."""

    domain_size: int
    relations: dict

    def __post_init__(self):
        if self.domain_size < 1:
            raise ValueError("domain must be nonempty")
        for name, rel in self.relations.items():
            for t in rel.tuples:
                if any(x < 0 or x >= self.domain_size for x in t):
                    raise ValueError(f"relation {name} has out-of-range entry {t}")

    def relation(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise KeyError(f"unknown relation {name!r}") from None

    @property
    def domain(self) -> range:
        return range(self.domain_size)


@dataclass(frozen=True)
class OperationTable:
    """A total finitary operation, stored as a flat value table."""

    domain_size: int
    arity: int
    table: tuple

    def __post_init__(self):
        expected = self.domain_size ** self.arity
        if len(self.table) != expected:
            raise ValueError(f"table has {len(self.table)} entries, expected {expected}")
        if any(v < 0 or v >= self.domain_size for v in self.table):
            raise ValueError("table value out of domain range")

    def apply(self, *args: int) -> int:
        return self.table[rank_tuple(args, self.domain_size)]

    def apply_tuples(self, rows: Sequence[Sequence[int]]) -> tuple[int, ...]:
        """Apply coordinatewise to `arity` rows of equal length."""
        return tuple(self.apply(*col) for col in zip(*rows))

    @staticmethod
    def from_function(domain_size: int, arity: int, fn) -> "OperationTable":
        table = tuple(
            fn(*args) for args in product(range(domain_size), repeat=arity)
        )
        return OperationTable(domain_size, arity, table)

    @staticmethod
    def projection(domain_size: int, arity: int, coord: int) -> "OperationTable":
        return OperationTable.from_function(domain_size, arity, lambda *a: a[coord])

    @property
    def is_idempotent(self) -> bool:
        return all(self.apply(*([x] * self.arity)) == x for x in range(self.domain_size))


def check_preserves(op: OperationTable, rel: Relation) -> bool:
    """True iff applying `op` coordinatewise to any choice of rows of `rel`
    lands back in `rel`."""
    for t in rel.tuples:
        if any(x >= op.domain_size for x in t):
            raise ValueError("relation ranges outside the operation's domain")
    rows = sorted(rel.tuples)
    for choice in product(rows, repeat=op.arity):
        if op.apply_tuples(choice) not in rel:
            return False
    return True


def is_polymorphism(op: OperationTable, struct: RelationalStructure) -> bool:
    if op.domain_size != struct.domain_size:
        raise ValueError("domain size mismatch")
    return all(check_preserves(op, rel) for rel in struct.relations.values())


def enumerate_operations(domain_size: int, arity: int,
                         budget: int = 2 ** 20) -> Iterator[OperationTable]:
    """All operation tables of the given arity, in lexicographic table order."""
    n_inputs = domain_size ** arity
    if domain_size ** n_inputs > budget:
        raise BudgetExceededError(
            f"{domain_size}^{n_inputs} tables exceeds budget {budget}")
    for table in product(range(domain_size), repeat=n_inputs):
        yield OperationTable(domain_size, arity, table)


def enumerate_polymorphisms(struct: RelationalStructure, arity: int,
                            budget: int = 2 ** 20) -> list:
    return [op for op in enumerate_operations(struct.domain_size, arity, budget)
            if is_polymorphism(op, struct)]


@dataclass(frozen=True)
class HmChain:
    """A chain p_0, ..., p_n of ternary terms: p_0 = first projection,
    p_n = third projection, every p_i idempotent, and
    p_i(x,x,y) = p_{i+1}(x,y,y) for i = 0..n-1."""

    n: int
    terms: tuple

    def __post_init__(self):
        if len(self.terms) != self.n + 1:
            raise ValueError("chain must have n+1 terms")

    @property
    def domain_size(self) -> int:
        return self.terms[0].domain_size


def hm_chain_violation(chain: HmChain, struct: Optional[RelationalStructure] = None):
    """None if the chain is valid (and consists of polymorphisms of `struct`
    when given); otherwise a short description of the first failure."""
    d = chain.domain_size
    terms = chain.terms
    if any(t.arity != 3 or t.domain_size != d for t in terms):
        return "terms must be ternary over a common domain"
    if terms[0] != OperationTable.projection(d, 3, 0):
        return "p_0 is not the first projection"
    if terms[-1] != OperationTable.projection(d, 3, 2):
        return "p_n is not the third projection"
    for i, t in enumerate(terms):
        if not t.is_idempotent:
            return f"p_{i} is not idempotent"
    for i in range(chain.n):
        for x, y in product(range(d), repeat=2):
            if terms[i].apply(x, x, y) != terms[i + 1].apply(x, y, y):
                return f"p_{i}(x,x,y) != p_{i+1}(x,y,y) at (x,y)=({x},{y})"
    if struct is not None:
        for i, t in enumerate(terms):
            if not is_polymorphism(t, struct):
                return f"p_{i} is not a polymorphism"
    return None


def verify_hm_chain(chain: HmChain, struct: Optional[RelationalStructure] = None) -> bool:
    return hm_chain_violation(chain, struct) is None


def find_hm_chain(struct: RelationalStructure, n_max: int,
                  budget: int = 2 ** 20) -> Optional[HmChain]:
    """Shortest chain (length n <= n_max) of Hagemann-Mitschke polymorphisms,
    or None.  Ties among middle terms are broken by colexicographic table
    order, which is deterministic and puts the parity operation first on
    two-element domains."""
    d = struct.domain_size
    p_first = OperationTable.projection(d, 3, 0)
    p_last = OperationTable.projection(d, 3, 2)
    candidates = [op for op in enumerate_polymorphisms(struct, 3, budget)
                  if op.is_idempotent]
    candidates.sort(key=lambda op: op.table[::-1])

    def links(a: OperationTable, b: OperationTable) -> bool:
        return all(a.apply(x, x, y) == b.apply(x, y, y)
                   for x, y in product(range(d), repeat=2))

    for n in range(1, n_max + 1):
        # middle positions 1..n-1; p_0 and p_n are fixed projections
        def extend(prefix: list) -> Optional[list]:
            if len(prefix) == n:
                return prefix if links(prefix[-1], p_last) else None
            for op in candidates:
                if links(prefix[-1], op):
                    found = extend(prefix + [op])
                    if found is not None:
                        return found
            return None

        chain = extend([p_first])
        if chain is not None:
            return HmChain(n, tuple(chain + [p_last]))
    return None


def unpack(sigma: Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Flatten a tuple of equal-length inner tuples by concatenation."""
    if sigma:
        k = len(sigma[0])
        if any(len(inner) != k for inner in sigma):
            raise ValueError("ragged inner tuples")
    return tuple(x for inner in sigma for x in inner)


def unpack_relation(rel: Relation, k: int) -> Relation:
    """Flatten a relation whose entries are k-tuples (given as nested tuples)."""
    return Relation.of(rel.arity * k, {unpack(t) for t in rel.tuples})


def unpack_encoded_relation(rel: Relation, base: int, k: int) -> Relation:
    """Flatten a relation over a power domain whose elements are mixed-radix
    encoded ints (rank of the k-tuple over a base-sized domain)."""
    return Relation.of(
        rel.arity * k,
        {unpack([unrank_tuple(e, base, k) for e in t]) for t in rel.tuples},
    )
