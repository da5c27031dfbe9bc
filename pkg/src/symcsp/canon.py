"""The maximal symmetric program of a structure at width r, evaluated
lazily, plus derivation transformers for conjunction and composition.

Facts are pairs (scope over instance variables, Relation over A).  Rules are
never materialized: a grounded rule is admissible iff the implication
body => head holds over all assignments of its variables into A, and, when
the rule consumes a derived fact, the mirror implication holds as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Iterable, Optional, Sequence

from .algebra import (Relation, RelationalStructure, unpack,
                      unpack_encoded_relation)
from .instances import CspInstance


class FamilyError(ValueError):
    """The configured predicate family cannot express a required relation."""


@dataclass(frozen=True)
class SemanticRule:
    """An abstract rule whose predicates are relations over A."""

    head: tuple  # (Relation, variable tuple)
    body: tuple  # of (Relation, variable tuple)
    idb_position: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))
        seen = set()
        for rel, vs in self.body:
            key = (rel, tuple(vs))
            if key in seen:
                raise ValueError("repeated body atom")
            seen.add(key)

    def variables(self) -> list:
        out = []
        for rel, vs in (self.head,) + self.body:
            for v in vs:
                if v not in out:
                    out.append(v)
        return out


def mirror_semantic(rule: SemanticRule) -> SemanticRule:
    if rule.idb_position is None:
        raise ValueError("mirror requires an IDB body atom")
    body = list(rule.body)
    new_head = body[rule.idb_position]
    body[rule.idb_position] = rule.head
    return SemanticRule(new_head, tuple(body), rule.idb_position)


def _implication_holds(head, body, domain_size: int) -> bool:
    variables = []
    for rel, vs in [head] + list(body):
        for v in vs:
            if v not in variables:
                variables.append(v)
    for values in product(range(domain_size), repeat=len(variables)):
        f = dict(zip(variables, values))
        if all(tuple(f[v] for v in vs) in rel for rel, vs in body):
            hrel, hvs = head
            if tuple(f[v] for v in hvs) not in hrel:
                return False
    return True


def rule_consistent(rule: SemanticRule, S: RelationalStructure) -> bool:
    return _implication_holds(rule.head, list(rule.body), S.domain_size)


def symmetric_pair_consistent(rule: SemanticRule, S: RelationalStructure) -> bool:
    if rule.idb_position is None:
        raise ValueError("symmetric pair requires an IDB body atom")
    return rule_consistent(rule, S) and rule_consistent(mirror_semantic(rule), S)


@dataclass(frozen=True)
class CanonAtom:
    """A grounded fact: relation applied to a tuple of instance variables."""

    scope: tuple
    rel: Relation

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(self.scope))
        if len(self.scope) != self.rel.arity:
            raise ValueError("scope length must match relation arity")

    def distinct_vars(self) -> list:
        out = []
        for v in self.scope:
            if v not in out:
                out.append(v)
        return out


def atoms_semantically_equal(a: CanonAtom, b: CanonAtom, domain_size: int) -> bool:
    va, vb = a.distinct_vars(), b.distinct_vars()
    if set(va) != set(vb):
        return False
    for values in product(range(domain_size), repeat=len(va)):
        f = dict(zip(va, values))
        in_a = tuple(f[v] for v in a.scope) in a.rel
        in_b = tuple(f[v] for v in b.scope) in b.rel
        if in_a != in_b:
            return False
    return True


def conj_atoms(atoms: Sequence[CanonAtom], domain_size: int,
               scope: Optional[Sequence] = None) -> CanonAtom:
    """Conjunction of grounded atoms as a single atom whose scope lists the
    distinct variables in first-occurrence order (or a supplied order)."""
    if scope is None:
        scope = []
        for a in atoms:
            for v in a.scope:
                if v not in scope:
                    scope.append(v)
    scope = list(scope)
    for a in atoms:
        if not set(a.scope) <= set(scope):
            raise ValueError("supplied scope misses a variable")
    tuples = set()
    for values in product(range(domain_size), repeat=len(scope)):
        f = dict(zip(scope, values))
        if all(tuple(f[v] for v in a.scope) in a.rel for a in atoms):
            tuples.add(values)
    return CanonAtom(tuple(scope), Relation.of(len(scope), tuples))


@dataclass(frozen=True)
class CanonStep:
    head: CanonAtom
    sides: tuple  # of CanonAtom, each a constraint of the instance
    idb: Optional[CanonAtom] = None  # previous fact; None only for step 0

    def __post_init__(self):
        object.__setattr__(self, "sides", tuple(self.sides))

    def width(self) -> int:
        vs = set(self.head.scope)
        for a in self.sides:
            vs |= set(a.scope)
        if self.idb is not None:
            vs |= set(self.idb.scope)
        return len(vs)


@dataclass(frozen=True)
class CanonDerivation:
    steps: tuple

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    @property
    def final(self) -> CanonAtom:
        return self.steps[-1].head

    def width(self) -> int:
        return max(s.width() for s in self.steps)


def grounded_step_consistent(step: CanonStep, domain_size: int) -> bool:
    """Forward implication for the step's rule, plus the mirror implication
    when the step consumes a derived fact."""
    body = [(a.rel, a.scope) for a in step.sides]
    if step.idb is not None:
        body_fw = body + [(step.idb.rel, step.idb.scope)]
    else:
        body_fw = body
    if not _implication_holds((step.head.rel, step.head.scope), body_fw, domain_size):
        return False
    if step.idb is not None:
        body_bw = body + [(step.head.rel, step.head.scope)]
        if not _implication_holds((step.idb.rel, step.idb.scope), body_bw,
                                  domain_size):
            return False
    return True


def instance_atoms(I: CspInstance) -> list:
    return [CanonAtom(scope, rel) for scope, rel in I.constraint_relations()]


def replay_derivation(S: RelationalStructure, atoms: Iterable,
                      d: CanonDerivation, width: int) -> bool:
    """Check that every step consumes the previous fact, draws side atoms
    from the given constraint atoms, stays within the width bound, and is
    consistent together with its mirror."""
    allowed = set(atoms)
    prev = None
    for i, step in enumerate(d.steps):
        if step.idb != prev and not (i == 0 and step.idb is None):
            return False
        if i > 0 and step.idb is None:
            return False
        if any(a not in allowed for a in step.sides):
            return False
        if step.width() > width:
            return False
        if not grounded_step_consistent(step, S.domain_size):
            return False
        prev = step.head
    return True


@dataclass(frozen=True)
class CanonConfig:
    r: int
    family: object = "ALL"  # "ALL" or an explicit tuple of Relations
    max_side_atoms: int = 3
    all_cap: int = 1 << 10  # cap on the size of the ALL relation family

    def __post_init__(self):
        if self.family != "ALL":
            object.__setattr__(self, "family", tuple(self.family))

    def family_size(self, domain_size: int) -> int:
        return sum(2 ** (domain_size ** n) for n in range(1, self.r + 1))

    def validate(self, S: RelationalStructure):
        if self.family == "ALL" and self.family_size(S.domain_size) > self.all_cap:
            raise FamilyError(
                "the full relation family is too large; supply an explicit one")


@dataclass
class CanonFactStore:
    facts: dict = field(default_factory=dict)  # scope -> set of Relations

    def add(self, scope: tuple, rel: Relation) -> bool:
        bucket = self.facts.setdefault(tuple(scope), set())
        if rel in bucket:
            return False
        bucket.add(rel)
        return True

    def __contains__(self, fact) -> bool:
        scope, rel = fact
        return rel in self.facts.get(tuple(scope), ())

    def relations_on(self, scope: tuple) -> set:
        return self.facts.get(tuple(scope), set())

    def all_facts(self):
        for scope, rels in self.facts.items():
            for rel in rels:
                yield scope, rel


def _min_and_max_heads(src: CanonAtom, sides: Sequence[CanonAtom],
                       head_scope: tuple, domain_size: int):
    """For the grounded rule  R(head_scope) <- src, sides  return the minimal
    forward-consistent head R* and the maximal mirror-admissible head."""
    variables = list(dict.fromkeys(
        list(src.scope) + [v for a in sides for v in a.scope] + list(head_scope)))
    arity = len(head_scope)
    r_min = set()
    r_max = set(product(range(domain_size), repeat=arity))
    for values in product(range(domain_size), repeat=len(variables)):
        f = dict(zip(variables, values))
        if any(tuple(f[v] for v in a.scope) not in a.rel for a in sides):
            continue
        ht = tuple(f[v] for v in head_scope)
        if tuple(f[v] for v in src.scope) in src.rel:
            r_min.add(ht)
        else:
            r_max.discard(ht)
    return r_min, r_max


def canon_evaluate(S: RelationalStructure, cfg: CanonConfig, I: CspInstance,
                   goal_check: bool = True):
    """Breadth-first closure of facts reachable from the full unary relation
    on each variable, stepping along admissible grounded rules whose side
    atoms are constraints of I.  Returns (CanonFactStore, goal)."""
    cfg.validate(S)
    d = S.domain_size
    a_full = Relation.full(1, d)
    constraints = instance_atoms(I)
    if cfg.family != "ALL":
        fam = set(cfg.family)
        fam.add(a_full)
        for atom in constraints:
            if atom.rel not in fam:
                raise FamilyError(
                    f"instance relation on scope {atom.scope} is outside the "
                    f"predicate family")
        by_arity = {}
        for rel in fam:
            by_arity.setdefault(rel.arity, []).append(rel)
    else:
        fam = None
        by_arity = None

    # side atoms indexed by variable, for connected rule enumeration
    by_var = {}
    for atom in constraints:
        for v in set(atom.scope):
            by_var.setdefault(v, []).append(atom)

    store = CanonFactStore()
    queue = []
    goal = False

    def push(scope, rel):
        nonlocal goal
        if store.add(scope, rel):
            queue.append(CanonAtom(scope, rel))
            if rel.is_empty:
                goal = True

    for v in I.variables:
        push((v,), a_full)
    for atom in constraints:
        push(atom.scope, atom.rel)
    if goal_check and goal:
        return store, True

    def side_choices(pool: set):
        """Connected side-atom tuples of size <= max_side_atoms whose
        variables, together with the pool, stay within r variables."""
        yield ()
        seen = set()
        current = [((), frozenset(pool))]
        for _ in range(cfg.max_side_atoms):
            nxt = []
            for sides, vs in current:
                cands = []
                for v in vs:
                    cands.extend(by_var.get(v, ()))
                for atom in cands:
                    if atom in sides:
                        continue
                    new_vs = vs | set(atom.scope)
                    if len(new_vs) > cfg.r:
                        continue
                    new_sides = tuple(sorted(sides + (atom,), key=repr))
                    if new_sides in seen:
                        continue
                    seen.add(new_sides)
                    nxt.append((new_sides, frozenset(new_vs)))
                    yield new_sides
            current = nxt

    while queue and not (goal_check and goal):
        src = queue.pop(0)
        src_vars = set(src.scope)
        for sides in side_choices(src_vars):
            pool = list(dict.fromkeys(
                list(src.scope) + [v for a in sides for v in a.scope]))
            if len(pool) > cfg.r:
                continue
            for arity in range(1, cfg.r + 1):
                for head_scope in product(pool, repeat=arity):
                    if len(set(head_scope) | set(pool)) > cfg.r:
                        continue
                    r_min, r_max = _min_and_max_heads(src, sides, head_scope, d)
                    if not r_min <= r_max:
                        continue
                    if not r_min:
                        # the empty head is always admissible: goal
                        push(head_scope, Relation.empty(arity))
                        if goal_check:
                            break
                        continue
                    if fam is None:
                        push(head_scope, Relation.of(arity, r_min))
                    else:
                        for rel in by_arity.get(arity, ()):
                            if r_min <= rel.tuples <= r_max:
                                push(head_scope, rel)
                if goal_check and goal:
                    break
            if goal_check and goal:
                break
    return store, goal


def derive_instance(S: RelationalStructure, cfg: CanonConfig, I: CspInstance,
                    targets: Sequence) -> tuple:
    """Per-target derivability under canon_evaluate; on all-success also
    returns the derived instance as a list of (scope, Relation) constraints."""
    store, _ = canon_evaluate(S, cfg, I, goal_check=False)
    results = []
    for scope, rel in targets:
        results.append((tuple(scope), rel) in store)
    derived = [ (tuple(s), r) for s, r in targets ] if all(results) else None
    return results, derived


def conjoin_derivation(d: CanonDerivation, R: Relation, rho: tuple,
                       k: int, domain_size: int) -> CanonDerivation:
    """Transform a derivation of S(sigma) into one of (R and S)(rho+sigma),
    assuming R(rho) is available as a constraint of the instance."""
    base = CanonAtom(tuple(rho), R)
    s_width = max(len(step.head.distinct_vars()) for step in d.steps)
    if k < len(base.distinct_vars()) + s_width:
        raise ValueError("target width too small for the conjunction")
    steps = [CanonStep(head=conj_atoms([base], domain_size),
                       sides=(base,), idb=None)]
    prev = steps[0].head
    for step in d.steps:
        head = conj_atoms([base, step.head], domain_size)
        new = CanonStep(head=head, sides=step.sides, idb=prev)
        if new.width() > k:
            raise ValueError("width bound exceeded during conjunction")
        steps.append(new)
        prev = head
    return CanonDerivation(tuple(steps))


def _as_steps(d: CanonDerivation, atom: CanonAtom) -> list:
    """Inner derivation steps; a seeded (empty) derivation becomes a single
    no-IDB step consuming the atom as its own side constraint."""
    if d is None or not d.steps:
        return [CanonStep(head=atom, sides=(atom,), idb=None)]
    return list(d.steps)


def stack_derivation(outer: CanonDerivation,
                     inner: dict,
                     scope_map: dict,
                     power_k: int,
                     base_domain_size: int,
                     width_cap: int) -> CanonDerivation:
    """Compose an outer derivation (over a derived instance J) with inner
    derivations of J's constraints, yielding a single derivation over the
    original instance.

    `scope_map` sends each J variable to its tuple of original variables
    (singletons when power_k = 1); J's relations are over the power domain,
    encoded by mixed-radix rank, and are unpacked coordinatewise.  `inner`
    maps each unpacked side atom to its derivation (or None when the atom is
    a constraint of the original instance)."""
    d = base_domain_size

    def u(atom: CanonAtom) -> CanonAtom:
        flat_scope = unpack([tuple(scope_map[v]) for v in atom.scope])
        if power_k == 1:
            rel = atom.rel
        else:
            rel = unpack_encoded_relation(atom.rel, d, power_k)
        return conj_atoms([CanonAtom(flat_scope, rel)], d)

    out_steps = []

    def emit(head: CanonAtom, sides, idb):
        if idb is not None and head == idb and not sides:
            return
        step = CanonStep(head=head, sides=tuple(sides), idb=idb)
        if step.width() > width_cap:
            raise ValueError("width bound exceeded during stacking")
        out_steps.append(step)

    current = None  # accumulated fact over the original instance
    for outer_step in outer.steps:
        side_atoms = [u(a) for a in outer_step.sides]
        inner_derivs = []
        for ua in side_atoms:
            dv = inner.get(ua)
            if dv is None and ua not in inner:
                raise KeyError(f"missing inner derivation for side {ua.scope}")
            steps = _as_steps(dv, ua)
            final = steps[-1].head
            if final != ua and not atoms_semantically_equal(final, ua, d):
                raise ValueError("inner derivation does not end at its side atom")
            inner_derivs.append(steps)

        acc = [] if current is None else [current]
        prev_atom = current
        # conjoin phase: derive each unpacked side alongside the current fact
        for ua, steps in zip(side_atoms, inner_derivs):
            for st in steps:
                head = conj_atoms(acc + [st.head], d)
                emit(head, st.sides, prev_atom)
                prev_atom = head
            bridged = conj_atoms(acc + [ua], d)
            if bridged != prev_atom:
                # last inner head equals ua only semantically; re-normalize
                emit(bridged, (), prev_atom)
                prev_atom = bridged
            acc = acc + [ua]
        # apply the outer rule under the conjoined sides
        new_head_u = u(outer_step.head)
        kept = [new_head_u] + side_atoms
        head_atom = conj_atoms(kept, d)
        emit(head_atom, (), prev_atom)
        prev_atom = head_atom
        # deconjoin phase: peel the sides off in reverse via mirror steps
        for ua, steps in zip(reversed(side_atoms), reversed(inner_derivs)):
            kept = kept[:-1]
            last_head = steps[-1].head
            bridged = conj_atoms(kept + [last_head], d)
            if bridged != prev_atom:
                emit(bridged, (), prev_atom)
                prev_atom = bridged
            for st in reversed(steps):
                if st.idb is None:
                    head = conj_atoms(kept, d)
                else:
                    head = conj_atoms(kept + [st.idb], d)
                emit(head, st.sides, prev_atom)
                prev_atom = head
        current = prev_atom
    return CanonDerivation(tuple(out_steps))
