"""Symbolic Datalog over CSP instances: programs, fragment classification,
semi-naive fixpoint evaluation, derivation graphs, and derivation extraction.

Facts are tuples of instance variables (the R^V convention): an EDB predicate
named after a basic relation is seeded with the scopes of the instance's
constraints on that relation.
"""

from __future__ import annotations

import re
from collections import defaultdict, deque
from dataclasses import dataclass, field
from itertools import permutations, product
from typing import Iterable, Optional, Sequence

from .instances import CspInstance


@dataclass(frozen=True)
class Predicate:
    name: str
    arity: int
    idb: bool


@dataclass(frozen=True)
class Atom:
    predicate: str
    variables: tuple

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))

    def __str__(self):
        return f"{self.predicate}({','.join(self.variables)})"


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))

    def __str__(self):
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(map(str, self.body))}."


@dataclass(frozen=True)
class DatalogProgram:
    predicates: dict
    rules: tuple
    goals: frozenset

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "goals", frozenset(self.goals))
        for rule in self.rules:
            for atom in (rule.head,) + rule.body:
                pred = self.predicates.get(atom.predicate)
                if pred is None:
                    raise ValueError(f"undeclared predicate {atom.predicate!r}")
                if pred.arity != len(atom.variables):
                    raise ValueError(f"arity mismatch in atom {atom}")
            if not self.predicates[rule.head.predicate].idb:
                raise ValueError(f"rule head {rule.head} is not an IDB")

    def is_idb(self, name: str) -> bool:
        return self.predicates[name].idb

    def idb_body_atoms(self, rule: Rule) -> list:
        return [i for i, a in enumerate(rule.body) if self.is_idb(a.predicate)]


def _canonical_rule(rule: Rule, idb_positions: set) -> tuple:
    """Canonical form modulo variable renaming and body reordering.

    Side (EDB) atoms may permute freely; the IDB body atom, if any, stays
    distinguished.  Variables are renamed by first occurrence.
    """
    side = [a for i, a in enumerate(rule.body) if i not in idb_positions]
    idbs = [a for i, a in enumerate(rule.body) if i in idb_positions]
    best = None
    for perm in permutations(side):
        atoms = [rule.head] + idbs + list(perm)
        renaming = {}
        key = []
        for a in atoms:
            vs = []
            for v in a.variables:
                if v not in renaming:
                    renaming[v] = f"v{len(renaming)}"
                vs.append(renaming[v])
            key.append((a.predicate, tuple(vs)))
        key = tuple(key)
        if best is None or key < best:
            best = key
    return best


def mirror_rule(rule: Rule, idb_position: int) -> Rule:
    """Swap the head with the IDB body atom, keeping side atoms."""
    body = list(rule.body)
    new_head = body[idb_position]
    body[idb_position] = rule.head
    return Rule(new_head, tuple(body))


def classify_program(P: DatalogProgram) -> str:
    """One of 'general', 'linear', 'symmetric'."""
    canon_forms = set()
    for rule in P.rules:
        idbs = P.idb_body_atoms(rule)
        if len(idbs) > 1:
            return "general"
        canon_forms.add(_canonical_rule(rule, set(idbs)))
    for rule in P.rules:
        idbs = P.idb_body_atoms(rule)
        if not idbs:
            continue  # rules without IDB bodies are their own mirrors
        m = mirror_rule(rule, idbs[0])
        if _canonical_rule(m, set(idbs)) not in canon_forms:
            return "linear"
    return "symmetric"


@dataclass
class FactStore:
    facts: dict = field(default_factory=lambda: defaultdict(set))

    def add(self, pred: str, tup: tuple) -> bool:
        if tup in self.facts[pred]:
            return False
        self.facts[pred].add(tup)
        return True

    def __contains__(self, fact) -> bool:
        pred, tup = fact
        return tup in self.facts.get(pred, ())

    def get(self, pred: str) -> set:
        return self.facts.get(pred, set())


def _seed_store(P: DatalogProgram, I: CspInstance) -> FactStore:
    store = FactStore()
    for c in I.constraints:
        pred = P.predicates.get(c.relation)
        if pred is None:
            raise ValueError(f"instance uses undeclared relation {c.relation!r}")
        if pred.idb:
            raise ValueError(f"instance relation {c.relation!r} declared as IDB")
        store.add(c.relation, c.scope)
    return store


def _ground_rule(rule: Rule, store: FactStore, variables: Sequence,
                 forced: Optional[dict] = None,
                 delta: Optional[tuple] = None):
    """Yield substitutions (dict rule-var -> instance var) making every body
    atom a present fact.  Groundings may identify distinct rule variables.

    `delta`, when given as (position, fact_set), requires the atom at that
    body position to match a fact from the set.
    """
    atoms = list(enumerate(rule.body))
    # match the most constrained (delta) atom first
    if delta is not None:
        atoms.sort(key=lambda pa: 0 if pa[0] == delta[0] else 1)

    def rec(k: int, subst: dict):
        if k == len(atoms):
            # head variables not bound by the body range over all variables
            free = [v for v in rule.head.variables if v not in subst]
            seen = set()
            for choice in product(variables, repeat=len(free)):
                full = dict(subst)
                full.update(zip(free, choice))
                key = tuple(full[v] for v in rule.head.variables)
                if key not in seen:
                    seen.add(key)
                    yield full
            return
        pos, atom = atoms[k]
        source = delta[1] if delta is not None and pos == delta[0] \
            else store.get(atom.predicate)
        for tup in source:
            new = dict(subst)
            ok = True
            for var, val in zip(atom.variables, tup):
                if var in new:
                    if new[var] != val:
                        ok = False
                        break
                else:
                    new[var] = val
            if ok:
                yield from rec(k + 1, new)

    yield from rec(0, forced or {})


def evaluate(P: DatalogProgram, I: CspInstance,
             goal_check: bool = True):
    """Least fixpoint of rule application seeded with the instance's
    constraints.  Returns (FactStore, goal_reached).  With goal_check the
    evaluation halts as soon as a goal-predicate fact is derived."""
    store = _seed_store(P, I)
    variables = tuple(I.variables)

    def goal_hit() -> bool:
        return any(store.get(g) for g in P.goals)

    delta = []
    for rule in P.rules:
        if P.idb_body_atoms(rule):
            continue
        for subst in _ground_rule(rule, store, variables):
            tup = tuple(subst[v] for v in rule.head.variables)
            if store.add(rule.head.predicate, tup):
                delta.append((rule.head.predicate, tup))
                if goal_check and rule.head.predicate in P.goals:
                    return store, True

    while delta:
        by_pred = defaultdict(set)
        for pred, tup in delta:
            by_pred[pred].add(tup)
        delta = []
        for rule in P.rules:
            idbs = P.idb_body_atoms(rule)
            for pos in idbs:
                pred = rule.body[pos].predicate
                if pred not in by_pred:
                    continue
                for subst in _ground_rule(rule, store, variables,
                                          delta=(pos, by_pred[pred])):
                    tup = tuple(subst[v] for v in rule.head.variables)
                    if store.add(rule.head.predicate, tup):
                        delta.append((rule.head.predicate, tup))
                        if goal_check and rule.head.predicate in P.goals:
                            return store, True
    return store, goal_hit()


@dataclass(frozen=True)
class DerivationStep:
    head: tuple  # (predicate name, variable tuple)
    rule: Rule
    sides: tuple  # grounded EDB facts consumed
    idb_input: Optional[tuple] = None  # previous fact, None for the first step


@dataclass(frozen=True)
class Derivation:
    steps: tuple

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    @property
    def final_fact(self):
        return self.steps[-1].head if self.steps else None

    @property
    def seeded(self) -> bool:
        return not self.steps


@dataclass(frozen=True)
class DerivationGraph:
    """Vertices are IDB facts (predicate, variable tuple); an edge runs from
    a fact to every fact derivable from it in one grounded rule step whose
    side atoms are constraints of the instance."""

    vertices: frozenset
    edges: frozenset  # (src fact, dst fact, rule)
    roots: frozenset  # facts derivable by rules with no IDB body atom

    def successors(self, fact):
        return {dst for src, dst, _ in self.edges if src == fact}

    def is_symmetric(self) -> bool:
        pairs = {(s, d) for s, d, _ in self.edges}
        return all((d, s) in pairs for s, d in pairs)


def derivation_graph(P: DatalogProgram, I: CspInstance) -> DerivationGraph:
    if classify_program(P) == "general":
        raise ValueError("derivation graphs require a linear program")
    store = _seed_store(P, I)
    variables = tuple(I.variables)
    vertices = set()
    edges = set()
    roots = set()
    for rule in P.rules:
        idbs = P.idb_body_atoms(rule)
        if not idbs:
            for subst in _ground_rule(rule, store, variables):
                head = (rule.head.predicate,
                        tuple(subst[v] for v in rule.head.variables))
                roots.add(head)
                vertices.add(head)
            continue
        pos = idbs[0]
        idb_atom = rule.body[pos]
        # candidate IDB input facts: all variable tuples of matching arity
        for src_tup in product(variables, repeat=len(idb_atom.variables)):
            forced = {}
            ok = True
            for var, val in zip(idb_atom.variables, src_tup):
                if var in forced and forced[var] != val:
                    ok = False
                    break
                forced[var] = val
            if not ok:
                continue
            side_rule = Rule(rule.head,
                             tuple(a for i, a in enumerate(rule.body) if i != pos))
            for subst in _ground_rule(side_rule, store, variables, forced=forced):
                src = (idb_atom.predicate, src_tup)
                dst = (rule.head.predicate,
                       tuple(subst[v] for v in rule.head.variables))
                vertices.add(src)
                vertices.add(dst)
                edges.add((src, dst, rule))
    return DerivationGraph(frozenset(vertices), frozenset(edges), frozenset(roots))


def goal_reachable(G: DerivationGraph, goals: Iterable) -> bool:
    goals = set(goals)
    seen = set(G.roots)
    queue = deque(seen)
    if any(f[0] in goals for f in seen):
        return True
    adj = defaultdict(set)
    for s, d, _ in G.edges:
        adj[s].add(d)
    while queue:
        f = queue.popleft()
        for g in adj[f]:
            if g not in seen:
                if g[0] in goals:
                    return True
                seen.add(g)
                queue.append(g)
    return False


def extract_derivation(P: DatalogProgram, I: CspInstance,
                       fact) -> Optional[Derivation]:
    """A shortest derivation of the fact, or a length-0 derivation for facts
    seeded directly by constraints, or None if underivable."""
    pred, tup = fact
    if not P.predicates[pred].idb:
        store = _seed_store(P, I)
        return Derivation(()) if tup in store.get(pred) else None
    G = derivation_graph(P, I)
    store = _seed_store(P, I)
    variables = tuple(I.variables)

    def step_for(rule: Rule, head_fact, idb_input) -> DerivationStep:
        idbs = P.idb_body_atoms(rule)
        forced = {}
        if idbs:
            pos = idbs[0]
            for var, val in zip(rule.body[pos].variables, idb_input[1]):
                forced[var] = val
        for var, val in zip(rule.head.variables, head_fact[1]):
            if var in forced and forced[var] != val:
                return None
            forced[var] = val
        side_atoms = [a for i, a in enumerate(rule.body)
                      if not idbs or i != idbs[0]]
        side_rule = Rule(rule.head, tuple(side_atoms))
        for subst in _ground_rule(side_rule, store, variables, forced=forced):
            if tuple(subst[v] for v in rule.head.variables) != head_fact[1]:
                continue
            sides = tuple((a.predicate, tuple(subst[v] for v in a.variables))
                          for a in side_atoms)
            return DerivationStep(head_fact, rule, sides, idb_input)
        return None

    # BFS backwards from roots
    parent = {}
    queue = deque()
    for root in G.roots:
        if root not in parent:
            parent[root] = (None, None)
            queue.append(root)
    adj = defaultdict(list)
    for s, d, rule in G.edges:
        adj[s].append((d, rule))
    while queue:
        cur = queue.popleft()
        if cur == fact:
            break
        for nxt, rule in adj[cur]:
            if nxt not in parent:
                parent[nxt] = (cur, rule)
                queue.append(nxt)
    if fact not in parent:
        return None
    chain = []
    cur = fact
    while cur is not None:
        prev, rule = parent[cur]
        chain.append((cur, prev, rule))
        cur = prev
    chain.reverse()
    steps = []
    for head_fact, prev, rule in chain:
        if rule is None:
            # root: find a no-IDB rule grounding producing it
            for r in P.rules:
                if P.idb_body_atoms(r) or r.head.predicate != head_fact[0]:
                    continue
                step = step_for(r, head_fact, None)
                if step is not None:
                    steps.append(step)
                    break
            else:
                return None
        else:
            step = step_for(rule, head_fact, prev)
            if step is None:
                return None
            steps.append(step)
    return Derivation(tuple(steps))


def replay_derivation(P: DatalogProgram, I: CspInstance, d: Derivation) -> bool:
    """Re-derive each step's head by applying its rule to the previous fact
    and the instance's constraints."""
    store = _seed_store(P, I)
    prev = None
    for step in d.steps:
        if step.idb_input != prev:
            return False
        for side in step.sides:
            if side not in store:
                return False
        # check the grounding is consistent with the rule
        subst = {}
        idbs = P.idb_body_atoms(step.rule)
        atoms_facts = list(zip(
            [a for i, a in enumerate(step.rule.body) if not idbs or i != idbs[0]],
            step.sides))
        if idbs:
            if prev is None:
                return False
            atoms_facts.append((step.rule.body[idbs[0]], prev))
        atoms_facts.append((step.rule.head, step.head))
        for atom, (pred, tup) in atoms_facts:
            if atom.predicate != pred:
                return False
            for var, val in zip(atom.variables, tup):
                if subst.setdefault(var, val) != val:
                    return False
        prev = step.head
    return True


_ATOM_RE = re.compile(r"\s*([A-Za-z_][\w']*)\s*\(\s*([^)]*)\)\s*")


def _parse_atom(text: str) -> Atom:
    m = _ATOM_RE.fullmatch(text)
    if not m:
        raise ValueError(f"cannot parse atom {text!r}")
    name, args = m.groups()
    return Atom(name, tuple(a.strip() for a in args.split(",") if a.strip()))


def parse_program(text: str) -> DatalogProgram:
    """Text format: directives '#idb NAME/arity', '#edb NAME/arity',
    '#goal NAME'; one rule per line, 'Head(x,y) :- B1(x,z), B2(z,y).'"""
    predicates = {}
    goals = set()
    rules = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if line.startswith("#"):
            parts = line.split()
            if parts[0] in ("#idb", "#edb"):
                name, arity = parts[1].split("/")
                predicates[name] = Predicate(name, int(arity), parts[0] == "#idb")
            elif parts[0] == "#goal":
                goals.add(parts[1])
            else:
                raise ValueError(f"unknown directive {parts[0]!r}")
            continue
        if not line.endswith("."):
            raise ValueError(f"rule missing final period: {line!r}")
        line = line[:-1]
        if ":-" in line:
            head_txt, body_txt = line.split(":-", 1)
            body = tuple(_parse_atom(a)
                         for a in re.split(r",(?![^(]*\))", body_txt) if a.strip())
        else:
            head_txt, body = line, ()
        rules.append(Rule(_parse_atom(head_txt), body))
    return DatalogProgram(predicates, tuple(rules), frozenset(goals))


def print_program(P: DatalogProgram) -> str:
    lines = []
    for name, pred in P.predicates.items():
        kind = "#idb" if pred.idb else "#edb"
        lines.append(f"{kind} {name}/{pred.arity}")
    for g in sorted(P.goals):
        lines.append(f"#goal {g}")
    for rule in P.rules:
        lines.append(str(rule))
    return "\n".join(lines) + "\n"
