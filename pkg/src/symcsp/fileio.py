"""Human-editable serialization for structures, instances, decompositions,
and derivation traces.  Everything is JSON with deterministic key and tuple
ordering, so repeated dumps are byte-identical."""

from __future__ import annotations

import hashlib
import json
from typing import Optional

from .algebra import Relation, RelationalStructure
from .canon import CanonAtom, CanonDerivation, CanonStep
from .instances import (Constraint, CspInstance, PathDecomposition,
                        PathInstance)
from .structures import STRUCTURES


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


# --------------------------------------------------------------------------
# structures

def dump_structure(S: RelationalStructure) -> str:
    return _canonical({
        "domain_size": S.domain_size,
        "relations": {name: [list(t) for t in rel.sorted_tuples()]
                      for name, rel in S.relations.items()},
    })


def load_structure(text: str) -> RelationalStructure:
    data = json.loads(text)
    relations = {}
    for name in sorted(data["relations"]):
        tuples = [tuple(t) for t in data["relations"][name]]
        if not tuples:
            raise ValueError(f"relation {name!r} is empty; arity unknown")
        relations[name] = Relation.of(len(tuples[0]), tuples)
    return RelationalStructure(data["domain_size"], relations)


def resolve_structure(ref: str) -> RelationalStructure:
    """A stock structure name, or a path to a structure file."""
    if ref in STRUCTURES:
        return STRUCTURES[ref]
    with open(ref) as fh:
        return load_structure(fh.read())


# --------------------------------------------------------------------------
# instances

def dump_instance(I: CspInstance) -> str:
    return _canonical({
        "structure": json.loads(dump_structure(I.structure)),
        "variables": list(I.variables),
        "constraints": [{"scope": list(c.scope), "relation": c.relation}
                        for c in I.constraints],
    })


def load_instance(text: str) -> CspInstance:
    data = json.loads(text)
    struct = load_structure(_canonical(data["structure"]))
    constraints = [Constraint(tuple(c["scope"]), c["relation"])
                   for c in data["constraints"]]
    return CspInstance(struct, tuple(data["variables"]), tuple(constraints))


def dump_path_instance(I: PathInstance) -> str:
    """Compact form: relations inlined positionally."""
    return _canonical({
        "domain_size": I.structure.domain_size,
        "unary": [[t[0] for t in rel.sorted_tuples()] for rel in I.unary],
        "binary": [[list(t) for t in rel.sorted_tuples()] for rel in I.binary],
    })


def load_path_instance(text: str) -> PathInstance:
    data = json.loads(text)
    struct = RelationalStructure(data["domain_size"], {})
    unary = [Relation.of(1, {(v,) for v in vs}) for vs in data["unary"]]
    binary = [Relation.of(2, {tuple(t) for t in ts}) for ts in data["binary"]]
    return PathInstance(struct, tuple(unary), tuple(binary))


# --------------------------------------------------------------------------
# decompositions

def dump_decomposition(D: PathDecomposition) -> str:
    return _canonical({
        "bags": [sorted(bag, key=str) for bag in D.bags],
        "width": D.width,
    })


def load_decomposition(text: str) -> PathDecomposition:
    data = json.loads(text)
    return PathDecomposition(tuple(frozenset(b) for b in data["bags"]),
                             data["width"])


# --------------------------------------------------------------------------
# derivation traces

def dump_trace(d: CanonDerivation) -> str:
    relations = {}
    ids = {}

    def rel_id(rel: Relation) -> int:
        key = (rel.arity, tuple(rel.sorted_tuples()))
        if key not in ids:
            ids[key] = len(ids)
            relations[str(ids[key])] = {
                "arity": rel.arity,
                "tuples": [list(t) for t in rel.sorted_tuples()],
            }
        return ids[key]

    def atom(a: Optional[CanonAtom]):
        if a is None:
            return None
        return [rel_id(a.rel), list(a.scope)]

    steps = [{"head": atom(s.head),
              "idb": atom(s.idb),
              "sides": [atom(a) for a in s.sides]}
             for s in d.steps]
    return _canonical({"relations": relations, "steps": steps})


def load_trace(text: str) -> CanonDerivation:
    data = json.loads(text)
    rels = {int(k): Relation.of(v["arity"], [tuple(t) for t in v["tuples"]])
            for k, v in data["relations"].items()}

    def atom(a):
        if a is None:
            return None
        return CanonAtom(tuple(a[1]), rels[a[0]])

    steps = [CanonStep(head=atom(s["head"]),
                       sides=tuple(atom(a) for a in s["sides"]),
                       idb=atom(s["idb"]))
             for s in data["steps"]]
    return CanonDerivation(tuple(steps))


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()
