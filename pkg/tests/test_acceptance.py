"""Acceptance gate: ten criteria, each reporting a single pass/fail line.

Every check is either an exact equality or an oracle-equivalence over a
seeded corpus; the only tolerances are the wall-clock budgets in criteria
1 and 2 (60 s and 5 s respectively)."""

import sys
import time
from itertools import product

from symcsp.algebra import Relation, find_hm_chain, unpack_encoded_relation, \
    verify_hm_chain
from symcsp.canon import (CanonAtom, CanonConfig, CanonStep, CanonDerivation,
                          canon_evaluate, conj_atoms, conjoin_derivation,
                          grounded_step_consistent, instance_atoms,
                          replay_derivation, stack_derivation)
from symcsp.engine import (classify_program, derivation_graph, evaluate,
                           goal_reachable, parse_program)
from symcsp.instances import (Constraint, CspInstance, PathDecomposition,
                              PathInstance, brute_force_solutions,
                              path_satisfiable, path_solutions,
                              solution_satisfies)
from symcsp.bubble import decide_csp, pathwidth_to_path, width_bound
from symcsp.pathsolver import (Braid, braid_to_solution, braid_valid,
                               build_I_lambda, f_bound, find_braid,
                               forward_sets, lambda_derivation,
                               lambda_relation, path_atoms, solve_path)
from symcsp.structures import AIMP, AK2, AZ2, XOR3
from symcsp.workbench import gen_random_path_instance, gen_random_pw_instance

HM_AZ2 = find_hm_chain(AZ2, 2)
HM_AK2 = find_hm_chain(AK2, 2)


REPORT_LINES = []


def _report(n: int, ok: bool, detail: str):
    line = f"[AC{n}] {'PASS' if ok else 'FAIL'}: {detail}"
    REPORT_LINES.append(line)
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()
    assert ok, line


# ---------------------------------------------------------------------------
# 1. oracle equivalence of the path solver

def test_ac1_path_solver_oracle_equivalence():
    t0 = time.perf_counter()
    agree = total = 0
    for structure, hm in ((AK2, HM_AK2), (AZ2, HM_AZ2)):
        for trial in range(250):
            length = 2 + trial % 9  # lengths 2..10
            I = gen_random_path_instance(structure, length, 0.55,
                                         seed=trial, hm=hm)
            verdict = solve_path(structure, hm, I)
            oracle = bool(path_solutions(I))
            total += 1
            agree += verdict.satisfiable == oracle
    elapsed = time.perf_counter() - t0
    ok = agree == total == 500 and elapsed < 60.0
    _report(1, ok, f"solve_path vs oracle {agree}/{total} on seeded "
                   f"instances, {elapsed:.1f}s (< 60s)")


# ---------------------------------------------------------------------------
# 2. chain discovery

def test_ac2_chain_discovery():
    checks = []
    times = []
    for structure in (AK2, AZ2):
        t0 = time.perf_counter()
        chain = find_hm_chain(structure, 2)
        times.append(time.perf_counter() - t0)
        checks.append(chain is not None and chain.n == 2
                      and chain.terms[1] == XOR3
                      and verify_hm_chain(chain, structure))
    t0 = time.perf_counter()
    checks.append(find_hm_chain(AIMP, 4) is None)
    times.append(time.perf_counter() - t0)
    ok = all(checks) and all(t < 5.0 for t in times)
    _report(2, ok, f"n=2 chain with parity middle term on both "
                   f"two-coloring structures, none for implication; "
                   f"max search {max(times):.2f}s (< 5s)")


# ---------------------------------------------------------------------------
# 3. canonical-program soundness

def _ac3_corpus():
    yield CspInstance(AK2, (1,), (Constraint((1,), "C0"),
                                  Constraint((1,), "C1")))
    yield CspInstance(AK2, (1, 2, 3), (Constraint((1, 2), "NEQ"),
                                       Constraint((2, 3), "NEQ"),
                                       Constraint((3, 1), "NEQ")))
    yield CspInstance(AK2, (1, 2, 3, 4), (Constraint((1, 2), "NEQ"),
                                          Constraint((2, 3), "NEQ"),
                                          Constraint((3, 4), "NEQ"),
                                          Constraint((4, 1), "NEQ")))
    yield CspInstance(AK2, (1, 2), (Constraint((1, 2), "NEQ"),
                                    Constraint((1,), "C0")))
    for seed in range(8):
        yield gen_random_path_instance(AZ2, 3, 0.6, seed=seed).to_csp()


def test_ac3_canonical_program_soundness():
    excluded = goals_on_sat = count = 0
    for I in _ac3_corpus():
        count += 1
        sols = brute_force_solutions(I)
        store, goal = canon_evaluate(I.structure, CanonConfig(r=3), I,
                                     goal_check=False)
        if goal and sols:
            goals_on_sat += 1
        for scope, rel in store.all_facts():
            for s in sols:
                if tuple(s(v) for v in scope) not in rel:
                    excluded += 1
    ok = excluded == 0 and goals_on_sat == 0
    _report(3, ok, f"{count} instances at r=3: {excluded} derived facts "
                   f"exclude an oracle solution, {goals_on_sat} goals on "
                   f"satisfiable instances (both must be 0)")


# ---------------------------------------------------------------------------
# 4. window reachability machinery

def _connectivity_reference(I, i, j):
    nodes = {(k, a) for k in range(i, j + 1) for a in I.unary_set(k)}
    adj = {n: set() for n in nodes}
    for k in range(i, j):
        for (a, b) in I.binary_at(k).tuples:
            if (k, a) in nodes and (k + 1, b) in nodes:
                adj[(k, a)].add((k + 1, b))
                adj[(k + 1, b)].add((k, a))
    pairs = set()
    for a in I.unary_set(i):
        seen = {(i, a)}
        stack = [(i, a)]
        while stack:
            n = stack.pop()
            for m in adj[n]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        pairs |= {(a, b) for (k, b) in seen if k == j}
    return pairs


def test_ac4_lambda_machinery():
    matches = replays = total = 0
    for seed in range(100):
        length = 2 + seed % 6
        I = gen_random_path_instance(AZ2, length, 0.55, seed=seed, hm=HM_AZ2)
        total += 1
        lam = lambda_relation(I, 1, length)
        if set(lam.pairs.tuples) == _connectivity_reference(I, 1, length):
            matches += 1
        d = lambda_derivation(I, 1, length)
        if (d.final.rel == lam.pairs and d.width() <= 3
                and replay_derivation(AZ2, path_atoms(I), d, width=3)
                and all(grounded_step_consistent(s, 2) for s in d.steps)):
            replays += 1
    ok = matches == replays == total == 100
    _report(4, ok, f"window reachability matches independent connectivity "
                   f"{matches}/{total}; width-3 derivations replay with "
                   f"consistent rule and mirror {replays}/{total}")


# ---------------------------------------------------------------------------
# 5. gap compression

def test_ac5_gap_compression():
    equisat = profile_match = total = 0
    for seed in range(100):
        length = 3 + seed % 8
        I = gen_random_path_instance(AZ2, length, 0.55, seed=seed, hm=HM_AZ2)
        total += 1
        I_lam, U = build_I_lambda(I)
        if path_satisfiable(I_lam) == path_satisfiable(I):
            equisat += 1
        C = forward_sets(I)
        D = forward_sets(I_lam)
        if all(D[p] == C[u - 1] for p, u in enumerate(U)):
            profile_match += 1
    ok = equisat == profile_match == total == 100
    _report(5, ok, f"compressed instance equisatisfiable {equisat}/{total}; "
                   f"forward sets preserved at kept indices "
                   f"{profile_match}/{total}")


# ---------------------------------------------------------------------------
# 6. braid gluing

def _arc_consistent(I):
    unary = [set(I.unary_set(i)) for i in range(1, I.length + 1)]
    binary = [set(I.binary_at(i).tuples) for i in range(1, I.length)]
    changed = True
    while changed:
        changed = False
        for i in range(I.length - 1):
            trimmed = {(a, b) for (a, b) in binary[i]
                       if a in unary[i] and b in unary[i + 1]}
            u = {a for a, _ in trimmed}
            w = {b for _, b in trimmed}
            if trimmed != binary[i] or u != unary[i] or w != unary[i + 1]:
                binary[i] = trimmed
                unary[i] = u
                unary[i + 1] = w
                changed = True
    if any(not u for u in unary):
        return None
    return PathInstance(I.structure,
                        tuple(Relation.of(1, {(a,) for a in u}) for u in unary),
                        tuple(Relation.of(2, b) for b in binary))


def test_ac6_braid_gluing():
    instances = braids = valid = 0
    seed = 0
    while instances < 50:
        seed += 1
        raw = gen_random_path_instance(AZ2, 3 + seed % 4, 0.7, seed=seed,
                                       hm=HM_AZ2)
        I = _arc_consistent(raw)
        if I is None:
            continue
        instances += 1
        sols = path_solutions(I)
        found = find_braid(I, 2)
        candidates = [found] if found is not None else []
        # also look for a braid whose strands are not all identical
        for idx in product(range(1, I.length + 1), repeat=2):
            if idx[0] >= idx[1]:
                continue
            done = False
            for triple in product(sols, repeat=3):
                if len({id(s) for s in triple}) == 1:
                    continue
                b = Braid(triple, idx)
                if braid_valid(b, I):
                    candidates.append(b)
                    done = True
                    break
            if done:
                break
        for braid in candidates:
            braids += 1
            t = braid_to_solution(I, braid, HM_AZ2)
            i1, i_n = braid.indices[0], braid.indices[-1]
            if (solution_satisfies(t, I.to_csp())
                    and t(i1) == braid.solutions[0](i1)
                    and t(i_n) == braid.solutions[-1](i_n)):
                valid += 1
    ok = braids == valid and braids >= 50
    _report(6, ok, f"{braids} braids on {instances} subdirect instances all "
                   f"glue to oracle-valid solutions with matching endpoint "
                   f"values ({valid}/{braids})")


# ---------------------------------------------------------------------------
# 7. derivation conjunction and stacking

def _stack_case(seed):
    """Flatten a random path instance along width-1 bags, derive the window
    reachability relation over the power domain, and stack it back down."""
    I = gen_random_path_instance(AZ2, 4 + seed % 3, 0.7, seed=seed, hm=HM_AZ2)
    J = I.to_csp()
    bags = tuple(frozenset({i, i + 1}) for i in range(1, I.length))
    D = PathDecomposition(bags, 1)
    K, bub, tuples = pathwidth_to_path(J, D)
    outer = lambda_derivation(K, 1, K.length)
    scope_map = {p: chi.variables for p, chi in enumerate(tuples, start=1)}
    atoms_I = instance_atoms(J)

    def u(atom):
        flat = tuple(x for v in atom.scope for x in scope_map[v])
        rel = unpack_encoded_relation(atom.rel, 2, bub.k)
        return conj_atoms([CanonAtom(flat, rel)], 2)

    inner = {}
    for p in range(1, K.length + 1):
        ua = u(CanonAtom((p,), K.unary_at(p)))
        bag_atoms = [a for a in atoms_I if set(a.scope) <= set(ua.scope)]
        inner[ua] = CanonDerivation((CanonStep(head=ua, sides=tuple(bag_atoms),
                                               idb=None),))
    for p in range(1, K.length):
        ua = u(CanonAtom((p, p + 1), K.binary_at(p)))
        inner[ua] = CanonDerivation((CanonStep(head=ua, sides=(), idb=None),))
    s = max(max(d.width() for d in inner.values()), 1)
    cap = outer.width() + bub.k * s
    stacked = stack_derivation(outer, inner, scope_map, power_k=bub.k,
                               base_domain_size=2, width_cap=cap)
    return stacked, atoms_I, cap


def test_ac7_conjunction_and_stacking():
    conjoin_ok = stack_ok = 0
    for seed in range(25):
        I = gen_random_path_instance(AZ2, 3 + seed % 4, 0.6, seed=seed,
                                     hm=HM_AZ2)
        d = lambda_derivation(I, 1, I.length)
        p = max(1, I.length // 2)
        R = I.unary_at(p)
        out = conjoin_derivation(d, R, (p,), k=1 + d.width(), domain_size=2)
        if (out.width() <= 1 + d.width()
                and replay_derivation(AZ2, path_atoms(I), out,
                                      width=1 + d.width())):
            conjoin_ok += 1
    for seed in range(25):
        stacked, atoms_I, cap = _stack_case(seed)
        if (stacked.width() <= cap
                and replay_derivation(AZ2, atoms_I, stacked, width=cap)):
            stack_ok += 1
    ok = conjoin_ok == stack_ok == 25
    _report(7, ok, f"conjoined derivations replay within width r+s "
                   f"{conjoin_ok}/25; stacked derivations replay within "
                   f"width r+k*s {stack_ok}/25")


# ---------------------------------------------------------------------------
# 8. flattening reduction end to end

def test_ac8_flattening_reduction():
    equisat = agree = witnesses = sat_count = total = 0
    for seed in range(200):
        width = 1 + seed % 2
        J, D = gen_random_pw_instance(AZ2, width, 2 + seed % 3, seed=seed)
        total += 1
        K, bub, tuples = pathwidth_to_path(J, D)
        j_sat = bool(brute_force_solutions(J))
        if bool(path_solutions(K)) == j_sat:
            equisat += 1
        verdict = decide_csp(AZ2, HM_AZ2, J, D)
        if verdict.satisfiable == j_sat:
            agree += 1
        if verdict.satisfiable:
            sat_count += 1
            if solution_satisfies(verdict.witness, J):
                witnesses += 1
    tri = CspInstance(AK2, (1, 2, 3), (Constraint((1, 2), "NEQ"),
                                       Constraint((2, 3), "NEQ"),
                                       Constraint((3, 1), "NEQ")))
    sq = CspInstance(AK2, (1, 2, 3, 4), (Constraint((1, 2), "NEQ"),
                                         Constraint((2, 3), "NEQ"),
                                         Constraint((3, 4), "NEQ"),
                                         Constraint((4, 1), "NEQ")))
    odd = not decide_csp(AK2, HM_AK2, tri,
                         PathDecomposition((frozenset({1, 2, 3}),), 2)
                         ).satisfiable
    even = decide_csp(AK2, HM_AK2, sq,
                      PathDecomposition((frozenset({1, 2, 4}),
                                         frozenset({2, 3, 4})), 2)
                      ).satisfiable
    ok = (equisat == agree == total == 200 and witnesses == sat_count
          and odd and even)
    _report(8, ok, f"equisatisfiability {equisat}/{total}, end-to-end "
                   f"oracle agreement {agree}/{total}, lifted witnesses "
                   f"valid {witnesses}/{sat_count}; odd cycle UNSAT "
                   f"{odd}, even cycle SAT {even}")


# ---------------------------------------------------------------------------
# 9. exact formulas

def test_ac9_exact_formulas():
    checks = [
        f_bound(3, 1, {}).f_values == {1: 2},
        f_bound(3, 2, {2: 10}).f_values == {1: 2, 2: 28},
        f_bound(3, 3, {2: 1, 3: 1}).f_values == {1: 2, 2: 10, 3: 18},
        width_bound(3, 4) == 18,
        all(width_bound(1, s) == s + 2 for s in range(1, 6)),
    ]
    ok = all(checks)
    _report(9, ok, "width recursion f(n,1)=2, f(n,N)=f(n,N-1)+2m+6 and "
                   "program width k*(s+2) reproduced exactly")


# ---------------------------------------------------------------------------
# 10. fragment semantics

from symcsp.algebra import RelationalStructure

_G = RelationalStructure(2, {"E": Relation.full(2, 2),
                             "S": Relation.full(1, 2),
                             "T": Relation.full(1, 2)})


def _graph(edges, starts=(), targets=()):
    vs = sorted({v for e in edges for v in e} | set(starts) | set(targets))
    cs = [Constraint(e, "E") for e in edges]
    cs += [Constraint((v,), "S") for v in starts]
    cs += [Constraint((v,), "T") for v in targets]
    return CspInstance(_G, tuple(vs), tuple(cs))


_PROGRAMS = [
    # forward reachability from marked starts
    ("#edb E/2\n#edb S/1\n#edb T/1\n#idb R/1\n#idb G/1\n#goal G\n"
     "R(x) :- S(x).\nR(y) :- R(x), E(x,y).\nG(x) :- R(x), T(x).\n",
     _graph([("a", "b"), ("b", "c")], starts=["a"], targets=["c"])),
    ("#edb E/2\n#edb S/1\n#edb T/1\n#idb R/1\n#idb G/1\n#goal G\n"
     "R(x) :- S(x).\nR(y) :- R(x), E(x,y).\nG(x) :- R(x), T(x).\n",
     _graph([("a", "b"), ("c", "a")], starts=["b"], targets=["c"])),
    # undirected reachability (mirror-closed)
    ("#edb E/2\n#edb S/1\n#edb T/1\n#idb R/1\n#idb G/1\n#goal G\n"
     "R(x) :- S(x).\nR(y) :- R(x), E(x,y).\nR(x) :- R(y), E(x,y).\n"
     "G(x) :- R(x), T(x).\nR(x) :- G(x), T(x).\n",
     _graph([("a", "b"), ("c", "b")], starts=["a"], targets=["c"])),
    ("#edb E/2\n#edb S/1\n#edb T/1\n#idb R/1\n#idb G/1\n#goal G\n"
     "R(x) :- S(x).\nR(y) :- R(x), E(x,y).\nR(x) :- R(y), E(x,y).\n"
     "G(x) :- R(x), T(x).\nR(x) :- G(x), T(x).\n",
     _graph([("a", "b")], starts=["a"], targets=["d"])),
    # transitive closure pair predicate
    ("#edb E/2\n#edb S/1\n#idb P/2\n#goal P\n"
     "P(x,y) :- E(x,y).\nP(x,z) :- P(x,y), E(y,z).\n",
     _graph([("a", "b"), ("b", "c")])),
    ("#edb E/2\n#edb S/1\n#idb P/2\n#goal P\n"
     "P(x,y) :- E(x,y).\nP(x,z) :- P(x,y), E(y,z).\n",
     _graph([], starts=["a"])),
    # walks of even length (linear, parity automaton)
    ("#edb E/2\n#edb S/1\n#idb Even/1\n#idb Odd/1\n#goal Odd\n"
     "Even(x) :- S(x).\nOdd(y) :- Even(x), E(x,y).\n"
     "Even(y) :- Odd(x), E(x,y).\n",
     _graph([("a", "b"), ("b", "a")], starts=["a"])),
    ("#edb E/2\n#edb S/1\n#idb Even/1\n#idb Odd/1\n#goal Odd\n"
     "Even(x) :- S(x).\nOdd(y) :- Even(x), E(x,y).\n"
     "Even(y) :- Odd(x), E(x,y).\n",
     _graph([], starts=["a"])),
    # two-sided pebble: mirror-closed pair walker
    ("#edb E/2\n#edb S/1\n#idb P/2\n#idb G/1\n#goal G\n"
     "P(x,x) :- S(x).\n"
     "P(y,z) :- P(x,z), E(x,y).\nP(x,z) :- P(y,z), E(x,y).\n"
     "G(x) :- P(x,x), E(x,x).\nP(x,x) :- G(x), E(x,x).\n",
     _graph([("a", "b"), ("a", "a")], starts=["b"])),
    ("#edb E/2\n#edb S/1\n#idb P/2\n#idb G/1\n#goal G\n"
     "P(x,x) :- S(x).\n"
     "P(y,z) :- P(x,z), E(x,y).\nP(x,z) :- P(y,z), E(x,y).\n"
     "G(x) :- P(x,x), E(x,x).\nP(x,x) :- G(x), E(x,x).\n",
     _graph([("a", "b")], starts=["a"])),
    # reachability constrained by a side mark at every step
    ("#edb E/2\n#edb S/1\n#edb T/1\n#idb R/1\n#goal R\n"
     "R(x) :- S(x), T(x).\nR(y) :- R(x), E(x,y), T(y).\n",
     _graph([("a", "b")], starts=["a"], targets=["a", "b"])),
    ("#edb E/2\n#edb S/1\n#edb T/1\n#idb R/1\n#goal R\n"
     "R(x) :- S(x), T(x).\nR(y) :- R(x), E(x,y), T(y).\n",
     _graph([("a", "b")], starts=["a"], targets=["b"])),
    # mirror-closed marked walk
    ("#edb E/2\n#edb S/1\n#edb T/1\n#idb R/1\n#goal R\n"
     "R(x) :- S(x), T(x).\n"
     "R(y) :- R(x), E(x,y), T(y), T(x).\n"
     "R(x) :- R(y), E(x,y), T(y), T(x).\n",
     _graph([("a", "b"), ("b", "c")], starts=["a"],
            targets=["a", "b", "c"])),
    ("#edb E/2\n#edb S/1\n#edb T/1\n#idb R/1\n#goal R\n"
     "R(x) :- S(x), T(x).\n"
     "R(y) :- R(x), E(x,y), T(y), T(x).\n"
     "R(x) :- R(y), E(x,y), T(y), T(x).\n",
     _graph([("a", "b"), ("b", "c")], starts=["a"], targets=["a", "c"])),
    # pair predicate seeded from two marks
    ("#edb E/2\n#edb S/1\n#edb T/1\n#idb Q/2\n#goal Q\n"
     "Q(x,y) :- S(x), T(y), E(x,y).\nQ(x,z) :- Q(x,y), E(y,z).\n",
     _graph([("a", "b"), ("b", "c")], starts=["a"], targets=["b"])),
    ("#edb E/2\n#edb S/1\n#edb T/1\n#idb Q/2\n#goal Q\n"
     "Q(x,y) :- S(x), T(y), E(x,y).\nQ(x,z) :- Q(x,y), E(y,z).\n",
     _graph([("a", "b"), ("b", "c")], starts=["b"], targets=["a"])),
    # symmetric pair swapper
    ("#edb E/2\n#idb P/2\n#goal P\n"
     "P(x,y) :- E(x,y), E(y,x).\n"
     "P(y,x) :- P(x,y), E(x,y).\nP(x,y) :- P(y,x), E(x,y).\n",
     _graph([("a", "b"), ("b", "a")])),
    ("#edb E/2\n#idb P/2\n#goal P\n"
     "P(x,y) :- E(x,y), E(y,x).\n"
     "P(y,x) :- P(x,y), E(x,y).\nP(x,y) :- P(y,x), E(x,y).\n",
     _graph([("a", "b"), ("b", "c")])),
    # linear chain with unary relay
    ("#edb E/2\n#edb S/1\n#idb A/1\n#idb B/1\n#goal B\n"
     "A(x) :- S(x).\nB(y) :- A(x), E(x,y), E(y,y).\n",
     _graph([("a", "b"), ("b", "b")], starts=["a"])),
    ("#edb E/2\n#edb S/1\n#idb A/1\n#idb B/1\n#goal B\n"
     "A(x) :- S(x).\nB(y) :- A(x), E(x,y), E(y,y).\n",
     _graph([("a", "b")], starts=["a"])),
]


def test_ac10_fragment_semantics():
    assert len(_PROGRAMS) == 20
    agree = sym_ok = sym_total = 0
    for text, I in _PROGRAMS:
        P = parse_program(text)
        kind = classify_program(P)
        assert kind in ("linear", "symmetric")
        _, goal = evaluate(P, I, goal_check=False)
        G = derivation_graph(P, I)
        if goal == goal_reachable(G, P.goals):
            agree += 1
        if kind == "symmetric":
            sym_total += 1
            sym_ok += G.is_symmetric()
    ok = agree == 20 and sym_ok == sym_total and sym_total >= 5
    _report(10, ok, f"goal semantics match graph reachability {agree}/20; "
                    f"symmetric programs yield symmetric graphs "
                    f"{sym_ok}/{sym_total}")
