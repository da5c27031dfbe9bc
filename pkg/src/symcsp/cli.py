"""Command line entry point.

Exit codes: 0 completed, 2 property violation detected, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import fileio
from .algebra import BudgetExceededError, find_hm_chain, verify_hm_chain
from .bubble import decide_csp, pathwidth_to_path, width_bound
from .canon import CanonConfig, canon_evaluate
from .engine import classify_program, evaluate, parse_program, print_program
from .instances import brute_force_solutions, microstructure_dot, path_solutions
from .pathsolver import (ShrinkError, f_bound, lambda_relation, shrink_instance,
                         solve_path)
from .workbench import ExperimentConfig, run_experiment

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_BUDGET = 3


def _add_common(p):
    p.add_argument("--structure", default="AZ2")
    p.add_argument("--instance", help="instance file")
    p.add_argument("--width", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=2 ** 24)
    p.add_argument("--format", default="text", choices=["text", "dot", "json"])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="symcsp")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ["hm-search", "solve", "eval", "lambda", "shrink", "bubble",
                 "experiment", "export"]:
        p = sub.add_parser(name)
        _add_common(p)
        if name == "hm-search":
            p.add_argument("--n-max", type=int, default=4)
        if name == "lambda":
            p.add_argument("--window", default="1:2",
                           help="window as i:j")
        if name == "shrink":
            p.add_argument("--window-len", type=int, default=10)
        if name == "bubble":
            p.add_argument("--decomposition", required=False)
        if name == "eval":
            p.add_argument("--program", help="program file")
        if name == "experiment":
            p.add_argument("--trials", type=int, default=50)
            p.add_argument("--solvers", default="oracle,path")
            p.add_argument("--trace-dir")
        if name == "export":
            p.add_argument("--target", required=True,
                           choices=["microstructure", "program", "trace"])
            p.add_argument("--file")
    return ap


def _load_path_instance(args):
    if not args.instance:
        raise SystemExit("an --instance file is required")
    return fileio.load_path_instance(Path(args.instance).read_text())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


def _dispatch(args) -> int:
    S = fileio.resolve_structure(args.structure)
    cmd = args.command

    if cmd == "hm-search":
        chain = find_hm_chain(S, args.n_max, budget=args.budget)
        if chain is None:
            print(f"no chain up to n={args.n_max}")
        else:
            print(f"n={chain.n}")
            for i, term in enumerate(chain.terms):
                print(f"p{i}: {list(term.table)}")
            if not verify_hm_chain(chain, S):
                print("chain failed verification", file=sys.stderr)
                return EXIT_VIOLATION
        return EXIT_OK

    if cmd == "solve":
        I = _load_path_instance(args)
        chain = find_hm_chain(S, 4, budget=args.budget)
        if chain is None:
            print("structure admits no chain; falling back to search")
            sat = bool(path_solutions(I, args.budget))
            print("SAT" if sat else "UNSAT")
            return EXIT_OK
        verdict = solve_path(S, chain, I)
        oracle = bool(path_solutions(I, args.budget))
        print("SAT" if verdict.satisfiable else "UNSAT")
        if verdict.satisfiable != oracle:
            print("verdict disagrees with direct search", file=sys.stderr)
            return EXIT_VIOLATION
        return EXIT_OK

    if cmd == "eval":
        program = parse_program(Path(args.program).read_text())
        instance = fileio.load_instance(Path(args.instance).read_text())
        print(f"fragment: {classify_program(program)}")
        store, goal = evaluate(program, instance)
        print(f"goal: {'reached' if goal else 'not reached'}")
        for pred in sorted(store.facts):
            for tup in sorted(store.facts[pred], key=str):
                print(f"  {pred}{tup}")
        return EXIT_OK

    if cmd == "lambda":
        I = _load_path_instance(args)
        i, j = (int(x) for x in args.window.split(":"))
        lam = lambda_relation(I, i, j)
        print(f"lambda[{i},{j}] = {sorted(lam.pairs.tuples)}")
        return EXIT_OK

    if cmd == "shrink":
        I = _load_path_instance(args)
        try:
            K, selected = shrink_instance(I, args.window_len)
        except ShrinkError as exc:
            print(f"cannot shrink: {exc}", file=sys.stderr)
            return EXIT_VIOLATION
        print(f"selected indices: {selected}")
        print(fileio.dump_path_instance(K), end="")
        return EXIT_OK

    if cmd == "bubble":
        instance = fileio.load_instance(Path(args.instance).read_text())
        D = fileio.load_decomposition(Path(args.decomposition).read_text())
        chain = find_hm_chain(S, 4, budget=args.budget)
        if chain is None:
            print("structure admits no chain", file=sys.stderr)
            return EXIT_VIOLATION
        verdict = decide_csp(S, chain, instance, D)
        oracle = bool(brute_force_solutions(instance, args.budget))
        print("SAT" if verdict.satisfiable else "UNSAT")
        if verdict.satisfiable != oracle:
            print("verdict disagrees with direct search", file=sys.stderr)
            return EXIT_VIOLATION
        print(f"width bound: {width_bound(D.width + 1, 3)}")
        return EXIT_OK

    if cmd == "experiment":
        cfg = ExperimentConfig(structure=args.structure,
                               solvers=tuple(args.solvers.split(",")),
                               trials=args.trials, seed=args.seed,
                               budget=args.budget, trace_dir=args.trace_dir)
        report = run_experiment(cfg)
        print(report.canonical_text(), end="")
        total = len(report.verdicts)
        for pair, count in report.agreement_matrix().items():
            if count != total:
                return EXIT_VIOLATION
        return EXIT_OK

    if cmd == "export":
        if args.target == "microstructure":
            instance = fileio.load_instance(Path(args.instance).read_text())
            print(microstructure_dot(instance))
        elif args.target == "program":
            print(print_program(parse_program(Path(args.file).read_text())),
                  end="")
        elif args.target == "trace":
            trace = fileio.load_trace(Path(args.file).read_text())
            print(fileio.dump_trace(trace), end="")
        return EXIT_OK

    raise SystemExit(f"unknown command {cmd!r}")


if __name__ == "__main__":
    sys.exit(main())
