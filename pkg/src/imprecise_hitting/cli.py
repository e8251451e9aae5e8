"""Command line interface.

Exit codes: 0 success, 1 iteration did not converge, 2 invalid model or
arguments, 3 an oracle disagrees with the library.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import iteration, oracle
from .errors import ImcError, NotConverged, ParseError, ValidationError
from .modelio import dump_document, labelled, model_digest, parse_model
from .structure import DEFAULT_LAMBDAS, LambdaWitness, classify_states, extract_witness

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_INVALID, EXIT_DISAGREE = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imc",
        description="Hitting time and hitting probability bounds for imprecise Markov chains.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help="model JSON file")
    common.add_argument("--out", help="result JSON file (default: stdout)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="compute a lower or upper bound")
    p.add_argument("--quantity", choices=["time", "prob"], required=True)
    p.add_argument("--bound", choices=["lower", "upper"], required=True)
    p.add_argument("--exact", action="store_true",
                   help="classify and run policy iteration instead of value iteration")
    p.add_argument("--tol", type=float, default=None,
                   help=f"step-size tolerance (default {iteration.TIME_TOL:g} for time, "
                        f"{iteration.PROB_TOL:g} for prob)")
    p.add_argument("--max-iter", type=int, default=iteration.MAX_ITER)
    p.add_argument("--trace", help="write the iteration trace to this CSV file")
    p.add_argument("--witness", action="store_true", help="include a witness matrix")

    sub.add_parser("classify", parents=[common], help="report the sets B, U, Z and C")

    p = sub.add_parser("oracle", parents=[common], help="check the library against an oracle")
    p.add_argument("--mode", choices=["brute", "tree", "mc"], required=True)
    p.add_argument("--horizon", type=int, default=10)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _matrix_doc(matrix, labels):
    return {labels[x]: labelled(labels, row) for x, row in enumerate(np.asarray(matrix))}


def _witness_doc(witness, labels):
    if witness is None:
        return None
    if isinstance(witness, LambdaWitness):
        return {
            "kind": "lambda",
            "lambda": witness.lam,
            "matrix": _matrix_doc(witness.matrix, labels),
            "achieved": labelled(labels, witness.achieved),
            "sequence": [{"lambda": lam, "values": labelled(labels, v)}
                         for lam, v in witness.sequence],
        }
    return {"kind": "matrix", "matrix": _matrix_doc(witness, labels)}


def _solve(args, chain, target, doc):
    labels = chain.labels
    tol = args.tol
    if tol is None:
        tol = iteration.TIME_TOL if args.quantity == "time" else iteration.PROB_TOL
    doc["configuration"] = {
        "quantity": args.quantity,
        "bound": args.bound,
        "exact": args.exact,
        "tol": tol,
        "max_iter": args.max_iter,
    }
    if args.quantity == "prob" and args.bound == "upper":
        doc["configuration"]["lambda_schedule"] = list(DEFAULT_LAMBDAS)
    result = iteration.solve(chain, target, args.quantity, args.bound, args.exact, tol,
                             args.max_iter)
    doc["values"] = labelled(labels, result.values)
    doc["residuals"] = {"fixed_point": result.residual,
                        "final_delta": result.trace.deltas[-1]}
    doc["iterations"] = len(result.trace) - 1
    doc["reason"] = result.trace.reason
    doc["infinite"] = [labels[x] for x in sorted(result.infinite)]
    if args.witness:
        witness = result.witness
        if witness is None and 0 < len(target) < chain.size:
            witness = extract_witness(chain, target, args.quantity, args.bound)
        doc["witness"] = _witness_doc(witness, labels)
    if args.trace:
        iteration.emit_trace(result.trace, args.trace, labels)
    return EXIT_OK


def _classify(args, chain, target, doc):
    doc["classification"] = classify_states(chain, target).to_dict(chain.labels)
    return EXIT_OK


def _oracle(args, chain, target, doc):
    labels = chain.labels
    doc["configuration"] = {"mode": args.mode}
    if args.mode == "brute":
        report = oracle.brute_force_envelope(chain, target)
        doc["envelope"] = report.to_dict()
        flags = report.flags
    elif args.mode == "tree":
        doc["configuration"]["horizon"] = args.horizon
        flags, tree = {}, {}
        for q in ("time", "prob"):
            for b in ("lower", "upper"):
                got = oracle.backward_induction_truncated(chain, target, args.horizon, b, q)
                want = iteration.recursion_prefix(chain, target, q, b, args.horizon)[-1]
                tree[f"{b}_{q}"] = {"tree": labelled(labels, got),
                                    "recursion": labelled(labels, want)}
                flags[f"{b}_{q}"] = oracle.agree(got, want, 1e-10)
        doc["tree"] = tree
    else:
        doc["configuration"].update(horizon=args.horizon, samples=args.samples, seed=args.seed)
        report = oracle.monte_carlo_envelope_check(chain, target, args.horizon, args.samples,
                                                   args.seed)
        doc["monte_carlo"] = report.to_dict()["monte_carlo"]
        flags = report.flags
    doc["flags"] = flags
    return EXIT_OK if all(flags.values()) else EXIT_DISAGREE


COMMANDS = {"solve": _solve, "classify": _classify, "oracle": _oracle}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        chain, target = parse_model(args.model)
    except (ParseError, ValidationError) as exc:
        print(f"imc: {exc}", file=sys.stderr)
        return EXIT_INVALID
    doc = {"command": args.command, "model_digest": model_digest(chain, target)}
    try:
        code = COMMANDS[args.command](args, chain, target, doc)
    except NotConverged as exc:
        print(f"imc: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (ValidationError, ValueError) as exc:
        print(f"imc: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ImcError as exc:
        print(f"imc: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = dump_document(doc)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


def main(argv=None) -> None:
    sys.exit(run_command(argv))
