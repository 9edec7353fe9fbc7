"""Command-line interface.

Subcommands: build, solve, embed, bench, verify.  File formats are JSON
(objectives, samples, embeddings, campaign configs) and the line-based
Ising text format; see README for schemas.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .bench import CampaignConfig, export_scaling, run_campaign
from .builders import build_block_table, build_column_table, build_direct, decode_solution, plan_blocks
from .embed import EmbeddingNotFoundError, chimera, embed_ising, find_embedding
from .model import fits_length_convention, make_instance, verify_factorization
from .pbf import IsingProgram, PseudoBooleanPolynomial, quadratize, to_ising
from .solvers import SampleSet, SAParams, Schedule, ScheduleParams, brute_force, schedule_anneal, simulated_annealing


def _write_json(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _load_polynomial(path: str) -> PseudoBooleanPolynomial:
    with open(path, encoding="utf-8") as fh:
        return PseudoBooleanPolynomial.from_json_dict(json.load(fh))


def cmd_build(args) -> int:
    instance = make_instance(args.n, L_p=args.lp, L_q=args.lq)
    if args.method == "direct":
        objective = build_direct(instance)
    elif args.method == "column":
        objective, _ = build_column_table(instance)
    else:
        plan = plan_blocks(instance, max_coeff_bound=args.block_bound)
        objective = build_block_table(instance, plan)
    if args.hubo:
        payload = objective.to_json_dict()
    else:
        qubo, _ = quadratize(objective)
        payload = qubo.to_json_dict()
    payload["instance"] = instance.to_json_dict()
    _write_json(payload, args.out)
    return 0


def cmd_solve(args) -> int:
    program = _load_polynomial(args.infile)
    if args.solver == "brute":
        samples = brute_force(program)
    elif args.solver == "sa":
        samples = simulated_annealing(
            program,
            SAParams(reads=args.reads, sweeps=args.sweeps, t_init=args.t_init,
                     t_final=args.t_final, seed=args.seed),
        )
    else:
        schedule = Schedule.linear(args.schedule_points)
        samples = schedule_anneal(
            to_ising(program), schedule,
            ScheduleParams(reads=args.reads, temperature=args.temperature, seed=args.seed),
        )
    _write_json(samples.to_json_dict(), args.out)
    best = samples.first
    print(f"lowest energy {best.energy} ({best.occurrences} of {samples.num_reads()} reads)",
          file=sys.stderr)
    return 0


def cmd_embed(args) -> int:
    program = _load_polynomial(args.infile)
    m, n, t = (int(x) for x in args.chimera.lower().split("x"))
    hw = chimera(m, n, t)
    ising = to_ising(program)
    try:
        embedding = find_embedding(ising, hw, seed=args.seed, tries=args.tries)
    except EmbeddingNotFoundError as exc:
        print(f"embedding failed: {exc}", file=sys.stderr)
        return 1
    embedded = embed_ising(ising, embedding, hw, j_chain=Fraction(args.jchain))
    _write_json(embedded.to_json_dict(), args.out)
    stats = embedded.embedding.to_json_dict()["stats"]
    print(f"embedded {stats['logical_variables']} logical variables onto "
          f"{stats['physical_qubits']} physical qubits", file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        config = CampaignConfig.from_json_dict(json.load(fh))
    records, report = run_campaign(config)
    csv_text = export_scaling(records)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    else:
        print(csv_text, end="")
    for entry in report.entries:
        shown = f"{float(entry.tts_us):.1f} us" if entry.tts_us is not None else "no solution"
        print(f"N={entry.n} (L_N={entry.l_n}): TTS {shown}", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    instance = make_instance(args.n, L_p=args.lp, L_q=args.lq)
    ok = verify_factorization(instance, args.p, args.q)
    print(f"{args.p} * {args.q} = {args.p * args.q}"
          f" {'==' if ok else '!='} {instance.N}")
    if not ok:
        return 1
    if not fits_length_convention(instance, args.p, args.q):
        print(
            f"warning: ({args.p}, {args.q}) does not fit the declared factor lengths "
            f"L_p={instance.L_p}, L_q={instance.L_q}; built objectives for this instance "
            f"have no zero-energy state"
        )
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="factorqubo",
                                     description="Factorization as QUBO/Ising optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a factorization objective")
    p.add_argument("--n", type=int, required=True, help="odd integer to factor")
    p.add_argument("--method", choices=("direct", "column", "block"), default="block")
    p.add_argument("--block-bound", type=int, default=None,
                   help="largest allowed squared-equation coefficient (default L_N^3)")
    p.add_argument("--hubo", action="store_true", help="emit the raw HUBO without quadratization")
    p.add_argument("--lp", type=int, default=None, help="override factor bit length for p")
    p.add_argument("--lq", type=int, default=None, help="override factor bit length for q")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("solve", help="sample a QUBO from file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--solver", choices=("brute", "sa", "schedule"), default="sa")
    p.add_argument("--reads", type=int, default=1000)
    p.add_argument("--sweeps", type=int, default=64)
    p.add_argument("--t-init", type=float, default=None)
    p.add_argument("--t-final", type=float, default=0.1)
    p.add_argument("--schedule-points", type=int, default=32)
    p.add_argument("--temperature", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("embed", help="minor-embed a QUBO onto a Chimera graph")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--chimera", default="16x16x4", help="hardware shape MxNxT")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tries", type=int, default=10)
    p.add_argument("--jchain", type=int, default=-2)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("bench", help="run a campaign from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="check a candidate factor pair")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--lp", type=int, default=None)
    p.add_argument("--lq", type=int, default=None)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
