"""Command-line interface.

Exit status: 0 on success (truncated reports and Unknown certificates
included), 2 on bad input, 3 when a theorem-guaranteed property fails.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .chains import (DEFAULT_MATRIX_BUDGET, ReferenceConstants, check_fp_monotone,
                     check_index_inequality, cyclic_chain, derived_p_series, report,
                     strict_inequality_flags)
from .constructions import (Budgets, counterexample_closed_forms, free_product_counterexample,
                            is_p_regular, staged_driver, verify_certificate)
from .errors import InvariantViolation, PGradientError, ResourceLimitError
from .groupring import load_demo_catalog, random_suite, run_demo
from .homology import abelian_invariants
from .presentations import parse_presentation
from .quotients import DEFAULT_INDEX_BUDGET
from .verifiers import verify_state

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3


@dataclass
class RunConfig:
    command: str
    inputs: list[str] = field(default_factory=list)
    primes: list[int] = field(default_factory=list)
    moduli: list[int] = field(default_factory=list)
    depth: int = 2
    index_budget: int = DEFAULT_INDEX_BUDGET
    matrix_budget: int = DEFAULT_MATRIX_BUDGET
    seed: int = 0
    output_format: str = "json"

    def __post_init__(self):
        if self.index_budget <= 0 or self.matrix_budget <= 0:
            raise InputError("budgets must be positive")
        for p in self.primes:
            if not _is_prime(p):
                raise InputError(f"{p} is not prime")
        if not 0 <= self.seed < 2 ** 64:
            raise InputError("seed must be a 64-bit unsigned integer")


class InputError(PGradientError, ValueError):
    pass


def _is_prime(n: int) -> bool:
    return n >= 2 and all(n % k for k in range(2, int(n ** 0.5) + 1))


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _jsonable(x):
    if isinstance(x, Fraction):
        return {"num": x.numerator, "den": x.denominator}
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2)


def _read_presentation(path: str):
    text = Path(path).read_text()
    # comment lines are blanked so error locations still match the file
    lines = ["" if ln.lstrip().startswith("#") else ln for ln in text.split("\n")]
    return parse_presentation("\n".join(lines))


def _emit(out, text: str):
    out.write(text if text.endswith("\n") else text + "\n")


# ---------------------------------------------------------------- commands

def cmd_b1(args, cfg: RunConfig, out):
    P = _read_presentation(args.presentation)
    inv = abelian_invariants(P, cfg.primes)
    rec = inv.to_record()
    rec["presentation"] = str(P)
    if cfg.output_format == "text":
        mods = ", ".join(f"b1(F_{p}) = {b}" for p, b in sorted(inv.betti_mod.items()))
        _emit(out, f"H_1 = {inv}\nb1 = {inv.free_rank}\n{mods}\nd(H_1) = {inv.d_H1}")
    else:
        _emit(out, _dump(rec))
    return EXIT_OK


def _report_output(rep, cfg, out, extra: dict):
    if cfg.output_format == "csv":
        _emit(out, rep.to_csv())
    elif cfg.output_format == "text":
        lines = [rep.to_text()]
        for k, v in extra.items():
            lines.append(f"{k}: {json.dumps(_jsonable(v), sort_keys=True)}")
        _emit(out, "\n".join(lines))
    else:
        rec = rep.to_json_record()
        rec.update(_jsonable(extra))
        _emit(out, json.dumps(rec, sort_keys=True, indent=2))


def _p_chain_checks(rep, chain, primes) -> dict:
    extra = {}
    for p in primes:
        if chain.is_p_chain(p) and rep.rows:
            mono = check_fp_monotone(rep, p)
            if not mono.monotone:
                raise InvariantViolation(f"F_{p} ratios increase at level {mono.first_violation}")
            ineq = check_index_inequality(rep, p)
            if not all(ok for _, ok in ineq):
                raise InvariantViolation(f"index inequality fails over F_{p}")
            extra[f"monotone_F{p}"] = True
            extra[f"index_inequality_F{p}"] = True
    return extra


def _refs(args):
    return ReferenceConstants(Fraction(args.b1_l2) if getattr(args, "b1_l2", None) is not None else None)


def cmd_chain(args, cfg: RunConfig, out):
    P = _read_presentation(args.presentation)
    if args.kind == "cyclic":
        if not args.weights or not cfg.moduli:
            raise InputError("cyclic chains need --weights and --moduli")
        chain = cyclic_chain(P, args.weights, cfg.moduli)
    else:
        if args.p is None:
            raise InputError("derived chains need -p")
        chain = derived_p_series(P, args.p, cfg.depth, cfg.index_budget)
    primes = sorted(set(cfg.primes) | ({args.p} if args.p else set()))
    rep = report(chain, primes, _refs(args), cfg.matrix_budget)
    extra = _p_chain_checks(rep, chain, primes)
    if args.flags_prime:
        extra["strict_inequalities"] = strict_inequality_flags(rep, args.flags_prime)
    _report_output(rep, cfg, out, extra)
    return EXIT_OK


def cmd_gradient(args, cfg: RunConfig, out):
    P = _read_presentation(args.presentation)
    chain = derived_p_series(P, args.p, cfg.depth, cfg.index_budget)
    rep = report(chain, [args.p], _refs(args), cfg.matrix_budget)
    extra = _p_chain_checks(rep, chain, [args.p])
    vals = [r.ratios[f"b1_mod_{args.p}"] for r in rep.rows]
    extra["p_gradient_upper_bound"] = min(vals) if vals else None
    _report_output(rep, cfg, out, extra)
    return EXIT_OK


def cmd_counterexample(args, cfg: RunConfig, out):
    moduli = cfg.moduli or [2, 4, 8]
    P, chain = free_product_counterexample(args.p, args.q, moduli)
    primes = sorted({args.p, args.q} | set(cfg.primes))
    rep = report(chain, primes, _refs(args), cfg.matrix_budget)
    mismatches = []
    for r in rep.rows:
        cf = counterexample_closed_forms(r.index)
        got = (r.b1_rational, r.b1_mod[args.p], r.b1_mod[args.q], r.d_H1, r.rank_upper)
        want = (cf.b1, cf.b1_p, cf.b1_q, cf.d_H1, cf.rank_upper)
        if got != want:
            mismatches.append({"level": r.i, "computed": got, "closed_form": want})
    flags = strict_inequality_flags(rep, args.p)
    if mismatches:
        raise InvariantViolation(f"closed forms disagree: {mismatches}")
    extra = {"presentation": str(P), "closed_forms_match": True, "strict_inequalities": flags}
    _report_output(rep, cfg, out, extra)
    return EXIT_OK


def cmd_oracle_groupring(args, cfg: RunConfig, out):
    results = random_suite(samples=args.samples, max_dim=args.max_dim, seed=cfg.seed)
    demos = []
    for entry in load_demo_catalog():
        r = run_demo(entry)
        demos.append({"name": entry["name"], "lhs": r.lhs, "rhs": r.rhs, "holds": r.holds,
                      "matches_catalog": (r.lhs, r.rhs, r.holds) == (entry["expected"]["lhs"],
                                                                     entry["expected"]["rhs"],
                                                                     entry["expected"]["holds"])})
    violations = sum(r.violations for r in results)
    rec = {"seed": cfg.seed, "samples_per_group": args.samples, "violations": violations,
           "groups": [{"group": r.group, "p": r.p, "violations": r.violations,
                       "equalities": r.equalities} for r in results],
           "demos": demos}
    if cfg.output_format == "text":
        lines = [f"{r.group} (p={r.p}): {r.violations} violations, {r.equalities} equalities"
                 for r in results]
        lines += [f"demo {d['name']}: lhs {d['lhs']} rhs {d['rhs']} holds={d['holds']}" for d in demos]
        lines.append(f"total violations: {violations}")
        _emit(out, "\n".join(lines))
    else:
        _emit(out, _dump(rec))
    if violations or not all(d["matches_catalog"] for d in demos):
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_regularity(args, cfg: RunConfig, out):
    P = _read_presentation(args.presentation)
    cert = is_p_regular(P, args.p, cfg.depth, args.e_max, cfg.index_budget)
    if cert.certified and not verify_certificate(P, cert):
        raise InvariantViolation("certificate does not replay")
    rec = cert.to_record()
    rec["presentation"] = str(P)
    if cfg.output_format == "text":
        _emit(out, f"{cert.status}" + (f" with witness of index {cert.witness_index}" if cert.certified else "")
              + (f"\n{cert.note}" if cert.note else ""))
    else:
        _emit(out, _dump(rec))
    return EXIT_OK


def cmd_construct(args, cfg: RunConfig, out):
    budgets = Budgets(index_budget=cfg.index_budget, matrix_budget=cfg.matrix_budget,
                      depth_budget=cfg.depth)
    state = None
    if args.resume:
        from .constructions import ConstructionState
        state = ConstructionState.from_record(json.loads(Path(args.resume).read_text()))
    sched = None
    if args.delta:
        sched = [Fraction(x) for x in args.delta.split(",")]
    field_mode = "rational" if args.field is None else args.field
    log_fh = open(args.log, "w") if args.log else None
    try:
        sink = (lambda rec: log_fh.write(json.dumps(rec, sort_keys=True) + "\n")) if log_fh else None
        res = staged_driver(args.d, args.p, Fraction(args.epsilon), sched, args.stages, budgets,
                               cfg.seed, field_mode, state, sink)
    finally:
        if log_fh:
            log_fh.close()
    if args.state_out:
        Path(args.state_out).write_text(res.state.to_json() + "\n")
    verdicts = verify_state(res.state.to_record())
    rec = {"status": res.state.status, "failure": res.state.failure, "stages": res.state.stage,
           "relators": res.state.relators(),
           "checks": [v.to_record() for v in verdicts],
           "measurements": [s.measurements for s in res.state.stages]}
    if cfg.output_format == "text":
        lines = [f"status: {res.state.status}" + (f" ({res.state.failure})" if res.state.failure else "")]
        lines += [f"stage {v.stage} ({v.condition}): {'ok' if v.ok else 'FAILED'}  {v.detail}" for v in verdicts]
        _emit(out, "\n".join(lines))
    else:
        _emit(out, _dump(rec))
    if not all(v.ok for v in verdicts):
        return EXIT_INVARIANT
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _global_options(parser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(0), help="random seed (64-bit)")
    parser.add_argument("--format", dest="output_format", choices=["json", "csv", "text"],
                        default=d("json"))
    parser.add_argument("--index-budget", type=int, default=d(DEFAULT_INDEX_BUDGET))
    parser.add_argument("--matrix-budget", type=int, default=d(DEFAULT_MATRIX_BUDGET))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pgradient", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    _global_options(ap, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("b1", parents=[common], help="abelian invariants of a presentation")
    s.add_argument("presentation")
    s.add_argument("--primes", type=_int_list, default=[])
    s.set_defaults(func=cmd_b1)

    s = sub.add_parser("chain", parents=[common], help="per-level report along a chain")
    s.add_argument("presentation")
    s.add_argument("--kind", choices=["cyclic", "derived"], default="derived")
    s.add_argument("--weights", type=_int_list)
    s.add_argument("--moduli", type=_int_list, default=[])
    s.add_argument("-p", type=int)
    s.add_argument("--depth", type=int, default=2)
    s.add_argument("--primes", type=_int_list, default=[])
    s.add_argument("--b1-l2", help="reference L2-Betti number, e.g. 1 or 3/2")
    s.add_argument("--flags-prime", type=int, help="report the strict-inequality flags for this prime")
    s.set_defaults(func=cmd_chain)

    s = sub.add_parser("gradient", parents=[common], help="F_p ratios along the derived p-series")
    s.add_argument("presentation")
    s.add_argument("-p", type=int, required=True)
    s.add_argument("--depth", type=int, default=2)
    s.add_argument("--b1-l2")
    s.set_defaults(func=cmd_gradient)

    s = sub.add_parser("counterexample", parents=[common], help="free-product family on Z/p * Z/q * Z/q * Z")
    s.add_argument("-p", type=int, default=2)
    s.add_argument("-q", type=int, default=3)
    s.add_argument("--moduli", type=_int_list, default=[2, 4, 8])
    s.add_argument("--primes", type=_int_list, default=[])
    s.add_argument("--b1-l2")
    s.set_defaults(func=cmd_counterexample)

    s = sub.add_parser("oracle-groupring", parents=[common], help="random check of the group-ring dimension inequality")
    s.add_argument("--samples", type=int, default=500)
    s.add_argument("--max-dim", type=int, default=3)
    s.set_defaults(func=cmd_oracle_groupring)

    s = sub.add_parser("regularity", parents=[common], help="search for a p-regularity witness")
    s.add_argument("presentation")
    s.add_argument("-p", type=int, required=True)
    s.add_argument("--depth", type=int, default=3)
    s.add_argument("--e-max", type=int, default=3)
    s.set_defaults(func=cmd_regularity)

    s = sub.add_parser("construct", parents=[common], help="staged construction with verified conditions")
    s.add_argument("-d", type=int, default=2)
    s.add_argument("-p", type=int, default=2)
    s.add_argument("--epsilon", default="9/10")
    s.add_argument("--stages", type=int, default=1)
    s.add_argument("--delta", help="comma-separated delta_n values (default (3/4) 2^(1-n))")
    s.add_argument("--field", type=int, help="prime q: bound b1 over F_q at odd levels")
    s.add_argument("--depth", type=int, default=3)
    s.add_argument("--log", help="write the JSON-lines action log here")
    s.add_argument("--state-out", help="write the final state here")
    s.add_argument("--resume", help="continue from a saved state")
    s.set_defaults(func=cmd_construct)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = RunConfig(command=args.command,
                        inputs=[args.presentation] if hasattr(args, "presentation") else [],
                        primes=list(getattr(args, "primes", []) or []),
                        moduli=list(getattr(args, "moduli", []) or []),
                        depth=getattr(args, "depth", 2),
                        index_budget=args.index_budget, matrix_budget=args.matrix_budget,
                        seed=args.seed, output_format=args.output_format)
        if cfg.output_format == "csv" and args.command not in ("chain", "gradient", "counterexample"):
            raise InputError("csv output is only available for chain reports")
        return args.func(args, cfg, out)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ResourceLimitError as exc:
        _emit(out, _dump({"truncated": True, "reason": str(exc), "required": exc.required,
                          "budget": exc.budget}))
        return EXIT_OK
    except (PGradientError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
