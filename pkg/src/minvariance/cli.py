"""Command-line driver: anonymize, verify, evaluate, oracle, synth, republish."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .colgen import ColGenParams
from .core import InfeasibleError, InvalidInputError, information_loss, total_sse
from .decomp import PipelineParams, run_pipeline
from .dynamic import PublicationSequence, republish, verify_m_invariance, verify_m_unique, verify_tau_safety
from .files import (
    IngestError,
    ingest,
    read_assignment,
    read_publications,
    write_assignment,
    write_dataset,
    write_publications,
    write_report,
)
from .oracle import BudgetError, brute_force_optimal
from .pricing import DEFAULT_NODE_CAP
from .synth import adult_like, uniform_instance

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INFEASIBLE = 2
EXIT_INPUT = 3

logger = logging.getLogger("minvariance")


@dataclass
class RunConfig:
    input: Path
    qis: list[str]
    sensitive: str
    m: int
    s: int = 1
    seed: int = 0
    standardize: bool = False
    pre_swap: bool = True
    time_limit: float = 600.0
    node_cap: int = DEFAULT_NODE_CAP
    id_column: str | None = None
    categorical: list[str] = field(default_factory=list)
    assignment: Path | None = None
    report: Path | None = None

    def validate(self) -> None:
        if self.m < 2:
            raise InvalidInputError(f"m must be at least 2, got {self.m}")
        if self.s < 1:
            raise InvalidInputError(f"s must be at least 1, got {self.s}")
        if self.sensitive in self.qis:
            raise InvalidInputError("the sensitive column cannot also be a quasi-identifier")
        if self.time_limit <= 0:
            raise InvalidInputError("the time budget must be positive")
        if self.node_cap < 1:
            raise InvalidInputError("the node cap must be positive")

    def pipeline_params(self) -> PipelineParams:
        return PipelineParams(
            pre_swap=self.pre_swap,
            colgen=ColGenParams(time_limit=self.time_limit, node_cap=self.node_cap),
        )


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", type=Path, help="header-row delimited data file")
    p.add_argument("--qi", required=True, type=_split, help="comma-separated quasi-identifier columns")
    p.add_argument("--sensitive", required=True, help="sensitive column")
    p.add_argument("--id-column", default=None, help="tuple id column (default: row number)")
    p.add_argument("--categorical", type=_split, default=[], help="QI columns to integer-code")
    p.add_argument("--standardize", action="store_true", help="z-score the quasi-identifiers")


def _config(args) -> RunConfig:
    cfg = RunConfig(
        input=args.input,
        qis=args.qi,
        sensitive=args.sensitive,
        m=args.m,
        s=args.s,
        seed=args.seed,
        standardize=args.standardize,
        pre_swap=not args.no_pre_swap,
        time_limit=args.time_limit,
        node_cap=args.node_cap,
        id_column=args.id_column,
        categorical=args.categorical,
        assignment=getattr(args, "assignment", None),
        report=getattr(args, "report", None),
    )
    cfg.validate()
    return cfg


def _load(cfg: RunConfig):
    return ingest(
        cfg.input,
        cfg.qis,
        cfg.sensitive,
        id_column=cfg.id_column,
        categorical=cfg.categorical,
        standardize=cfg.standardize,
    )


def cmd_anonymize(args) -> int:
    cfg = _config(args)
    ds = _load(cfg)
    K, report = run_pipeline(ds, cfg.m, cfg.s, cfg.pipeline_params(), seed=cfg.seed)
    if cfg.assignment:
        write_assignment(K, ds, cfg.assignment)
    if cfg.report:
        write_report(report, cfg.report)
    for rec in report.stages:
        print(f"{rec.stage:<11} {rec.wall_time:9.2f}s  IL {rec.il:.2f}")
    print(f"lp bound SSE {report.lp_bound:.6g} (certified: {'yes' if report.lp_optimal else 'no'})")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ds = ingest(
        args.input,
        args.qi,
        args.sensitive,
        id_column=args.id_column,
        categorical=args.categorical,
        standardize=args.standardize,
    )
    K = read_assignment(args.assignment, ds)
    print(f"clusters {len(K)}  SSE {total_sse(K, ds)!r}  IL {information_loss(K, ds)!r}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    ds = ingest(
        args.input,
        args.qi,
        args.sensitive,
        id_column=args.id_column,
        categorical=args.categorical,
        standardize=args.standardize,
    )
    if args.m < 2:
        raise InvalidInputError(f"m must be at least 2, got {args.m}")
    res = brute_force_optimal(ds, args.m, cap=args.cap)
    if not res.feasible:
        print("no feasible clustering")
        return EXIT_INFEASIBLE
    print(f"optimal SSE {res.sse!r} over {res.n_partitions} feasible partitions")
    for C in res.clustering:
        print(" ".join(ds.ids[i] for i in C))
    return EXIT_OK


def cmd_verify(args) -> int:
    seq = read_publications(args.publications)
    reports = [verify_m_unique(pub, args.m, index=i) for i, pub in enumerate(seq.publications, start=1)]
    reports.append(verify_m_invariance(seq, args.m))
    reports.append(verify_tau_safety(seq, args.m))
    for rep in reports:
        sys.stdout.write(rep.format())
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY_FAILED


def cmd_republish(args) -> int:
    if args.m < 2:
        raise InvalidInputError(f"m must be at least 2, got {args.m}")
    history = read_publications(args.history) if args.history else PublicationSequence()
    ds = ingest(
        args.input,
        args.qi,
        args.sensitive,
        id_column=args.id_column,
        categorical=args.categorical,
        standardize=args.standardize,
    )
    res = republish(history, ds, args.m, args.s)
    write_publications(PublicationSequence([res.publication]), args.output, start=len(history) + 1)
    print(f"publication {len(history) + 1}: {len(res.publication.classes)} classes, {res.counterfeits} counterfeits")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.kind == "adult":
        ds = adult_like(args.p, seed=args.seed)
    else:
        ds = uniform_instance(args.p, args.d, args.colors, seed=args.seed)
    write_dataset(ds, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minvariance", description="Optimal m-invariant microdata publication")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("anonymize", help="cluster a dataset into m-unique classes")
    _add_data_args(p)
    p.add_argument("-m", type=int, required=True)
    p.add_argument("-s", type=int, default=1, help="number of subsets")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-pre-swap", action="store_true")
    p.add_argument("--time-limit", type=float, default=600.0, help="per-subset budget in seconds")
    p.add_argument("--node-cap", type=int, default=DEFAULT_NODE_CAP)
    p.add_argument("--assignment", type=Path, help="output assignment file")
    p.add_argument("--report", type=Path, help="output stage report")
    p.set_defaults(func=cmd_anonymize)

    p = sub.add_parser("evaluate", help="recompute information loss of an assignment")
    _add_data_args(p)
    p.add_argument("assignment", type=Path)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("oracle", help="exhaustive optimum for small instances")
    _add_data_args(p)
    p.add_argument("-m", type=int, required=True)
    p.add_argument("--cap", type=int, default=12, help="largest instance accepted")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="check m-uniqueness, m-invariance and tau-safety")
    p.add_argument("publications", nargs="+", type=Path)
    p.add_argument("-m", type=int, required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("republish", help="next m-invariant publication of a dataset version")
    _add_data_args(p)
    p.add_argument("--history", nargs="*", type=Path, default=[])
    p.add_argument("-m", type=int, required=True)
    p.add_argument("-s", type=int, default=1)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_republish)

    p = sub.add_parser("synth", help="write a seeded synthetic dataset")
    p.add_argument("output", type=Path)
    p.add_argument("-p", type=int, required=True)
    p.add_argument("-d", type=int, default=2)
    p.add_argument("--colors", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kind", choices=["uniform", "adult"], default="uniform")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (BudgetError, IngestError, InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
