"""Command-line entry point.

Exit codes: 0 success, 1 planning failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench, cpg, dataset, irs
from .ors import ALPHA, BETA, RuleSet, synthesize
from .planner import PlanningError, plan_text
from .scenarios import DOMAINS, make_scenario, mixed_suite

OK, PLAN_FAILURE, BAD_INPUT = 0, 1, 2


class BadInput(Exception):
    pass


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_data(path: str | None) -> list[dataset.Sample]:
    if not path:
        raise BadInput("--data is required")
    try:
        data = dataset.load(path)
    except (OSError, ValueError, KeyError) as e:
        raise BadInput(f"cannot read dataset {path}: {e}") from e
    if not data:
        raise BadInput(f"dataset {path} is empty")
    return data


def _load_rules(path: str) -> RuleSet:
    try:
        return RuleSet.load(path)
    except (OSError, ValueError) as e:
        raise BadInput(f"cannot read rules {path}: {e}") from e


def _domains(arg: str | None) -> list[str]:
    if not arg:
        return list(DOMAINS)
    doms = [d.strip() for d in arg.split(",") if d.strip()]
    bad = [d for d in doms if d not in DOMAINS]
    if bad or not doms:
        raise BadInput(f"unknown domain(s) {bad}; choose from {', '.join(DOMAINS)}")
    return doms


def cmd_gen_dataset(a) -> int:
    if a.n < 1:
        raise BadInput("--n must be >= 1")
    rejects: list = []
    data = cpg.build_dataset(a.n, _domains(a.domain), a.seed, rejects=rejects)
    _write(dataset.dumps(data), a.out)
    for dom, seed, why in rejects:
        print(f"rejected {dom} seed {seed}: {why}", file=sys.stderr)
    return OK


def cmd_synthesize(a) -> int:
    data = _load_data(a.data)
    if len(data) < 8:
        raise BadInput("need at least 8 samples")
    res = synthesize(data, a.beta, a.alpha, a.seed)
    _write(res.ruleset.dumps(), a.out)
    if a.report:
        Path(a.report).write_text(res.report.to_csv(), encoding="utf-8")
    return OK


def cmd_bench(a) -> int:
    data = _load_data(a.data) if a.data else None
    if a.rules:
        rs = _load_rules(a.rules)
    elif data is not None:
        rs = synthesize(data, a.beta, a.alpha, a.seed).ruleset
    else:
        raise BadInput("bench needs --rules or --data")
    suite = mixed_suite(a.n, a.seed, _domains(a.domain))
    results = bench.benchmark(suite, rs)
    folds = bench.cross_validate(data, beta=a.beta, alpha=a.alpha) if data is not None else ()
    table = bench.metrics_table(results, folds)
    _write(table.render(), a.out)
    return OK


def cmd_plan(a) -> int:
    doms = _domains(a.domain)
    if len(doms) != 1:
        raise BadInput("plan takes exactly one --domain")
    sc = make_scenario(doms[0], a.seed)
    rs = _load_rules(a.rules) if a.rules else RuleSet(())
    try:
        p = irs.plan(sc.s0, sc.scene, sc.sg, rs)
    except PlanningError as e:
        print(f"planning failed: {e}", file=sys.stderr)
        return PLAN_FAILURE
    _write(plan_text(p, p.decision.header()).dumps(), a.out)
    return OK


def cmd_human_grid(a) -> int:
    rs = _load_rules(a.rules) if a.rules else RuleSet(())
    rows = bench.human_grid_rows(rs)
    _write(bench.to_csv(rows, bench.GRID_FIELDS), a.out)
    return OK


def cmd_ablation(a) -> int:
    rows = bench.ablation_sweep(_load_data(a.data), beta=a.beta, alpha=a.alpha)
    _write(bench.to_csv(rows, bench.ABLATION_FIELDS), a.out)
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="irsplan", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *, n=None, data=False, rules=False, rules_required=False, report=False, ors=False):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--domain", help="comma-separated subset of " + ", ".join(DOMAINS))
        if n is not None:
            sp.add_argument("--n", type=int, default=n)
        if data:
            sp.add_argument("--data", help="dataset file (JSON lines)")
        if rules:
            sp.add_argument("--rules", required=rules_required, help="rule file")
        if report:
            sp.add_argument("--report", help="per-iteration CSV report")
        if ors:
            sp.add_argument("--alpha", type=float, default=ALPHA)
            sp.add_argument("--beta", type=int, default=BETA)

    common(sub.add_parser("gen-dataset", help="label scenarios and write a dataset"), n=600)
    common(sub.add_parser("synthesize-rules", help="learn a rule set"), data=True, report=True, ors=True)
    common(sub.add_parser("bench", help="compare irs, lgp and control"), n=100, data=True, rules=True, ors=True)
    common(sub.add_parser("plan", help="plan one generated scenario"), rules=True)
    common(sub.add_parser("human-grid", help="gate decisions on the 15-cell mug grid"), rules=True)
    common(sub.add_parser("ablation", help="accuracy against rule length"), data=True, ors=True)
    return p


COMMANDS = {
    "gen-dataset": cmd_gen_dataset,
    "synthesize-rules": cmd_synthesize,
    "bench": cmd_bench,
    "plan": cmd_plan,
    "human-grid": cmd_human_grid,
    "ablation": cmd_ablation,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return BAD_INPUT if e.code else OK
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(a, "beta", 1) < 1 or not 0.0 <= getattr(a, "alpha", 0.5) <= 1.0:
        print("irsplan: error: need --beta >= 1 and 0 <= --alpha <= 1", file=sys.stderr)
        return BAD_INPUT
    try:
        return COMMANDS[a.command](a)
    except BadInput as e:
        print(f"irsplan: error: {e}", file=sys.stderr)
        return BAD_INPUT
    except PlanningError as e:
        print(f"irsplan: planning failed: {e}", file=sys.stderr)
        return PLAN_FAILURE


if __name__ == "__main__":
    raise SystemExit(main())
