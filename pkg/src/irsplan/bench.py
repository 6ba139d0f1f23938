"""Baselines, benchmark runs, metrics, the human-comparison grid and the length ablation."""

from __future__ import annotations

import csv
import hashlib
import io
import random
import statistics
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import cpg, irs
from .dataset import Sample
from .geometry import DEFAULT_MANIP_COST
from .logic import replay, satisfies
from .ors import (
    ALPHA,
    AND,
    BETA,
    POSITIVE,
    Condition,
    Rule,
    RuleSet,
    balance,
    fit_length,
    interpretability,
    object_usage,
    predict,
    split_data,
    synthesize,
)
from .planner import MotionPlan, PlanningError
from .scenarios import Scenario, human_grid

AGENTS = ("irs", "lgp", "control")
FOLD_SEEDS = (0, 1, 2, 3, 4)
HOLDOUT = 0.25

# Stand-in for the rule that fires under a perfect (label-driven) gate.
ORACLE_RULE = Rule(POSITIVE, AND, (Condition("helper_exists"),), 1.0)


@dataclass(frozen=True)
class AgentResult:
    index: int
    effort: float | None
    plan: MotionPlan | None = field(default=None, repr=False)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.effort is not None


def suite_hash(suite: Sequence[Scenario]) -> str:
    h = hashlib.sha256()
    for sc in suite:
        h.update(f"{sc.domain}/{sc.seed}/{sorted(sc.s0)}/{sorted(sc.sg.required)}\n".encode())
    return h.hexdigest()


def control_plan(sc: Scenario, manip_cost: float = DEFAULT_MANIP_COST) -> MotionPlan:
    """Always share responsibility when an auxiliary exists."""
    psi = tuple(object_usage(sc.s0, sc.sg))
    decision = irs.IrsDecision(True, ORACLE_RULE, 1.0, psi) if psi else irs.NEGATIVE_DECISION
    return irs.plan_with_decision(sc.s0, sc.scene, sc.sg, decision, manip_cost)


def oracle_plan(sc: Scenario, label: int, manip_cost: float = DEFAULT_MANIP_COST) -> MotionPlan:
    """IRS with the gate replaced by the true label."""
    psi = tuple(object_usage(sc.s0, sc.sg))
    decision = irs.IrsDecision(True, ORACLE_RULE, 1.0, psi) if label and psi else irs.NEGATIVE_DECISION
    return irs.plan_with_decision(sc.s0, sc.scene, sc.sg, decision, manip_cost)


def _planner(agent: str, rs: RuleSet | None, manip_cost: float) -> Callable[[Scenario], MotionPlan]:
    if agent == "irs":
        if rs is None:
            raise ValueError("the irs agent needs a rule set")
        return lambda sc: irs.plan(sc.s0, sc.scene, sc.sg, rs, manip_cost)
    if agent == "lgp":
        return lambda sc: irs.plan_with_decision(sc.s0, sc.scene, sc.sg, irs.NEGATIVE_DECISION, manip_cost)
    if agent == "control":
        return lambda sc: control_plan(sc, manip_cost)
    raise ValueError(f"unknown agent {agent!r}")


def check_plan(sc: Scenario, p: MotionPlan) -> list[str]:
    """Replay, sub-goal order and bound-ordering violations of ``p`` (empty when valid)."""
    problems = []
    try:
        states = replay(sc.s0, p.actions)
    except Exception as e:  # noqa: BLE001 - any replay failure is a violation
        return [f"replay failed: {e}"]
    if not satisfies(states[-1], sc.sg):
        problems.append("final state misses the goal")
    tr = p.subgoal_trace
    if p.sequence.segment_ends and tr != tuple(range(len(p.sequence.segment_ends))):
        problems.append(f"sub-goals out of order: {tr}")
    if p.sequence.seq_cost > p.total + 1e-9:
        problems.append(f"sequence bound {p.sequence.seq_cost} exceeds effort {p.total}")
    return problems


def run_agent(
    agent: str,
    suite: Sequence[Scenario],
    rs: RuleSet | None = None,
    manip_cost: float = DEFAULT_MANIP_COST,
) -> list[AgentResult]:
    """Plan every scenario; failures and invalid plans are recorded, not raised."""
    solve = _planner(agent, rs, manip_cost)
    out = []
    for i, sc in enumerate(suite):
        try:
            p = solve(sc)
        except PlanningError as e:
            out.append(AgentResult(i, None, None, str(e)))
            continue
        problems = check_plan(sc, p)
        if problems:
            out.append(AgentResult(i, None, p, "; ".join(problems)))
        else:
            out.append(AgentResult(i, p.total, p))
    return out


# ---------------------------------------------------------------------------
# Metrics.


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @classmethod
    def of(cls, y_true: Sequence[int], y_pred: Sequence[int]) -> Confusion:
        t, p = np.asarray(y_true, bool), np.asarray(y_pred, bool)
        return cls(int((t & p).sum()), int((~t & p).sum()), int((~t & ~p).sum()), int((t & ~p).sum()))

    @property
    def accuracy(self) -> float:
        n = self.tp + self.fp + self.tn + self.fn
        return (self.tp + self.tn) / n if n else 0.0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


def mean_std(xs: Sequence[float]) -> tuple[float, float]:
    xs = list(xs)
    if not xs:
        return float("nan"), float("nan")
    return statistics.fmean(xs), statistics.pstdev(xs)


@dataclass(frozen=True)
class Fold:
    seed: int
    ruleset: RuleSet
    confusion: Confusion


def holdout_split(data: Sequence[Sample], seed: int, frac: float = HOLDOUT) -> tuple[list[Sample], list[Sample]]:
    idx = list(range(len(data)))
    random.Random(f"holdout/{seed}").shuffle(idx)
    k = int(round(len(data) * frac))
    return [data[i] for i in idx[k:]], [data[i] for i in idx[:k]]


def cross_validate(
    data: Sequence[Sample],
    seeds: Sequence[int] = FOLD_SEEDS,
    beta: int = BETA,
    alpha: float = ALPHA,
) -> list[Fold]:
    """Per seed: hold out a quarter, synthesize on the rest, score the held-out samples."""
    folds = []
    for seed in seeds:
        dev, test = holdout_split(data, seed)
        rs = synthesize(dev, beta, alpha, seed).ruleset
        pred = [predict(rs, s.features)[0] for s in test]
        folds.append(Fold(seed, rs, Confusion.of([s.label for s in test], pred)))
    return folds


@dataclass
class MetricsTable:
    effort: dict[str, tuple[float, float]]
    ors: dict[str, tuple[float, float]]
    failures: dict[str, int]

    def render(self) -> str:
        lines = ["agent     effort (mean ± std)   failures"]
        for a, (m, s) in self.effort.items():
            lines.append(f"{a:<9} {m:8.3f} ± {s:<8.3f}     {self.failures.get(a, 0)}")
        if self.ors:
            lines.append("")
            lines.append("gate metric  mean ± std")
            for k, (m, s) in self.ors.items():
                lines.append(f"{k:<12} {m:.3f} ± {s:.3f}")
        return "\n".join(lines) + "\n"


def metrics_table(results: dict[str, list[AgentResult]], folds: Sequence[Fold] = ()) -> MetricsTable:
    effort = {a: mean_std([r.effort for r in rs if r.ok]) for a, rs in results.items()}
    failures = {a: sum(not r.ok for r in rs) for a, rs in results.items()}
    ors_m = {}
    if folds:
        for k in ("accuracy", "precision", "recall", "f1"):
            ors_m[k] = mean_std([getattr(f.confusion, k) for f in folds])
    return MetricsTable(effort, ors_m, failures)


def benchmark(
    suite: Sequence[Scenario],
    rs: RuleSet,
    agents: Sequence[str] = AGENTS,
    manip_cost: float = DEFAULT_MANIP_COST,
) -> dict[str, list[AgentResult]]:
    return {a: run_agent(a, suite, rs if a == "irs" else None, manip_cost) for a in agents}


# ---------------------------------------------------------------------------
# Human-comparison grid.

GRID_FIELDS = ("mugs", "distance", "gate", "expected", "ite", "rule")


def human_grid_rows(rs: RuleSet, manip_cost: float = DEFAULT_MANIP_COST) -> list[dict]:
    """Gate decision next to the effort-oracle label for each of the 15 cells."""
    rows = []
    for n, dist, sc in human_grid():
        d = irs.rule_gate(sc.s0, sc.sg, rs)
        pair = cpg.counterfactual_pair(sc, manip_cost)
        rows.append(
            {
                "mugs": n,
                "distance": dist,
                "gate": int(d.use_auxiliary),
                "expected": pair.label,
                "ite": pair.ite,
                "rule": d.matched_rule.text if d.matched_rule else "none",
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Rule-length ablation.

ABLATION_FIELDS = ("length", "accuracy_positive", "accuracy_negative", "accuracy", "interpretability", "balance")


def ablation_sweep(
    data: Sequence[Sample],
    seeds: Sequence[int] = FOLD_SEEDS,
    beta: int = BETA,
    alpha: float = ALPHA,
) -> list[dict]:
    """Test-split scores of the best length-L rule set, L = 1..beta, averaged over seeds.

    Every length sees the same splits for a given seed, so rows are comparable.
    """
    per_len: dict[int, list[tuple[float, float, float]]] = {k: [] for k in range(1, beta + 1)}
    for seed in seeds:
        train, val, test = split_data(data, f"ablation/{seed}")
        y = np.array([s.label for s in test], bool)
        for k in range(1, beta + 1):
            fit = fit_length(train, val, k, alpha, beta)
            if fit is None:
                continue
            rs, _ = fit
            p = np.array([predict(rs, s.features)[0] for s in test], bool)
            per_len[k].append(
                (
                    float(np.mean(p[y])) if y.any() else float("nan"),
                    float(np.mean(~p[~y])) if (~y).any() else float("nan"),
                    float(np.mean(p == y)),
                )
            )
    rows = []
    for k in range(1, beta + 1):
        if not per_len[k]:
            continue
        ap, an, acc = (statistics.fmean(c) for c in zip(*per_len[k]))
        interp = interpretability(k, beta)
        rows.append(
            {
                "length": k,
                "accuracy_positive": ap,
                "accuracy_negative": an,
                "accuracy": acc,
                "interpretability": interp,
                "balance": balance(acc, interp, alpha),
            }
        )
    return rows


def to_csv(rows: Sequence[dict], fields: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
