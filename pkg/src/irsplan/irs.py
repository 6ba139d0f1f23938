"""Rule-gated planning: decide whether to share responsibility, then plan accordingly."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from .features import encode_features
from .geometry import DEFAULT_MANIP_COST, Scene
from .logic import Goal, State
from .ors import POSITIVE, Rule, RuleSet, object_usage, predict
from .planner import MotionPlan, PlanningError, SubProblem, solve_mini_lgp, solve_path, solve_path_with_sequence

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IrsDecision:
    use_auxiliary: bool
    matched_rule: Rule | None = None
    confidence: float = 0.0
    psi: tuple[SubProblem, ...] = ()
    fallback: str | None = None

    def __post_init__(self):
        if self.use_auxiliary and not (self.psi and self.matched_rule is not None):
            raise ValueError("a positive decision needs sub-problems and the rule that fired")

    def header(self) -> dict[str, str]:
        return {
            "decision": f"use_auxiliary={self.use_auxiliary}",
            "rule": self.matched_rule.text if self.matched_rule else "none",
            "confidence": repr(self.confidence),
        }


NEGATIVE_DECISION = IrsDecision(False)


def rule_gate(s0: State, sg: Goal, rs: RuleSet) -> IrsDecision:
    """Positive iff some auxiliary exists and the highest-priority matching rule says so."""
    psi = tuple(object_usage(s0, sg))
    label, conf, rule = predict(rs, encode_features(s0, sg))
    if not psi:
        return IrsDecision(False, rule, conf)
    if label == POSITIVE:
        return IrsDecision(True, rule, conf, psi)
    return IrsDecision(False, rule, conf)


def plan_with_decision(
    s0: State,
    scene: Scene,
    sg: Goal,
    decision: IrsDecision,
    manip_cost: float = DEFAULT_MANIP_COST,
) -> MotionPlan:
    """Mini-LGP when ``decision`` is positive, with plain planning as the fallback."""
    if decision.use_auxiliary:
        try:
            seq = solve_mini_lgp(s0, scene, sg, decision.psi, manip_cost=manip_cost)
            p = solve_path_with_sequence(s0, scene, sg, seq, decision.psi, manip_cost)
            return replace(p, decision=decision)
        except PlanningError as e:
            log.info("sub-problem pipeline failed (%s); falling back to direct planning", e)
            decision = replace(decision, fallback=str(e))
    try:
        p = solve_path(s0, scene, sg, manip_cost=manip_cost)
    except PlanningError as e:
        trail = f"; auxiliary branch: {decision.fallback}" if decision.fallback else ""
        raise PlanningError(f"direct planning failed: {e}{trail}") from e
    return replace(p, decision=decision)


def plan(s0: State, scene: Scene, sg: Goal, rs: RuleSet, manip_cost: float = DEFAULT_MANIP_COST) -> MotionPlan:
    return plan_with_decision(s0, scene, sg, rule_gate(s0, sg, rs), manip_cost)
