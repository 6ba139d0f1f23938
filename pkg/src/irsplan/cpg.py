"""Counterfactual plan generation: real and auxiliary-using plans, ITE labels, datasets."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .dataset import Sample, make_sample
from .geometry import DEFAULT_MANIP_COST
from .ors import object_usage
from .planner import MotionPlan, PlanningError, solve_mini_lgp, solve_path, solve_path_with_sequence
from .scenarios import DOMAINS, Scenario, make_scenario

log = logging.getLogger(__name__)

TIE_EPS = 1e-9
MAX_RETRY_FACTOR = 3


class RejectedScenario(Exception):
    """One of the two plans does not exist."""


class DatasetError(Exception):
    pass


@dataclass(frozen=True)
class CounterfactualPair:
    real: MotionPlan
    counterfactual: MotionPlan
    ite: float
    label: int


def generate_feasible_plan(sc: Scenario, manip_cost: float = DEFAULT_MANIP_COST) -> MotionPlan:
    """Shallowest plan that never touches an auxiliary object."""
    try:
        return solve_path(sc.s0, sc.scene, sc.sg, manip_cost=manip_cost)
    except PlanningError as e:
        raise RejectedScenario(f"no direct plan: {e}") from e


def generate_counterfactual_plan(sc: Scenario, manip_cost: float = DEFAULT_MANIP_COST) -> MotionPlan:
    """Plan forced through the auxiliary object's sub-problems."""
    sps = object_usage(sc.s0, sc.sg)
    if not sps:
        raise RejectedScenario("no auxiliary object")
    try:
        seq = solve_mini_lgp(sc.s0, sc.scene, sc.sg, sps, manip_cost=manip_cost)
        return solve_path_with_sequence(sc.s0, sc.scene, sc.sg, seq, sps, manip_cost)
    except PlanningError as e:
        raise RejectedScenario(f"no counterfactual plan: {e}") from e


def ite(real: MotionPlan | float, counterfactual: MotionPlan | float) -> float:
    """Effort with the auxiliary minus effort without it; negative favours the auxiliary."""
    y0 = real.total if isinstance(real, MotionPlan) else float(real)
    y1 = counterfactual.total if isinstance(counterfactual, MotionPlan) else float(counterfactual)
    return y1 - y0


def label(ite_value: float) -> int:
    """1 when the auxiliary strictly lowers effort; ties are 0."""
    return int(ite_value < -TIE_EPS)


def counterfactual_pair(sc: Scenario, manip_cost: float = DEFAULT_MANIP_COST) -> CounterfactualPair:
    real = generate_feasible_plan(sc, manip_cost)
    cf = generate_counterfactual_plan(sc, manip_cost)
    d = ite(real, cf)
    return CounterfactualPair(real, cf, d, label(d))


def sample_for(sc: Scenario, manip_cost: float = DEFAULT_MANIP_COST) -> Sample:
    pair = counterfactual_pair(sc, manip_cost)
    return make_sample(sc.domain, sc.s0, sc.sg, pair.label, pair.ite, sc.seed)


def build_dataset(
    n: int,
    domains: Sequence[str] = DOMAINS,
    seed: int = 0,
    manip_cost: float = DEFAULT_MANIP_COST,
    rejects: list | None = None,
) -> list[Sample]:
    """``n`` accepted samples, domains taken round-robin, ordered by scenario index.

    Rejected scenarios are logged (and appended to ``rejects`` when given) and replaced
    by the next draw for the same domain.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    domains = list(domains)
    for d in domains:
        if d not in DOMAINS:
            raise ValueError(f"unknown domain {d!r}")
    rng = random.Random(f"dataset/{seed}")
    out: list[Sample] = []
    attempts = 0
    while len(out) < n:
        if attempts >= MAX_RETRY_FACTOR * n:
            raise DatasetError(f"only {len(out)} of {n} scenarios accepted after {attempts} draws")
        dom = domains[len(out) % len(domains)]
        sc = make_scenario(dom, rng.randrange(2**31))
        attempts += 1
        try:
            out.append(sample_for(sc, manip_cost))
        except RejectedScenario as e:
            log.info("rejected %s seed %d: %s", dom, sc.seed, e)
            if rejects is not None:
                rejects.append((dom, sc.seed, str(e)))
    return out


def relabel(samples: Iterable[Sample], manip_cost: float = DEFAULT_MANIP_COST) -> list[tuple[int, int]]:
    """(stored label, regenerated label) for each sample, rebuilding its scenario from the seed."""
    return [(s.label, sample_for(make_scenario(s.domain, s.seed), manip_cost).label) for s in samples]
