from __future__ import annotations

import pytest

import irsplan.cpg
import irsplan.irs
import irsplan.planner as planner
from irsplan.logic import replay, satisfies

# Every realized plan in the session is audited here.
PLAN_AUDIT = {"plans": 0, "violations": []}
ACCEPTANCE_LINES: list[str] = []

_original = planner.solve_path_with_sequence


def _audited(s0, scene, goal, seq, subproblems=(), manip_cost=planner.DEFAULT_MANIP_COST):
    p = _original(s0, scene, goal, seq, subproblems, manip_cost)
    PLAN_AUDIT["plans"] += 1
    states = replay(frozenset(s0), p.actions)
    if not satisfies(states[-1], goal):
        PLAN_AUDIT["violations"].append("goal not reached")
    if subproblems and p.subgoal_trace != tuple(range(len(subproblems))):
        PLAN_AUDIT["violations"].append(f"sub-goal trace {p.subgoal_trace}")
    if p.sequence.seq_cost > p.total + 1e-9:
        PLAN_AUDIT["violations"].append(f"bound {p.sequence.seq_cost} > effort {p.total}")
    return p


def pytest_configure(config):
    for mod in (planner, irsplan.cpg, irsplan.irs):
        mod.solve_path_with_sequence = _audited


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for ln in ACCEPTANCE_LINES:
            terminalreporter.write_line(ln)
    v = PLAN_AUDIT["violations"]
    terminalreporter.write_line(f"plan audit: {PLAN_AUDIT['plans']} plans realized, {len(v)} violations")


def pytest_sessionfinish(session, exitstatus):
    if PLAN_AUDIT["violations"]:
        session.exitstatus = 1


@pytest.fixture(scope="session")
def dataset600():
    return irsplan.cpg.build_dataset(600, seed=7)


@pytest.fixture(scope="session")
def ruleset(dataset600):
    from irsplan.ors import synthesize

    return synthesize(dataset600, seed=0).ruleset
