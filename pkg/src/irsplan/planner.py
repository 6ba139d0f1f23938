"""Multi-bound tree search over symbolic states, and the solvers built on it.

``mbts_search`` realizes the sequence bound: it looks for a shallowest action
sequence reaching the goal whose keyframes (stand-points at every mode switch)
exist, and among those prefers the lowest obstacle-free keyframe cost, then the
lexicographically smallest action sequence. Full path realization against the
occupancy grid is deferred to ``solve_path_with_sequence``.
"""

from __future__ import annotations

import heapq
import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .geometry import (
    DEFAULT_MANIP_COST,
    MOBILE,
    EffortReport,
    GeometryError,
    InfeasibleKeyframe,
    Keyframe,
    Pose,
    Scene,
    Unreachable,
    action_cost,
    keyframe_for,
    plan_effort,
    standpoint,
)
from .logic import (
    DIRECT_SCHEMAS,
    SCHEMAS,
    STATIC_PREDICATES,
    GroundAction,
    Goal,
    Kind,
    State,
    Entity,
    applicable,
    ground_all,
    replay,
    satisfies,
)


class PlanningError(Exception):
    pass


class SearchExhausted(PlanningError):
    """No goal-satisfying sequence within the depth limit."""


class PathFailure(PlanningError):
    """The sequence exists but cannot be realized at path level."""


class MiniLgpFailure(PlanningError):
    """Some sub-problem has no solution."""


@dataclass(frozen=True)
class SubProblem:
    name: str
    available: frozenset
    subgoal: Goal


@dataclass(frozen=True)
class SequencePlan:
    actions: tuple[GroundAction, ...] = ()
    keyframes: tuple[Keyframe, ...] = ()
    seq_cost: float = 0.0
    # index (exclusive) where each sub-problem's segment ends; empty for plain plans
    segment_ends: tuple[int, ...] = ()

    @property
    def depth(self) -> int:
        return len(self.actions)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.label for a in self.actions)


@dataclass(frozen=True)
class MotionPlan:
    sequence: SequencePlan
    effort: EffortReport
    subgoal_trace: tuple[int, ...] = ()
    decision: object = None

    @property
    def actions(self) -> tuple[GroundAction, ...]:
        return self.sequence.actions

    @property
    def total(self) -> float:
        return self.effort.total


def default_depth_limit(s0: State) -> int:
    n = len({a[1] for a in s0 if a[0] == "on" and a[1].startswith("obj")} | {a[2] for a in s0 if a[0] == "picked" and a[2].startswith("obj")})
    return 2 + 5 * n


def _entities(scene: Scene) -> list[Entity]:
    return [Entity(e.id, e.kind) for e in scene.entities]


class _Problem:
    """Ground actions and geometry for one (scene, s0 statics, allowed schemas) triple."""

    def __init__(self, s0: State, scene: Scene, allowed: Iterable[str], manip_cost: float):
        self.scene = scene
        ents = _entities(scene)
        robots = [e.id for e in ents if e.kind == Kind.ROBOT]
        if len(robots) != 1:
            raise PlanningError("exactly one mobile robot expected")
        self.robot = robots[0]
        self.grippers = [e.id for e in ents if e.kind == Kind.GRIPPER]
        self.sources = {e.id for e in ents if e.kind == Kind.SOURCE}
        self.allowed = frozenset(allowed)
        statics = {a for a in s0 if a[0] in STATIC_PREDICATES}
        self.by_loc: dict[str, list] = {}
        self.free_actions: list = []
        for a in ground_all([SCHEMAS[n] for n in sorted(self.allowed)], ents):
            if any(p[0] in STATIC_PREDICATES and p not in statics for p in a.pre):
                continue
            try:
                kf = keyframe_for(a, scene)
            except InfeasibleKeyframe:
                continue
            except GeometryError:
                continue
            if a.name == "move_base":
                new_loc = a.args[2]
            elif a.name == "carry_tray":
                new_loc = a.args[4]
            else:
                new_loc = None
            rec = (a, kf, new_loc, action_cost(a, 0.0, scene, manip_cost))
            at = [p for p in a.pre if p[0] == "at" and p[1] == self.robot]
            if at:
                self.by_loc.setdefault(at[0][2], []).append(rec)
            else:
                self.free_actions.append(rec)
        self._pos: dict[str, Pose] = {}

    def pos(self, loc: str) -> Pose:
        p = self._pos.get(loc)
        if p is None:
            p = self._pos[loc] = standpoint(self.scene, loc)
        return p

    def robot_loc(self, s: State) -> str:
        for a in s:
            if a[0] == "at" and a[1] == self.robot:
                return a[2]
        raise PlanningError(f"robot {self.robot} has no location in the state")

    def successors(self, s: State, loc: str):
        for rec in itertools.chain(self.by_loc.get(loc, ()), self.free_actions):
            if applicable(s, rec[0]):
                yield rec


class _DepthBound:
    """Admissible lower bound on the number of actions still needed.

    Counts one manipulation per unmet goal atom (plus the pick it needs) and,
    for objects that only a single gripper can carry, one arrival per delivery
    plus one fetch arrival per further object that must be picked up at a
    non-target location.
    """

    def __init__(self, s0: State, goal: Goal, prob: _Problem):
        self.goal = goal
        self.trays = {a[1] for a in s0 if a[0] == "is_tray"}
        self.pitchers = {a[1] for a in s0 if a[0] == "is_pitcher"}
        self.stations = {a[2] for a in s0 if a[0] == "station"}
        self.reachable = {a[2] for a in s0 if a[0] == "reaches"}
        self.sources = prob.sources
        allowed = prob.allowed
        self.robot = prob.robot
        self.can_place = bool({"place", "handover_give", "load_tray"} & allowed)
        self.can_handover = "handover_place" in allowed and ("action_handover",) in s0
        self.can_tray = bool({"carry_tray", "unload_tray", "load_tray"} & allowed)
        self.can_pour = "pour" in allowed and ("action_pour",) in s0
        self.can_fill = "fill" in allowed and ("action_fill",) in s0
        self.single_gripper = len(prob.grippers) == 1
        self.transports_ok = self.single_gripper and not self.can_tray and not self.can_handover

    def __call__(self, s: State, loc: str) -> float:
        unmet = self.goal.required - s
        if not unmet:
            return 0
        support: dict[str, str] = {}
        held: set[str] = set()
        for a in s:
            if a[0] == "on":
                support[a[1]] = a[2]
            elif a[0] == "picked":
                held.add(a[2])
        manip = 0
        tray_goals = 0
        transports: list[tuple[str | None, str, str]] = []
        visits: set[str] = set()
        src = next(iter(self.sources)) if len(self.sources) == 1 else None
        for a in unmet:
            if a[0] == "on":
                o, t = a[1], a[2]
                if o in self.trays:
                    manip += 1
                    tray_goals += 1
                    continue
                is_held = o in held
                cur = None if is_held else support.get(o)
                if t in self.trays:
                    manip += 1 + (not is_held)
                    continue
                opts = []
                if self.can_place:
                    opts.append(1 + (not is_held))
                if self.can_handover and t in self.reachable:
                    opts.append(1 if cur in self.stations else 2 + (not is_held))
                if not opts:
                    return float("inf")
                manip += min(opts)
                if self.transports_ok and cur != t:
                    transports.append((o, cur, t))
            elif a[0] == "filled":
                o = a[1]
                is_held = o in held
                cur = None if is_held else support.get(o)
                if o in self.pitchers:
                    manip += 1 + (not is_held)
                    if self.transports_ok and src is not None:
                        transports.append((o, cur, src))
                elif self.can_pour:
                    manip += 1
                    if not self.can_fill and cur is not None and cur not in self.trays:
                        visits.add(cur)
                elif self.can_fill:
                    if cur in self.sources:
                        manip += 1
                        visits.add(cur)
                    else:
                        manip += 2 + (not is_held)
                        if self.transports_ok and src is not None:
                            transports.append((o, cur, src))
                else:
                    return float("inf")
        moves = 0
        if transports:
            pitcher_t = [t for t in transports if t[0] in self.pitchers]
            if pitcher_t and len(transports) > 1:
                transports = [t for t in transports if t[0] not in self.pitchers]
            targets = {t for _, _, t in transports}
            deliveries = len(transports)
            if any(cur is None and t == loc for _, cur, t in transports):
                deliveries -= 1
            fetch = [cur for _, cur, _ in transports if cur is not None and cur not in targets]
            extras = len(fetch) - (1 if loc in fetch else 0)
            moves = deliveries + extras
        moves = max(moves, len(visits - {loc}))
        if self.can_tray:
            moves = max(0, moves - tray_goals)
        return manip + moves


def mbts_search(
    s0: State,
    scene: Scene,
    goal: Goal,
    allowed: Iterable[str] | None = None,
    depth_limit: int | None = None,
    manip_cost: float = DEFAULT_MANIP_COST,
    use_bound: bool = True,
) -> SequencePlan:
    """Shallowest keyframe-feasible plan; ties by obstacle-free cost then action names.

    The frontier is ordered by (depth + admissible depth bound, cost, names),
    so the returned plan is the one an exhaustive breadth-first enumeration
    would pick. ``use_bound=False`` degrades to plain breadth-first order.
    """
    allowed = frozenset(SCHEMAS) if allowed is None else frozenset(allowed)
    if depth_limit is None:
        depth_limit = default_depth_limit(s0)
    if depth_limit < 0:
        raise ValueError("depth_limit must be non-negative")
    s0 = frozenset(s0)
    if satisfies(s0, goal):
        return SequencePlan()
    prob = _Problem(s0, scene, allowed, manip_cost)
    bound = _DepthBound(s0, goal, prob) if use_bound else (lambda s, loc: 0)
    loc0 = prob.robot_loc(s0)
    h0 = bound(s0, loc0)
    if h0 > depth_limit:
        raise SearchExhausted(f"goal needs more than {depth_limit} actions")
    best: dict[State, tuple] = {s0: (0, 0.0, ())}
    tie = itertools.count()
    # entry: (f, cost, names, tie, depth, state, loc, node); node = (record, parent node)
    heap = [(h0, 0.0, (), next(tie), 0, s0, loc0, None)]
    while heap:
        f, cost, names, _, depth, s, loc, node = heapq.heappop(heap)
        if best.get(s) != (depth, cost, names):
            continue
        if satisfies(s, goal):
            return _build_plan(node, cost)
        if depth >= depth_limit:
            continue
        here = prob.pos(loc)
        for rec in prob.successors(s, loc):
            a, kf, new_loc, extra = rec
            s2 = (s - a.delete) | a.add
            nloc = new_loc or loc
            leg = here.dist(kf.base_pose) if kf.agent == MOBILE else 0.0
            label = (depth + 1, cost + leg + extra, names + (a.label,))
            old = best.get(s2)
            if old is not None and old <= label:
                continue
            h = bound(s2, nloc)
            if depth + 1 + h > depth_limit:
                continue
            best[s2] = label
            heapq.heappush(heap, (depth + 1 + h, label[1], label[2], next(tie), depth + 1, s2, nloc, (rec, node)))
    raise SearchExhausted(f"no plan within depth {depth_limit}")


def _build_plan(node, cost: float) -> SequencePlan:
    recs = []
    while node is not None:
        recs.append(node[0])
        node = node[1]
    recs.reverse()
    return SequencePlan(
        actions=tuple(r[0] for r in recs),
        keyframes=tuple(r[1] for r in recs),
        seq_cost=cost,
    )


def sequence_cost(actions: Sequence[GroundAction], scene: Scene, manip_cost: float = DEFAULT_MANIP_COST) -> float:
    """Obstacle-free keyframe cost of an action sequence (the sequence-level bound)."""
    return plan_effort([keyframe_for(a, scene) for a in actions], scene, manip_cost, relaxed=True).total


def solve_path_with_sequence(
    s0: State,
    scene: Scene,
    goal: Goal,
    seq: SequencePlan,
    subproblems: Sequence[SubProblem] = (),
    manip_cost: float = DEFAULT_MANIP_COST,
) -> MotionPlan:
    """Realize ``seq`` against the full geometry without any symbolic search."""
    states = replay(frozenset(s0), seq.actions)
    if not satisfies(states[-1], goal):
        raise PlanningError("sequence does not reach the goal")
    trace = []
    for k, (sp, end) in enumerate(zip(subproblems, seq.segment_ends)):
        if satisfies(states[end], sp.subgoal):
            trace.append(k)
    try:
        effort = plan_effort(seq.keyframes, scene, manip_cost)
    except Unreachable as e:
        raise PathFailure(str(e)) from e
    return MotionPlan(seq, effort, tuple(trace))


def solve_path(
    s0: State,
    scene: Scene,
    goal: Goal,
    allowed: Iterable[str] = DIRECT_SCHEMAS,
    depth_limit: int | None = None,
    manip_cost: float = DEFAULT_MANIP_COST,
) -> MotionPlan:
    """Plain planner: search over ``allowed`` schemas, then full realization.

    The default schema set leaves out every action touching an auxiliary
    object, so the result is the plan an agent that never shares
    responsibility would execute.
    """
    seq = mbts_search(s0, scene, goal, allowed, depth_limit, manip_cost)
    return solve_path_with_sequence(s0, scene, goal, seq, manip_cost=manip_cost)


def solve_mini_lgp(
    s0: State,
    scene: Scene,
    goal: Goal,
    subproblems: Sequence[SubProblem],
    depth_limit: int | None = None,
    manip_cost: float = DEFAULT_MANIP_COST,
) -> SequencePlan:
    """Solve the sub-problems in order, each starting where the previous one ended."""
    if not subproblems:
        raise MiniLgpFailure("no sub-problems")
    s = frozenset(s0)
    limit = default_depth_limit(s) if depth_limit is None else depth_limit
    actions: list[GroundAction] = []
    keyframes: list[Keyframe] = []
    ends = []
    cost = 0.0
    for k, sp in enumerate(subproblems):
        sub_goal = sp.subgoal | goal if k == len(subproblems) - 1 else sp.subgoal
        try:
            part = mbts_search(s, scene, sub_goal, sp.available, limit, manip_cost)
        except SearchExhausted as e:
            raise MiniLgpFailure(f"sub-problem {k} ({sp.name}): {e}") from e
        if part.actions:
            s = replay(s, part.actions)[-1]
        actions += part.actions
        keyframes += part.keyframes
        ends.append(len(actions))
    # recompute the chained cost: legs continue from the previous segment's last stand-point
    cost = plan_effort(keyframes, scene, manip_cost, relaxed=True).total
    return SequencePlan(tuple(actions), tuple(keyframes), cost, tuple(ends))


# ---------------------------------------------------------------------------
# Plan text format.

_LINE_RE = re.compile(r"^(\d+): (\S+\([^()]*\)) @ \((\S+), (\S+)\)$")


@dataclass
class PlanText:
    """Parsed form of the line-oriented plan format."""

    header: dict[str, str] = field(default_factory=dict)
    steps: list[tuple[str, float, float]] = field(default_factory=list)
    effort: float = 0.0

    def dumps(self) -> str:
        lines = [f"{k}: {v}" for k, v in self.header.items()]
        lines += [f"{k}: {label} @ ({x!r}, {y!r})" for k, (label, x, y) in enumerate(self.steps)]
        lines.append(f"effort: {self.effort!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> PlanText:
        out = cls()
        for ln in text.splitlines():
            if not ln.strip():
                continue
            m = _LINE_RE.match(ln)
            if m:
                if int(m.group(1)) != len(out.steps):
                    raise ValueError(f"plan step out of order: {ln!r}")
                out.steps.append((m.group(2), float(m.group(3)), float(m.group(4))))
                continue
            key, _, val = ln.partition(": ")
            if key == "effort":
                out.effort = float(val)
            elif key in ("decision", "rule", "confidence"):
                out.header[key] = val
            else:
                raise ValueError(f"unrecognized plan line: {ln!r}")
        return out


def plan_text(plan: MotionPlan, header: dict[str, str] | None = None) -> PlanText:
    return PlanText(
        header=dict(header or {}),
        steps=[(kf.action.label, kf.base_pose.x, kf.base_pose.y) for kf in plan.sequence.keyframes],
        effort=plan.effort.total,
    )
