"""Planar proxy for the continuous layer.

Poses are 2D base positions. Effort is base travel plus a fixed increment per
manipulation. Scenes with an occupancy grid (the handover maze) measure travel
as the shortest 4-connected grid path; open scenes use straight-line distance.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from .logic import GroundAction, Kind

DEFAULT_MANIP_COST = 0.5

# Manipulation increments per action; carry_tray grasps and releases the tray,
# handover_place is a pick plus a place done by the stationary arm.
MANIP_WEIGHT = {
    "move_base": 0,
    "pick": 1,
    "place": 1,
    "fill": 1,
    "load_tray": 1,
    "unload_tray": 1,
    "carry_tray": 2,
    "grasp_pitcher": 1,
    "fill_pitcher": 1,
    "pour": 1,
    "handover_give": 1,
    "handover_place": 2,
}

# Index of the argument naming the surface the mobile robot must stand at.
TARGET_ARG = {
    "move_base": 2,
    "pick": 3,
    "place": 3,
    "fill": 2,
    "load_tray": 4,
    "unload_tray": 4,
    "carry_tray": 4,
    "grasp_pitcher": 3,
    "fill_pitcher": 3,
    "pour": 4,
    "handover_give": 4,
}
HELPER_ACTIONS = frozenset({"handover_place"})

MOBILE = "mobile"
_EPS = 1e-9


class GeometryError(Exception):
    pass


class Unreachable(GeometryError):
    """No obstacle-free path between two poses."""


class InfeasibleKeyframe(GeometryError):
    """No free stand-point within reach of the manipulated surface."""


@dataclass(frozen=True, order=True)
class Pose:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite pose ({self.x}, {self.y})")

    def dist(self, other: Pose) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class SceneEntity:
    id: str
    kind: Kind
    pose: Pose | None = None


@dataclass(frozen=True)
class Scene:
    entities: tuple[SceneEntity, ...]
    robot_base: Pose
    reach_radius: float = 0.5
    helper_reach: float = 2.5
    cell: float = 1.0
    grid: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.grid is not None:
            width = {len(r) for r in self.grid}
            if len(width) != 1 or any(set(r) - {".", "#"} for r in self.grid):
                raise ValueError("grid rows must have equal length and use only '.' and '#'")

    @property
    def by_id(self) -> dict[str, SceneEntity]:
        return _index(self)

    def pose(self, eid: str) -> Pose:
        e = self.by_id.get(eid)
        if e is None or e.pose is None:
            raise GeometryError(f"entity {eid!r} has no pose")
        return e.pose

    def kind(self, eid: str) -> Kind:
        return self.by_id[eid].kind

    def with_pose(self, eid: str, pose: Pose) -> Scene:
        ents = tuple(SceneEntity(e.id, e.kind, pose) if e.id == eid else e for e in self.entities)
        return Scene(ents, self.robot_base, self.reach_radius, self.helper_reach, self.cell, self.grid)

    # -- grid helpers -----------------------------------------------------
    def cell_of(self, p: Pose) -> tuple[int, int]:
        """(column, row) of ``p``; row index grows with y."""
        return int(math.floor(p.x / self.cell)), int(math.floor(p.y / self.cell))

    def cell_center(self, c: int, r: int) -> Pose:
        return Pose((c + 0.5) * self.cell, (r + 0.5) * self.cell)

    def free(self, c: int, r: int) -> bool:
        assert self.grid is not None
        return 0 <= r < len(self.grid) and 0 <= c < len(self.grid[0]) and self.grid[r][c] == "."

    # -- text format ------------------------------------------------------
    def dumps(self) -> str:
        lines = [
            "# irsplan scene v1",
            f"robot_base {self.robot_base.x!r} {self.robot_base.y!r}",
            f"reach_radius {self.reach_radius!r}",
            f"helper_reach {self.helper_reach!r}",
            f"cell {self.cell!r}",
        ]
        for e in self.entities:
            if e.pose is None:
                lines.append(f"entity {e.id} {e.kind.value}")
            else:
                lines.append(f"entity {e.id} {e.kind.value} {e.pose.x!r} {e.pose.y!r}")
        if self.grid is not None:
            lines.append(f"grid {len(self.grid[0])} {len(self.grid)}")
            lines.extend(self.grid)
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> Scene:
        fields: dict = {}
        ents = []
        grid = None
        # grid rows may start with '#', so comments are only skipped outside the grid block
        lines = [ln.rstrip() for ln in text.splitlines()]
        i = 0
        while i < len(lines):
            if not lines[i].strip() or lines[i].startswith("#"):
                i += 1
                continue
            parts = lines[i].split()
            key = parts[0]
            if key == "robot_base":
                fields["robot_base"] = Pose(float(parts[1]), float(parts[2]))
            elif key in ("reach_radius", "helper_reach", "cell"):
                fields[key] = float(parts[1])
            elif key == "entity":
                pose = Pose(float(parts[3]), float(parts[4])) if len(parts) == 5 else None
                ents.append(SceneEntity(parts[1], Kind(parts[2]), pose))
            elif key == "grid":
                h = int(parts[2])
                grid = tuple(lines[i + 1 : i + 1 + h])
                if len(grid) != h:
                    raise ValueError(f"grid declares {h} rows, found {len(grid)}")
                i += h
            else:
                raise ValueError(f"unknown scene line: {lines[i]!r}")
            i += 1
        return cls(entities=tuple(ents), grid=grid, **fields)


@lru_cache(maxsize=256)
def _index(scene: Scene) -> dict[str, SceneEntity]:
    return {e.id: e for e in scene.entities}


@lru_cache(maxsize=4096)
def _grid_distances(grid: tuple[str, ...], start: tuple[int, int]) -> dict[tuple[int, int], int]:
    h, w = len(grid), len(grid[0])
    dist = {start: 0}
    q = deque([start])
    while q:
        c, r = q.popleft()
        d = dist[(c, r)] + 1
        for nc, nr in ((c + 1, r), (c - 1, r), (c, r + 1), (c, r - 1)):
            if 0 <= nr < h and 0 <= nc < w and grid[nr][nc] == "." and (nc, nr) not in dist:
                dist[(nc, nr)] = d
                q.append((nc, nr))
    return dist


def base_path_cost(a: Pose, b: Pose, scene: Scene, relaxed: bool = False) -> float:
    """Travel length between two base poses.

    Open scenes: Euclidean. Grid scenes: 4-connected shortest path, one cell
    size per step. ``relaxed`` ignores obstacles (Euclidean everywhere), which
    is the sequence-level lower bound.
    """
    if relaxed or scene.grid is None:
        return a.dist(b)
    ca, cb = scene.cell_of(a), scene.cell_of(b)
    for p, c in ((a, ca), (b, cb)):
        if not scene.free(*c):
            raise GeometryError(f"pose ({p.x}, {p.y}) is outside the map or inside a wall")
    d = _grid_distances(scene.grid, ca).get(cb)
    if d is None:
        raise Unreachable(f"no path from ({a.x}, {a.y}) to ({b.x}, {b.y})")
    return d * scene.cell


@lru_cache(maxsize=4096)
def standpoint(scene: Scene, surface: str) -> Pose:
    """Closest point to the robot's base within reach of ``surface`` (ties: lowest x, then lowest y)."""
    target = scene.pose(surface)
    base = scene.robot_base
    r = scene.reach_radius
    if scene.grid is None:
        d = base.dist(target)
        if d <= r + _EPS:
            return base
        k = r / d
        return Pose(target.x + (base.x - target.x) * k, target.y + (base.y - target.y) * k)
    best = None
    rows, cols = len(scene.grid), len(scene.grid[0])
    span = int(math.ceil(r / scene.cell)) + 1
    c0, r0 = scene.cell_of(target)
    for c in range(max(0, c0 - span), min(cols, c0 + span + 1)):
        for rr in range(max(0, r0 - span), min(rows, r0 + span + 1)):
            if not scene.free(c, rr):
                continue
            p = scene.cell_center(c, rr)
            if p.dist(target) > r + _EPS:
                continue
            key = (round(p.dist(base), 9), p.x, p.y)
            if best is None or key < best[0]:
                best = (key, p)
    if best is None:
        raise InfeasibleKeyframe(f"no free stand-point within reach of {surface}")
    return best[1]


@dataclass(frozen=True)
class Keyframe:
    action: GroundAction
    base_pose: Pose
    agent: str = MOBILE


def keyframe_for(a: GroundAction, scene: Scene) -> Keyframe:
    if a.name in HELPER_ACTIONS:
        helper, _, h, to = a.args
        hp = scene.pose(helper)
        for s in (h, to):
            if hp.dist(scene.pose(s)) > scene.helper_reach + _EPS:
                raise InfeasibleKeyframe(f"{helper} cannot reach {s}")
        return Keyframe(a, hp, agent=helper)
    try:
        surface = a.args[TARGET_ARG[a.name]]
    except KeyError:
        raise GeometryError(f"no geometric model for action {a.name!r}") from None
    return Keyframe(a, standpoint(scene, surface))


def helper_travel(a: GroundAction, scene: Scene) -> float:
    """Arm displacement of a stationary helper moving an object between two surfaces."""
    if a.name not in HELPER_ACTIONS:
        return 0.0
    _, _, h, to = a.args
    return scene.pose(h).dist(scene.pose(to))


def action_cost(a: GroundAction, leg: float, scene: Scene, manip_cost: float) -> float:
    return leg + manip_cost * MANIP_WEIGHT.get(a.name, 1) + helper_travel(a, scene)


@dataclass(frozen=True)
class EffortReport:
    total: float
    per_action: tuple[tuple[str, float], ...] = field(default_factory=tuple)


def plan_effort(
    keyframes: Sequence[Keyframe],
    scene: Scene,
    manip_cost: float = DEFAULT_MANIP_COST,
    relaxed: bool = False,
) -> EffortReport:
    """Total effort of a realized plan; the mobile base starts at ``scene.robot_base``."""
    pos = scene.robot_base
    total = 0.0
    per = []
    for kf in keyframes:
        if kf.agent == MOBILE:
            leg = base_path_cost(pos, kf.base_pose, scene, relaxed=relaxed)
            pos = kf.base_pose
        else:
            leg = 0.0
        c = action_cost(kf.action, leg, scene, manip_cost)
        per.append((kf.action.label, c))
        total += c
    return EffortReport(total, tuple(per))


def realize(actions: Iterable[GroundAction], scene: Scene) -> list[Keyframe]:
    return [keyframe_for(a, scene) for a in actions]
