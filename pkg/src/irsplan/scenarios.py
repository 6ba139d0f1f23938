"""Scenario generators for the serving, pouring and handover tasks.

Layouts are fixed; only object counts, table assignments and auxiliary
placement are randomized. Each scenario is a pure function of (domain, seed).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .features import encode_features
from .geometry import Pose, Scene, SceneEntity
from .logic import Goal, Kind, State

DOMAINS = ("serving", "pouring", "handover")
ROBOT = "pr2"
GRIPPER = "g1"
HOME = "home"

SERVING_TABLES = {
    "table_south": Pose(0.0, -3.0),  # counter
    "table_east": Pose(3.0, 0.0),  # kitchen table
    "table_north": Pose(0.0, 3.0),  # dining table
}
POURING_TABLES = {
    "table_north": Pose(0.0, 3.0),
    "table_south": Pose(0.0, -3.0),
    "table_west": Pose(-3.0, 0.0),
}
POURING_SOURCE = ("source_east", Pose(3.0, 0.0))

# Handover maze: 20x20 cells of 0.5, a central wall open only at the bottom.
MAZE_CELL = 0.5
MAZE_SIZE = 20
HANDOVER_TABLES = {
    "table_north": Pose(7.5, 8.5),
    "table_east": Pose(8.5, 5.0),
    "table_south": Pose(5.0, 1.5),
}
HANDOVER_GOAL = ("table_west", Pose(2.5, 8.0))
HANDOVER_STATION = ("table_handover", Pose(2.5, 3.5))
HANDOVER_HELPER = ("franka", Pose(1.5, 5.75))
HANDOVER_HOME = Pose(7.75, 6.75)

# Single-object scenes are drawn twice as often so both labels stay well represented.
OBJECT_COUNTS = (1, 1, 2, 3, 4, 5)

HUMAN_DISTANCES = {"close": 1.0, "medium": 2.5, "far": 4.0}


def maze_rows() -> tuple[str, ...]:
    rows = []
    for r in range(MAZE_SIZE):
        row = []
        for c in range(MAZE_SIZE):
            wall = r in (0, MAZE_SIZE - 1) or c in (0, MAZE_SIZE - 1) or (c in (9, 10) and r >= 5)
            row.append("#" if wall else ".")
        rows.append("".join(row))
    return tuple(rows)


@dataclass(frozen=True)
class Scenario:
    domain: str
    s0: State
    scene: Scene
    sg: Goal
    seed: int

    @property
    def n_objects(self) -> int:
        return len({a[1] for a in self.sg.required if a[1].startswith("obj")})

    @property
    def auxiliaries(self) -> list[str]:
        return sorted(a[1] for a in self.s0 if a[0] == "helper")

    def features(self) -> dict[str, int]:
        return encode_features(self.s0, self.sg)


def _common(robot_base: Pose) -> list[SceneEntity]:
    return [
        SceneEntity(ROBOT, Kind.ROBOT),
        SceneEntity(GRIPPER, Kind.GRIPPER),
        SceneEntity(HOME, Kind.WAYPOINT, robot_base),
    ]


def serving(n: int, tray_table: str, goal_table: str, seed: int = 0, tables: dict | None = None) -> Scenario:
    tables = dict(SERVING_TABLES if tables is None else tables)
    base = Pose(0.0, 0.0)
    ents = _common(base)
    ents += [SceneEntity(t, Kind.TABLE, p) for t, p in sorted(tables.items())]
    ents.append(SceneEntity("tray", Kind.AUXILIARY, tables[tray_table]))
    objs = [f"obj{i}" for i in range(n)]
    ents += [SceneEntity(o, Kind.MOVABLE, tables["table_south"]) for o in objs]
    s0 = frozenset(
        [("at", ROBOT, HOME), ("on", "tray", tray_table), ("is_tray", "tray"), ("helper", "tray")]
        + [("on", o, "table_south") for o in objs]
    )
    sg = Goal(frozenset(("on", o, goal_table) for o in objs))
    return Scenario("serving", s0, Scene(tuple(ents), base, reach_radius=0.5), sg, seed)


def pouring(glass_tables: list[str], pitcher_table: str, seed: int = 0) -> Scenario:
    base = Pose(0.0, 0.0)
    ents = _common(base)
    ents += [SceneEntity(t, Kind.TABLE, p) for t, p in sorted(POURING_TABLES.items())]
    src, src_pose = POURING_SOURCE
    ents.append(SceneEntity(src, Kind.SOURCE, src_pose))
    ents.append(SceneEntity("pitcher", Kind.AUXILIARY, POURING_TABLES[pitcher_table]))
    objs = [f"obj{i}" for i in range(len(glass_tables))]
    ents += [SceneEntity(o, Kind.MOVABLE, POURING_TABLES[t]) for o, t in zip(objs, glass_tables)]
    s0 = frozenset(
        [
            ("at", ROBOT, HOME),
            ("on", "pitcher", pitcher_table),
            ("is_pitcher", "pitcher"),
            ("helper", "pitcher"),
            ("action_fill",),
            ("action_pour",),
        ]
        + [("on", o, t) for o, t in zip(objs, glass_tables)]
    )
    sg = Goal(frozenset(("filled", o) for o in objs))
    return Scenario("pouring", s0, Scene(tuple(ents), base, reach_radius=0.5), sg, seed)


def handover(object_tables: list[str], seed: int = 0, grid: tuple[str, ...] | None = None) -> Scenario:
    base = HANDOVER_HOME
    ents = _common(base)
    goal, goal_pose = HANDOVER_GOAL
    station, station_pose = HANDOVER_STATION
    helper, helper_pose = HANDOVER_HELPER
    tables = dict(HANDOVER_TABLES)
    tables[goal] = goal_pose
    tables[station] = station_pose
    ents += [SceneEntity(t, Kind.TABLE, p) for t, p in sorted(tables.items())]
    ents.append(SceneEntity(helper, Kind.AUXILIARY, helper_pose))
    objs = [f"obj{i}" for i in range(len(object_tables))]
    ents += [SceneEntity(o, Kind.MOVABLE, tables[t]) for o, t in zip(objs, object_tables)]
    s0 = frozenset(
        [
            ("at", ROBOT, HOME),
            ("station", helper, station),
            ("reaches", helper, goal),
            ("helper", helper),
            ("action_handover",),
        ]
        + [("on", o, t) for o, t in zip(objs, object_tables)]
    )
    sg = Goal(frozenset(("on", o, goal) for o in objs))
    scene = Scene(
        tuple(ents),
        base,
        reach_radius=0.75,
        helper_reach=2.5,
        cell=MAZE_CELL,
        grid=maze_rows() if grid is None else grid,
    )
    return Scenario("handover", s0, scene, sg, seed)


def make_scenario(domain: str, seed: int) -> Scenario:
    """Random scenario of ``domain``: 1-5 objects, random tables and auxiliary placement."""
    rng = random.Random(f"{domain}/{seed}")
    n = rng.choice(OBJECT_COUNTS)
    if domain == "serving":
        tray = rng.choice(sorted(SERVING_TABLES))
        goal = rng.choice(["table_east", "table_north"])
        return serving(n, tray, goal, seed)
    if domain == "pouring":
        tables = sorted(POURING_TABLES)
        return pouring([rng.choice(tables) for _ in range(n)], rng.choice(tables), seed)
    if domain == "handover":
        tables = sorted(HANDOVER_TABLES)
        return handover([rng.choice(tables) for _ in range(n)], seed)
    raise ValueError(f"unknown domain {domain!r}")


def gen_scenarios(domain: str, n: int, seed: int) -> list[Scenario]:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(f"suite/{domain}/{seed}")
    return [make_scenario(domain, rng.randrange(2**31)) for _ in range(n)]


def mixed_suite(n: int, seed: int, domains=DOMAINS) -> list[Scenario]:
    """``n`` scenarios cycling through ``domains`` in order."""
    rng = random.Random(f"mixed/{seed}")
    return [make_scenario(domains[i % len(domains)], rng.randrange(2**31)) for i in range(n)]


def human_grid() -> list[tuple[int, str, Scenario]]:
    """Serving cells for 1-5 mugs x close/medium/far, tray on the counter.

    The goal table sits east of the counter at the stated distance.
    """
    cells = []
    for n in range(1, 6):
        for label, d in HUMAN_DISTANCES.items():
            tables = {"table_south": Pose(0.0, -3.0), "table_east": Pose(d, -3.0)}
            sc = serving(n, "table_south", "table_east", seed=1000 + 10 * n, tables=tables)
            cells.append((n, label, sc))
    return cells
