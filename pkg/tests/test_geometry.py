from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irsplan.geometry import (
    GeometryError,
    InfeasibleKeyframe,
    Keyframe,
    Pose,
    Scene,
    SceneEntity,
    Unreachable,
    base_path_cost,
    keyframe_for,
    plan_effort,
    standpoint,
)
from irsplan.logic import SCHEMAS, Entity, Kind, ground
from irsplan.scenarios import HANDOVER_GOAL, handover, maze_rows, serving

from .oracles import grid_bfs

OPEN = Scene((), Pose(0.0, 0.0))


def empty_grid(w, h):
    return tuple("." * w for _ in range(h))


def test_euclidean_cost_in_open_scene():
    assert base_path_cost(Pose(0, 0), Pose(3, 4), OPEN) == 5.0


def test_grid_cost_on_empty_grid_is_manhattan():
    sc = Scene((), Pose(0, 0), cell=1.0, grid=empty_grid(5, 5))
    assert base_path_cost(Pose(0, 0), Pose(3, 4), sc) == 7.0


def test_maze_detour_exceeds_manhattan():
    sc = handover(["table_east"]).scene
    a, b = Pose(7.75, 6.75), Pose(2.75, 7.75)  # either side of the central wall
    got = base_path_cost(a, b, sc)
    manhattan = abs(a.x - b.x) + abs(a.y - b.y)
    assert got > manhattan
    assert got == grid_bfs(sc.grid, sc.cell_of(a), sc.cell_of(b)) * sc.cell


def test_grid_errors():
    sc = Scene((), Pose(0, 0), cell=1.0, grid=("...", "###", "..."))
    with pytest.raises(Unreachable):
        base_path_cost(Pose(0.5, 0.5), Pose(0.5, 2.5), sc)
    with pytest.raises(GeometryError):
        base_path_cost(Pose(0.5, 1.5), Pose(0.5, 0.5), sc)
    with pytest.raises(GeometryError):
        base_path_cost(Pose(9, 9), Pose(0.5, 0.5), sc)


@st.composite
def grids(draw):
    w, h = draw(st.integers(2, 8)), draw(st.integers(2, 8))
    cells = draw(st.lists(st.booleans(), min_size=w * h, max_size=w * h))
    rows = tuple("".join("#" if cells[r * w + c] and (r, c) != (0, 0) else "." for c in range(w)) for r in range(h))
    free = [(c, r) for r in range(h) for c in range(w) if rows[r][c] == "."]
    a = draw(st.sampled_from(free))
    b = draw(st.sampled_from(free))
    return rows, a, b


@settings(max_examples=150, deadline=None)
@given(grids())
def test_grid_cost_matches_bfs_oracle(g):
    rows, a, b = g
    sc = Scene((), Pose(0, 0), cell=0.5, grid=rows)
    pa, pb = sc.cell_center(*a), sc.cell_center(*b)
    want = grid_bfs(rows, a, b)
    if want is None:
        with pytest.raises(Unreachable):
            base_path_cost(pa, pb, sc)
        return
    got = base_path_cost(pa, pb, sc)
    assert got == want * 0.5
    assert got == base_path_cost(pb, pa, sc)
    assert got >= abs(pa.x - pb.x) + abs(pa.y - pb.y) - 1e-12
    assert got >= base_path_cost(pa, pb, sc, relaxed=True) - 1e-12


coords = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


@given(coords, coords, coords, coords, coords, coords)
def test_triangle_inequality_open_scene(ax, ay, bx, by, cx, cy):
    a, b, c = Pose(ax, ay), Pose(bx, by), Pose(cx, cy)
    assert base_path_cost(a, c, OPEN) <= base_path_cost(a, b, OPEN) + base_path_cost(b, c, OPEN) + 1e-9


def test_pose_rejects_non_finite():
    with pytest.raises(ValueError):
        Pose(float("nan"), 0.0)


def test_standpoint_matches_sampling_oracle():
    sc = serving(1, "table_east", "table_north").scene
    sp = standpoint(sc, "table_south")
    target, base = sc.pose("table_south"), sc.robot_base
    samples = [
        Pose(target.x + sc.reach_radius * math.cos(t), target.y + sc.reach_radius * math.sin(t))
        for t in (2 * math.pi * k / 7200 for k in range(7200))
    ]
    best = min(samples, key=lambda p: p.dist(base))
    assert sp.dist(best) < 1e-3
    assert sp == Pose(0.0, -2.5)
    assert sp.dist(target) == pytest.approx(sc.reach_radius)


def test_standpoint_inside_reach_is_the_base():
    sc = Scene((SceneEntity("t", Kind.TABLE, Pose(0.2, 0.0)),), Pose(0.0, 0.0))
    assert standpoint(sc, "t") == Pose(0.0, 0.0)


def test_walled_target_is_infeasible():
    rows = list(empty_grid(7, 7))
    rows[3] = "...#..."  # the only cell within reach of the table is a wall
    sc = Scene((SceneEntity("t", Kind.TABLE, Pose(3.5, 3.5)),), Pose(0.5, 0.5), reach_radius=0.5, cell=1.0, grid=tuple(rows))
    with pytest.raises(InfeasibleKeyframe):
        standpoint(sc, "t")


def test_symmetric_candidates_pick_lowest_x():
    sc = Scene((SceneEntity("t", Kind.TABLE, Pose(2.5, 2.5)),), Pose(2.5, 5.0), reach_radius=0.5, cell=0.5, grid=empty_grid(12, 12))
    assert standpoint(sc, "t") == Pose(2.25, 2.75)


def _act(name, **b):
    ents = {
        "pr2": Entity("pr2", Kind.ROBOT),
        "g1": Entity("g1", Kind.GRIPPER),
        "obj0": Entity("obj0", Kind.MOVABLE),
        "home": Entity("home", Kind.WAYPOINT),
        "t": Entity("t", Kind.TABLE),
    }
    return ground(SCHEMAS[name], b, ents)


def test_plan_effort_examples():
    assert plan_effort([], OPEN).total == 0.0
    mv = _act("move_base", r="pr2", **{"from": "home", "to": "t"})
    pl = _act("place", r="pr2", g="g1", obj="obj0", to="t")
    rep = plan_effort([Keyframe(mv, Pose(0, 3)), Keyframe(pl, Pose(0, 3))], OPEN, manip_cost=0.5)
    assert rep.total == 3.5
    assert rep.total == sum(c for _, c in rep.per_action)
    assert rep == plan_effort([Keyframe(mv, Pose(0, 3)), Keyframe(pl, Pose(0, 3))], OPEN, manip_cost=0.5)


@given(st.lists(st.tuples(coords, coords, st.booleans()), max_size=8))
def test_plan_effort_monotone_in_appended_actions(pts):
    mv = _act("move_base", r="pr2", **{"from": "home", "to": "t"})
    pl = _act("place", r="pr2", g="g1", obj="obj0", to="t")
    kfs = [Keyframe(pl if m else mv, Pose(x, y)) for x, y, m in pts]
    totals = [plan_effort(kfs[:i], OPEN).total for i in range(len(kfs) + 1)]
    assert all(b >= a for a, b in zip(totals, totals[1:]))


def test_helper_keyframe_respects_helper_reach():
    sc = handover(["table_east"]).scene
    a = ground(
        SCHEMAS["handover_place"],
        {"helper": "franka", "obj": "obj0", "h": "table_handover", "to": HANDOVER_GOAL[0]},
        {e.id: Entity(e.id, e.kind) for e in sc.entities},
    )
    kf = keyframe_for(a, sc)
    assert kf.agent == "franka" and kf.base_pose == sc.pose("franka")
    short = Scene(sc.entities, sc.robot_base, sc.reach_radius, 1.0, sc.cell, sc.grid)
    with pytest.raises(InfeasibleKeyframe):
        keyframe_for(a, short)


@pytest.mark.parametrize("sc", [serving(2, "table_south", "table_east").scene, handover(["table_north"]).scene])
def test_scene_text_round_trip(sc):
    text = sc.dumps()
    again = Scene.loads(text)
    assert again == sc and again.dumps() == text


def test_maze_shape():
    rows = maze_rows()
    assert len(rows) == 20 and {len(r) for r in rows} == {20}
    assert rows[10][9] == "#" and rows[2][9] == "."
