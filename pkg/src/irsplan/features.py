"""Binary feature encoding of an (initial state, goal) pair.

One schema serves all three tasks so that a single rule set can be learned
across them. Names follow the printed rule literals, e.g. ``obj0_on_table_south``
or ``goal_at_table_north``.
"""

from __future__ import annotations

import re

from .logic import Goal, SchemaError, State

MAX_OBJECTS = 5
SURFACES = ("table_north", "table_south", "table_east", "table_west", "table_handover", "source_east")
GOAL_TABLES = ("table_north", "table_south", "table_east", "table_west", "table_handover")
CAPABILITIES = ("action_fill", "action_pour", "action_handover")

_OBJ_RE = re.compile(r"^obj(\d+)$")


def _schema() -> tuple[str, ...]:
    names = []
    for i in range(MAX_OBJECTS):
        names += [f"obj{i}_on_{s}" for s in SURFACES]
        names.append(f"obj{i}_on_tray")
    names += [f"goal_at_{t}" for t in GOAL_TABLES]
    names.append("goal_filled")
    names.append("helper_exists")
    names += [f"tray_on_{s}" for s in SURFACES]
    names += [f"pitcher_on_{s}" for s in SURFACES]
    names += list(CAPABILITIES)
    names += [f"n_objects_ge_{k}" for k in range(2, MAX_OBJECTS + 1)]
    return tuple(names)


FEATURE_NAMES: tuple[str, ...] = _schema()
_FEATURE_SET = frozenset(FEATURE_NAMES)


def is_feature(name: str) -> bool:
    return name in _FEATURE_SET


def _object_index(eid: str) -> int | None:
    m = _OBJ_RE.match(eid)
    if not m:
        return None
    i = int(m.group(1))
    if i >= MAX_OBJECTS:
        raise SchemaError(f"object {eid} outside the {MAX_OBJECTS}-object feature schema")
    return i


def encode_features(s0: State, sg: Goal) -> dict[str, int]:
    """Fixed-schema 0/1 vector (as an ordered dict) describing ``s0`` and ``sg``.

    Anything outside the schema, such as robot poses or the ordering of atoms,
    does not influence the encoding.
    """
    f = dict.fromkeys(FEATURE_NAMES, 0)
    trays = {a[1] for a in s0 if a[0] == "is_tray"}
    pitchers = {a[1] for a in s0 if a[0] == "is_pitcher"}
    helpers = {a[1] for a in s0 if a[0] == "helper"}
    objects: set[str] = set()
    for a in s0:
        pred = a[0]
        if pred == "on":
            what, where = a[1], a[2]
            i = _object_index(what)
            if i is not None:
                objects.add(what)
                if where in trays:
                    f[f"obj{i}_on_tray"] = 1
                elif where in SURFACES:
                    f[f"obj{i}_on_{where}"] = 1
                else:
                    raise SchemaError(f"unknown surface {where!r}")
            elif what in trays:
                f[f"tray_on_{_surface(where)}"] = 1
            elif what in pitchers:
                f[f"pitcher_on_{_surface(where)}"] = 1
            else:
                raise SchemaError(f"unknown entity {what!r}")
        elif pred == "picked":
            if _object_index(a[2]) is not None:
                objects.add(a[2])
        elif pred in CAPABILITIES:
            f[pred] = 1
    if helpers or trays or pitchers:
        f["helper_exists"] = 1
    for a in sg.required:
        if a[0] == "on" and _object_index(a[1]) is not None:
            objects.add(a[1])
            if a[2] in GOAL_TABLES:
                f[f"goal_at_{a[2]}"] = 1
        elif a[0] == "filled" and _object_index(a[1]) is not None:
            objects.add(a[1])
            f["goal_filled"] = 1
    for k in range(2, MAX_OBJECTS + 1):
        f[f"n_objects_ge_{k}"] = int(len(objects) >= k)
    return f


def _surface(where: str) -> str:
    if where not in SURFACES:
        raise SchemaError(f"unknown surface {where!r}")
    return where
