"""First-order symbolic layer: entities, atoms, action schemas and the transition function.

Atoms are plain tuples ``(predicate, arg0, arg1, ...)`` so that states can be
frozensets of atoms, which keeps them hashable and cheap to compare inside
the search.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

Atom = tuple
State = frozenset

WILDCARD = "*"


class Kind(str, Enum):
    ROBOT = "robot"
    GRIPPER = "gripper"
    MOVABLE = "movable_object"
    AUXILIARY = "auxiliary_object"
    TABLE = "table"
    SOURCE = "source"
    WAYPOINT = "waypoint"


LOCATION_KINDS = frozenset({Kind.TABLE, Kind.SOURCE, Kind.WAYPOINT})
SURFACE_KINDS = frozenset({Kind.TABLE, Kind.SOURCE})


class LogicError(Exception):
    """Base class for symbolic-layer failures."""


class GroundingError(LogicError):
    pass


class PreconditionViolation(LogicError):
    pass


class SchemaError(LogicError):
    """Raised for unknown entities or features outside the fixed schema."""


@dataclass(frozen=True)
class Entity:
    id: str
    kind: Kind


def atom(pred: str, *args: str) -> Atom:
    return (pred, *args)


def atom_str(a: Atom) -> str:
    return f"{a[0]}({','.join(a[1:])})"


_ATOM_RE = re.compile(r"^\s*([A-Za-z_][\w]*)\s*\(([^()]*)\)\s*$")


def parse_atom(text: str) -> Atom:
    m = _ATOM_RE.match(text)
    if not m:
        raise ValueError(f"malformed atom: {text!r}")
    args = [s.strip() for s in m.group(2).split(",") if s.strip()]
    return (m.group(1), *args)


def state(*atoms: Atom | str) -> State:
    return frozenset(parse_atom(a) if isinstance(a, str) else tuple(a) for a in atoms)


def state_strs(s: Iterable[Atom]) -> list[str]:
    return sorted(atom_str(a) for a in s)


@dataclass(frozen=True)
class ActionSchema:
    """A STRIPS-like operator with typed parameters.

    Templates are tuples whose arguments are either parameter names or the
    wildcard ``*`` (allowed in negative preconditions only). ``distinct``
    lists parameter pairs that must be bound to different entities.
    """

    name: str
    params: tuple[tuple[str, frozenset], ...]
    pre: tuple[Atom, ...] = ()
    neg: tuple[Atom, ...] = ()
    add: tuple[Atom, ...] = ()
    delete: tuple[Atom, ...] = ()
    distinct: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        names = {p for p, _ in self.params}
        for t in self.add + self.delete + self.pre:
            for arg in t[1:]:
                if arg not in names:
                    raise SchemaError(f"{self.name}: template {t} uses undeclared {arg!r}")
        for t in self.neg:
            for arg in t[1:]:
                if arg != WILDCARD and arg not in names:
                    raise SchemaError(f"{self.name}: template {t} uses undeclared {arg!r}")

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p for p, _ in self.params)


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: tuple[str, ...]
    pre: frozenset
    neg: frozenset
    add: frozenset
    delete: frozenset

    @property
    def label(self) -> str:
        return f"{self.name}({','.join(self.args)})"

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class Goal:
    required: frozenset = frozenset()
    forbidden: frozenset = frozenset()

    @classmethod
    def of(cls, required: Iterable = (), forbidden: Iterable = ()) -> Goal:
        conv = lambda xs: frozenset(parse_atom(a) if isinstance(a, str) else tuple(a) for a in xs)
        return cls(conv(required), conv(forbidden))

    def __or__(self, other: Goal) -> Goal:
        return Goal(self.required | other.required, self.forbidden | other.forbidden)


def _subst(template: Atom, b: Mapping[str, str]) -> Atom:
    return (template[0], *(WILDCARD if a == WILDCARD else b[a] for a in template[1:]))


def ground(schema: ActionSchema, bindings: Mapping[str, str], entities: Mapping[str, Entity]) -> GroundAction:
    """Substitute ``bindings`` into ``schema``; every parameter must be bound to a kind-compatible entity."""
    for pname, kinds in schema.params:
        if pname not in bindings:
            raise GroundingError(f"{schema.name}: missing binding for {pname!r}")
        eid = bindings[pname]
        if eid not in entities:
            raise GroundingError(f"{schema.name}: unknown entity {eid!r}")
        if entities[eid].kind not in kinds:
            raise GroundingError(
                f"{schema.name}: {pname}={eid} has kind {entities[eid].kind.value}, "
                f"expected one of {sorted(k.value for k in kinds)}"
            )
    for a, b in schema.distinct:
        if bindings[a] == bindings[b]:
            raise GroundingError(f"{schema.name}: {a} and {b} must differ")
    args = tuple(bindings[p] for p in schema.param_names)
    return GroundAction(
        name=schema.name,
        args=args,
        pre=frozenset(_subst(t, bindings) for t in schema.pre),
        neg=frozenset(_subst(t, bindings) for t in schema.neg),
        add=frozenset(_subst(t, bindings) for t in schema.add),
        delete=frozenset(_subst(t, bindings) for t in schema.delete),
    )


def ground_all(schemas: Iterable[ActionSchema], entities: Iterable[Entity]) -> list[GroundAction]:
    """All groundings, in (schema name, argument ids) lexicographic order."""
    ents = sorted(entities, key=lambda e: e.id)
    by_id = {e.id: e for e in ents}
    out = []
    for schema in sorted(schemas, key=lambda s: s.name):
        pools = [[e.id for e in ents if e.kind in kinds] for _, kinds in schema.params]
        for combo in itertools.product(*pools):
            b = dict(zip(schema.param_names, combo))
            if any(b[x] == b[y] for x, y in schema.distinct):
                continue
            out.append(ground(schema, b, by_id))
    out.sort(key=lambda a: (a.name, a.args))
    return out


def _neg_hit(s: State, pattern: Atom) -> bool:
    if WILDCARD not in pattern:
        return pattern in s
    n = len(pattern)
    for a in s:
        if len(a) == n and all(p == WILDCARD or p == x for p, x in zip(pattern, a)):
            return True
    return False


def applicable(s: State, a: GroundAction) -> bool:
    return a.pre <= s and not any(_neg_hit(s, p) for p in a.neg)


def apply(s: State, a: GroundAction) -> State:
    if not applicable(s, a):
        raise PreconditionViolation(f"{a.label} not applicable")
    return (s - a.delete) | a.add


def satisfies(s: State, g: Goal) -> bool:
    return g.required <= s and not (g.forbidden & s)


def replay(s0: State, actions: Iterable[GroundAction]) -> list[State]:
    """States visited by folding ``apply`` over ``actions`` (including ``s0``)."""
    states = [s0]
    for a in actions:
        states.append(apply(states[-1], a))
    return states


def mutex_violations(s: State) -> list[str]:
    """Mutual-exclusion checks: one support per object, one holder per object, one object per gripper."""
    problems = []
    supports: dict[str, list[str]] = {}
    holders: dict[str, list[str]] = {}
    held_by: dict[str, list[str]] = {}
    for a in s:
        if a[0] == "on":
            supports.setdefault(a[1], []).append(a[2])
        elif a[0] == "picked":
            holders.setdefault(a[2], []).append(a[1])
            held_by.setdefault(a[1], []).append(a[2])
    for o, sup in supports.items():
        if len(sup) > 1:
            problems.append(f"{o} on several surfaces {sorted(sup)}")
        if o in holders:
            problems.append(f"{o} both on a surface and picked")
    for o, hs in holders.items():
        if len(hs) > 1:
            problems.append(f"{o} picked by several grippers")
    for g, objs in held_by.items():
        if len(objs) > 1:
            problems.append(f"{g} holds several objects")
    return problems


# ---------------------------------------------------------------------------
# Domain vocabulary shared by serving, pouring and handover.

_LOC = LOCATION_KINDS
_SURF = SURFACE_KINDS
_R = frozenset({Kind.ROBOT})
_G = frozenset({Kind.GRIPPER})
_OBJ = frozenset({Kind.MOVABLE})
_AUX = frozenset({Kind.AUXILIARY})
_TABLE = frozenset({Kind.TABLE})
_SRC = frozenset({Kind.SOURCE})

SCHEMAS: dict[str, ActionSchema] = {
    s.name: s
    for s in [
        ActionSchema(
            "move_base",
            (("r", _R), ("from", _LOC), ("to", _LOC)),
            pre=(("at", "r", "from"),),
            add=(("at", "r", "to"),),
            delete=(("at", "r", "from"),),
            distinct=(("from", "to"),),
        ),
        ActionSchema(
            "pick",
            (("r", _R), ("g", _G), ("obj", _OBJ), ("from", _SURF)),
            pre=(("at", "r", "from"), ("on", "obj", "from")),
            neg=(("picked", "g", WILDCARD),),
            add=(("picked", "g", "obj"),),
            delete=(("on", "obj", "from"),),
        ),
        ActionSchema(
            "place",
            (("r", _R), ("g", _G), ("obj", _OBJ), ("to", _SURF)),
            pre=(("at", "r", "to"), ("picked", "g", "obj")),
            add=(("on", "obj", "to"),),
            delete=(("picked", "g", "obj"),),
        ),
        ActionSchema(
            "fill",
            (("r", _R), ("obj", _OBJ), ("src", _SRC)),
            pre=(("at", "r", "src"), ("on", "obj", "src"), ("action_fill",)),
            neg=(("filled", "obj"),),
            add=(("filled", "obj"),),
        ),
        ActionSchema(
            "load_tray",
            (("r", _R), ("g", _G), ("obj", _OBJ), ("tray", _AUX), ("loc", _SURF)),
            pre=(("at", "r", "loc"), ("on", "tray", "loc"), ("picked", "g", "obj"), ("is_tray", "tray")),
            add=(("on", "obj", "tray"),),
            delete=(("picked", "g", "obj"),),
        ),
        ActionSchema(
            "unload_tray",
            (("r", _R), ("g", _G), ("obj", _OBJ), ("tray", _AUX), ("loc", _SURF)),
            pre=(("at", "r", "loc"), ("on", "tray", "loc"), ("on", "obj", "tray"), ("is_tray", "tray")),
            neg=(("picked", "g", WILDCARD),),
            add=(("picked", "g", "obj"),),
            delete=(("on", "obj", "tray"),),
        ),
        ActionSchema(
            "carry_tray",
            (("r", _R), ("g", _G), ("tray", _AUX), ("from", _SURF), ("to", _SURF)),
            pre=(("at", "r", "from"), ("on", "tray", "from"), ("is_tray", "tray")),
            neg=(("picked", "g", WILDCARD),),
            add=(("at", "r", "to"), ("on", "tray", "to")),
            delete=(("at", "r", "from"), ("on", "tray", "from")),
            distinct=(("from", "to"),),
        ),
        ActionSchema(
            "grasp_pitcher",
            (("r", _R), ("g", _G), ("pitcher", _AUX), ("from", _SURF)),
            pre=(("at", "r", "from"), ("on", "pitcher", "from"), ("is_pitcher", "pitcher")),
            neg=(("picked", "g", WILDCARD),),
            add=(("picked", "g", "pitcher"),),
            delete=(("on", "pitcher", "from"),),
        ),
        ActionSchema(
            "fill_pitcher",
            (("r", _R), ("g", _G), ("pitcher", _AUX), ("src", _SRC)),
            pre=(("at", "r", "src"), ("picked", "g", "pitcher"), ("is_pitcher", "pitcher"), ("action_fill",)),
            neg=(("filled", "pitcher"),),
            add=(("filled", "pitcher"),),
        ),
        ActionSchema(
            "pour",
            (("r", _R), ("g", _G), ("pitcher", _AUX), ("obj", _OBJ), ("loc", _SURF)),
            pre=(
                ("at", "r", "loc"),
                ("picked", "g", "pitcher"),
                ("filled", "pitcher"),
                ("on", "obj", "loc"),
                ("action_pour",),
            ),
            neg=(("filled", "obj"),),
            add=(("filled", "obj"),),
        ),
        ActionSchema(
            "handover_give",
            (("r", _R), ("g", _G), ("obj", _OBJ), ("helper", _AUX), ("h", _TABLE)),
            pre=(("at", "r", "h"), ("picked", "g", "obj"), ("station", "helper", "h")),
            add=(("on", "obj", "h"),),
            delete=(("picked", "g", "obj"),),
        ),
        ActionSchema(
            "handover_place",
            (("helper", _AUX), ("obj", _OBJ), ("h", _TABLE), ("to", _TABLE)),
            pre=(("station", "helper", "h"), ("reaches", "helper", "to"), ("on", "obj", "h"), ("action_handover",)),
            add=(("on", "obj", "to"),),
            delete=(("on", "obj", "h"),),
            distinct=(("h", "to"),),
        ),
    ]
}

# Schemas that never touch an auxiliary object.
DIRECT_SCHEMAS = frozenset({"move_base", "pick", "place", "fill"})
AUXILIARY_SCHEMAS = frozenset(SCHEMAS) - DIRECT_SCHEMAS

# Predicates no schema adds or deletes; they describe the scene, not its progress.
STATIC_PREDICATES = frozenset(
    {"is_tray", "is_pitcher", "station", "reaches", "helper", "action_fill", "action_pour", "action_handover"}
)


# ---------------------------------------------------------------------------
# Domain files (JSON).


@dataclass
class Domain:
    """A named vocabulary: predicate arities, schemas and entities."""

    name: str
    predicates: dict[str, int] = field(default_factory=dict)
    schemas: dict[str, ActionSchema] = field(default_factory=dict)
    entities: dict[str, Entity] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def sch(s: ActionSchema) -> dict:
            return {
                "params": [[p, sorted(k.value for k in kinds)] for p, kinds in s.params],
                "pre": [list(t) for t in s.pre],
                "neg": [list(t) for t in s.neg],
                "add": [list(t) for t in s.add],
                "delete": [list(t) for t in s.delete],
                "distinct": [list(d) for d in s.distinct],
            }

        return {
            "name": self.name,
            "predicates": dict(sorted(self.predicates.items())),
            "schemas": {n: sch(s) for n, s in sorted(self.schemas.items())},
            "entities": [[e.id, e.kind.value] for e in sorted(self.entities.values(), key=lambda e: e.id)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> Domain:
        schemas = {}
        for name, s in d["schemas"].items():
            schemas[name] = ActionSchema(
                name,
                tuple((p, frozenset(Kind(k) for k in kinds)) for p, kinds in s["params"]),
                pre=tuple(tuple(t) for t in s["pre"]),
                neg=tuple(tuple(t) for t in s["neg"]),
                add=tuple(tuple(t) for t in s["add"]),
                delete=tuple(tuple(t) for t in s["delete"]),
                distinct=tuple(tuple(x) for x in s["distinct"]),
            )
        return cls(
            name=d["name"],
            predicates=dict(d["predicates"]),
            schemas=schemas,
            entities={eid: Entity(eid, Kind(k)) for eid, k in d["entities"]},
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def loads(cls, text: str) -> Domain:
        return cls.from_dict(json.loads(text))


def predicate_arities(schemas: Iterable[ActionSchema]) -> dict[str, int]:
    ar: dict[str, int] = {}
    for s in schemas:
        for t in s.pre + s.neg + s.add + s.delete:
            n = len(t) - 1
            if ar.setdefault(t[0], n) != n:
                raise SchemaError(f"predicate {t[0]} used with arities {ar[t[0]]} and {n}")
    return ar
