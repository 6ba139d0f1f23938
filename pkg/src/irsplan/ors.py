"""Optimized rule synthesis and the mapping from auxiliary objects to sub-problems."""

from __future__ import annotations

import csv
import io
import itertools
import logging
import random
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import Sample, to_matrix
from .features import FEATURE_NAMES, is_feature
from .logic import Goal, LogicError, SchemaError, State
from .planner import SubProblem

log = logging.getLogger(__name__)

ALPHA = 0.5
BETA = 10
TAU = 0.2
BUDGET = 100_000
POSITIVE, NEGATIVE = 1, 0
HEADS = {"positive": POSITIVE, "negative": NEGATIVE}
HEAD_NAMES = {v: k for k, v in HEADS.items()}
AND, OR = "AND", "OR"
PROVENANCES = ("miner", "imported-RRL", "imported-CARL")

TRAY_FILL = frozenset({"move_base", "pick", "load_tray", "carry_tray"})
TRAY_DELIVER = frozenset({"move_base", "carry_tray", "unload_tray", "place"})
PITCHER_FILL = frozenset({"move_base", "grasp_pitcher", "fill_pitcher"})
PITCHER_POUR = frozenset({"move_base", "pour"})
HANDOVER_GIVE = frozenset({"move_base", "pick", "handover_give"})
HANDOVER_PLACE = frozenset({"handover_place"})


def _objects(s0: State) -> list[str]:
    objs = {a[1] for a in s0 if a[0] == "on" and a[1].startswith("obj")}
    objs |= {a[2] for a in s0 if a[0] == "picked" and a[2].startswith("obj")}
    return sorted(objs)


def object_usage(s0: State, sg: Goal | None = None) -> list[SubProblem]:
    """Two sub-problems per auxiliary object, auxiliaries in entity-id order.

    The first establishes the auxiliary's precondition (objects loaded, pitcher
    filled, objects staged for the helper arm); the second uses it. ``sg`` is
    needed only to place the tray at the goal table.
    """
    objs = _objects(s0)
    trays = {a[1] for a in s0 if a[0] == "is_tray"}
    pitchers = {a[1] for a in s0 if a[0] == "is_pitcher"}
    stations = {a[1]: a[2] for a in s0 if a[0] == "station"}
    out: list[SubProblem] = []
    for aux in sorted({a[1] for a in s0 if a[0] == "helper"}):
        if aux in trays:
            goal_tables = sorted({a[2] for a in (sg.required if sg else ()) if a[0] == "on" and a[1] in objs})
            out.append(SubProblem(f"{aux}:load", TRAY_FILL, Goal(frozenset(("on", o, aux) for o in objs))))
            deliver = frozenset(("on", aux, t) for t in goal_tables[:1])
            out.append(SubProblem(f"{aux}:deliver", TRAY_DELIVER, Goal(deliver)))
        elif aux in pitchers:
            out.append(SubProblem(f"{aux}:fill", PITCHER_FILL, Goal(frozenset({("filled", aux)}))))
            out.append(SubProblem(f"{aux}:pour", PITCHER_POUR, Goal(frozenset())))
        elif aux in stations:
            h = stations[aux]
            out.append(SubProblem(f"{aux}:give", HANDOVER_GIVE, Goal(frozenset(("on", o, h) for o in objs))))
            out.append(SubProblem(f"{aux}:place", HANDOVER_PLACE, Goal(frozenset())))
        else:
            raise LogicError(f"auxiliary {aux!r} has no known usage")
    return out


# ---------------------------------------------------------------------------
# Conditions and rules.

# Printed literal spellings that differ from feature names.
_ALIASES = {"is_helper_exist": "helper_exists", "helper_exist": "helper_exists"}


def normalize_feature(text: str) -> str:
    name = "_".join(text.strip().split())
    return _ALIASES.get(name, name)


@dataclass(frozen=True, order=True)
class Condition:
    feature: str
    positive: bool = True

    def __post_init__(self):
        if not is_feature(self.feature):
            raise SchemaError(f"unknown feature {self.feature!r}")

    def holds(self, features: Mapping[str, int]) -> bool:
        try:
            v = features[self.feature]
        except KeyError:
            raise SchemaError(f"sample lacks feature {self.feature!r}") from None
        return bool(v) == self.positive

    def __str__(self) -> str:
        return self.feature if self.positive else f"¬{self.feature}"

    @classmethod
    def parse(cls, text: str) -> Condition:
        text = text.strip()
        if text.startswith("¬"):
            return cls(normalize_feature(text[1:]), False)
        return cls(normalize_feature(text), True)


@dataclass(frozen=True)
class Rule:
    head: int
    connective: str
    body: tuple[Condition, ...]
    confidence: float = field(default=0.0, compare=False)
    provenance: str = field(default="miner", compare=False)

    def __post_init__(self):
        if not self.body:
            raise ValueError("rule body must be nonempty")
        if self.head not in (POSITIVE, NEGATIVE):
            raise ValueError(f"bad head {self.head!r}")
        if self.connective not in (AND, OR):
            raise ValueError(f"bad connective {self.connective!r}")
        feats = [c.feature for c in self.body]
        if len(set(feats)) != len(feats):
            raise ValueError(f"duplicate or contradictory conditions in {feats}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"bad provenance {self.provenance!r}")
        # canonical form: sorted body, single conditions are AND
        object.__setattr__(self, "body", tuple(sorted(self.body)))
        if len(self.body) == 1:
            object.__setattr__(self, "connective", AND)

    def __len__(self) -> int:
        return len(self.body)

    @property
    def text(self) -> str:
        sep = " & " if self.connective == AND else " | "
        return f"{HEAD_NAMES[self.head]} <- " + sep.join(str(c) for c in self.body)

    def __str__(self) -> str:
        return self.text

    def priority(self) -> tuple:
        return (-self.confidence, len(self.body), self.text)

    def with_confidence(self, confidence: float) -> Rule:
        return Rule(self.head, self.connective, self.body, confidence, self.provenance)

    @classmethod
    def parse(cls, line: str, provenance: str = "miner") -> Rule:
        """Parse ``head <- cond & cond`` (or ``|``), with an optional ``# key=value`` tail."""
        text, _, tail = line.partition("#")
        meta = dict(kv.split("=", 1) for kv in tail.split() if "=" in kv)
        head_s, arrow, body_s = text.partition("<-")
        if not arrow:
            raise ValueError(f"rule lacks '<-': {line!r}")
        head_s = head_s.strip().lower()
        if head_s not in HEADS:
            raise ValueError(f"bad head {head_s!r}")
        has_and, has_or = "&" in body_s, "|" in body_s
        if has_and and has_or:
            raise ValueError("mixed connectives in one rule")
        parts = body_s.split("|" if has_or else "&")
        body = tuple(Condition.parse(p) for p in parts if p.strip())
        return cls(
            HEADS[head_s],
            OR if has_or else AND,
            body,
            float(meta.get("confidence", 0.0)),
            meta.get("provenance", provenance),
        )


def evaluate_rule(r: Rule, features: Mapping[str, int]) -> tuple[bool, float]:
    """(matched, fraction of body conditions the sample satisfies)."""
    hits = sum(c.holds(features) for c in r.body)
    matched = hits == len(r.body) if r.connective == AND else hits > 0
    return matched, hits / len(r.body)


def mean_confidence(r: Rule, data: Sequence[Sample], matched_only: bool = False) -> float:
    """Average per-sample condition fraction over ``data`` (or only the samples ``r`` matches)."""
    vals = []
    for s in data:
        m, c = evaluate_rule(r, s.features)
        if m or not matched_only:
            vals.append(c)
    return sum(vals) / len(vals) if vals else 0.0


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]
    min_components: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(sorted(self.rules, key=Rule.priority)))

    def __len__(self) -> int:
        return len(self.rules)

    def mean_length(self) -> float:
        return sum(len(r) for r in self.rules) / len(self.rules) if self.rules else 0.0

    def dumps(self) -> str:
        return "".join(
            f"{r.text}  # confidence={r.confidence!r} provenance={r.provenance}\n" for r in self.rules
        )

    @classmethod
    def loads(cls, text: str, provenance: str = "miner") -> RuleSet:
        rules = []
        for ln in text.splitlines():
            if ln.strip() and not ln.lstrip().startswith("#"):
                rules.append(Rule.parse(ln, provenance))
        return cls(tuple(rules), len(rules))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, provenance: str = "miner") -> RuleSet:
        return cls.loads(Path(path).read_text(encoding="utf-8"), provenance)


def predict(rs: RuleSet, features: Mapping[str, int]) -> tuple[int, float, Rule | None]:
    """(label, confidence, rule) of the highest-priority matching rule; no match gives negative."""
    for r in rs.rules:
        if evaluate_rule(r, features)[0]:
            return r.head, r.confidence, r
    return NEGATIVE, 0.0, None


# ---------------------------------------------------------------------------
# Scores.


@dataclass(frozen=True)
class Score:
    accuracy: float
    interpretability: float
    balance: float


def interpretability(mean_length: float, beta: int = BETA) -> float:
    if beta <= 1:
        return 1.0
    return 1.0 - (mean_length - 1.0) / (beta - 1.0)


def balance(accuracy: float, interp: float, alpha: float = ALPHA) -> float:
    return alpha * accuracy + (1.0 - alpha) * interp


def accuracy(y_true: Sequence[int], y_pred: Sequence[int]) -> float:
    y_true, y_pred = np.asarray(y_true, bool), np.asarray(y_pred, bool)
    return float(np.mean(y_true == y_pred)) if len(y_true) else 0.0


def score(rs: RuleSet, data: Sequence[Sample], alpha: float = ALPHA, beta: int = BETA) -> Score:
    if not data:
        raise ValueError("cannot score on empty data")
    pred = [predict(rs, s.features)[0] for s in data]
    acc = accuracy([s.label for s in data], pred)
    interp = interpretability(rs.mean_length(), beta) if rs.rules else 1.0
    return Score(acc, interp, balance(acc, interp, alpha))


# ---------------------------------------------------------------------------
# Candidate conditions and rule generation.


def mine_candidate_conditions(
    train: Sequence[Sample],
    tau: float = TAU,
    imported: Iterable[Rule] = (),
    min_features: int = 0,
) -> list[Condition]:
    """Both polarities of every feature whose class frequencies differ by more than ``tau``.

    If fewer than ``min_features`` features pass, the next features by frequency
    difference (still nonzero) are added until there are enough. Conditions
    appearing in ``imported`` rules are always included.
    """
    if not train:
        raise ValueError("cannot mine conditions from empty data")
    X, y = to_matrix(train)
    conds: set[Condition] = set()
    if y.all() or not y.any():
        log.warning("single-class training data; emitting every feature")
        chosen = range(len(FEATURE_NAMES))
    else:
        diff = np.abs(X[y].mean(axis=0) - X[~y].mean(axis=0))
        chosen = list(np.flatnonzero(diff > tau))
        if len(chosen) < min_features:
            order = sorted(np.flatnonzero(diff > 0), key=lambda j: (-round(float(diff[j]), 12), j))
            chosen = order[: max(min_features, len(chosen))]
    for j in chosen:
        conds.add(Condition(FEATURE_NAMES[j], True))
        conds.add(Condition(FEATURE_NAMES[j], False))
    for r in imported:
        conds.update(r.body)
    return sorted(conds)


def _truth(conditions: Sequence[Condition], data: Sequence[Sample]) -> np.ndarray:
    """Boolean matrix: row j tells which samples satisfy condition j."""
    X, _ = to_matrix(data)
    idx = {n: i for i, n in enumerate(FEATURE_NAMES)}
    rows = [X[:, idx[c.feature]] if c.positive else ~X[:, idx[c.feature]] for c in conditions]
    return np.array(rows, dtype=bool).reshape(len(conditions), len(data))


def _entropy(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
    return np.nan_to_num(h)


def information_gain(truth: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Label information gain of splitting on each condition (row of ``truth``)."""
    n = len(y)
    base = _entropy(np.array(y.mean() if n else 0.0))
    cnt = truth.sum(axis=1)
    pos = (truth & y).sum(axis=1)
    rest, rest_pos = n - cnt, y.sum() - pos
    with np.errstate(divide="ignore", invalid="ignore"):
        h1 = _entropy(np.where(cnt > 0, pos / np.maximum(cnt, 1), 0.0))
        h0 = _entropy(np.where(rest > 0, rest_pos / np.maximum(rest, 1), 0.0))
    return base - (cnt * h1 + rest * h0) / max(n, 1)


def _prerank(conditions: list[Condition], train: Sequence[Sample], k: int, budget: int) -> list[Condition]:
    """Keep the most informative conditions so that 4 * C(m, k) fits ``budget``."""
    m = len(conditions)
    if 4 * comb(m, k) <= budget:
        return conditions
    while m > k and 4 * comb(m, k) > budget:
        m -= 1
    _, y = to_matrix(train)
    gain = information_gain(_truth(conditions, train), y)
    order = sorted(range(len(conditions)), key=lambda j: (-round(float(gain[j]), 12), conditions[j]))
    # guarantee k distinct features so a contradiction-free body exists
    keep, seen = [], set()
    for j in order:
        if len(seen) < k and conditions[j].feature not in seen:
            keep.append(j)
            seen.add(conditions[j].feature)
    for j in order:
        if len(keep) >= m:
            break
        if j not in keep:
            keep.append(j)
    return sorted(conditions[j] for j in keep)


def _bodies(conditions: Sequence[Condition], k: int) -> np.ndarray:
    """All contradiction-free size-k index combinations, shape (R, k)."""
    if k > len(conditions) or k < 1:
        return np.zeros((0, max(k, 0)), dtype=np.int32)
    combos = np.array(list(itertools.combinations(range(len(conditions)), k)), dtype=np.int32)
    feat_ids = {f: i for i, f in enumerate(sorted({c.feature for c in conditions}))}
    fid = np.array([feat_ids[c.feature] for c in conditions], dtype=np.int32)[combos]
    fid.sort(axis=1)
    ok = (np.diff(fid, axis=1) != 0).all(axis=1) if k > 1 else np.ones(len(combos), bool)
    return combos[ok]


def generate_rules(
    train: Sequence[Sample],
    conditions: Sequence[Condition],
    k: int,
    budget: int = BUDGET,
) -> list[Rule]:
    """Every size-k body under both connectives and both heads.

    Single-condition bodies are emitted once per head since the connectives coincide.
    """
    conds = _prerank(sorted(conditions), train, k, budget)
    out = []
    for combo in _bodies(conds, k):
        body = tuple(conds[j] for j in combo)
        for conn in (AND, OR) if k > 1 else (AND,):
            for head in (POSITIVE, NEGATIVE):
                out.append(Rule(head, conn, body))
    return out


def laplace_confidence(matched: np.ndarray, y: np.ndarray, head: int) -> float:
    """Smoothed precision of ``head`` over the matched samples."""
    m = int(matched.sum())
    c = int((matched & (y if head == POSITIVE else ~y)).sum())
    return (c + 1) / (m + 2)


def _match(truth: np.ndarray, combos: np.ndarray, conn: str, chunk: int = 4096) -> np.ndarray:
    out = np.empty((len(combos), truth.shape[1]), dtype=bool)
    for a in range(0, len(combos), chunk):
        sub = truth[combos[a : a + chunk]]  # (c, k, n)
        out[a : a + chunk] = sub.all(axis=1) if conn == AND else sub.any(axis=1)
    return out


def _top_candidates(
    train: Sequence[Sample],
    val: Sequence[Sample],
    conditions: Sequence[Condition],
    k: int,
    beta: int,
    budget: int,
) -> list[Rule]:
    """The ``beta`` best generated rules by validation confidence, plus exact ties at the cut."""
    conds = _prerank(sorted(conditions), train, k, budget)
    combos = _bodies(conds, k)
    if not len(combos):
        return []
    truth = _truth(conds, val)
    _, y = to_matrix(val)
    pool = []
    for conn in (AND, OR) if k > 1 else (AND,):
        match = _match(truth, combos, conn)
        m = match.sum(axis=1)
        p = (match & y).sum(axis=1)
        for head, c in ((POSITIVE, p), (NEGATIVE, m - p)):
            pool.append((conn, head, (c + 1) / (m + 2)))
    allconf = np.concatenate([c for *_, c in pool])
    cut = np.sort(allconf)[::-1][min(beta, len(allconf)) - 1]
    rules = []
    for conn, head, conf in pool:
        for i in np.flatnonzero(conf >= cut - 1e-12):
            rules.append(Rule(head, conn, tuple(conds[j] for j in combos[i]), float(conf[i])))
    rules.sort(key=Rule.priority)
    return rules[:beta]


def rank_rules(rules: Iterable[Rule], val: Sequence[Sample]) -> list[Rule]:
    """Rules re-scored by validation confidence, in priority order."""
    _, y = to_matrix(val)
    out = []
    for r in set(rules):
        matched = np.array([evaluate_rule(r, s.features)[0] for s in val], dtype=bool)
        out.append(r.with_confidence(laplace_confidence(matched, y, r.head)))
    return sorted(out, key=Rule.priority)


def find_best_min_component(
    val: Sequence[Sample],
    rules: Sequence[Rule],
    alpha: float = ALPHA,
    beta: int = BETA,
) -> tuple[RuleSet, list[tuple[int, Score]]]:
    """Best top-t prefix of the confidence-ranked rules, t = 1..beta.

    Returns the chosen ruleset and the score of every prefix; ties go to the smaller t.
    """
    if not rules:
        raise ValueError("no candidate rules")
    ranked = rank_rules(rules, val)
    sweep = []
    best = None
    for t in range(1, min(beta, len(ranked)) + 1):
        rs = RuleSet(tuple(ranked[:t]), t)
        sc = score(rs, val, alpha, beta)
        sweep.append((t, sc))
        if best is None or sc.balance > best[1].balance + 1e-12:
            best = (rs, sc)
    return best[0], sweep


# ---------------------------------------------------------------------------
# Full synthesis loop.


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    min_components: int
    accuracy: float
    interpretability: float
    balance: float
    test_accuracy: float


@dataclass(frozen=True)
class SynthesisReport:
    records: tuple[IterationRecord, ...]
    ruleset: RuleSet

    CSV_FIELDS = ("iteration", "min_components", "accuracy", "interpretability", "balance")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_FIELDS)
        for r in self.records:
            w.writerow([r.iteration, r.min_components, repr(r.accuracy), repr(r.interpretability), repr(r.balance)])
        return buf.getvalue()


@dataclass(frozen=True)
class SynthesisResult:
    """Synthesized rules; the sub-problem mapping is ``object_usage``."""

    ruleset: RuleSet
    report: SynthesisReport
    per_iteration: tuple[RuleSet, ...]

    @property
    def test_accuracy(self) -> float:
        return float(np.mean([r.test_accuracy for r in self.report.records]))


def split_data(data: Sequence[Sample], seed, max_retries: int = 20):
    """Shuffle and split 50/25/25; reshuffle until train and validation hold both classes."""
    n = len(data)
    for attempt in range(max_retries):
        idx = list(range(n))
        random.Random(f"split/{seed}/{attempt}").shuffle(idx)
        a, b = n // 2, n // 2 + n // 4
        parts = [[data[i] for i in idx[:a]], [data[i] for i in idx[a:b]], [data[i] for i in idx[b:]]]
        if all(len({s.label for s in p}) == 2 for p in parts[:2]):
            return parts
    raise ValueError("could not obtain a split with both classes in train and validation")


def fit_length(
    train: Sequence[Sample],
    val: Sequence[Sample],
    k: int,
    alpha: float = ALPHA,
    beta: int = BETA,
    tau: float = TAU,
    budget: int = BUDGET,
    imported: Sequence[Rule] = (),
) -> tuple[RuleSet, Score] | None:
    """One cycle: mine, generate size-k rules, pick the best prefix on validation."""
    conds = mine_candidate_conditions(train, tau, imported, min_features=k)
    cands = _top_candidates(train, val, conds, k, beta, budget)
    if not cands:
        return None
    rs, sweep = find_best_min_component(val, cands, alpha, beta)
    return rs, dict(sweep)[rs.min_components]


def synthesize(
    data: Sequence[Sample],
    beta: int = BETA,
    alpha: float = ALPHA,
    seed: int = 0,
    tau: float = TAU,
    budget: int = BUDGET,
    imported: Sequence[Rule] = (),
) -> SynthesisResult:
    """Run ``beta`` cycles of split, mine, generate and select; accumulate the chosen rules."""
    if len(data) < 8:
        raise ValueError("need at least 8 samples")
    records, chosen = [], []
    best: dict[Rule, Rule] = {}
    for it in range(1, beta + 1):
        train, val, test = split_data(data, f"{seed}/{it}")
        fit = fit_length(train, val, it, alpha, beta, tau, budget, imported)
        if fit is None:
            log.info("iteration %d: no contradiction-free rules of length %d", it, it)
            continue
        rs, sc = fit
        test_acc = score(rs, test, alpha, beta).accuracy if test else float("nan")
        records.append(IterationRecord(it, rs.min_components, sc.accuracy, sc.interpretability, sc.balance, test_acc))
        chosen.append(rs)
        for r in rs.rules:
            if r not in best or r.confidence > best[r].confidence:
                best[r] = r
    sc_rules = RuleSet(tuple(best.values()), len(best))
    return SynthesisResult(sc_rules, SynthesisReport(tuple(records), sc_rules), tuple(chosen))
