"""Canonical frame enumeration and bounded countermodel / separation search."""
from __future__ import annotations

import itertools
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator

from .conditions import Condition, check, parse_condition
from .formula import Formula, Neg, atoms, metavariables
from .semantics import (
    GeneralModel, LimitExceeded, OrdinaryModel, bits, decode_valuation, falsify, forces,
    qt_violation_table, submasks, validate,
)


def world_names(n: int) -> tuple[str, ...]:
    return tuple(f"w{i}" for i in range(n))


# ------------------------------------------------------------ accessibility

def _closure_ok(n: int, succ: list[int]) -> bool:
    return all(succ[b] & ~succ[a] == 0 for a in range(n) for b in bits(succ[a]))


def _permute_mask(mask: int, perm: tuple[int, ...]) -> int:
    out = 0
    for i in bits(mask):
        out |= 1 << perm[i]
    return out


def _r_code(n: int, succ: list[int], perm: tuple[int, ...]) -> tuple[int, ...]:
    new = [0] * n
    for a in range(n):
        new[perm[a]] = _permute_mask(succ[a], perm)
    return tuple(new)


@lru_cache(maxsize=None)
def accessibility_relations(n: int) -> tuple[tuple[int, ...], ...]:
    """One representative per isomorphism class of strict partial orders on
    ``n`` points, as successor masks.  Every class has a member with
    ``i R j`` only for ``i < j``, so only those are generated."""
    slots = [(a, b) for a in range(n) for b in range(a + 1, n)]
    perms = list(itertools.permutations(range(n)))
    seen = set()
    out = []
    for k in range(len(slots) + 1):
        for chosen in itertools.combinations(slots, k):
            succ = [0] * n
            for a, b in chosen:
                succ[a] |= 1 << b
            if not _closure_ok(n, succ):
                continue
            key = min(_r_code(n, succ, p) for p in perms)
            if key in seen:
                continue
            seen.add(key)
            out.append(tuple(succ))
    return tuple(out)


def automorphisms(n: int, succ: tuple[int, ...]) -> list[tuple[int, ...]]:
    code = tuple(succ)
    return [p for p in itertools.permutations(range(n)) if _r_code(n, list(succ), p) == code]


# ------------------------------------------------------------------- S_w

def _required(succ: tuple[int, ...], w: int) -> dict[int, set[int]]:
    req = {}
    for u in bits(succ[w]):
        req[u] = {1 << u} | {1 << v for v in bits(succ[u])}
    return req


def _upsets(rw: int, required: set[int]) -> list[tuple[int, ...]]:
    """Families of nonempty subsets of ``rw`` closed upward inside ``rw`` and
    containing ``required``."""
    universe = [m for m in submasks(rw) if m]
    must = set()
    for r in required:
        must |= {m for m in universe if m & r == r}
    free = [m for m in universe if m not in must]
    out = []
    for k in range(len(free) + 1):
        for chosen in itertools.combinations(free, k):
            fam = must | set(chosen)
            if all(m2 in fam for m in fam for m2 in universe if m2 & m == m):
                out.append(tuple(sorted(fam, key=lambda m: (bin(m).count("1"), m))))
    return out


def _sw_options(succ: tuple[int, ...], w: int, qt: int) -> list[dict[int, tuple[int, ...]]]:
    rw = succ[w]
    if not rw:
        return [{}]
    req = _required(succ, w)
    us = list(bits(rw))
    if qt == 2:
        per_u = [_upsets(rw, req[u]) for u in us]
        tables = (dict(zip(us, fams)) for fams in itertools.product(*per_u))
    else:
        optional = [(u, V) for u in us for V in submasks(rw) if V and V not in req[u]]

        def gen():
            for k in range(len(optional) + 1):
                for chosen in itertools.combinations(optional, k):
                    table = {u: set(req[u]) for u in us}
                    for u, V in chosen:
                        table[u].add(V)
                    yield {u: tuple(sorted(vs, key=lambda m: (bin(m).count("1"), m)))
                           for u, vs in table.items()}
        tables = gen()
    return [t for t in tables if qt_violation_table(t, qt) is None]


def _s_code(n: int, tables: list[dict[int, tuple[int, ...]]], perm: tuple[int, ...]) -> tuple:
    out = []
    for w in range(n):
        for u, vs in tables[w].items():
            for V in vs:
                out.append((perm[w], perm[u], _permute_mask(V, perm)))
    return tuple(sorted(out))


def _frame(n: int, succ: tuple[int, ...], tables, qt: int) -> GeneralModel:
    names = world_names(n)
    R = [(names[a], names[b]) for a in range(n) for b in bits(succ[a])]
    S = {names[w]: {(names[u], frozenset(names[i] for i in bits(V)))
                    for u, vs in tables[w].items() for V in vs}
         for w in range(n)}
    return GeneralModel(names, R, S, {}, qt)


def enumerate_frames(max_worlds: int = 3, qt: int = 2, min_worlds: int = 1,
                     exact: int | None = None) -> Iterator[GeneralModel]:
    """Every generalised frame with ``min_worlds..max_worlds`` worlds,
    one per isomorphism class, in a fixed order."""
    sizes = [exact] if exact is not None else range(min_worlds, max_worlds + 1)
    for n in sizes:
        for succ in accessibility_relations(n):
            auts = automorphisms(n, succ)
            options = [_sw_options(succ, w, qt) for w in range(n)]
            for tables in itertools.product(*options):
                tables = list(tables)
                code = _s_code(n, tables, tuple(range(n)))
                if any(_s_code(n, tables, p) < code for p in auts[1:]):
                    continue
                yield _frame(n, succ, tables, qt)


def _preorders(succ: tuple[int, ...], w: int) -> list[set[tuple[int, int]]]:
    rw = list(bits(succ[w]))
    base = {(u, u) for u in rw} | {(u, v) for u in rw for v in bits(succ[u])}
    optional = [(u, v) for u in rw for v in rw if u != v and (u, v) not in base]
    out = []
    for k in range(len(optional) + 1):
        for chosen in itertools.combinations(optional, k):
            rel = base | set(chosen)
            if all((a, d) in rel for a, b in rel for c, d in rel if b == c):
                out.append(rel)
    return out


def enumerate_ordinary_frames(max_worlds: int = 3, min_worlds: int = 1,
                              exact: int | None = None) -> Iterator[OrdinaryModel]:
    sizes = [exact] if exact is not None else range(min_worlds, max_worlds + 1)
    for n in sizes:
        names = world_names(n)
        for succ in accessibility_relations(n):
            auts = automorphisms(n, succ)
            options = [_preorders(succ, w) for w in range(n)]
            for rels in itertools.product(*options):
                code = tuple(sorted((w, a, b) for w in range(n) for a, b in rels[w]))
                if any(tuple(sorted((p[w], p[a], p[b]) for w in range(n) for a, b in rels[w])) < code
                       for p in auts[1:]):
                    continue
                R = [(names[a], names[b]) for a in range(n) for b in bits(succ[a])]
                S = {names[w]: {(names[a], names[b]) for a, b in rels[w]} for w in range(n)}
                yield OrdinaryModel(names, R, S, {})


# ------------------------------------------------------------------ search

@dataclass
class SearchBounds:
    max_worlds: int = 4
    qt: int = 2
    max_frames: int | None = None
    max_valuations: int = 1 << 22
    time_budget: float | None = None
    min_worlds: int = 1

    def __post_init__(self):
        for name in ("max_worlds", "qt", "max_valuations", "min_worlds"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.max_frames is not None and self.max_frames < 1:
            raise ValueError("max_frames must be positive")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ValueError("time_budget must be positive")


@dataclass
class SearchOutcome:
    kind: str                      # "witness", "exhausted" or "budget"
    model: GeneralModel | None = None
    world: str | None = None
    frames_examined: int = 0
    bounds: SearchBounds | None = None
    details: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.kind == "witness"


def worker_count() -> int:
    raw = os.environ.get("ILKIT_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _separation_test(args):
    frame, holds, fails = args
    return bool(check(frame, holds)) and not check(frame, fails)


def _countermodel_test(args):
    frame, logic, f, max_valuations = args
    if not all(check(frame, c) for c in logic):
        return None
    names = sorted(atoms(f))
    number, world, _ = falsify(frame, f, names, max_valuations)
    if number is None:
        return None
    return decode_valuation(frame.index, names, number), frame.index.worlds[world]


def _scan(frames: Iterable, make_args, test, bounds: SearchBounds):
    """Run ``test`` over frames in order; return the earliest hit.

    With more than one worker, frames are handed out in batches and the
    earliest hit of a batch wins, so the answer matches the serial run.
    """
    start = time.monotonic()
    workers = worker_count()
    examined = 0
    it = iter(frames)
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        while True:
            room = None if bounds.max_frames is None else bounds.max_frames - examined
            if room is not None and room <= 0:
                return "budget", None, None, examined
            size = workers * 8 if pool else 1
            batch = list(itertools.islice(it, size if room is None else min(size, room)))
            if not batch:
                return "exhausted", None, None, examined
            if pool:
                results = list(pool.map(test, [make_args(f) for f in batch]))
            else:
                results = [test(make_args(f)) for f in batch]
            for frame, res in zip(batch, results):
                examined += 1
                if res:
                    return "witness", frame, res, examined
            if bounds.time_budget is not None and time.monotonic() - start > bounds.time_budget:
                return "budget", None, None, examined
    finally:
        if pool:
            pool.shutdown()


def _as_conditions(cs) -> list[Condition]:
    out = []
    for c in cs:
        c = parse_condition(c) if isinstance(c, str) else c
        if c.ordinary:
            raise ValueError(f"{c} is an ordinary condition; search runs over generalised frames")
        out.append(c)
    return out


def find_countermodel(f: Formula, logic: Iterable = (), bounds: SearchBounds | None = None) -> SearchOutcome:
    """First enumerated frame meeting ``logic`` with a valuation refuting ``f``."""
    bounds = bounds or SearchBounds()
    if metavariables(f):
        raise ValueError("countermodel search needs a ground formula")
    logic = _as_conditions(logic)
    frames = enumerate_frames(bounds.max_worlds, bounds.qt, bounds.min_worlds)
    kind, frame, res, examined = _scan(
        frames, lambda fr: (fr, logic, f, bounds.max_valuations), _countermodel_test, bounds)
    if kind != "witness":
        return SearchOutcome(kind, frames_examined=examined, bounds=bounds)
    valuation, world = res
    model = frame.with_valuation(valuation)
    assert forces(model, world, Neg(f)), "countermodel does not re-check"
    return SearchOutcome("witness", model, world, examined, bounds,
                         {"logic": [c.token for c in logic]})


def find_separating_frame(holds, fails, bounds: SearchBounds | None = None) -> SearchOutcome:
    """First enumerated frame where ``holds`` is true and ``fails`` is false."""
    bounds = bounds or SearchBounds()
    holds, fails = _as_conditions([holds, fails])
    frames = enumerate_frames(bounds.max_worlds, bounds.qt, bounds.min_worlds)
    kind, frame, _, examined = _scan(
        frames, lambda fr: (fr, holds, fails), _separation_test, bounds)
    if kind != "witness":
        return SearchOutcome(kind, frames_examined=examined, bounds=bounds)
    assert validate(frame).ok and check(frame, holds) and not check(frame, fails)
    return SearchOutcome("witness", frame, None, examined, bounds,
                         {"holds": holds.token, "fails": fails.token,
                          "fails_witness": check(frame, fails).witness})


__all__ = [
    "world_names", "accessibility_relations", "automorphisms", "enumerate_frames",
    "enumerate_ordinary_frames", "SearchBounds", "SearchOutcome", "find_countermodel",
    "find_separating_frame", "worker_count", "LimitExceeded",
]
