"""Conversions between ordinary and generalised models that keep forcing."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

from .semantics import (
    GeneralModel, LimitExceeded, ModelError, OrdinaryModel, submasks, validate,
    validate_general,
)

DEFAULT_MAX_POOL = 20
DEFAULT_MAX_WORLDS = 4096


def _require_valid(M) -> None:
    report = validate(M)
    if not report.ok:
        raise ModelError(f"input model is not legal: {report.violations[0]}")


def lift_singleton(M: OrdinaryModel, qt: int = 6) -> GeneralModel:
    """Read each ordinary pair ``u S_w v`` as ``u S_w {v}``.

    The result satisfies conditions a-d and every quasi-transitivity variant,
    but it is not monotone, so under variant 2 it only validates with the
    monotonicity check switched off.
    """
    _require_valid(M)
    S = {w: {(u, frozenset([v])) for u, v in pairs} for w, pairs in M.S.items()}
    return GeneralModel(M.worlds, M.R, S, M.valuation, qt)


def lift_monotone(M: OrdinaryModel) -> GeneralModel:
    """``u S'_w V`` iff ``V`` is a nonempty subset of ``R[w]`` holding some
    ``v`` with ``u S_w v``."""
    _require_valid(M)
    idx = M.index
    S = {}
    for w in M.worlds:
        i = idx.pos[w]
        rw = idx.succ[i]
        reach: dict[int, int] = {}
        for u, v in M.S[w]:
            reach[idx.pos[u]] = reach.get(idx.pos[u], 0) | 1 << idx.pos[v]
        S[w] = {(idx.worlds[u], frozenset(idx.names(V)))
                for u, targets in reach.items()
                for V in submasks(rw) if V & targets}
    return GeneralModel(M.worlds, M.R, S, M.valuation, 2)


def monotone_closure(M: GeneralModel) -> GeneralModel:
    """Close every ``S_w`` under supersets inside ``R[w]``; the result is a
    variant-2 model with the same forcing relation.  The input need only be
    legal under some quasi-transitivity variant."""
    reports = [validate_general(M, qt=k) for k in range(1, 9)]
    if not any(r.ok for r in reports):
        raise ModelError(f"input model is not legal: {reports[M.qt - 1].violations[0]}")
    idx = M.index
    S = {}
    for w in M.worlds:
        i = idx.pos[w]
        rw = idx.succ[i]
        out = set()
        for u, vs in idx.S[i].items():
            for V in vs:
                for extra in submasks(rw & ~V):
                    out.add((idx.worlds[u], frozenset(idx.names(V | extra))))
        S[w] = out
    return GeneralModel(M.worlds, M.R, S, M.valuation, 2)


# ------------------------------------------------------------ unravelling

def sr_pool(M: GeneralModel, x: str) -> tuple[list[tuple[str, str]], list[tuple[str, frozenset]]]:
    """Candidate pairs and obligations for the S-representatives of ``x``.

    Obligations are the ``(u, V)`` with ``x S_u V``; a pair ``(u, v)`` is a
    candidate when ``v`` lies in one of them.
    """
    obligations = sorted((u, V) for u in M.worlds for x2, V in M.S[u] if x2 == x)
    pool = sorted({(u, v) for u, V in obligations for v in V})
    return pool, [(u, frozenset(V)) for u, V in obligations]


def sr_sets(M: GeneralModel, x: str, max_pool: int = DEFAULT_MAX_POOL) -> list[frozenset]:
    """All relations meeting every obligation of ``x`` and using only
    candidate pairs, smallest first."""
    pool, obligations = sr_pool(M, x)
    if len(pool) > max_pool:
        raise LimitExceeded(f"S-representative pool of {x} has {len(pool)} pairs", 1 << len(pool))
    out = []
    for k in range(len(pool) + 1):
        for combo in itertools.combinations(pool, k):
            A = frozenset(combo)
            if all(any((u, v) in A for v in V) for u, V in obligations):
                out.append(A)
    return out


def tag_id(x: str, A: frozenset) -> str:
    return x + "{" + ",".join(f"{u}>{v}" for u, v in sorted(A)) + "}"


@dataclass
class Unravelling:
    model: OrdinaryModel
    mapping: dict[str, list[str]]
    tags: dict[str, tuple[str, frozenset]]

    def map_payload(self) -> dict:
        return {x: [{"id": t, "world": self.tags[t][0],
                     "tag": [list(p) for p in sorted(self.tags[t][1])]} for t in ts]
                for x, ts in self.mapping.items()}


def unravel(M: GeneralModel, max_pool: int = DEFAULT_MAX_POOL,
            max_worlds: int = DEFAULT_MAX_WORLDS) -> Unravelling:
    """Ordinary model whose worlds are source worlds tagged with one of
    their S-representatives.  Defined for variants 3 to 6."""
    if M.qt not in (3, 4, 5, 6):
        raise ModelError(f"unravelling needs quasi-transitivity 3-6, got {M.qt}")
    _require_valid(M)
    tags: dict[str, tuple[str, frozenset]] = {}
    mapping: dict[str, list[str]] = {}
    for x in M.worlds:
        reps = sr_sets(M, x, max_pool) or [frozenset()]
        mapping[x] = []
        for A in reps:
            t = tag_id(x, A)
            tags[t] = (x, A)
            mapping[x].append(t)
        if len(tags) > max_worlds:
            raise LimitExceeded(f"unravelling exceeds {max_worlds} worlds", len(tags))
    R = set(M.R)
    pred = {x: {w for w, y in R if y == x} for x in M.worlds}
    ids = sorted(tags)

    def rel(a: str, b: str) -> bool:
        (x, A), (y, B) = tags[a], tags[b]
        if (x, y) not in R:
            return False
        return all((w, z) in A for w, z in B if w in pred[x])

    R2 = {(a, b) for a in ids for b in ids if rel(a, b)}
    succ = {a: [b for b in ids if (a, b) in R2] for a in ids}
    S2 = {}
    for c in ids:
        w = tags[c][0]
        pairs = set()
        for a in succ[c]:
            for b in succ[c]:
                A, B = tags[a][1], tags[b][1]
                if all((w2, v) in A for w2, v in B if w2 == w):
                    pairs.add((a, b))
        S2[c] = pairs
    val = {p: {t for t in ids if tags[t][0] in ws} for p, ws in M.valuation.items()}
    return Unravelling(OrdinaryModel(tuple(ids), R2, S2, val), mapping, tags)


def ordinary_as_general(M: OrdinaryModel, qt: int = 6) -> GeneralModel:
    """Same structure read in generalised terms, without validation."""
    S = {w: {(u, frozenset([v])) for u, v in pairs} for w, pairs in M.S.items()}
    return GeneralModel(M.worlds, M.R, S, M.valuation, qt)


__all__ = [
    "lift_singleton", "lift_monotone", "monotone_closure", "sr_pool", "sr_sets",
    "unravel", "Unravelling", "tag_id", "ordinary_as_general",
]
