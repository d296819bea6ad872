"""Bisimulations, bounded modal equivalence and filtration."""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from .formula import (
    BOT, TOP, AdequateSet, And, Atom, Formula, Neg, Or, Rhd,
)
from .semantics import (
    GeneralModel, Index, ModelError, _rhd_mask, bits, eval_mask,
)


def _vocabulary(M, M2=None) -> list[str]:
    vocab = set(M.valuation)
    if M2 is not None:
        vocab |= set(M2.valuation)
    return sorted(vocab)


def _atom_profile(idx: Index, vocab: list[str], w: int) -> tuple[bool, ...]:
    return tuple(bool(idx.val.get(p, 0) >> w & 1) for p in vocab)


# ----------------------------------------------------------- bisimulation

def _covers(source: int, target: int, rel: list[int]) -> bool:
    """Every member of ``source`` is related to some member of ``target``."""
    return all(rel[v] & target for v in bits(source))


def _zig(a: Index, b: Index, x: int, y: int, fwd: list[int], bwd: list[int]) -> bool:
    """(forth) and (back) for the pair ``(x, y)`` against relation ``fwd``
    (``bwd`` is its converse)."""
    for u in bits(a.succ[x]):
        if not any(
            all(any(_covers(V, V2, fwd) for V in a.S[x].get(u, ())) for V2 in b.S[y].get(u2, ()))
            for u2 in bits(b.succ[y] & fwd[u])
        ):
            return False
    for u2 in bits(b.succ[y]):
        if not any(
            all(any(_covers(V2, V, bwd) for V2 in b.S[y].get(u2, ())) for V in a.S[x].get(u, ()))
            for u in bits(a.succ[x] & bwd[u2])
        ):
            return False
    return True


def _at_relation(a: Index, b: Index, vocab: list[str]) -> list[int]:
    fwd = [0] * a.n
    for x in range(a.n):
        px = _atom_profile(a, vocab, x)
        for y in range(b.n):
            if _atom_profile(b, vocab, y) == px:
                fwd[x] |= 1 << y
    return fwd


def _converse(fwd: list[int], m: int) -> list[int]:
    bwd = [0] * m
    for x, row in enumerate(fwd):
        for y in bits(row):
            bwd[y] |= 1 << x
    return bwd


def _refine(a: Index, b: Index, fwd: list[int]) -> list[int]:
    bwd = _converse(fwd, b.n)
    out = [0] * a.n
    for x in range(a.n):
        for y in bits(fwd[x]):
            if _zig(a, b, x, y, fwd, bwd):
                out[x] |= 1 << y
    return out


def _pairs(a: Index, b: Index, fwd: list[int]) -> frozenset[tuple[str, str]]:
    return frozenset((a.worlds[x], b.worlds[y]) for x in range(a.n) for y in bits(fwd[x]))


def _rows(a: Index, b: Index, pairs) -> list[int]:
    fwd = [0] * a.n
    for x, y in pairs:
        fwd[a.pos[x]] |= 1 << b.pos[y]
    return fwd


def largest_bisimulation(M, M2) -> frozenset[tuple[str, str]]:
    """Greatest fixpoint of the back-and-forth refinement, starting from
    agreement on every atom either model mentions.  May be empty."""
    a, b = M.index, M2.index
    fwd = _at_relation(a, b, _vocabulary(M, M2))
    while True:
        nxt = _refine(a, b, fwd)
        if nxt == fwd:
            return _pairs(a, b, fwd)
        fwd = nxt


def n_bisimulation(M, M2, n: int) -> list[frozenset[tuple[str, str]]]:
    """The maximal ``n``-bisimulation as the chain ``[Z_0, ..., Z_n]``."""
    a, b = M.index, M2.index
    fwd = _at_relation(a, b, _vocabulary(M, M2))
    chain = [_pairs(a, b, fwd)]
    for _ in range(n):
        fwd = _refine(a, b, fwd)
        chain.append(_pairs(a, b, fwd))
    return chain


def bisimulation_violations(M, M2, Z) -> list[tuple[str, tuple[str, str]]]:
    """Clause-by-clause audit of a candidate relation."""
    a, b = M.index, M2.index
    vocab = _vocabulary(M, M2)
    fwd = _rows(a, b, Z)
    bwd = _converse(fwd, b.n)
    out = []
    for x, y in sorted(Z):
        i, j = a.pos[x], b.pos[y]
        if _atom_profile(a, vocab, i) != _atom_profile(b, vocab, j):
            out.append(("at", (x, y)))
        elif not _zig(a, b, i, j, fwd, bwd):
            out.append(("zig", (x, y)))
    return out


def is_bisimulation(M, M2, Z) -> bool:
    return bool(Z) and not bisimulation_violations(M, M2, Z)


def is_n_bisimulation(M, M2, chain) -> bool:
    a, b = M.index, M2.index
    vocab = _vocabulary(M, M2)
    for x, y in chain[0]:
        if _atom_profile(a, vocab, a.pos[x]) != _atom_profile(b, vocab, b.pos[y]):
            return False
    for i in range(1, len(chain)):
        if not chain[i] <= chain[i - 1]:
            return False
        fwd = _rows(a, b, chain[i - 1])
        bwd = _converse(fwd, b.n)
        for x, y in chain[i]:
            if not _zig(a, b, a.pos[x], b.pos[y], fwd, bwd):
                return False
    return True


# ------------------------------------------------------- modal equivalence

def _general_view(M) -> GeneralModel:
    if isinstance(M, GeneralModel):
        return M
    S = {w: {(u, frozenset([v])) for u, v in pairs} for w, pairs in M.S.items()}
    return GeneralModel(M.worlds, M.R, S, M.valuation, 6)


def disjoint_union(M, M2) -> GeneralModel:
    """Worlds of ``M`` become ``L:w`` and those of ``M2`` become ``R:w``."""
    parts = []
    for tag, N in (("L:", _general_view(M)), ("R:", _general_view(M2))):
        parts.append((
            [tag + w for w in N.worlds],
            {(tag + x, tag + y) for x, y in N.R},
            {tag + w: {(tag + u, frozenset(tag + v for v in V)) for u, V in N.S[w]} for w in N.worlds},
            {p: {tag + w for w in ws} for p, ws in N.valuation.items()},
        ))
    (w1, r1, s1, v1), (w2, r2, s2, v2) = parts
    val = {p: v1.get(p, set()) | v2.get(p, set()) for p in set(v1) | set(v2)}
    return GeneralModel(w1 + w2, r1 | r2, {**s1, **s2}, val, 6)


@dataclass
class Refinement:
    """Depth-indexed partitions of a model's worlds by modal truth."""
    model: GeneralModel
    vocabulary: list[str]
    blocks: list[list[int]]                 # per depth: world -> block id
    features: list[list[tuple[Formula, int]]]  # per depth: splitting formulas and truth sets
    exhaustive: bool = True

    def block_of(self, depth: int, world: str) -> int:
        return self.blocks[depth][self.model.index.pos[world]]

    def characteristic(self, depth: int, block: int) -> Formula:
        idx = self.model.index
        w = self.blocks[depth].index(block)
        parts: list[Formula] = []
        for p in self.vocabulary:
            lit: Formula = Atom(p)
            parts.append(lit if idx.val.get(p, 0) >> w & 1 else Neg(lit))
        for f, mask in self.features[depth]:
            parts.append(f if mask >> w & 1 else Neg(f))
        return _conj(parts)


def _conj(parts: list[Formula]) -> Formula:
    if not parts:
        return TOP
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def _disj(parts: list[Formula]) -> Formula:
    if not parts:
        return BOT
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def _partition(n: int, masks: list[int], base: list[int] | None = None) -> list[int]:
    keys = {}
    out = []
    for w in range(n):
        key = (tuple(m >> w & 1 for m in masks), base[w] if base else 0)
        out.append(keys.setdefault(key, len(keys)))
    return out


DEFAULT_FEATURE_CAP = 1 << 15
DEFAULT_SAMPLES = 4096


def refine(M, depth: int, vocabulary: list[str] | None = None,
           feature_cap: int = DEFAULT_FEATURE_CAP, samples: int = DEFAULT_SAMPLES,
           seed: int = 0) -> Refinement:
    """Partition worlds by agreement on all formulas of modal depth at most
    ``depth`` over ``vocabulary``.

    Depth-``k+1`` formulas are Boolean combinations of atoms and
    ``X |> Y`` with ``X``, ``Y`` of depth ``k``; on a finite model those
    are unions of depth-``k`` blocks, and ``|>`` splits over unions in its
    left argument, so testing ``block |> union`` for every block and
    union decides the next partition exactly.  Box and diamond are
    ``~X |> bot`` and ``~(X |> bot)``.  When the number of tests exceeds
    ``feature_cap`` a seeded random sample of unions is used instead and
    the result is flagged as not exhaustive.
    """
    M = _general_view(M)
    idx = M.index
    vocab = sorted(set(M.valuation) if vocabulary is None else vocabulary)
    atom_masks = [idx.val.get(p, 0) for p in vocab]
    blocks = [_partition(idx.n, atom_masks)]
    features: list[list[tuple[Formula, int]]] = [[]]
    exhaustive = True
    rng = random.Random(seed)
    ref = Refinement(M, vocab, blocks, features)
    for k in range(depth):
        current = blocks[-1]
        nb = max(current) + 1 if current else 0
        bmask = [0] * nb
        for w, b in enumerate(current):
            bmask[b] |= 1 << w
        chars = [ref.characteristic(k, b) for b in range(nb)]
        if nb * (1 << nb) <= feature_cap:
            unions = range(1 << nb)
        else:
            exhaustive = False
            unions = sorted({rng.getrandbits(nb) for _ in range(samples)} | {0, (1 << nb) - 1})
        kept: list[tuple[Formula, int]] = []
        part = _partition(idx.n, atom_masks)
        for b in range(nb):
            for Y in unions:
                ymask = 0
                for c in bits(Y):
                    ymask |= bmask[c]
                truth = _rhd_mask(idx, bmask[b], ymask)
                trial = _partition(idx.n, [truth], part)
                if len(set(trial)) > len(set(part)):
                    f = Rhd(chars[b], _disj([chars[c] for c in bits(Y)]))
                    kept.append((f, truth))
                    part = trial
        blocks.append(part)
        features.append(kept)
    ref.exhaustive = exhaustive
    return ref


@dataclass
class EquivalenceResult:
    equivalent: bool
    depth: int
    exhaustive: bool
    distinguishing: Formula | None = None
    vocabulary: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.equivalent


def modally_equivalent_up_to(M, w: str, M2, w2: str, n: int,
                             vocabulary: list[str] | None = None, **kw) -> EquivalenceResult:
    """Do ``w`` and ``w2`` agree on every formula of modal depth <= ``n``?

    On disagreement a formula true at ``w`` and false at ``w2`` is
    returned.
    """
    M.check_world(w)
    M2.check_world(w2)
    U = disjoint_union(M, M2)
    vocab = _vocabulary(M, M2) if vocabulary is None else sorted(vocabulary)
    ref = refine(U, n, vocab, **kw)
    a, b = "L:" + w, "R:" + w2
    for k in range(n + 1):
        if ref.block_of(k, a) != ref.block_of(k, b):
            return EquivalenceResult(False, n, ref.exhaustive,
                                     ref.characteristic(k, ref.block_of(k, a)), vocab)
    return EquivalenceResult(True, n, ref.exhaustive, None, vocab)


# --------------------------------------------------------------- filtration

@dataclass
class Filtration:
    model: GeneralModel
    classes: dict[str, str]   # world -> class name
    members: dict[str, list[str]]
    boxes: list[Formula]

    def chain_length(self) -> int:
        """Edges on the longest R-chain of the quotient."""
        idx = self.model.index
        memo: dict[int, int] = {}

        def longest(x):
            if x not in memo:
                memo[x] = max((1 + longest(y) for y in bits(idx.succ[x])), default=0)
            return memo[x]

        return max((longest(x) for x in range(idx.n)), default=0)


def auto_bisimulation_classes(M) -> dict[str, str]:
    Z = largest_bisimulation(M, M)
    worlds = M.worlds
    for w in worlds:
        if (w, w) not in Z:
            raise AssertionError(f"auto-bisimulation is not reflexive at {w}")
    for x, y in Z:
        if (y, x) not in Z:
            raise AssertionError(f"auto-bisimulation is not symmetric at {(x, y)}")
    for x, y in Z:
        for y2, z in Z:
            if y == y2 and (x, z) not in Z:
                raise AssertionError(f"auto-bisimulation is not transitive at {(x, y, z)}")
    return {w: min(y for x, y in Z if x == w) for w in worlds}


def filtrate(M: GeneralModel, gamma: AdequateSet) -> Filtration:
    """Quotient of ``M`` by its largest auto-bisimulation, with the accessibility
    and ``S`` relations read off the boxed members of ``gamma``."""
    if not isinstance(M, GeneralModel):
        raise ModelError("filtration works on generalised models")
    cls = auto_bisimulation_classes(M)
    idx = M.index
    names = sorted(set(cls.values()))
    members = {c: sorted(w for w in M.worlds if cls[w] == c) for c in names}
    boxes = gamma.boxes()
    truth = [eval_mask(idx, f) for f in boxes]
    R = set()
    for x, y in M.R:
        i, j = idx.pos[x], idx.pos[y]
        if any(not t >> i & 1 and t >> j & 1 for t in truth):
            R.add((cls[x], cls[y]))
    succ = {c: sorted(d for c2, d in R if c2 == c) for c in names}
    S: dict[str, set] = {c: set() for c in names}
    for c in names:
        targets = succ[c]
        for d in targets:
            links = [(x, y) for x in members[c] for y in members[d] if (x, y) in M.R]
            for k in range(1, len(targets) + 1):
                for combo in itertools.combinations(targets, k):
                    tv = set(combo)
                    if all(any({cls[v] for v in V} <= tv for u, V in M.S[x] if u == y)
                           for x, y in links):
                        S[c].add((d, frozenset(tv)))
    val = {}
    for p in sorted(f.name for f in gamma.formulas if isinstance(f, Atom)):
        val[p] = {c for c in names if members[c][0] in M.valuation.get(p, frozenset())}
    return Filtration(GeneralModel(names, R, S, val, 2), cls, members, boxes)


__all__ = [
    "largest_bisimulation", "n_bisimulation", "bisimulation_violations", "is_bisimulation",
    "is_n_bisimulation", "disjoint_union", "refine", "Refinement", "modally_equivalent_up_to",
    "EquivalenceResult", "Filtration", "filtrate", "auto_bisimulation_classes",
]
