"""Finite Veltman and generalised Veltman structures.

Both model kinds compile to a shared bitmask index: worlds are numbered in
sorted order, ``succ[w]`` is the mask of ``R[w]`` and ``S[w][u]`` lists the
masks of the sets ``V`` with ``u S_w V``.  An ordinary pair ``u S_w v``
is stored as the singleton ``{v}``, which gives the ordinary forcing
clause for ``|>`` unchanged.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping

import numpy as np

from .formula import (
    And, Atom, Bot, Box, Dia, Formula, Impl, Meta, Neg, Or, Rhd, Top,
    atoms, metavariables, render,
)


class ModelError(ValueError):
    pass


class LimitExceeded(RuntimeError):
    def __init__(self, message: str, required: int | None = None):
        super().__init__(message)
        self.required = required


def bits(mask: int) -> Iterator[int]:
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def submasks(mask: int, proper_nonempty: bool = False) -> list[int]:
    """All submasks of ``mask`` by increasing cardinality, then value."""
    items = list(bits(mask))
    out = []
    for k in range(len(items) + 1):
        for combo in itertools.combinations(items, k):
            out.append(sum(1 << i for i in combo))
    if proper_nonempty:
        out = [m for m in out if m and m != mask]
    return out



class Index:
    """Bitmask view of a model; built once per model and cached."""

    def __init__(self, worlds, R, S_pairs, valuation):
        self.worlds = tuple(worlds)
        self.pos = {w: i for i, w in enumerate(self.worlds)}
        self.n = len(self.worlds)
        self.full = (1 << self.n) - 1
        self.succ = [0] * self.n
        for a, b in R:
            self.succ[self.pos[a]] |= 1 << self.pos[b]
        self.S: list[dict[int, tuple[int, ...]]] = []
        for w in self.worlds:
            table: dict[int, set[int]] = {}
            for u, vmask in S_pairs.get(w, ()):
                table.setdefault(self.pos[u], set()).add(vmask)
            self.S.append({u: tuple(sorted(vs, key=lambda m: (popcount(m), m)))
                           for u, vs in sorted(table.items())})
        self.val = {p: self.mask(ws) for p, ws in valuation.items()}

    def mask(self, ws: Iterable[str]) -> int:
        m = 0
        for w in ws:
            m |= 1 << self.pos[w]
        return m

    def names(self, mask: int) -> list[str]:
        return [self.worlds[i] for i in bits(mask)]

    def image(self, mask: int) -> int:
        """``R[X]`` for a set ``X`` of worlds."""
        out = 0
        for i in bits(mask):
            out |= self.succ[i]
        return out

    def has(self, w: int, u: int, vmask: int) -> bool:
        return vmask in self.S[w].get(u, ())

    def has_sub(self, w: int, u: int, mask: int) -> bool:
        return any(v & ~mask == 0 for v in self.S[w].get(u, ()))


def _norm_valuation(valuation) -> dict[str, frozenset[str]]:
    out = {}
    for p, ws in (valuation or {}).items():
        ws = frozenset(ws)
        if ws:
            out[p] = ws
    return dict(sorted(out.items()))


@dataclass(frozen=True, eq=False)
class _ModelBase:
    worlds: tuple[str, ...]
    R: frozenset
    S: dict
    valuation: dict = field(default_factory=dict)

    kind = "?"

    def __post_init__(self):
        worlds = tuple(sorted(set(self.worlds)))
        object.__setattr__(self, "worlds", worlds)
        object.__setattr__(self, "R", frozenset((a, b) for a, b in self.R))
        object.__setattr__(self, "valuation", _norm_valuation(self.valuation))
        ws = set(worlds)
        for a, b in self.R:
            if a not in ws or b not in ws:
                raise ModelError(f"R mentions unknown world in {(a, b)}")
        for p, vs in self.valuation.items():
            if not vs <= ws:
                raise ModelError(f"valuation of {p} mentions unknown worlds {sorted(vs - ws)}")

    def __eq__(self, other):
        return type(self) is type(other) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def R_of(self, w: str) -> frozenset[str]:
        return frozenset(b for a, b in self.R if a == w)

    @property
    def vocabulary(self) -> frozenset[str]:
        return frozenset(self.valuation)

    def check_world(self, w: str) -> int:
        try:
            return self.index.pos[w]
        except KeyError:
            raise ModelError(f"unknown world {w!r}") from None


@dataclass(frozen=True, eq=False)
class OrdinaryModel(_ModelBase):
    """Veltman model.  ``S[w]`` is a set of world pairs ``(u, v)``."""

    kind = "ordinary"

    def __post_init__(self):
        super().__post_init__()
        S = {w: frozenset() for w in self.worlds}
        items = self.S.items() if isinstance(self.S, Mapping) else _group(self.S)
        for w, pairs in items:
            if w not in S:
                raise ModelError(f"S indexed by unknown world {w!r}")
            pairs = frozenset((u, v) for u, v in pairs)
            for u, v in pairs:
                if u not in S or v not in S:
                    raise ModelError(f"S_{w} mentions unknown world in {(u, v)}")
            S[w] = S[w] | pairs
        object.__setattr__(self, "S", S)

    def key(self):
        return (self.worlds, self.R,
                tuple((w, tuple(sorted(self.S[w]))) for w in self.worlds),
                tuple((p, tuple(sorted(v))) for p, v in self.valuation.items()))

    @cached_property
    def index(self) -> Index:
        pos = {w: i for i, w in enumerate(self.worlds)}
        pairs = {w: [(u, 1 << pos[v]) for u, v in self.S[w]] for w in self.worlds}
        return Index(self.worlds, self.R, pairs, self.valuation)

    def with_valuation(self, valuation) -> OrdinaryModel:
        return OrdinaryModel(self.worlds, self.R, self.S, valuation)

    def frame(self) -> OrdinaryModel:
        return self.with_valuation({})


@dataclass(frozen=True, eq=False)
class GeneralModel(_ModelBase):
    """Generalised Veltman model.  ``S[w]`` is a set of pairs ``(u, V)``
    with ``V`` a frozenset of worlds; ``qt`` names the quasi-transitivity
    variant (1-8) the model is meant to satisfy."""

    qt: int = 2
    kind = "gvs"

    def __post_init__(self):
        super().__post_init__()
        if self.qt not in range(1, 9):
            raise ModelError(f"qt variant must be 1..8, got {self.qt}")
        S = {w: frozenset() for w in self.worlds}
        items = self.S.items() if isinstance(self.S, Mapping) else _group(self.S)
        for w, pairs in items:
            if w not in S:
                raise ModelError(f"S indexed by unknown world {w!r}")
            pairs = frozenset((u, frozenset(V)) for u, V in pairs)
            for u, V in pairs:
                if u not in S or not V <= S.keys():
                    raise ModelError(f"S_{w} mentions unknown world in {(u, sorted(V))}")
            S[w] = S[w] | pairs
        object.__setattr__(self, "S", S)

    def key(self):
        return (self.qt, self.worlds, self.R,
                tuple((w, tuple(sorted((u, tuple(sorted(V))) for u, V in self.S[w])))
                      for w in self.worlds),
                tuple((p, tuple(sorted(v))) for p, v in self.valuation.items()))

    @cached_property
    def index(self) -> Index:
        pos = {w: i for i, w in enumerate(self.worlds)}
        pairs = {w: [(u, sum(1 << pos[v] for v in V)) for u, V in self.S[w]]
                 for w in self.worlds}
        return Index(self.worlds, self.R, pairs, self.valuation)

    def with_valuation(self, valuation) -> GeneralModel:
        return GeneralModel(self.worlds, self.R, self.S, valuation, self.qt)

    def with_qt(self, qt: int) -> GeneralModel:
        return GeneralModel(self.worlds, self.R, self.S, self.valuation, qt)

    def frame(self) -> GeneralModel:
        return self.with_valuation({})


def _group(triples) -> list:
    grouped: dict = {}
    for w, u, v in triples:
        if not isinstance(v, str):
            v = frozenset(v)
        grouped.setdefault(w, set()).add((u, v))
    return list(grouped.items())


def required_pairs(worlds, R) -> set[tuple[str, str, frozenset]]:
    """The ``u S_w {u}`` and ``u S_w {v}`` (for ``wRuRv``) pairs every
    generalised frame must contain."""
    R = set(R)
    out = set()
    for w, u in R:
        out.add((w, u, frozenset([u])))
        for u2, v in R:
            if u2 == u and (w, v) in R:
                out.add((w, u, frozenset([v])))
    return out


def transitive_closure(pairs) -> frozenset:
    rel = set(pairs)
    while True:
        extra = {(a, d) for a, b in rel for c, d in rel if b == c} - rel
        if not extra:
            return frozenset(rel)
        rel |= extra


# ---------------------------------------------------------------- forcing

def _rhd_mask(idx: Index, a: int, b: int) -> int:
    out = 0
    for w in range(idx.n):
        sw = idx.S[w]
        for u in bits(idx.succ[w] & a):
            if not any(v & ~b == 0 for v in sw.get(u, ())):
                break
        else:
            out |= 1 << w
    return out


def _box_mask(idx: Index, a: int) -> int:
    out = 0
    for w in range(idx.n):
        if idx.succ[w] & ~a == 0:
            out |= 1 << w
    return out


def _dia_mask(idx: Index, a: int) -> int:
    out = 0
    for w in range(idx.n):
        if idx.succ[w] & a:
            out |= 1 << w
    return out


def eval_mask(idx: Index, f: Formula, env: Mapping[str, int] | None = None) -> int:
    """Truth set of ``f`` as a bitmask.  ``env`` overrides the valuation
    and may bind metavariables."""
    env = idx.val if env is None else env
    full = idx.full

    def ev(g):
        if isinstance(g, Atom):
            return env.get(g.name, 0)
        if isinstance(g, Meta):
            if g.name not in env:
                raise ModelError(f"metavariable {g.name} in a formula to be evaluated")
            return env[g.name]
        if isinstance(g, Top):
            return full
        if isinstance(g, Bot):
            return 0
        if isinstance(g, Neg):
            return full & ~ev(g.body)
        if isinstance(g, And):
            return ev(g.left) & ev(g.right)
        if isinstance(g, Or):
            return ev(g.left) | ev(g.right)
        if isinstance(g, Impl):
            return (full & ~ev(g.left)) | ev(g.right)
        if isinstance(g, Box):
            return _box_mask(idx, ev(g.body))
        if isinstance(g, Dia):
            return _dia_mask(idx, ev(g.body))
        if isinstance(g, Rhd):
            return _rhd_mask(idx, ev(g.left), ev(g.right))
        raise TypeError(f"not a formula: {g!r}")

    return ev(f)


def truth_set(M, f: Formula) -> frozenset[str]:
    if metavariables(f):
        raise ModelError(f"formula {render(f)!r} contains metavariables")
    idx = M.index
    return frozenset(idx.names(eval_mask(idx, f)))


def forces(M, w: str, f: Formula) -> bool:
    i = M.check_world(w)
    if metavariables(f):
        raise ModelError(f"formula {render(f)!r} contains metavariables")
    return bool(eval_mask(M.index, f) >> i & 1)


# ------------------------------------------------------------- validation

@dataclass(frozen=True)
class Violation:
    condition: str
    witness: tuple

    def __str__(self):
        return f"{self.condition}: {self.witness}"


@dataclass
class ValidationReport:
    ok: bool
    violations: list[Violation]

    def __bool__(self):
        return self.ok

    def conditions(self) -> set[str]:
        return {v.condition for v in self.violations}


def _check_R(idx: Index) -> list[Violation]:
    out = []
    name = idx.worlds
    for a in range(idx.n):
        if idx.succ[a] >> a & 1:
            out.append(Violation("R-irreflexivity", (name[a],)))
    for a in range(idx.n):
        for b in bits(idx.succ[a]):
            missing = idx.succ[b] & ~idx.succ[a]
            for c in bits(missing):
                out.append(Violation("R-transitivity", (name[a], name[b], name[c])))
    cycle = _find_cycle(idx.n, idx.succ)
    if cycle:
        out.append(Violation("R-acyclicity", tuple(name[i] for i in cycle)))
    return out


def _find_cycle(n: int, succ: list[int]) -> list[int] | None:
    """Lexicographically first cycle found by DFS, or None."""
    colour = [0] * n
    for start in range(n):
        if colour[start]:
            continue
        path: list[int] = []
        stack = [(start, iter(bits(succ[start])))]
        colour[start] = 1
        path.append(start)
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[node] = 2
                stack.pop()
                path.pop()
                continue
            if colour[nxt] == 1:
                return path[path.index(nxt):]
            if colour[nxt] == 0:
                colour[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(bits(succ[nxt]))))
    return None


def validate_ordinary(M: OrdinaryModel) -> ValidationReport:
    idx = M.index
    out = _check_R(idx)
    nm = idx.worlds
    for w in range(idx.n):
        rw = idx.succ[w]
        rel = {(u, v) for u, vs in idx.S[w].items() for m in vs for v in bits(m)}
        for u, v in sorted(rel):
            if not (rw >> u & 1 and rw >> v & 1):
                out.append(Violation("S-domain", (nm[w], nm[u], nm[v])))
        for u in bits(rw):
            if (u, u) not in rel:
                out.append(Violation("S-reflexivity", (nm[w], nm[u])))
        for (u, v), (v2, z) in itertools.product(sorted(rel), repeat=2):
            if v == v2 and (u, z) not in rel:
                out.append(Violation("S-transitivity", (nm[w], nm[u], nm[v], nm[z])))
        for u in bits(rw):
            for v in bits(idx.succ[u] & rw):
                if (u, v) not in rel:
                    out.append(Violation("R-in-S", (nm[w], nm[u], nm[v])))
    return ValidationReport(not out, out)


def qt_violation(idx: Index, w: int, variant: int):
    """First witness against quasi-transitivity ``variant`` at ``w``, or None."""
    return qt_violation_table(idx.S[w], variant)


def qt_violation_table(sw: Mapping[int, tuple[int, ...]], variant: int):
    """Same check on a bare ``S_w`` table mapping ``u`` to its set masks."""
    def has(u, m):
        return m in sw.get(u, ())

    def has_sub(u, m):
        return any(v & ~m == 0 for v in sw.get(u, ()))

    for u in sorted(sw):
        for Y in sw[u]:
            ys = list(bits(Y))
            if variant in (1, 2):
                unions = {0: ()}
                for y in ys:
                    nxt = {}
                    for U, choice in unions.items():
                        for Yy in sw.get(y, ()):
                            nxt.setdefault(U | Yy, choice + ((y, Yy),))
                    unions = nxt
                for U in sorted(unions, key=lambda m: (popcount(m), m)):
                    ok = has_sub(u, U) if variant == 1 else has(u, U)
                    if not ok:
                        return (u, Y, unions[U], U)
            elif variant in (3, 4):
                test = has_sub if variant == 3 else has
                if not any(all(test(u, Y2) for Y2 in sw.get(y, ())) for y in ys):
                    return (u, Y)
            else:
                test = has_sub if variant in (5, 7) else has
                for y in ys:
                    for Y2 in sw.get(y, ()):
                        if variant in (7, 8) and Y2 >> y & 1:
                            continue
                        if not test(u, Y2):
                            return (u, Y, y, Y2)
    return None


def validate_general(M: GeneralModel, qt: int | None = None,
                     monotone: bool | None = None) -> ValidationReport:
    """Check every generalised-frame condition under variant ``qt``.

    Monotonicity is demanded for variant 2 only, unless ``monotone`` says
    otherwise.
    """
    qt = M.qt if qt is None else qt
    monotone = (qt == 2) if monotone is None else monotone
    idx = M.index
    nm = idx.worlds
    names = idx.names
    out = _check_R(idx)
    for w in range(idx.n):
        rw = idx.succ[w]
        sw = idx.S[w]
        for u, vs in sw.items():
            for V in vs:
                if not (rw >> u & 1) or V == 0 or V & ~rw:
                    out.append(Violation("a", (nm[w], nm[u], names(V))))
        for u in bits(rw):
            if not idx.has(w, u, 1 << u):
                out.append(Violation("b", (nm[w], nm[u])))
            for v in bits(idx.succ[u]):
                if not idx.has(w, u, 1 << v):
                    out.append(Violation("d", (nm[w], nm[u], nm[v])))
        bad = qt_violation(idx, w, qt)
        if bad is not None:
            out.append(Violation(f"c{qt}", _name_qt(idx, (w,) + bad)))
        if monotone:
            for u, vs in sw.items():
                for V in vs:
                    for Z in submasks(rw & ~V):
                        if not idx.has(w, u, V | Z):
                            out.append(Violation("e", (nm[w], nm[u], names(V), names(V | Z))))
                            break
    return ValidationReport(not out, out)


def _name_qt(idx: Index, bad) -> tuple:
    nm = idx.worlds
    w, u, Y, *rest = bad
    out: list = [nm[w], nm[u], idx.names(Y)]
    if len(rest) == 2 and isinstance(rest[0], tuple):
        choice, union = rest
        out.append([(nm[y], idx.names(m)) for y, m in choice])
        out.append(idx.names(union))
    elif len(rest) == 2:
        y, Y2 = rest
        out.extend([nm[y], idx.names(Y2)])
    return tuple(out)


def validate(M) -> ValidationReport:
    if isinstance(M, OrdinaryModel):
        return validate_ordinary(M)
    return validate_general(M)


# ------------------------------------------------------ scheme validity

DEFAULT_MAX_VALUATIONS = 1 << 22
_CHUNK = 1 << 16


@dataclass
class SchemeVerdict:
    valid: bool
    valuation: dict[str, list[str]] | None = None
    world: str | None = None
    valuations_checked: int = 0

    def __bool__(self):
        return self.valid


def _vec_eval(idx: Index, f: Formula, env: dict[str, np.ndarray], size: int) -> np.ndarray:
    full = np.int64(idx.full)
    one = np.int64(1)

    def ev(g):
        if isinstance(g, (Atom, Meta)):
            if g.name in env:
                return env[g.name]
            return np.full(size, idx.val.get(g.name, 0), dtype=np.int64)
        if isinstance(g, Top):
            return np.full(size, idx.full, dtype=np.int64)
        if isinstance(g, Bot):
            return np.zeros(size, dtype=np.int64)
        if isinstance(g, Neg):
            return full & ~ev(g.body)
        if isinstance(g, And):
            return ev(g.left) & ev(g.right)
        if isinstance(g, Or):
            return ev(g.left) | ev(g.right)
        if isinstance(g, Impl):
            return (full & ~ev(g.left)) | ev(g.right)
        out = np.zeros(size, dtype=np.int64)
        if isinstance(g, (Box, Dia)):
            a = ev(g.body)
            for w in range(idx.n):
                r = np.int64(idx.succ[w])
                hit = (a & r) == r if isinstance(g, Box) else (a & r) != 0
                out |= hit.astype(np.int64) << w
            return out
        if isinstance(g, Rhd):
            a, b = ev(g.left), ev(g.right)
            for w in range(idx.n):
                ok = np.ones(size, dtype=bool)
                for u in bits(idx.succ[w]):
                    found = np.zeros(size, dtype=bool)
                    for v in idx.S[w].get(u, ()):
                        vv = np.int64(v)
                        found |= (b & vv) == vv
                    ok &= (((a >> u) & one) == 0) | found
                out |= ok.astype(np.int64) << w
            return out
        raise TypeError(f"not a formula: {g!r}")

    return ev(f)


def falsify(M, f: Formula, variables: Iterable[str], max_valuations: int = DEFAULT_MAX_VALUATIONS):
    """Least valuation of ``variables`` under which some world refutes ``f``.

    Valuations are numbered so that variable ``i`` (in sorted order) reads
    bits ``i*n .. i*n+n-1`` of the valuation number.  Returns
    ``(number, world_index, checked)``; ``number`` is None when ``f``
    holds everywhere under every valuation.
    """
    idx = M.index
    if idx.n > 62:
        raise LimitExceeded("too many worlds for vectorised evaluation")
    names = sorted(variables)
    k, n = len(names), idx.n
    total = 1 << (k * n)
    if total > max_valuations:
        raise LimitExceeded(f"{total} valuations needed, limit is {max_valuations}", total)
    full = idx.full
    start = 0
    while start < total:
        stop = min(total, start + _CHUNK)
        nums = np.arange(start, stop, dtype=np.int64)
        env = {p: (nums >> (i * n)) & full for i, p in enumerate(names)}
        truth = _vec_eval(idx, f, env, stop - start)
        bad = np.nonzero(truth != full)[0]
        if bad.size:
            j = int(bad[0])
            world = next(bits(full & ~int(truth[j])))
            return start + j, world, start + j + 1
        start = stop
    return None, None, total


def decode_valuation(idx: Index, names: list[str], number: int) -> dict[str, list[str]]:
    return {p: idx.names((number >> (i * idx.n)) & idx.full) for i, p in enumerate(sorted(names))}


def frame_valid_scheme(frame, scheme: Formula, max_valuations: int = DEFAULT_MAX_VALUATIONS) -> SchemeVerdict:
    """Decide whether every instance of ``scheme`` holds throughout ``frame``.

    Metavariables act as fresh atoms and range over all subsets of worlds;
    atoms written in the scheme keep the frame's valuation (normally empty).
    """
    metas = metavariables(scheme)
    clash = metas & atoms(scheme)
    if clash:
        raise ModelError(f"names used both as atom and metavariable: {sorted(clash)}")
    number, world, checked = falsify(frame, scheme, metas, max_valuations)
    if number is None:
        return SchemeVerdict(True, valuations_checked=checked)
    idx = frame.index
    return SchemeVerdict(False, decode_valuation(idx, sorted(metas), number),
                         idx.worlds[world], checked)
