"""Exact checkers for first- and second-order frame conditions.

Every checker walks the whole frame and returns the least witness found,
with subsets visited by increasing cardinality.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

from .semantics import (
    GeneralModel, Index, LimitExceeded, OrdinaryModel, _find_cycle, bits, submasks,
)

ORDINARY = ("Mord", "M0ord", "Word", "KW1ord", "Rnord")
GENERAL = ("Mgen", "KM1gen", "Pgen", "M0gen", "P0gen", "Rgen", "Wgen", "NotW", "Rngen")
PARAMETRIC = ("Rnord", "Rngen")

DEFAULT_MAX_SETS = 1 << 24
MAX_RN = 8


@dataclass(frozen=True)
class Condition:
    name: str
    n: int | None = None

    def __post_init__(self):
        if self.name not in ORDINARY + GENERAL:
            raise ValueError(f"unknown condition {self.name!r}")
        if (self.name in PARAMETRIC) != (self.n is not None):
            raise ValueError(f"{self.name} {'needs' if self.name in PARAMETRIC else 'takes no'} parameter")
        if self.n is not None and self.n < 0:
            raise ValueError("parameter must be non-negative")

    @property
    def ordinary(self) -> bool:
        return self.name in ORDINARY

    @property
    def token(self) -> str:
        return self.name if self.n is None else f"{self.name}:{self.n}"

    def __str__(self):
        return self.token


def parse_condition(token: str) -> Condition:
    m = re.fullmatch(r"([A-Za-z0-9]+)(?::(\d+))?", token.strip())
    if not m:
        raise ValueError(f"bad condition token {token!r}")
    name, n = m.group(1), m.group(2)
    return Condition(name, int(n) if n is not None else None)


@dataclass
class ConditionVerdict:
    holds: bool
    witness: dict | None = None
    notes: dict = field(default_factory=dict)

    def __bool__(self):
        return self.holds


def _ok() -> ConditionVerdict:
    return ConditionVerdict(True)


def _fail(idx: Index, **parts) -> ConditionVerdict:
    """Name the parts of a witness: ints are worlds, ('set', m) are sets."""
    named = {}
    for k, v in parts.items():
        if isinstance(v, tuple) and v and v[0] == "set":
            named[k] = idx.names(v[1])
        elif isinstance(v, int):
            named[k] = idx.worlds[v]
        else:
            named[k] = v
    return ConditionVerdict(False, named)


def _set(m: int):
    return ("set", m)


# ------------------------------------------------------------- ordinary

def _pairs(idx: Index, w: int) -> list[tuple[int, int]]:
    return sorted((u, v) for u, vs in idx.S[w].items() for m in vs for v in bits(m))


def check_ordinary(frame: OrdinaryModel, c: Condition | str) -> ConditionVerdict:
    c = parse_condition(c) if isinstance(c, str) else c
    if not isinstance(frame, OrdinaryModel) or not c.ordinary:
        raise ValueError(f"{c} is not an ordinary condition or frame is not ordinary")
    idx = frame.index
    if c.name == "Rnord":
        return check_rn_ordinary(frame, c.n)
    succ = idx.succ
    for w in range(idx.n):
        pairs = _pairs(idx, w)
        if c.name == "Mord":
            for y, z in pairs:
                for u in bits(succ[z] & ~succ[y]):
                    return _fail(idx, w=w, y=y, z=z, u=u)
        elif c.name == "M0ord":
            for x in bits(succ[w]):
                for y in bits(succ[x]):
                    for y2, u in pairs:
                        if y2 != y:
                            continue
                        for z in bits(succ[u] & ~succ[x]):
                            return _fail(idx, w=w, x=x, y=y, u=u, z=z)
        elif c.name == "Word":
            comp = [0] * idx.n
            for x, z in pairs:
                comp[x] |= succ[z]
            cycle = _find_cycle(idx.n, comp)
            if cycle:
                return _fail(idx, w=w, cycle=[idx.worlds[i] for i in cycle])
        elif c.name == "KW1ord":
            comp = [0] * idx.n
            for x, z in pairs:
                comp[x] |= succ[z]
            maximal = [x for x in bits(succ[w]) if not comp[x] & succ[w]]
            related = set(pairs)
            for y in bits(succ[w]):
                if not any((y, x) in related for x in maximal):
                    return _fail(idx, w=w, y=y, M=[idx.worlds[x] for x in maximal])
    return _ok()


def rn_base(idx: Index, printed: bool = False) -> dict[tuple[int, int], set[tuple[int, int]]]:
    """Endpoint pairs of the base chain, keyed by (x0, y0)."""
    out: dict[tuple[int, int], set[tuple[int, int]]] = {}
    S = [_pairs(idx, w) for w in range(idx.n)]
    for x1 in range(idx.n):
        for y0, y1 in S[x1]:
            if printed:
                # x1 R x1 R y0 with x0 left free
                if idx.succ[x1] >> x1 & 1 and idx.succ[x1] >> y0 & 1:
                    for x0 in range(idx.n):
                        out.setdefault((x0, y0), set()).add((x1, y1))
            else:
                for x0 in bits(idx.succ[x1]):
                    if idx.succ[x0] >> y0 & 1:
                        out.setdefault((x0, y0), set()).add((x1, y1))
    return out


def rn_step(idx: Index, table):
    S = [_pairs(idx, w) for w in range(idx.n)]
    out = {}
    for key, ends in table.items():
        new = set()
        for x, y in ends:
            for a in range(idx.n):
                if idx.succ[a] >> x & 1:
                    for y2, b in S[a]:
                        if y2 == y:
                            new.add((a, b))
        if new:
            out[key] = new
    return out


def check_rn_ordinary(frame: OrdinaryModel, n: int, printed_base: bool = False,
                      max_n: int = MAX_RN) -> ConditionVerdict:
    if n < 0 or n > max_n:
        raise ValueError(f"n={n} outside 0..{max_n}")
    idx = frame.index
    table = rn_base(idx, printed_base)
    for _ in range(n):
        table = rn_step(idx, table)
    for (x0, y0) in sorted(table):
        target = set()
        for m in idx.S[x0].get(y0, ()):
            target.update(bits(m))
        for outer, inner in sorted(table[(x0, y0)]):
            for z in bits(idx.succ[inner]):
                if z not in target:
                    return _fail(idx, outer=outer, x0=x0, y0=y0, inner=inner, z=z)
    return _ok()


# ------------------------------------------------------------ generalised

def _spairs(idx: Index, w: int):
    for u in sorted(idx.S[w]):
        for V in idx.S[w][u]:
            yield u, V


def s_inverse(idx: Index, w: int, V: int) -> int:
    """Worlds ``z`` with ``z S_w Z`` for some ``Z`` inside ``V``."""
    out = 0
    for z, vs in idx.S[w].items():
        if any(Z & ~V == 0 for Z in vs):
            out |= 1 << z
    return out


def w_good_subset(idx: Index, w: int, u: int, V: int) -> int | None:
    """Some ``V'`` inside ``V`` with ``u S_w V'`` and ``R[V']`` missing ``S_w^{-1}[V]``."""
    back = s_inverse(idx, w, V)
    for V2 in idx.S[w].get(u, ()):
        if V2 & ~V == 0 and idx.image(V2) & back == 0:
            return V2
    return None


def choice_sets(idx: Index, x: int, u: int) -> list[int]:
    """Subsets of ``R[x]`` meeting every ``Z`` with ``u S_x Z``."""
    zs = idx.S[x].get(u, ())
    return [C for C in submasks(idx.succ[x]) if all(Z & C for Z in zs)]


def check_general(frame: GeneralModel, c: Condition | str,
                  max_sets: int = DEFAULT_MAX_SETS) -> ConditionVerdict:
    c = parse_condition(c) if isinstance(c, str) else c
    if not isinstance(frame, GeneralModel) or c.ordinary:
        raise ValueError(f"{c} is not a generalised condition or frame is not generalised")
    if c.name == "NotW":
        return check_not_w(frame)
    if c.name == "Rngen":
        return check_rn_general(frame, c.n, max_sets)
    idx = frame.index
    succ = idx.succ
    if c.name == "P0gen" and idx.n > 0 and (1 << idx.n) > max_sets:
        raise LimitExceeded(f"P0gen quantifies over {1 << idx.n} sets", 1 << idx.n)
    for w in range(idx.n):
        if c.name == "Mgen":
            for u, V in _spairs(idx, w):
                if not any(V2 & ~V == 0 and idx.image(V2) & ~succ[u] == 0
                           for V2 in idx.S[w][u]):
                    return _fail(idx, w=w, u=u, V=_set(V))
        elif c.name == "KM1gen":
            for u, V in _spairs(idx, w):
                if not any(succ[v] & ~succ[u] == 0 for v in bits(V)):
                    return _fail(idx, w=w, u=u, V=_set(V))
        elif c.name == "Pgen":
            for w2 in bits(succ[w]):
                for u, V in _spairs(idx, w):
                    if succ[w2] >> u & 1 and not idx.has_sub(w2, u, V):
                        return _fail(idx, w=w, w2=w2, u=u, V=_set(V))
        elif c.name == "M0gen":
            for u in bits(succ[w]):
                for x in bits(succ[u]):
                    for V in idx.S[w].get(x, ()):
                        if not any(V2 & ~V == 0 and idx.image(V2) & ~succ[u] == 0
                                   for V2 in idx.S[w].get(u, ())):
                            return _fail(idx, w=w, u=u, x=x, V=_set(V))
        elif c.name == "P0gen":
            for x in bits(succ[w]):
                for u in bits(succ[x]):
                    for V in idx.S[w].get(u, ()):
                        for Z in submasks(idx.full):
                            if all(succ[v] & Z for v in bits(V)) and not idx.has_sub(x, u, Z):
                                return _fail(idx, w=w, x=x, u=u, V=_set(V), Z=_set(Z))
        elif c.name == "Rgen":
            bad = _rgen_at(idx, w)
            if bad:
                return _fail(idx, **bad)
        elif c.name == "Wgen":
            for u, V in _spairs(idx, w):
                if w_good_subset(idx, w, u, V) is None:
                    return _fail(idx, w=w, u=u, V=_set(V))
    return _ok()


def _rgen_at(idx: Index, w: int) -> dict | None:
    succ = idx.succ
    for x in bits(succ[w]):
        for u in bits(succ[x]):
            vs = idx.S[w].get(u, ())
            if not vs:
                continue
            cs = choice_sets(idx, x, u)
            for V in vs:
                for C in cs:
                    if not any(U & ~V == 0 and idx.image(U) & ~C == 0
                               for U in idx.S[w].get(x, ())):
                        return dict(w=w, x=x, u=u, V=_set(V), C=_set(C))
    return None


# ------------------------------------------------------------------ Not-W

def _quasi_partition(idx: Index, w: int, U: int) -> tuple[int, int, bool]:
    U0 = 0
    for v in bits(U):
        if idx.image(1 << v) & s_inverse(idx, w, U) == 0:
            U0 |= 1 << v
    Ubar = U & ~U0
    ok = Ubar != 0
    for v in bits(Ubar):
        for z in bits(idx.succ[v]):
            for V2 in idx.S[w].get(z, ()):
                if V2 & ~U == 0 and not V2 & Ubar:
                    ok = False
    return U0, Ubar, ok


def check_not_w(frame: GeneralModel) -> ConditionVerdict:
    """Not-W holds iff the positive W condition fails.  The witness is a
    refined counterexample ``U`` with flags for the three refinement
    properties; the first ``U`` meeting all three is preferred."""
    idx = frame.index
    first = None
    for w in range(idx.n):
        for u, V in _spairs(idx, w):
            if w_good_subset(idx, w, u, V) is not None:
                continue
            for U in submasks(V):
                if not U or not idx.has(w, u, U):
                    continue
                props = _not_w_props(idx, w, u, U)
                if first is None:
                    first = (w, u, V, U, props)
                if all(props[k] for k in ("counterexample", "irreflexive", "quasi_partition")):
                    return _not_w_verdict(idx, w, u, V, U, props)
    if first is None:
        return ConditionVerdict(False)
    return _not_w_verdict(idx, *first)


def _not_w_props(idx: Index, w: int, u: int, U: int) -> dict:
    U0, Ubar, qp = _quasi_partition(idx, w, U)
    return {
        "counterexample": idx.has(w, u, U) and w_good_subset(idx, w, u, U) is None,
        "irreflexive": idx.image(U) & U == 0,
        "quasi_partition": qp,
        "U0": U0,
        "Ubar": Ubar,
    }


def _not_w_verdict(idx, w, u, V, U, props) -> ConditionVerdict:
    witness = {
        "w": idx.worlds[w], "u": idx.worlds[u], "V": idx.names(V), "U": idx.names(U),
        "U0": idx.names(props["U0"]), "Ubar": idx.names(props["Ubar"]),
    }
    flags = {k: props[k] for k in ("counterexample", "irreflexive", "quasi_partition")}
    return ConditionVerdict(True, witness, flags)


# ---------------------------------------------------------------- R^n gen

def _maps_into(idx: Index, x: int, D: int, T: int) -> bool:
    """Every R-successor of ``x`` inside ``D`` has some ``S_x`` set inside ``T``."""
    return all(idx.has_sub(x, u, T) for u in bits(idx.succ[x] & D))


def _chains(idx: Index, length: int):
    """R-chains ``c0 R c1 R ... R c_{length-1}``."""
    def extend(chain):
        if len(chain) == length:
            yield tuple(chain)
            return
        for nxt in bits(idx.succ[chain[-1]]):
            yield from extend(chain + [nxt])
    for start in range(idx.n):
        yield from extend([start])


def check_rn_general(frame: GeneralModel, n: int, max_sets: int = DEFAULT_MAX_SETS) -> ConditionVerdict:
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return check_general(frame, Condition("Rgen"), max_sets)
    idx = frame.index
    need = 1 << (idx.n * (n + 3))
    if need > max_sets:
        raise LimitExceeded(f"R{n}gen quantifies over {need} set tuples", need)
    subsets = submasks(idx.full)
    for chain in _chains(idx, n + 3):
        # chain = w, x_{n-1}, ..., x_0, y, z
        w, xs, y, z = chain[0], list(reversed(chain[1:n + 1])), chain[n + 1], chain[n + 2]
        zs = idx.S[y].get(z, ())
        Cs = [C for C in subsets if all(V & C for V in zs)]
        for C in Cs:
            for Ds in itertools.product(subsets, repeat=n):
                if not Ds[0] >> z & 1:
                    continue
                if not all(_maps_into(idx, xs[i], Ds[i], Ds[i + 1]) for i in range(n - 1)):
                    continue
                for A in subsets:
                    if not _maps_into(idx, xs[n - 1], Ds[n - 1], A):
                        continue
                    for B in subsets:
                        if not _maps_into(idx, w, A, B):
                            continue
                        if not any(V & ~B == 0 and idx.image(V) & ~C == 0
                                   for V in idx.S[w].get(xs[n - 1], ())):
                            return _fail(idx, w=w, xs=[idx.worlds[x] for x in xs], y=y, z=z,
                                         A=_set(A), B=_set(B), C=_set(C),
                                         D=[idx.names(D) for D in Ds])
    return _ok()


def check(frame, c: Condition | str, **kw) -> ConditionVerdict:
    c = parse_condition(c) if isinstance(c, str) else c
    if c.ordinary:
        return check_ordinary(frame, c)
    return check_general(frame, c, **kw)
