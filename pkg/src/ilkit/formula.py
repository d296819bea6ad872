"""Formula syntax for interpretability logic.

Formulas are immutable trees.  Lowercase names are propositional atoms,
uppercase names are metavariables, so a single grammar serves both ground
formulas and axiom schemes.

ASCII concrete syntax, strongest binding first::

    ~ [] <>        unary prefix
    /\\  \\/        equal strength; mixing them needs parentheses
    |>             non-associative
    ->             right-associative
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping


class Formula:
    """Base class of all formula nodes."""

    __slots__ = ()

    def __str__(self) -> str:
        return render(self)

    def children(self) -> tuple[Formula, ...]:
        return ()


@dataclass(frozen=True, repr=False)
class Atom(Formula):
    name: str

    def __repr__(self) -> str:
        return f"Atom({self.name!r})"


@dataclass(frozen=True, repr=False)
class Meta(Formula):
    name: str

    def __repr__(self) -> str:
        return f"Meta({self.name!r})"


@dataclass(frozen=True, repr=False)
class Top(Formula):
    def __repr__(self) -> str:
        return "Top()"


@dataclass(frozen=True, repr=False)
class Bot(Formula):
    def __repr__(self) -> str:
        return "Bot()"


@dataclass(frozen=True)
class Neg(Formula):
    body: Formula

    def children(self):
        return (self.body,)


@dataclass(frozen=True)
class Box(Formula):
    body: Formula

    def children(self):
        return (self.body,)


@dataclass(frozen=True)
class Dia(Formula):
    body: Formula

    def children(self):
        return (self.body,)


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Impl(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Rhd(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


TOP = Top()
BOT = Bot()

UNARY = (Neg, Box, Dia)
BINARY = (And, Or, Impl, Rhd)
MODAL = (Box, Dia, Rhd)


class FormulaSyntaxError(ValueError):
    """Raised for text that is not in the formula grammar."""

    def __init__(self, message: str, position: int, text: str = ""):
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.text = text


class SchemeError(ValueError):
    pass


# ---------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<op>\[\]|<>|/\\|\\/|\|>|->|~|\(|\))|(?P<name>[A-Za-z][A-Za-z0-9_]*))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        start = m.start("op") if m.group("op") else m.start("name")
        if m.group("op"):
            tokens.append(("op", m.group("op"), start))
        else:
            tokens.append(("name", m.group("name"), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return FormulaSyntaxError(message, tok[2], self.text)

    def expect(self, value):
        tok = self.take()
        if tok[1] != value or tok[0] != "op":
            raise self.error(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok)
        return tok

    def parse(self) -> Formula:
        f = self.implication()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected {self.peek()[1]!r}")
        return f

    def implication(self) -> Formula:
        left = self.interpretation()
        if self.peek()[1] == "->":
            self.take()
            return Impl(left, self.implication())
        return left

    def interpretation(self) -> Formula:
        left = self.boolean()
        if self.peek()[1] == "|>":
            self.take()
            right = self.boolean()
            if self.peek()[1] == "|>":
                raise self.error("chained |> needs parentheses")
            return Rhd(left, right)
        return left

    def boolean(self) -> Formula:
        left = self.unary()
        op = None
        while self.peek()[1] in ("/\\", "\\/"):
            tok = self.take()
            if op is not None and tok[1] != op:
                raise self.error("mixing /\\ and \\/ needs parentheses", tok)
            op = tok[1]
            right = self.unary()
            left = And(left, right) if op == "/\\" else Or(left, right)
        return left

    def unary(self) -> Formula:
        tok = self.take()
        kind, value, _ = tok
        if kind == "op":
            if value == "~":
                return Neg(self.unary())
            if value == "[]":
                return Box(self.unary())
            if value == "<>":
                return Dia(self.unary())
            if value == "(":
                inner = self.implication()
                self.expect(")")
                return inner
            raise self.error(f"unexpected {value!r}", tok)
        if kind == "name":
            if value == "top":
                return TOP
            if value == "bot":
                return BOT
            if value[0].isupper():
                return Meta(value)
            return Atom(value)
        raise self.error("unexpected end of input", tok)


def parse(text: str) -> Formula:
    """Parse ASCII concrete syntax into a formula tree."""
    return _Parser(text).parse()


# -------------------------------------------------------------- rendering

_PREC = {Impl: 1, Rhd: 2, And: 3, Or: 3, Neg: 4, Box: 4, Dia: 4}
_SYMBOL = {Impl: "->", Rhd: "|>", And: "/\\", Or: "\\/"}
_PREFIX = {Neg: "~", Box: "[]", Dia: "<>"}


def _prec(f: Formula) -> int:
    return _PREC.get(type(f), 5)


def render(f: Formula) -> str:
    """Print with the fewest parentheses that still parse back to ``f``."""
    if isinstance(f, (Atom, Meta)):
        return f.name
    if isinstance(f, Top):
        return "top"
    if isinstance(f, Bot):
        return "bot"
    if isinstance(f, UNARY):
        body = render(f.body)
        if _prec(f.body) < 4:
            body = f"({body})"
        return _PREFIX[type(f)] + body
    if isinstance(f, BINARY):
        left, right = render(f.left), render(f.right)
        p = _PREC[type(f)]
        if isinstance(f, Impl):
            wrap_left, wrap_right = _prec(f.left) <= 1, False
        elif isinstance(f, Rhd):
            wrap_left, wrap_right = _prec(f.left) <= 2, _prec(f.right) <= 2
        else:
            lp = _prec(f.left)
            wrap_left = lp < p or (lp == p and type(f.left) is not type(f))
            wrap_right = _prec(f.right) <= p
        if wrap_left:
            left = f"({left})"
        if wrap_right:
            right = f"({right})"
        return f"{left} {_SYMBOL[type(f)]} {right}"
    raise TypeError(f"not a formula: {f!r}")


def sort_key(f: Formula):
    return (size(f), render(f))


# ------------------------------------------------------------ inspection

def walk(f: Formula) -> Iterator[Formula]:
    """Pre-order traversal."""
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        stack.extend(reversed(g.children()))


def size(f: Formula) -> int:
    return sum(1 for _ in walk(f))


def atoms(f: Formula) -> frozenset[str]:
    return frozenset(g.name for g in walk(f) if isinstance(g, Atom))


def metavariables(f: Formula) -> frozenset[str]:
    return frozenset(g.name for g in walk(f) if isinstance(g, Meta))


def is_ground(f: Formula) -> bool:
    return not any(isinstance(g, Meta) for g in walk(f))


def subformulas(f: Formula) -> frozenset[Formula]:
    return frozenset(walk(f))


def modal_depth(f: Formula) -> int:
    if isinstance(f, MODAL):
        return 1 + max(modal_depth(c) for c in f.children())
    kids = f.children()
    return max((modal_depth(c) for c in kids), default=0)


def single_negation(f: Formula) -> Formula:
    """``~A``: strip one outer negation, or add one."""
    if isinstance(f, Neg):
        return f.body
    return Neg(f)


def desugar(f: Formula) -> Formula:
    """Rewrite Box and Dia into the |>-only kernel.

    ``<>A`` becomes ``~(A |> bot)`` and ``[]A`` becomes ``(~A) |> bot``
    where ``~`` is single negation.
    """
    if isinstance(f, Meta):
        raise SchemeError("schemes cannot be desugared")
    if isinstance(f, (Atom, Top, Bot)):
        return f
    if isinstance(f, Box):
        return Rhd(single_negation(desugar(f.body)), BOT)
    if isinstance(f, Dia):
        return Neg(Rhd(desugar(f.body), BOT))
    if isinstance(f, Neg):
        return Neg(desugar(f.body))
    return type(f)(desugar(f.left), desugar(f.right))


def abbreviate_dia(f: Formula) -> Formula:
    """Replace every ``<>A`` by ``~[]~A`` (Dia as an abbreviation)."""
    if isinstance(f, (Atom, Meta, Top, Bot)):
        return f
    if isinstance(f, Dia):
        return Neg(Box(Neg(abbreviate_dia(f.body))))
    if isinstance(f, UNARY):
        return type(f)(abbreviate_dia(f.body))
    return type(f)(abbreviate_dia(f.left), abbreviate_dia(f.right))


# ---------------------------------------------------------- closures

def _close(fs: Iterable[Formula]) -> set[Formula]:
    """Smallest superset closed under subformulas and single negation."""
    out: set[Formula] = set()
    todo = list(fs)
    while todo:
        g = todo.pop()
        if g in out:
            continue
        out.add(g)
        todo.extend(g.children())
        todo.append(single_negation(g))
    return out


def close_seed(fs: Iterable[Formula]) -> frozenset[Formula]:
    """Close ``fs`` together with ``top`` under subformulas and ``~``."""
    fs = list(fs)
    for g in fs:
        if not is_ground(g):
            raise SchemeError(f"seed formula {render(g)!r} contains metavariables")
    return frozenset(_close([TOP, *fs]))


def is_seed_closed(d: Iterable[Formula]) -> bool:
    d = frozenset(d)
    return TOP in d and all(
        single_negation(g) in d and all(c in d for c in g.children()) for g in d
    )


@dataclass(frozen=True)
class AdequateSet:
    """A finite formula set that filtration can work through.

    Formulas live in the |>-only kernel, so the required ``[]~A`` for a
    seed member ``A`` appears in its kernel form ``A |> bot``.
    """

    formulas: frozenset[Formula]
    seed: frozenset[Formula]

    def __contains__(self, f) -> bool:
        return f in self.formulas

    def __iter__(self):
        return iter(sorted(self.formulas, key=sort_key))

    def __len__(self) -> int:
        return len(self.formulas)

    def boxes(self) -> list[Formula]:
        """Members of the form ``X |> bot``, i.e. the boxed formulas ``[]~X``."""
        return [f for f in self if isinstance(f, Rhd) and isinstance(f.right, Bot)]


def _rhd_pool(fs: Iterable[Formula]) -> set[Formula]:
    pool = set()
    for g in fs:
        if isinstance(g, Rhd):
            pool.add(g.left)
            pool.add(g.right)
    return pool


def adequate_conditions(gamma: Iterable[Formula], seed: Iterable[Formula]) -> dict[str, bool]:
    """Evaluate each defining condition of an adequate set separately."""
    gamma = frozenset(gamma)
    seed = frozenset(desugar(g) for g in seed)
    pool = _rhd_pool(gamma)
    return {
        "a": all(c in gamma for g in gamma for c in g.children()),
        "b": all(single_negation(g) in gamma for g in gamma),
        "c": Rhd(BOT, BOT) in gamma,
        "d": all(Rhd(x, y) in gamma for x in pool for y in pool),
        "e": all(desugar(Box(Neg(a))) in gamma for a in seed),
    }


def adequate_set(d: Iterable[Formula]) -> AdequateSet:
    """Least adequate set over a seed-closed set ``d``.

    The seed is first brought into the |>-only kernel.  Pairing under |>
    uses the antecedents and succedents of every |>-formula present,
    including those contributed by the ``[]~A`` requirement.
    """
    d = frozenset(d)
    if not is_seed_closed(d):
        raise ValueError("seed set is not closed under subformulas and single negation, or lacks top")
    kernel = close_seed(desugar(g) for g in d)
    gamma = _close([*kernel, Rhd(BOT, BOT), *(desugar(Box(Neg(a))) for a in kernel)])
    while True:
        pool = _rhd_pool(gamma)
        missing = [Rhd(x, y) for x in pool for y in pool if Rhd(x, y) not in gamma]
        if not missing:
            break
        gamma |= _close(missing)
    return AdequateSet(frozenset(gamma), kernel)


# ---------------------------------------------------------- schemes

def instantiate(scheme: Formula, subst: Mapping[str, Formula]) -> Formula:
    if isinstance(scheme, Meta):
        try:
            return subst[scheme.name]
        except KeyError:
            raise SchemeError(f"substitution has no image for metavariable {scheme.name}") from None
    if isinstance(scheme, (Atom, Top, Bot)):
        return scheme
    if isinstance(scheme, UNARY):
        return type(scheme)(instantiate(scheme.body, subst))
    return type(scheme)(instantiate(scheme.left, subst), instantiate(scheme.right, subst))


def match_scheme(scheme: Formula, f: Formula) -> dict[str, Formula] | None:
    """Syntactic matching; repeated metavariables must meet equal subtrees."""
    subst: dict[str, Formula] = {}
    stack = [(scheme, f)]
    while stack:
        s, g = stack.pop()
        if isinstance(s, Meta):
            bound = subst.setdefault(s.name, g)
            if bound != g:
                return None
            continue
        if type(s) is not type(g):
            return None
        if isinstance(s, (Atom,)) and s.name != g.name:
            return None
        stack.extend(zip(s.children(), g.children()))
    return subst
