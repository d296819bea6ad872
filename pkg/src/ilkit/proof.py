"""Hilbert-style proof checking for IL and its extensions."""
from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .formula import (
    MODAL, And, Atom, Bot, Box, Dia, Formula, Impl, Meta, Neg, Or, Rhd, SchemeError, Top,
    abbreviate_dia, instantiate, is_ground, match_scheme, parse, render,
)

BASE_SCHEMES = {
    "L1": "[](A -> B) -> ([]A -> []B)",
    "L2": "[]A -> [][]A",
    "L3": "[]([]A -> A) -> []A",
    "J1": "[](A -> B) -> A |> B",
    "J2": "(A |> B) /\\ (B |> C) -> A |> C",
    "J3": "(A |> C) /\\ (B |> C) -> A \\/ B |> C",
    "J4": "A |> B -> (<>A -> <>B)",
    "J5": "<>A |> A",
}

PRINCIPLES = {
    "M": "A |> B -> A /\\ []C |> B /\\ []C",
    "P": "A |> B -> [](A |> B)",
    "W": "A |> B -> A |> B /\\ []~A",
    "KW1": "A |> <>top -> top |> ~A",
    "F": "A |> <>A -> []~A",
    "KM1": "A |> <>B -> [](A -> <>B)",
    "KM2": "A |> B -> ([](B -> <>C) -> [](A -> <>C))",
    "KW1_0": "A /\\ B |> <>A -> A |> A /\\ ~B",
    "M0": "A |> B -> <>A /\\ []C |> B /\\ []C",
    "W*": "A |> B -> B /\\ []C |> B /\\ []C /\\ []~A",
    "P0": "A |> <>B -> [](A |> B)",
    "R": "A |> B -> ~(A |> ~C) |> B /\\ []C",
}

IL_AXIOMS = tuple(BASE_SCHEMES)


def u_scheme(n: int) -> Formula:
    """The auxiliary ``U_n`` schemes (``n >= 1``)."""
    if n < 1:
        raise ValueError("U_n needs n >= 1")
    f = Dia(Neg(Rhd(Meta("D1"), Neg(Meta("C")))))
    for k in range(2, n + 1):
        f = Dia(And(Rhd(Meta(f"D{k - 1}"), Meta(f"D{k}")), f))
    return f


def rn_scheme(n: int) -> Formula:
    if n < 0:
        raise ValueError("R^n needs n >= 0")
    A, B, C = Meta("A"), Meta("B"), Meta("C")
    if n == 0:
        return parse(PRINCIPLES["R"])
    left = And(u_scheme(n), Rhd(Meta(f"D{n}"), A))
    return Impl(Rhd(A, B), Rhd(left, And(B, Box(C))))


def scheme(name: str) -> Formula:
    """Look up a scheme by id: an IL axiom, a principle, or ``Rn:<n>``."""
    m = re.fullmatch(r"Rn:(\d+)", name)
    if m:
        return rn_scheme(int(m.group(1)))
    if name in BASE_SCHEMES:
        return parse(BASE_SCHEMES[name])
    if name in PRINCIPLES:
        return parse(PRINCIPLES[name])
    raise KeyError(f"unknown scheme {name!r}")


def scheme_catalog(extra_rn: tuple[int, ...] = (0, 1, 2, 3)) -> dict[str, Formula]:
    out = {k: parse(v) for k, v in {**BASE_SCHEMES, **PRINCIPLES}.items()}
    for n in extra_rn:
        out[f"Rn:{n}"] = rn_scheme(n)
    return out


@dataclass(frozen=True)
class Logic:
    principles: tuple[str, ...] = ()

    @property
    def name(self) -> str:
        return "+".join(("IL",) + self.principles)

    def axioms(self) -> tuple[str, ...]:
        return IL_AXIOMS + self.principles


def parse_logic(text: str) -> Logic:
    parts = [p.strip() for p in text.split("+")]
    if not parts or parts[0] != "IL":
        raise ValueError(f"logic must start with IL: {text!r}")
    extra = tuple(p for p in parts[1:] if p)
    for p in extra:
        scheme(p)
        if p in BASE_SCHEMES:
            raise ValueError(f"{p} is already an IL axiom")
    return Logic(extra)


# ----------------------------------------------------------------- proofs

RULES = ("taut", "axiom", "mp", "nec")


@dataclass(frozen=True)
class Step:
    rule: str
    formula: Formula | None = None
    scheme: str | None = None
    subst: dict[str, Formula] | None = None
    refs: tuple[int, ...] = ()

    def to_json(self) -> dict:
        out: dict[str, Any] = {"rule": self.rule}
        if self.formula is not None:
            out["formula"] = render(self.formula)
        if self.scheme is not None:
            out["scheme"] = self.scheme
        if self.subst is not None:
            out["subst"] = {k: render(v) for k, v in sorted(self.subst.items())}
        if self.refs:
            out["refs"] = list(self.refs)
        return out


@dataclass(frozen=True)
class Proof:
    steps: tuple[Step, ...]
    logic: str = "IL"

    def to_json(self) -> dict:
        return {"logic": self.logic, "steps": [s.to_json() for s in self.steps]}


class ProofFormatError(ValueError):
    pass


_STEP_KEYS = {"rule", "formula", "scheme", "subst", "refs"}


def proof_from_json(data: dict) -> Proof:
    if not isinstance(data, dict) or set(data) - {"logic", "steps"}:
        raise ProofFormatError("proof must be an object with keys 'logic' and 'steps'")
    steps = []
    for i, raw in enumerate(data.get("steps", []), 1):
        if not isinstance(raw, dict) or set(raw) - _STEP_KEYS:
            raise ProofFormatError(f"step {i}: unexpected keys {sorted(set(raw) - _STEP_KEYS)}")
        rule = raw.get("rule")
        if rule not in RULES:
            raise ProofFormatError(f"step {i}: unknown rule {rule!r}")
        try:
            formula = parse(raw["formula"]) if "formula" in raw else None
            subst = ({k: parse(v) for k, v in raw["subst"].items()}
                     if "subst" in raw else None)
        except ValueError as exc:
            raise ProofFormatError(f"step {i}: {exc}") from exc
        refs = raw.get("refs", [])
        if not isinstance(refs, list) or not all(isinstance(r, int) for r in refs):
            raise ProofFormatError(f"step {i}: refs must be a list of integers")
        steps.append(Step(rule, formula, raw.get("scheme"), subst, tuple(refs)))
    return Proof(tuple(steps), data.get("logic", "IL"))


def load_proof(path: str | Path) -> Proof:
    return proof_from_json(json.loads(Path(path).read_text()))


# --------------------------------------------------------------- checking

def _skeleton(f: Formula, table: dict[Formula, str]) -> Formula:
    """Replace maximal modal subformulas (and atoms) by fresh letters."""
    if isinstance(f, MODAL) or isinstance(f, Atom):
        if f not in table:
            table[f] = f"v{len(table)}"
        return Atom(table[f])
    if isinstance(f, (Top, Bot)):
        return f
    if isinstance(f, Neg):
        return Neg(_skeleton(f.body, table))
    if isinstance(f, (And, Or, Impl)):
        return type(f)(_skeleton(f.left, table), _skeleton(f.right, table))
    raise SchemeError(f"cannot check a scheme as a tautology: {render(f)}")


def _truth(f: Formula, env: dict[str, bool]) -> bool:
    if isinstance(f, Atom):
        return env[f.name]
    if isinstance(f, Top):
        return True
    if isinstance(f, Bot):
        return False
    if isinstance(f, Neg):
        return not _truth(f.body, env)
    if isinstance(f, And):
        return _truth(f.left, env) and _truth(f.right, env)
    if isinstance(f, Or):
        return _truth(f.left, env) or _truth(f.right, env)
    if isinstance(f, Impl):
        return (not _truth(f.left, env)) or _truth(f.right, env)
    raise TypeError(f)


MAX_TAUT_LETTERS = 20


def is_tautology(f: Formula) -> bool:
    """Propositional validity, reading each maximal modal subformula as a
    letter.  Diamonds are first rewritten as ``~[]~``."""
    table: dict[Formula, str] = {}
    sk = _skeleton(abbreviate_dia(f), table)
    letters = sorted(table.values())
    if len(letters) > MAX_TAUT_LETTERS:
        raise ValueError(f"tautology check over {len(letters)} letters exceeds limit")
    for row in itertools.product((False, True), repeat=len(letters)):
        if not _truth(sk, dict(zip(letters, row))):
            return False
    return True


def same(f: Formula, g: Formula) -> bool:
    """Syntactic identity up to reading ``<>`` as ``~[]~``."""
    return f == g or abbreviate_dia(f) == abbreviate_dia(g)


@dataclass
class ProofVerdict:
    ok: bool
    formulas: list[Formula] = field(default_factory=list)
    failed_step: int | None = None
    reason: str | None = None

    def __bool__(self):
        return self.ok

    @property
    def theorem(self) -> Formula | None:
        return self.formulas[-1] if self.ok and self.formulas else None


def _fail(i: int, reason: str, done: list[Formula]) -> ProofVerdict:
    return ProofVerdict(False, done, i, reason)


def check_proof(proof: Proof, logic: Logic | str | None = None) -> ProofVerdict:
    """Check every step; report the first failing one (1-based)."""
    if logic is None:
        logic = proof.logic
    logic = parse_logic(logic) if isinstance(logic, str) else logic
    allowed = set(logic.axioms())
    done: list[Formula] = []
    if not proof.steps:
        return _fail(0, "empty proof", done)
    for i, st in enumerate(proof.steps, 1):
        refs = st.refs
        if any(r < 1 or r >= i for r in refs):
            return _fail(i, f"reference out of range in {list(refs)}", done)
        if st.formula is not None and not is_ground(st.formula):
            return _fail(i, "formula contains metavariables", done)
        if st.rule == "taut":
            if st.formula is None or refs:
                return _fail(i, "taut step needs a formula and no references", done)
            if not is_tautology(st.formula):
                return _fail(i, "not a propositional tautology", done)
            got = st.formula
        elif st.rule == "axiom":
            if refs:
                return _fail(i, "axiom step takes no references", done)
            if st.scheme not in allowed:
                return _fail(i, f"scheme {st.scheme!r} not available in {logic.name}", done)
            sch = scheme(st.scheme)
            subst = st.subst
            if subst is None:
                if st.formula is None:
                    return _fail(i, "axiom step needs a substitution or a formula", done)
                subst = match_scheme(sch, st.formula) or match_scheme(
                    abbreviate_dia(sch), abbreviate_dia(st.formula))
                if subst is None:
                    return _fail(i, f"formula is not an instance of {st.scheme}", done)
            if any(not is_ground(v) for v in subst.values()):
                return _fail(i, "substitution is not ground", done)
            try:
                got = instantiate(sch, subst)
            except SchemeError as exc:
                return _fail(i, str(exc), done)
            if st.formula is not None and not same(st.formula, got):
                return _fail(i, f"formula differs from the instance {render(got)}", done)
            if st.formula is not None:
                got = st.formula
        elif st.rule == "mp":
            if len(refs) != 2:
                return _fail(i, "mp needs two references", done)
            a, b = done[refs[0] - 1], done[refs[1] - 1]
            if not isinstance(b, Impl) or not same(b.left, a):
                return _fail(i, f"step {refs[1]} is not an implication from step {refs[0]}", done)
            got = b.right
            if st.formula is not None:
                if not same(st.formula, got):
                    return _fail(i, "stated formula is not the mp conclusion", done)
                got = st.formula
        else:
            if len(refs) != 1:
                return _fail(i, "nec needs one reference", done)
            got = Box(done[refs[0] - 1])
            if st.formula is not None:
                if not same(st.formula, got):
                    return _fail(i, "stated formula is not the nec conclusion", done)
                got = st.formula
        done.append(got)
    return ProofVerdict(True, done)


__all__ = [
    "BASE_SCHEMES", "PRINCIPLES", "IL_AXIOMS", "scheme", "scheme_catalog", "rn_scheme",
    "u_scheme", "Logic", "parse_logic", "Step", "Proof", "proof_from_json", "load_proof",
    "is_tautology", "check_proof", "ProofVerdict", "ProofFormatError",
]
