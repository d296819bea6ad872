import pytest
from hypothesis import given, settings, strategies as st

from ilkit.formula import (
    BOT, TOP, And, Atom, Bot, Box, Dia, FormulaSyntaxError, Impl, Meta, Neg, Or, Rhd,
    SchemeError, Top, adequate_conditions, adequate_set, close_seed, desugar,
    instantiate, is_ground, is_seed_closed, match_scheme, metavariables, modal_depth,
    parse, render, single_negation, subformulas,
)
from ilkit.proof import scheme

p, q, r, s = Atom("p"), Atom("q"), Atom("r"), Atom("s")
A, B, C = Meta("A"), Meta("B"), Meta("C")


# ------------------------------------------------------------------ parse

def test_parse_montagna_shape():
    got = parse("A |> B -> A /\\ [] C |> B /\\ [] C")
    assert got == Impl(Rhd(A, B), Rhd(And(A, Box(C)), And(B, Box(C))))


def test_parse_atom():
    assert parse("p") == p


@pytest.mark.parametrize("text", [
    "p |> q |> r", "p /\\ q \\/ r", "p \\/ q /\\ r", "", "p q", "(p", "p)", "p ->",
    "~", "p & q", "P1 |> ", "top top",
])
def test_parse_errors(text):
    with pytest.raises(FormulaSyntaxError):
        parse(text)


def test_parse_error_reports_position():
    with pytest.raises(FormulaSyntaxError) as exc:
        parse("p |> q |> r")
    assert exc.value.position == 7


def test_precedence_and_associativity():
    assert parse("p -> q -> r") == Impl(p, Impl(q, r))
    assert parse("p /\\ q /\\ r") == And(And(p, q), r)
    assert parse("p \\/ q \\/ r") == Or(Or(p, q), r)
    assert parse("~p |> []q -> <>r") == Impl(Rhd(Neg(p), Box(q)), Dia(r))
    assert parse("p /\\ q |> r \\/ s") == Rhd(And(p, q), Or(r, s))
    assert parse("(p |> q) |> r") == Rhd(Rhd(p, q), r)
    assert parse("  top|>bot ") == Rhd(TOP, BOT)
    assert parse("~~[]<>p") == Neg(Neg(Box(Dia(p))))


def test_names():
    assert parse("p_1") == Atom("p_1")
    assert parse("D12") == Meta("D12")
    assert parse("topx") == Atom("topx")


# ----------------------------------------------------------------- render

def test_render_examples():
    assert render(Rhd(p, q)) == "p |> q"
    assert render(Impl(Rhd(A, B), Rhd(A, C))) == "A |> B -> A |> C"
    assert render(Neg(Rhd(p, q))) == "~(p |> q)"


def test_render_minimal_parentheses():
    assert render(Impl(Impl(p, q), r)) == "(p -> q) -> r"
    assert render(And(Or(p, q), r)) == "(p \\/ q) /\\ r"
    assert render(And(p, And(q, r))) == "p /\\ (q /\\ r)"
    assert render(Rhd(Rhd(p, q), r)) == "(p |> q) |> r"
    assert render(Box(Neg(Top()))) == "[]~top"


def formula_strategy(leaves=st.sampled_from([p, q, r, A, B, TOP, BOT])):
    def extend(children):
        return st.one_of(
            st.builds(Neg, children), st.builds(Box, children), st.builds(Dia, children),
            st.builds(And, children, children), st.builds(Or, children, children),
            st.builds(Impl, children, children), st.builds(Rhd, children, children),
        )
    return st.recursive(leaves, extend, max_leaves=12)


@settings(max_examples=400, deadline=None)
@given(formula_strategy())
def test_round_trip(f):
    assert parse(render(f)) == f


# ------------------------------------------------------ negation / desugar

def test_single_negation():
    assert single_negation(Neg(p)) == p
    assert single_negation(p) == Neg(p)
    assert single_negation(Neg(Neg(p))) == Neg(p)
    assert single_negation(TOP) == Neg(TOP)


def test_desugar_examples():
    assert desugar(Box(Neg(p))) == Rhd(p, Bot())
    assert desugar(Dia(p)) == Neg(Rhd(p, Bot()))
    assert desugar(Rhd(p, q)) == Rhd(p, q)
    assert desugar(Box(p)) == Rhd(Neg(p), BOT)


def test_desugar_rejects_schemes():
    with pytest.raises(SchemeError, match="schemes cannot be desugared"):
        desugar(Box(A))


@settings(max_examples=200, deadline=None)
@given(formula_strategy(st.sampled_from([p, q, TOP, BOT])))
def test_desugar_idempotent_and_kernel(f):
    k = desugar(f)
    assert desugar(k) == k
    assert not any(isinstance(g, (Box, Dia)) for g in subformulas(k))


# ------------------------------------------------------------- structure

def test_subformulas():
    assert subformulas(Rhd(p, q)) == {Rhd(p, q), p, q}
    assert subformulas(Impl(p, Box(q))) == {Impl(p, Box(q)), p, Box(q), q}
    assert subformulas(Neg(Neg(p))) == {Neg(Neg(p)), Neg(p), p}


def test_modal_depth():
    assert modal_depth(p) == 0
    assert modal_depth(Rhd(p, q)) == 1
    assert modal_depth(Dia(Rhd(p, Dia(q)))) == 3
    assert modal_depth(And(Box(p), Rhd(Box(q), p))) == 2


def test_ground():
    assert is_ground(parse("p |> q"))
    assert not is_ground(parse("p |> Q"))
    assert metavariables(parse("A |> B -> A")) == {"A", "B"}


# -------------------------------------------------------------- closures

def test_close_seed_examples():
    assert close_seed([Rhd(p, q)]) == {
        TOP, Neg(TOP), Rhd(p, q), Neg(Rhd(p, q)), p, Neg(p), q, Neg(q)}
    assert close_seed([]) == {TOP, Neg(TOP)}
    assert close_seed([Neg(p)]) == {TOP, Neg(TOP), Neg(p), p}


def test_close_seed_rejects_schemes():
    with pytest.raises(SchemeError):
        close_seed([A])


def naive_adequate(seed):
    """Apply each closure rule once per round until nothing changes."""
    kernel = {desugar(g) for g in seed}
    while True:
        grown = kernel | {c for g in kernel for c in g.children()}
        grown |= {g.body if isinstance(g, Neg) else Neg(g) for g in kernel}
        if grown == kernel:
            break
        kernel = grown
    gamma = set(kernel)
    while True:
        new = set(gamma)
        for g in gamma:
            new.update(g.children())
            new.add(g.body if isinstance(g, Neg) else Neg(g))
        new.add(Rhd(BOT, BOT))
        for a in kernel:
            new.add(Rhd(a, BOT))  # []~a in kernel form
        pool = {x for g in gamma if isinstance(g, Rhd) for x in (g.left, g.right)}
        new.update(Rhd(x, y) for x in pool for y in pool)
        if new == gamma:
            return gamma
        gamma = new


SEEDS = [[], [Rhd(p, q)], [Neg(p)], [Box(p)], [Rhd(p, Dia(q))], [And(p, q), Rhd(q, p)]]


@pytest.mark.parametrize("seed", SEEDS, ids=lambda s: ";".join(map(render, s)) or "empty")
def test_adequate_set_is_least(seed):
    d = close_seed(seed)
    gamma = adequate_set(d)
    assert set(gamma.formulas) == naive_adequate(d)
    assert all(adequate_conditions(gamma.formulas, gamma.seed).values())
    assert gamma.seed <= gamma.formulas
    # no single formula can be dropped
    for f in gamma.formulas:
        smaller = gamma.formulas - {f}
        conds = adequate_conditions(smaller, gamma.seed)
        assert not all(conds.values()) or not gamma.seed <= smaller


def test_adequate_set_trivial_seed():
    gamma = adequate_set(close_seed([]))
    assert Rhd(BOT, BOT) in gamma
    assert desugar(Box(Neg(TOP))) in gamma
    assert desugar(Box(Neg(Neg(TOP)))) in gamma
    pool = {x for g in gamma for x in ((g.left, g.right) if isinstance(g, Rhd) else ())}
    assert all(Rhd(x, y) in gamma for x in pool for y in pool)


def test_adequate_set_symmetrises():
    gamma = adequate_set(close_seed([Rhd(p, q)]))
    assert Rhd(q, p) in gamma
    assert len(gamma) == 170
    assert len(gamma.boxes()) == 9


def test_adequate_set_requires_closed_seed():
    assert not is_seed_closed({Rhd(p, q)})
    with pytest.raises(ValueError):
        adequate_set({Rhd(p, q)})


# --------------------------------------------------------------- schemes

def test_instantiate_examples():
    assert instantiate(scheme("J5"), {"A": p}) == Rhd(Dia(p), p)
    assert instantiate(A, {"A": TOP}) == TOP
    assert instantiate(scheme("M"), {"A": p, "B": q, "C": r}) == parse("p |> q -> p /\\ []r |> q /\\ []r")


def test_instantiate_needs_total_substitution():
    with pytest.raises(SchemeError):
        instantiate(scheme("J2"), {"A": p, "B": q})


def test_match_examples():
    assert match_scheme(scheme("J2"), parse("(p |> q) /\\ (q |> r) -> p |> r")) == {"A": p, "B": q, "C": r}
    assert match_scheme(scheme("J1"), parse("p |> q")) is None
    assert match_scheme(scheme("J3"), parse("(p |> q) /\\ (r |> s) -> p \\/ r |> q")) is None


GROUND = formula_strategy(st.sampled_from([p, q, TOP, BOT]))


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(["J1", "J2", "J3", "J4", "J5", "M", "W", "R", "P0", "KM2"]),
       st.lists(GROUND, min_size=4, max_size=4))
def test_instantiate_match_adjoint(name, images):
    sch = scheme(name)
    sigma = dict(zip(sorted(metavariables(sch)), images))
    f = instantiate(sch, sigma)
    back = match_scheme(sch, f)
    assert back is not None and instantiate(sch, back) == f
