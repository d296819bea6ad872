import itertools
import json

import pytest

from ilkit import cli
from ilkit.conditions import check
from ilkit.formula import Neg, parse
from ilkit.io import load_model, model_to_json
from ilkit.proof import scheme
from ilkit.semantics import OrdinaryModel, forces, validate
from ilkit.toolbench import (
    SearchBounds, enumerate_frames, enumerate_ordinary_frames, find_countermodel,
    find_separating_frame,
)

import oracles


# ------------------------------------------------------------ enumeration

def test_one_world():
    assert len(list(enumerate_frames(max_worlds=1))) == 1


@pytest.mark.parametrize("qt", range(1, 9))
def test_counts_match_naive_enumerator(qt):
    for n in (1, 2, 3):
        got = list(enumerate_frames(exact=n, qt=qt))
        assert len(got) == len(oracles.naive_frame_classes(n, qt)), n
        assert all(validate(f).ok for f in got)


def test_ordinary_counts_match_naive():
    for n in (1, 2, 3):
        names = [f"w{i}" for i in range(n)]
        off = [(a, b) for a in names for b in names if a != b]
        classes = set()
        for R in oracles.powerset(off):
            pools = []
            for w in names:
                rw = sorted(b for a, b in R if a == w)
                pools.append(list(oracles.powerset([(u, v) for u in rw for v in rw])))
            for choice in itertools.product(*pools):
                M = OrdinaryModel(names, R, dict(zip(names, choice)), {})
                if not validate(M).ok:
                    continue
                codes = []
                for perm in itertools.permutations(range(n)):
                    pm = {names[i]: names[perm[i]] for i in range(n)}
                    codes.append((tuple(sorted((pm[a], pm[b]) for a, b in R)),
                                  tuple(sorted((pm[w], pm[u], pm[v]) for w, c in zip(names, choice)
                                               for u, v in c))))
                classes.add(min(codes))
        assert sum(1 for _ in enumerate_ordinary_frames(exact=n)) == len(classes)


def test_enumeration_deterministic():
    a = [model_to_json(f) for f in enumerate_frames(3, 4)]
    b = [model_to_json(f) for f in enumerate_frames(3, 4)]
    assert a == b


def test_search_same_with_workers(monkeypatch):
    bounds = SearchBounds(max_worlds=3)
    monkeypatch.setenv("ILKIT_THREADS", "1")
    serial = find_separating_frame("M0gen", "Mgen", bounds)
    monkeypatch.setenv("ILKIT_THREADS", "2")
    parallel = find_separating_frame("M0gen", "Mgen", bounds)
    assert serial.model == parallel.model
    assert serial.frames_examined == parallel.frames_examined


# ----------------------------------------------------------------- search

def test_p_rhd_p_has_no_countermodel():
    out = find_countermodel(parse("p |> p"), [], SearchBounds(max_worlds=3))
    assert out.kind == "exhausted"


def test_m_fails_under_p():
    f = parse("p |> q -> p /\\ []r |> q /\\ []r")
    out = find_countermodel(f, ["Pgen"], SearchBounds(max_worlds=4))
    assert out.found
    assert validate(out.model).ok and check(out.model.frame(), "Pgen").holds
    assert forces(out.model, out.world, Neg(f))


def test_w_follows_from_m_within_three_worlds():
    f = parse("p |> q -> p |> q /\\ []~p")
    assert find_countermodel(f, ["Mgen"], SearchBounds(max_worlds=3)).kind == "exhausted"


def test_search_budget():
    f = parse("p |> q -> p /\\ []r |> q /\\ []r")
    out = find_countermodel(f, [], SearchBounds(max_worlds=4, max_frames=1))
    assert out.kind == "budget" and out.frames_examined == 1


def test_search_input_errors():
    with pytest.raises(ValueError):
        find_countermodel(parse("A |> p"))
    with pytest.raises(ValueError):
        find_countermodel(parse("p"), ["Mord"])
    with pytest.raises(ValueError):
        SearchBounds(max_worlds=0)


@pytest.mark.parametrize("holds,fails", [("KM1gen", "Mgen"), ("M0gen", "Mgen"),
                                         ("Pgen", "Mgen"), ("Mgen", "Pgen")])
def test_separations(holds, fails):
    out = find_separating_frame(holds, fails, SearchBounds(max_worlds=4))
    assert out.found
    assert check(out.model, holds).holds and not check(out.model, fails).holds


def test_no_self_separation():
    assert find_separating_frame("Mgen", "Mgen", SearchBounds(max_worlds=3)).kind == "exhausted"


def test_separation_witness_falsifies_scheme():
    out = find_separating_frame("KM1gen", "Mgen", SearchBounds(max_worlds=4))
    from ilkit.semantics import frame_valid_scheme
    assert frame_valid_scheme(out.model, scheme("KM1")).valid
    assert not frame_valid_scheme(out.model, scheme("M")).valid


# -------------------------------------------------------------------- CLI

def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_parse(capsys):
    code, out, _ = run(capsys, "parse", "--formula", "~(p|>q)")
    assert code == 0 and out.strip() == "~(p |> q)"
    code, _, err = run(capsys, "parse", "--formula", "p |> q |> r")
    assert code == 2 and "--formula" in err


def test_cli_check_model(capsys, fixture_path):
    fig = fixture_path("fig1.json")
    assert run(capsys, "check-model", "--model", fig, "--world", "w", "--formula", "~(p |> q)")[0] == 0
    assert run(capsys, "check-model", "--model", fig, "--world", "w", "--formula", "p |> q")[0] == 1
    code, out, _ = run(capsys, "check-model", "--model", fig, "--formula", "[]bot")
    assert code == 1 and json.loads(out)["true_at"] == ["v0", "v1", "v2", "v3"]
    code, _, err = run(capsys, "check-model", "--model", fig, "--world", "nowhere", "--formula", "p")
    assert code == 2 and "--world" in err


def test_cli_validate(capsys, fixture_path):
    code, out, _ = run(capsys, "validate", "--model", fixture_path("broken.json"))
    assert code == 1 and "R-acyclicity" in out
    assert run(capsys, "validate", "--model", fixture_path("fig1.json"))[0] == 0


def test_cli_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "validate", "--model", tmp_path / "nope.json")
    assert code == 2 and "nope.json" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "validate", "--model", bad)
    assert code == 2 and "bad.json" in err


def test_cli_usage_errors(capsys, fixture_path):
    assert run(capsys)[0] == 2
    assert run(capsys, "nonsense")[0] == 2
    code, _, err = run(capsys, "validate")
    assert code == 2 and "--model" in err
    code, _, err = run(capsys, "check-frame", "--model", fixture_path("fig1.json"), "--condition", "Mord")
    assert code == 2 and "--condition" in err


def test_cli_check_frame(capsys, fixture_path):
    code, out, _ = run(capsys, "check-frame", "--model", fixture_path("four_worlds.json"),
                       "--condition", "Mgen")
    assert json.loads(out)["holds"] is (code == 0)
    code, out, _ = run(capsys, "check-frame", "--model", fixture_path("four_worlds.json"),
                       "--condition", "Rngen", "--n", "0")
    assert json.loads(out)["condition"] == "Rngen:0"


def test_cli_frame_valid(capsys, fixture_path):
    code, out, _ = run(capsys, "frame-valid", "--model", fixture_path("four_worlds.json"), "--scheme", "J5")
    assert code == 0 and json.loads(out)["valid"]
    code, out, _ = run(capsys, "frame-valid", "--model", fixture_path("four_worlds.json"),
                       "--scheme", "A |> B")
    assert code == 1 and "valuation" in json.loads(out)
    code, _, _ = run(capsys, "frame-valid", "--model", fixture_path("four_worlds.json"),
                     "--scheme", "J2", "--max-valuations", "10")
    assert code == 2


def test_cli_transform(capsys, tmp_path, fixture_path):
    out = tmp_path / "closed.json"
    assert run(capsys, "transform", "--op", "monotone-closure", "--model", fixture_path("fig1.json"),
               "-o", out)[0] == 0
    assert validate(load_model(out)).ok
    code, _, err = run(capsys, "transform", "--op", "lift-monotone", "--model", fixture_path("fig1.json"),
                       "-o", out)
    assert code == 2 and "ordinary" in err
    code, _, _ = run(capsys, "transform", "--op", "unravel", "--model", fixture_path("four_worlds.json"),
                     "-o", out)
    assert code == 2


def test_cli_unravel_writes_map(capsys, tmp_path):
    frame = next(f for f in enumerate_frames(3, 6)
                 if any(len(V) > 1 for w in f.worlds for _, V in f.S[w]))
    src = tmp_path / "src.json"
    src.write_text(json.dumps(model_to_json(frame)))
    out = tmp_path / "sub" / "unravelled.json"
    assert run(capsys, "transform", "--op", "unravel", "--model", src, "-o", out)[0] == 2
    out.parent.mkdir()
    assert run(capsys, "transform", "--op", "unravel", "--model", src, "-o", out)[0] == 0
    mapping = json.loads((out.parent / "map.json").read_text())
    assert set(mapping) == set(frame.worlds)
    assert validate(load_model(out)).ok


def test_cli_bisim(capsys, tmp_path, fixture_path):
    fig = fixture_path("fig1.json")
    code, out, _ = run(capsys, "bisim", "--left", fig, "--right", fig, "-o", tmp_path / "z.json")
    assert code == 0 and "w w" in out.splitlines()
    assert ["w", "w"] in json.loads((tmp_path / "z.json").read_text())["pairs"]
    code, out, _ = run(capsys, "bisim", "--left", fig, "--right", fig, "--n", "0")
    assert code == 0 and "v1 v3" in out.splitlines()


def test_cli_filtrate(capsys, tmp_path, fixture_path):
    out = tmp_path / "f.json"
    code, stdout, _ = run(capsys, "filtrate", "--model", fixture_path("four_worlds.json"),
                          "--seed-formulas", "p |> q; p |> r", "-o", out)
    assert code == 0
    assert validate(load_model(out)).ok
    assert json.loads((tmp_path / "f.classes.json").read_text()) == json.loads(stdout)["classes"]


def test_cli_check_proof(capsys, fixture_path):
    code, out, _ = run(capsys, "check-proof", fixture_path("proof_p_rhd_p.json"))
    assert code == 0 and "p |> p" in out
    assert run(capsys, "check-proof", fixture_path("proof_ilw_f.json"))[0] == 0
    code, out, _ = run(capsys, "check-proof", fixture_path("proof_ilw_f.json"), "--logic", "IL")
    assert code == 1 and "step 1" in out
    assert run(capsys, "check-proof")[0] == 2


def test_cli_search(capsys, tmp_path):
    out = tmp_path / "cm.json"
    code, stdout, _ = run(capsys, "search", "--formula", "p |> q -> p /\\ []r |> q /\\ []r",
                          "--logic", "IL+Pgen", "-o", out)
    assert code == 1
    info = json.loads(stdout)
    M = load_model(out)
    assert not forces(M, info["world"], parse("p |> q -> p /\\ []r |> q /\\ []r"))
    assert run(capsys, "search", "--formula", "p |> p", "--max-worlds", "2")[0] == 0
    assert run(capsys, "search", "--formula", "p", "--logic", "IL+Nope")[0] == 2


def test_cli_separate(capsys, tmp_path):
    out = tmp_path / "witness.json"
    code, _, _ = run(capsys, "separate", "--holds", "KM1gen", "--fails", "Mgen",
                     "--max-worlds", "4", "-o", out)
    assert code == 0
    frame = load_model(out)
    assert validate(frame).ok
    assert check(frame, "KM1gen").holds and not check(frame, "Mgen").holds
    assert run(capsys, "separate", "--holds", "Mgen", "--fails", "Mgen", "--max-worlds", "2")[0] == 1
