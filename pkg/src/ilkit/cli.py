"""Command-line front end.  Exit status: 0 affirmative, 1 negative, 2 error."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import conditions, equivalence, io, proof, semantics, toolbench, transform
from .formula import FormulaSyntaxError, adequate_set, close_seed, parse, render
from .semantics import LimitExceeded, ModelError


class UsageError(Exception):
    pass


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=False))


def _need(args, *names) -> None:
    for n in names:
        if getattr(args, n, None) is None:
            raise UsageError(f"--{n.replace('_', '-')} is required")


def _load(path: str):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{path}: no such file")
    try:
        return io.load_model(p)
    except ModelError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _formula(text: str):
    try:
        return parse(text)
    except FormulaSyntaxError as exc:
        raise UsageError(f"--formula: {exc}") from exc


def _write(path: str | None, payload: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")


# ---------------------------------------------------------------- commands

def cmd_parse(args) -> int:
    _need(args, "formula")
    f = _formula(args.formula)
    print(render(f))
    return 0


def cmd_check_model(args) -> int:
    _need(args, "model", "formula")
    M = _load(args.model)
    f = _formula(args.formula)
    if args.world is not None:
        if args.world not in M.worlds:
            raise UsageError(f"--world: {args.world!r} is not a world of {args.model}")
        verdict = semantics.forces(M, args.world, f)
        print(f"{args.world} {'forces' if verdict else 'does not force'} {render(f)}")
        return 0 if verdict else 1
    truth = semantics.truth_set(M, f)
    _emit({"formula": render(f), "true_at": sorted(truth)})
    return 0 if truth == set(M.worlds) else 1


def cmd_validate(args) -> int:
    _need(args, "model")
    M = _load(args.model)
    if args.qt is not None and isinstance(M, semantics.GeneralModel):
        M = M.with_qt(args.qt)
    report = semantics.validate(M)
    if report.ok:
        print("ok")
        return 0
    for v in report.violations:
        print(f"violation {v.condition}: {json.dumps(v.witness)}")
    return 1


def _condition(args) -> conditions.Condition:
    _need(args, "condition")
    token = args.condition
    if args.n is not None and ":" not in token:
        token = f"{token}:{args.n}"
    try:
        return conditions.parse_condition(token)
    except ValueError as exc:
        raise UsageError(f"--condition: {exc}") from exc


def cmd_check_frame(args) -> int:
    _need(args, "model")
    M = _load(args.model).frame()
    c = _condition(args)
    if c.ordinary != isinstance(M, semantics.OrdinaryModel):
        raise UsageError(f"--condition {c} does not apply to a {M.kind} model")
    verdict = conditions.check(M, c)
    out = {"condition": c.token, "holds": verdict.holds}
    if verdict.witness is not None:
        out["witness"] = verdict.witness
    if verdict.notes:
        out["refinement"] = verdict.notes
    _emit(out)
    return 0 if verdict.holds else 1


def _scheme(args):
    _need(args, "scheme")
    try:
        return proof.scheme(args.scheme)
    except KeyError:
        try:
            return parse(args.scheme)
        except FormulaSyntaxError as exc:
            raise UsageError(f"--scheme: not a catalog id and not a formula ({exc})") from exc


def cmd_frame_valid(args) -> int:
    _need(args, "model")
    M = _load(args.model).frame()
    sch = _scheme(args)
    kw = {} if args.max_valuations is None else {"max_valuations": args.max_valuations}
    verdict = semantics.frame_valid_scheme(M, sch, **kw)
    out = {"scheme": render(sch), "valid": verdict.valid}
    if not verdict.valid:
        out["valuation"] = verdict.valuation
        out["world"] = verdict.world
    _emit(out)
    return 0 if verdict.valid else 1


OPS = ("lift-singleton", "lift-monotone", "monotone-closure", "unravel")


def cmd_transform(args) -> int:
    _need(args, "op", "model", "output")
    M = _load(args.model)
    if args.op in ("lift-singleton", "lift-monotone") and not isinstance(M, semantics.OrdinaryModel):
        raise UsageError(f"--op {args.op} needs an ordinary model")
    if args.op in ("monotone-closure", "unravel") and not isinstance(M, semantics.GeneralModel):
        raise UsageError(f"--op {args.op} needs a gvs model")
    if args.op == "lift-singleton":
        out = transform.lift_singleton(M, args.qt or 6)
    elif args.op == "lift-monotone":
        out = transform.lift_monotone(M)
    elif args.op == "monotone-closure":
        out = transform.monotone_closure(M if args.qt is None else M.with_qt(args.qt))
    else:
        U = transform.unravel(M if args.qt is None else M.with_qt(args.qt))
        out = U.model
        map_path = Path(args.output).parent / "map.json"
        map_path.write_text(json.dumps(U.map_payload(), indent=2) + "\n")
    io.dump_model(out, args.output)
    print(f"wrote {args.output} ({len(out.worlds)} worlds)")
    return 0


def cmd_bisim(args) -> int:
    _need(args, "left", "right")
    A, B = _load(args.left), _load(args.right)
    if args.n is None:
        Z = equivalence.largest_bisimulation(A, B)
    else:
        Z = equivalence.n_bisimulation(A, B, args.n)[-1]
    pairs = sorted(Z)
    for x, y in pairs:
        print(f"{x} {y}")
    _write(args.output, {"pairs": [list(p) for p in pairs]})
    return 0 if pairs else 1


def cmd_filtrate(args) -> int:
    _need(args, "model", "seed_formulas")
    M = _load(args.model)
    if not isinstance(M, semantics.GeneralModel):
        raise UsageError("filtration needs a gvs model")
    seeds = [_formula(s) for s in args.seed_formulas.split(";") if s.strip()]
    gamma = adequate_set(close_seed(seeds))
    F = equivalence.filtrate(M, gamma)
    if args.output:
        io.dump_model(F.model, args.output)
        out = Path(args.output)
        classes = out.with_name(out.stem + ".classes.json")
        classes.write_text(json.dumps(F.members, indent=2) + "\n")
    _emit({"classes": F.members, "adequate_set_size": len(gamma)})
    return 0


def cmd_check_proof(args) -> int:
    if not args.proof:
        raise UsageError("a proof file is required")
    path = Path(args.proof)
    if not path.exists():
        raise UsageError(f"{path}: no such file")
    try:
        p = proof.load_proof(path)
        verdict = proof.check_proof(p, args.logic or p.logic)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{path}: {exc}") from exc
    if verdict.ok:
        print(f"accepted: {render(verdict.theorem)}")
        return 0
    print(f"rejected at step {verdict.failed_step}: {verdict.reason}")
    return 1


def _bounds(args) -> toolbench.SearchBounds:
    kw = {"max_worlds": args.max_worlds or 4, "qt": args.qt or 2}
    if args.max_valuations is not None:
        kw["max_valuations"] = args.max_valuations
    return toolbench.SearchBounds(**kw)


def _report_search(outcome, args) -> None:
    info = {"outcome": outcome.kind, "frames_examined": outcome.frames_examined}
    if outcome.found:
        info["world"] = outcome.world
        info.update(outcome.details)
        if args.output:
            io.dump_model(outcome.model, args.output)
            info["written"] = args.output
        else:
            info["model"] = io.model_to_json(outcome.model)
    _emit(info)


def cmd_search(args) -> int:
    _need(args, "formula")
    f = _formula(args.formula)
    logic = [t for t in (args.logic or "").replace("+", ",").split(",") if t.strip() and t.strip() != "IL"]
    try:
        outcome = toolbench.find_countermodel(f, logic, _bounds(args))
    except ValueError as exc:
        raise UsageError(f"--logic: {exc}") from exc
    _report_search(outcome, args)
    return {"witness": 1, "exhausted": 0}.get(outcome.kind, 2)


def cmd_separate(args) -> int:
    _need(args, "holds", "fails")
    try:
        outcome = toolbench.find_separating_frame(args.holds, args.fails, _bounds(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _report_search(outcome, args)
    return {"witness": 0, "exhausted": 1}.get(outcome.kind, 2)


COMMANDS = {
    "parse": cmd_parse,
    "check-model": cmd_check_model,
    "validate": cmd_validate,
    "check-frame": cmd_check_frame,
    "frame-valid": cmd_frame_valid,
    "transform": cmd_transform,
    "bisim": cmd_bisim,
    "filtrate": cmd_filtrate,
    "check-proof": cmd_check_proof,
    "search": cmd_search,
    "separate": cmd_separate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ilkit", description="Interpretability logic workbench.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--model")
        sp.add_argument("--left")
        sp.add_argument("--right")
        sp.add_argument("--world")
        sp.add_argument("--formula")
        sp.add_argument("--condition")
        sp.add_argument("--scheme")
        sp.add_argument("--logic")
        sp.add_argument("--qt", type=int, choices=range(1, 9))
        sp.add_argument("--n", type=int)
        sp.add_argument("--max-worlds", type=int)
        sp.add_argument("--max-valuations", type=int)
        sp.add_argument("--seed-formulas", "--seed", dest="seed_formulas")
        sp.add_argument("-o", "--output")
        if name == "transform":
            sp.add_argument("--op", choices=OPS)
        if name == "separate":
            sp.add_argument("--holds")
            sp.add_argument("--fails")
        if name == "check-proof":
            sp.add_argument("proof", nargs="?")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ilkit {args.command}: {exc}", file=sys.stderr)
        return 2
    except (ModelError, LimitExceeded, FormulaSyntaxError, ValueError, KeyError, OSError) as exc:
        print(f"ilkit {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
