"""JSON model files."""
from __future__ import annotations

import json
from pathlib import Path

from .semantics import GeneralModel, ModelError, OrdinaryModel

_KEYS = {"kind", "qt", "worlds", "R", "S", "valuation"}
_S_KEYS = {"w", "from", "to"}


def _str_list(value, what: str) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
        raise ModelError(f"{what} must be a list of strings")
    return value


def model_from_json(data: dict):
    if not isinstance(data, dict):
        raise ModelError("model file must hold a JSON object")
    unknown = set(data) - _KEYS
    if unknown:
        raise ModelError(f"unknown keys in model: {sorted(unknown)}")
    kind = data.get("kind")
    if kind not in ("gvs", "ordinary"):
        raise ModelError(f"kind must be 'gvs' or 'ordinary', got {kind!r}")
    if kind == "ordinary" and "qt" in data:
        raise ModelError("'qt' is only allowed for gvs models")
    worlds = _str_list(data.get("worlds", []), "worlds")
    if len(set(worlds)) != len(worlds):
        raise ModelError("duplicate world ids")
    R = []
    for pair in data.get("R", []):
        R.append(tuple(_str_list(pair, "R entry")))
        if len(R[-1]) != 2:
            raise ModelError(f"R entry must be a pair: {pair}")
    triples = []
    for entry in data.get("S", []):
        if not isinstance(entry, dict) or set(entry) != _S_KEYS:
            raise ModelError(f"S entry needs exactly keys w, from, to: {entry}")
        w, u, to = entry["w"], entry["from"], entry["to"]
        if kind == "ordinary":
            if not isinstance(to, str):
                raise ModelError(f"ordinary S target must be a single world: {entry}")
        else:
            to = frozenset(_str_list(to, "gvs S target"))
            if not to:
                raise ModelError(f"gvs S target must be nonempty: {entry}")
        triples.append((w, u, to))
    valuation = data.get("valuation", {})
    if not isinstance(valuation, dict):
        raise ModelError("valuation must be an object")
    val = {p: _str_list(ws, f"valuation of {p}") for p, ws in valuation.items()}
    if kind == "ordinary":
        return OrdinaryModel(worlds, R, triples, val)
    qt = data.get("qt", 2)
    if not isinstance(qt, int):
        raise ModelError("qt must be an integer")
    return GeneralModel(worlds, R, triples, val, qt)


def model_to_json(M) -> dict:
    out: dict = {"kind": M.kind}
    if isinstance(M, GeneralModel):
        out["qt"] = M.qt
    out["worlds"] = list(M.worlds)
    out["R"] = [list(p) for p in sorted(M.R)]
    S = []
    for w in M.worlds:
        if isinstance(M, GeneralModel):
            for u, V in sorted(M.S[w], key=lambda p: (p[0], sorted(p[1]))):
                S.append({"w": w, "from": u, "to": sorted(V)})
        else:
            for u, v in sorted(M.S[w]):
                S.append({"w": w, "from": u, "to": v})
    out["S"] = S
    out["valuation"] = {p: sorted(ws) for p, ws in M.valuation.items()}
    return out


def load_model(path: str | Path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON ({exc})") from exc
    return model_from_json(data)


def dump_model(M, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_json(M), indent=2) + "\n")
