"""JSON input files: loading with positioned diagnostics, schema checks, model building."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import jsonschema

from .errors import InputError
from .event_tree import AdaptedVectorProcess, EventTree, validate_tree
from .markets import MarketModel, from_bid_ask, from_cost_process, from_currency_costs, from_polyhedra

NUMBER = {"anyOf": [{"type": "number"}, {"type": "string", "pattern": r"^\s*-?\d+(\.\d*)?(/\d+)?\s*$"}]}
VECTOR = {"type": "array", "items": NUMBER, "minItems": 1}
NODE_ID = {"type": ["integer", "string"]}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["tree", "model"],
    "properties": {
        "d": {"type": "integer", "minimum": 1},
        "tree": {
            "type": "object",
            "required": ["nodes"],
            "properties": {
                "nodes": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["id"],
                        "properties": {
                            "id": NODE_ID,
                            "parent": {"type": ["integer", "string", "null"]},
                            "time": {"type": "integer", "minimum": 0},
                            "p": NUMBER,
                        },
                    },
                }
            },
        },
        "model": {
            "type": "object",
            "required": ["kind", "per_node"],
            "properties": {
                "kind": {"enum": ["bid_ask", "cost_process", "currency_costs", "explicit_polyhedra"]},
                "per_node": {"type": "object", "minProperties": 1},
            },
        },
    },
}

PROCESS_SCHEMA = {"type": "object", "additionalProperties": VECTOR}


def _where(err: jsonschema.ValidationError) -> str:
    path = "/".join(str(p) for p in err.absolute_path)
    return path or "<top level>"


def load_json(path: str | Path) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _validate(doc: Any, schema: dict, name: str) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        raise InputError(f"{name}: field {_where(exc)}: {exc.message}") from exc


def canonical_digest(obj: Any) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return "sha256:" + hashlib.sha256(blob).hexdigest()


def build_tree(doc: dict) -> EventTree:
    return validate_tree(doc["tree"]["nodes"], d=doc.get("d"))


def build_model(doc: dict, name: str = "model") -> MarketModel:
    _validate(doc, MODEL_SCHEMA, name)
    tree = build_tree(doc)
    kind = doc["model"]["kind"]
    per_node = doc["model"]["per_node"]
    try:
        if kind == "bid_ask":
            return from_bid_ask(tree, per_node)
        if kind == "cost_process":
            return from_cost_process(tree, per_node)
        if kind == "currency_costs":
            if "d" not in doc:
                raise InputError(f"{name}: field d is required for currency_costs")
            return from_currency_costs(tree, per_node, d=doc["d"])
        return from_polyhedra(tree, per_node, d=doc.get("d"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise InputError(f"{name}: {exc}") from exc
        raise InputError(f"{name}: field model/per_node: {exc}") from exc


def build_process(doc: Any, model: MarketModel, name: str) -> AdaptedVectorProcess:
    """``{node_id: [v_1..v_d]}``; unlisted nodes are zero. Keys match ids or their string form."""
    _validate(doc, PROCESS_SCHEMA, name)
    lookup = {str(nid): nid for nid in model.tree.ids}
    mapping = {}
    for key, vec in doc.items():
        if key not in lookup:
            raise InputError(f"{name}: field {key}: unknown node id")
        mapping[lookup[key]] = vec
    try:
        return AdaptedVectorProcess.from_mapping(model.tree, mapping, model.d, default=[0.0] * model.d)
    except InputError as exc:
        raise InputError(f"{name}: {exc}") from exc


def process_to_json(proc: AdaptedVectorProcess | None):
    if proc is None:
        return None
    return {str(k): v for k, v in proc.to_mapping().items()}


def aux_to_json(model: MarketModel, aux: dict | None):
    if not aux:
        return None
    return {str(model.tree.ids[k]): [float(v) for v in vals] for k, vals in aux.items()}


def aux_from_json(model: MarketModel, doc: dict | None) -> dict | None:
    if doc is None:
        return None
    lookup = {str(nid): k for k, nid in enumerate(model.tree.ids)}
    return {lookup[key]: vals for key, vals in doc.items()}
