"""JSON operator documents.

A document either lists the blocks explicitly::

    {"V": [[[0, 1], [1, 0]], ...], "T": [[[0, 0], [1, 0]], ...]}

with every entry a real number or an ``[re, im]`` pair, or names a
generator::

    {"generator": {"kind": "periodic_scalar", "potential": [0, 0], "periods": 2}}
    {"generator": {"kind": "random_admissible", "seed": 1, "dims": [2, 4, 2], "rank": 2}}

The schema ships with the package as ``operator_document.schema.json``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np

from .errors import ValidationError
from .operator import BlockJacobiOperator, require_valid
from .oracle import random_admissible
from .periodic import PeriodicScalarModel, build_periodic_scalar


@lru_cache(maxsize=1)
def document_schema() -> dict:
    text = resources.files(__package__).joinpath("operator_document.schema.json").read_text()
    return json.loads(text)


@dataclass
class OperatorDocument:
    """A parsed document: the operator plus the periodic model it came from, if any."""

    operator: BlockJacobiOperator
    model: PeriodicScalarModel | None = None
    name: str | None = None


def _matrix(rows, label):
    def entry(x):
        return complex(x[0], x[1]) if isinstance(x, list) else complex(x)

    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValidationError(f"{label}: ragged rows")
    return np.array([[entry(x) for x in r] for r in rows], dtype=complex)


def parse_document(data) -> OperatorDocument:
    """Validate a decoded JSON document and build its operator.

    Raises
    ------
    ValidationError
        On schema violations, inconsistent shapes or a non-Hermitian block.
    """
    try:
        jsonschema.validate(data, document_schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"document invalid at {path}: {exc.message}") from None
    name = data.get("name")
    gen = data.get("generator")
    model = None
    if gen is None:
        V = [_matrix(v, f"V_{i + 1}") for i, v in enumerate(data["V"])]
        T = [_matrix(t, f"T_{i + 2}") for i, t in enumerate(data["T"])]
        op = BlockJacobiOperator(tuple(V), tuple(T))
    elif gen["kind"] == "periodic_scalar":
        model = PeriodicScalarModel(tuple(gen["potential"]), gen["periods"])
        op = build_periodic_scalar(model)
    else:
        try:
            op = random_admissible(gen["seed"], rank=gen["rank"], dims=gen["dims"],
                                   scale=gen.get("scale", 1.0))
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
    if "dims" in data and tuple(data["dims"]) != op.dims:
        raise ValidationError(f"declared dims {data['dims']} do not match blocks {list(op.dims)}")
    require_valid(op)
    return OperatorDocument(op, model, name)


def loads(text: str) -> OperatorDocument:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON: {exc}") from None
    return parse_document(data)


def load(path) -> OperatorDocument:
    with open(path) as fh:
        return loads(fh.read())


def _encode(m):
    m = np.asarray(m)
    if np.all(m.imag == 0):
        return [[float(x) for x in row] for row in m.real]
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def to_document(op: BlockJacobiOperator, name: str | None = None) -> dict:
    """Explicit-block document for ``op``; round-trips through :func:`parse_document`."""
    doc = {"dims": list(op.dims), "V": [_encode(v) for v in op.V], "T": [_encode(t) for t in op.T]}
    if name is not None:
        doc["name"] = name
    return doc


def dumps(op: BlockJacobiOperator, name: str | None = None) -> str:
    return json.dumps(to_document(op, name), sort_keys=True)
