import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockjacobi import ValidationError, random_admissible
from blockjacobi.io import document_schema, dumps, load, loads, parse_document, to_document


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_round_trip(seed):
    op = random_admissible(seed, N=3, rank=1 + seed % 2)
    back = loads(dumps(op, name="x")).operator
    for a, b in zip(op.V + op.T, back.V + back.T):
        np.testing.assert_array_equal(a, b)


def test_real_blocks_are_written_as_numbers():
    doc = to_document(loads('{"V": [[[1]], [[2]]], "T": [[[0.5]]]}').operator)
    assert doc["V"][0] == [[1.0]]


def test_periodic_generator_keeps_the_model():
    doc = loads('{"generator": {"kind": "periodic_scalar", "potential": [0, 1], "periods": 3}}')
    assert doc.model.L == 2 and doc.operator.N == 3


def test_random_generator_is_reproducible():
    text = '{"generator": {"kind": "random_admissible", "seed": 4, "dims": [2, 4, 2], "rank": 2}}'
    a, b = loads(text).operator, loads(text).operator
    assert a.dims == (2, 4, 2)
    np.testing.assert_array_equal(a.V[1], b.V[1])


@pytest.mark.parametrize("text", [
    "{not json",
    '{"V": [[[0]]]}',
    '{"V": [[[0]], [[0]]], "T": [[[1]]], "generator": {"kind": "periodic_scalar", "potential": [0, 0], "periods": 2}}',
    '{"V": [[[0]], [[0]]], "T": [[[1]]], "extra": 1}',
    '{"V": [[[0]], [[0]]], "T": [[["a"]]]}',
    '{"V": [[[0, 1], [0, 0]], [[0]]], "T": [[[1], [0]]]}',
    '{"V": [[[0]], [[0]]], "T": [[[1]]], "dims": [1, 2]}',
    '{"V": [[[0, 1], [1]], [[0]]], "T": [[[1]]]}',
    '{"generator": {"kind": "random_admissible", "seed": 1, "dims": [2, 3, 2], "rank": 2}}',
    '{"generator": {"kind": "periodic_scalar", "potential": [0, 0], "periods": 1}}',
])
def test_invalid_documents(text):
    with pytest.raises(ValidationError):
        loads(text)


def test_complex_entries():
    doc = parse_document({"V": [[[0]], [[0]]], "T": [[[[0, 1]]]]})
    assert doc.operator.T[0][0, 0] == 1j


def test_schema_ships_with_package():
    assert document_schema()["type"] == "object"


def test_load_from_file(tmp_path):
    p = tmp_path / "op.json"
    p.write_text(json.dumps({"V": [[[0]], [[0]]], "T": [[[1]]]}))
    assert load(p).operator.N == 2
