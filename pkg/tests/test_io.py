import json
import math

import numpy as np
import pytest
import scipy.sparse as sp

from decayproj import io
from decayproj.matrix import SparseHermitian
from decayproj.models import gapped_random, kron_2d

from .conftest import random_hermitian


@pytest.mark.parametrize("complex_", [False, True])
def test_matrix_market_roundtrip(tmp_path, rng, complex_):
    A = random_hermitian(rng, 25, m=3, complex_=complex_) * 1e-3 + np.diag(rng.standard_normal(25)) * 1e5
    H = SparseHermitian.from_dense(A)
    path = tmp_path / "h.mtx"
    io.write_matrix_market(path, H)
    header = path.read_text().splitlines()[0]
    assert ("complex hermitian" if complex_ else "real symmetric") in header
    B = io.read_matrix_market(path).toarray()
    np.testing.assert_array_equal(B, A)


def test_matrix_market_one_triangle_stored(tmp_path):
    H = kron_2d(4)
    path = tmp_path / "k.mtx"
    io.write_matrix_market(path, H)
    lines = [l for l in path.read_text().splitlines() if not l.startswith("%")]
    n, _, nnz = map(int, lines[0].split())
    assert n == 16 and nnz == H.upper.nnz


def test_matrix_market_dense_input_and_comment(tmp_path):
    H, _ = gapped_random(10, 1, 0.5, seed=0)
    path = tmp_path / "d.mtx"
    io.write_matrix_market(path, H.toarray(), comment='{"kind": "gapped_random"}')
    assert "gapped_random" in path.read_text()
    np.testing.assert_array_equal(io.read_matrix_market(path).toarray(), H.toarray())


def test_general_roundtrip(tmp_path, rng):
    Z = np.triu(rng.standard_normal((12, 12)))
    path = tmp_path / "z.mtx"
    io.write_general(path, Z)
    np.testing.assert_array_equal(io.read_general(path), Z)
    io.write_general(path, sp.csr_array(Z))
    np.testing.assert_array_equal(io.read_general(path), Z)


def test_json_schema_and_cleaning(tmp_path):
    rec = {"a": np.float64(1.5), "b": np.int64(3), "c": np.array([1, 2]), "d": np.bool_(True), "e": math.inf}
    doc = io.write_json(tmp_path / "r.json", rec)
    back = json.loads((tmp_path / "r.json").read_text())
    assert back == doc
    assert list(back)[0] == "schema_version" and back["schema_version"] == io.SCHEMA_VERSION
    assert back["a"] == 1.5 and back["b"] == 3 and back["c"] == [1, 2] and back["d"] is True
    assert back["e"] == "inf"
    assert json.loads(io.dumps_json({"x": 1}))["schema_version"] == io.SCHEMA_VERSION


def test_csv_format(tmp_path):
    path = tmp_path / "t.csv"
    vals = [0.1, 1e-300, 12345.678, 2.0 / 3.0]
    io.write_csv(path, ["k", "value"], [(np.int64(i), np.float64(v)) for i, v in enumerate(vals)])
    raw = path.read_bytes()
    assert raw.count(b"\r\n") == len(vals) + 1
    rows = io.read_csv(path)
    assert list(rows[0]) == ["schema_version", "k", "value"]
    assert all(r["schema_version"] == io.SCHEMA_VERSION for r in rows)
    assert [float(r["value"]) for r in rows] == vals
    assert rows[1]["value"] == "1e-300"
