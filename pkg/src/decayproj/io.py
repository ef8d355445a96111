"""Matrix Market, JSON and CSV input/output.

Every JSON and CSV document written here carries ``schema_version``.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .matrix import SparseHermitian, as_hermitian

SCHEMA_VERSION = "1.0"


def write_matrix_market(path, A, comment=""):
    """Write a Hermitian matrix in coordinate format, one triangle stored.

    Real matrices get the ``real symmetric`` header and complex ones
    ``complex hermitian``.  Values are written with 17 significant digits so
    a round trip reproduces every double exactly.
    """
    H = as_hermitian(A) if not isinstance(A, np.ndarray) else SparseHermitian.from_dense(A, check=False)
    F = H.full()
    symmetry = "symmetric" if H.is_real else "hermitian"
    field = "real" if H.is_real else "complex"
    scipy.io.mmwrite(str(path), sp.coo_array(F), comment=comment, field=field, precision=17, symmetry=symmetry)


def write_general(path, A, comment=""):
    """Write a general (non-symmetric) matrix, e.g. a triangular factor."""
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    field = "complex" if np.iscomplexobj(A) else "real"
    scipy.io.mmwrite(str(path), sp.coo_array(A), comment=comment, field=field, precision=17, symmetry="general")


def read_general(path):
    M = scipy.io.mmread(str(path))
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def read_matrix_market(path):
    """Read a symmetric or Hermitian Matrix Market file into a SparseHermitian."""
    M = scipy.io.mmread(str(path))
    if not sp.issparse(M):
        M = sp.csr_array(np.asarray(M))
    return SparseHermitian.from_sparse(sp.csr_array(M))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(path, record):
    """Write ``record`` as JSON with ``schema_version`` prepended."""
    doc = {"schema_version": SCHEMA_VERSION, **_clean(record)}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    return doc


def dumps_json(record):
    return json.dumps({"schema_version": SCHEMA_VERSION, **_clean(record)}, indent=2)


def write_csv(path, header, rows):
    """Write an RFC-4180 CSV whose first column is ``schema_version``.

    Floats use ``repr``-style shortest round-trip formatting (``.`` decimal,
    ``e`` exponent).
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["schema_version", *header])
        for row in rows:
            w.writerow([SCHEMA_VERSION, *(_fmt(v) for v in row)])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
