r"""Hermitian matrices with a sparsity graph: storage, distances, truncation.

A :class:`SparseHermitian` keeps the upper triangle (diagonal included) in
CSR form and mirrors it on access.  The symmetric closure of the stored
off-diagonal positions is the adjacency graph :math:`G` whose shortest-path
metric drives the graph-distance versions of every decay bound.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .errors import PreconditionError

#: Distance sentinel for unreachable nodes or nodes beyond the BFS radius.
UNREACHABLE = np.iinfo(np.int64).max // 4


def _freeze(a):
    a = np.asarray(a)
    a.flags.writeable = False
    return a


class SparseHermitian:
    """Hermitian matrix stored as its upper triangle.

    Parameters
    ----------
    upper : sparse matrix or ndarray, shape (n, n)
        Upper-triangular part of the matrix, diagonal included.  Entries
        below the diagonal are ignored.
    bandwidth_hint : int, optional
        Declared half-bandwidth ``m``; checked against the stored pattern.
    """

    def __init__(self, upper, bandwidth_hint=None):
        U = sp.csr_array(sp.triu(sp.csr_array(upper), format="csr"))
        if U.shape[0] != U.shape[1]:
            raise ValueError(f"matrix must be square, got {U.shape}")
        U.sum_duplicates()
        U.sort_indices()
        if np.iscomplexobj(U.data):
            rows = np.repeat(np.arange(U.shape[0]), np.diff(U.indptr))
            on_diag = rows == U.indices
            if on_diag.any() and np.max(np.abs(U.data[on_diag].imag)) > 1e-12 * max(
                1.0, np.max(np.abs(U.data))
            ):
                raise ValueError("diagonal entries of a Hermitian matrix must be real")
            data = U.data.copy()
            data[on_diag] = data[on_diag].real
            if not np.any(data.imag):
                data = data.real
            U = sp.csr_array((data, U.indices, U.indptr), shape=U.shape)
        if bandwidth_hint is not None:
            bandwidth_hint = int(bandwidth_hint)
            if bandwidth_hint < 0:
                raise ValueError("bandwidth_hint must be nonnegative")
        for arr in (U.data, U.indices, U.indptr):
            arr.flags.writeable = False
        self._upper = U
        self._full = None
        self.bandwidth_hint = bandwidth_hint
        if bandwidth_hint is not None and self.bandwidth > bandwidth_hint:
            raise ValueError(
                f"stored entry at distance {self.bandwidth} exceeds bandwidth_hint={bandwidth_hint}"
            )

    # -- construction -----------------------------------------------------
    @classmethod
    def from_dense(cls, A, tol=0.0, bandwidth_hint=None, check=True):
        """Build from a dense Hermitian array, dropping entries with ``|a| <= tol``."""
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"expected a square 2-D array, got shape {A.shape}")
        if check:
            scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
            if np.max(np.abs(A - A.conj().T), initial=0.0) > 1e-10 * scale:
                raise ValueError("matrix is not Hermitian")
        U = np.triu(A)
        if tol > 0:
            U = np.where(np.abs(U) > tol, U, 0)
        return cls(sp.csr_array(U), bandwidth_hint=bandwidth_hint)

    @classmethod
    def from_sparse(cls, A, bandwidth_hint=None, check=True):
        """Build from any scipy sparse matrix holding the full Hermitian matrix."""
        A = sp.csr_array(A)
        if check:
            D = A - A.conj().T
            scale = max(1.0, float(np.max(np.abs(A.data), initial=0.0)))
            if D.nnz and np.max(np.abs(D.data)) > 1e-10 * scale:
                raise ValueError("matrix is not Hermitian")
        return cls(A, bandwidth_hint=bandwidth_hint)

    @classmethod
    def from_diagonals(cls, diagonals, bandwidth_hint=None):
        """Build a banded matrix from ``diagonals[k]`` = the ``k``-th superdiagonal."""
        n = len(diagonals[0])
        offsets = list(range(len(diagonals)))
        U = sp.diags_array([np.asarray(d) for d in diagonals], offsets=offsets, shape=(n, n))
        return cls(U, bandwidth_hint=bandwidth_hint if bandwidth_hint is not None else len(diagonals) - 1)

    # -- access -----------------------------------------------------------
    @property
    def n(self):
        return self._upper.shape[0]

    @property
    def shape(self):
        return self._upper.shape

    @property
    def dtype(self):
        return self._upper.dtype

    @property
    def upper(self):
        """Upper triangle as a read-only CSR array."""
        return self._upper

    @property
    def is_real(self):
        return not np.iscomplexobj(self._upper.data)

    @property
    def nnz(self):
        """Number of stored entries of the full (mirrored) matrix."""
        return self.full().nnz

    def full(self):
        """Full Hermitian matrix as a CSR array (cached)."""
        if self._full is None:
            U = self._upper
            diag = sp.diags_array(U.diagonal(), offsets=0, shape=U.shape)
            F = sp.csr_array(U + U.conj().T - diag)
            F.sort_indices()
            self._full = F
        return self._full

    def toarray(self):
        return self.full().toarray()

    def entry(self, i, j):
        if i <= j:
            return self._upper[i, j]
        return np.conj(self._upper[j, i])

    def diagonal(self):
        return self._upper.diagonal()

    @property
    def bandwidth(self):
        """Actual half-bandwidth of the stored pattern."""
        U = self._upper.tocoo()
        if U.nnz == 0:
            return 0
        return int(np.max(U.col - U.row))

    def pattern(self):
        """Symmetric boolean adjacency matrix (off-diagonal stored positions)."""
        F = self.full().tocoo()
        off = F.row != F.col
        n = self.n
        return sp.csr_array(
            (np.ones(int(off.sum()), dtype=bool), (F.row[off], F.col[off])), shape=(n, n)
        )

    def __matmul__(self, other):
        return self.full() @ other

    def __repr__(self):
        return f"SparseHermitian(n={self.n}, nnz={self.nnz}, bandwidth={self.bandwidth})"


def as_dense(A):
    """Dense ndarray view of a SparseHermitian, sparse matrix or array."""
    if isinstance(A, SparseHermitian):
        return A.toarray()
    if sp.issparse(A):
        return A.toarray()
    return np.asarray(A)


def as_hermitian(A):
    if isinstance(A, SparseHermitian):
        return A
    if sp.issparse(A):
        return SparseHermitian.from_sparse(A)
    return SparseHermitian.from_dense(A)


def _full_sparse(A):
    if isinstance(A, SparseHermitian):
        return A.full()
    if sp.issparse(A):
        return sp.csr_array(A)
    return None


# ---------------------------------------------------------------------------
# spectral data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralModel:
    """Spectral interval, gap edges and occupation data of a Hamiltonian.

    ``gamma`` is the absolute gap ``eps_plus - eps_minus`` of whatever matrix
    the model describes; bounds consume it as-is.
    """

    lo: float
    hi: float
    mu: float
    eps_minus: float | None = None
    eps_plus: float | None = None
    beta: float | None = None
    n_e: int | None = None

    def __post_init__(self):
        if not self.lo < self.hi:
            raise PreconditionError("SpectralModel", f"need lo < hi, got [{self.lo}, {self.hi}]")
        if (self.eps_minus is None) != (self.eps_plus is None):
            raise PreconditionError("SpectralModel", "gap edges must be given together")
        if self.eps_minus is not None:
            if not (self.lo <= self.eps_minus < self.mu < self.eps_plus <= self.hi):
                raise PreconditionError(
                    "SpectralModel",
                    "need lo <= eps_minus < mu < eps_plus <= hi, got "
                    f"{self.lo}, {self.eps_minus}, {self.mu}, {self.eps_plus}, {self.hi}",
                )
        if self.beta is not None and self.beta <= 0:
            raise PreconditionError("SpectralModel", "beta must be positive")

    @property
    def has_gap(self):
        return self.eps_minus is not None

    @property
    def gamma(self):
        if not self.has_gap:
            return None
        return self.eps_plus - self.eps_minus

    @property
    def interval(self):
        return (self.lo, self.hi)

    def mapped(self, amap):
        """The same model expressed in the coordinates of ``amap(H)``."""
        f = amap.apply
        edges = (None, None) if not self.has_gap else (f(self.eps_minus), f(self.eps_plus))
        return SpectralModel(f(self.lo), f(self.hi), f(self.mu), *edges, beta=self.beta, n_e=self.n_e)

    @classmethod
    def from_eigenvalues(cls, eigenvalues, n_e, beta=None):
        """Model of a matrix with known spectrum and ``n_e`` occupied states."""
        w = np.sort(np.asarray(eigenvalues, dtype=float))
        if not 0 < n_e < len(w):
            raise PreconditionError("SpectralModel", "need 0 < n_e < n")
        em, ep = float(w[n_e - 1]), float(w[n_e])
        if not em < ep:
            raise PreconditionError("SpectralModel", "no gap between occupied and virtual states")
        return cls(float(w[0]), float(w[-1]), 0.5 * (em + ep), em, ep, beta=beta, n_e=n_e)


class AffineMap(NamedTuple):
    """``x -> scale * x + shift``."""

    scale: float
    shift: float

    def apply(self, x):
        return self.scale * x + self.shift

    def inverse(self, y):
        return (y - self.shift) / self.scale


def normalize(H, interval):
    r"""Shift and scale ``H`` so that ``interval`` maps onto :math:`[-1, 1]`.

    Returns ``(H_hat, amap)`` with
    :math:`\hat H = \frac{2}{hi-lo} H - \frac{lo+hi}{hi-lo} I`.
    """
    lo, hi = (float(v) for v in interval)
    if not hi > lo:
        raise PreconditionError("normalize", f"degenerate interval [{lo}, {hi}]")
    amap = AffineMap(2.0 / (hi - lo), -(lo + hi) / (hi - lo))
    H = as_hermitian(H)
    if amap == (1.0, 0.0):
        return H, amap
    U = amap.scale * H.upper
    if amap.shift != 0.0:
        U = U + amap.shift * sp.eye_array(H.n, format="csr")
    return SparseHermitian(U, bandwidth_hint=H.bandwidth_hint), amap


def gershgorin_interval(H):
    """Interval containing every Geršgorin disc of the Hermitian matrix ``H``."""
    F = _full_sparse(H)
    if F is None:
        F = sp.csr_array(np.asarray(H))
    d = F.diagonal().real
    radii = np.asarray(abs(F).sum(axis=1)).ravel() - np.abs(F.diagonal())
    return float(np.min(d - radii)), float(np.max(d + radii))


def _lanczos(F, steps, seed=0):
    n = F.shape[0]
    k = min(steps, n)
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.standard_normal(n)
    if np.iscomplexobj(F.data):
        v = v.astype(complex)
    v /= np.linalg.norm(v)
    V = np.zeros((n, k), dtype=v.dtype)
    alpha = np.zeros(k)
    beta = np.zeros(k)
    j_end = k
    for j in range(k):
        V[:, j] = v
        w = F @ v
        alpha[j] = np.real(np.vdot(v, w))
        w = w - alpha[j] * v - (beta[j - 1] * V[:, j - 1] if j > 0 else 0)
        # full reorthogonalization
        w -= V[:, : j + 1] @ (V[:, : j + 1].conj().T @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] <= 1e-12 * max(1.0, abs(alpha[j])):
            j_end = j + 1
            beta[j] = 0.0
            break
        v = w / beta[j]
    T = np.diag(alpha[:j_end]) + np.diag(beta[: j_end - 1], 1) + np.diag(beta[: j_end - 1], -1)
    theta, S = np.linalg.eigh(T)
    resid = np.abs(beta[j_end - 1] * S[-1, :])
    return theta, resid


def ritz_interval(H, steps=60):
    """Extreme Ritz values of ``H``: an inner estimate of the spectral interval."""
    F = _full_sparse(H)
    if F is None:
        F = sp.csr_array(np.asarray(H))
    if F.nnz == 0:
        return 0.0, 0.0
    theta, _ = _lanczos(F, steps)
    return float(theta[0]), float(theta[-1])


def spectral_interval(H, tol=0.05, steps=60):
    """Bracket the spectrum of ``H``.

    Runs a fixed number of Lanczos steps (full reorthogonalization) and, when
    both extreme Ritz residuals are below ``tol/4`` times the Ritz spread,
    returns the Ritz extremes widened by the residuals plus 1% of the spread.
    Otherwise, and as a clamp in every case, the Geršgorin interval is used.
    """
    g_lo, g_hi = gershgorin_interval(H)
    F = _full_sparse(H)
    if F is None:
        F = sp.csr_array(np.asarray(H))
    if F.shape[0] == 0 or F.nnz == 0:
        return g_lo, g_hi
    theta, resid = _lanczos(F, steps)
    width = theta[-1] - theta[0]
    if width <= 0:
        # Krylov space collapsed: scalar multiple of the identity on the start vector
        return g_lo, g_hi
    if max(resid[0], resid[-1]) > 0.25 * tol * width:
        return g_lo, g_hi
    pad = 0.01 * width
    lo = theta[0] - resid[0] - pad
    hi = theta[-1] + resid[-1] + pad
    return float(max(lo, g_lo)), float(min(hi, g_hi))


# ---------------------------------------------------------------------------
# graph distances and truncation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphDistance:
    """BFS distances from a set of source nodes.

    ``table[s, j]`` is the distance from ``sources[s]`` to ``j``; values
    beyond ``radius`` (or unreachable) hold :data:`UNREACHABLE`.
    """

    sources: np.ndarray
    table: np.ndarray
    radius: int
    max_degree: int
    _index: dict = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        self._index.update({int(s): k for k, s in enumerate(self.sources)})

    def d(self, i, j):
        k = self._index.get(int(i))
        if k is not None:
            return int(self.table[k, j])
        k = self._index.get(int(j))
        if k is not None:
            return int(self.table[k, i])
        raise KeyError(f"neither {i} nor {j} is a BFS source")

    def row(self, i):
        return self.table[self._index[int(i)]]

    def covers(self, rows):
        return all(int(r) in self._index for r in rows)


def graph_distances(H, sources=None, radius=None):
    """Breadth-first distances in the adjacency graph of ``H``.

    Parameters
    ----------
    sources : array_like of int, optional
        Source nodes (default: all nodes).
    radius : int, optional
        Search radius; farther nodes are marked :data:`UNREACHABLE`.
    """
    H = as_hermitian(H)
    G = H.pattern()
    n = H.n
    if sources is None:
        sources = np.arange(n)
    sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    limit = np.inf if radius is None else float(radius)
    dist = dijkstra(G, directed=False, unweighted=True, indices=sources, limit=limit)
    dist = np.atleast_2d(dist)
    table = np.full(dist.shape, UNREACHABLE, dtype=np.int64)
    finite = np.isfinite(dist)
    table[finite] = dist[finite].astype(np.int64)
    degrees = np.diff(G.indptr)
    return GraphDistance(
        sources=_freeze(sources),
        table=_freeze(table),
        radius=UNREACHABLE if radius is None else int(radius),
        max_degree=int(degrees.max(initial=0)),
    )


def _band_mask_coo(M, m):
    return np.abs(M.row - M.col) <= m


def truncate_band(A, m):
    """Keep entries with ``|i - j| <= m``.

    This is the Frobenius-orthogonal projection onto ``m``-banded matrices.
    The result has the same type as ``A`` (SparseHermitian or ndarray).
    """
    m = int(m)
    if m < 0:
        raise PreconditionError("truncate_band", "m must be nonnegative")
    if isinstance(A, SparseHermitian):
        U = A.upper.tocoo()
        keep = _band_mask_coo(U, m)
        Ut = sp.csr_array((U.data[keep], (U.row[keep], U.col[keep])), shape=U.shape)
        return SparseHermitian(Ut, bandwidth_hint=m if A.bandwidth_hint is None else min(m, A.bandwidth_hint))
    A = np.asarray(A)
    n = A.shape[0]
    idx = np.arange(n)
    mask = np.abs(idx[:, None] - idx[None, :]) <= m
    return np.where(mask, A, 0)


def truncate_graph(A, d, m):
    """Keep entries with graph distance ``d(i, j) <= m``.

    ``d`` must hold distances to radius at least ``m`` from every row that
    carries entries of ``A``.
    """
    m = int(m)
    if m < 0:
        raise PreconditionError("truncate_graph", "m must be nonnegative")
    if d.radius < m:
        raise PreconditionError("truncate_graph", f"distance radius {d.radius} < m = {m}")
    if isinstance(A, SparseHermitian):
        U = A.upper.tocoo()
        rows = np.unique(U.row)
        if not d.covers(rows):
            raise PreconditionError("truncate_graph", "distances missing for some rows")
        dist = np.array([d.d(i, j) for i, j in zip(U.row, U.col)], dtype=np.int64)
        keep = dist <= m
        Ut = sp.csr_array((U.data[keep], (U.row[keep], U.col[keep])), shape=U.shape)
        return SparseHermitian(Ut)
    A = np.asarray(A)
    n = A.shape[0]
    if not d.covers(range(n)):
        raise PreconditionError("truncate_graph", "distances missing for some rows")
    order = np.array([d._index[i] for i in range(n)])
    mask = d.table[order] <= m
    return np.where(mask, A, 0)


class Norms(NamedTuple):
    one_norm: float
    inf_norm: float
    frobenius: float
    two_norm_bound: float


def norms(A):
    r"""1-, ∞- and Frobenius norms plus the bound :math:`\sqrt{\|A\|_1\|A\|_\infty} \ge \|A\|_2`."""
    F = _full_sparse(A)
    if F is not None:
        absF = abs(F)
        one = float(np.max(absF.sum(axis=0), initial=0.0))
        inf = float(np.max(absF.sum(axis=1), initial=0.0))
        fro = float(np.sqrt(np.sum(np.abs(F.data) ** 2)))
    else:
        A = np.asarray(A)
        absA = np.abs(A)
        one = float(absA.sum(axis=0).max(initial=0.0))
        inf = float(absA.sum(axis=1).max(initial=0.0))
        fro = float(np.linalg.norm(A, "fro"))
    return Norms(one, inf, fro, float(np.sqrt(one * inf)))


def band_distance_matrix(n):
    """``|i - j|`` for ``0 <= i, j < n``."""
    idx = np.arange(n)
    return np.abs(idx[:, None] - idx[None, :])
