r"""Exactly solvable Hamiltonians and synthetic gapped families.

The 1D model is the path-graph matrix

.. math::

    H_n = \operatorname{tridiag}(\tfrac12, 0, \tfrac12),\qquad
    \lambda_k = \cos\frac{k\pi}{n+1},\qquad
    [v_k]_j = \sqrt{\tfrac{2}{n+1}}\sin\frac{jk\pi}{n+1},

whose spectral projector at :math:`\mu = 0` is known in closed form.  Random
gapped families draw a spectrum in :math:`[-1,-a]\cup[a,1]`, conjugate by a
Haar orthogonal matrix and reduce back to band form with Householder
reflections.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import ConvergenceError, PreconditionError
from .matrix import SparseHermitian, SpectralModel

KINDS = ("toeplitz1d", "kron2d", "gapped_random", "synthetic_decay")


def rng_from_seed(seed):
    """Pinned generator: Philox counter-based bit generator, 64-bit keys."""
    if seed is None:
        raise PreconditionError("rng", "a seed is required")
    return np.random.Generator(np.random.Philox(int(seed)))


def _require_even(op, n):
    n = int(n)
    if n < 2 or n % 2:
        raise PreconditionError(op, f"n must be a positive even integer, got {n}")
    return n


# ---------------------------------------------------------------------------
# 1D Toeplitz model
# ---------------------------------------------------------------------------


def toeplitz_1d(n):
    """Tridiagonal ``H_n`` with zero diagonal and off-diagonals ``1/2``."""
    n = _require_even("toeplitz_1d", n)
    return SparseHermitian.from_diagonals([np.zeros(n), np.full(n - 1, 0.5)])


def toeplitz_eigenpairs(n):
    """Closed-form eigenvalues (descending) and eigenvectors of ``H_n``."""
    k = np.arange(1, n + 1)
    theta = np.pi / (n + 1)
    w = np.cos(k * theta)
    V = np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(k, k) * theta)
    return w, V


def toeplitz_gap(n):
    r"""Gap :math:`2\cos(n\pi/(2(n+1)))` of ``H_n`` around zero."""
    n = _require_even("toeplitz_gap", n)
    return 2.0 * math.cos(n * math.pi / (2 * (n + 1)))


def toeplitz_projector_exact(n):
    r"""Projector of ``H_n`` onto its negative eigenspace, from cosine sums.

    With :math:`\theta = \pi/(n+1)` and the occupied indices
    :math:`k = n/2+1,\dots,n`,

    .. math::

        [P_n]_{ij} = \frac{1}{n+1}\bigl(G(i-j) - G(i+j)\bigr),\qquad
        G(s) = \sum_{k=n/2+1}^{n}\cos(sk\theta).
    """
    n = _require_even("toeplitz_projector_exact", n)
    theta = np.pi / (n + 1)
    k = np.arange(n // 2 + 1, n + 1)
    s = np.arange(0, 2 * n + 1)
    G = np.empty(s.size)
    # chunk to bound memory at large n
    for start in range(0, s.size, 512):
        ss = s[start : start + 512]
        G[start : start + 512] = np.cos(np.outer(ss, k) * theta).sum(axis=1)
    idx = np.arange(1, n + 1)
    P = (G[np.abs(idx[:, None] - idx[None, :])] - G[idx[:, None] + idx[None, :]]) / (n + 1)
    # exact zeros at even offsets and exact 1/2 on the diagonal by symmetry
    return P


def toeplitz_projector_limit(i, j):
    r"""Entry of the projector of the semi-infinite path at :math:`\mu=0` (1-based).

    .. math::

        P_{ij} = \frac{1}{\pi}\Bigl[\frac{(-1)^{(i+j-1)/2}}{i+j} + \frac{(-1)^{(i-j+1)/2}}{i-j}\Bigr]

    for odd ``i - j``; ``1/2`` on the diagonal and ``0`` at nonzero even offsets.
    """
    i, j = int(i), int(j)
    if i < 1 or j < 1:
        raise PreconditionError("toeplitz_projector_limit", "indices are 1-based")
    if i == j:
        return 0.5
    if (i - j) % 2 == 0:
        return 0.0
    s1 = -1.0 if ((i + j - 1) // 2) % 2 else 1.0
    s2 = -1.0 if ((i - j + 1) // 2) % 2 else 1.0
    return (s1 / (i + j) + s2 / (i - j)) / math.pi


def toeplitz_fd_limit(i, j, beta, tol=1e-10, max_points=2**20):
    r"""Positive-temperature limit entry, 1-based indices.

    .. math::

        \int_0^1 \frac{\cos((i-j)\pi x) - \cos((i+j)\pi x)}{1 + e^{\beta\cos\pi x}}\,dx

    The integrand extends to a smooth even periodic function, so the
    trapezoid rule converges geometrically; points are doubled until two
    successive estimates differ by less than ``tol``.
    """
    if not beta >= 0:
        raise PreconditionError("toeplitz_fd_limit", "beta must be nonnegative")
    from .bounds import fermi_dirac

    def trap(N):
        x = np.linspace(0.0, 1.0, N + 1)
        y = (np.cos((i - j) * np.pi * x) - np.cos((i + j) * np.pi * x)) * fermi_dirac(
            np.cos(np.pi * x), beta
        )
        return (y.sum() - 0.5 * (y[0] + y[-1])) / N

    N = 16
    prev = trap(N)
    while N < max_points:
        N *= 2
        cur = trap(N)
        if abs(cur - prev) < tol:
            return float(cur)
        prev = cur
    raise ConvergenceError(f"toeplitz_fd_limit: no convergence with {N} points")


def toeplitz_fd_exact(n, beta):
    r"""Finite-``n`` :math:`f_{FD}(H_n)` at :math:`\mu=0` from the closed-form eigenpairs."""
    w, V = toeplitz_eigenpairs(n)
    from .bounds import fermi_dirac

    return (V * fermi_dirac(w, beta)) @ V.T


# ---------------------------------------------------------------------------
# 2D Kronecker model
# ---------------------------------------------------------------------------


def kron_2d(n):
    r""":math:`\tfrac12(H_n\otimes I_n + I_n\otimes H_n)`, the 2D grid Laplacian analogue."""
    n = _require_even("kron_2d", n)
    T = toeplitz_1d(n).full()
    eye = sp.eye_array(n, format="csr")
    K = 0.5 * (sp.kron(T, eye) + sp.kron(eye, T))
    return SparseHermitian.from_sparse(sp.csr_array(K))


def kron_projector_formula(n, P=None):
    r""":math:`P\otimes(I-P) + (I-P)\otimes P` from the 1D projector ``P``.

    This is the projector onto the negative eigenspace of
    :math:`H_n\otimes H_n`, whose eigenvalues are products
    :math:`\lambda_k\lambda_l`.  Block ``(k, l)`` equals
    :math:`P_{kl}(I - 2P) + \delta_{kl}P`, so the diagonal blocks are
    :math:`\tfrac12 I`.  (The Kronecker sum :math:`\tfrac12(H_n\otimes I + I\otimes H_n)`
    has ``n`` zero eigenvalues at the same Fermi level and a different
    projector.)
    """
    n = _require_even("kron_projector_formula", n)
    if P is None:
        P = toeplitz_projector_exact(n)
    Q = np.eye(n) - P
    return np.kron(P, Q) + np.kron(Q, P)


def kron_product(n):
    r""":math:`H_n\otimes H_n`, whose negative-eigenspace projector has the Kronecker form."""
    n = _require_even("kron_product", n)
    T = toeplitz_1d(n).full()
    return SparseHermitian.from_sparse(sp.csr_array(sp.kron(T, T)))


# ---------------------------------------------------------------------------
# random gapped families
# ---------------------------------------------------------------------------


def haar_orthogonal(n, rng):
    """Haar-distributed orthogonal matrix: QR of a Gaussian matrix, sign-fixed."""
    X = rng.standard_normal((n, n))
    Q, R = la.qr(X)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def band_reduce(A, m):
    """Orthogonally reduce a real symmetric matrix to half-bandwidth ``m``.

    Column ``j`` is cleared below row ``j + m`` by a Householder reflector
    acting on rows and columns ``j + m, ..., n - 1``; eigenvalues are
    preserved.  For ``m = 1`` this is the tridiagonal reduction.
    """
    A = np.array(A, dtype=float, copy=True)
    n = A.shape[0]
    m = int(m)
    if m < 1:
        raise PreconditionError("band_reduce", "m must be at least 1")
    for j in range(n - m - 1):
        k = j + m
        x = A[k:, j]
        alpha = np.linalg.norm(x)
        if alpha == 0.0 or np.all(x[1:] == 0):
            continue
        v = x.copy()
        v[0] += math.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        # two-sided update on the trailing block
        A[k:, :] -= 2.0 * np.outer(v, v @ A[k:, :])
        A[:, k:] -= 2.0 * np.outer(A[:, k:] @ v, v)
    idx = np.arange(n)
    A[np.abs(idx[:, None] - idx[None, :]) > m] = 0.0
    return 0.5 * (A + A.T)


def gapped_random(n, m=1, a=0.5, n_e=None, seed=None, return_eigenvalues=False):
    r"""Random ``m``-banded symmetric matrix with spectrum in :math:`[-1,-a]\cup[a,1]`.

    ``n_e`` eigenvalues (default ``n // 2``) are drawn uniformly from the
    occupied interval and the rest from the virtual one.  The returned
    :class:`SpectralModel` uses the nominal edges ``lo = -1``, ``hi = 1``,
    ``eps_minus = -a``, ``eps_plus = a``, ``mu = 0``.
    """
    n = int(n)
    if n < 2:
        raise PreconditionError("gapped_random", "n must be at least 2")
    if not 0 < a < 1:
        raise PreconditionError("gapped_random", f"need 0 < a < 1, got {a}")
    n_e = n // 2 if n_e is None else int(n_e)
    if not 0 < n_e < n:
        raise PreconditionError("gapped_random", f"need 0 < n_e < n, got n_e={n_e}")
    if m < 1 or m >= n:
        raise PreconditionError("gapped_random", f"need 1 <= m < n, got m={m}")
    rng = rng_from_seed(seed)
    occ = -rng.uniform(a, 1.0, n_e)
    vir = rng.uniform(a, 1.0, n - n_e)
    lam = np.concatenate([occ, vir])
    Q = haar_orthogonal(n, rng)
    A = (Q * lam) @ Q.T
    B = band_reduce(0.5 * (A + A.T), m)
    H = SparseHermitian.from_dense(B, bandwidth_hint=m)
    spec = SpectralModel(-1.0, 1.0, 0.0, -float(a), float(a), n_e=n_e)
    if return_eigenvalues:
        return H, spec, np.sort(lam)
    return H, spec


def synthetic_decay(n, c, alpha, kind="exact_envelope", seed=None):
    r"""Hermitian matrix with :math:`|A_{ij}| = c\,e^{-\alpha|i-j|}` or below it.

    ``exact_envelope`` puts the envelope itself in every entry; ``random_phase``
    multiplies the off-diagonal entries by seeded random unit phases and the
    diagonal by random signs, keeping the magnitudes on the envelope.
    """
    if not (c > 0 and alpha > 0):
        raise PreconditionError("synthetic_decay", "need c > 0 and alpha > 0")
    n = int(n)
    idx = np.arange(n)
    D = np.abs(idx[:, None] - idx[None, :])
    with np.errstate(under="ignore"):
        A = c * np.exp(-alpha * D)
    if kind == "exact_envelope":
        return SparseHermitian.from_dense(A, check=False)
    if kind == "random_phase":
        rng = rng_from_seed(seed)
        phase = np.exp(2j * np.pi * rng.random((n, n)))
        U = np.triu(phase, 1)
        signs = rng.choice([-1.0, 1.0], n)
        A = A * (U + U.conj().T + np.diag(signs))
        return SparseHermitian.from_dense(A, check=False)
    raise PreconditionError("synthetic_decay", f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# model descriptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """Recipe for one of the model families, serializable as provenance."""

    kind: str
    n: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PreconditionError("ModelSpec", f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind in ("toeplitz1d", "kron2d"):
            _require_even("ModelSpec", self.n)

    def build(self):
        """Return ``(H, SpectralModel or None)``."""
        p = dict(self.params)
        if self.kind == "toeplitz1d":
            H = toeplitz_1d(self.n)
            return H, SpectralModel.from_eigenvalues(toeplitz_eigenpairs(self.n)[0], self.n // 2)
        if self.kind == "kron2d":
            return kron_2d(self.n), None
        if self.kind == "gapped_random":
            return gapped_random(self.n, **p)
        return synthetic_decay(self.n, **p), None

    def to_record(self):
        return {"kind": self.kind, "n": self.n, "parameters": dict(self.params)}

    def to_json(self):
        return json.dumps(self.to_record(), sort_keys=True)


def banded_spd(n, m, kappa, seed=None, unit_diagonal=False):
    r"""Random ``m``-banded SPD matrix with condition number ``kappa``.

    A seeded symmetric banded matrix is shifted so that its extreme
    eigenvalues have ratio ``kappa``.  With ``unit_diagonal`` the result is
    rescaled to unit diagonal afterwards, which changes the condition number.
    """
    if not kappa > 1:
        raise PreconditionError("banded_spd", "kappa must exceed 1")
    n, m = int(n), int(m)
    rng = rng_from_seed(seed)
    B = np.zeros((n, n))
    for k in range(m + 1):
        d = rng.standard_normal(n - k)
        B += np.diag(d, k)
        if k:
            B += np.diag(d, -k)
    w = la.eigvalsh(B)
    s = (w[-1] - kappa * w[0]) / (kappa - 1.0)
    S = B + s * np.eye(n)
    if unit_diagonal:
        t = 1.0 / np.sqrt(np.diag(S))
        S = S * np.outer(t, t)
    return SparseHermitian.from_dense(S, bandwidth_hint=m)
