r"""Overlap matrices: Cholesky and Löwdin factors, inverse decay, congruence.

For an SPD ``m``-banded ``S`` with extreme eigenvalues ``a <= b`` and
:math:`\kappa = b/a`,

.. math::

    q = \frac{\sqrt\kappa - 1}{\sqrt\kappa + 1},\quad \lambda = q^{1/m},\quad
    |[S^{-1}]_{ij}| \le K\lambda^{|i-j|},\quad
    K = \max\Bigl\{a^{-1}, \frac{(1+\sqrt\kappa)^2}{2b}\Bigr\}.

The inverse Cholesky factor :math:`Z = L^{-T}` and the Löwdin factor
:math:`S^{-1/2}` inherit the same rate.  Either factor turns the generalized
problem :math:`Hx = \varepsilon Sx` into the standard one for
:math:`\tilde H = Z^* H Z`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .bounds import DecayBound
from .errors import NotSPDError, PreconditionError
from .matrix import SparseHermitian, as_dense, as_hermitian, band_distance_matrix

FACTORS = ("inverse_cholesky", "lowdin")


def _dense(S):
    return as_dense(S)


def _bandwidth(S):
    if isinstance(S, SparseHermitian):
        return S.bandwidth
    A = np.asarray(_dense(S))
    r, c = np.nonzero(A)
    return int(np.max(np.abs(r - c), initial=0))


def cholesky_banded(S):
    """Lower Cholesky factor of a banded SPD matrix, as a dense array.

    Uses LAPACK band storage, so ``L`` has the half-bandwidth of ``S``.
    """
    A = _dense(S)
    n = A.shape[0]
    m = _bandwidth(S)
    ab = np.zeros((m + 1, n), dtype=A.dtype)
    for k in range(m + 1):
        ab[k, : n - k] = np.diagonal(A, -k)
    try:
        cb = la.cholesky_banded(ab, lower=True, check_finite=False)
    except la.LinAlgError as e:
        raise NotSPDError("cholesky_banded", f"nonpositive pivot: {e}") from e
    L = np.zeros_like(A)
    for k in range(m + 1):
        idx = np.arange(n - k)
        L[idx + k, idx] = cb[k, : n - k]
    return L


def inverse_cholesky(S, drop_tol=0.0, L=None):
    r"""Inverse Cholesky factor :math:`Z = L^{-T}` with per-column dropping.

    Each column of the exact triangular solve keeps entries with
    ``|z_ij| >= drop_tol * max_i |z_ij|``; ``drop_tol = 0`` keeps everything.
    """
    if drop_tol < 0:
        raise PreconditionError("inverse_cholesky", "drop_tol must be nonnegative")
    if L is None:
        L = cholesky_banded(S)
    n = L.shape[0]
    Z = la.solve_triangular(L.conj().T, np.eye(n, dtype=L.dtype), lower=False, check_finite=False)
    Z = np.triu(Z)
    if drop_tol > 0:
        scale = np.max(np.abs(Z), axis=0)
        Z = np.where(np.abs(Z) >= drop_tol * scale[None, :], Z, 0)
    return Z


class DemkoConstants(NamedTuple):
    K: float
    lam: float
    q: float
    kappa: float
    K0: float
    m: int

    @property
    def alpha(self):
        return math.inf if self.lam == 0 else -math.log(self.lam)

    @property
    def K1(self):
        """Inverse-Cholesky prefactor ``K (1 - lam^(m+1))/(1 - lam)``.

        ``Z = S^{-1} L`` and column ``j`` of ``L`` holds ``m + 1`` entries of
        modulus at most one (unit diagonal), so ``|Z_ij|`` is a sum of
        ``m + 1`` terms ``K lam^(k-i)``, ``k = j, ..., j + m``.
        """
        return self.K * (1.0 - self.lam ** (self.m + 1)) / (1.0 - self.lam)

    def bound(self, family="demko_inverse"):
        K = self.K1 if family == "inv_cholesky" else self.K
        lam = self.lam
        return DecayBound(
            family, "band",
            {"c": K, "alpha": self.alpha, "lam": lam, "q": self.q, "kappa": self.kappa, "m": self.m},
            lambda d: K * np.power(lam, d),
        )


def demko_constants(a, b, m=1):
    r"""Constants of the inverse decay bound :math:`|[S^{-1}]_{ij}| \le K\lambda^{|i-j|}`."""
    a, b, m = float(a), float(b), int(m)
    if not a > 0:
        raise PreconditionError("demko_constants", f"smallest eigenvalue must be positive, got {a}")
    if not b >= a:
        raise PreconditionError("demko_constants", "need a <= b")
    if m < 1:
        raise PreconditionError("demko_constants", "bandwidth must be at least 1")
    kappa = b / a
    sk = math.sqrt(kappa)
    q = (sk - 1.0) / (sk + 1.0)
    lam = q ** (1.0 / m)
    K0 = (1.0 + sk) ** 2 / (2.0 * b)
    return DemkoConstants(max(1.0 / a, K0), lam, q, kappa, K0, m)


def extreme_eigenvalues(S):
    w = la.eigvalsh(_dense(S))
    return float(w[0]), float(w[-1])


class LowdinResult(NamedTuple):
    Z: np.ndarray
    lam: float
    q: float
    K2: float
    slope: float


def lowdin_inverse_sqrt(S, q=None):
    r""":math:`S^{-1/2}` by a dense eigendecomposition, with decay diagnostics.

    For :math:`q` in :math:`((\sqrt\kappa-1)/(\sqrt\kappa+1), 1)` (default: the
    square root of the lower limit) and :math:`\lambda = q^{1/m}`, the
    returned ``K2`` is the smallest prefactor with
    :math:`|Z_{ij}| \le K_2\lambda^{|i-j|}` over entries above the roundoff
    level (``1e-14`` relative), and ``slope`` is the fitted
    log-decay of the largest entry per diagonal.
    """
    A = _dense(S)
    w, V = la.eigh(A)
    if w[0] <= 0:
        raise NotSPDError("lowdin_inverse_sqrt", f"smallest eigenvalue {w[0]:.3g} is not positive")
    Z = (V * w**-0.5) @ V.conj().T
    Z = 0.5 * (Z + Z.conj().T)
    m = max(1, _bandwidth(S))
    q0 = (math.sqrt(w[-1] / w[0]) - 1.0) / (math.sqrt(w[-1] / w[0]) + 1.0)
    if q is None:
        q = math.sqrt(q0) if q0 > 0 else 0.5
    if not q0 <= q < 1:
        raise PreconditionError("lowdin_inverse_sqrt", f"q must lie in ({q0:.6g}, 1)")
    lam = q ** (1.0 / m)
    D = band_distance_matrix(A.shape[0])
    absZ = np.abs(Z)
    # entries at the roundoff level carry no decay information
    keep = absZ > 1e-14 * np.max(absZ)
    K2 = float(np.max(absZ[keep] * lam ** (-D[keep].astype(float))))
    slope = decay_slope(Z)
    return LowdinResult(Z, lam, q, K2, slope)


def decay_slope(A, dmin=1, dmax=None, floor=1e-14):
    """Least-squares slope of ``log max_{|i-j|=d} |A_ij|`` against ``d``."""
    A = np.asarray(A)
    n = A.shape[0]
    dmax = n - 1 if dmax is None else min(dmax, n - 1)
    d = np.arange(dmin, dmax + 1)
    mags = np.array([np.max(np.abs(np.diagonal(A, k))) for k in d])
    keep = mags > floor * np.max(np.abs(A))
    if keep.sum() < 2:
        return -math.inf
    return float(np.polyfit(d[keep], np.log(mags[keep]), 1)[0])


def congruence(H, Z):
    r""":math:`\tilde H = Z^* H Z`, symmetrized against roundoff."""
    Hd = _dense(H)
    Z = _dense(Z)
    if Hd.shape[0] != Z.shape[0]:
        raise PreconditionError("congruence", f"shape mismatch {Hd.shape} vs {Z.shape}")
    Ht = Z.conj().T @ Hd @ Z
    Ht = 0.5 * (Ht + Ht.conj().T)
    return SparseHermitian.from_dense(Ht, check=False)


@dataclass(frozen=True)
class FactorSet:
    """Overlap matrix with its Cholesky factor and one inverse factor ``Z``."""

    S: SparseHermitian
    L: np.ndarray
    Z: np.ndarray
    kind: str
    kappa: float
    drop_tol: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FACTORS:
            raise PreconditionError("FactorSet", f"kind must be one of {FACTORS}")
        d = self.S.diagonal()
        if np.max(np.abs(d - 1.0), initial=0.0) > 1e-12:
            raise PreconditionError("FactorSet", "overlap matrix must have unit diagonal")

    def residual(self):
        r""":math:`\|Z^* S Z - I\|_2`."""
        S = self.S.toarray()
        R = self.Z.conj().T @ S @ self.Z - np.eye(S.shape[0])
        return float(np.linalg.norm(R, 2))

    def cholesky_residual(self):
        S = self.S.toarray()
        return float(np.linalg.norm(self.L @ self.L.conj().T - S, "fro") / np.linalg.norm(S, "fro"))

    def to_record(self):
        return {
            "kind": self.kind,
            "kappa": self.kappa,
            "drop_tol": self.drop_tol,
            "residual": self.residual(),
            "cholesky_residual": self.cholesky_residual(),
            **self.info,
        }


def normalize_overlap(S):
    r"""Scale ``S`` to unit diagonal: :math:`D^{-1/2} S D^{-1/2}`."""
    S = as_hermitian(S)
    d = S.diagonal().real
    if np.any(d <= 0):
        raise NotSPDError("normalize_overlap", "nonpositive diagonal entry")
    s = 1.0 / np.sqrt(d)
    F = sp.diags_array(s) @ S.full() @ sp.diags_array(s)
    return SparseHermitian.from_sparse(F, check=False)


def factor_set(S, kind="inverse_cholesky", drop_tol=0.0):
    """Factor a unit-diagonal SPD overlap matrix."""
    S = as_hermitian(S)
    L = cholesky_banded(S)
    a, b = extreme_eigenvalues(S)
    info = {"lambda_min": a, "lambda_max": b}
    if kind == "inverse_cholesky":
        Z = inverse_cholesky(S, drop_tol, L=L)
        dc = demko_constants(a, b, max(1, S.bandwidth))
        D = band_distance_matrix(S.n)
        upper = D * np.triu(np.ones_like(D))
        absZ = np.abs(np.triu(Z))
        keep = absZ > 1e-14 * np.max(absZ)
        ratio = absZ[keep] / (dc.K1 * np.power(dc.lam, upper[keep].astype(float)))
        info.update(K1=dc.K1, lam=dc.lam, max_bound_ratio=float(np.max(ratio)))
    elif kind == "lowdin":
        if drop_tol:
            raise PreconditionError("factor_set", "dropping applies to the inverse Cholesky factor only")
        lr = lowdin_inverse_sqrt(S)
        Z = lr.Z
        info.update(K2=lr.K2, lam=lr.lam, q=lr.q, slope=lr.slope)
    else:
        raise PreconditionError("factor_set", f"kind must be one of {FACTORS}")
    return FactorSet(S, L, Z, kind, b / a, float(drop_tol), info)


class ProductCheck(NamedTuple):
    c: float
    omega: float
    max_ratio: float
    violations: int
    hypothesis_ratio_a: float
    hypothesis_ratio_b: float

    @property
    def ok(self):
        return self.violations == 0


def product_constant(c1, c2, alpha, alpha_prime):
    r""":math:`c = c_1c_2(1+e^{-\omega})/(1-e^{-\omega})`, :math:`\omega = \alpha - \alpha'`."""
    if not alpha_prime < alpha:
        raise PreconditionError("product_decay_check", f"need alpha' < alpha, got {alpha_prime} >= {alpha}")
    omega = alpha - alpha_prime
    return c1 * c2 * (1.0 + math.exp(-omega)) / (-math.expm1(-omega)), omega


def product_decay_check(A, B, alpha, c1, c2, alpha_prime, rtol=1e-12):
    r"""Check :math:`|[AB]_{ij}| \le c\,e^{-\alpha'|i-j|}` for factors decaying at rate ``alpha``.

    Also reports how well each factor meets its own hypothesis
    :math:`|X_{ij}| \le c_k e^{-\alpha|i-j|}` (ratio at most one).
    """
    c, omega = product_constant(c1, c2, alpha, alpha_prime)
    A = _dense(A)
    B = _dense(B)
    D = band_distance_matrix(A.shape[0]).astype(float)
    AB = A @ B
    env = c * np.exp(-alpha_prime * D)
    ratio = np.abs(AB) / env
    viol = int(np.sum(np.abs(AB) > env * (1.0 + rtol)))
    ha = float(np.max(np.abs(A) * np.exp(alpha * D)) / c1)
    hb = float(np.max(np.abs(B) * np.exp(alpha * D)) / c2)
    return ProductCheck(c, omega, float(np.max(ratio)), viol, ha, hb)


def measured_decay_constant(A, alpha):
    r"""Smallest ``c`` with :math:`|A_{ij}| \le c\,e^{-\alpha|i-j|}`."""
    A = _dense(A)
    D = band_distance_matrix(A.shape[0]).astype(float)
    return float(np.max(np.abs(A) * np.exp(alpha * D)))


def generalized_eigenvalues(H, S):
    """Eigenvalues of the pencil ``(H, S)`` by a dense solver."""
    return la.eigh(_dense(H), _dense(S), eigvals_only=True)
