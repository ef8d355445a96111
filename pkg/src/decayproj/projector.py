r"""Density matrices: dense oracles, Chebyshev expansion, contour quadrature.

At zero temperature the density matrix is the spectral projector

.. math::

    P = \sum_{\varepsilon_i < \mu} v_i v_i^*
      = \frac{1}{2\pi i}\oint_\Gamma (zI - H)^{-1}\,dz,

and at inverse temperature :math:`\beta` it is :math:`f_{FD}(H)`.  The
Chebyshev path keeps every recurrence iterate on a prescribed band or graph
pattern, which is how linear-scaling codes use the decay bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.fft
import scipy.linalg as la
import scipy.sparse as sp

from .bounds import (
    Circle,
    beta_from_gap,
    bernstein_error_bound,
    bernstein_fd_bound,
    chi_bar_fd,
    chi_grid,
    default_circle,
    effective_gap,
    fermi_dirac,
    prescribe_bandwidth,
    select_chi,
)
from .errors import PreconditionError
from .matrix import SparseHermitian, SpectralModel, as_hermitian, graph_distances, ritz_interval

METHODS = ("oracle_projector", "oracle_fd", "chebyshev", "contour")
DENSE_LIMIT = 4000


@dataclass(frozen=True)
class Pattern:
    """Truncation pattern: band ``|i-j| <= m`` or graph ball ``d(i,j) <= m``."""

    kind: str
    m: int

    def __post_init__(self):
        if self.kind not in ("band", "graph"):
            raise PreconditionError("Pattern", f"kind must be 'band' or 'graph', got {self.kind!r}")
        if self.m < 0:
            raise PreconditionError("Pattern", "m must be nonnegative")

    def mask(self, H):
        """Boolean sparse mask of the kept positions for the graph of ``H``."""
        H = as_hermitian(H)
        n = H.n
        if self.kind == "band":
            m = min(self.m, n - 1)
            offs = list(range(-m, m + 1))
            D = sp.diags_array([np.ones(n - abs(k)) for k in offs], offsets=offs, shape=(n, n))
            return sp.csr_array(D, dtype=bool)
        d = graph_distances(H, radius=self.m)
        rows, cols = np.nonzero(d.table <= self.m)
        return sp.csr_array((np.ones(rows.size, dtype=bool), (d.sources[rows], cols)), shape=(n, n))

    def to_record(self):
        return {"kind": self.kind, "m": int(self.m)}


@dataclass(frozen=True)
class ChebCoeffs:
    r"""Chebyshev coefficients of :math:`f_{FD}` on ``[-1, 1]``.

    ``f(x) ≈ sum_k coeffs[k] T_k(x)``.
    """

    degree: int
    coeffs: np.ndarray
    beta: float
    mu: float
    nodes: int

    def __call__(self, x):
        return np.polynomial.chebyshev.chebval(x, self.coeffs)

    def tail_slope(self, k0, k1):
        """Least-squares slope of ``log|c_k|`` over odd or nonzero ``k`` in ``[k0, k1]``."""
        k = np.arange(k0, min(k1, self.degree) + 1)
        c = np.abs(self.coeffs[k])
        keep = c > 0
        return float(np.polyfit(k[keep], np.log(c[keep]), 1)[0])


@dataclass(frozen=True)
class DensityResult:
    """A computed density matrix and its provenance.

    ``P`` is a dense ndarray or a scipy sparse array (patterned runs).
    """

    P: object
    method: str
    spec: SpectralModel | None
    metrics: dict = field(default_factory=dict)
    pattern: Pattern | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def n(self):
        return self.P.shape[0]

    def dense(self):
        return self.P.toarray() if sp.issparse(self.P) else np.asarray(self.P)

    def to_hermitian(self):
        if sp.issparse(self.P):
            return SparseHermitian.from_sparse(self.P, check=False)
        return SparseHermitian.from_dense(self.P, check=False)

    def to_record(self):
        return {
            "method": self.method,
            "pattern": None if self.pattern is None else self.pattern.to_record(),
            "metrics": {k: _plain(v) for k, v in self.metrics.items()},
            **{k: _plain(v) for k, v in self.info.items()},
        }


def _plain(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def _dense_eigh(H):
    H = as_hermitian(H)
    if H.n > DENSE_LIMIT:
        raise PreconditionError("dense eigensolver", f"n = {H.n} exceeds the dense limit {DENSE_LIMIT}")
    return la.eigh(H.toarray())


def _spec_from(w, mu, n_e, beta=None):
    lo, hi = float(w[0]), float(w[-1])
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    if 0 < n_e < len(w):
        try:
            return SpectralModel(lo, hi, float(mu), float(w[n_e - 1]), float(w[n_e]), beta=beta, n_e=n_e)
        except PreconditionError:
            pass
    return SpectralModel(lo, hi, float(mu), beta=beta, n_e=n_e)


def oracle_projector(H, mu, gap_tol=1e-12):
    """Spectral projector onto eigenvectors with eigenvalue below ``mu`` (dense)."""
    w, V = _dense_eigh(H)
    dist = np.min(np.abs(w - mu))
    if dist <= gap_tol:
        raise PreconditionError("oracle_projector", f"eigenvalue within {dist:.3g} of mu = {mu}")
    occ = w < mu
    Vo = V[:, occ]
    P = Vo @ Vo.conj().T
    n_e = int(occ.sum())
    res = DensityResult(P, "oracle_projector", _spec_from(w, mu, n_e), info={"eigenvalues_below": n_e})
    return _with_metrics(res)


def oracle_fd(H, beta, mu):
    r""":math:`f_{FD}(H)` through a dense eigendecomposition."""
    if not beta >= 0:
        raise PreconditionError("oracle_fd", "beta must be nonnegative")
    w, V = _dense_eigh(H)
    f = fermi_dirac(w, beta, mu)
    P = (V * f) @ V.conj().T
    P = 0.5 * (P + P.conj().T)
    n_e = int(np.sum(w < mu))
    res = DensityResult(P, "oracle_fd", _spec_from(w, mu, n_e, beta=beta), info={"beta": beta})
    return _with_metrics(res, projector=False)


# ---------------------------------------------------------------------------
# Chebyshev expansion
# ---------------------------------------------------------------------------


def cheb_coeffs_fd(beta, mu, degree, nodes=None):
    r"""Chebyshev coefficients of :math:`f_{FD}` up to ``degree``.

    Computed by Chebyshev--Gauss quadrature (a type-II DCT) on ``nodes``
    points.  With ``nodes = degree + 1`` these are the interpolation
    coefficients, exact for polynomials of matching degree.  The default uses
    enough nodes that aliasing from the neglected tail falls below double
    precision, so the result is the truncated Chebyshev series itself.
    """
    degree = int(degree)
    if degree < 0:
        raise PreconditionError("cheb_coeffs_fd", "degree must be nonnegative")
    if not beta >= 0:
        raise PreconditionError("cheb_coeffs_fd", "beta must be nonnegative")
    if nodes is None:
        if beta == 0:
            nodes = degree + 1
        else:
            rate = math.log(chi_bar_fd(beta, mu))
            nodes = max(2 * (degree + 1), int(math.ceil(45.0 / rate)) + 1)
    nodes = int(nodes)
    if nodes < degree + 1:
        raise PreconditionError("cheb_coeffs_fd", "need at least degree + 1 nodes")
    j = np.arange(nodes)
    x = np.cos(np.pi * (j + 0.5) / nodes)
    y = scipy.fft.dct(fermi_dirac(x, beta, mu), type=2) / nodes
    y[0] *= 0.5
    return ChebCoeffs(degree, y[: degree + 1].copy(), float(beta), float(mu), nodes)


def degree_for_tolerance(beta, mu, tol, size=100):
    """Smallest degree whose Bernstein bound, minimized over a ``chi`` grid, is below ``tol``."""
    best = None
    for chi in chi_grid(beta, mu, size):
        M = bernstein_error_bound(beta, mu, chi, 0) * (chi - 1.0) / 2.0
        k = math.log(2.0 * M / ((chi - 1.0) * tol)) / math.log(chi)
        k = max(0, int(math.ceil(k)))
        if best is None or k < best:
            best = k
    return best


def _check_normalized(H, slack=1e-8):
    lo, hi = ritz_interval(H)
    if lo < -1 - slack or hi > 1 + slack:
        raise PreconditionError(
            "cheb_apply", f"spectrum reaches [{lo:.6g}, {hi:.6g}], outside [-1, 1]; normalize first"
        )


def cheb_apply(H, coeffs, pattern=None, check=True):
    r"""Evaluate :math:`\sum_k c_k T_k(H)` by the three-term recurrence.

    With a ``pattern`` every iterate :math:`T_k(H)` is truncated to it before
    the next step, and the result is a sparse array on the pattern.  Without
    one the recurrence runs on dense matrices.
    """
    H = as_hermitian(H)
    if check:
        _check_normalized(H)
    c = coeffs.coeffs
    n = H.n
    F = H.full()
    if pattern is None:
        if n > DENSE_LIMIT:
            raise PreconditionError("cheb_apply", "dense recurrence beyond the dense limit; give a pattern")
        Hd = F.toarray()
        T0 = np.eye(n, dtype=Hd.dtype)
        P = c[0] * T0
        if coeffs.degree >= 1:
            T1 = Hd.copy()
            P = P + c[1] * T1
            for k in range(2, coeffs.degree + 1):
                T0, T1 = T1, 2.0 * (Hd @ T1) - T0
                P = P + c[k] * T1
        P = 0.5 * (P + P.conj().T)
    else:
        mask = pattern.mask(H)
        T0 = sp.eye_array(n, format="csr", dtype=F.dtype)
        P = c[0] * T0
        if coeffs.degree >= 1:
            T1 = F.multiply(mask).tocsr()
            P = P + c[1] * T1
            for k in range(2, coeffs.degree + 1):
                T2 = (2.0 * (F @ T1) - T0).multiply(mask).tocsr()
                T0, T1 = T1, T2
                P = P + c[k] * T1
        P = sp.csr_array(0.5 * (P + P.conj().T))
    res = DensityResult(
        P, "chebyshev", None, pattern=pattern,
        info={"degree": coeffs.degree, "beta": coeffs.beta, "mu": coeffs.mu},
    )
    return _with_metrics(res, projector=False)


def chebyshev_auto(H, spec, eps, delta=None, metric="band"):
    r"""Bound-guided Chebyshev run on a normalized gapped matrix.

    Chains ``beta_from_gap`` (with ``delta = eps`` by default), the Bernstein
    decay bound, ``prescribe_bandwidth`` and a degree for which the Bernstein
    error bound is below ``eps``; then runs :func:`cheb_apply` on the band
    (or graph ball) of the prescribed width.
    """
    H = as_hermitian(H)
    delta = eps if delta is None else delta
    beta = beta_from_gap(effective_gap(spec), delta)
    m = max(1, H.bandwidth)
    m_metric = m if metric == "band" else 1
    d_target = max(1, int(math.ceil(m_metric * math.log(1.0 / eps) / math.log(chi_bar_fd(beta, spec.mu)))))
    chi = select_chi(beta, spec.mu, d_target, m_metric, metric)
    bound = bernstein_fd_bound(beta, spec.mu, chi, m_metric, metric)
    width = prescribe_bandwidth(bound, eps)
    degree = degree_for_tolerance(beta, spec.mu, eps)
    coeffs = cheb_coeffs_fd(beta, spec.mu, degree)
    res = cheb_apply(H, coeffs, Pattern(metric, width))
    info = dict(res.info, bandwidth=width, chi=chi, c=bound.constants["c"], alpha=bound.constants["alpha"])
    return DensityResult(res.P, res.method, spec, res.metrics, res.pattern, info)


# ---------------------------------------------------------------------------
# contour quadrature
# ---------------------------------------------------------------------------


def _resolvent_solve(F, z, m, rhs):
    n = F.shape[0]
    if 2 * m + 1 < n // 2:
        ab = np.zeros((2 * m + 1, n), dtype=complex)
        A = (z * sp.eye_array(n, format="csr") - F).todia()
        for off, row in zip(A.offsets, A.data):
            if abs(off) <= m:
                ab[m - off] = row
        try:
            return la.solve_banded((m, m), ab, rhs, check_finite=False)
        except la.LinAlgError as e:
            raise PreconditionError("contour_projector", f"singular banded LU at z={z}") from e
    A = z * np.eye(n) - F.toarray()
    try:
        return la.solve(A, rhs, check_finite=False)
    except la.LinAlgError as e:
        raise PreconditionError("contour_projector", f"singular LU at z={z}") from e


def contour_projector(H, spec, nodes=64, circle=None, node_tol=1e-8):
    r"""Projector by the trapezoid rule for Cauchy's integral on a circle.

    With :math:`z_j = c + r e^{i\theta_j}`, :math:`\theta_j = 2\pi(j+\tfrac12)/N`,

    .. math::

        P \approx \frac{1}{N}\sum_{j} r e^{i\theta_j}(z_j I - H)^{-1}.

    For real symmetric ``H`` only the upper-half nodes are solved and the
    real part is doubled.  A circle that fails to enclose exactly the
    occupied spectrum is not rejected; the trace deviation from ``n_e`` is
    reported in the metrics.
    """
    H = as_hermitian(H)
    if not spec.has_gap:
        raise PreconditionError("contour_projector", "spectral model has no gap")
    nodes = int(nodes)
    if nodes < 2:
        raise PreconditionError("contour_projector", "need at least 2 nodes")
    circle = default_circle(spec) if circle is None else Circle(*circle)
    real = H.is_real
    if real and nodes % 2:
        raise PreconditionError("contour_projector", "real symmetric path needs an even node count")
    z, theta = circle.nodes(nodes, upper_only=real)
    from .bounds import _distance_to_spectrum

    dist = _distance_to_spectrum(z, spec)
    if np.min(dist) < node_tol:
        raise PreconditionError("contour_projector", f"node within {np.min(dist):.3g} of the spectrum")
    F = H.full()
    n = H.n
    m = max(1, H.bandwidth)
    I = np.eye(n)
    P = np.zeros((n, n), dtype=complex)
    for zj, tj in zip(z, theta):
        P += circle.radius * np.exp(1j * tj) * _resolvent_solve(F, zj, m, I)
    if real:
        P = 2.0 * P.real / nodes
    else:
        P = P / nodes
    P = 0.5 * (P + P.conj().T)
    res = DensityResult(
        P, "contour", spec,
        info={"nodes": nodes, "center": circle.center, "radius": circle.radius},
    )
    return _with_metrics(res)


# ---------------------------------------------------------------------------
# energy
# ---------------------------------------------------------------------------


def _entries(P, rows, cols):
    if sp.issparse(P):
        P = sp.csr_array(P)
        return np.asarray(P[rows, cols]).ravel()
    return np.asarray(P)[rows, cols]


def energy(P, H):
    r""":math:`\mathrm{Tr}(PH)` from the entries of ``P`` on the pattern of ``H``."""
    H = as_hermitian(H)
    if isinstance(P, DensityResult):
        P = P.P
    if isinstance(P, SparseHermitian):
        P = P.full()
    if P.shape != H.shape:
        raise PreconditionError("energy", f"shape mismatch {P.shape} vs {H.shape}")
    F = H.full().tocoo()
    # Tr(PH) = sum over stored H_rc of P_cr H_rc
    vals = _entries(P, F.col, F.row) * F.data
    return float(np.real(np.sum(vals)))


class PerturbationNorms(NamedTuple):
    two: float
    fro: float

    @classmethod
    def of(cls, D):
        D = D.toarray() if sp.issparse(D) else np.asarray(D)
        return cls(float(np.linalg.norm(D, 2)), float(np.linalg.norm(D, "fro")))


class EnergyErrorBound(NamedTuple):
    first_order: float
    second_order: float

    @property
    def total(self):
        return self.first_order + self.second_order


SCALINGS = ("frobenius_one", "frobenius_one_spectral", "two_norm_one")


def energy_error_bounds(dH, dP, n_e, n_b, scaling="two_norm_one", h_norm=1.0):
    r"""Bounds on :math:`|\mathrm{Tr}(\hat P\hat H) - \mathrm{Tr}(PH)|/n_e`.

    Writing :math:`\hat H = H + \Delta_H`, :math:`\hat P = P + \Delta_P` with
    ``P`` a rank-``n_e`` projector and ``n = n_b n_e``:

    ``frobenius_one`` (:math:`\|H\|_F = 1`)
        :math:`\|\Delta_H\|_F/\sqrt{n_e} + \|\Delta_P\|_F/n_e`
    ``frobenius_one_spectral`` (:math:`\|H\|_F = 1`, 2-norm form)
        :math:`\|\Delta_H\|_2 + \sqrt{n_b/n_e}\,\|\Delta_P\|_2`
    ``two_norm_one`` (:math:`\|H\|_2 = 1`)
        :math:`\|\Delta_H\|_2 + n_b\|\Delta_P\|_2`

    The term :math:`\mathrm{Tr}(\Delta_P\Delta_H)/n_e` is returned separately
    as ``second_order``.  ``h_norm`` is the actual value of the norm the
    scaling assumes to be one.
    """
    dH = PerturbationNorms(*dH)
    dP = PerturbationNorms(*dP)
    if min(*dH, *dP) < 0:
        raise PreconditionError("energy_error_bounds", "norms must be nonnegative")
    if not n_e > 0 or not n_b >= 1:
        raise PreconditionError("energy_error_bounds", "need n_e > 0 and n_b >= 1")
    if scaling == "frobenius_one":
        first = dH.fro / math.sqrt(n_e) + h_norm * dP.fro / n_e
        second = dP.fro * dH.fro / n_e
    elif scaling == "frobenius_one_spectral":
        first = dH.two + h_norm * math.sqrt(n_b / n_e) * dP.two
        second = n_b * dP.two * dH.two
    elif scaling == "two_norm_one":
        first = dH.two + h_norm * n_b * dP.two
        second = n_b * dP.two * dH.two
    else:
        raise PreconditionError("energy_error_bounds", f"scaling must be one of {SCALINGS}")
    return EnergyErrorBound(first, second)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


def verify_density(result, oracle=None, n_e=None):
    """Metrics of a density matrix, optionally against an oracle.

    Returns a dict with ``idempotency_defect`` (2-norm of ``P^2 - P`` for
    dense results, Frobenius norm for sparse ones), ``trace``,
    ``trace_deviation`` (when ``n_e`` is known), ``hermiticity_residual``,
    ``max_entry``, ``offdiag_ratio`` and ``offdiag_bound``, plus ``sup_error`` and
    ``fro_error`` when an oracle is given.
    """
    P = result.P
    if n_e is None and result.spec is not None:
        n_e = result.spec.n_e
    metrics = {}
    if sp.issparse(P):
        P = sp.csr_array(P)
        D = P @ P - P
        metrics["idempotency_defect"] = float(sp.linalg.norm(D, "fro")) if D.nnz else 0.0
        metrics["idempotency_norm"] = "fro"
        H_res = P - P.conj().T
        metrics["hermiticity_residual"] = float(sp.linalg.norm(H_res, "fro")) if H_res.nnz else 0.0
        diag = P.diagonal()
        fro2 = float(np.sum(np.abs(P.data) ** 2))
        metrics["max_entry"] = float(np.max(np.abs(P.data), initial=0.0))
    else:
        P = np.asarray(P)
        metrics["idempotency_defect"] = float(np.linalg.norm(P @ P - P, 2))
        metrics["idempotency_norm"] = "two"
        metrics["hermiticity_residual"] = float(np.linalg.norm(P - P.conj().T, "fro"))
        diag = np.diag(P)
        fro2 = float(np.sum(np.abs(P) ** 2))
        metrics["max_entry"] = float(np.max(np.abs(P)))
    trace = float(np.real(np.sum(diag)))
    metrics["trace"] = trace
    n = P.shape[0]
    if n_e:
        metrics["n_e"] = int(n_e)
        metrics["trace_deviation"] = abs(trace - n_e)
        metrics["offdiag_bound"] = 1.0 - n_e / n
    if fro2 > 0:
        metrics["offdiag_ratio"] = (fro2 - float(np.sum(np.abs(diag) ** 2))) / fro2
    if oracle is not None:
        Q = oracle.P
        A = result.dense() - (Q.toarray() if sp.issparse(Q) else np.asarray(Q))
        metrics["sup_error"] = float(np.max(np.abs(A)))
        metrics["fro_error"] = float(np.linalg.norm(A, "fro"))
        if n <= DENSE_LIMIT:
            metrics["two_error"] = float(np.linalg.norm(A, 2))
    return metrics


def _with_metrics(res, projector=True):
    metrics = verify_density(res)
    if not projector:
        metrics.pop("offdiag_bound", None)
    return DensityResult(res.P, res.method, res.spec, metrics, res.pattern, res.info)
