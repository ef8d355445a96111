r"""Off-diagonal decay bounds for functions of banded and sparse Hermitian matrices.

All bound families return a :class:`DecayBound`, a callable envelope
``rate(d)`` on the magnitude of an entry at distance ``d``.  Distances are
either band distances :math:`|i-j|` (``metric="band"``) or shortest-path
distances in the sparsity graph (``metric="graph"``).

The polynomial families rest on the Bernstein estimate for a function
analytic inside the ellipse :math:`\mathcal{E}_\chi` with foci :math:`\pm 1`,

.. math::

    E_k(f) \le \frac{2 M(\chi)}{\chi^k (\chi - 1)}, \qquad
    M(\chi) = \max_{z \in \mathcal{E}_\chi} |f(z)|,

combined with the fact that a degree-``k`` polynomial in an ``m``-banded
matrix vanishes beyond band distance ``k m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize_scalar

from .errors import PreconditionError
from .matrix import SpectralModel, as_hermitian

FAMILIES = (
    "bernstein_fd",
    "achieser",
    "hasson",
    "chui_hasson",
    "resolvent_contour",
    "demko_inverse",
    "inv_cholesky",
    "inv_sqrt",
    "heat_exponential",
    "envelope",
)
METRICS = ("band", "graph")

_GRID = 4096


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EllipseParam:
    """Bernstein ellipse with foci ``±1`` and semi-axis sum ``chi``."""

    chi: float

    def __post_init__(self):
        if not self.chi > 1:
            raise PreconditionError("EllipseParam", f"chi must exceed 1, got {self.chi}")

    @property
    def kappa1(self):
        return 0.5 * (self.chi + 1.0 / self.chi)

    @property
    def kappa2(self):
        return 0.5 * (self.chi - 1.0 / self.chi)

    def points(self, t):
        t = np.asarray(t, dtype=float)
        return self.kappa1 * np.cos(t) + 1j * self.kappa2 * np.sin(t)


@dataclass(frozen=True)
class DecayBound:
    """Entry-magnitude envelope as a function of distance.

    Parameters
    ----------
    family : str
        One of :data:`FAMILIES`.
    metric : {"band", "graph"}
        Distance the bound is expressed in.
    constants : mapping
        Evaluated constants; exponential families carry ``c`` and ``alpha``
        so that the raw value is ``c * exp(-alpha * d)``.
    func : callable
        Raw value as a function of a float array of distances.
    saturate : bool
        Report ``min(1, value) + delta`` (projector families).
    delta : float
        Additive slack used with ``saturate``.
    """

    family: str
    metric: str
    constants: Mapping
    func: Callable = field(repr=False, compare=False)
    saturate: bool = False
    delta: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown bound family {self.family!r}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")

    def rate(self, d):
        """Bound on an entry at distance ``d`` (scalar or array)."""
        scalar = np.ndim(d) == 0
        dd = np.asarray(d, dtype=float)
        if np.any(dd < 0):
            raise ValueError("distances must be nonnegative")
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            v = np.asarray(self.func(dd), dtype=float)
        if self.saturate:
            v = np.minimum(1.0, v) + self.delta
        return float(v) if scalar else v

    __call__ = rate

    @property
    def is_exponential(self):
        return "c" in self.constants and "alpha" in self.constants

    def samples(self, dmax, dmin=0):
        d = np.arange(dmin, dmax + 1)
        return d, self.rate(d)

    def to_record(self, dmax=None):
        rec = {
            "family": self.family,
            "metric": self.metric,
            "constants": {k: _jsonable(v) for k, v in self.constants.items()},
            "saturate": self.saturate,
            "delta": self.delta,
        }
        if dmax is not None:
            d, v = self.samples(dmax)
            rec["samples"] = [[int(a), float(b)] for a, b in zip(d, v)]
        return rec


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _exp_bound(family, metric, c, alpha, saturate=False, delta=0.0, **extra):
    consts = {"c": float(c), "alpha": float(alpha), **extra}
    return DecayBound(
        family, metric, consts, lambda d: c * np.exp(-alpha * d), saturate=saturate, delta=delta
    )


def _check_metric(metric, m):
    if metric not in METRICS:
        raise PreconditionError("bounds", f"metric must be one of {METRICS}, got {metric!r}")
    if metric == "band" and (m is None or int(m) < 1):
        raise PreconditionError("bounds", "band metric needs a bandwidth m >= 1")


# ---------------------------------------------------------------------------
# Fermi-Dirac function and its regularity ellipse
# ---------------------------------------------------------------------------


def fermi_dirac(z, beta, mu=0.0):
    r"""Fermi--Dirac function :math:`1/(1+e^{\beta(z-\mu)})` for real or complex ``z``.

    Evaluated in the overflow-free form on either side of ``Re z = mu``.
    """
    w = beta * (np.asarray(z) - mu)
    pos = np.real(w) > 0
    with np.errstate(over="ignore", invalid="ignore"):
        e_neg = np.exp(-np.where(pos, w, 0))
        e_pos = np.exp(np.where(pos, 0, w))
        out = np.where(pos, e_neg / (1.0 + e_neg), 1.0 / (1.0 + e_pos))
    return out[()] if out.ndim == 0 else out


def chi_bar_fd(beta, mu=0.0):
    r"""Semi-axis sum of the largest Bernstein ellipse free of Fermi--Dirac poles.

    The poles nearest the real axis sit at :math:`\mu \pm i\pi/\beta`; the
    returned :math:`\bar\chi` is the parameter of the confocal ellipse through
    them.  With :math:`B = \beta^2 (1-\mu^2)`,

    .. math::

        \bar\chi = \frac{\sqrt{S - B + \pi^2} + \sqrt{S + \beta^2 (1+\mu^2) + \pi^2}}
                        {\sqrt{2}\,\beta},
        \qquad S = \sqrt{(B-\pi^2)^2 + 4\pi^2\beta^2}.

    The first square root is evaluated in cancellation-free form.
    """
    beta = float(beta)
    mu = float(mu)
    if not beta > 0 or not math.isfinite(beta):
        raise PreconditionError("chi_bar_fd", f"beta must be positive and finite, got {beta}")
    if not abs(mu) < 1:
        raise PreconditionError("chi_bar_fd", f"need |mu| < 1, got {mu}")
    pi2 = math.pi**2
    B = beta * beta * (1.0 - mu * mu)
    A = B - pi2
    S = math.hypot(A, 2.0 * math.pi * beta)
    first = 4.0 * pi2 * beta * beta / (S + A) if A > 0 else S - A
    second = S + beta * beta * (1.0 + mu * mu) + pi2
    return (math.sqrt(first) + math.sqrt(second)) / (math.sqrt(2.0) * beta)


def ellipse_residual(beta, mu, chi):
    r"""Membership residual of the pole :math:`\mu + i\pi/\beta` on :math:`\mathcal{E}_\chi`."""
    e = EllipseParam(chi)
    x, y = mu, math.pi / beta
    return abs(x * x / e.kappa1**2 + y * y / e.kappa2**2 - 1.0)


def _admissible_chi(op, beta, mu, chi):
    chi = float(chi)
    cb = chi_bar_fd(beta, mu)
    if not 1.0 < chi < cb:
        raise PreconditionError(op, f"chi must lie in (1, {cb:.10g}), got {chi}")
    return cb


def _golden_max(g, a, b, tol=1e-12):
    res = minimize_scalar(lambda t: -g(t), bounds=(a, b), method="bounded", options={"xatol": tol})
    return -res.fun


def ellipse_max_fd(beta, mu, chi, grid=_GRID):
    r"""Maximum of :math:`|f_{FD}|` on :math:`\mathcal{E}_\chi`.

    Dense sampling of :math:`z(t) = \kappa_1\cos t + i\kappa_2\sin t` on
    ``grid`` points followed by bounded scalar refinement around the best
    sample.  The result is never below the sampled maximum.
    """
    _admissible_chi("ellipse_max_fd", beta, mu, chi)
    e = EllipseParam(chi)
    # conjugate symmetry: the upper half suffices
    t = np.linspace(0.0, np.pi, grid // 2 + 1)
    vals = np.abs(fermi_dirac(e.points(t), beta, mu))
    k = int(np.argmax(vals))
    h = t[1] - t[0]
    g = lambda s: float(np.abs(fermi_dirac(e.points(s), beta, mu)))
    refined = _golden_max(g, max(0.0, t[k] - h), min(np.pi, t[k] + h))
    return max(float(vals[k]), refined)


def ellipse_vertex_fd(beta, chi):
    r"""Closed-form :math:`|1/(1+e^{i\beta\kappa_2})|`, the value of :math:`|f_{FD}|`
    at the upper vertex of the minor axis when :math:`\mu = 0`.

    Near :math:`\bar\chi` this vertex carries the maximum; for smaller
    :math:`\chi` the maximum can sit elsewhere on the ellipse.
    """
    k2 = EllipseParam(chi).kappa2
    return float(abs(1.0 / (1.0 + np.exp(1j * beta * k2))))


def bernstein_error_bound(beta, mu, chi, k):
    r"""Bernstein bound :math:`2M(\chi)/(\chi^k(\chi-1))` on the degree-``k`` error."""
    M = ellipse_max_fd(beta, mu, chi)
    return 2.0 * M / (chi**k * (chi - 1.0))


def bernstein_fd_bound(beta, mu, chi, m=1, metric="band"):
    r"""Exponential decay bound for :math:`f_{FD}(H)` with :math:`\sigma(H)\subseteq[-1,1]`.

    :math:`c = 2\chi M(\chi)/(\chi-1)` and :math:`\alpha = \ln\chi / m` for an
    ``m``-banded ``H`` or :math:`\theta = \ln\chi` for graph distance.
    """
    _check_metric(metric, m)
    _admissible_chi("bernstein_fd_bound", beta, mu, chi)
    M = ellipse_max_fd(beta, mu, chi)
    c = 2.0 * chi * M / (chi - 1.0)
    alpha = math.log(chi) / (int(m) if metric == "band" else 1)
    return _exp_bound(
        "bernstein_fd", metric, c, alpha, chi=float(chi), M=M, beta=float(beta), mu=float(mu),
        m=int(m) if metric == "band" else None,
    )


def chi_grid(beta, mu, size=100, margin=1e-6):
    """Log-spaced grid of ``chi`` strictly inside ``(1, chi_bar)``."""
    cb = chi_bar_fd(beta, mu)
    hi = cb - 1.0 - margin
    if not hi > margin:
        raise PreconditionError("chi_grid", "admissible chi interval is too narrow")
    return 1.0 + np.geomspace(margin, hi, size)


def select_chi(beta, mu, d_target, m=1, metric="band", size=100):
    """``chi`` from a log grid minimizing the Bernstein bound at ``d_target``."""
    best = None
    for chi in chi_grid(beta, mu, size):
        b = bernstein_fd_bound(beta, mu, chi, m, metric)
        v = b.rate(d_target)
        if best is None or v < best[0]:
            best = (v, float(chi))
    return best[1]


def beta_from_gap(gamma, delta):
    r"""Smallest :math:`\beta` with :math:`|h - f_{FD}| \le \delta` outside the gap.

    :math:`\beta = (2/\gamma)\ln((1-\delta)/\delta)` for a gap of width
    :math:`\gamma` centered at :math:`\mu`.
    """
    gamma = float(gamma)
    delta = float(delta)
    if not gamma > 0:
        raise PreconditionError("beta_from_gap", f"gap must be positive, got {gamma}")
    if not 0 < delta < 0.5:
        raise PreconditionError("beta_from_gap", f"delta must lie in (0, 1/2), got {delta}")
    return 2.0 / gamma * math.log1p(-delta) - 2.0 / gamma * math.log(delta)


def _check_normalized(op, spec, slack=1e-12):
    if spec.lo < -1 - slack or spec.hi > 1 + slack:
        raise PreconditionError(op, f"spectral interval [{spec.lo}, {spec.hi}] is not inside [-1, 1]")


def effective_gap(spec):
    """Twice the distance from ``mu`` to the nearer gap edge."""
    if not spec.has_gap:
        raise PreconditionError("effective_gap", "spectral model has no gap")
    return 2.0 * min(spec.mu - spec.eps_minus, spec.eps_plus - spec.mu)


def projector_bound(spec, delta, chi=None, m=1, metric="band", d_target=None):
    r"""Decay bound :math:`\min\{1, c e^{-\alpha d}\} + \delta` for the spectral projector.

    ``spec`` must describe a normalized matrix (interval inside ``[-1, 1]``)
    with a gap.  The inverse temperature is ``beta_from_gap`` applied to twice
    the distance from ``mu`` to the nearer gap edge, so an off-center Fermi
    level is handled conservatively.  When ``chi`` is omitted it is chosen by
    :func:`select_chi` at ``d_target`` (default: the distance where the ideal
    rate :math:`\bar\chi^{-d/m}` reaches ``delta``).
    """
    _check_metric(metric, m)
    _check_normalized("projector_bound", spec)
    beta = beta_from_gap(effective_gap(spec), delta)
    if chi is None:
        if d_target is None:
            cb = chi_bar_fd(beta, spec.mu)
            scale = int(m) if metric == "band" else 1
            d_target = max(1, math.ceil(scale * math.log(1.0 / delta) / math.log(cb)))
        chi = select_chi(beta, spec.mu, d_target, m, metric)
    b = bernstein_fd_bound(beta, spec.mu, chi, m, metric)
    consts = dict(b.constants)
    consts["delta"] = float(delta)
    return DecayBound("bernstein_fd", metric, consts, b.func, saturate=True, delta=float(delta))


def envelope(bounds: Sequence[DecayBound]) -> DecayBound:
    """Pointwise minimum of bounds sharing one metric."""
    bounds = list(bounds)
    if not bounds:
        raise PreconditionError("envelope", "empty list of bounds")
    metrics = {b.metric for b in bounds}
    if len(metrics) != 1:
        raise PreconditionError("envelope", f"bounds mix metrics {sorted(metrics)}")
    if len(bounds) == 1:
        return bounds[0]

    def func(d):
        return np.min([b.rate(d) for b in bounds], axis=0)

    return DecayBound(
        "envelope",
        bounds[0].metric,
        {"members": [b.family for b in bounds], "size": len(bounds)},
        func,
    )


def fd_envelope(beta, mu, size=50, chi_min=None, m=1, metric="band", extra=()):
    """Envelope of Bernstein bounds over a log grid of ``chi``.

    ``extra`` adds specific ``chi`` values to the grid; the envelope is then
    below each of their curves by construction.
    """
    cb = chi_bar_fd(beta, mu)
    lo = 1e-6 if chi_min is None else chi_min - 1.0
    grid = 1.0 + np.geomspace(lo, cb - 1.0 - 1e-6, size)
    grid = np.union1d(grid, np.asarray(extra, dtype=float))
    return envelope([bernstein_fd_bound(beta, mu, c, m, metric) for c in grid])


# ---------------------------------------------------------------------------
# Achieser series
# ---------------------------------------------------------------------------


def achieser_condition(beta, mu, chi, grid=_GRID):
    r"""Maximum of :math:`|\mathrm{Re}\, f_{FD}|` on :math:`\mathcal{E}_\chi`.

    ``Re f`` is harmonic, so its extreme values over the closed ellipse are
    attained on the boundary.
    """
    _admissible_chi("achieser_condition", beta, mu, chi)
    t = np.linspace(0.0, np.pi, grid // 2 + 1)
    return float(np.max(np.abs(np.real(fermi_dirac(EllipseParam(chi).points(t), beta, mu)))))


def _achieser_series(chi, s, tau):
    # sum_nu (-1)^nu / ((2nu+1) cosh((2nu+1) s ln chi)), truncated per r^nu0 < tau(1-r)
    if s == 0:
        return 1.0
    L = s * math.log(chi)
    r = chi ** (-s / 2.0)
    nu0 = max(1, math.ceil(math.log(tau * (1.0 - r)) / math.log(r)) + 1)
    nu = np.arange(min(nu0, 100_000))
    x = (2 * nu + 1) * L
    # 1/cosh(x) = 2 e^{-x} / (1 + e^{-2x})
    sech = 2.0 * np.exp(-x) / (1.0 + np.exp(-2.0 * x))
    terms = (-1.0) ** nu * sech / (2 * nu + 1)
    return float(4.0 / math.pi * np.sum(terms[::-1]))


def achieser_bound(chi, k, tau=1e-12, beta=None, mu=0.0):
    r"""Achieser bound on :math:`E_k(f)` for ``f`` with :math:`|\mathrm{Re} f|<1` in :math:`\mathcal{E}_\chi`.

    .. math::

        E_k(f) \le \frac{4}{\pi}\sum_{\nu\ge 0}
        \frac{(-1)^\nu}{(2\nu+1)\cosh((2\nu+1)(k+1)\ln\chi)}

    When ``beta`` is given the hypothesis is checked for :math:`f_{FD}`.
    """
    if not chi > 1:
        raise PreconditionError("achieser_bound", f"chi must exceed 1, got {chi}")
    if k < 0:
        raise PreconditionError("achieser_bound", "degree must be nonnegative")
    if not 0 < tau < 1:
        raise PreconditionError("achieser_bound", "tau must lie in (0, 1)")
    if beta is not None:
        re_max = achieser_condition(beta, mu, chi)
        if not re_max < 1:
            raise PreconditionError(
                "achieser_bound", f"max |Re f| on the ellipse is {re_max:.6g} >= 1 at chi={chi}"
            )
    return _achieser_series(float(chi), int(k) + 1, tau)


def achieser_fd_bound(beta, mu, chi, m=1, metric="band", tau=1e-12):
    r"""Entrywise Achieser bound for :math:`f_{FD}(H)`.

    An entry at graph distance ``d`` (band distance ``ceil(|i-j|/m)``) is
    annihilated by every polynomial of degree below ``d``, so it is bounded
    by :math:`E_{d-1}`: the series with ``(k+1)`` replaced by ``d``.
    """
    _check_metric(metric, m)
    re_max = achieser_condition(beta, mu, chi)
    if not re_max < 1:
        raise PreconditionError(
            "achieser_fd_bound", f"max |Re f| on the ellipse is {re_max:.6g} >= 1 at chi={chi}"
        )
    mm = int(m) if metric == "band" else 1

    def func(d):
        steps = np.ceil(np.asarray(d) / mm - 1e-12).astype(int)
        out = np.array([_achieser_series(chi, int(s), tau) for s in np.ravel(steps)])
        return out.reshape(np.shape(d))

    return DecayBound(
        "achieser", metric,
        {"chi": float(chi), "beta": float(beta), "mu": float(mu), "tau": tau, "re_max": re_max,
         "m": mm if metric == "band" else None},
        func,
    )


# ---------------------------------------------------------------------------
# disjoint-interval bounds
# ---------------------------------------------------------------------------


def _check_ab(op, a, b):
    if not 0 < a < b:
        raise PreconditionError(op, f"need 0 < a < b, got a={a}, b={b}")


def hasson_bound(a, b, K=1.0, metric="band", m=1):
    r"""Shape of the Hasson bound :math:`K e^{-\xi d}/(2\sqrt d)`, :math:`\xi = \tfrac12\ln\frac{b+a}{b-a}`.

    The prefactor ``K`` has no explicit formula and is supplied by the caller
    (default 1), so the bound is flagged ``shape_only``.  For the band metric
    ``d`` is the band distance divided by ``m``.
    """
    _check_ab("hasson_bound", a, b)
    _check_metric(metric, m)
    if not K > 0:
        raise PreconditionError("hasson_bound", "K must be positive")
    xi = 0.5 * math.log((b + a) / (b - a))
    mm = int(m) if metric == "band" else 1

    def func(d):
        s = np.asarray(d) / mm
        return np.where(s >= 1, K * np.exp(-xi * s) / (2.0 * np.sqrt(np.maximum(s, 1.0))), np.inf)

    return DecayBound(
        "hasson", metric,
        {"K": float(K), "xi": xi, "a": float(a), "b": float(b), "shape_only": True},
        func, saturate=True,
    )


def xi_bar(a, b):
    """Upper limit ``(b + a)/(b - a)`` of the Chui--Hasson parameter."""
    _check_ab("xi_bar", a, b)
    return (b + a) / (b - a)


def chui_hasson_constant(a, b, xi):
    r"""Prefactor :math:`C = \sqrt\xi\,K_4\,b` with :math:`K_4 = 2/((\xi-1)\sqrt{z_0})`."""
    _check_ab("chui_hasson_bound", a, b)
    xb = xi_bar(a, b)
    if not 1 < xi < xb:
        raise PreconditionError("chui_hasson_bound", f"xi must lie in (1, {xb:.10g}), got {xi}")
    d2 = b * b - a * a
    z0 = (-(xi + 1.0 / xi) / 2.0 + (a * a + b * b) / d2) * d2 / 2.0
    if not z0 > 0:
        raise PreconditionError("chui_hasson_bound", f"z0 = {z0} is not positive")
    K4 = 2.0 / ((xi - 1.0) * math.sqrt(z0))
    return math.sqrt(xi) * K4 * b, z0


def chui_hasson_bound(a, b, xi, m=1, metric="band"):
    r"""Projector bound :math:`C\,\xi^{-d/(2m)}` for spectra in :math:`[-b,-a]\cup[a,b]`.

    Uses :math:`C = \sqrt{\xi}K_4 b`, :math:`K_4 = 2M/(\xi-1)`,
    :math:`M = z_0^{-1/2}` with

    .. math::

        z_0 = \Bigl[-\tfrac12(\xi + \xi^{-1}) + \frac{a^2+b^2}{b^2-a^2}\Bigr]\frac{b^2-a^2}{2},

    admissible for :math:`1 < \xi < (b+a)/(b-a)`.
    """
    _check_metric(metric, m)
    C, z0 = chui_hasson_constant(a, b, xi)
    mm = int(m) if metric == "band" else 1
    alpha = math.log(xi) / (2.0 * mm)
    return _exp_bound(
        "chui_hasson", metric, C, alpha, saturate=True, xi=float(xi), z0=z0, a=float(a), b=float(b)
    )


def select_xi(a, b, c_max=1e6, size=400, m=1, metric="band"):
    """Largest ``xi`` on a grid in ``(1, xi_bar)`` whose constant stays below ``c_max``."""
    xb = xi_bar(a, b)
    best = None
    for xi in 1.0 + (xb - 1.0) * np.linspace(1e-3, 1 - 1e-9, size):
        C, _ = chui_hasson_constant(a, b, xi)
        if C <= c_max:
            best = float(xi)
    if best is None:
        raise PreconditionError("select_xi", f"no xi keeps the constant below {c_max}")
    return chui_hasson_bound(a, b, best, m, metric)


class GapAsymptotics(NamedTuple):
    alpha_exact: float
    alpha_series: float


def gap_asymptotics(a):
    r"""Rate :math:`\tfrac12\ln\frac{1+a}{1-a}` next to its expansion :math:`a + a^3/3`."""
    a = float(a)
    if not 0 <= a < 1:
        raise PreconditionError("gap_asymptotics", f"need 0 <= a < 1, got {a}")
    return GapAsymptotics(math.atanh(a), a + a**3 / 3.0)


class TemperatureAsymptotics(NamedTuple):
    decay_length: float
    linear_model: float

    @property
    def ratio(self):
        return self.decay_length / self.linear_model


def temperature_asymptotics(beta):
    r"""Rate :math:`\ln\bar\chi(\beta)` at :math:`\mu=0` and its model :math:`\pi/\beta`.

    At :math:`\mu = 0`, :math:`\ln\bar\chi = \operatorname{asinh}(\pi/\beta)`;
    ``log1p`` keeps the evaluation accurate for large ``beta``.
    """
    cb = chi_bar_fd(beta, 0.0)
    x = math.pi / beta
    # chi_bar - 1 without cancellation: (pi + sqrt(beta^2+pi^2) - beta)/beta
    cm1 = (math.pi + math.pi**2 / (math.hypot(beta, math.pi) + beta)) / beta
    assert abs(1.0 + cm1 - cb) <= 1e-12 * cb
    return TemperatureAsymptotics(math.log1p(cm1), x)


# ---------------------------------------------------------------------------
# contour and resolvent bounds
# ---------------------------------------------------------------------------


class Circle(NamedTuple):
    center: float
    radius: float

    def nodes(self, k, upper_only=False):
        """Trapezoid nodes at angles ``2 pi (j + 1/2)/k``."""
        theta = 2.0 * np.pi * (np.arange(k) + 0.5) / k
        if upper_only:
            theta = theta[: (k + 1) // 2]
        return self.center + self.radius * np.exp(1j * theta), theta


def default_circle(spec):
    r"""Circle around the occupied interval :math:`[lo, \varepsilon^-]`.

    Centered at the middle ``c`` of the occupied interval with radius the
    geometric mean of its half-width ``w`` and the distance ``eps_plus - c``,
    which balances the inner and outer trapezoid convergence ratios at
    :math:`\sqrt{w/(\varepsilon^+ - c)}`.
    """
    if not spec.has_gap:
        raise PreconditionError("default_circle", "spectral model has no gap")
    c = 0.5 * (spec.lo + spec.eps_minus)
    w = 0.5 * (spec.eps_minus - spec.lo)
    if w == 0:
        # single occupied level: stay well inside the gap
        return Circle(c, 0.5 * (spec.eps_plus - c))
    return Circle(c, math.sqrt(w * (spec.eps_plus - c)))


def check_circle(op, spec, circle):
    """Raise unless ``circle`` encloses exactly the occupied part of ``spec``."""
    c, r = circle
    if not r > 0:
        raise PreconditionError(op, "circle radius must be positive")
    left, right = c - r, c + r
    if not (left < spec.lo and spec.eps_minus < right < spec.eps_plus):
        raise PreconditionError(
            op,
            f"circle [{left:.6g}, {right:.6g}] does not separate [{spec.lo:.6g}, {spec.eps_minus:.6g}] "
            f"from [{spec.eps_plus:.6g}, {spec.hi:.6g}]",
        )


def _distance_to_spectrum(z, spec):
    def seg(z, a, b):
        x = np.clip(np.real(z), a, b)
        return np.abs(z - x)

    return np.minimum(seg(z, spec.lo, spec.eps_minus), seg(z, spec.eps_plus, spec.hi))


def resolvent_constants(H, spec, z, m=None, metric="band"):
    r"""Demko-type constants for :math:`(zI - H)^{-1}` at the points ``z``.

    With :math:`A = zI - H` normal, its singular values lie in
    :math:`[\sigma_{\min}, \sigma_{\max}]` where :math:`\sigma_{\min}` is the
    distance from ``z`` to the spectral set and :math:`\sigma_{\max}` the
    distance to the farther end of ``[lo, hi]``.  Writing
    :math:`A^{-1} = A^*(AA^*)^{-1}` with :math:`AA^*` Hermitian positive
    definite of bandwidth ``2m`` gives

    .. math::

        |[A^{-1}]_{ij}| \le \|A\|_\infty K \lambda^{-m} \lambda^{|i-j|},\quad
        \lambda = q^{1/(2m)},\; q = \frac{\kappa - 1}{\kappa + 1},\;
        \kappa = \frac{\sigma_{\max}}{\sigma_{\min}},\;
        K = \max\Bigl\{\sigma_{\min}^{-2}, \frac{(1+\kappa)^2}{2\sigma_{\max}^2}\Bigr\}.

    For graph distance :math:`\lambda = q^{1/2}` and :math:`\lambda^{-m}`
    becomes :math:`\lambda^{-1}`.

    Returns ``(c, lam)`` arrays over ``z``.
    """
    H = as_hermitian(H)
    if m is None:
        m = max(1, H.bandwidth)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    smin = _distance_to_spectrum(z, spec)
    smax = np.maximum(np.abs(z - spec.lo), np.abs(z - spec.hi))
    if np.any(smin <= 0):
        raise PreconditionError("resolvent_contour_bound", "contour touches the spectral set")
    kappa = smax / smin
    q = (kappa - 1.0) / (kappa + 1.0)
    K = np.maximum(1.0 / smin**2, (1.0 + kappa) ** 2 / (2.0 * smax**2))
    F = H.full()
    diag = F.diagonal()
    off = np.asarray(abs(F - sp.diags_array(diag, offsets=0, shape=F.shape)).sum(axis=1)).ravel()
    row_norm = np.array([np.max(off + np.abs(zz - diag)) for zz in z])
    if metric == "band":
        lam = q ** (1.0 / (2 * m))
        c = K * lam ** (-float(m)) * row_norm
    else:
        lam = np.sqrt(q)
        c = K / lam * row_norm
    return c, lam


def resolvent_contour_bound(H, spec, circle=None, samples=64, metric="band"):
    r"""Projector decay bound from Cauchy's integral over a circle.

    .. math::

        |P_{ij}| \le \frac{\ell(\Gamma)}{2\pi}\max_{z\in\Gamma} c(z)\;
        \bigl(\max_{z\in\Gamma}\lambda(z)\bigr)^{d}

    The maxima are taken over ``samples`` equispaced points including the two
    real-axis crossings, where the circle is closest to the spectrum.
    """
    H = as_hermitian(H)
    if not spec.has_gap:
        raise PreconditionError("resolvent_contour_bound", "spectral model has no gap")
    if not spec.gamma > 0 or spec.eps_plus - spec.eps_minus < 1e-14:
        raise PreconditionError("resolvent_contour_bound", "gap is closed")
    circle = default_circle(spec) if circle is None else Circle(*circle)
    check_circle("resolvent_contour_bound", spec, circle)
    if samples < 2:
        raise PreconditionError("resolvent_contour_bound", "need at least 2 samples")
    theta = 2.0 * np.pi * np.arange(samples) / samples
    theta = np.union1d(theta, [0.0, np.pi])
    z = circle.center + circle.radius * np.exp(1j * theta)
    m = max(1, H.bandwidth)
    c, lam = resolvent_constants(H, spec, z, m, metric)
    c_max, lam_max = float(np.max(c)), float(np.max(lam))
    if not lam_max < 1:
        raise PreconditionError("resolvent_contour_bound", "decay rate lambda >= 1")
    C = c_max * circle.radius
    alpha = -math.log(lam_max)
    return _exp_bound(
        "resolvent_contour", metric, C, alpha, saturate=True,
        center=circle.center, radius=circle.radius, samples=int(samples), lam=lam_max, m=m,
    )


# ---------------------------------------------------------------------------
# thermal state
# ---------------------------------------------------------------------------


def heat_bound(H=None, beta=1.0, chi=2.0, interval=None, m=None, metric="band"):
    r"""Decay bound for :math:`e^{-\beta H}` from the Bernstein estimate.

    Mapping ``[lo, hi]`` onto ``[-1, 1]`` gives
    :math:`e^{-\beta H} = e^{-\beta\,lo}\, g(\hat H)` with
    :math:`g(x) = e^{-\beta'(x+1)}`, :math:`\beta' = \beta(hi-lo)/2`, whose
    maximum on :math:`\mathcal{E}_\chi` is :math:`e^{\beta'(\kappa_1-1)}`.  Hence

    .. math::

        C(\beta) = \frac{2\chi}{\chi-1}\, e^{-\beta\, lo}\, e^{\beta (hi-lo)(\kappa_1-1)/2},
        \qquad \alpha = \ln\chi / m.

    For ``lo = 0`` and ``hi`` an upper bound on :math:`\|H\|_2` this is the
    classical constant; ``interval`` defaults to ``[-r, r]`` with ``r`` the
    1-norm of ``H``.
    """
    if not chi > 1:
        raise PreconditionError("heat_bound", f"chi must exceed 1, got {chi}")
    if not beta >= 0:
        raise PreconditionError("heat_bound", "beta must be nonnegative")
    if interval is None:
        if H is None:
            raise PreconditionError("heat_bound", "need H or an interval")
        from .matrix import norms

        r = norms(H).one_norm
        interval = (-r, r)
    lo, hi = (float(v) for v in interval)
    if not hi >= lo:
        raise PreconditionError("heat_bound", "empty interval")
    if m is None:
        m = max(1, as_hermitian(H).bandwidth) if H is not None else 1
    _check_metric(metric, m)
    kappa1 = EllipseParam(chi).kappa1
    C = 2.0 * chi / (chi - 1.0) * math.exp(-beta * lo + beta * (hi - lo) * (kappa1 - 1.0) / 2.0)
    alpha = math.log(chi) / (int(m) if metric == "band" else 1)
    return _exp_bound(
        "heat_exponential", metric, C, alpha, chi=float(chi), kappa1=kappa1, beta=float(beta),
        lo=lo, hi=hi,
    )


# ---------------------------------------------------------------------------
# truncation bandwidth
# ---------------------------------------------------------------------------


def prescribe_bandwidth(bound, eps):
    r"""Bandwidth :math:`\bar m = \lfloor \alpha^{-1}\ln(2c/((1-e^{-\alpha})\varepsilon)) \rfloor`.

    Every :math:`m \ge \bar m` keeps :math:`\|A - A^{(m)}\|_1 \le \varepsilon` when
    :math:`|A_{ij}| \le c e^{-\alpha|i-j|}`.

    Parameters
    ----------
    bound : DecayBound or (c, alpha)
        Exponential-form bound.
    eps : float
        Target 1-norm truncation error.
    """
    if isinstance(bound, DecayBound):
        if not bound.is_exponential:
            raise PreconditionError("prescribe_bandwidth", f"{bound.family} bound is not exponential")
        c, alpha = bound.constants["c"], bound.constants["alpha"]
    else:
        c, alpha = bound
    c, alpha, eps = float(c), float(alpha), float(eps)
    if not eps > 0:
        raise PreconditionError("prescribe_bandwidth", f"eps must be positive, got {eps}")
    if not (c > 0 and alpha > 0):
        raise PreconditionError("prescribe_bandwidth", "need c > 0 and alpha > 0")
    arg = 2.0 * c / (-math.expm1(-alpha) * eps)
    if arg <= 1.0:
        return 0
    return int(math.floor(math.log(arg) / alpha))


def truncation_error_bound(c, alpha, m):
    r"""Tail bound :math:`2c\,e^{-\alpha(m+1)}/(1-e^{-\alpha})` on :math:`\|A - A^{(m)}\|_1`."""
    return 2.0 * c * math.exp(-alpha * (m + 1)) / (-math.expm1(-alpha))
