"""Acceptance checks shared by the ``validate`` command and the test suite.

Each check returns a :class:`CheckResult`; ``run_checks`` filters by id or
group and never raises for a failed check.
"""
from __future__ import annotations

import math
import time
import timeit
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bounds as bd
from . import models as md
from . import orthobasis as ob
from . import projector as pj
from .matrix import band_distance_matrix, truncate_band

GROUPS = ("bounds", "toeplitz", "projector", "ortho", "asymptotics", "energy")


@dataclass
class CheckResult:
    id: int
    name: str
    group: str
    passed: bool
    detail: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.id:2d} {self.name} ({self.elapsed:.2f}s)"

    def to_record(self):
        return {
            "id": self.id, "name": self.name, "group": self.group,
            "passed": bool(self.passed), "elapsed": self.elapsed, "detail": self.detail,
        }


@dataclass(frozen=True)
class Check:
    id: int
    name: str
    group: str
    func: Callable


REGISTRY: list[Check] = []


def check(id, name, group):
    def deco(f):
        REGISTRY.append(Check(id, name, group, f))
        return f

    return deco


def _best_time(f, number=200, repeat=5):
    return min(timeit.repeat(f, number=number, repeat=repeat)) / number


# ---------------------------------------------------------------------------


@check(1, "chi_bar reproduction", "bounds")
def _chi_bar(seed):
    v = bd.chi_bar_fd(10.0, 0.0)
    t = _best_time(lambda: bd.chi_bar_fd(10.0, 0.0))
    ok = abs(v - 1.3623463) <= 1e-6 and t < 1e-3
    return ok, {"value": v, "target": 1.3623463, "seconds": t}


@check(2, "truncation bandwidth reproduction", "bounds")
def _mbar(seed):
    v = bd.prescribe_bandwidth((10.0, 0.6), 1e-6)
    t = _best_time(lambda: bd.prescribe_bandwidth((10.0, 0.6), 1e-6))
    return v == 29 and t < 1e-3, {"value": v, "target": 29, "seconds": t}


@check(3, "Toeplitz projector exactness", "toeplitz")
def _toeplitz_exact(seed):
    t0 = time.perf_counter()
    P = pj.oracle_projector(md.toeplitz_1d(200), 0.0).P
    t = time.perf_counter() - t0
    diag = float(np.max(np.abs(np.diag(P) - 0.5)))
    even = max(float(np.max(np.abs(np.diagonal(P, 2 * l)))) for l in range(1, 100))
    ok = diag <= 1e-12 and even <= 1e-12 and t < 5.0
    return ok, {"diag_error": diag, "even_offset_max": even, "seconds": t}


@check(4, "Toeplitz infinite-size limit", "toeplitz")
def _toeplitz_limit(seed):
    t0 = time.perf_counter()
    P = pj.oracle_projector(md.toeplitz_1d(2000), 0.0).P
    t = time.perf_counter() - t0
    target = -4.0 / (3.0 * math.pi)
    err = abs(P[0, 1] - target)
    return err <= 2e-3 and t < 60.0, {"P12": float(P[0, 1]), "target": target, "error": err, "seconds": t}


@check(5, "projector bound validity", "bounds")
def _bound_validity(seed):
    t0 = time.perf_counter()
    D = band_distance_matrix(200)
    violations, worst, count = 0, 0.0, 0
    for s in range(7):
        for gamma in (0.2, 0.5, 1.0):
            H, spec = md.gapped_random(200, 1, gamma / 2.0, seed=seed + s)
            b = bd.projector_bound(spec, 1e-8)
            P = np.abs(pj.oracle_projector(H, 0.0).P)
            env = b.rate(D)
            violations += int(np.sum(P > env))
            worst = max(worst, float(np.max(P / env)))
            count += 1
    t = time.perf_counter() - t0
    ok = violations == 0 and count >= 20 and t < 300
    return ok, {"instances": count, "violations": violations, "max_ratio": worst, "seconds": t}


@check(6, "Bernstein chain", "bounds")
def _bernstein_chain(seed):
    beta, mu = 10.0, 0.0
    coeffs = pj.cheb_coeffs_fd(beta, mu, 60)
    # fine grid plus Chebyshev extreme points of every degree considered
    x = np.unique(np.concatenate([np.linspace(-1, 1, 20001), np.cos(np.pi * np.arange(0, 241) / 240)]))
    f = bd.fermi_dirac(x, beta, mu)
    chis = bd.chi_grid(beta, mu, 20, margin=1e-3)
    Ms = [bd.ellipse_max_fd(beta, mu, c) for c in chis]
    violations, worst = 0, 0.0
    for k in range(5, 61):
        err = float(np.max(np.abs(np.polynomial.chebyshev.chebval(x, coeffs.coeffs[: k + 1]) - f)))
        for chi, M in zip(chis, Ms):
            bound = 2.0 * M / (chi**k * (chi - 1.0))
            violations += int(err > bound)
            worst = max(worst, err / bound)
    return violations == 0, {"violations": violations, "max_ratio": worst, "chi_samples": len(chis)}


@check(7, "contour quadrature convergence", "projector")
def _contour(seed):
    H, spec = md.gapped_random(100, 1, 0.5, seed=seed)
    O = pj.oracle_projector(H, 0.0).P
    err64 = float(np.linalg.norm(pj.contour_projector(H, spec, 64).P - O, 2))
    ks, errs = [], []
    for k in range(8, 66, 2):
        e = float(np.linalg.norm(pj.contour_projector(H, spec, k).P - O, 2))
        if e <= 1e-12:
            break
        ks.append(k)
        errs.append(e)
    slope, r2 = _linfit(np.array(ks, float), np.log(errs))
    ok = err64 <= 1e-8 and slope < 0 and r2 >= 0.99 and len(ks) >= 3
    return ok, {"error_64": err64, "slope": slope, "r2": r2, "nodes": ks, "errors": errs}


def _linfit(x, y):
    p = np.polyfit(x, y, 1)
    resid = y - np.polyval(p, x)
    ss = float(np.sum((y - y.mean()) ** 2))
    return float(p[0]), 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0


@check(8, "inverse decay bound", "ortho")
def _demko(seed):
    kappas = np.geomspace(2.0, 1e4, 20)
    D = band_distance_matrix(150)
    violations, worst = 0, 0.0
    for s, kappa in enumerate(kappas):
        m = 1 + s % 3
        S = md.banded_spd(150, m, kappa, seed=seed + s)
        A = S.toarray()
        a, b = ob.extreme_eigenvalues(A)
        dc = ob.demko_constants(a, b, m)
        Si = np.abs(np.linalg.inv(A))
        env = dc.K * np.power(dc.lam, D)
        violations += int(np.sum(Si > env))
        worst = max(worst, float(np.max(Si / env)))
    return violations == 0, {"instances": len(kappas), "violations": violations, "max_ratio": worst}


@check(9, "product decay", "ortho")
def _product(seed):
    n, alpha, alpha_p = 200, 1.0, 0.5
    A = md.synthetic_decay(n, 1.0, alpha).toarray()
    B = md.synthetic_decay(n, 2.0, alpha, kind="random_phase", seed=seed).toarray()
    r = ob.product_decay_check(A, B, alpha, 1.0, 2.0, alpha_p, rtol=0.0)
    return r.ok, r._asdict()


@check(10, "gap and temperature asymptotics", "asymptotics")
def _asymptotics(seed):
    gap = {}
    ok = True
    for a in (0.2, 0.1, 0.05, 0.01):
        g = bd.gap_asymptotics(a)
        r = abs(g.alpha_exact - g.alpha_series)
        gap[str(a)] = r / a**5
        ok &= r <= a**5
    temp = {}
    for beta in (1e2, 1e3, 1e4):
        t = bd.temperature_asymptotics(beta)
        temp[str(beta)] = t.ratio
        ok &= 1 - 10 / beta**2 <= t.ratio <= 1 + 10 / beta**2
    return ok, {"gap_remainder_over_a5": gap, "temperature_ratio": temp}


@check(11, "disjoint-interval rate comparison", "bounds")
def _xi_vs_chi(seed):
    rows = []
    ok = True
    for gamma in np.linspace(0.05, 0.5, 20):
        beta = bd.beta_from_gap(gamma, 1e-5)
        cb = bd.chi_bar_fd(beta, 0.0)
        xb = bd.xi_bar(gamma / 2.0, 1.0)
        rows.append([float(gamma), 1.0 / xb, 1.0 / cb])
        ok &= 1.0 / xb < 1.0 / cb
    return ok, {"rows": rows}


@check(12, "energy error estimate", "energy")
def _energy(seed):
    violations, worst = 0, 0.0
    n = 200
    for s in range(10):
        H, spec = md.gapped_random(n, 4, 0.3, seed=seed + s)
        Hd = H.toarray()
        scale = float(np.linalg.norm(Hd, 2))
        Hd /= scale
        P = pj.oracle_projector(Hd, 0.0).P
        n_e = int(round(np.trace(P)))
        Hh = truncate_band(Hd, 2)
        Ph = truncate_band(P, 6 + s % 3)
        measured = abs(np.trace(Ph @ Hh) - np.trace(P @ Hd)) / n_e
        b = pj.energy_error_bounds(
            pj.PerturbationNorms.of(Hh - Hd), pj.PerturbationNorms.of(Ph - P), n_e, n / n_e, "two_norm_one"
        )
        violations += int(measured > b.total)
        worst = max(worst, measured / b.total)
    return violations == 0, {"experiments": 10, "violations": violations, "max_ratio": worst}


@check(13, "entry-count scaling", "energy")
def _entry_count(seed):
    eps = 1e-3
    per_n = {}
    ok = True
    for n in (100, 200, 400, 800):
        counts = []
        for s in range(3):
            H, spec = md.gapped_random(n, 1, 0.5, seed=seed + s)
            P = pj.oracle_projector(H, 0.0).P
            counts.append(int(np.sum(np.abs(P) >= eps)))
        n_e, n_b = n // 2, 2.0
        limit = n * (1.0 - 1.0 / n_b) / (eps**2 * n_b)
        ok &= max(counts) <= limit
        per_n[n] = float(np.mean(counts)) / n
    ratios = list(per_n.values())
    ok &= all(ratios[i + 1] <= 1.1 * ratios[i] for i in range(len(ratios) - 1))
    return ok, {"count_over_n": {str(k): v for k, v in per_n.items()}}


# ---------------------------------------------------------------------------


def select(only=None):
    """Checks whose id or group appears in ``only`` (all when ``None``)."""
    if not only:
        return list(REGISTRY)
    keys = {str(o).strip() for o in only}
    unknown = keys - {str(c.id) for c in REGISTRY} - set(GROUPS)
    if unknown:
        raise ValueError(f"unknown checks or groups: {sorted(unknown)}")
    return [c for c in REGISTRY if str(c.id) in keys or c.group in keys]


def run_check(c, seed=0):
    t0 = time.perf_counter()
    try:
        ok, detail = c.func(seed)
    except Exception as e:  # a crashing check is a failed check
        ok, detail = False, {"error": f"{type(e).__name__}: {e}"}
    return CheckResult(c.id, c.name, c.group, bool(ok), detail, time.perf_counter() - t0)


def run_checks(only=None, seed=0):
    return [run_check(c, seed) for c in select(only)]
