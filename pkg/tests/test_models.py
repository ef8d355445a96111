import json
import math

import mpmath as mp
import numpy as np
import pytest
import scipy.linalg as la

from decayproj import models as md
from decayproj.bounds import chi_bar_fd
from decayproj.errors import PreconditionError
from decayproj.matrix import graph_distances, truncate_band
from decayproj.projector import cheb_coeffs_fd, oracle_fd, oracle_projector

from .conftest import roundoff_floor


# -- 1D Toeplitz ---------------------------------------------------------------------------


def test_toeplitz_n2():
    np.testing.assert_allclose(la.eigvalsh(md.toeplitz_1d(2).toarray()), [-0.5, 0.5], atol=1e-15)


def test_toeplitz_closed_form_eigenpairs():
    n = 200
    A = md.toeplitz_1d(n).toarray()
    w, V = md.toeplitz_eigenpairs(n)
    np.testing.assert_allclose(np.sort(la.eigvalsh(A)), np.sort(w), atol=1e-12)
    np.testing.assert_allclose(A @ V, V * w, atol=1e-12)
    np.testing.assert_allclose(V.T @ V, np.eye(n), atol=1e-12)


def test_toeplitz_gap():
    g = [md.toeplitz_gap(n) for n in (10, 100, 1000)]
    assert g[0] > g[1] > g[2] > 0
    w = la.eigvalsh(md.toeplitz_1d(100).toarray())
    assert g[1] == pytest.approx(w[50] - w[49], rel=1e-10)


@pytest.mark.parametrize("f", [md.toeplitz_1d, md.toeplitz_projector_exact, md.kron_2d, md.toeplitz_gap])
@pytest.mark.parametrize("n", [3, 0, -2])
def test_odd_or_nonpositive_size_rejected(f, n):
    with pytest.raises(PreconditionError):
        f(n)


@pytest.mark.parametrize("n", [2, 10, 64, 300])
def test_projector_exact_structure(n):
    P = md.toeplitz_projector_exact(n)
    np.testing.assert_allclose(np.diag(P), 0.5, atol=1e-13)
    for l in range(1, n // 2):
        assert np.max(np.abs(np.diagonal(P, 2 * l))) <= 1e-13


@pytest.mark.parametrize("n", [20, 200, 1000])
def test_projector_exact_matches_oracle(n):
    P = oracle_projector(md.toeplitz_1d(n), 0.0).P
    assert np.max(np.abs(P - md.toeplitz_projector_exact(n))) <= 1e-10


def test_offdiag_ratio_is_sharp():
    P = md.toeplitz_projector_exact(100)
    off = np.sum(P**2) - np.sum(np.diag(P) ** 2)
    assert off / np.sum(P**2) == pytest.approx(0.5, abs=1e-12)


def test_linear_decay_is_sharp():
    consts = []
    for n in (500, 1000, 2000):
        P = md.toeplitz_projector_exact(n)
        j = np.arange(1, n + 1)
        consts.append(np.max(np.abs(P[0]) * (j + 1)))
    assert 0.5 < min(consts) and max(consts) < 2.0
    assert max(consts) - min(consts) < 1e-3 * max(consts)


# -- infinite-size limits ---------------------------------------------------------------


def test_limit_reference_entries():
    assert md.toeplitz_projector_limit(1, 2) == pytest.approx(-4 / (3 * math.pi), rel=1e-15)
    assert md.toeplitz_projector_limit(1, 4) == pytest.approx(8 / (15 * math.pi), rel=1e-15)
    assert md.toeplitz_projector_limit(3, 3) == 0.5
    for i in range(1, 6):
        assert md.toeplitz_projector_limit(i, i + 2) == 0.0


def test_limit_against_large_finite_n():
    P = md.toeplitz_projector_exact(4000)
    for i, j in [(1, 2), (1, 4), (2, 7), (5, 10)]:
        assert abs(P[i - 1, j - 1] - md.toeplitz_projector_limit(i, j)) <= 1e-3


def test_limit_symmetric():
    for i in range(1, 8):
        for j in range(1, 8):
            assert md.toeplitz_projector_limit(i, j) == pytest.approx(md.toeplitz_projector_limit(j, i))


def test_limit_rejects_zero_index():
    with pytest.raises(PreconditionError):
        md.toeplitz_projector_limit(0, 1)


def test_fd_limit_infinite_temperature():
    for i in (1, 3, 8):
        assert md.toeplitz_fd_limit(i, i, 0.0) == pytest.approx(0.5, abs=1e-12)
        assert md.toeplitz_fd_limit(i, i + 1, 0.0) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("i,j", [(1, 1), (1, 2), (2, 5), (4, 11)])
def test_fd_limit_against_mpmath_quadrature(i, j):
    beta = 10.0
    with mp.workdps(25):
        f = lambda x: (mp.cos((i - j) * mp.pi * x) - mp.cos((i + j) * mp.pi * x)) / (1 + mp.exp(beta * mp.cos(mp.pi * x)))
        ref = float(mp.quad(f, [0, 0.5, 1]))
    assert md.toeplitz_fd_limit(i, j, beta) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("i,j", [(1, 1), (1, 2), (3, 6), (7, 7), (2, 13)])
def test_fd_limit_chebyshev_identity(i, j):
    beta = 10.0
    c = cheb_coeffs_fd(beta, 0.0, 80).coeffs
    a = lambda k: c[0] if k == 0 else c[k] / 2
    assert md.toeplitz_fd_limit(i, j, beta) == pytest.approx(a(abs(i - j)) - a(i + j), abs=1e-10)


def test_fd_limit_decay_rate():
    beta = 10.0
    k = np.arange(11, 31, 2)
    v = [abs(md.toeplitz_fd_limit(1, 1 + kk, beta)) for kk in k]
    slope = np.polyfit(k, np.log(v), 1)[0]
    assert slope == pytest.approx(-math.log(chi_bar_fd(beta, 0.0)), abs=1e-3)


def test_fd_finite_matches_limit():
    F = oracle_fd(md.toeplitz_1d(400), 10.0, 0.0).P
    for i, j in [(1, 2), (1, 1), (3, 4)]:
        assert abs(F[i - 1, j - 1] - md.toeplitz_fd_limit(i, j, 10.0)) <= 2e-3


def test_fd_exact_matches_oracle():
    F = oracle_fd(md.toeplitz_1d(100), 10.0, 0.0).P
    assert np.max(np.abs(F - md.toeplitz_fd_exact(100, 10.0))) <= 1e-10


# -- 2D Kronecker -----------------------------------------------------------------------------


def test_kron_2d_small_spectrum():
    w = la.eigvalsh(md.kron_2d(2).toarray())
    lam = np.cos(np.arange(1, 3) * np.pi / 3)
    expect = np.sort([(x + y) / 2 for x in lam for y in lam])
    np.testing.assert_allclose(w, expect, atol=1e-14)


def test_kron_2d_pattern_and_spectrum():
    H = md.kron_2d(8)
    w = la.eigvalsh(H.toarray())
    assert w.min() >= -1 and w.max() <= 1
    assert graph_distances(H, sources=[0]).max_degree <= 4


def test_kron_sum_has_eigenvalues_at_zero():
    # the Kronecker sum is not gapped at zero, so there is no projector to compare
    with pytest.raises(PreconditionError):
        oracle_projector(md.kron_2d(4), 0.0)


@pytest.mark.parametrize("n", [4, 10])
def test_kron_product_projector_formula(n):
    P = oracle_projector(md.kron_product(n), 0.0).P
    np.testing.assert_allclose(P, md.kron_projector_formula(n), atol=1e-10)


def test_kron_projector_block_structure():
    n = 10
    P1 = md.toeplitz_projector_exact(n)
    P = oracle_projector(md.kron_product(n), 0.0).P
    blocks = P.reshape(n, n, n, n).transpose(0, 2, 1, 3)
    for k in range(n):
        np.testing.assert_allclose(blocks[k, k], 0.5 * np.eye(n), atol=1e-10)
        for l in range(n):
            if k != l:
                np.testing.assert_allclose(blocks[k, l], P1[k, l] * (np.eye(n) - 2 * P1), atol=1e-10)


# -- random gapped families ----------------------------------------------------------------


@pytest.mark.parametrize("m", [1, 2, 4])
def test_gapped_random_spectrum_and_band(m):
    H, spec, lam = md.gapped_random(120, m, 0.4, n_e=50, seed=3, return_eigenvalues=True)
    A = H.toarray()
    assert H.bandwidth <= m
    np.testing.assert_allclose(la.eigvalsh(A), lam, atol=1e-10)
    assert np.sum(lam < 0) == 50 == spec.n_e
    assert np.all(np.abs(lam) >= 0.4) and np.all(np.abs(lam) <= 1)


def test_gapped_random_deterministic():
    a, _ = md.gapped_random(50, 2, 0.5, seed=9)
    b, _ = md.gapped_random(50, 2, 0.5, seed=9)
    c, _ = md.gapped_random(50, 2, 0.5, seed=10)
    np.testing.assert_array_equal(a.toarray(), b.toarray())
    assert not np.array_equal(a.toarray(), c.toarray())


@pytest.mark.parametrize(
    "kwargs",
    [dict(seed=None), dict(a=0.0, seed=1), dict(a=1.0, seed=1), dict(n_e=0, seed=1), dict(m=40, seed=1)],
)
def test_gapped_random_rejects(kwargs):
    with pytest.raises(PreconditionError):
        md.gapped_random(40, **{"m": 1, "a": 0.5, **kwargs})


@pytest.mark.parametrize("seed", range(8))
def test_example_family_decay_constants(seed):
    H, _ = md.gapped_random(200, 1, 0.5, n_e=100, seed=seed)
    P = np.abs(oracle_projector(H, 0.0).P)
    env = np.array([np.diagonal(P, d).max() for d in range(200)])
    d = np.arange(200)
    keep = (d > 0) & (env > 10 * roundoff_floor(P))
    alpha = -np.polyfit(d[keep], np.log(env[keep]), 1)[0]
    assert 0.3 < alpha < 1.2
    # the illustrative constants c = 10, alpha = 0.6 bound the whole family
    assert np.all(env <= 10 * np.exp(-0.6 * d) + roundoff_floor(P))


@pytest.mark.parametrize("m", [1, 3])
def test_band_reduce_preserves_spectrum(rng, m):
    X = rng.standard_normal((40, 40))
    A = X + X.T
    B = md.band_reduce(A, m)
    i, j = np.indices(B.shape)
    assert np.all(B[np.abs(i - j) > m] == 0)
    np.testing.assert_allclose(la.eigvalsh(B), la.eigvalsh(A), atol=1e-12 * np.abs(A).max() * 40)


def test_haar_orthogonal(rng):
    Q = md.haar_orthogonal(30, rng)
    np.testing.assert_allclose(Q.T @ Q, np.eye(30), atol=1e-13)


# -- synthetic decay -------------------------------------------------------------------------


def test_synthetic_large_alpha_is_diagonal():
    A = md.synthetic_decay(10, 3.0, 800.0).toarray()
    np.testing.assert_array_equal(A, 3.0 * np.eye(10))


def test_synthetic_tail_geometric_sum():
    n, c, alpha, m = 300, 2.0, 0.4, 7
    A = md.synthetic_decay(n, c, alpha).toarray()
    col = n // 2
    tail = np.abs(A - truncate_band(A, m))[:, col].sum()
    q = math.exp(-alpha)
    # both one-sided tails of a central column, truncated at the matrix edge
    k = np.arange(m + 1, n)
    expect = c * (np.sum(q**k[k <= col]) + np.sum(q**k[k <= n - 1 - col]))
    assert tail == pytest.approx(expect, rel=1e-12)
    assert np.abs(A - truncate_band(A, m)).sum(axis=0).max() <= 2 * c * q ** (m + 1) / (1 - q)


def test_synthetic_random_phase():
    a = md.synthetic_decay(30, 1.5, 0.7, kind="random_phase", seed=4).toarray()
    b = md.synthetic_decay(30, 1.5, 0.7, kind="random_phase", seed=4).toarray()
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(a, a.conj().T)
    env = md.synthetic_decay(30, 1.5, 0.7).toarray()
    np.testing.assert_allclose(np.abs(a), env, rtol=1e-14)


def test_synthetic_rejects():
    with pytest.raises(PreconditionError):
        md.synthetic_decay(5, 0.0, 1.0)
    with pytest.raises(PreconditionError):
        md.synthetic_decay(5, 1.0, 1.0, kind="other")


@pytest.mark.parametrize("kappa", [2.0, 50.0, 1e4])
def test_banded_spd_condition(kappa):
    S = md.banded_spd(80, 2, kappa, seed=1).toarray()
    w = la.eigvalsh(S)
    assert w[0] > 0 and w[-1] / w[0] == pytest.approx(kappa, rel=1e-8)


# -- ModelSpec ---------------------------------------------------------------------------------


def test_model_spec_roundtrip():
    ms = md.ModelSpec("gapped_random", 40, {"m": 1, "a": 0.5, "seed": 2})
    rec = json.loads(ms.to_json())
    assert rec == {"kind": "gapped_random", "n": 40, "parameters": {"a": 0.5, "m": 1, "seed": 2}}
    H1, _ = ms.build()
    H2, _ = md.ModelSpec(rec["kind"], rec["n"], rec["parameters"]).build()
    np.testing.assert_array_equal(H1.toarray(), H2.toarray())


def test_model_spec_toeplitz_spectral_model():
    H, spec = md.ModelSpec("toeplitz1d", 10).build()
    assert spec.n_e == 5 and spec.eps_minus < 0 < spec.eps_plus


def test_model_spec_rejects():
    with pytest.raises(PreconditionError):
        md.ModelSpec("bogus", 4)
    with pytest.raises(PreconditionError):
        md.ModelSpec("kron2d", 5)
