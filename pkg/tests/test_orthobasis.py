import math

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given
from hypothesis import strategies as st

from decayproj import orthobasis as ob
from decayproj.errors import NotSPDError, PreconditionError
from decayproj.matrix import SparseHermitian, band_distance_matrix
from decayproj.models import banded_spd, gapped_random, synthetic_decay
from decayproj.projector import oracle_projector

from .conftest import assert_entries_below


def _overlap(n=100, m=2, kappa=20.0, seed=0):
    return banded_spd(n, m, kappa, seed=seed, unit_diagonal=True)


# -- Cholesky ------------------------------------------------------------------------------


def test_cholesky_identity():
    np.testing.assert_array_equal(ob.cholesky_banded(np.eye(5)), np.eye(5))


def test_cholesky_two_by_two():
    L = ob.cholesky_banded(np.array([[1.0, 0.5], [0.5, 1.0]]))
    np.testing.assert_allclose(L, [[1.0, 0.0], [0.5, math.sqrt(3) / 2]], atol=1e-15)


@pytest.mark.parametrize("m", [1, 3])
def test_cholesky_random_banded(m):
    S = banded_spd(300, m, 50.0, seed=4).toarray()
    L = ob.cholesky_banded(S)
    assert np.linalg.norm(L @ L.T - S, "fro") / np.linalg.norm(S, "fro") <= 1e-12
    i, j = np.indices(L.shape)
    assert np.all(L[(i - j > m) | (j > i)] == 0)


def test_cholesky_complex_hermitian():
    S = np.array([[2.0, 0.5j, 0], [-0.5j, 2.0, 0.3], [0, 0.3, 1.0]])
    L = ob.cholesky_banded(S)
    np.testing.assert_allclose(L @ L.conj().T, S, atol=1e-15)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotSPDError):
        ob.cholesky_banded(np.array([[1.0, 2.0], [2.0, 1.0]]))


# -- inverse Cholesky ---------------------------------------------------------------------


def test_inverse_cholesky_identity():
    np.testing.assert_array_equal(ob.inverse_cholesky(np.eye(4)), np.eye(4))


def test_inverse_cholesky_exact_residual():
    S = _overlap(100, 2, 30.0, seed=1).toarray()
    Z = ob.inverse_cholesky(S)
    assert np.all(np.tril(Z, -1) == 0)
    assert np.linalg.norm(Z.T @ S @ Z - np.eye(100), 2) <= 1e-10


@pytest.mark.parametrize("m", [1, 2, 3])
@pytest.mark.parametrize("seed", range(3))
def test_inverse_cholesky_decay_bound(m, seed):
    S = _overlap(120, m, 10.0, seed=seed).toarray()
    Z = ob.inverse_cholesky(S)
    a, b = ob.extreme_eigenvalues(S)
    dc = ob.demko_constants(a, b, m)
    i, j = np.indices(Z.shape)
    env = np.where(j >= i, dc.K1 * dc.lam ** np.maximum(j - i, 0).astype(float), 0.0)
    assert_entries_below(Z, env)


def test_inverse_cholesky_rejects_negative_drop():
    with pytest.raises(PreconditionError):
        ob.inverse_cholesky(np.eye(3), drop_tol=-1)


def test_dropped_residual_decreases():
    S = _overlap(150, 2, 50.0, seed=2)
    tols = 10.0 ** -np.arange(2, 9)
    res = [ob.factor_set(S, "inverse_cholesky", t).residual() for t in tols]
    assert all(r2 <= 1.1 * r1 for r1, r2 in zip(res, res[1:]))
    assert res[-1] < 1e-6 < res[0]


# -- Demko constants -------------------------------------------------------------------------


def test_demko_identity_limit():
    dc = ob.demko_constants(2.0, 2.0)
    assert dc.q == 0 and dc.lam == 0
    assert dc.bound().rate(np.array([1.0, 5.0])).tolist() == [0.0, 0.0]


def test_demko_reference_box():
    dc = ob.demko_constants(0.5, 2.0, 1)
    assert dc.kappa == 4.0
    assert dc.q == pytest.approx(1 / 3)
    assert dc.K == pytest.approx(max(2.0, 9 / 4))


@pytest.mark.parametrize("seed", range(5))
def test_demko_bound_on_spectrum_box(seed):
    rng = np.random.Generator(np.random.Philox(seed))
    n = 80
    S = np.diag(rng.uniform(0.5, 2.0, n))
    off = rng.uniform(-0.3, 0.3, n - 1)
    S += np.diag(off, 1) + np.diag(off, -1)
    a, b = ob.extreme_eigenvalues(S)
    dc = ob.demko_constants(a, b, 1)
    assert_entries_below(np.linalg.inv(S), dc.K * dc.lam ** band_distance_matrix(n).astype(float))


def test_demko_blows_up():
    Ks = [ob.demko_constants(1.0 / k, 1.0).K for k in (10, 1e3, 1e5)]
    assert Ks[0] < Ks[1] < Ks[2]


@pytest.mark.parametrize("a,b,m", [(0.0, 1.0, 1), (1.0, 0.5, 1), (1.0, 2.0, 0)])
def test_demko_rejects(a, b, m):
    with pytest.raises(PreconditionError):
        ob.demko_constants(a, b, m)


@given(st.integers(0, 2**31), st.floats(1.5, 1e4), st.integers(1, 4))
def test_demko_property(seed, kappa, m):
    S = banded_spd(60, m, kappa, seed=seed).toarray()
    a, b = ob.extreme_eigenvalues(S)
    dc = ob.demko_constants(a, b, m)
    assert_entries_below(np.linalg.inv(S), dc.K * dc.lam ** band_distance_matrix(60).astype(float))


# -- Lowdin --------------------------------------------------------------------------------


def test_lowdin_scaled_identity():
    np.testing.assert_allclose(ob.lowdin_inverse_sqrt(4 * np.eye(5)).Z, 0.5 * np.eye(5), atol=1e-15)


def test_lowdin_spectral_reconstruction(rng):
    Q, _ = la.qr(rng.standard_normal((30, 30)))
    lam = rng.uniform(0.2, 3.0, 30)
    S = (Q * lam) @ Q.T
    Z = ob.lowdin_inverse_sqrt(0.5 * (S + S.T)).Z
    np.testing.assert_allclose(Z, (Q * lam**-0.5) @ Q.T, atol=1e-12)
    assert np.linalg.norm(Z @ S @ Z - np.eye(30), 2) <= 1e-10


@pytest.mark.parametrize("m,kappa", [(1, 10.0), (2, 50.0), (3, 100.0)])
def test_lowdin_decay_slope(m, kappa):
    S = _overlap(200, m, kappa, seed=1).toarray()
    a, b = ob.extreme_eigenvalues(S)
    sk = math.sqrt(b / a)
    q0 = (sk - 1) / (sk + 1)
    r = ob.lowdin_inverse_sqrt(S)
    assert r.slope <= math.log(q0) / m
    assert_entries_below(r.Z, r.K2 * r.lam ** band_distance_matrix(200).astype(float))


def test_lowdin_rejects():
    with pytest.raises(NotSPDError):
        ob.lowdin_inverse_sqrt(np.diag([1.0, -1.0]))
    with pytest.raises(PreconditionError):
        ob.lowdin_inverse_sqrt(_overlap(20, 1, 10.0).toarray(), q=1e-6)


# -- congruence and pipeline ---------------------------------------------------------------------


def test_congruence_identity():
    H, _ = gapped_random(30, 1, 0.5, seed=1)
    np.testing.assert_allclose(ob.congruence(H, np.eye(30)).toarray(), H.toarray(), atol=1e-15)


@pytest.mark.parametrize("kind", ob.FACTORS)
def test_unit_overlap_pipeline(kind):
    H, _ = gapped_random(30, 1, 0.5, seed=1)
    fs = ob.factor_set(np.eye(30), kind)
    np.testing.assert_allclose(ob.congruence(H, fs.Z).toarray(), H.toarray(), atol=1e-14)


@pytest.mark.parametrize("kind", ob.FACTORS)
def test_congruence_matches_generalized_problem(kind):
    H, _ = gapped_random(100, 2, 0.4, seed=3)
    S = _overlap(100, 2, 20.0, seed=3)
    Ht = ob.congruence(H, ob.factor_set(S, kind).Z)
    np.testing.assert_allclose(
        la.eigvalsh(Ht.toarray()), ob.generalized_eigenvalues(H, S), atol=1e-8
    )


def test_factor_choices_give_same_spectrum():
    H, _ = gapped_random(80, 1, 0.4, seed=4)
    S = _overlap(80, 1, 15.0, seed=4)
    w = [la.eigvalsh(ob.congruence(H, ob.factor_set(S, k).Z).toarray()) for k in ob.FACTORS]
    np.testing.assert_allclose(w[0], w[1], atol=1e-8)


def test_pipeline_occupied_set():
    H, _ = gapped_random(100, 1, 0.4, seed=5)
    S = _overlap(100, 1, 5.0, seed=5)
    g = ob.generalized_eigenvalues(H, S)
    k = int(np.argmax(np.diff(g)))
    mu = 0.5 * (g[k] + g[k + 1])
    Ht = ob.congruence(H, ob.factor_set(S).Z)
    P = oracle_projector(Ht, mu).P
    w, V = la.eigh(Ht.toarray())
    occ = w < mu
    np.testing.assert_allclose(w[occ], g[g < mu], atol=1e-8)
    np.testing.assert_allclose(P, V[:, occ] @ V[:, occ].T, atol=1e-10)


def test_factor_set_metadata():
    S = _overlap(60, 2, 10.0, seed=0)
    fs = ob.factor_set(S)
    assert fs.cholesky_residual() <= 1e-12
    assert fs.info["max_bound_ratio"] <= 1
    rec = fs.to_record()
    assert rec["kind"] == "inverse_cholesky" and rec["kappa"] == pytest.approx(fs.kappa)
    lw = ob.factor_set(S, "lowdin")
    np.testing.assert_allclose(lw.Z, lw.Z.T, atol=1e-14)


def test_factor_set_requires_unit_diagonal():
    with pytest.raises(PreconditionError):
        ob.factor_set(banded_spd(20, 1, 10.0, seed=0))
    with pytest.raises(PreconditionError):
        ob.factor_set(_overlap(20, 1), "lowdin", drop_tol=1e-3)
    with pytest.raises(PreconditionError):
        ob.factor_set(_overlap(20, 1), "qr")


def test_normalize_overlap():
    S = banded_spd(40, 2, 10.0, seed=3)
    N = ob.normalize_overlap(S)
    np.testing.assert_allclose(N.diagonal(), 1.0, atol=1e-15)
    d = np.sqrt(S.diagonal())
    np.testing.assert_allclose(N.toarray(), S.toarray() / np.outer(d, d), atol=1e-15)


# -- product decay ---------------------------------------------------------------------------------


def test_product_identity():
    r = ob.product_decay_check(np.eye(10), np.eye(10), 1.0, 1.0, 1.0, 0.5)
    assert r.ok


def test_product_synthetic_exact():
    A = synthetic_decay(200, 1.0, 1.0).toarray()
    B = synthetic_decay(200, 2.0, 1.0).toarray()
    r = ob.product_decay_check(A, B, 1.0, 1.0, 2.0, 0.5, rtol=0.0)
    assert r.ok and r.hypothesis_ratio_a == pytest.approx(1) and r.hypothesis_ratio_b == pytest.approx(1)
    assert r.c == pytest.approx(2.0 * (1 + math.exp(-0.5)) / (1 - math.exp(-0.5)))


@given(st.floats(0.2, 3.0), st.floats(0.05, 0.95), st.integers(0, 2**31))
def test_product_property(alpha, frac, seed):
    A = synthetic_decay(60, 1.0, alpha, kind="random_phase", seed=seed).toarray()
    B = synthetic_decay(60, 1.5, alpha, kind="random_phase", seed=seed + 1).toarray()
    assert ob.product_decay_check(A, B, alpha, 1.0, 1.5, frac * alpha).ok


def test_product_three_factor_chain():
    H, _ = gapped_random(120, 1, 0.5, seed=2)
    S = _overlap(120, 1, 5.0, seed=2)
    Z = ob.factor_set(S, "lowdin").Z
    Hd = H.toarray()
    alpha = 0.5 * min(-ob.decay_slope(Z), 20.0)
    cz, ch = ob.measured_decay_constant(Z, alpha), ob.measured_decay_constant(Hd, alpha)
    a1 = 0.75 * alpha
    first = ob.product_decay_check(Z.T, Hd, alpha, cz, ch, a1)
    assert first.ok
    a2 = 0.5 * alpha
    second = ob.product_decay_check(Z.T @ Hd, Z, a1, first.c, cz, a2)
    assert second.ok
    # the chained constant bounds the full congruence
    env = second.c * np.exp(-a2 * band_distance_matrix(120))
    assert_entries_below(Z.T @ Hd @ Z, env)


def test_product_rejects_rate():
    with pytest.raises(PreconditionError):
        ob.product_decay_check(np.eye(3), np.eye(3), 1.0, 1.0, 1.0, 1.0)
