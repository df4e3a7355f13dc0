import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsrmax import calculus as calc
from wsrmax.calculus import DomainError, EtaMode, MmCoefficients, MmMatrices
from wsrmax.system_model import (MimoScenario, MisoScenario, wsr_mimo,
                                 wsr_miso)

from conftest import identity_mimo, mimo_instance, miso_instance, unit_miso


def fd_grad(f, W, h=1e-6):
    """Central differences along real and imaginary coordinates, packed
    as ``d/dRe + i d/dIm``."""
    W = np.asarray(W, dtype=complex)
    g = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        E = np.zeros_like(W)
        E[idx] = h
        dr = (f(W + E) - f(W - E)) / (2 * h)
        E[idx] = 1j * h
        di = (f(W + E) - f(W - E)) / (2 * h)
        g[idx] = dr + 1j * di
    return g


def fd_grad_mimo(f, Ws, k, h=1e-6):
    def fk(Wk):
        return f([Wk if j == k else W for j, W in enumerate(Ws)])
    return fd_grad(fk, Ws[k], h)


def rel_err(a, b):
    return np.abs(a - b).max() / np.abs(b).max()


# -- gradients --------------------------------------------------------------
def test_grad_miso_single_user():
    g = calc.grad_wsr_miso(unit_miso([[1, 0]]), np.array([[1, 0]], complex))
    np.testing.assert_allclose(g, [[1, 0]], atol=1e-15)


def test_grad_miso_zero():
    scn, W = miso_instance(0)
    assert np.all(calc.grad_wsr_miso(scn, np.zeros_like(W)) == 0)


def test_grad_miso_directional_derivative():
    # f(w) = ln(1 + |w_1|^2) at w = [1, 0]: d/dt along e_1 is 1
    scn = unit_miso([[1, 0]])
    W = np.array([[1, 0]], complex)
    d = np.array([[1, 0]], complex)
    g = calc.grad_wsr_miso(scn, W)
    t = 1e-6
    fd = (wsr_miso(scn, W + t * d) - wsr_miso(scn, W - t * d)) / (2 * t)
    assert np.real(np.vdot(g, d)) == pytest.approx(fd, rel=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_grad_miso_finite_differences(seed):
    scn, W = miso_instance(seed)
    g = calc.grad_wsr_miso(scn, W)
    assert rel_err(g, fd_grad(lambda V: wsr_miso(scn, V), W)) < 1e-5


def test_grad_miso_closed_form():
    scn, W = miso_instance(3)
    co = calc.mm_coefficients_miso(scn, W)
    ref = 2 * ((scn.weights * np.conj(co.b))[:, None] * scn.channels
               - W @ calc.curvature_miso(scn, co).T)
    np.testing.assert_allclose(calc.grad_wsr_miso(scn, W), ref, atol=1e-12)


def test_grad_mimo_zero():
    scn, Ws = mimo_instance(0)
    for g in calc.grad_wsr_mimo(scn, [0 * W for W in Ws]):
        assert np.all(g == 0)


def test_grad_mimo_single_link_two_forms():
    rng = np.random.default_rng(4)
    H = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    scn = MimoScenario([[H]], 2, 1.0, 1.5, 1.0)
    W = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    F = 1.5 * np.eye(3)
    ref = 2 * H.conj().T @ np.linalg.solve(F + H @ W @ W.conj().T @ H.conj().T,
                                           H @ W)
    np.testing.assert_allclose(calc.grad_wsr_mimo(scn, [W])[0], ref,
                               atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_grad_mimo_finite_differences(seed):
    scn, Ws = mimo_instance(seed, K=3, dims=3, streams=2)
    g = calc.grad_wsr_mimo(scn, Ws)
    for k in range(3):
        fd = fd_grad_mimo(lambda V: wsr_mimo(scn, V), Ws, k)
        assert rel_err(g[k], fd) < 1e-5


def test_grad_mimo_closed_form():
    scn, Ws = mimo_instance(2)
    mats = calc.mm_matrices_mimo(scn, Ws)
    H = scn.channels
    g = calc.grad_wsr_mimo(scn, Ws)
    for k in range(4):
        ref = 2 * (scn.weights[k] * H[k][k].conj().T @ mats.B[k].conj().T
                   - calc.curvature_mimo(scn, mats, k) @ Ws[k])
        np.testing.assert_allclose(g[k], ref, atol=1e-10 * np.abs(ref).max())


# -- MM coefficients --------------------------------------------------------
def test_mm_coefficients_single_user():
    co = calc.mm_coefficients_miso(unit_miso([[1, 0]]),
                                   np.array([[1, 0]], complex))
    assert co.a[0] == pytest.approx(0.5)
    assert co.b[0] == pytest.approx(1.0)


def test_mm_coefficients_orthogonal_anchor():
    scn = unit_miso([[1, 0], [1, 0]])
    co = calc.mm_coefficients_miso(scn, np.array([[0, 1], [0, 1]], complex))
    assert np.all(co.a == 0) and np.all(co.b == 0)


def test_mm_coefficients_nonnegative():
    scn, W = miso_instance(1)
    co = calc.mm_coefficients_miso(scn, W)
    assert np.all(co.a > 0)


def test_mm_matrices_zero_anchor():
    scn, Ws = mimo_instance(1)
    mats = calc.mm_matrices_mimo(scn, [0 * W for W in Ws])
    assert all(np.all(A == 0) for A in mats.A)
    assert all(np.all(B == 0) for B in mats.B)


@pytest.mark.parametrize("seed", range(5))
def test_mm_matrices_psd(seed):
    scn, Ws = mimo_instance(seed)
    for A in calc.mm_matrices_mimo(scn, Ws).A:
        s = np.abs(A).max()
        assert np.abs(A - A.conj().T).max() < 1e-10 * s
        assert np.linalg.eigvalsh(0.5 * (A + A.conj().T))[0] > -1e-10 * s


# -- eta --------------------------------------------------------------------
def test_eta_miso_single_term():
    scn = unit_miso([[1, 0]])
    co = MmCoefficients(np.array([1.0]), np.array([0j]))
    for mode in EtaMode:
        assert calc.eta_miso(scn, co, mode) == pytest.approx(1.0)


def test_eta_miso_orthogonal_pair():
    scn = unit_miso([[1, 0], [0, 1]])
    co = MmCoefficients(np.ones(2), np.zeros(2, complex))
    assert calc.eta_miso(scn, co, "exact") == pytest.approx(1.0)
    assert calc.eta_miso(scn, co, "frobenius") == pytest.approx(2.0)


def test_eta_floor():
    scn = unit_miso([[1, 0]])
    co = MmCoefficients(np.zeros(1), np.zeros(1, complex))
    assert calc.eta_miso(scn, co) == calc.ETA_FLOOR
    mats = MmMatrices([np.zeros((4, 4))], [np.zeros((4, 4))])
    for mode in EtaMode:
        assert calc.eta_mimo(identity_mimo(4), mats, 0, mode) == calc.ETA_FLOOR


def test_eta_mimo_identity():
    mats = MmMatrices([np.eye(4)], [np.eye(4)])
    scn = identity_mimo(4)
    assert calc.eta_mimo(scn, mats, 0, "exact") == pytest.approx(1.0)
    assert calc.eta_mimo(scn, mats, 0, "frobenius") == pytest.approx(8.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_eta_frobenius_dominates(seed):
    scn, W = miso_instance(seed)
    co = calc.mm_coefficients_miso(scn, W)
    ex = calc.eta_miso(scn, co, "exact")
    assert calc.eta_miso(scn, co, "frobenius") >= ex * (1 - 1e-12)
    assert ex == pytest.approx(
        np.linalg.eigvalsh(calc.curvature_miso(scn, co))[-1], rel=1e-12)
    mscn, Ws = mimo_instance(seed, K=3, dims=3)
    mats = calc.mm_matrices_mimo(mscn, Ws)
    for k in range(3):
        assert calc.eta_mimo(mscn, mats, k, "frobenius") >= \
            calc.eta_mimo(mscn, mats, k, "exact") * (1 - 1e-12)


# -- surrogates -------------------------------------------------------------
def random_like(rng, W, power):
    V = rng.normal(size=W.shape) + 1j * rng.normal(size=W.shape)
    return V * np.sqrt(power * rng.random() / np.sum(np.abs(V) ** 2))


@pytest.mark.parametrize("seed", range(3))
def test_surrogate_miso_sandwich(seed, rng):
    scn, Wb = miso_instance(seed)
    f0 = wsr_miso(scn, Wb)
    eta = calc.eta_miso(scn, calc.mm_coefficients_miso(scn, Wb))
    assert calc.surrogate_miso(Wb, Wb, scn) == pytest.approx(f0, abs=1e-10)
    assert calc.surrogate_plus_miso(Wb, Wb, scn, eta) == pytest.approx(
        f0, abs=1e-10)
    for _ in range(200):
        W = random_like(rng, Wb, 4 * scn.power)
        lp = calc.surrogate_plus_miso(W, Wb, scn, eta)
        l = calc.surrogate_miso(W, Wb, scn)
        assert lp <= l + 1e-9
        assert l <= wsr_miso(scn, W) + 1e-9
        # doubling the curvature can only lower the bound
        assert calc.surrogate_plus_miso(W, Wb, scn, 2 * eta) <= lp + 1e-9


def test_surrogate_miso_zero_anchor(rng):
    scn, W = miso_instance(0)
    Z = np.zeros_like(W)
    for _ in range(5):
        assert calc.surrogate_miso(random_like(rng, W, 1), Z, scn) == 0.0


def test_surrogate_miso_gradient_tangency():
    scn, Wb = miso_instance(7)
    g = fd_grad(lambda V: calc.surrogate_miso(V, Wb, scn), Wb)
    assert rel_err(g, calc.grad_wsr_miso(scn, Wb)) < 1e-5


@pytest.mark.parametrize("seed", range(2))
def test_surrogate_mimo_sandwich(seed, rng):
    scn, Wb = mimo_instance(seed, K=3, dims=3)
    mats = calc.mm_matrices_mimo(scn, Wb)
    etas = [calc.eta_mimo(scn, mats, k) for k in range(3)]
    f0 = wsr_mimo(scn, Wb)
    assert calc.surrogate_mimo(Wb, Wb, scn) == pytest.approx(f0, abs=1e-9)
    assert calc.surrogate_plus_mimo(Wb, Wb, scn, etas) == pytest.approx(
        f0, abs=1e-9)
    for _ in range(100):
        Ws = [random_like(rng, W, 4 * p) for W, p in zip(Wb, scn.power)]
        lp = calc.surrogate_plus_mimo(Ws, Wb, scn, etas)
        l = calc.surrogate_mimo(Ws, Wb, scn)
        assert lp <= l + 1e-8 and l <= wsr_mimo(scn, Ws) + 1e-8


def test_surrogate_mimo_zero_anchor(rng):
    scn, Ws = mimo_instance(0, K=2, dims=2)
    Z = [0 * W for W in Ws]
    pt = [random_like(rng, W, 1) for W in Ws]
    assert calc.surrogate_mimo(pt, Z, scn) == 0.0


def test_surrogate_mimo_gradient_tangency():
    scn, Wb = mimo_instance(3, K=2, dims=3, streams=2)
    g = calc.grad_wsr_mimo(scn, Wb)
    for k in range(2):
        fd = fd_grad_mimo(lambda V: calc.surrogate_mimo(V, Wb, scn), Wb, k)
        assert rel_err(fd, g[k]) < 1e-5


# -- bound gaps -------------------------------------------------------------
def rand_pd(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return A @ A.conj().T + 0.1 * np.eye(n)


def rand_c(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_lemma1_scalar():
    gap = calc.evaluate_bound_gap("lemma1", [[2.0]], [[1.0]])
    assert gap == pytest.approx(np.log(2) - 0.5, abs=1e-15)
    assert gap == pytest.approx(0.1931471805599453, abs=1e-15)


def test_bound_gaps_zero_at_anchor(rng):
    x, z = 0.7 - 0.2j, 1.3
    assert abs(calc.evaluate_bound_gap("prop4", (x, z), (x, z))) < 1e-12
    X, Z = rand_c(rng, 3, 2), rand_pd(rng, 3)
    assert abs(calc.evaluate_bound_gap("prop8", (X, Z), (X, Z))) < 1e-10
    assert abs(calc.evaluate_bound_gap("lemma1", Z, Z)) < 1e-10
    assert abs(calc.evaluate_bound_gap("lemma2", (X, Z), (X, Z))) < 1e-10
    L = rand_pd(rng, 3)
    assert abs(calc.evaluate_bound_gap("prop11", X, X, L=L,
                                       M=L + np.eye(3))) < 1e-10


def test_bound_gaps_nonnegative(rng):
    for _ in range(2000):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 3))
        assert calc.evaluate_bound_gap(
            "prop4", (complex(*rng.normal(size=2)), rng.random() + 0.01),
            (complex(*rng.normal(size=2)), rng.random() + 0.01)) >= -1e-10
        P = (rand_c(rng, n, m), rand_pd(rng, n))
        A = (rand_c(rng, n, m), rand_pd(rng, n))
        assert calc.evaluate_bound_gap("prop8", P, A) >= -1e-10
        assert calc.evaluate_bound_gap("lemma1", P[1], A[1]) >= -1e-10
        assert calc.evaluate_bound_gap("lemma2", P, A) >= -1e-10
        L = rand_pd(rng, n) - 0.5 * np.eye(n)
        M = L + rand_pd(rng, n)
        assert calc.evaluate_bound_gap("prop11", P[0], A[0], L=L, M=M) \
            >= -1e-10


def test_bound_gap_domain_errors(rng):
    bad = np.diag([1.0, -1.0])
    with pytest.raises(DomainError):
        calc.evaluate_bound_gap("lemma1", bad, np.eye(2))
    with pytest.raises(DomainError):
        calc.evaluate_bound_gap("prop8", (np.ones((2, 1)), bad),
                                (np.ones((2, 1)), np.eye(2)))
    with pytest.raises(DomainError):
        calc.evaluate_bound_gap("prop4", (1.0, 0.0), (1.0, 1.0))
    with pytest.raises(DomainError):
        calc.evaluate_bound_gap("prop11", np.ones((2, 1)), np.ones((2, 1)),
                                L=np.eye(2), M=0.5 * np.eye(2))
    with pytest.raises(DomainError):
        calc.evaluate_bound_gap("lemma2", (np.ones((2, 1)), np.eye(2)),
                                (np.ones((2, 1)), np.array([[1, 2], [0, 1]])))
    with pytest.raises(ValueError):
        calc.evaluate_bound_gap("prop99", 1, 1)
