"""
Gradients of the weighted sum-rate, minorizing surrogates and curvature bounds.

Gradient convention: for a real objective ``f`` of complex ``w`` the
returned gradient is ``g = df/dRe(w) + 1j * df/dIm(w)`` (twice the
conjugate Wirtinger derivative), so a perturbation ``delta`` changes the
objective by ``Re(vdot(g, delta))`` to first order, and the MM+ update is
``Q = W + g / (2 eta)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .system_model import (MisoScenario, cross_gains, sinr_all_miso,
                           interference_plus_noise)

__all__ = [
    "EtaMode", "DomainError", "MmCoefficients", "MmMatrices",
    "miso_terms", "mimo_terms", "lambda_max", "grad_wsr_miso",
    "grad_wsr_mimo", "mm_coefficients_miso", "mm_matrices_mimo",
    "curvature_miso", "curvature_mimo", "surrogate_miso", "surrogate_mimo",
    "eta_miso", "eta_mimo", "surrogate_plus_miso", "surrogate_plus_mimo",
    "evaluate_bound_gap", "ETA_FLOOR",
]

ETA_FLOOR = 1e-12


class EtaMode(str, Enum):
    EXACT = "exact"
    FROBENIUS = "frobenius"


class DomainError(ValueError):
    """Argument outside the domain of a bound (e.g. not positive definite)."""


@dataclass(frozen=True)
class MmCoefficients:
    """Per-user surrogate coefficients ``a`` (real) and ``b`` (complex)."""
    a: np.ndarray
    b: np.ndarray


@dataclass(frozen=True)
class MmMatrices:
    """Per-link surrogate matrices ``A[k]`` (Mr x Mr) and ``B[k]`` (Ms x Mr)."""
    A: list
    B: list


def lambda_max(C):
    """Largest eigenvalue of a Hermitian matrix."""
    return float(np.linalg.eigvalsh(0.5 * (C + C.conj().T))[-1])


# --------------------------------------------------------------------------
# MISO
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class MisoTerms:
    gains: np.ndarray    # C[k, j] = h_k^H w_j
    signal: np.ndarray   # x_k = h_k^H w_k
    total: np.ndarray    # D_k = sum_j |h_k^H w_j|^2 + sigma_k^2
    interf: np.ndarray   # z_k = D_k - |x_k|^2
    sinr: np.ndarray


def miso_terms(scn, W):
    C = cross_gains(scn, W)
    p = C.real ** 2 + C.imag ** 2
    x = C.diagonal().copy()
    sig = p.diagonal()
    D = p.sum(axis=1) + scn.noise
    z = D - sig
    return MisoTerms(C, x, D, z, sig / z)


def grad_wsr_miso(scn, W):
    """Gradient of ``wsr_miso`` with respect to each ``w_k`` (rows)."""
    t = miso_terms(scn, W)
    h = scn.channels
    om = scn.weights
    own = (2 * om * t.signal / t.interf)[:, None] * h
    c = om * t.sinr / t.total
    cross = 2 * (c[:, None] * t.gains).T @ h
    return own - cross


def mm_coefficients_miso(scn, anchor):
    """Coefficients ``a_k = SINR_k / D_k`` and ``b_k = SINR_k / (h_k^H w_k)``.

    ``b_k`` is evaluated as ``conj(h_k^H w_k) / z_k``, which equals the
    ratio whenever it is defined and is zero when ``h_k^H w_k = 0``.
    """
    t = miso_terms(scn, anchor)
    return MmCoefficients(t.sinr / t.total, np.conj(t.signal) / t.interf)


def curvature_miso(scn, coeffs):
    """``sum_j w_j a_j h_j h_j^H``."""
    c = scn.weights * coeffs.a
    return scn.channels.T @ (c[:, None] * scn.conj_channels)


def eta_miso(scn, coeffs, mode=EtaMode.EXACT):
    """Curvature bound ``eta >= lambda_max(curvature_miso)``."""
    mode = EtaMode(mode)
    if mode is EtaMode.EXACT:
        eta = lambda_max(curvature_miso(scn, coeffs))
    else:
        eta = float(np.sum(scn.weights * coeffs.a * scn.channel_norms2))
    return max(eta, ETA_FLOOR)


def _miso_constant(scn, anchor, coeffs):
    t = miso_terms(scn, anchor)
    return float(np.sum(scn.weights * (np.log1p(t.sinr) - t.sinr
                                       - coeffs.a * scn.noise)))


def _miso_linear(scn, W, coeffs):
    # sum_k w_k 2 Re(b_k h_k^H w_k)
    x = np.einsum("km,km->k", scn.channels.conj(), W)
    return float(np.sum(scn.weights * 2 * np.real(coeffs.b * x)))


def surrogate_miso(W, anchor, scn):
    """Quadratic minorizer of ``wsr_miso`` tangent at ``anchor``."""
    W = np.asarray(W)
    co = mm_coefficients_miso(scn, anchor)
    p = np.abs(cross_gains(scn, W)) ** 2
    quad = float(np.sum(scn.weights * co.a * p.sum(axis=1)))
    return -quad + _miso_linear(scn, W, co) + _miso_constant(scn, anchor, co)


def surrogate_plus_miso(W, anchor, scn, eta):
    """Isotropic minorizer obtained by bounding the quadratic term of
    ``surrogate_miso`` with curvature ``eta``."""
    W = np.asarray(W)
    anchor = np.asarray(anchor)
    co = mm_coefficients_miso(scn, anchor)
    C = curvature_miso(scn, co)
    Cw = anchor @ C.T                       # rows: C w_bar_k
    quad = (eta * np.sum(np.abs(W) ** 2)
            + 2 * np.real(np.vdot(Cw - eta * anchor, W))
            + eta * np.sum(np.abs(anchor) ** 2)
            - np.real(np.vdot(anchor, Cw)))
    return (-float(quad) + _miso_linear(scn, W, co)
            + _miso_constant(scn, anchor, co))


# --------------------------------------------------------------------------
# MIMO
# --------------------------------------------------------------------------
@dataclass
class MimoTerms:
    F: list          # interference-plus-noise
    X: list          # H_kk W_k
    S: list          # F_k + X_k X_k^H
    FinvX: list      # F_k^{-1} X_k
    SinvX: list      # S_k^{-1} X_k
    Gamma: list      # X_k^H F_k^{-1} X_k


def mimo_terms(scn, Ws):
    H = scn.channels
    F, X, S, FX, SX, Gm = [], [], [], [], [], []
    for k in range(scn.num_links):
        Fk = interference_plus_noise(scn, Ws, k)
        Xk = H[k][k] @ Ws[k]
        Sk = Fk + Xk @ Xk.conj().T
        FXk = np.linalg.solve(Fk, Xk)
        F.append(Fk)
        X.append(Xk)
        S.append(Sk)
        FX.append(FXk)
        SX.append(np.linalg.solve(Sk, Xk))
        G = Xk.conj().T @ FXk
        Gm.append(0.5 * (G + G.conj().T))
    return MimoTerms(F, X, S, FX, SX, Gm)


def grad_wsr_mimo(scn, Ws):
    """Gradient of ``wsr_mimo`` with respect to each ``W_k``.

    Uses ``2 w_k H_kk^H F_k^{-1} H_kk W_k
    - 2 sum_i w_i H_ik^H S_i^{-1} X_i X_i^H F_i^{-1} H_ik W_k``.
    """
    t = mimo_terms(scn, Ws)
    H = scn.channels
    om = scn.weights
    K = scn.num_links
    out = []
    for k in range(K):
        g = 2 * om[k] * H[k][k].conj().T @ t.FinvX[k]
        for i in range(K):
            Y = H[i][k] @ Ws[k]
            g -= 2 * om[i] * H[i][k].conj().T @ (
                t.SinvX[i] @ (t.FinvX[i].conj().T @ Y))
        out.append(g)
    return out


def mm_matrices_mimo(scn, anchor, terms=None):
    """``A_k = S_k^{-1} X_k B_k`` and ``B_k = X_k^H F_k^{-1}`` at the anchor."""
    t = terms if terms is not None else mimo_terms(scn, anchor)
    B = [FX.conj().T for FX in t.FinvX]
    A = [SX @ Bk for SX, Bk in zip(t.SinvX, B)]
    return MmMatrices(A, B)


def curvature_mimo(scn, mats, k):
    """``sum_j w_j H_jk^H A_j H_jk`` for transmitter ``k``."""
    H = scn.channels
    C = sum(scn.weights[j] * H[j][k].conj().T @ mats.A[j] @ H[j][k]
            for j in range(scn.num_links))
    return 0.5 * (C + C.conj().T)


def eta_mimo(scn, mats, k, mode=EtaMode.EXACT):
    """Curvature bound ``eta_k >= lambda_max(curvature_mimo(k))``."""
    mode = EtaMode(mode)
    if mode is EtaMode.EXACT:
        eta = lambda_max(curvature_mimo(scn, mats, k))
    else:
        H = scn.channels
        eta = float(sum(scn.weights[j] * np.linalg.norm(mats.A[j])
                        * np.linalg.norm(H[j][k]) ** 2
                        for j in range(scn.num_links)))
    return max(eta, ETA_FLOOR)


def _mimo_constant(scn, t, mats):
    total = 0.0
    for k in range(scn.num_links):
        _, ld = np.linalg.slogdet(np.eye(t.Gamma[k].shape[0]) + t.Gamma[k])
        total += scn.weights[k] * (ld - np.trace(t.Gamma[k]).real
                                   - scn.noise[k] * np.trace(mats.A[k]).real)
    return float(total)


def _mimo_linear(scn, Ws, mats):
    H = scn.channels
    return float(sum(scn.weights[k] * 2 * np.trace(
        mats.B[k] @ H[k][k] @ Ws[k]).real for k in range(scn.num_links)))


def surrogate_mimo(Ws, anchor, scn):
    """Minorizer of ``wsr_mimo`` tangent at ``anchor``."""
    t = mimo_terms(scn, anchor)
    mats = mm_matrices_mimo(scn, anchor, t)
    H = scn.channels
    K = scn.num_links
    quad = 0.0
    for k in range(K):
        for j in range(K):
            Y = H[k][j] @ Ws[j]
            quad += scn.weights[k] * np.trace(
                Y.conj().T @ mats.A[k] @ Y).real
    return -quad + _mimo_linear(scn, Ws, mats) + _mimo_constant(scn, t, mats)


def surrogate_plus_mimo(Ws, anchor, scn, etas):
    """Isotropic minorizer with per-link curvatures ``etas``."""
    t = mimo_terms(scn, anchor)
    mats = mm_matrices_mimo(scn, anchor, t)
    quad = 0.0
    for k in range(scn.num_links):
        C = curvature_mimo(scn, mats, k)
        e = etas[k]
        Wk, Ak = Ws[k], anchor[k]
        CA = C @ Ak
        quad += (e * np.sum(np.abs(Wk) ** 2)
                 + 2 * np.real(np.vdot(Wk, CA - e * Ak))
                 + e * np.sum(np.abs(Ak) ** 2) - np.real(np.vdot(Ak, CA)))
    return (-float(quad) + _mimo_linear(scn, Ws, mats)
            + _mimo_constant(scn, t, mats))


# --------------------------------------------------------------------------
# Bound gaps
# --------------------------------------------------------------------------
def _require_pd(Z, name):
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    if not np.allclose(Z, Z.conj().T, atol=1e-10 * max(1, np.abs(Z).max())):
        raise DomainError(f"{name} must be Hermitian")
    if np.linalg.eigvalsh(0.5 * (Z + Z.conj().T))[0] <= 0:
        raise DomainError(f"{name} must be positive definite")
    return Z


def _logdet(Z):
    return float(np.linalg.slogdet(Z)[1])


def _gap_prop4(point, anchor):
    x, z = point
    xb, zb = anchor
    if z <= 0 or zb <= 0:
        raise DomainError("z must be positive")
    sb = abs(xb) ** 2 / zb
    rhs = (np.log1p(sb) - sb + 2 * np.real(np.conj(xb) / zb * x)
           - abs(xb) ** 2 / (zb * (zb + abs(xb) ** 2)) * (z + abs(x) ** 2))
    return float(np.log1p(abs(x) ** 2 / z) - rhs)


def _gap_prop8(point, anchor):
    X, Z = point
    Xb, Zb = anchor
    X, Xb = np.atleast_2d(X), np.atleast_2d(Xb)
    Z = _require_pd(Z, "Z")
    Zb = _require_pd(Zb, "Z anchor")
    n = X.shape[1]
    lhs = _logdet(np.eye(n) + X.conj().T @ np.linalg.solve(Z, X))
    ZbiXb = np.linalg.solve(Zb, Xb)
    Gb = Xb.conj().T @ ZbiXb
    XXb = Xb @ Xb.conj().T
    T = np.linalg.solve(Zb + XXb, XXb) @ np.linalg.inv(Zb)
    rhs = (_logdet(np.eye(n) + Gb) - np.trace(Gb).real
           + 2 * np.trace(ZbiXb.conj().T @ X).real
           - np.trace(T @ (Z + X @ X.conj().T)).real)
    return float(lhs - rhs)


def _gap_lemma1(point, anchor):
    Z = _require_pd(point, "Z")
    Zb = _require_pd(anchor, "Z anchor")
    n = Z.shape[0]
    rhs = _logdet(Zb) + np.trace(np.eye(n) - Zb @ np.linalg.inv(Z)).real
    return float(_logdet(Z) - rhs)


def _gap_lemma2(point, anchor):
    # instantiated with the identity map Q(Z) = Z; returns the smallest
    # eigenvalue of lhs - rhs, which is >= 0 iff the matrix bound holds
    Z1, Z2 = point
    Z1b, Z2b = anchor
    Z1, Z1b = np.atleast_2d(Z1), np.atleast_2d(Z1b)
    Z2 = _require_pd(Z2, "Z2")
    Z2b = _require_pd(Z2b, "Z2 anchor")
    lhs = Z1.conj().T @ np.linalg.solve(Z2, Z1)
    P = np.linalg.solve(Z2b, Z1b)          # Z2b^{-1} Z1b
    lin = P.conj().T @ Z1
    rhs = lin + lin.conj().T - P.conj().T @ Z2 @ P
    D = lhs - rhs
    return float(np.linalg.eigvalsh(0.5 * (D + D.conj().T))[0])


def _gap_prop11(point, anchor, L, M):
    X = np.atleast_2d(point)
    Xb = np.atleast_2d(anchor)
    L = np.atleast_2d(L)
    M = np.atleast_2d(M)
    for name, A in (("L", L), ("M", M)):
        if not np.allclose(A, A.conj().T, atol=1e-10 * max(1, np.abs(A).max())):
            raise DomainError(f"{name} must be Hermitian")
    D = M - L
    if np.linalg.eigvalsh(0.5 * (D + D.conj().T))[0] < -1e-12 * max(
            1, np.abs(D).max()):
        raise DomainError("M - L must be positive semidefinite")
    lhs = np.trace(X.conj().T @ M @ X).real
    rhs = (np.trace(X.conj().T @ L @ X).real
           + 2 * np.trace(X.conj().T @ D @ Xb).real
           - np.trace(Xb.conj().T @ D @ Xb).real)
    return float(lhs - rhs)


_BOUNDS = {"prop4": _gap_prop4, "prop8": _gap_prop8, "lemma1": _gap_lemma1,
           "lemma2": _gap_lemma2, "prop11": _gap_prop11}


def evaluate_bound_gap(bound_id, point, anchor, **params):
    """Evaluate ``lhs - rhs`` of one of the minorization inequalities.

    ===========  ====================  ==========================================
    bound_id     point / anchor        inequality
    ===========  ====================  ==========================================
    ``prop4``    ``(x, z)`` scalars    log(1+|x|^2/z) >= scalar quadratic bound
    ``prop8``    ``(X, Z)``            log det(I + X^H Z^-1 X) >= matrix bound
    ``lemma1``   ``Z`` (PD)            log det Z >= log det Zb + tr(I - Zb Z^-1)
    ``lemma2``   ``(Z1, Z2)``          Z1^H Z2^-1 Z1 >= linearized bound (min eig)
    ``prop11``   ``X``; needs L, M     tr(X^H M X) >= quadratic bound, M >= L
    ===========  ====================  ==========================================
    """
    try:
        fn = _BOUNDS[bound_id]
    except KeyError:
        raise ValueError(f"unknown bound {bound_id!r}") from None
    return fn(point, anchor, **params)
