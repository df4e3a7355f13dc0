"""
Weighted sum-rate solvers for the MIMO interference channel.

The same five families as :mod:`wsrmax.miso`, now with matrix beamformers
``W_k`` of shape ``(Mt[k], Ms[k])`` and one power budget per link. Each
link solves its own regularized least-squares problem, so the multiplier
searches of one round are independent.

The quadratic form acting on transmitter ``k`` collects the leakage of
``k`` into every receiver ``j``::

    C_k = sum_j w_j H_jk^H A_j H_jk
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import calculus as calc
from .calculus import EtaMode
from .lagrange import RegularizedProblem, find_mu
from .miso import SolverConfig, Trajectory, _search_kw, run as _run
from .system_model import wsr_mimo

__all__ = [
    "MimoAuxState", "wmmse_step_mimo", "fp_step_mimo", "mm_step_mimo",
    "mm_plus_step_mimo", "fp_plus_step_mimo", "project_per_link",
    "wmmse_receivers", "fp_auxiliaries", "run_mimo", "STEPS_MIMO",
    "SolverConfig", "Trajectory",
]


@dataclass
class MimoAuxState:
    """Per-link auxiliary matrices produced by one round."""
    L: list = None
    M: list = None
    Phi: list = None
    Gamma: list = None
    T: list = None
    mm: calc.MmMatrices = None
    eta: list = None
    mu: list = None
    mu_iters: int = 0


def _herm(A):
    return 0.5 * (A + A.conj().T)


def _solve_links(scn, Gs, rhss, search):
    Ws, mus, total = [], [], 0
    kw = _search_kw(search)
    for k in range(scn.num_links):
        prob = RegularizedProblem(Gs[k], rhss[k], scn.power[k])
        mu, Wk, it = find_mu(prob, **kw)
        Ws.append(Wk)
        mus.append(mu)
        total += it
    return Ws, mus, total


def _leakage(scn, mats, k, weighted=True):
    # sum_j c_j H_jk^H mats[j] H_jk
    H = scn.channels
    om = scn.weights if weighted else np.ones(scn.num_links)
    C = sum(om[j] * H[j][k].conj().T @ mats[j] @ H[j][k]
            for j in range(scn.num_links))
    return _herm(C)


# --------------------------------------------------------------------------
# WMMSE
# --------------------------------------------------------------------------
def wmmse_receivers(scn, Ws, terms=None):
    """MMSE receivers ``L_k = S_k^{-1} X_k`` and weights ``M_k = E_k^{-1}``."""
    t = terms if terms is not None else calc.mimo_terms(scn, Ws)
    L, M = [], []
    for k in range(scn.num_links):
        Lk = t.SinvX[k]
        X = t.X[k]
        LX = Lk.conj().T @ X
        E = Lk.conj().T @ t.S[k] @ Lk - LX - LX.conj().T + np.eye(X.shape[1])
        L.append(Lk)
        M.append(_herm(np.linalg.inv(_herm(E))))
    return L, M


def wmmse_step_mimo(scn, Ws, search=None):
    """One round of MIMO WMMSE: receivers, MSE weights, then beamformers."""
    L, M = wmmse_receivers(scn, Ws)
    H = scn.channels
    om = scn.weights
    LML = [Lk @ Mk @ Lk.conj().T for Lk, Mk in zip(L, M)]
    Gs = [_leakage(scn, LML, k) for k in range(scn.num_links)]
    rhss = [om[k] * H[k][k].conj().T @ L[k] @ M[k]
            for k in range(scn.num_links)]
    Wn, mus, it = _solve_links(scn, Gs, rhss, search)
    return Wn, MimoAuxState(L=L, M=M, mu=mus, mu_iters=it)


# --------------------------------------------------------------------------
# WSR-FP
# --------------------------------------------------------------------------
def fp_auxiliaries(scn, Ws, terms=None):
    """``Gamma_k = X_k^H F_k^{-1} X_k`` and ``Phi_k = sqrt(w_k) S_k^{-1} X_k``."""
    t = terms if terms is not None else calc.mimo_terms(scn, Ws)
    Gamma = list(t.Gamma)
    Phi = [np.sqrt(scn.weights[k]) * t.SinvX[k]
           for k in range(scn.num_links)]
    return Gamma, Phi


def _fp_quadratics(scn, Gamma, Phi):
    K = scn.num_links
    H = scn.channels
    PGP = [Phi[j] @ (np.eye(Gamma[j].shape[0]) + Gamma[j]) @ Phi[j].conj().T
           for j in range(K)]
    Gs = [_leakage(scn, PGP, k, weighted=False) for k in range(K)]
    lin = [np.sqrt(scn.weights[k]) * H[k][k].conj().T @ Phi[k]
           @ (np.eye(Gamma[k].shape[0]) + Gamma[k]) for k in range(K)]
    return Gs, lin


def fp_step_mimo(scn, Ws, search=None):
    """One round of MIMO WSR-FP: Gamma, Phi, then beamformers."""
    Gamma, Phi = fp_auxiliaries(scn, Ws)
    Gs, rhss = _fp_quadratics(scn, Gamma, Phi)
    Wn, mus, it = _solve_links(scn, Gs, rhss, search)
    return Wn, MimoAuxState(Phi=Phi, Gamma=Gamma, mu=mus, mu_iters=it)


# --------------------------------------------------------------------------
# WSR-MM
# --------------------------------------------------------------------------
def _mm_update(scn, Ws, search=None):
    mats = calc.mm_matrices_mimo(scn, Ws)
    H = scn.channels
    K = scn.num_links
    Gs = [calc.curvature_mimo(scn, mats, k) for k in range(K)]
    rhss = [scn.weights[k] * H[k][k].conj().T @ mats.B[k].conj().T
            for k in range(K)]
    Wn, mus, it = _solve_links(scn, Gs, rhss, search)
    return Wn, MimoAuxState(mm=mats, mu=mus, mu_iters=it)


def mm_step_mimo(scn, Ws, search=None):
    """One WSR-MM update; returns the next list of beamformers."""
    return _mm_update(scn, Ws, search)[0]


# --------------------------------------------------------------------------
# WSR-MM+ / WSR-FP+
# --------------------------------------------------------------------------
def project_per_link(Qs, power):
    """Scale each ``Q_k`` back onto its ball ``||Q_k||_F^2 <= P_k``."""
    out = []
    for Qk, Pk in zip(Qs, power):
        n2 = float(np.sum(np.abs(Qk) ** 2))
        out.append(Qk.copy() if n2 <= Pk else Qk * np.sqrt(Pk / n2))
    return out


def mm_plus_step_mimo(scn, Ws, mode=EtaMode.EXACT):
    """One WSR-MM+ update. Returns ``(W_next, Q, eta)`` with per-link lists."""
    mats = calc.mm_matrices_mimo(scn, Ws)
    H = scn.channels
    Qs, etas = [], []
    for k in range(scn.num_links):
        C = calc.curvature_mimo(scn, mats, k)
        eta = calc.eta_mimo(scn, mats, k, mode)
        lin = scn.weights[k] * H[k][k].conj().T @ mats.B[k].conj().T
        Qs.append(Ws[k] + (lin - C @ Ws[k]) / eta)
        etas.append(eta)
    return project_per_link(Qs, scn.power), Qs, etas


def fp_plus_step_mimo(scn, Ws, mode=EtaMode.EXACT):
    """One WSR-FP+ round: T = W, Gamma, Phi, then the projected step."""
    T = [np.array(Wk) for Wk in Ws]
    Gamma, Phi = fp_auxiliaries(scn, T)
    Gs, lin = _fp_quadratics(scn, Gamma, Phi)
    mode = EtaMode(mode)
    H = scn.channels
    Qs, etas = [], []
    for k in range(scn.num_links):
        if mode is EtaMode.EXACT:
            eta = calc.lambda_max(Gs[k])
        else:
            # w_j A_j = Phi_j (I + Gamma_j) Phi_j^H
            eta = float(sum(
                np.linalg.norm(Phi[j] @ (np.eye(Gamma[j].shape[0]) + Gamma[j])
                               @ Phi[j].conj().T)
                * np.linalg.norm(H[j][k]) ** 2
                for j in range(scn.num_links)))
        eta = max(eta, calc.ETA_FLOOR)
        Qs.append(T[k] + (lin[k] - Gs[k] @ T[k]) / eta)
        etas.append(eta)
    Wn = project_per_link(Qs, scn.power)
    return Wn, MimoAuxState(Phi=Phi, Gamma=Gamma, T=T, eta=etas)


# --------------------------------------------------------------------------
# Driver
# --------------------------------------------------------------------------
def _adapt(name):
    def wmmse(scn, Ws, cfg, prev):
        return wmmse_step_mimo(scn, Ws, cfg.search)

    def fp(scn, Ws, cfg, prev):
        return fp_step_mimo(scn, Ws, cfg.search)

    def mm(scn, Ws, cfg, prev):
        return _mm_update(scn, Ws, cfg.search)

    def mm_plus(scn, Ws, cfg, prev):
        Wn, _, etas = mm_plus_step_mimo(scn, Ws, cfg.eta_mode)
        return Wn, MimoAuxState(eta=etas)

    def fp_plus(scn, Ws, cfg, prev):
        return fp_plus_step_mimo(scn, Ws, cfg.eta_mode)

    return locals()[name]


STEPS_MIMO = {name: _adapt(name)
              for name in ("wmmse", "fp", "mm", "mm_plus", "fp_plus")}


def run_mimo(scn, config, init):
    """Iterate a MIMO solver; see :func:`wsrmax.miso.run` for the rules."""
    return _run(scn, config, [np.asarray(Wk) for Wk in init],
                objective=wsr_mimo, steps=STEPS_MIMO)
