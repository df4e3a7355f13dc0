"""
Weighted sum-rate solvers for the MISO broadcast channel.

Five families are implemented as one-round step functions plus a common
driver:

==============  ==================================================  =========
name            update                                              mu search
==============  ==================================================  =========
``wmmse``       receivers l, MSE weights m, then beamformers        yes
``fp``          SINR proxies gamma, quadratic-transform phi, W      yes
``mm``          quadratic surrogate maximization                    yes
``mm_plus``     projected step on an isotropic surrogate            no
``fp_plus``     block-ascent form of ``mm_plus``                    no
==============  ==================================================  =========

Beamformers are ``(K, M)`` arrays with row ``k`` equal to ``w_k``; all
users share one total-power constraint and hence one multiplier.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import calculus as calc
from .calculus import EtaMode
from .lagrange import RegularizedProblem, SearchOptions, find_mu
from .system_model import mse_miso, wsr_miso

__all__ = [
    "MisoAuxState", "SolverConfig", "Trajectory", "wmmse_step", "fp_step",
    "fp_gamma_conventional", "mm_step", "mm_plus_step", "fp_plus_step",
    "mm_plus_direction", "project_total_power", "run", "STEPS",
]


@dataclass
class MisoAuxState:
    """Auxiliary variables produced by one round of a solver.

    Only the fields used by the algorithm that produced the state are set.
    """
    l: np.ndarray = None
    m: np.ndarray = None
    gamma: np.ndarray = None
    phi: np.ndarray = None
    t: np.ndarray = None
    y: np.ndarray = None
    mm: calc.MmCoefficients = None
    eta: float = None
    mu: float = None
    mu_iters: int = 0


@dataclass(frozen=True)
class SolverConfig:
    """Algorithm choice and stopping rules for :func:`run`."""
    algorithm: str = "mm"
    variant: str = None
    stop_epsilon: float = 1e-6
    max_iters: int = 10000
    search: SearchOptions = field(default_factory=SearchOptions)
    eta_mode: EtaMode = EtaMode.EXACT
    seed: int = 0

    def __post_init__(self):
        if not self.stop_epsilon > 0:
            raise ValueError("stop_epsilon must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        object.__setattr__(self, "eta_mode", EtaMode(self.eta_mode))


@dataclass
class Trajectory:
    """Per-iteration record of a solver run.

    Row 0 holds the initial point; row ``t`` the state after ``t`` rounds.
    """
    wsr: list
    seconds: list
    mu_iters: list
    beamformers: object = None
    converged: bool = False
    error: str = None

    @property
    def iterations(self):
        return len(self.wsr) - 1

    @property
    def final_wsr(self):
        return self.wsr[-1]

    @property
    def total_seconds(self):
        return self.seconds[-1]


def _search_kw(search):
    search = search or SearchOptions()
    return dict(tol_power=search.tol_power, tol_mu=search.tol_mu,
                max_iter=search.max_iter)


def _solve_beamformers(scn, G, rhs, search):
    """Solve ``(G + mu I)^+ r_k`` for every user with a shared multiplier.

    ``rhs`` is ``(K, M)`` with row ``k`` equal to ``r_k``.
    """
    prob = RegularizedProblem(G, rhs.T, scn.power)
    mu, Wt, it = find_mu(prob, **_search_kw(search))
    return Wt.T, mu, it


# --------------------------------------------------------------------------
# WMMSE
# --------------------------------------------------------------------------
def _mmse_receivers(scn, W):
    t = calc.miso_terms(scn, W)
    return t.signal / t.total


def wmmse_step(scn, W, order="l_m_w", prev=None, search=None):
    """One round of WMMSE.

    ``order="l_m_w"`` updates receivers, then weights, then beamformers.
    ``order="m_l_w"`` updates the weights first, using the receivers of the
    previous round (``prev.l``; the MMSE receivers at ``W`` when absent).
    """
    W = np.asarray(W)
    K = scn.num_users
    if order == "l_m_w":
        t = calc.miso_terms(scn, W)
        l = t.signal / t.total
        m = 1.0 + t.sinr
    elif order == "m_l_w":
        l_old = prev.l if prev is not None and prev.l is not None \
            else _mmse_receivers(scn, W)
        e = np.array([mse_miso(scn, W, l_old[k], k) for k in range(K)])
        m = 1.0 / e
        l = _mmse_receivers(scn, W)
    else:
        raise ValueError(f"unknown WMMSE update order {order!r}")
    h = scn.channels
    om = scn.weights
    c = om * m * np.abs(l) ** 2
    G = h.T @ (c[:, None] * h.conj())
    rhs = (om * m * l)[:, None] * h
    Wn, mu, it = _solve_beamformers(scn, G, rhs, search)
    return Wn, MisoAuxState(l=l, m=m, mu=mu, mu_iters=it)


# --------------------------------------------------------------------------
# WSR-FP
# --------------------------------------------------------------------------
def _fp_phi(scn, W, gamma):
    t = calc.miso_terms(scn, W)
    return np.sqrt(scn.weights * (1 + gamma)) * t.signal / t.total


def fp_gamma_conventional(phi, W, scn, printed=False):
    """Maximize the quadratic-transformed objective over ``gamma >= 0``.

    With ``c_k = Re(conj(phi_k) h_k^H w_k) / sqrt(w_k)`` the stationarity
    condition gives ``gamma = (x + sqrt(x^2 + 4x)) / 2`` with ``x = c^2``
    for ``c > 0`` and ``gamma = 0`` otherwise. When ``phi_k`` is in phase
    with ``h_k^H w_k`` (as produced by the phi update), ``x`` equals
    ``|phi_k|^2 |h_k^H w_k|^2 / w_k``.

    ``printed=True`` evaluates the variant with discriminant ``x^2 - 4x``
    instead; it is NaN whenever ``x < 4`` and is kept only to document the
    discrepancy.
    """
    phi = np.asarray(phi)
    x_sig = np.einsum("km,km->k", scn.channels.conj(), np.asarray(W))
    om = scn.weights
    if printed:
        x = np.abs(phi) ** 2 * np.abs(x_sig) ** 2 / om
        with np.errstate(invalid="ignore"):
            return 0.5 * (x + np.sqrt(x * x - 4 * x))
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(om > 0, np.real(np.conj(phi) * x_sig) / np.sqrt(om), 0.0)
    c = np.maximum(c, 0.0)
    x = c * c
    return 0.5 * (x + np.sqrt(x * x + 4 * x))


def fp_step(scn, W, variant="unconventional", prev=None, search=None):
    """One round of WSR-FP.

    Variants: ``unconventional`` (gamma = SINR, phi, W),
    ``conv_gamma_first`` (closed-form gamma from the previous phi, phi, W)
    and ``conv_phi_first`` (phi from the previous gamma, gamma, W).
    Missing previous auxiliaries are initialized at ``gamma = SINR(W)``.
    """
    W = np.asarray(W)
    sinr = calc.miso_terms(scn, W).sinr
    if variant == "unconventional":
        gamma = sinr
        phi = _fp_phi(scn, W, gamma)
    elif variant == "conv_gamma_first":
        phi_old = prev.phi if prev is not None and prev.phi is not None \
            else _fp_phi(scn, W, sinr)
        gamma = fp_gamma_conventional(phi_old, W, scn)
        phi = _fp_phi(scn, W, gamma)
    elif variant == "conv_phi_first":
        g_old = prev.gamma if prev is not None and prev.gamma is not None \
            else sinr
        phi = _fp_phi(scn, W, g_old)
        gamma = fp_gamma_conventional(phi, W, scn)
    else:
        raise ValueError(f"unknown WSR-FP variant {variant!r}")
    h = scn.channels
    G = h.T @ ((np.abs(phi) ** 2)[:, None] * h.conj())
    rhs = (np.sqrt(scn.weights * (1 + gamma)) * phi)[:, None] * h
    Wn, mu, it = _solve_beamformers(scn, G, rhs, search)
    return Wn, MisoAuxState(gamma=gamma, phi=phi, mu=mu, mu_iters=it)


def fp_objective(scn, W, gamma, phi):
    """Objective of the quadratic-transformed problem in ``(gamma, phi, W)``."""
    t = calc.miso_terms(scn, W)
    om = scn.weights
    lin = 2 * np.real(np.conj(phi) * np.sqrt(om * (1 + gamma)) * t.signal)
    return float(np.sum(lin - np.abs(phi) ** 2 * t.total
                        + om * (np.log1p(gamma) - gamma)))


# --------------------------------------------------------------------------
# WSR-MM
# --------------------------------------------------------------------------
def _mm_update(scn, W, search=None):
    co = calc.mm_coefficients_miso(scn, W)
    G = calc.curvature_miso(scn, co)
    rhs = (scn.weights * np.conj(co.b))[:, None] * scn.channels
    Wn, mu, it = _solve_beamformers(scn, G, rhs, search)
    return Wn, MisoAuxState(mm=co, mu=mu, mu_iters=it)


def mm_step(scn, W, search=None):
    """One WSR-MM update; returns the next beamformers."""
    return _mm_update(scn, np.asarray(W), search)[0]


# --------------------------------------------------------------------------
# WSR-MM+ / WSR-FP+
# --------------------------------------------------------------------------
def project_total_power(Q, power):
    """Euclidean projection onto ``{W : ||W||_F^2 <= power}``."""
    n2 = np.vdot(Q, Q).real
    if n2 <= power:
        return Q.copy()
    return Q * np.sqrt(power / n2)


def _eta(scn, C, c, mode):
    # c holds the per-user weights of C = sum_j c_j h_j h_j^H
    if mode is EtaMode.EXACT:
        eta = calc.lambda_max(C)
    else:
        eta = float(c @ scn.channel_norms2)
    return max(eta, calc.ETA_FLOOR)


def mm_plus_direction(scn, W, mode=EtaMode.EXACT):
    """Unprojected MM+ point ``q`` and the curvature ``eta`` used.

    Written out in full rather than through :mod:`calculus` because this is
    the whole per-iteration cost of WSR-MM+.
    """
    W = np.asarray(W)
    h, hc = scn.channels, scn.conj_channels
    om = scn.weights
    G = hc @ W.T
    p = G.real ** 2 + G.imag ** 2
    x = G.diagonal()
    sig = p.diagonal()
    D = p.sum(axis=1) + scn.noise
    z = D - sig
    a = sig / (z * D)
    c = om * a
    C = h.T @ (c[:, None] * hc)
    eta = _eta(scn, C, c, EtaMode(mode))
    q = W + ((om * x / z)[:, None] * h - W @ C.T) / eta
    return q, eta, calc.MmCoefficients(a, x.conj() / z)


def mm_plus_step(scn, W, mode=EtaMode.EXACT):
    """One WSR-MM+ update. Returns ``(W_next, q, eta)``."""
    q, eta, _ = mm_plus_direction(scn, W, mode)
    return project_total_power(q, scn.power), q, eta


def fp_plus_step(scn, W, mode=EtaMode.EXACT):
    """One WSR-FP+ round: t = W, gamma = SINR, y, then the projected step."""
    t = np.array(W)
    h, hc = scn.channels, scn.conj_channels
    G = hc @ t.T
    p = G.real ** 2 + G.imag ** 2
    sig = p.diagonal()
    D = p.sum(axis=1) + scn.noise
    gamma = sig / (D - sig)
    root = np.sqrt(scn.weights * (1 + gamma))
    y = root * G.diagonal() / D
    ay = y.real ** 2 + y.imag ** 2
    C = h.T @ (ay[:, None] * hc)
    eta = _eta(scn, C, ay, EtaMode(mode))
    q = t + ((root * y)[:, None] * h - t @ C.T) / eta
    Wn = project_total_power(q, scn.power)
    return Wn, MisoAuxState(t=t, gamma=gamma, y=y, phi=y, eta=eta)


# --------------------------------------------------------------------------
# Driver
# --------------------------------------------------------------------------
def _adapt(name):
    def wmmse(scn, W, cfg, prev):
        return wmmse_step(scn, W, cfg.variant or "l_m_w", prev, cfg.search)

    def fp(scn, W, cfg, prev):
        return fp_step(scn, W, cfg.variant or "unconventional", prev,
                       cfg.search)

    def mm(scn, W, cfg, prev):
        return _mm_update(scn, W, cfg.search)

    def mm_plus(scn, W, cfg, prev):
        Wn, q, eta = mm_plus_step(scn, W, cfg.eta_mode)
        return Wn, MisoAuxState(eta=eta)

    def fp_plus(scn, W, cfg, prev):
        return fp_plus_step(scn, W, cfg.eta_mode)

    return locals()[name]


STEPS = {name: _adapt(name)
         for name in ("wmmse", "fp", "mm", "mm_plus", "fp_plus")}


def run(scn, config, init, objective=wsr_miso, steps=STEPS):
    """Iterate the configured step until the objective gain drops below
    ``config.stop_epsilon`` or ``config.max_iters`` rounds have run.

    A step that raises ends the run; the partial trajectory is returned with
    ``error`` set.
    """
    try:
        step = steps[config.algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {config.algorithm!r}") from None
    W = init
    prev = None
    # untimed warm-up call, result discarded
    try:
        step(scn, init, config, None)
    except Exception:
        pass
    f = objective(scn, W)
    traj = Trajectory([f], [0.0], [0])
    elapsed = 0.0
    for _ in range(config.max_iters):
        t0 = time.perf_counter()
        try:
            Wn, prev = step(scn, W, config, prev)
        except Exception as exc:  # recorded, run aborted
            traj.error = f"{type(exc).__name__}: {exc}"
            break
        elapsed += time.perf_counter() - t0
        fn = objective(scn, Wn)
        traj.wsr.append(fn)
        traj.seconds.append(elapsed)
        traj.mu_iters.append(int(prev.mu_iters or 0))
        W = Wn
        if fn - f < config.stop_epsilon:
            traj.converged = True
            break
        f = fn
    traj.beamformers = W
    return traj


def with_algorithm(config, algorithm, variant=None):
    return replace(config, algorithm=algorithm, variant=variant)
