"""
Numerical certificates for the algebraic identities that tie the solvers
together.

Every check returns an :class:`IdentityReport` whose ``passed`` flag is
``discrepancy <= tolerance``. Identities are compared where they are
literally true: auxiliary maps at matrix level, algorithm equivalences at
iterate level, and surrogate constructions as function values on a set of
random trial points.

Tolerances: pure algebraic maps use ``1e-9`` (``1e-10`` for the scalar
MISO gradient step). Full-step comparisons use ``1e-7`` because both sides
pass through their own multiplier search.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import calculus as calc
from . import mimo, miso
from .calculus import EtaMode
from .system_model import (GeometryConfig, MisoScenario,
                           generate_miso, generate_mimo, init_rng,
                           interference_plus_noise,
                           random_beamformers_miso, random_beamformers_mimo,
                           wsr_mimo)

__all__ = [
    "IdentityReport", "check_woodbury_mk", "check_wmmse_mm_map",
    "check_fp_mm_map", "check_prop9", "check_prop10", "check_pgd_identity",
    "check_remark3", "make_instance", "run_suite", "TOL_MAP", "TOL_STEP",
    "MAX_USERS", "MAX_DIM",
]

TOL_MAP = 1e-9
TOL_STEP = 1e-7
TOL_GRAD_MISO = 1e-10
TOL_SURROGATE = 1e-8
TOL_REMARK = 1e-10

# desk-scale caps for the verify command
MAX_USERS = 8
MAX_DIM = 8


@dataclass
class IdentityReport:
    identity: str
    discrepancy: float
    tolerance: float
    instance: dict = field(default_factory=dict)
    passed: bool = None

    def __post_init__(self):
        self.discrepancy = float(self.discrepancy)
        self.passed = bool(self.discrepancy <= self.tolerance)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


def _maxdiff(a, b):
    if isinstance(a, (list, tuple)):
        if not a:
            return 0.0
        return max(_maxdiff(x, y) for x, y in zip(a, b))
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.abs(a - b).max()) if a.size else 0.0


def _describe(scn):
    if isinstance(scn, MisoScenario):
        return {"system": "miso", "K": scn.num_users,
                "dims": [scn.num_antennas]}
    return {"system": "mimo", "K": scn.num_links,
            "dims": [list(scn.tx_antennas), list(scn.rx_antennas),
                     list(scn.streams)]}


def _report(name, disc, tol, scn, **extra):
    inst = _describe(scn)
    inst.update(extra)
    return IdentityReport(name, disc, tol, inst)


def _trials(scn, rng, n):
    # random feasible points, each link at a random fraction of its budget
    out = []
    for _ in range(n):
        Ws = random_beamformers_mimo(scn, rng)
        out.append([np.sqrt(rng.random()) * W for W in Ws])
    return out


# --------------------------------------------------------------------------
# Woodbury and auxiliary maps
# --------------------------------------------------------------------------
def check_woodbury_mk(scn, bf, tol=TOL_MAP):
    """``(I - X^H S^{-1} X)^{-1}`` against ``I + X^H F^{-1} X`` per link."""
    H = scn.channels
    disc = 0.0
    for k in range(scn.num_links):
        F = interference_plus_noise(scn, bf, k)
        X = H[k][k] @ bf[k]
        n = X.shape[1]
        S = F + X @ X.conj().T
        lhs = np.linalg.inv(np.eye(n) - X.conj().T @ np.linalg.solve(S, X))
        rhs = np.eye(n) + X.conj().T @ np.linalg.solve(F, X)
        disc = max(disc, _maxdiff(lhs, rhs))
    return _report("woodbury_mk", disc, tol, scn)


def check_wmmse_mm_map(scn, bf, level="matrix", perturb=0.0, search=None):
    """WMMSE auxiliaries mapped to the MM matrices.

    ``level="matrix"`` compares ``A = L M L^H`` and ``B = M^H L^H`` with
    :func:`calculus.mm_matrices_mimo`; ``level="iterate"`` compares the next
    beamformers of the two algorithms. ``perturb`` adds a constant to the
    mapped ``A`` (negative control).
    """
    if level == "matrix":
        L, M = mimo.wmmse_receivers(scn, bf)
        A = [Lk @ Mk @ Lk.conj().T + perturb for Lk, Mk in zip(L, M)]
        B = [Mk.conj().T @ Lk.conj().T for Lk, Mk in zip(L, M)]
        ref = calc.mm_matrices_mimo(scn, bf)
        disc = max(_maxdiff(A, ref.A), _maxdiff(B, ref.B))
        return _report("wmmse_mm_map", disc, TOL_MAP, scn)
    if level == "iterate":
        a, _ = mimo.wmmse_step_mimo(scn, bf, search)
        b = mimo.mm_step_mimo(scn, bf, search)
        return _report("wmmse_mm_step", _maxdiff(a, b), TOL_STEP, scn)
    raise ValueError(f"unknown level {level!r}")


def check_fp_mm_map(scn, bf, level="matrix", perturb=0.0, search=None):
    """FP auxiliaries mapped to the MM matrices.

    ``A = Phi (I + Gamma) Phi^H / w`` and ``B = (I + Gamma^H) Phi^H / sqrt(w)``.
    """
    if level == "matrix":
        Gamma, Phi = mimo.fp_auxiliaries(scn, bf)
        om = scn.weights
        A, B = [], []
        for k in range(scn.num_links):
            IG = np.eye(Gamma[k].shape[0]) + Gamma[k]
            A.append(Phi[k] @ IG @ Phi[k].conj().T / om[k] + perturb)
            B.append(IG.conj().T @ Phi[k].conj().T / np.sqrt(om[k]))
        ref = calc.mm_matrices_mimo(scn, bf)
        disc = max(_maxdiff(A, ref.A), _maxdiff(B, ref.B))
        return _report("fp_mm_map", disc, TOL_MAP, scn)
    if level == "iterate":
        a, _ = mimo.fp_step_mimo(scn, bf, search)
        b = mimo.mm_step_mimo(scn, bf, search)
        return _report("fp_mm_step", _maxdiff(a, b), TOL_STEP, scn)
    raise ValueError(f"unknown level {level!r}")


# --------------------------------------------------------------------------
# Surrogate constructions on a trial set
# --------------------------------------------------------------------------
def _signal_and_cov(scn, Ws):
    t = calc.mimo_terms(scn, Ws)
    return t.X, t.F, t.S


def _prop9_bca(scn, Gamma, Ws):
    # Lagrangian-dual objective with Gamma frozen at its anchor optimum
    X, F, S = _signal_and_cov(scn, Ws)
    total = 0.0
    for k in range(scn.num_links):
        IG = np.eye(Gamma[k].shape[0]) + Gamma[k]
        ratio = X[k].conj().T @ np.linalg.solve(S[k], X[k])
        total += scn.weights[k] * (np.linalg.slogdet(IG)[1]
                                   - np.trace(Gamma[k]).real
                                   + np.trace(IG @ ratio).real)
    return float(total)


def _prop9_lemma(scn, Zbar, Ws):
    # log det Z >= log det Zbar + tr(I - Zbar Z^{-1}), Z = I + X^H F^{-1} X
    X, F, _ = _signal_and_cov(scn, Ws)
    total = 0.0
    for k in range(scn.num_links):
        n = X[k].shape[1]
        Z = np.eye(n) + X[k].conj().T @ np.linalg.solve(F[k], X[k])
        total += scn.weights[k] * (
            np.linalg.slogdet(Zbar[k])[1]
            + np.trace(np.eye(n) - Zbar[k] @ np.linalg.inv(Z)).real)
    return float(total)


def _minorizer_report(name, f_bca, f_lemma, scn, bf, trials):
    f_anchor = wsr_mimo(scn, bf)
    disc = max(abs(f_bca(bf) - f_anchor), abs(f_lemma(bf) - f_anchor))
    for Ws in trials:
        a, b = f_bca(Ws), f_lemma(Ws)
        f = wsr_mimo(scn, Ws)
        # value match plus any violation of the lower bound
        disc = max(disc, abs(a - b), a - f, b - f)
    return _report(name, disc, TOL_SURROGATE, scn, trials=len(trials))


def check_prop9(scn, bf, trials=100, rng=None):
    """Gamma update of the Lagrangian-dual transform versus the log-det
    minorizer, compared as functions of the beamformers.

    The reported discrepancy also absorbs tangency error at the anchor and
    any positive excess of either surrogate over the WSR.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    t = calc.mimo_terms(scn, bf)
    Gamma = list(t.Gamma)
    Zbar = [np.eye(G.shape[0]) + G for G in Gamma]
    pts = trials if isinstance(trials, list) else _trials(scn, rng, trials)
    return _minorizer_report(
        "prop9", lambda W: _prop9_bca(scn, Gamma, W),
        lambda W: _prop9_lemma(scn, Zbar, W), scn, bf, pts)


def check_prop10(scn, bf, trials=100, rng=None):
    """Phi update of the quadratic transform versus the matrix-fraction
    minorizer, with Gamma frozen at its anchor optimum.

    Both sides include the Gamma-only terms so that they are tangent to the
    WSR at the anchor.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    K = scn.num_links
    om = scn.weights
    Gamma, Phi = mimo.fp_auxiliaries(scn, bf)
    Xb, _, Sb = _signal_and_cov(scn, bf)
    IG = [np.eye(G.shape[0]) + G for G in Gamma]
    const = sum(om[k] * (np.linalg.slogdet(IG[k])[1]
                         - np.trace(Gamma[k]).real) for k in range(K))

    def bca(Ws):
        X, _, S = _signal_and_cov(scn, Ws)
        total = const
        for k in range(K):
            lin = np.sqrt(om[k]) * X[k].conj().T @ Phi[k]
            inner = lin + lin.conj().T - Phi[k].conj().T @ S[k] @ Phi[k]
            total += np.trace(IG[k] @ inner).real
        return float(total)

    def lemma(Ws):
        X, _, S = _signal_and_cov(scn, Ws)
        total = const
        for k in range(K):
            Z1, Z1b = np.sqrt(om[k]) * X[k], np.sqrt(om[k]) * Xb[k]
            P = np.linalg.solve(Sb[k], Z1b)
            lin = P.conj().T @ Z1
            inner = lin + lin.conj().T - P.conj().T @ S[k] @ P
            total += np.trace(IG[k] @ inner).real
        return float(total)

    pts = trials if isinstance(trials, list) else _trials(scn, rng, trials)
    return _minorizer_report("prop10", bca, lemma, scn, bf, pts)


# --------------------------------------------------------------------------
# Projected gradient and the gamma repair
# --------------------------------------------------------------------------
def check_pgd_identity(scn, bf, mode=EtaMode.EXACT):
    """MM+ point against ``W + grad / (2 eta)``, MISO or MIMO."""
    if isinstance(scn, MisoScenario):
        q, eta, _ = miso.mm_plus_direction(scn, bf, mode)
        ref = np.asarray(bf) + calc.grad_wsr_miso(scn, bf) / (2 * eta)
        return _report("pgd_identity", _maxdiff(q, ref), TOL_GRAD_MISO, scn)
    _, Q, etas = mimo.mm_plus_step_mimo(scn, bf, mode)
    g = calc.grad_wsr_mimo(scn, bf)
    ref = [bf[k] + g[k] / (2 * etas[k]) for k in range(scn.num_links)]
    return _report("pgd_identity", _maxdiff(Q, ref), TOL_MAP, scn)


def check_remark3(scn, bf):
    """Closed-form gamma evaluated at the phi of the FP step equals SINR."""
    terms = calc.miso_terms(scn, bf)
    phi = np.sqrt(scn.weights * (1 + terms.sinr)) * terms.signal / terms.total
    gamma = miso.fp_gamma_conventional(phi, bf, scn)
    return _report("remark3", _maxdiff(gamma, terms.sinr), TOL_REMARK, scn)


# --------------------------------------------------------------------------
# Suite
# --------------------------------------------------------------------------
def make_instance(seed, K=4, dims=4, geo=None):
    """Seeded MISO and MIMO instances with random full-power starts."""
    geo = GeometryConfig(seed=seed) if geo is None else geo
    ms = generate_miso(geo, K, dims)
    mm = generate_mimo(geo, K, dims, dims, dims)
    rng = init_rng(seed)
    return ms, random_beamformers_miso(ms, rng), mm, \
        random_beamformers_mimo(mm, rng)


def run_suite(seeds, K=4, dims=4, perturb=0.0, trials=100):
    """Run every identity check on each seed; yields reports in order.

    ``perturb`` shifts the WMMSE-to-MM map by a constant to exercise the
    failure path.
    """
    if not 1 <= K <= MAX_USERS or not 1 <= dims <= MAX_DIM:
        raise ValueError(f"K and dims are capped at {MAX_USERS}/{MAX_DIM}")
    for seed in seeds:
        ms, w, mm, Ws = make_instance(seed, K, dims)
        rng = init_rng(seed + 1)
        checks = [
            check_woodbury_mk(mm, Ws),
            check_wmmse_mm_map(mm, Ws, perturb=perturb),
            check_wmmse_mm_map(mm, Ws, level="iterate"),
            check_fp_mm_map(mm, Ws),
            check_fp_mm_map(mm, Ws, level="iterate"),
            check_prop9(mm, Ws, trials, rng),
            check_prop10(mm, Ws, trials, rng),
            check_pgd_identity(ms, w),
            check_pgd_identity(mm, Ws),
            check_remark3(ms, w),
        ]
        for r in checks:
            r.instance["seed"] = int(seed)
            yield r
