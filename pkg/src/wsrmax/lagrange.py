"""
Regularized least-squares ``W(mu) = (G + mu I)^+ R`` and the bisection search
for the smallest multiplier ``mu >= 0`` with ``||W(mu)||^2 <= budget``.

The Hermitian eigendecomposition of ``G`` is computed once per search;
every bisection step then costs ``O(n m)`` on the rotated right-hand side.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RegularizedProblem", "SearchFailure", "SearchOptions",
           "pinv_solve", "power_curve", "find_mu"]

RANK_RTOL = 1e-12


class SearchFailure(RuntimeError):
    """Raised when the multiplier search exhausts its iteration budget."""

    def __init__(self, msg, bracket):
        super().__init__(f"{msg}; bracket={bracket}")
        self.bracket = bracket


@dataclass(frozen=True)
class SearchOptions:
    """Stopping rule of the multiplier search.

    The search stops when ``budget - power <= tol_power * budget`` or when
    the bracket width drops to ``tol_mu``. Setting ``tol_power=0`` and
    ``tol_mu=2**-i`` gives the relaxed interval-width rule.
    """
    tol_power: float = 1e-10
    tol_mu: float = 0.0
    max_iter: int = 200

    @classmethod
    def relaxed(cls, i, max_iter=200):
        return cls(tol_power=0.0, tol_mu=2.0 ** (-i), max_iter=max_iter)


@dataclass(frozen=True)
class RegularizedProblem:
    """``G`` Hermitian PSD (n, n), ``R`` (n, m) right-hand side."""
    G: np.ndarray
    R: np.ndarray
    budget: float

    def __post_init__(self):
        G = np.asarray(self.G)
        R = np.asarray(self.R)
        if R.ndim == 1:
            R = R[:, None]
        if G.shape != (R.shape[0], R.shape[0]):
            raise ValueError("G must be square and match R's row count")
        A = np.abs(G)
        if np.abs(G - G.conj().T).max(initial=0.0) > \
                1e-10 * max(1.0, A.max(initial=0.0)):
            raise ValueError("G must be Hermitian")
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "R", R)


class _Spectral:
    """Cached eigendecomposition of ``G`` with rotated right-hand side."""

    def __init__(self, prob):
        G = 0.5 * (prob.G + prob.G.conj().T)
        lam, U = np.linalg.eigh(G)
        self.lam = lam
        self.U = U
        self.Rt = U.conj().T @ prob.R
        self.rows = np.sum(np.abs(self.Rt) ** 2, axis=1)
        self.tau = RANK_RTOL * max(lam[-1] if lam.size else 0.0, 1.0)
        self.pairs = list(zip(lam.tolist(), self.rows.tolist()))

    def gain(self, mu):
        d = self.lam + mu
        keep = d > self.tau
        g = np.zeros_like(d)
        g[keep] = 1.0 / d[keep]
        return g

    def power(self, mu):
        # scalar loop: the spectra here are tiny and numpy call overhead
        # would dominate the bisection
        tau = self.tau
        p = 0.0
        for lam, r in self.pairs:
            d = lam + mu
            if d > tau:
                p += r / (d * d)
        return p

    def solve(self, mu):
        return self.U @ (self.gain(mu)[:, None] * self.Rt)


def _check_mu(mu):
    if mu < 0:
        raise ValueError(f"multiplier must be nonnegative, got {mu}")


def pinv_solve(prob, mu):
    """Return ``(G + mu I)^+ R`` via the eigendecomposition of ``G``."""
    _check_mu(mu)
    return _Spectral(prob).solve(mu)


def power_curve(prob, mu):
    """Squared Frobenius norm of ``pinv_solve(prob, mu)``."""
    _check_mu(mu)
    return _Spectral(prob).power(mu)


def find_mu(prob, tol_power=1e-10, tol_mu=0.0, max_iter=200):
    """Smallest ``mu >= 0`` whose solution meets the power budget.

    Returns
    -------
    mu : float
    W : ndarray
        ``pinv_solve(prob, mu)``; always satisfies the budget.
    iterations : int
        Number of power evaluations spent in the bisection.
    """
    if tol_power < 0 or tol_mu < 0 or (tol_power == 0 and tol_mu == 0
                                       and max_iter <= 0):
        raise ValueError("invalid tolerances")
    sp = _Spectral(prob)
    budget = prob.budget
    if sp.power(0.0) <= budget * (1 + 1e-12):
        return 0.0, sp.solve(0.0), 0

    lo = 0.0
    hi = np.sqrt(np.sum(sp.rows)) / np.sqrt(budget)
    p_hi = sp.power(hi)
    it = 1
    while p_hi > budget:
        # safety net for tiny negative eigenvalues of a nominally PSD G
        lo, hi = hi, 2.0 * hi
        p_hi = sp.power(hi)
        it += 1
        if it > max_iter:
            raise SearchFailure("could not bracket the multiplier", (lo, hi))

    while True:
        if budget - p_hi <= tol_power * budget or hi - lo <= tol_mu:
            break
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break  # bracket exhausted at float resolution
        if it >= max_iter:
            raise SearchFailure("multiplier search did not converge",
                                (lo, hi))
        p = sp.power(mid)
        it += 1
        if p > budget:
            lo = mid
        else:
            hi, p_hi = mid, p
    return hi, sp.solve(hi), it
