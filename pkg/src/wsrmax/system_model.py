"""
Problem instances and exact evaluation of SINR, rates and weighted sum-rate.

Two system models are supported:

* MISO broadcast channel: one base station with ``M`` antennas serving ``K``
  single-antenna users. Channels are stored as a ``(K, M)`` complex array
  whose row ``k`` is ``h_k``; beamformers are a ``(K, M)`` array whose row
  ``k`` is ``w_k``.
* MIMO interference channel: ``K`` transmitter/receiver pairs. ``H[i][j]``
  is the ``(Mr[i], Mt[j])`` channel from transmitter ``j`` to receiver
  ``i``; beamformers are a list of ``(Mt[k], Ms[k])`` matrices.

All rates are in nats.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "GeometryConfig", "MisoScenario", "MimoScenario", "path_loss",
    "complex_gaussian", "generate_miso", "generate_mimo", "sinr_miso",
    "sinr_all_miso", "wsr_miso", "interference_plus_noise", "rate_mimo",
    "wsr_mimo", "mse_miso", "mse_mimo", "total_power", "per_link_power",
    "is_feasible_miso", "is_feasible_mimo", "dbm_to_linear",
    "random_beamformers_miso", "random_beamformers_mimo", "make_rng",
    "init_rng", "cross_gains",
    "matched_filter_miso", "scenario_to_json", "scenario_from_json",
]

FEASIBILITY_RTOL = 1e-9


def dbm_to_linear(p_dbm):
    """Convert dBm to milliwatt-linear scale (0 dBm -> 1.0)."""
    return 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


@dataclass(frozen=True)
class GeometryConfig:
    """Deployment geometry and large-scale fading parameters.

    Positions are 3-D Cartesian coordinates in meters. Users (MISO) or
    receivers (MIMO) are dropped uniformly in the horizontal disk of radius
    ``radius`` around ``cluster_center``; MIMO transmitters likewise around
    ``base_position``.

    When ``normalize_noise`` is true the channel gain is divided by the
    thermal noise power ``noise_psd_dbm_hz + 10 log10(bandwidth_hz)`` so
    that a unit noise variance in the scenario corresponds to that noise
    floor. With ``normalize_noise=False`` the raw path loss is used.
    """
    base_position: tuple = (0.0, 0.0, 10.0)
    cluster_center: tuple = (200.0, 30.0, 0.0)
    radius: float = 10.0
    ref_loss_db: float = -30.0
    ref_distance: float = 1.0
    exponent: float = 3.67
    seed: int = 0
    normalize_noise: bool = True
    noise_psd_dbm_hz: float = -169.0
    bandwidth_hz: float = 240e3

    def __post_init__(self):
        if self.ref_distance <= 0:
            raise ValueError("ref_distance must be positive")
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    @property
    def noise_power_mw(self):
        return float(dbm_to_linear(self.noise_psd_dbm_hz)
                     * self.bandwidth_hz)

    def channel_gain(self, d):
        """Per-entry channel variance at distance ``d``."""
        g = path_loss(d, self)
        if self.normalize_noise:
            g = g / self.noise_power_mw
        return g


def path_loss(d, geo):
    """Distance-dependent attenuation ``T0 (d/d0)^(-exponent)`` (linear).

    >>> geo = GeometryConfig()
    >>> float(path_loss(1.0, geo))
    0.001
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    t0 = 10.0 ** (geo.ref_loss_db / 10.0)
    out = t0 * (d / geo.ref_distance) ** (-geo.exponent)
    return out if out.ndim else float(out)


def _uniform(rng, size):
    # float64 uniforms on [0, 1) from the bit generator stream
    return rng.random(size)


def complex_gaussian(rng, shape):
    """Draw CN(0, 1) samples with the Box-Muller transform.

    Only ``rng.random`` is used, so the samples are fixed by the bit
    generator's raw stream.
    """
    n = int(np.prod(shape))
    u = _uniform(rng, 2 * n)
    u1, u2 = u[:n], u[n:]
    r = np.sqrt(-np.log1p(-u1))
    z = r * np.exp(2j * np.pi * u2)
    return z.reshape(shape)


def _disk_points(rng, center, radius, n):
    u = _uniform(rng, 2 * n)
    r = radius * np.sqrt(u[:n])
    t = 2 * np.pi * u[n:]
    pts = np.tile(np.asarray(center, dtype=float), (n, 1))
    pts[:, 0] += r * np.cos(t)
    pts[:, 1] += r * np.sin(t)
    return pts


def make_rng(seed):
    """Counter-based Philox generator used for every random draw."""
    return np.random.Generator(np.random.Philox(seed))


def init_rng(seed):
    """Generator for initial beamformers, independent of the channel draw.

    Scenarios consume ``make_rng(seed)``; initializations use a spawned
    child of the same seed so the two streams never overlap.
    """
    ss = np.random.SeedSequence(seed, spawn_key=(1,))
    return np.random.Generator(np.random.Philox(ss))


def _freeze(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MisoScenario:
    """MISO broadcast channel instance.

    Parameters
    ----------
    channels : (K, M) complex array, row ``k`` is ``h_k``.
    weights : (K,) nonnegative user priorities.
    noise : (K,) positive noise variances.
    power : total transmit power budget (linear).
    """
    channels: np.ndarray
    weights: np.ndarray
    noise: np.ndarray
    power: float
    positions: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        h = np.asarray(self.channels, dtype=complex)
        if h.ndim != 2 or h.shape[0] < 1 or h.shape[1] < 1:
            raise ValueError("channels must be a nonempty (K, M) array")
        K = h.shape[0]
        w = np.broadcast_to(np.asarray(self.weights, dtype=float), (K,))
        s = np.broadcast_to(np.asarray(self.noise, dtype=float), (K,))
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(s <= 0):
            raise ValueError("noise variances must be positive")
        if not self.power > 0:
            raise ValueError("power budget must be positive")
        object.__setattr__(self, "channels", _freeze(h))
        object.__setattr__(self, "weights", _freeze(w))
        object.__setattr__(self, "noise", _freeze(s))
        object.__setattr__(self, "power", float(self.power))
        if self.positions is not None:
            object.__setattr__(self, "positions", _freeze(self.positions))

    @property
    def num_users(self):
        return self.channels.shape[0]

    @cached_property
    def conj_channels(self):
        return _freeze(self.channels.conj())

    @cached_property
    def channel_norms2(self):
        """Squared norms ``||h_k||^2``."""
        return _freeze(np.einsum("km,km->k", self.channels,
                                 self.conj_channels).real)

    @property
    def num_antennas(self):
        return self.channels.shape[1]


@dataclass(frozen=True)
class MimoScenario:
    """MIMO interference channel instance.

    ``channels[i][j]`` has shape ``(rx_antennas[i], tx_antennas[j])``.
    ``power`` holds the per-link budgets.
    """
    channels: tuple
    streams: tuple
    weights: np.ndarray
    noise: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        K = len(self.channels)
        if K < 1:
            raise ValueError("need at least one link")
        H = tuple(tuple(_freeze(np.asarray(self.channels[i][j], dtype=complex))
                        for j in range(K)) for i in range(K))
        for i in range(K):
            if len(self.channels[i]) != K:
                raise ValueError("channels must be a K x K nested list")
        mr = [H[i][0].shape[0] for i in range(K)]
        mt = [H[0][j].shape[1] for j in range(K)]
        for i in range(K):
            for j in range(K):
                if H[i][j].shape != (mr[i], mt[j]):
                    raise ValueError(f"H[{i}][{j}] has shape {H[i][j].shape},"
                                     f" expected {(mr[i], mt[j])}")
        ms = tuple(int(x) for x in np.broadcast_to(self.streams, (K,)))
        for k in range(K):
            if not 1 <= ms[k] <= min(mt[k], mr[k]):
                raise ValueError("stream count must be in [1, min(Mt, Mr)]")
        w = np.broadcast_to(np.asarray(self.weights, dtype=float), (K,))
        s = np.broadcast_to(np.asarray(self.noise, dtype=float), (K,))
        p = np.broadcast_to(np.asarray(self.power, dtype=float), (K,))
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(s <= 0):
            raise ValueError("noise variances must be positive")
        if np.any(p <= 0):
            raise ValueError("power budgets must be positive")
        object.__setattr__(self, "channels", H)
        object.__setattr__(self, "streams", ms)
        object.__setattr__(self, "weights", _freeze(w))
        object.__setattr__(self, "noise", _freeze(s))
        object.__setattr__(self, "power", _freeze(p))

    @property
    def num_links(self):
        return len(self.channels)

    @property
    def tx_antennas(self):
        return tuple(self.channels[0][j].shape[1]
                     for j in range(self.num_links))

    @property
    def rx_antennas(self):
        return tuple(self.channels[i][0].shape[0]
                     for i in range(self.num_links))


def generate_miso(geo, K, M, weights=1.0, noise=1.0, power=1.0):
    """Draw a Rayleigh-faded MISO scenario from the seeded geometry."""
    if K < 1 or M < 1:
        raise ValueError("K and M must be positive")
    rng = make_rng(geo.seed)
    users = _disk_points(rng, geo.cluster_center, geo.radius, K)
    d = np.linalg.norm(users - np.asarray(geo.base_position), axis=1)
    gain = geo.channel_gain(d)
    h = np.sqrt(gain)[:, None] * complex_gaussian(rng, (K, M))
    return MisoScenario(h, weights, noise, power, positions=users)


def generate_mimo(geo, K, tx_antennas, rx_antennas, streams, weights=1.0,
                  noise=1.0, power=1.0):
    """Draw a Rayleigh-faded MIMO interference channel scenario.

    Transmitters are dropped around ``geo.base_position`` and receivers
    around ``geo.cluster_center``; ``H[i][j]`` has per-entry variance set by
    the distance between receiver ``i`` and transmitter ``j``.
    """
    if K < 1:
        raise ValueError("K must be positive")
    mt = np.broadcast_to(tx_antennas, (K,)).astype(int)
    mr = np.broadcast_to(rx_antennas, (K,)).astype(int)
    rng = make_rng(geo.seed)
    tx = _disk_points(rng, geo.base_position, geo.radius, K)
    rx = _disk_points(rng, geo.cluster_center, geo.radius, K)
    H = []
    for i in range(K):
        row = []
        for j in range(K):
            g = geo.channel_gain(np.linalg.norm(rx[i] - tx[j]))
            row.append(np.sqrt(g) * complex_gaussian(rng, (mr[i], mt[j])))
        H.append(row)
    return MimoScenario(H, streams, weights, noise, power)


# --------------------------------------------------------------------------
# MISO evaluation
# --------------------------------------------------------------------------
def cross_gains(scn, W):
    """Matrix ``C[k, j] = h_k^H w_j``."""
    return scn.conj_channels @ np.asarray(W).T


def sinr_all_miso(scn, W):
    """SINR of every user as a length-K array."""
    p = np.abs(cross_gains(scn, W)) ** 2
    sig = np.diag(p)
    interf = p.sum(axis=1) - sig + scn.noise
    return sig / interf


def sinr_miso(scn, W, k):
    """SINR of user ``k`` under beamformers ``W``."""
    K = scn.num_users
    if not 0 <= k < K:
        raise IndexError(f"user index {k} out of range for K={K}")
    hk = scn.channels[k].conj()
    g = np.abs(np.asarray(W) @ hk) ** 2
    return g[k] / (g.sum() - g[k] + scn.noise[k])


def wsr_miso(scn, W):
    """Weighted sum-rate ``sum_k w_k ln(1 + SINR_k)`` in nats."""
    return float(np.dot(scn.weights, np.log1p(sinr_all_miso(scn, W))))


def mse_miso(scn, W, l, k):
    """MSE of user ``k`` with scalar receiver ``l`` (estimate ``l* y_k``)."""
    c = np.asarray(W) @ scn.channels[k].conj()
    lc = np.conj(l) * c
    return float(abs(lc[k] - 1) ** 2 + np.sum(np.abs(lc) ** 2)
                 - abs(lc[k]) ** 2 + scn.noise[k] * abs(l) ** 2)


def total_power(W):
    """Sum of squared norms over all beamformers."""
    if isinstance(W, np.ndarray):
        return float(np.sum(np.abs(W) ** 2))
    return float(sum(np.sum(np.abs(Wk) ** 2) for Wk in W))


def per_link_power(W, k):
    return float(np.sum(np.abs(W[k]) ** 2))


def is_feasible_miso(scn, W, rtol=FEASIBILITY_RTOL):
    return total_power(W) <= scn.power * (1 + rtol)


def is_feasible_mimo(scn, Ws, rtol=FEASIBILITY_RTOL):
    return all(per_link_power(Ws, k) <= scn.power[k] * (1 + rtol)
               for k in range(scn.num_links))


def random_beamformers_miso(scn, rng):
    """I.i.d. complex Gaussian beamformers scaled to the full budget."""
    W = complex_gaussian(rng, (scn.num_users, scn.num_antennas))
    return W * np.sqrt(scn.power / total_power(W))


def matched_filter_miso(scn):
    """Channel-matched beamformers with equal power split."""
    h = scn.channels
    n = np.linalg.norm(h, axis=1, keepdims=True)
    n[n == 0] = 1.0
    return h / n * np.sqrt(scn.power / scn.num_users)


# --------------------------------------------------------------------------
# MIMO evaluation
# --------------------------------------------------------------------------
def interference_plus_noise(scn, Ws, k):
    """Interference-plus-noise covariance ``F_k`` at receiver ``k``."""
    H = scn.channels
    mr = H[k][0].shape[0]
    F = scn.noise[k] * np.eye(mr, dtype=complex)
    for j in range(scn.num_links):
        if j != k:
            X = H[k][j] @ Ws[j]
            F += X @ X.conj().T
    return F


def rate_mimo(scn, Ws, k):
    """Rate of link ``k``: ``ln det(I + X^H F^{-1} X)`` with ``X = H_kk W_k``."""
    F = interference_plus_noise(scn, Ws, k)
    X = scn.channels[k][k] @ Ws[k]
    G = X.conj().T @ np.linalg.solve(F, X)
    sign, logdet = np.linalg.slogdet(np.eye(G.shape[0]) + G)
    if sign.real <= 0:
        raise np.linalg.LinAlgError("rate matrix is not positive definite")
    return float(logdet)


def wsr_mimo(scn, Ws):
    """Weighted sum-rate of the interference channel in nats."""
    return float(sum(scn.weights[k] * rate_mimo(scn, Ws, k)
                     for k in range(scn.num_links)))


def mse_mimo(scn, Ws, L, k):
    """MSE matrix ``E_k`` of receiver ``k`` with linear receiver ``L``."""
    H = scn.channels
    LH = L.conj().T
    D = LH @ H[k][k] @ Ws[k] - np.eye(Ws[k].shape[1])
    E = D @ D.conj().T + scn.noise[k] * (LH @ L)
    for j in range(scn.num_links):
        if j != k:
            Y = LH @ H[k][j] @ Ws[j]
            E += Y @ Y.conj().T
    return E


def random_beamformers_mimo(scn, rng):
    """I.i.d. complex Gaussian matrices scaled to each link's budget."""
    out = []
    for k in range(scn.num_links):
        Wk = complex_gaussian(rng, (scn.tx_antennas[k], scn.streams[k]))
        out.append(Wk * np.sqrt(scn.power[k] / np.sum(np.abs(Wk) ** 2)))
    return out


# --------------------------------------------------------------------------
# JSON fixtures
# --------------------------------------------------------------------------
def _c2j(a):
    a = np.asarray(a)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _j2c(x):
    a = np.asarray(x, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def scenario_to_json(scn):
    """Serialize a scenario; complex entries become ``[re, im]`` pairs."""
    if isinstance(scn, MisoScenario):
        doc = {"kind": "miso", "channels": _c2j(scn.channels)}
        power = scn.power
    else:
        doc = {"kind": "mimo",
               "channels": [[_c2j(Hij) for Hij in row]
                            for row in scn.channels],
               "streams": list(scn.streams)}
        power = scn.power.tolist()
    doc.update(weights=scn.weights.tolist(), noise=scn.noise.tolist(),
               power=power)
    return json.dumps(doc)


def scenario_from_json(text):
    doc = json.loads(text)
    if doc["kind"] == "miso":
        return MisoScenario(_j2c(doc["channels"]), doc["weights"],
                            doc["noise"], doc["power"])
    if doc["kind"] == "mimo":
        H = [[_j2c(Hij) for Hij in row] for row in doc["channels"]]
        return MimoScenario(H, doc["streams"], doc["weights"], doc["noise"],
                            doc["power"])
    raise ValueError(f"unknown scenario kind {doc['kind']!r}")
