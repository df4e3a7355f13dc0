import numpy as np
import pytest

from wsrmax.system_model import (GeometryConfig, MimoScenario, MisoScenario,
                                 generate_mimo, generate_miso, init_rng,
                                 random_beamformers_mimo,
                                 random_beamformers_miso)


def miso_instance(seed, K=4, M=4):
    scn = generate_miso(GeometryConfig(seed=seed), K, M)
    return scn, random_beamformers_miso(scn, init_rng(seed))


def mimo_instance(seed, K=4, dims=4, streams=None):
    scn = generate_mimo(GeometryConfig(seed=seed), K, dims, dims,
                        dims if streams is None else streams)
    return scn, random_beamformers_mimo(scn, init_rng(seed))


def unit_miso(h, noise=1.0, power=1.0, weights=1.0):
    return MisoScenario(np.atleast_2d(np.asarray(h, dtype=complex)),
                        weights, noise, power)


def identity_mimo(M=4, power=1.0, noise=1.0):
    return MimoScenario([[np.eye(M)]], M, 1.0, noise, power)


def maxdiff(a, b):
    if isinstance(a, (list, tuple)):
        return max(np.abs(np.asarray(x) - np.asarray(y)).max()
                   for x, y in zip(a, b))
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance results, printed once at the end of the session
ACCEPTANCE = {}


def record(n, passed, detail):
    ACCEPTANCE[n] = (bool(passed), detail)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(
            f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
