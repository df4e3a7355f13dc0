import json

import numpy as np
import pytest

from wsrmax import equivalence as eq
from wsrmax.system_model import MimoScenario, wsr_mimo

from conftest import mimo_instance, miso_instance, unit_miso


def zeros(Ws):
    return [np.zeros_like(W) for W in Ws]


def test_report_pass_flag_and_json():
    r = eq.IdentityReport("x", 1e-12, 1e-9, {"seed": 3})
    assert r.passed
    assert not eq.IdentityReport("x", 2e-9, 1e-9, {}).passed
    doc = json.loads(r.to_json())
    assert doc["identity"] == "x" and doc["passed"] is True
    assert doc["instance"]["seed"] == 3


# -- Woodbury ---------------------------------------------------------------
def test_woodbury_zero():
    scn, Ws = mimo_instance(0)
    assert eq.check_woodbury_mk(scn, zeros(Ws)).discrepancy == 0.0


def test_woodbury_scalar():
    scn = MimoScenario([[np.array([[0.7 + 0.2j]])]], 1, 1.0, 1.3, 1.0)
    w = [np.array([[1.1]])]
    r = eq.check_woodbury_mk(scn, w)
    p, f = abs((0.7 + 0.2j) * 1.1) ** 2, 1.3
    assert 1 / (1 - p / (f + p)) == pytest.approx(1 + p / f)
    assert r.passed and r.discrepancy < 1e-14


# -- auxiliary maps ---------------------------------------------------------
@pytest.mark.parametrize("check", [eq.check_wmmse_mm_map, eq.check_fp_mm_map])
def test_maps_zero(check):
    scn, Ws = mimo_instance(1)
    assert check(scn, zeros(Ws)).discrepancy == 0.0
    assert check(scn, zeros(Ws), level="iterate").discrepancy == 0.0


@pytest.mark.parametrize("check", [eq.check_wmmse_mm_map, eq.check_fp_mm_map])
def test_maps_random(check):
    scn, Ws = mimo_instance(2)
    m = check(scn, Ws)
    s = check(scn, Ws, level="iterate")
    assert m.passed and m.tolerance == eq.TOL_MAP
    assert s.passed and s.tolerance == eq.TOL_STEP
    assert m.identity != s.identity


@pytest.mark.parametrize("check", [eq.check_wmmse_mm_map, eq.check_fp_mm_map])
def test_maps_negative_control(check):
    scn, Ws = mimo_instance(2)
    r = check(scn, Ws, perturb=1e-3)
    assert not r.passed and r.discrepancy >= 1e-3 * (1 - 1e-9)
    with pytest.raises(ValueError):
        check(scn, Ws, level="vector")


# -- surrogate constructions on trial sets ----------------------------------
@pytest.mark.parametrize("check", [eq.check_prop9, eq.check_prop10])
def test_prop_tangency(check):
    scn, Ws = mimo_instance(3)
    r = check(scn, Ws, trials=[Ws])
    assert r.discrepancy < 1e-9


@pytest.mark.parametrize("check", [eq.check_prop9, eq.check_prop10])
def test_prop_random_trials(check):
    scn, Ws = mimo_instance(4)
    r = check(scn, Ws, trials=100, rng=np.random.default_rng(0))
    assert r.passed and r.instance["trials"] == 100


def test_prop9_other_anchor():
    # the construction holds at any anchor, including a scaled one
    scn, Ws = mimo_instance(5)
    other = [0.5 * W for W in Ws]
    r = eq.check_prop9(scn, Ws, trials=[other])
    assert r.passed
    moved = eq.check_prop9(scn, other, trials=[Ws])
    assert moved.discrepancy < 1e-8
    assert abs(wsr_mimo(scn, Ws) - wsr_mimo(scn, other)) > 1e-3


# -- projected gradient, gamma substitution --------------------------------
def test_pgd_zero_gradient_anchor():
    scn, W = miso_instance(0)
    assert eq.check_pgd_identity(scn, np.zeros_like(W)).discrepancy == 0.0
    mscn, Ws = mimo_instance(0)
    assert eq.check_pgd_identity(mscn, zeros(Ws)).discrepancy == 0.0


@pytest.mark.parametrize("mode", ["exact", "frobenius"])
def test_pgd_random(mode):
    scn, W = miso_instance(6)
    r = eq.check_pgd_identity(scn, W, mode)
    assert r.passed and r.tolerance == 1e-10
    mscn, Ws = mimo_instance(6)
    r = eq.check_pgd_identity(mscn, Ws, mode)
    assert r.passed and r.tolerance == 1e-9


def test_gamma_identity_cases():
    scn, W = miso_instance(1)
    assert eq.check_remark3(scn, np.zeros_like(W)).discrepancy == 0.0
    assert eq.check_remark3(scn, W).passed
    orth = unit_miso([[1, 0], [0, 2]])
    r = eq.check_remark3(orth, np.array([[0.5, 0], [0, 0.5j]]))
    assert r.discrepancy < 1e-15


# -- suite ------------------------------------------------------------------
def test_suite_passes():
    reports = list(eq.run_suite(range(3), trials=20))
    assert len(reports) == 30
    assert all(r.passed for r in reports), [r.to_json() for r in reports
                                             if not r.passed]
    assert {r.instance["seed"] for r in reports} == {0, 1, 2}


def test_suite_forced_failure():
    reports = list(eq.run_suite([0], perturb=1e-3, trials=5))
    failed = [r.identity for r in reports if not r.passed]
    assert failed == ["wmmse_mm_map"]


def test_suite_caps():
    with pytest.raises(ValueError):
        list(eq.run_suite([0], K=eq.MAX_USERS + 1))
    with pytest.raises(ValueError):
        list(eq.run_suite([0], dims=0))


def test_make_instance_deterministic():
    a, b = eq.make_instance(9), eq.make_instance(9)
    assert np.array_equal(a[1], b[1])
    assert all(np.array_equal(x, y) for x, y in zip(a[3], b[3]))
