import numpy as np
import pytest

from ttpinn.optim import Adam, LrSchedule, NonFiniteGradient, lr_at


def test_lr_schedule_goldens():
    s = LrSchedule(lr0=1e-3, decay=0.9, period=1000)
    assert lr_at(s, 0) == pytest.approx(1e-3)
    assert lr_at(s, 999) == pytest.approx(1e-3)
    assert lr_at(s, 1000) == pytest.approx(9e-4)
    assert lr_at(s, 2500) == pytest.approx(8.1e-4)


def test_lr_non_increasing_piecewise_constant():
    s = LrSchedule()
    lrs = [lr_at(s, i) for i in range(0, 5000, 100)]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))
    assert lr_at(s, 1500) == lr_at(s, 1999)


def test_lr_negative_iteration_rejected():
    with pytest.raises(ValueError):
        lr_at(LrSchedule(), -1)


def test_zero_gradient_keeps_parameters():
    params = {"p": np.array([1.0, -2.0])}
    opt = Adam(params)
    opt.step({"p": np.zeros(2)})
    np.testing.assert_array_equal(params["p"], [1.0, -2.0])
    assert opt.t == 1


def test_constant_gradient_approaches_sign_step():
    params = {"p": np.array(0.0)}
    schedule = LrSchedule(lr0=1e-3, decay=1.0, period=1)
    opt = Adam(params, schedule)
    c = 7.3
    for _ in range(3000):
        prev = params["p"].copy()
        opt.step({"p": np.array(c)})
    assert abs(prev - params["p"]) == pytest.approx(1e-3, rel=1e-3)


def test_quadratic_convergence():
    # lr 1e-2: the sign-step limit must cover the distance within the budget
    params = {"p": np.array(0.0)}
    opt = Adam(params, LrSchedule(lr0=1e-2, decay=1.0, period=1))
    for _ in range(5000):
        g = 2.0 * (params["p"] - 3.0)
        opt.step({"p": g})
    assert abs(float(params["p"]) - 3.0) <= 1e-3


def test_tt_cores_and_dense_treated_identically():
    # same gradient stream -> same trajectory regardless of parameter name/shape
    a = {"dense.w": np.zeros((2, 3))}
    b = {"h1.core0": np.zeros((1, 2, 3))}
    oa, ob = Adam(a), Adam(b)
    rng = np.random.default_rng(0)
    for _ in range(50):
        g = rng.standard_normal(6)
        oa.step({"dense.w": g.reshape(2, 3)})
        ob.step({"h1.core0": g.reshape(1, 2, 3)})
    assert np.array_equal(a["dense.w"].ravel(), b["h1.core0"].ravel())


def test_deterministic_trajectory():
    def run():
        params = {"p": np.full(4, 0.5)}
        opt = Adam(params)
        rng = np.random.default_rng(9)
        for _ in range(200):
            opt.step({"p": rng.standard_normal(4)})
        return params["p"]

    assert np.array_equal(run(), run())


def test_non_finite_gradient_aborts_with_diagnostics():
    params = {"h1.core2": np.zeros(3)}
    opt = Adam(params)
    with pytest.raises(NonFiniteGradient, match="h1.core2"):
        opt.step({"h1.core2": np.array([1.0, np.nan, 0.0])})


def test_step_uses_scheduled_lr():
    params = {"p": np.array(0.0)}
    opt = Adam(params, LrSchedule(lr0=1e-3, decay=0.9, period=2))
    lrs = []
    for i in range(4):
        lrs.append(lr_at(opt.schedule, opt.t))
        opt.step({"p": np.array(1.0)})
    assert lrs == [1e-3, 1e-3, pytest.approx(9e-4), pytest.approx(9e-4)]
