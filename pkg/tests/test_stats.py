import numpy as np
import pytest

import funfolio as ff
from funfolio.errors import (
    ConstantSeriesError,
    DegenerateVarianceError,
    ValidationError,
    ZeroVarianceError,
)
from helpers import student_t_sf_df2


def test_realized_objective_cases():
    mv = ff.ObjectiveSpec(kind="mv", lam=2.0)
    # constant returns: zero variance, F = c
    assert ff.realized_objective(mv, np.full(5, 0.03)) == pytest.approx(0.03, abs=1e-15)
    sharpe = ff.ObjectiveSpec(kind="sharpe", r0=0.0)
    assert ff.realized_objective(sharpe, [0.1, -0.1]) == pytest.approx(0.0, abs=1e-15)
    mv1 = ff.ObjectiveSpec(kind="mv", lam=1.0)
    assert ff.realized_objective(mv1, [1.0, 2.0, 3.0]) == pytest.approx(4.0 / 3.0, abs=1e-12)


def test_realized_objective_guards():
    sharpe = ff.ObjectiveSpec(kind="sharpe", r0=0.0)
    with pytest.raises(DegenerateVarianceError):
        ff.realized_objective(sharpe, np.full(6, 0.01))
    with pytest.raises(ValidationError):
        ff.realized_objective(sharpe, [0.01])


def test_realized_sharpe_scale_invariant():
    sharpe = ff.ObjectiveSpec(kind="sharpe", r0=0.0)
    rng = np.random.default_rng(51)
    r = rng.normal(0.01, 0.05, 40)
    base = ff.realized_objective(sharpe, r)
    for c in (2.0, 17.5, 0.3):
        scaled = ff.realized_objective(sharpe, c * r)
        assert scaled == pytest.approx(base, rel=1e-10)


def test_paired_t_frozen_example():
    # d = (1,2,3): t = 2*sqrt(3), df = 2; p from the exact df=2 tail formula
    res = ff.paired_t_test([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
    assert res.statistic == pytest.approx(2.0 * np.sqrt(3.0), rel=1e-12)
    assert res.df == 2
    oracle = student_t_sf_df2(2.0 * np.sqrt(3.0))
    assert oracle == pytest.approx(0.03709, abs=5e-5)
    assert res.p_value == pytest.approx(oracle, abs=1e-10)


def test_paired_t_zero_variance():
    with pytest.raises(ZeroVarianceError):
        ff.paired_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])


def test_paired_t_antisymmetric():
    rng = np.random.default_rng(52)
    x = rng.normal(0, 1, 30)
    y = rng.normal(0, 1, 30)
    a = ff.paired_t_test(x, y)
    b = ff.paired_t_test(y, x)
    assert a.statistic == -b.statistic


def test_paired_t_null_calibration():
    # symmetric differences: p concentrates around 1/2
    rng = np.random.default_rng(53)
    ps = []
    for _ in range(40):
        d = rng.normal(0.0, 1.0, 400)
        ps.append(ff.paired_t_test(d, np.zeros(400)).p_value)
    assert 0.3 <= np.median(ps) <= 0.7


def test_ljung_box_zero_autocorrelation_series():
    # two opposite spikes further apart than h: all lag-k products vanish
    h = 4
    x = np.zeros(16)
    x[0], x[h + 1] = 1.0, -1.0
    res = ff.ljung_box(x, h)
    assert res.statistic == pytest.approx(0.0, abs=1e-15)
    assert res.p_value == pytest.approx(1.0, abs=1e-15)
    assert res.df == h


def test_ljung_box_requires_variation():
    with pytest.raises(ConstantSeriesError):
        ff.ljung_box(np.full(30, 0.2), 3)
    with pytest.raises(ValidationError):
        ff.ljung_box(np.arange(5.0), 5)


def test_ljung_box_scale_invariant():
    rng = np.random.default_rng(54)
    x = rng.normal(0, 1, 120)
    a = ff.ljung_box(x, 12)
    b = ff.ljung_box(1e4 * x, 12)
    assert a.statistic == pytest.approx(b.statistic, rel=1e-10)


def test_ljung_box_null_calibration():
    # 1000 white-noise series, n=240, h=12: rejection rate near 5%
    rng = np.random.default_rng(55)
    rejections = 0
    for _ in range(1000):
        x = rng.normal(0.0, 1.0, 240)
        if ff.ljung_box(x, 12).p_value < 0.05:
            rejections += 1
    assert 20 <= rejections <= 90


def test_ljung_box_detects_ar_dependence():
    panel = ff.simulate(ff.GeneratorConfig.preset("ar", n=240, p=1, seed=56))
    res = ff.ljung_box(panel.values[:, 0], 12)
    assert res.p_value < 1e-4


def test_information_ratio_cases():
    assert ff.information_ratio([0.1, -0.1]) == pytest.approx(0.0, abs=1e-15)
    assert ff.information_ratio([1.0, 2.0, 3.0]) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(DegenerateVarianceError):
        ff.information_ratio(np.full(10, 0.5))


def test_test_result_serialization():
    res = ff.paired_t_test([2.0, 4.0, 7.0], [1.0, 2.0, 3.0])
    d = res.to_dict()
    assert set(d) == {"statistic", "df", "p_value"}
    assert 0.0 <= d["p_value"] <= 1.0
