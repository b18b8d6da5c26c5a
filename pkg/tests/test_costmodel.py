import logging
import random
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bulksched.costmodel import (
    CalibrationSample,
    CostModelError,
    OperatorCostModel,
    RankDeficiencyWarning,
    dump_model,
    expand,
    fit,
    holdout_mse,
    load_model,
    predict,
    read_calibration_csv,
    select_plan,
    subplan_cost,
    weight_count,
)


def samples(name, fn, points):
    return [CalibrationSample(name, tuple(x), fn(*x)) for x in points]


def test_weight_layout():
    assert [weight_count(n) for n in (0, 1, 2, 3)] == [1, 3, 6, 10]
    assert list(expand([2.0, 3.0])) == [1, 2, 3, 4, 9, 6]


def test_recovers_planted_linear_model():
    data = samples("scan", lambda x: 2 + 3 * x, [(x,) for x in range(1, 11)])
    model = fit(data)
    assert np.allclose(model.weights, [2, 3, 0], atol=1e-9)
    assert not model.regularized


def test_recovers_pairwise_interaction():
    rng = random.Random(3)
    pts = [(rng.uniform(0.5, 5), rng.uniform(0.5, 5)) for _ in range(30)]
    model = fit(samples("join", lambda a, b: 1 + a * b, pts))
    assert model.pairwise[(0, 1)] == pytest.approx(1, abs=1e-9)
    assert np.allclose(model.weights[:5], [1, 0, 0, 0, 0], atol=1e-9)


def test_collinear_design_falls_back_to_ridge():
    pts = [(x, 2 * x) for x in (1, 2, 3, 4, 5, 6, 7, 8)]
    with pytest.warns(RankDeficiencyWarning):
        model = fit(samples("agg", lambda a, b: 5.0, pts))
    assert model.regularized
    for x in (1.5, 4, 7.5):
        assert predict(model, [x, 2 * x]) == pytest.approx(5, abs=1e-4)


def test_fit_input_errors():
    with pytest.raises(CostModelError, match="no calibration"):
        fit([])
    with pytest.raises(CostModelError, match="need at least"):
        fit(samples("s", lambda x: x + 1, [(1,), (2,)]))
    with pytest.raises(CostModelError, match="mix operators"):
        fit(samples("a", lambda x: 1, [(1,)]) + samples("b", lambda x: 1, [(2,), (3,)]))
    with pytest.raises(CostModelError, match="differing length"):
        fit([CalibrationSample("s", (1,), 1), CalibrationSample("s", (1, 2), 1), CalibrationSample("s", (3,), 1)])
    with pytest.raises(CostModelError, match="positive"):
        CalibrationSample("s", (1,), 0)


def test_duplicate_samples_do_not_count_twice():
    dup = samples("s", lambda x: x + 1, [(1,), (1,), (2,), (2,)])
    with pytest.raises(CostModelError, match="2 distinct"):
        fit(dup)


def test_predict_examples():
    model = OperatorCostModel("op", 1, (2.0, 3.0, 1.0))
    assert predict(model, [2]) == 12
    two = OperatorCostModel("op2", 2, (1.0, 1.0, 1.0, 0.0, 0.0, 1.0))
    assert predict(two, [1, 3]) == 8
    with pytest.raises(CostModelError, match="expected 2 features"):
        predict(two, [1])


def test_negative_prediction_is_logged(caplog):
    model = OperatorCostModel("op", 1, (-5.0, 1.0, 0.0))
    with caplog.at_level(logging.WARNING):
        assert predict(model, [1]) == -4
    assert "negative" in caplog.text


def test_weight_count_checked():
    with pytest.raises(CostModelError):
        OperatorCostModel("op", 2, (1.0, 2.0))


def models():
    return {
        "scan": OperatorCostModel("scan", 1, (1.0, 2.0, 0.0)),
        "sort": OperatorCostModel("sort", 1, (0.0, 0.0, 1.0)),
    }


def test_subplan_cost_sums_operators():
    assert subplan_cost(models(), [("scan", [3]), ("sort", [2])]) == 11
    with pytest.raises(CostModelError, match="no cost model"):
        subplan_cost(models(), [("hash", [1])])


def test_select_cheapest_and_breaks_ties_low():
    cands = [[("sort", [3])], [("scan", [2])], [("scan", [1]), ("sort", [1])], [("sort", [2])]]
    # costs 9, 5, 4, 4
    assert select_plan(models(), cands) == 2
    with pytest.raises(CostModelError):
        select_plan(models(), [])


def test_holdout_mse():
    model = OperatorCostModel("op", 1, (0.0, 1.0, 0.0))
    assert holdout_mse(model, samples("op", lambda x: x + 1, [(1,), (2,)])) == 1
    with pytest.raises(CostModelError):
        holdout_mse(model, [])


def test_csv_round_trip():
    text = "operator,rows,width,time_s\nscan,1,2,3.5\nsort,2,2,1.0\n\nscan,3,1,2\n"
    groups = read_calibration_csv(text)
    assert sorted(groups) == ["scan", "sort"]
    assert groups["scan"][1] == CalibrationSample("scan", (3.0, 1.0), 2.0)


@pytest.mark.parametrize(
    "text, message",
    [
        ("", "empty"),
        ("op,x,time_s\n", "header"),
        ("operator,x,time_s\nscan,1\n", "columns"),
        ("operator,x,time_s\nscan,abc,1\n", "line 2"),
        ("operator,x,time_s\nscan,1,-1\n", "positive"),
    ],
)
def test_csv_errors(text, message):
    with pytest.raises(CostModelError, match=message):
        read_calibration_csv(text)


def test_model_json_round_trip():
    model = OperatorCostModel("scan", 2, tuple(float(i) for i in range(6)))
    assert load_model(dump_model(model)) == model


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_planted_polynomials_recovered(seed, n):
    rng = random.Random(seed)
    w = [200.0] + [rng.uniform(-1, 1) for _ in range(weight_count(n) - 1)]
    pts = [tuple(rng.uniform(0.5, 5) for _ in range(n)) for _ in range(50)]
    data = [CalibrationSample("op", x, float(np.dot(w, expand(x)))) for x in pts]
    with warnings.catch_warnings():
        warnings.simplefilter("error", RankDeficiencyWarning)
        model = fit(data)
    assert max(abs(a - b) for a, b in zip(model.weights, w)) <= 1e-6


def shifted(model, c):
    return OperatorCostModel(model.operator_name, model.n, (model.weights[0] + c,) + model.weights[1:])


def test_common_intercept_shift_and_selection():
    base = models()
    bumped = {k: shifted(m, 10.0) for k, m in base.items()}
    equal_counts = [[("scan", [3])], [("sort", [2])]]  # 7 vs 4
    assert select_plan(base, equal_counts) == select_plan(bumped, equal_counts) == 1
    for cand in equal_counts:
        assert subplan_cost(bumped, cand) == subplan_cost(base, cand) + 10.0 * len(cand)
    # unequal operator counts: the two-operator plan loses once every step costs 10 more
    unequal = [[("scan", [1]), ("sort", [1])], [("sort", [2.5])]]  # 4 vs 6.25
    assert select_plan(base, unequal) == 0
    assert select_plan(bumped, unequal) == 1


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=6, max_size=6),
    st.lists(st.floats(-5, 5), min_size=6, max_size=6),
    st.floats(-3, 3),
    st.lists(st.floats(0, 4), min_size=2, max_size=2),
)
def test_predict_is_linear_in_weights(w1, w2, a, x):
    m1 = OperatorCostModel("op", 2, tuple(w1))
    m2 = OperatorCostModel("op", 2, tuple(w2))
    combo = OperatorCostModel("op", 2, tuple(a * u + v for u, v in zip(w1, w2)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        expected = a * predict(m1, x) + predict(m2, x)
    assert predict(combo, x) == pytest.approx(expected, abs=1e-9)
