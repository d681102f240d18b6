import numpy as np
import pytest
from sklearn.base import clone

from contactdays.estimators import ContactDayCounter, PositionalConsensus, ScheduleExtractor, StabilityClassifier
from contactdays.schedule import Window, ground_truth
from contactdays.synth import SuiteConfig, generate_suite, write_suite

from conftest import make_arm, make_run


@pytest.fixture(scope="module")
def suite():
    return generate_suite(SuiteConfig(seed=42))


def test_counter(suite):
    est = ContactDayCounter().fit(suite)
    X = est.transform(suite)
    assert X.shape == (40, 6) and X.dtype.kind == "i"
    sid, arm = est.arm_index_[3]
    truth = ground_truth(next(s for s in suite if s.schedule_id == sid))[arm]
    assert X[3, -1] == truth.counts[Window.M12]
    assert list(est.get_feature_names_out()) == ["screening", "m1", "m3", "m6", "m9", "m12"]


def test_counter_subset_windows(suite):
    X = ContactDayCounter(windows=["m12"]).fit_transform(suite)
    assert X.shape == (40, 1)


def test_counter_rejects_wrong_input():
    with pytest.raises(TypeError):
        ContactDayCounter().fit([1, 2])


def test_stability_classifier():
    X = np.array([[10, 10, 10], [10, 11, 13], [30, 30, 90]])
    clf = StabilityClassifier().fit(X)
    assert list(clf.predict(X)) == ["perfect", "acceptable", "high_variance"]
    np.testing.assert_array_equal(clf.decision_function(X), [0, 3, 60])
    with pytest.raises(ValueError):
        clf.predict(np.ones((2, 4)))
    with pytest.raises(ValueError):
        StabilityClassifier().fit(np.ones((3, 1)))


def test_unfitted_raises():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        StabilityClassifier().predict([[1, 2, 3]])


def test_positional_consensus():
    runs = [make_run("P", k, [make_arm("a", "control", 10 + k)]) for k in range(3)]
    est = PositionalConsensus().fit(runs)
    out = est.transform(None)
    assert out.shape == (1, 6) and out[0, -1] == 11
    np.testing.assert_array_equal(est.transform(runs[:2]), [[0, 0, 0, 10.5, 0, 10.5]])
    np.testing.assert_array_equal(PositionalConsensus().fit_transform(runs), out)
    assert est.slots_ == [("P", "control", 0)]
    with pytest.raises(ValueError):
        PositionalConsensus().fit(runs + runs)


@pytest.mark.parametrize(
    "est", [ContactDayCounter(windows=["m1"]), StabilityClassifier(acceptable_within=2), PositionalConsensus(close_within=5),
            ScheduleExtractor(noise=2, n_runs=3)]
)
def test_params_and_clone(est):
    params = est.get_params()
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    twin.set_params(**params)


def test_extractor_predict_and_score(suite, tmp_path):
    write_suite(suite[:3], tmp_path)
    docs = sorted(tmp_path.glob("*/schedule.html"))
    truths = [p.with_name("truth.json") for p in docs]
    est = ScheduleExtractor(n_runs=2).fit()
    results = est.predict(docs)
    assert len(results) == 6
    assert est.score(docs, truths) == 1.0
    noisy = ScheduleExtractor(backend_kind="perturbed", noise=30, seed=1).fit(y=suite)
    assert noisy.score(docs, truths) < 1.0
