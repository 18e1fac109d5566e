import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfs_gzsl.classifier import (
    EvalReport,
    LinearClassifier,
    OracleClassifier,
    evaluate_aligned,
    evaluate_gzsl,
    harmonic_mean,
    per_class_accuracy,
    per_class_accuracy_from_predictions,
    read_report,
    train_linear_classifier,
)
from dfs_gzsl.errors import DataError
from dfs_gzsl.nn import MlpNet, RngStream
from dfs_gzsl.synthesis import SynthesizedSet


def blobs(seed=0, n=100, d=8, margin=5.0):
    """Unit-variance blobs whose means sit ``margin`` sigma either side of
    the hyperplane x0 = 0."""
    r = np.random.default_rng(seed)
    x0 = r.normal(size=(n, d))
    x1 = r.normal(size=(n, d))
    x0[:, 0] -= margin
    x1[:, 0] += margin
    return SynthesizedSet(np.vstack([x0, x1]), [0] * n + [1] * n, [0] * (2 * n))


def test_zero_epochs_returns_initialisation():
    a = train_linear_classifier(blobs(), epochs=0, seed=4)
    b = train_linear_classifier(blobs(), epochs=0, seed=4)
    assert a.net.fingerprint() == b.net.fingerprint()


def test_separable_blobs_fit_perfectly():
    data = blobs(margin=5.0)
    assert data.features[:100, 0].max() < 0 < data.features[100:, 0].min()
    clf = train_linear_classifier(data, epochs=200, seed=1)
    assert np.mean(clf.predict(data.features) == data.labels) == 1.0


def test_classifier_deterministic():
    a = train_linear_classifier(blobs(), epochs=5, seed=2)
    b = train_linear_classifier(blobs(), epochs=5, seed=2)
    assert a.net.fingerprint() == b.net.fingerprint()


def test_classifier_needs_two_classes():
    with pytest.raises(DataError):
        train_linear_classifier(SynthesizedSet(np.zeros((3, 2)), [1, 1, 1], [0, 0, 0]))


def test_argmax_ties_go_to_lowest_id():
    clf = LinearClassifier(MlpNet.zeros([2, 3]), [4, 7, 9])
    assert clf.predict(np.ones((2, 2))).tolist() == [4, 4]
    assert clf.weight.shape == (3, 2)


def test_per_class_examples():
    labels = np.array([0, 0, 1, 1, 1, 1])
    pred = np.array([0, 1, 1, 1, 1, 1])
    mean, per = per_class_accuracy_from_predictions(pred, labels, [0, 1])
    assert per == {0: 0.5, 1: 1.0} and mean == 0.75
    const = np.full(6, 1)
    assert per_class_accuracy_from_predictions(const, labels, [0, 1])[1] == {0: 0.0, 1: 1.0}
    oracle = OracleClassifier(np.arange(6.0)[:, None], labels)
    assert per_class_accuracy(oracle, np.arange(6.0)[:, None], labels, [0, 1])[0] == 1.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=8, max_size=30), st.integers(0, 1000), st.integers(2, 5))
def test_per_class_mean_invariant_to_duplication(labels, seed, k):
    labels = np.array(labels)
    pred = np.random.default_rng(seed).integers(0, 4, labels.size)
    classes = sorted(set(labels.tolist()))
    base, _ = per_class_accuracy_from_predictions(pred, labels, classes)
    c = classes[0]
    mask = labels == c
    labels2 = np.concatenate([labels] + [labels[mask]] * (k - 1))
    pred2 = np.concatenate([pred] + [pred[mask]] * (k - 1))
    dup, _ = per_class_accuracy_from_predictions(pred2, labels2, classes)
    assert abs(dup - base) <= 1e-12


def test_harmonic_mean_hand_value():
    # 2 * 0.75 * 0.558 / 1.308; the tabulated 0.639 comes from unrounded inputs
    assert harmonic_mean(0.750, 0.558) == pytest.approx(0.837 / 1.308, abs=1e-12)
    assert harmonic_mean(0.750, 0.558) == pytest.approx(0.639, abs=1e-3)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_harmonic_mean_properties(a, b):
    h = harmonic_mean(a, b)
    assert h == pytest.approx(harmonic_mean(b, a), abs=1e-15)
    assert min(a, b) - 1e-15 <= h <= max(a, b) + 1e-15
    assert harmonic_mean(a, a) == pytest.approx(a, abs=1e-15)
    assert harmonic_mean(a, 0.0) == 0.0


@pytest.mark.parametrize("bad", [(-0.1, 0.5), (0.5, 1.2), (float("nan"), 0.5)])
def test_harmonic_mean_range(bad):
    with pytest.raises(ValueError):
        harmonic_mean(*bad)


def _fixture_set():
    feats = np.arange(12.0).reshape(6, 2)
    labels = np.array([0, 0, 1, 1, 2, 2])
    return feats, labels


def test_oracle_evaluation_is_perfect():
    feats, labels = _fixture_set()
    r = evaluate_aligned(OracleClassifier(feats, labels), feats, labels, (0, 1), (2,))
    assert r.acc_s == r.acc_u == r.acc_h == 1.0


def test_seen_only_predictor_zero_harmonic():
    feats, labels = _fixture_set()
    clf = LinearClassifier(MlpNet.zeros([2, 3], output_bias=[1.0, 0.0, 0.0]), [0, 1, 2])
    r = evaluate_aligned(clf, feats, labels, (0, 1), (2,))
    assert r.acc_u == 0.0 and r.acc_h == 0.0


def test_unknown_test_labels_rejected():
    feats, labels = _fixture_set()
    clf = LinearClassifier(MlpNet.zeros([2, 2]), [0, 1])
    with pytest.raises(DataError):
        evaluate_aligned(clf, feats, labels, (0, 1), (2,))


def test_evaluate_gzsl_is_pure(small_models, small_dataset):
    afg, _ = small_models
    ids = small_dataset.seen_classes + small_dataset.unseen_classes
    clf = LinearClassifier(MlpNet([afg.aligned_dim, len(ids)], RngStream(0)), sorted(ids))
    test = small_dataset.test_indices()
    args = (clf, afg, small_dataset.visual_rows(test), small_dataset.labels[test],
            small_dataset.seen_classes, small_dataset.unseen_classes)
    a, b = evaluate_gzsl(*args), evaluate_gzsl(*args)
    assert a.to_text() == b.to_text() and a.to_csv() == b.to_csv()
    assert a.acc_h == pytest.approx(harmonic_mean(a.acc_s, a.acc_u))


def test_report_files(tmp_path):
    r = EvalReport(0.75, 0.5, harmonic_mean(0.75, 0.5), {0: 0.75, 1: 0.5}, {0: 4, 1: 2}, (0,), (1,),
                   {1: 2.5}, "abc")
    txt, csv = r.write(tmp_path, prefix="x_")
    parsed = read_report(txt)
    assert float(parsed["acc_h"]) == r.acc_h and parsed["config_fingerprint"] == "abc"
    assert csv.read_text().splitlines() == ["class_id,group,accuracy,num_samples,diversity",
                                            "0,seen,0.75,4,", "1,unseen,0.5,2,2.5"]
