import numpy as np
import pytest

import mwi


def test_synthetic_dataset_round_trip(tmp_path):
    ds = mwi.generate_synthetic(dim=16, num_labels=4, examples_per_label=5, seed=3)
    assert len(ds) == 20
    assert ds.dim == 16
    norms = np.linalg.norm(ds.embeddings(), axis=1)
    assert np.allclose(norms, 1.0, atol=1e-6)
    path = tmp_path / "d.mwie"
    mwi.save_dataset(ds, str(path))
    assert mwi.load_dataset(str(path)) == ds
    assert mwi.validate(ds) == []


def test_imprint_scores_and_training():
    a = np.array([[1.0, 0.0], [1.0, 0.2]])
    b = np.array([[0.0, 1.0]])
    clf = mwi.Classifier.imprint([("a", a), ("b", b)])
    assert clf.class_names == ["a", "b"]
    w = clf.weights
    assert np.allclose(np.linalg.norm(w, axis=0), 1.0)
    mean = a.mean(axis=0)
    assert np.allclose(w[:, 0], mean / np.linalg.norm(mean), atol=1e-12)
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    pred = clf.predict(x)
    assert pred[0, 0] == 1 and pred[1, 1] == 1
    trace = clf.train(x, np.eye(2), epochs=5)
    assert len(trace) == 5 and trace[-1] <= trace[0]


def test_metrics_and_errors():
    truth = np.array([[1, 0], [0, 1]], dtype=np.uint8)
    scores = np.array([[0.9, 0.2], [0.4, 0.6]])
    pred = (scores >= 0.5).astype(np.uint8)
    report = mwi.compute_metrics(truth, scores, pred, "single-softmax")
    assert report["overall_f1"] == 1.0
    assert report["jaccard"] is None
    t, f1 = mwi.best_threshold(truth, scores)
    assert f1 == 1.0 and 0 < t < 1
    with pytest.raises(mwi.DataError):
        mwi.compute_metrics(truth, scores[:, :1], pred)
    with pytest.raises(mwi.ConfigError):
        mwi.Classifier(4, threshold=1.5)


def test_fewshot_and_continual_runs():
    ds = mwi.generate_synthetic(dim=128, num_labels=10, examples_per_label=20, seed=1)
    out = mwi.run_fewshot(ds, episodes=5, seed=2)
    assert out["mode"] == "single-sigmoid"
    assert out["mean"]["overall_f1"] >= 0.9
    assert len(out["per_episode"]) == 5
    steps = mwi.run_continual(ds, episodes=3, epochs=10, seed=2)
    assert [s["n_visible"] for s in steps] == [1, 2, 3, 4, 5]
    with pytest.raises(mwi.DataError):
        mwi.run_fewshot(ds, ways=30)
