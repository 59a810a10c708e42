import numpy as np
import pytest

from vdecor.errors import ValidationError
from vdecor.kernel import CorrelationModel
from vdecor.pipeline import Pipeline, SpatialData, add_intercept, fit_pipeline
from vdecor.simgen import SimulationConfig, generate_scenario


def _data(seed=0, n=200):
    ds = generate_scenario(SimulationConfig(n=n, scenario=2, seed=seed))
    c, f, y = ds.train()
    return SpatialData(c, f, y), ds


def test_add_intercept():
    X = add_intercept(np.zeros((4, 2)))
    assert X.shape == (4, 3)
    assert (X[:, 0] == 1.0).all()


def test_spatial_data_validation():
    with pytest.raises(ValidationError):
        SpatialData(np.zeros((3, 2)), np.zeros((4, 2)), np.zeros(3))
    with pytest.raises(ValidationError):
        SpatialData(np.zeros((3, 2)), np.zeros((3, 2)), np.array([1.0, np.nan, 2.0]))


def test_fit_predict_roundtrip_artifact(tmp_path):
    data, ds = _data()
    model = CorrelationModel("exponential", range=0.236, nugget=0.25)
    pipe, report = fit_pipeline(data, model, {"kind": "lm"})
    assert report.training_rmse >= 0
    qc, qf, qy = ds.test()
    pred = pipe.predict(qc, qf)
    assert pred.shape == (len(qy),)
    # back-transformed predictions should beat predicting the mean
    assert np.sqrt(np.mean((pred - qy) ** 2)) < np.std(qy)

    path = tmp_path / "pipe.json"
    pipe.save(path)
    again = Pipeline.load(path)
    np.testing.assert_array_equal(again.predict(qc, qf), pred)


def test_predict_empty_and_mismatched_queries():
    data, _ = _data(seed=1, n=80)
    model = CorrelationModel("exponential", range=0.3, nugget=0.5)
    pipe, _ = fit_pipeline(data, model, {"kind": "knn", "k": 3})
    assert pipe.predict(np.empty((0, 2)), np.empty((0, data.features.shape[1]))).size == 0
    with pytest.raises(ValidationError):
        pipe.predict(np.zeros((2, 2)), np.zeros((2, 3)))


def test_pure_nugget_pipeline_equals_plain_learner():
    data, ds = _data(seed=2, n=150)
    model = CorrelationModel("exponential", range=0.3, nugget=1.0)
    pipe, _ = fit_pipeline(data, model, {"kind": "lm"})
    from vdecor.learners import LinearModel

    order = pipe.factors.order
    plain = LinearModel().fit(add_intercept(data.features)[order], data.response[order])
    qc, qf, _ = ds.test()
    np.testing.assert_array_equal(pipe.predict(qc, qf), plain.predict(add_intercept(qf)))


def test_zero_nugget_prediction_at_training_point_interpolates():
    data, _ = _data(seed=3, n=100)
    model = CorrelationModel("exponential", range=0.3, nugget=0.0)
    pipe, _ = fit_pipeline(data, model, {"kind": "lm"})
    i = 17
    pred = pipe.predict(data.coords[i], data.features[i][None, :])
    np.testing.assert_allclose(pred[0], data.response[i], atol=1e-6)


def test_artifact_rejects_bad_version(tmp_path):
    data, _ = _data(seed=4, n=60)
    model = CorrelationModel("exponential", range=0.3, nugget=0.25)
    pipe, _ = fit_pipeline(data, model, {"kind": "lm"})
    d = pipe.to_dict()
    d["version"] = 99
    with pytest.raises(ValidationError):
        Pipeline.from_dict(d)
