import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from attacal.calibrators import (
    MATTA,
    VATTA,
    HistogramBinning,
    IsotonicCalibration,
    TemperatureScaling,
    probs_to_logits,
    stack_inputs,
    unstack_inputs,
)
from attacal.core import InvalidInputError, softmax
from attacal.synth import SynthSpec, generate


@pytest.fixture(scope="module")
def synth_data():
    return generate(SynthSpec(n=600, k=5, temperature=0.5, seed=11))[0]


def test_get_params_and_clone():
    est = MATTA(epochs=3, seed=7)
    assert est.get_params()["epochs"] == 3
    twin = clone(est)
    assert twin.get_params() == est.get_params() and twin is not est
    assert TemperatureScaling(inputs="probs").get_params() == {"inputs": "probs"}
    assert HistogramBinning().get_params() == {"n_bins": 15}


@pytest.mark.parametrize("cls", [MATTA, VATTA])
def test_atta_with_dataset_and_stacked(synth_data, cls):
    est = cls(epochs=4, batch_size=200).fit(synth_data)
    P = est.predict_proba(synth_data)
    X = stack_inputs(synth_data.p0, synth_data.z)
    np.testing.assert_array_equal(est.predict_proba(X), P)
    np.testing.assert_array_equal(est.predict(X), np.argmax(synth_data.p0, 1))
    assert len(est.loss_history_) == 4
    again = cls(epochs=4, batch_size=200).fit(X, synth_data.labels)
    assert again.loss_history_ == est.loss_history_


def test_atta_needs_labels_for_arrays(synth_data):
    with pytest.raises(InvalidInputError):
        MATTA(epochs=1).fit(stack_inputs(synth_data.p0, synth_data.z))


def test_unstack_shape_check():
    with pytest.raises(InvalidInputError):
        unstack_inputs(np.ones((4, 1, 3)) / 3)


def test_not_fitted():
    for est in (MATTA(), TemperatureScaling(), IsotonicCalibration(), HistogramBinning()):
        with pytest.raises(NotFittedError):
            est.predict_proba(np.full((2, 2), 0.5))


def test_temperature_on_logits_and_probs(synth_data):
    logits = probs_to_logits(synth_data.p0)
    a = TemperatureScaling().fit(logits, synth_data.labels)
    b = TemperatureScaling(inputs="probs").fit(synth_data.p0, synth_data.labels)
    assert a.temperature_ == b.temperature_
    np.testing.assert_allclose(a.predict_proba(logits), b.predict_proba(synth_data.p0))
    np.testing.assert_array_equal(a.predict(logits), np.argmax(logits, 1))


def test_probs_to_logits_reproduces_probs(rng):
    P = softmax(rng.standard_normal((10, 4)), axis=1)
    P[0] = [1.0, 0.0, 0.0, 0.0]
    np.testing.assert_allclose(softmax(probs_to_logits(P), axis=1), P, atol=1e-15)


@pytest.mark.parametrize("cls", [HistogramBinning, IsotonicCalibration])
def test_binning_estimators(synth_data, cls):
    est = cls().fit(synth_data.p0, synth_data.labels)
    np.testing.assert_array_equal(est.predict(synth_data.p0), np.argmax(synth_data.p0, 1))
    assert np.allclose(est.predict_proba(synth_data.p0).sum(1), 1)
