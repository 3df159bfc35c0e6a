"""Layered recognizer mechanics on small hand-built stacks."""

import numpy as np
import pytest

from mixtrack.dhmm import (
    FEATURE_ARGMAX,
    FEATURE_LOGLIK,
    FEATURE_POSTERIOR,
    TOP_CUMULATIVE,
    DhmmLayer,
    DhmmStack,
    dhmm_meta_features,
    dhmm_propagate,
    dhmm_recognize,
    intermediate_features,
)
from mixtrack.errors import WindowTooLong
from mixtrack.hmm import GaussianHmm, hmm_forward_loglik


def _gauss_hmm(mean, var=1.0):
    return GaussianHmm([1.0], [[1.0]], [[mean]], [[var]])


def _layer(means, window):
    return DhmmLayer(models=[_gauss_hmm(m) for m in means], window=window)


def test_layer_and_stack_validation():
    with pytest.raises(ValueError):
        DhmmLayer(models=[], window=3)
    with pytest.raises(ValueError):
        DhmmLayer(models=[_gauss_hmm(0.0)], window=1)
    with pytest.raises(ValueError):
        DhmmStack(layers=[], class_labels=[])
    with pytest.raises(ValueError):
        DhmmStack(layers=[_layer([0.0, 1.0], 2)], class_labels=["a"])


def test_latency_sums_layer_windows():
    stack = DhmmStack(
        layers=[_layer([0.0, 1.0], 4), _layer([0.0, 1.0], 5)],
        class_labels=["a", "b"],
    )
    assert stack.latency == 9


def test_meta_features_shape_and_values():
    layer = _layer([0.0, 5.0], 3)
    seq = np.zeros((10, 1))
    feats = dhmm_meta_features(layer, seq)
    assert feats.shape == (7, 2)
    # per-frame normalized window loglik of the matching class
    want = hmm_forward_loglik(layer.models[0], seq[:3]) / 3.0
    np.testing.assert_allclose(feats[:, 0], want, atol=1e-10)
    assert np.all(feats[:, 0] > feats[:, 1])


def test_meta_features_sequence_too_short():
    layer = _layer([0.0, 1.0], 5)
    with pytest.raises(WindowTooLong):
        dhmm_meta_features(layer, np.zeros((5, 1)))


def test_intermediate_feature_modes():
    feats = np.array([[0.0, -2.0], [-3.0, -1.0]])
    assert intermediate_features(feats, FEATURE_LOGLIK, 2) is feats
    hard = intermediate_features(feats, FEATURE_ARGMAX, 2)
    np.testing.assert_array_equal(hard, [[1.0, 0.0], [0.0, 1.0]])
    soft = intermediate_features(feats, FEATURE_POSTERIOR, 2)
    np.testing.assert_allclose(soft.sum(axis=1), 1.0, atol=1e-12)
    assert soft[0, 0] > soft[0, 1]
    with pytest.raises(ValueError):
        intermediate_features(feats, "soft", 2)


def test_posterior_scale_sharpens():
    feats = np.array([[0.0, -1.0]])
    mild = intermediate_features(feats, FEATURE_POSTERIOR, 2, scale=1.0)
    sharp = intermediate_features(feats, FEATURE_POSTERIOR, 2, scale=3.0)
    assert sharp[0, 0] > mild[0, 0]


def test_recognize_first_frame_uniform():
    stack = DhmmStack(
        layers=[_layer([0.0, 4.0], 2), _layer([-3.0, 0.0, 3.0], 3)],
        class_labels=["a", "b", "c"],
        feature_mode=FEATURE_POSTERIOR,
    )
    rng = np.random.default_rng(0)
    probs = dhmm_recognize(stack, rng.normal(size=(20, 1)))
    assert probs.shape == (20 - stack.latency, 3)
    np.testing.assert_allclose(probs[0], 1.0 / 3.0, atol=1e-12)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_recognize_moves_toward_matching_class():
    # single layer whose two classes are well separated; observations from
    # class 1 should dominate shortly after the calibration frame
    stack = DhmmStack(
        layers=[_layer([0.0, 6.0], 3)],
        class_labels=["lo", "hi"],
    )
    seq = np.concatenate([np.zeros((6, 1)), np.full((14, 1), 6.0)])
    probs = dhmm_recognize(stack, seq)
    assert probs[-1, 1] > 0.99


def test_propagate_shift_invariance_of_posteriors():
    # shifting all emissions and all model means by the same constant
    # leaves every layer's likelihood differences, hence the output, alone
    layers = [_layer([0.0, 2.0], 3)]
    stack = DhmmStack(layers=layers, class_labels=["a", "b"])
    shifted = DhmmStack(
        layers=[_layer([10.0, 12.0], 3)], class_labels=["a", "b"]
    )
    rng = np.random.default_rng(1)
    seq = rng.normal(size=(15, 1))
    np.testing.assert_allclose(
        dhmm_recognize(stack, seq),
        dhmm_recognize(shifted, seq + 10.0),
        atol=1e-9,
    )


def test_cumulative_top_mode_accumulates_evidence():
    stack = DhmmStack(
        layers=[_layer([0.0, 3.0], 3)],
        class_labels=["a", "b"],
        top_mode=TOP_CUMULATIVE,
    )
    seq = np.zeros((30, 1))
    feats = dhmm_propagate(stack, seq)
    assert feats.shape == (27, 2)
    # class a's margin over class b grows with the prefix length
    margins = feats[:, 0] - feats[:, 1]
    assert margins[-1] > margins[0]
    probs = dhmm_recognize(stack, seq)
    assert probs[-1, 0] > 0.99


def test_clock_column_appended_between_layers():
    base = DhmmStack(
        layers=[_layer([0.0, 2.0], 3), _layer([0.0, 1.0], 3)],
        class_labels=["a", "b"],
        feature_mode=FEATURE_POSTERIOR,
    )
    clocked = DhmmStack(
        layers=[
            _layer([0.0, 2.0], 3),
            DhmmLayer(
                models=[
                    GaussianHmm([1.0], [[1.0]], [[0.0, 0.0, 0.0]], [[1.0, 1.0, 1.0]]),
                    GaussianHmm([1.0], [[1.0]], [[1.0, 1.0, 1.0]], [[1.0, 1.0, 1.0]]),
                ],
                window=3,
            ),
        ],
        class_labels=["a", "b"],
        feature_mode=FEATURE_POSTERIOR,
        clock_dt=0.1,
    )
    rng = np.random.default_rng(2)
    seq = rng.normal(size=(14, 1))
    # the un-clocked stack feeds 2-d posteriors to layer 2; the clocked one
    # must feed 3-d frames, which only type-checks if the clock is appended
    base_out = dhmm_propagate(base, seq)
    clocked_out = dhmm_propagate(clocked, seq)
    assert base_out.shape == clocked_out.shape
