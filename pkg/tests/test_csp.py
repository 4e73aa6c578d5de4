import numpy as np
import pytest

from gazeeg.csp import LOG_VARIANCE_FLOOR, csp_fit, csp_transform
from gazeeg.errors import OneClassOnly


def _epochs(rng, n_per_class, n_channels=6, n_samples=200, boost=None):
    epochs, labels = [], []
    for label in ('target', 'nontarget'):
        for _ in range(n_per_class):
            data = rng.standard_normal((n_channels, n_samples))
            if boost is not None and label == 'target':
                data[boost] *= 2.0
            epochs.append(data)
            labels.append(label)
    return epochs, labels


def test_one_class_only():
    rng = np.random.default_rng(0)
    epochs = [rng.standard_normal((4, 50)) for _ in range(5)]
    with pytest.raises(OneClassOnly):
        csp_fit(epochs, ['target'] * 5, n_components=2)


def test_identical_classes_give_balanced_eigenvalues():
    epochs, labels = _epochs(np.random.default_rng(1), 40)
    model = csp_fit(epochs, labels, n_components=6)
    assert np.all((model.eigenvalues >= 0.45) & (model.eigenvalues <= 0.55))


def test_top_filter_finds_the_discriminative_channel():
    epochs, labels = _epochs(np.random.default_rng(2), 40, boost=2)
    model = csp_fit(epochs, labels, n_components=3)
    top = model.filters[0]
    assert np.argmax(np.abs(top)) == 2
    assert top[2] > 0
    assert model.eigenvalues[0] > 0.65


def test_largest_coefficient_is_positive():
    epochs, labels = _epochs(np.random.default_rng(3), 20, boost=0)
    model = csp_fit(epochs, labels, n_components=6)
    rows = np.arange(model.n_components)
    assert np.all(model.filters[rows, np.argmax(np.abs(model.filters), axis=1)] > 0)


def test_epoch_order_does_not_matter():
    epochs, labels = _epochs(np.random.default_rng(4), 30, boost=1)
    order = np.random.default_rng(5).permutation(len(epochs))
    first = csp_fit(epochs, labels, n_components=1)
    second = csp_fit([epochs[i] for i in order], [labels[i] for i in order], n_components=1)
    np.testing.assert_allclose(first.filters, second.filters, atol=1e-8)
    np.testing.assert_allclose(first.eigenvalues, second.eigenvalues, atol=1e-10)


def test_epoch_scaling_does_not_matter():
    epochs, labels = _epochs(np.random.default_rng(9), 30, boost=1)
    first = csp_fit(epochs, labels, n_components=2)
    second = csp_fit([1000.0 * epoch for epoch in epochs], labels, n_components=2)
    np.testing.assert_allclose(first.filters, second.filters, atol=1e-9)
    np.testing.assert_allclose(first.eigenvalues, second.eigenvalues, atol=1e-9)
    factors = np.random.default_rng(10).uniform(0.01, 100.0, size=len(epochs))
    third = csp_fit([factor * epoch for factor, epoch in zip(factors, epochs)], labels, n_components=2)
    np.testing.assert_allclose(first.filters, third.filters, atol=1e-8)


def test_labels_may_be_signed():
    epochs, labels = _epochs(np.random.default_rng(6), 20, boost=2)
    named = csp_fit(epochs, labels, n_components=2)
    signed = csp_fit(epochs, [1 if label == 'target' else -1 for label in labels], n_components=2)
    np.testing.assert_allclose(named.filters, signed.filters)


def test_too_many_components():
    epochs, labels = _epochs(np.random.default_rng(7), 5, n_channels=3)
    with pytest.raises(ValueError):
        csp_fit(epochs, labels, n_components=4)


def test_transform_is_log_variance():
    epochs, labels = _epochs(np.random.default_rng(8), 20, boost=2)
    model = csp_fit(epochs, labels, n_components=2)
    values = csp_transform(model, epochs[0])
    np.testing.assert_allclose(values, np.log((model.filters @ epochs[0]).var(axis=1)))
    flat = csp_transform(model, np.zeros((6, 200)))
    np.testing.assert_allclose(flat, np.log(LOG_VARIANCE_FLOOR))
