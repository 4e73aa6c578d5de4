import numpy as np
import pytest
from sklearn.svm import SVC

from gazeeg.errors import OneClassOnly
from gazeeg.learn import grid
from gazeeg.svm import SvmSpec, kernel_matrix, resolve_gamma, solve_smo, svm_fit

POINTS = np.array([[0.1, 0.2], [0.4, 0.9], [0.8, 0.3], [0.9, 0.7]])
LABELS = np.array([-1.0, -1.0, 1.0, 1.0])


def _dual_objective(K, y, alpha):
    Q = np.outer(y, y) * K
    return 0.5 * alpha @ Q @ alpha - alpha.sum()


@pytest.mark.parametrize('spec', grid(), ids=lambda spec: spec.describe())
def test_matches_reference_solver(spec):
    model = svm_fit(POINTS, LABELS, spec, tol=1e-8)
    assert model.converged
    kwargs = {'kernel': spec.kernel, 'C': spec.C, 'tol': 1e-8}
    if spec.kernel != 'linear':
        kwargs.update(gamma=model.gamma, degree=spec.degree, coef0=spec.coef0)
    reference = SVC(**kwargs).fit(POINTS, LABELS)
    queries = np.random.default_rng(0).uniform(0.0, 1.0, size=(25, 2))
    np.testing.assert_allclose(model.decision_function(queries), reference.decision_function(queries), atol=1e-4)


def test_dual_solution_is_feasible_and_optimal():
    spec = SvmSpec('rbf', 1.0, 1.0)
    K = kernel_matrix(spec, 1.0, POINTS, POINTS)
    result = solve_smo(K, LABELS, 1.0, tol=1e-8)
    assert result.converged
    assert abs(LABELS @ result.alpha) < 1e-9
    assert np.all((result.alpha >= 0) & (result.alpha <= 1.0))
    rng = np.random.default_rng(1)
    best = _dual_objective(K, LABELS, result.alpha)
    for _ in range(200):
        step = rng.normal(scale=0.05, size=4)
        step -= LABELS * (LABELS @ step) / 4.0
        candidate = result.alpha + step
        if np.all((candidate >= 0) & (candidate <= 1.0)):
            assert _dual_objective(K, LABELS, candidate) >= best - 1e-9


def test_xor_needs_a_nonlinear_kernel():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([-1, -1, 1, 1])
    rbf = svm_fit(X, y, SvmSpec('rbf', 10.0, 1.0))
    np.testing.assert_array_equal(rbf.predict(X), y)
    linear = svm_fit(X, y, SvmSpec('linear', 10.0))
    assert np.mean(linear.predict(X) == y) < 1.0


def test_one_class_only():
    with pytest.raises(OneClassOnly):
        svm_fit(POINTS, np.ones(4), SvmSpec('linear', 1.0))


def test_gamma_resolution():
    X = np.array([[0.0, 2.0], [2.0, 0.0]])
    assert resolve_gamma('scale', X) == pytest.approx(1.0 / (2 * 1.0))
    assert resolve_gamma('auto', X) == pytest.approx(0.5)
    assert resolve_gamma(0.3, X) == 0.3
    assert resolve_gamma('scale', np.zeros((3, 2))) == 1.0
    assert SvmSpec('linear', 1.0).resolve_gamma(X) is None


def test_invalid_spec():
    with pytest.raises(ValueError):
        SvmSpec('sigmoid', 1.0)
    with pytest.raises(ValueError):
        SvmSpec('linear', 0.0)
