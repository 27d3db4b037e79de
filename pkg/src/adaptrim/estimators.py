"""scikit-learn compatible estimators built on adaptive trimming.

Both estimators follow the ``fit``/``predict``/``transform`` conventions,
expose ``get_params``/``set_params`` through ``BaseEstimator``, and mark
rejected samples in ``inlier_mask_`` like ``sklearn.linear_model.RANSACRegressor``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .adapt import AdaptConfig, adapt_run
from .bounds import chi_bound
from .core import total_residual
from .solvers import LinearProblem, RegistrationProblem, RigidTransform

__all__ = ["AdaptiveTrimmingRegressor", "AdaptiveTrimmingRegistration"]


def _config(est) -> AdaptConfig:
    return AdaptConfig(
        delta=est.delta,
        g_step=est.g_step,
        gamma=est.gamma,
        t_conv=est.t_conv,
        max_solver_calls=est.max_solver_calls,
    )


def _finish(est, problem, result):
    m = problem.measurement_count
    mask = np.ones(m, dtype=bool)
    mask[list(result.outliers)] = False
    est.inlier_mask_ = mask
    est.outliers_ = result.outliers
    est.n_solver_calls_ = result.solver_calls
    est.n_iter_ = result.iterations
    est.termination_reason_ = result.termination_reason
    est.chi_ = chi_bound(total_residual(problem, ()), total_residual(problem, result.outliers))


class AdaptiveTrimmingRegressor(RegressorMixin, BaseEstimator):
    """Linear least squares with outliers removed by adaptive trimming.

    Parameters
    ----------
    delta : float
        Convergence threshold on the change of the retained squared residual.
    g_step : int
        Extra rejections allowed per iteration.
    gamma : float
        Discount applied to the outlier threshold when nothing changes.
    t_conv : int
        Consecutive small changes required to stop.
    fit_intercept : bool
        Append a constant column to ``X``.
    max_solver_calls : int or None
        Safety cap on distinct least-squares solves.
    """

    def __init__(self, delta=1e-2, g_step=1, gamma=0.99, t_conv=2,
                 fit_intercept=True, max_solver_calls=None):
        self.delta = delta
        self.g_step = g_step
        self.gamma = gamma
        self.t_conv = t_conv
        self.fit_intercept = fit_intercept
        self.max_solver_calls = max_solver_calls

    def _design(self, X):
        if self.fit_intercept:
            return np.column_stack([X, np.ones(X.shape[0])])
        return X

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        problem = LinearProblem(self._design(X), y)
        result = adapt_run(problem, _config(self))
        coef = np.asarray(result.estimate, dtype=float)
        if self.fit_intercept:
            self.coef_, self.intercept_ = coef[:-1], float(coef[-1])
        else:
            self.coef_, self.intercept_ = coef, 0.0
        _finish(self, problem, result)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_ + self.intercept_


class AdaptiveTrimmingRegistration(TransformerMixin, BaseEstimator):
    """Rigid 3D registration of index-aligned correspondences.

    ``fit(X, y)`` takes source points ``X`` and their putative matches
    ``y``, both ``(n, 3)``. ``transform`` maps points through the estimated
    rotation and translation; ``predict`` is an alias.
    """

    def __init__(self, delta=1e-4, g_step=10, gamma=0.99, t_conv=2, max_solver_calls=None):
        self.delta = delta
        self.g_step = g_step
        self.gamma = gamma
        self.t_conv = t_conv
        self.max_solver_calls = max_solver_calls

    def fit(self, X, y):
        X = check_array(X)
        y = check_array(y)
        if X.shape[1] != 3 or y.shape != X.shape:
            raise ValueError(f"expected two (n, 3) arrays, got {X.shape} and {y.shape}")
        self.n_features_in_ = 3
        problem = RegistrationProblem(X, y)
        result = adapt_run(problem, _config(self))
        tf: RigidTransform = result.estimate
        self.rotation_ = tf.rotation
        self.translation_ = tf.translation
        _finish(self, problem, result)
        return self

    def transform(self, X):
        check_is_fitted(self, "rotation_")
        X = check_array(X)
        if X.shape[1] != 3:
            raise ValueError("points must have 3 coordinates")
        return X @ self.rotation_.T + self.translation_

    predict = transform
