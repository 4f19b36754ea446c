"""Influence functions for logistic-regression coefficients.

When the quantity of interest is a regression coefficient rather than a
mean, the unit-level influence values play the role of the outcome:
their within-stratum standard deviations feed straight into the
allocation formulas. The construction here is the standard sandwich
piece for a binomial GLM: fit by maximum likelihood, form the averaged
information matrix XᵀWX/n with W = diag(p(1-p)), and score each unit as
Î⁻¹ x_i (y_i - p_i).

Overdispersion scales a quasi-likelihood fit's standard errors but not
its coefficients, fitted values, or residuals, so a plain binomial fit
gives the same influence values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import expit

from .errors import (
    DataError,
    FitDiverged,
    MissingValues,
    ShapeMismatch,
    SingularInformation,
)

__all__ = ["LogisticFit", "fit_logistic", "fisher_information", "influence_functions"]

_MAX_ITER = 50
_TOL = 1e-10
_SEPARATION_EPS = 1e-8


@dataclass(frozen=True)
class LogisticFit:
    """Converged logistic fit: coefficients, fitted probabilities, residuals."""

    coefficients: pd.Series
    fitted: np.ndarray
    residuals: np.ndarray
    iterations: int


def _as_matrix(X) -> tuple[np.ndarray, list[str]]:
    if isinstance(X, pd.DataFrame):
        names = [str(c) for c in X.columns]
        arr = X.to_numpy(dtype=float)
    else:
        arr = np.asarray(X, dtype=float)
        if arr.ndim != 2:
            raise ShapeMismatch(f"model matrix must be 2-dimensional, got shape {arr.shape}")
        names = [f"x{j}" for j in range(arr.shape[1])]
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise ShapeMismatch(f"model matrix must have at least one column, got shape {arr.shape}")
    if np.isnan(arr).any():
        raise MissingValues("model matrix contains missing values")
    if not np.isfinite(arr).all():
        raise DataError("model matrix contains non-finite values")
    return arr, names


def fit_logistic(X, y) -> LogisticFit:
    """Maximum-likelihood logistic regression by iteratively reweighted
    least squares.

    Stops when no coefficient moves by more than 1e-10, or after 50
    iterations. A constant outcome, a rank-deficient matrix, or data the
    model separates perfectly has no finite optimum and raises FitDiverged.
    """
    arr, names = _as_matrix(X)
    yvec = np.asarray(y, dtype=float).ravel()
    if yvec.shape[0] != arr.shape[0]:
        raise ShapeMismatch(
            f"y has {yvec.shape[0]} entries but the model matrix has {arr.shape[0]} rows"
        )
    if np.isnan(yvec).any():
        raise MissingValues("outcome contains missing values")
    if not np.isin(yvec, (0.0, 1.0)).all():
        raise DataError("outcome must be coded 0/1")
    if yvec.min() == yvec.max():
        raise FitDiverged("outcome is constant; the likelihood has no maximum")

    beta = np.zeros(arr.shape[1])
    for iteration in range(1, _MAX_ITER + 1):
        eta = arr @ beta
        p = expit(eta)
        w = p * (1.0 - p)
        hessian = arr.T @ (arr * w[:, None])
        score = arr.T @ (yvec - p)
        try:
            step = np.linalg.solve(hessian, score)
        except np.linalg.LinAlgError:
            raise FitDiverged(
                "weighted least-squares system is singular; the model matrix is "
                "rank-deficient or the fit has separated"
            ) from None
        beta = beta + step
        if _separated(arr @ beta, yvec):
            raise FitDiverged("data are perfectly separated; coefficients diverge")
        if np.max(np.abs(step)) < _TOL:
            break
    eta = arr @ beta
    p = expit(eta)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        # quasi-complete separation: part of the data pins the fit while
        # some coefficient still runs away, so probabilities saturate in
        # floating point without _separated ever firing
        raise FitDiverged("fitted probabilities saturated at 0 or 1; coefficients diverge")
    return LogisticFit(
        coefficients=pd.Series(beta, index=names),
        fitted=p,
        residuals=yvec - p,
        iterations=iteration,
    )


def _separated(eta: np.ndarray, y: np.ndarray) -> bool:
    p = expit(eta)
    return bool(
        np.all(p[y == 1.0] > 1.0 - _SEPARATION_EPS)
        and np.all(p[y == 0.0] < _SEPARATION_EPS)
    )


def fisher_information(X, fitted) -> np.ndarray:
    """Averaged information matrix XᵀWX/n with W = diag(p(1-p))."""
    arr, _ = _as_matrix(X)
    p = np.asarray(fitted, dtype=float).ravel()
    if p.shape[0] != arr.shape[0]:
        raise ShapeMismatch(
            f"fitted has {p.shape[0]} entries but the model matrix has {arr.shape[0]} rows"
        )
    if np.isnan(p).any() or (p <= 0).any() or (p >= 1).any():
        raise DataError("fitted probabilities must lie strictly between 0 and 1")
    w = p * (1.0 - p)
    info = arr.T @ (arr * w[:, None]) / arr.shape[0]
    try:
        cho_factor(info)
    except (LinAlgError, np.linalg.LinAlgError):
        raise SingularInformation("information matrix is singular") from None
    return info


def influence_functions(X, residuals, information) -> pd.DataFrame:
    """Per-unit influence values, one column per coefficient.

    Row i is Î⁻¹ x_i r_i; the column for the coefficient of interest is
    what allocation should treat as the outcome variable.
    """
    arr, names = _as_matrix(X)
    r = np.asarray(residuals, dtype=float).ravel()
    if r.shape[0] != arr.shape[0]:
        raise ShapeMismatch(
            f"residuals has {r.shape[0]} entries but the model matrix has {arr.shape[0]} rows"
        )
    info = np.asarray(information, dtype=float)
    if info.shape != (arr.shape[1], arr.shape[1]):
        raise ShapeMismatch(
            f"information matrix has shape {info.shape}; expected "
            f"({arr.shape[1]}, {arr.shape[1]})"
        )
    try:
        factor = cho_factor(info)
    except (LinAlgError, np.linalg.LinAlgError):
        raise SingularInformation("information matrix is singular") from None
    scores = arr * r[:, None]
    values = cho_solve(factor, scores.T).T
    return pd.DataFrame(values, columns=names)
