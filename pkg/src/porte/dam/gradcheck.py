"""Central finite-difference gradient checking."""

from dataclasses import dataclass

import numpy as np

from ..exceptions import EvaluationError

DENOM_FLOOR = 1e-8


@dataclass(frozen=True)
class GradcheckReport:
    max_rel_error: float
    passed: bool
    worst_index: int
    n_coords: int


def numeric_gradient(f, x, eps=1e-5):
    """Central differences of scalar ``f`` at ``x`` (any shape), one coordinate at a time."""
    if not 0.0 < eps <= 1e-2:
        raise ValueError("eps must lie in (0, 1e-2]")
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    grad = np.empty(flat.size)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = f(x)
        flat[i] = orig - eps
        f_minus = f(x)
        flat[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise EvaluationError(f"non-finite function value at coordinate {i}")
        grad[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad.reshape(x.shape)


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), DENOM_FLOOR)
    return np.abs(analytic - numeric) / denom


def gradcheck(fn, point, eps=1e-5, tol=1e-4, value_fn=None):
    """Compare the analytic gradient returned by ``fn`` with central differences.

    ``fn(x)`` must return ``(value, gradient)`` with ``gradient`` shaped like
    ``x``. ``value_fn``, if given, is a cheaper value-only version of ``fn``
    used for the finite differences.
    """
    point = np.array(point, dtype=np.float64)
    value, analytic = fn(point)
    if not np.isfinite(value) or not np.all(np.isfinite(analytic)):
        raise EvaluationError("non-finite value or gradient at the check point")
    if np.shape(analytic) != point.shape:
        raise ValueError(f"gradient shape {np.shape(analytic)} != point shape {point.shape}")
    numeric = numeric_gradient(value_fn or (lambda x: fn(x)[0]), point, eps)
    err = relative_error(analytic, numeric)
    worst = int(np.argmax(err)) if err.size else -1
    max_err = float(err[worst]) if err.size else 0.0
    return GradcheckReport(max_err, bool(max_err <= tol), worst, int(err.size))
