"""
Spectral radius estimation and rescaling of recurrent weight matrices.

The estimator is a power iteration. Each iteration looks at the current unit
vector ``x`` and its image ``y = W x``:

* if ``y`` is parallel to ``x`` (Rayleigh residual under tolerance) the
  dominant eigenvalue is real and ``|x . y|`` is the radius;
* otherwise the two-step recurrence ``W^2 x = a W x + b' x`` is fitted by
  least squares on the span of ``(x, W x)``; the roots of
  ``z^2 - a z - b'`` give the radius of a dominant complex (or +/- real)
  pair, e.g. for rotations.

Every test is relative to the current estimate, so the iterations run on
``c * W`` are those run on ``W``. When neither test passes within `max_iter`
iterations the estimate is reported as not converged and, by default,
ARPACK (for matrices of at least `ARNOLDI_MIN_DIM` rows) and then a dense
eigensolver take over.
"""
import logging
import math
from typing import NamedTuple

import numpy as np
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigs

from .enums import SpectralMethod
from .errors import ShapeMismatchError, SpectralResetError
from .nn import ParamMatrix
from .util import make_rng

LOGGER = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITER = 1000
RESET_TOLERANCE = 1e-8
ZERO_RADIUS = 1e-12
START_VECTOR_SEED = 0
ARNOLDI_MIN_DIM = 32


class SpectralEstimate(NamedTuple):
    value: float
    iterations: int
    converged: bool
    method: SpectralMethod


def _square_array(matrix):
    data = matrix.data if isinstance(matrix, ParamMatrix) else np.asarray(matrix, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] != data.shape[1]:
        raise ShapeMismatchError("spectral radius input (square matrix)", None, data.shape)
    return data


def _start_vector(n):
    x = make_rng(START_VECTOR_SEED).standard_normal(n)
    return x / np.linalg.norm(x)


def _pair_radius(a, b):
    "Largest root modulus of z^2 - a z - b"
    disc = a * a + 4.0 * b
    if disc >= 0.0:
        root = math.sqrt(disc)
        return max(abs(a + root), abs(a - root)) / 2.0
    # complex conjugate roots, |z|^2 = -b
    return math.sqrt(-b)


def power_iteration(matrix, tol=DEFAULT_TOLERANCE, max_iter=DEFAULT_MAX_ITER, residual_tol=None):
    """
    Estimate the spectral radius of a square matrix by power iteration.

    A complex-pair estimate is accepted once it moves by less than `tol`
    between two iterations and the residual of the fitted recurrence is
    below `residual_tol`; a real one once its Rayleigh residual is below
    `residual_tol`. Both are relative to the estimate; `residual_tol`
    defaults to `tol`.

    Returns:
        SpectralEstimate: `converged` is False when `max_iter` was reached.
    """
    residual_tol = tol if residual_tol is None else residual_tol
    data = _square_array(matrix)
    if not data.any():
        return SpectralEstimate(0.0, 0, True, SpectralMethod.POWER)
    x = _start_vector(data.shape[0])
    y = data @ x
    estimate, previous = 0.0, None
    for iteration in range(1, max_iter + 1):
        norm_y = float(np.linalg.norm(y))
        if norm_y == 0.0:
            return SpectralEstimate(0.0, iteration, True, SpectralMethod.POWER)
        mu = float(x @ y)
        if mu != 0.0 and np.linalg.norm(y - mu * x) <= residual_tol * abs(mu):
            return SpectralEstimate(abs(mu), iteration, True, SpectralMethod.POWER)
        x_next = y / norm_y
        z = data @ x_next
        # least squares z ~ a * x_next + c * x over the 2-d Krylov span:
        gram = float(x_next @ x)
        rhs_u, rhs_v = float(x_next @ z), float(x @ z)
        det = 1.0 - gram * gram
        if det < 1e-14:
            a, c = rhs_u, 0.0
        else:
            a = (rhs_u - gram * rhs_v) / det
            c = (rhs_v - gram * rhs_u) / det
        fit_residual = float(np.linalg.norm(z - a * x_next - c * x))
        estimate = _pair_radius(a, norm_y * c)
        scale = max(estimate, ZERO_RADIUS)
        if (
            previous is not None
            and abs(estimate - previous) <= tol * scale
            and fit_residual <= residual_tol * scale
        ):
            return SpectralEstimate(estimate, iteration, True, SpectralMethod.POWER)
        previous = estimate
        x, y = x_next, z
    return SpectralEstimate(estimate, max_iter, False, SpectralMethod.POWER)


def dense_spectral_radius(matrix):
    data = _square_array(matrix)
    return float(np.max(np.abs(np.linalg.eigvals(data))))


def arnoldi_spectral_radius(matrix, tol=DEFAULT_TOLERANCE):
    """
    Largest eigenvalue modulus from ARPACK, started from the same fixed
    vector as the power iteration.

    Returns:
        SpectralEstimate: not converged when ARPACK gave up (or the matrix
        is too small for it, under 3 rows).
    """
    data = _square_array(matrix)
    n = data.shape[0]
    if n < 3:
        return SpectralEstimate(math.nan, 0, False, SpectralMethod.ARNOLDI)
    try:
        values = eigs(data, k=1, which="LM", v0=_start_vector(n), tol=tol, return_eigenvectors=False)
    except (ArpackNoConvergence, ArpackError) as error:
        LOGGER.debug("ARPACK failed: %s", error)
        return SpectralEstimate(math.nan, 0, False, SpectralMethod.ARNOLDI)
    return SpectralEstimate(float(np.abs(values).max()), 0, True, SpectralMethod.ARNOLDI)


def estimate_spectral_radius(
    matrix,
    tol=DEFAULT_TOLERANCE,
    max_iter=DEFAULT_MAX_ITER,
    method=SpectralMethod.POWER,
    dense_fallback=True,
    residual_tol=None,
):
    """
    Estimate the largest absolute eigenvalue of a square matrix.

    Args:
        matrix (ParamMatrix, array): square matrix.
        tol (float): relative tolerance of the power iteration and of ARPACK.
        max_iter (int): power iteration budget.
        method (SpectralMethod, str): "power", "arnoldi" or "dense".
        dense_fallback (bool): when the power iteration did not converge,
            switch to ARPACK (large matrices) and then to the dense solver.
        residual_tol (float): residual check of the power iteration.
    Returns:
        SpectralEstimate
    """
    method = SpectralMethod.coerce(method)
    if method == SpectralMethod.DENSE:
        return SpectralEstimate(dense_spectral_radius(matrix), 0, True, SpectralMethod.DENSE)
    if method == SpectralMethod.ARNOLDI:
        estimate = arnoldi_spectral_radius(matrix, tol=tol)
        if estimate.converged:
            return estimate
        return SpectralEstimate(dense_spectral_radius(matrix), 0, True, SpectralMethod.DENSE)
    estimate = power_iteration(matrix, tol=tol, max_iter=max_iter, residual_tol=residual_tol)
    if estimate.converged:
        LOGGER.debug("Power iteration converged in %d iterations", estimate.iterations)
        return estimate
    if not dense_fallback:
        return estimate
    LOGGER.debug("Power iteration did not converge after %d iterations", estimate.iterations)
    if _square_array(matrix).shape[0] >= ARNOLDI_MIN_DIM:
        arnoldi = arnoldi_spectral_radius(matrix, tol=tol)
        if arnoldi.converged:
            return arnoldi._replace(iterations=estimate.iterations)
    LOGGER.debug("Using the dense eigensolver")
    return SpectralEstimate(dense_spectral_radius(matrix), estimate.iterations, True, SpectralMethod.DENSE)


def spectral_radius(
    matrix,
    tol=DEFAULT_TOLERANCE,
    max_iter=DEFAULT_MAX_ITER,
    method=SpectralMethod.POWER,
    dense_fallback=True,
):
    "Scalar version of `estimate_spectral_radius`, warning when it did not converge"
    estimate = estimate_spectral_radius(
        matrix, tol=tol, max_iter=max_iter, method=method, dense_fallback=dense_fallback
    )
    if not estimate.converged:
        LOGGER.warning(
            "Spectral radius estimate %g did not converge within %d iterations",
            estimate.value,
            max_iter,
        )
    return estimate.value


def spectral_reset(
    w_rec,
    spectral_target=1.0,
    tol=RESET_TOLERANCE,
    max_iter=DEFAULT_MAX_ITER,
    method=SpectralMethod.POWER,
):
    """
    Rescale a recurrent matrix so that its spectral radius equals `spectral_target`.

    Returns:
        ParamMatrix (or array, mirroring the input type): ``W * target / rho(W)``.
    Raises:
        SpectralResetError: if rho(W) is zero, which cannot be rescaled.
    """
    if spectral_target <= 0:
        raise SpectralResetError(f"Target spectral radius must be positive, got {spectral_target}")
    data = _square_array(w_rec)
    rho = estimate_spectral_radius(data, tol=tol, max_iter=max_iter, method=method).value
    if rho <= ZERO_RADIUS:
        raise SpectralResetError(f"Cannot rescale a matrix of spectral radius {rho}")
    rescaled = data * (spectral_target / rho)
    if isinstance(w_rec, ParamMatrix):
        return w_rec.replace(rescaled)
    return rescaled
