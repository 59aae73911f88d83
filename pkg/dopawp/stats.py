"""
Run statistics: mean final loss and its 95% confidence interval.
"""
import logging
import math
from typing import NamedTuple, Tuple

from scipy import stats

from .enums import CIMethod
from .errors import InsufficientRunsError, NonFiniteError

LOGGER = logging.getLogger(__name__)

NORMAL_Z95 = 1.96


class RunSummary(NamedTuple):
    final_losses: Tuple[float, ...]
    mean: float
    ci_low: float
    ci_high: float
    n_runs: int
    method: CIMethod = CIMethod.NORMAL
    degenerate: bool = False
    "True when a single run was summarized and the interval collapsed to the mean"

    @property
    def half_width(self):
        return (self.ci_high - self.ci_low) / 2.0


def _mean_and_sem(values):
    n = len(values)
    mean = math.fsum(values) / n
    variance = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(variance) / math.sqrt(n)


def summarize_runs(final_losses, method=CIMethod.NORMAL, allow_single=False):
    """
    Mean and 95% confidence interval of per-seed final losses.

    The interval is ``mean +/- 1.96 * s / sqrt(n)`` with the sample standard
    deviation ``s``; `method="student-t"` replaces 1.96 by the 0.975
    quantile of Student's t with n - 1 degrees of freedom.

    Sums are computed with `math.fsum`, so the result does not depend on the
    order of the inputs.

    Args:
        final_losses (iterable): one final loss per run.
        method (CIMethod, str): "normal" or "student-t".
        allow_single (bool): summarize a single run as a zero-width,
            degenerate interval instead of raising.
    Raises:
        InsufficientRunsError: fewer than 2 runs (1 when `allow_single`).
        NonFiniteError: a loss is NaN or infinite.
    """
    values = tuple(float(v) for v in final_losses)
    method = CIMethod.coerce(method)
    if any(not math.isfinite(v) for v in values):
        raise NonFiniteError("final losses")
    if len(values) == 1 and allow_single:
        LOGGER.warning("Single run summarized: confidence interval is degenerate")
        return RunSummary(values, values[0], values[0], values[0], 1, method, degenerate=True)
    if len(values) < 2:
        raise InsufficientRunsError(
            f"A confidence interval needs at least 2 runs, got {len(values)}"
        )
    mean, sem = _mean_and_sem(values)
    if method == CIMethod.STUDENT_T:
        factor = float(stats.t.ppf(0.975, len(values) - 1))
    else:
        factor = NORMAL_Z95
    half_width = factor * sem
    return RunSummary(values, mean, mean - half_width, mean + half_width, len(values), method)


def mean_and_sem(values):
    """
    Mean and standard error of a sample; a single value has SEM 0.

    Returns:
        tuple: (mean, sem)
    """
    values = tuple(float(v) for v in values)
    if not values:
        raise InsufficientRunsError("No value to average")
    if len(values) == 1:
        return values[0], 0.0
    return _mean_and_sem(values)
