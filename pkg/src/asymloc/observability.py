"""Observability diagnostics built from robust-loss curvature.

Each measurement contributes a rank-one term ``w * J J^T`` to a 2x2
curvature matrix over the position, where ``w`` is the loss's second
derivative at the residual and ``J`` the position Jacobian. Saturated
residuals carry zero curvature, so the matrix tracks exactly the geometric
information the robust objective can still "see": its minimum eigenvalue
is the diagnostic for estimator stagnation, and a sample set is *bilateral*
when that eigenvalue clears a threshold (the Jacobians of non-saturated
samples span the plane).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

import math

import numpy as np

from .losses import LossSpec, loss_curvature


@dataclass(frozen=True)
class CurvatureSample:
    """One measurement's curvature contribution: position Jacobian, second
    derivative weight, and whether the residual was saturated."""

    jacobian: np.ndarray
    weight: float
    saturated: bool
    step: int = 0


@dataclass(frozen=True)
class CurvatureReport:
    """Accumulated 2x2 curvature matrix with its spectrum and bookkeeping."""

    matrix: np.ndarray
    lambda_min: float
    lambda_max: float
    bilateral: bool
    n_saturated: int
    n_active: int


def eig2x2_sym(matrix: np.ndarray) -> tuple[float, float]:
    """Closed-form eigenvalues (min, max) of a symmetric 2x2 matrix."""
    a = float(matrix[0, 0])
    b = float(matrix[0, 1])
    c = float(matrix[1, 1])
    half_trace = 0.5 * (a + c)
    radius = math.hypot(0.5 * (a - c), b)
    return half_trace - radius, half_trace + radius


def classify_residual(r: float, spec: LossSpec, jacobian: np.ndarray,
                      step: int = 0) -> CurvatureSample:
    """Turn a residual into a curvature sample: weight is the loss's second
    derivative at ``r``; zero weight marks the sample saturated."""
    w = loss_curvature(r, spec)
    return CurvatureSample(jacobian=np.asarray(jacobian, dtype=float),
                           weight=w, saturated=(w == 0.0), step=step)


def _report_from(matrix: np.ndarray, n_saturated: int, n_active: int,
                 mu_threshold: float) -> CurvatureReport:
    lmin, lmax = eig2x2_sym(matrix)
    lmin = max(lmin, 0.0)  # PSD by construction; clip fp dust
    lmax = max(lmax, 0.0)
    return CurvatureReport(matrix=matrix, lambda_min=lmin, lambda_max=lmax,
                           bilateral=lmin > mu_threshold,
                           n_saturated=n_saturated, n_active=n_active)


def accumulate(samples: Iterable[CurvatureSample],
               mu_threshold: float = 0.0) -> CurvatureReport:
    """Sum ``w * J J^T`` over samples and report the spectrum.

    An empty or all-saturated sample set yields the zero matrix with
    ``lambda_min = 0``: no usable curvature anywhere in the plane.
    """
    m = np.zeros((2, 2))
    n_sat = 0
    n_act = 0
    for s in samples:
        if s.saturated or s.weight == 0.0:
            n_sat += 1
            continue
        n_act += 1
        j = s.jacobian
        m[0, 0] += s.weight * j[0] * j[0]
        m[0, 1] += s.weight * j[0] * j[1]
        m[1, 1] += s.weight * j[1] * j[1]
    m[1, 0] = m[0, 1]
    return _report_from(m, n_sat, n_act, mu_threshold)


def crossing_improves(before: CurvatureReport, new_sample: CurvatureSample,
                      mu_threshold: float = 0.0) -> tuple[CurvatureReport, float]:
    """Fold one new sample into a report and return the minimum-eigenvalue
    gain, which is never negative (eigenvalues of a sum of PSD matrices
    dominate the smaller summand's).

    The gain is strictly positive exactly when the sample carries curvature
    (non-saturated) and its Jacobian has a component along the previous
    minimum eigenvector -- the geometric payoff of a crossing maneuver.
    """
    m = before.matrix.copy()
    n_sat, n_act = before.n_saturated, before.n_active
    if new_sample.saturated or new_sample.weight == 0.0:
        n_sat += 1
    else:
        n_act += 1
        j = new_sample.jacobian
        m = m + new_sample.weight * np.outer(j, j)
    after = _report_from(m, n_sat, n_act, mu_threshold)
    return after, after.lambda_min - before.lambda_min


class SlidingCurvatureTracker:
    """Windowed curvature accumulator for per-step diagnostics.

    A full-history matrix masks recent degeneracy, so the per-step
    ``lambda_min`` series is computed over the trailing ``window`` samples.
    The running matrix is maintained incrementally (add new / subtract
    expired outer products).
    """

    def __init__(self, window: int = 30, mu_threshold: float = 0.0):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self.mu_threshold = mu_threshold
        self._samples: deque[CurvatureSample] = deque()
        self._m = np.zeros((2, 2))
        self._n_sat = 0

    def add(self, sample: CurvatureSample) -> None:
        self._samples.append(sample)
        if sample.saturated or sample.weight == 0.0:
            self._n_sat += 1
        else:
            j = sample.jacobian
            self._m += sample.weight * np.outer(j, j)
        if len(self._samples) > self.window:
            old = self._samples.popleft()
            if old.saturated or old.weight == 0.0:
                self._n_sat -= 1
            else:
                j = old.jacobian
                self._m -= old.weight * np.outer(j, j)

    def report(self) -> CurvatureReport:
        n_act = len(self._samples) - self._n_sat
        return _report_from(self._m.copy(), self._n_sat, n_act, self.mu_threshold)

    def lambda_min(self) -> float:
        lmin, _ = eig2x2_sym(self._m)
        return max(lmin, 0.0)
