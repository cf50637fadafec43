"""Confidence intervals on projections of the last iterate, and coverage accounting.

Three interval methods share one normalized scale: bootstrap deviations are
pre-scaled by eta_t^{-1/2}, so empirical-quantile (EQ), standard-deviation
(SDB) and plug-in (PE) intervals all shrink like eta_t^{1/2}.  ``level`` is
always the desired coverage probability; tail quantiles are (1 +/- level)/2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyInput,
    EmptySamples,
    InvalidCovariance,
    OutOfRange,
    TooFewReplicates,
)

FEW_REPLICATES = 20


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    method: str
    level: float
    u: np.ndarray
    n_used: int = 0
    n_dropped: int = 0
    warn_few_replicates: bool = False
    warn_clamped: bool = False

    def covers(self, truth: float) -> bool:
        return self.lo <= truth <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class SimultaneousRegion:
    center: np.ndarray
    radius: float
    scale: float  # eta_t^{1/2}
    level: float
    n_used: int = 0
    n_dropped: int = 0
    warn_few_replicates: bool = False

    def covers(self, x) -> bool:
        dev = np.linalg.norm(np.asarray(x, dtype=float) - self.center) / self.scale
        return dev <= self.radius


@dataclass(frozen=True)
class CoverageResult:
    hits: int
    trials: int

    @property
    def coverage(self) -> float:
        return self.hits / self.trials

    @property
    def std_err(self) -> float:
        p = self.coverage
        return math.sqrt(p * (1.0 - p) / self.trials)


# --- scalar machinery -------------------------------------------------------

# Rational approximation of the standard normal inverse CDF (relative error
# below 1.15e-9 everywhere), then a single Newton step through the erfc-based
# CDF pushes the absolute error well under 1e-8.
_ICDF_A = (
    -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
    1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00,
)
_ICDF_B = (
    -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
    6.680131188771972e01, -1.328068155288572e01,
)
_ICDF_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
    -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00,
)
_ICDF_D = (
    7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
    3.754408661907416e00,
)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF with absolute error <= 1e-8."""
    if not (0.0 < p < 1.0):
        raise OutOfRange(f"quantile level must lie in (0, 1), got {p}")
    a, b, c, d = _ICDF_A, _ICDF_B, _ICDF_C, _ICDF_D
    p_low, p_high = 0.02425, 1.0 - 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    elif p <= p_high:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
            ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        )
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    # one Newton refinement: x <- x - (Phi(x) - p)/phi(x)
    err = normal_cdf(x) - p
    dens = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if dens > 0.0:
        x -= err / dens
    return x


def empirical_quantile(samples, q: float) -> float:
    """Ceiling order statistic x_(k), k = max(1, ceil(q n)); no interpolation."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise EmptySamples("empirical quantile of an empty sample set")
    if not (0.0 <= q <= 1.0):
        raise OutOfRange(f"quantile level must lie in [0, 1], got {q}")
    k = max(1, math.ceil(q * samples.size))
    return float(np.sort(samples)[k - 1])


# --- interval constructions --------------------------------------------------


def _scaled_deviations(theta_t, boot_finals, eta_t, u):
    """eta_t^{-1/2} u^T (theta_b - theta_t) over finite replicates."""
    theta_t = np.asarray(theta_t, dtype=float)
    boot = np.asarray(boot_finals, dtype=float)
    if boot.ndim != 2:
        boot = boot.reshape(-1, theta_t.size)
    finite = np.all(np.isfinite(boot), axis=1)
    n_dropped = int(np.sum(~finite))
    dev = (boot[finite] - theta_t[None, :]) @ np.asarray(u, dtype=float)
    return dev / math.sqrt(eta_t), n_dropped


def eq_interval(theta_t, boot_finals, eta_t, u, level) -> ConfidenceInterval:
    """Empirical-quantile bootstrap interval for u^T theta."""
    s, n_dropped = _scaled_deviations(theta_t, boot_finals, eta_t, u)
    if s.size == 0:
        raise EmptySamples("no finite bootstrap replicates")
    if s.size < 2:
        raise TooFewReplicates(f"need >= 2 finite replicates, got {s.size}")
    q_lo = empirical_quantile(s, (1.0 - level) / 2.0)
    q_hi = empirical_quantile(s, (1.0 + level) / 2.0)
    center = float(np.asarray(u) @ np.asarray(theta_t))
    root = math.sqrt(eta_t)
    return ConfidenceInterval(
        lo=center - root * q_hi,
        hi=center - root * q_lo,
        method="EQ",
        level=level,
        u=np.asarray(u, dtype=float),
        n_used=int(s.size),
        n_dropped=n_dropped,
        warn_few_replicates=s.size < FEW_REPLICATES,
    )


def sdb_interval(theta_t, boot_finals, eta_t, u, level) -> ConfidenceInterval:
    """Gaussian interval with the bootstrap standard deviation as spread."""
    s, n_dropped = _scaled_deviations(theta_t, boot_finals, eta_t, u)
    if s.size == 0:
        raise EmptySamples("no finite bootstrap replicates")
    if s.size < 2:
        raise TooFewReplicates(f"need >= 2 finite replicates, got {s.size}")
    sd = float(np.std(s, ddof=1))
    z = normal_quantile((1.0 + level) / 2.0)
    center = float(np.asarray(u) @ np.asarray(theta_t))
    half = math.sqrt(eta_t) * z * sd
    return ConfidenceInterval(
        lo=center - half,
        hi=center + half,
        method="SDB",
        level=level,
        u=np.asarray(u, dtype=float),
        n_used=int(s.size),
        n_dropped=n_dropped,
        warn_few_replicates=s.size < FEW_REPLICATES,
    )


def pe_interval(theta_t, sigma_plugin, eta_t, u, level) -> ConfidenceInterval:
    """Plug-in Gaussian interval from an estimated asymptotic covariance."""
    sigma = np.asarray(sigma_plugin, dtype=float)
    if np.linalg.norm(sigma - sigma.T) > 1e-8 * (1.0 + np.linalg.norm(sigma)):
        raise InvalidCovariance("plug-in covariance asymmetric beyond 1e-8")
    u = np.asarray(u, dtype=float)
    var = float(u @ sigma @ u)
    clamped = var < 0.0
    var = max(var, 0.0)
    z = normal_quantile((1.0 + level) / 2.0)
    center = float(u @ np.asarray(theta_t))
    half = z * math.sqrt(eta_t) * math.sqrt(var)
    return ConfidenceInterval(
        lo=center - half,
        hi=center + half,
        method="PE",
        level=level,
        u=u,
        warn_clamped=clamped,
    )


def sim_region(theta_t, boot_finals, eta_t, level) -> SimultaneousRegion:
    """Norm ball from bootstrap quantiles of the scaled deviation norms."""
    theta_t = np.asarray(theta_t, dtype=float)
    boot = np.asarray(boot_finals, dtype=float)
    if boot.ndim != 2:
        boot = boot.reshape(-1, theta_t.size)
    finite = np.all(np.isfinite(boot), axis=1)
    n_dropped = int(np.sum(~finite))
    boot = boot[finite]
    if boot.shape[0] == 0:
        raise EmptySamples("no finite bootstrap replicates")
    if boot.shape[0] < 2:
        raise TooFewReplicates(f"need >= 2 finite replicates, got {boot.shape[0]}")
    root = math.sqrt(eta_t)
    norms = np.linalg.norm(boot - theta_t[None, :], axis=1) / root
    return SimultaneousRegion(
        center=theta_t,
        radius=empirical_quantile(norms, level),
        scale=root,
        level=level,
        n_used=int(boot.shape[0]),
        n_dropped=n_dropped,
        warn_few_replicates=boot.shape[0] < FEW_REPLICATES,
    )


def coverage(results) -> CoverageResult:
    """Fraction of (interval-or-region, truth) pairs where truth is covered."""
    results = list(results)
    if not results:
        raise EmptyInput("coverage of an empty result list")
    hits = sum(1 for obj, truth in results if obj.covers(truth))
    return CoverageResult(hits=hits, trials=len(results))


def intervals_to_csv(records, path) -> None:
    """Columns: method, level, u_index, lo, hi, covered."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["method", "level", "u_index", "lo", "hi", "covered"])
        for idx, (interval, truth) in enumerate(records):
            writer.writerow(
                [
                    interval.method,
                    repr(interval.level),
                    idx,
                    repr(interval.lo),
                    repr(interval.hi),
                    int(interval.covers(truth)),
                ]
            )
