"""Deterministic bias machinery, Monte-Carlo moment estimation, and rate fits.

The heterogeneity bias of a round is the averaged deviation pushed through
one deterministic round map; its accumulation over rounds is an O(T d^2)
recursion.  Monte-Carlo moments average independent trajectories; power-law
exponents are recovered by OLS on log-log points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import NonPositiveValue
from .model import FederatedSystem
from .schedule import Schedule
from .streams import derive_seed

MC_SEED_STRIDE = 7_001  # salt separating mc_moment children from other derived seeds


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    points: tuple  # ((log t, log value), ...)


@dataclass(frozen=True)
class TwoTermFit:
    """Least-squares fit of value ~ c1 t^e1 + c2 t^e2 (log-space residuals)."""

    c1: float
    c2: float
    e1: float
    e2: float
    r2: float


def deterministic_contraction(system: FederatedSystem, sched: Schedule, t: int) -> np.ndarray:
    """Averaged deterministic round map at round t."""
    from .covariance import mean_contraction

    return mean_contraction(system, sched, t)


def rho_avg(system: FederatedSystem, sched: Schedule, t: int) -> np.ndarray:
    """Per-round heterogeneity bias: mean over agents of
    (I - (I - eta_t A_c)^{H_t}) (theta*_c - theta*)."""
    eta = sched.step_size(t)
    h = sched.local_steps(t)
    eye = np.eye(system.dim)
    gaps = system.solution_gaps()
    acc = np.zeros(system.dim)
    for c, ag in enumerate(system.agents):
        g_mat = np.linalg.matrix_power(eye - eta * ag.a_bar, h)
        acc += (eye - g_mat) @ gaps[c]
    return acc / system.n_agents


def rho_bound(system, sched, t, zeta1, zeta2) -> float:
    """Stated bound eta_t^2 H_t^2 zeta1 zeta2 / 2 on the round bias norm."""
    eta = sched.step_size(t)
    h = sched.local_steps(t)
    return 0.5 * eta * eta * h * h * zeta1 * zeta2


def bias_trajectory(system: FederatedSystem, sched: Schedule, n_rounds: int) -> np.ndarray:
    """Accumulated deterministic bias: rows 0..T of the recursion
    x_t = G_t x_{t-1} + rho_t, x_0 = 0."""
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    from .covariance import mean_contraction

    out = np.zeros((n_rounds + 1, system.dim))
    x = np.zeros(system.dim)
    for t in range(1, n_rounds + 1):
        g_mat = mean_contraction(system, sched, t)
        x = g_mat @ x + rho_avg(system, sched, t)
        out[t] = x
    return out


def bias_trajectory_bound(system, sched, n_rounds, zeta1, zeta2, rate) -> np.ndarray:
    """Stated envelope zeta1 zeta2 sum_{s<=t} eta_s^2 H_s^2 exp(-rate sum_{i=s+1}^t eta_i H_i)
    at each round t = 1..n_rounds, valid whenever ``rate`` is a certified
    contraction rate for every agent.  Computed from prefix sums; rate *
    cumulative(eta H) must stay below ~700 to avoid overflow."""
    etas = np.array([sched.step_size(t) for t in range(1, n_rounds + 1)])
    hs = np.array([sched.local_steps(t) for t in range(1, n_rounds + 1)])
    prefix = np.cumsum(etas * hs)
    inner = np.cumsum((etas * hs) ** 2 * np.exp(rate * prefix))
    return zeta1 * zeta2 * np.exp(-rate * prefix) * inner


def mc_moment_path(system, model, sched, rounds, p, n_runs, seed, theta0=None, workers=1):
    """Monte-Carlo p-th moment of the error norm at each requested round.

    Returns {t: (value, std_err, n_diverged)} with value = (mean ||theta_t -
    theta*||^p)^{1/p} over independent trajectory seeds and a jackknife
    standard error.  Divergent runs are excluded and counted.
    """
    from .engine import simulate

    if n_runs < 2:
        raise ValueError("n_runs must be >= 2")
    if p < 1:
        raise ValueError("p must be >= 1")
    rounds = sorted(set(int(t) for t in rounds))
    theta0 = np.zeros(system.dim) if theta0 is None else np.asarray(theta0, float)

    def one_run(r):
        run_seed = derive_seed(seed, MC_SEED_STRIDE + r)
        res = simulate(system, model, sched, rounds, theta0, run_seed)
        return {
            t: float(np.linalg.norm(snap.theta - system.theta_star))
            for t, snap in res.snapshots.items()
        }

    if workers > 1:
        from multiprocessing import Pool

        with Pool(workers) as pool:
            runs = pool.map(one_run, range(n_runs))
    else:
        runs = [one_run(r) for r in range(n_runs)]

    out = {}
    for t in rounds:
        norms = np.array([run[t] for run in runs if t in run])
        n_div = n_runs - norms.size
        if norms.size < 2:
            out[t] = (float("nan"), float("nan"), n_div)
            continue
        powered = norms**p
        value = float(np.mean(powered) ** (1.0 / p))
        total = powered.sum()
        loo = ((total - powered) / (powered.size - 1)) ** (1.0 / p)
        se = float(np.sqrt((powered.size - 1) / powered.size * np.sum((loo - loo.mean()) ** 2)))
        out[t] = (value, se, n_div)
    return out


def mc_moment(system, model, sched, n_rounds, p, n_runs, seed, theta0=None, workers=1):
    """(value, std_err) of the p-th error moment at one round."""
    value, se, _ = mc_moment_path(
        system, model, sched, [n_rounds], p, n_runs, seed, theta0, workers
    )[int(n_rounds)]
    return value, se


def rate_fit(points) -> RateFit:
    """OLS of log value on log t."""
    points = [(float(t), float(v)) for t, v in points]
    if len(points) < 3:
        raise ValueError("rate fit needs at least 3 points")
    if any(v <= 0.0 for _, v in points):
        raise NonPositiveValue("rate fit requires strictly positive values")
    log_t = np.log([t for t, _ in points])
    log_v = np.log([v for _, v in points])
    slope, intercept = np.polyfit(log_t, log_v, 1)
    pred = slope * log_t + intercept
    ss_tot = float(np.sum((log_v - log_v.mean()) ** 2))
    ss_res = float(np.sum((log_v - pred) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        r2=float(r2),
        points=tuple(zip(log_t.tolist(), log_v.tolist())),
    )


def two_term_rate_fit(ts, values, init_exponents) -> TwoTermFit:
    """Fit value ~ c1 t^e1 + c2 t^e2 with nonnegative coefficients.

    Inner step: nonnegative least squares for (c1, c2) at fixed exponents on
    relative residuals; outer step: Nelder-Mead over the exponent pair from
    the supplied initial guess.  R^2 is reported in log space.
    """
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0.0):
        raise NonPositiveValue("two-term fit requires strictly positive values")
    log_v = np.log(values)
    weights = 1.0 / values  # least squares on relative error ~ log residuals

    def coeffs(exps):
        design = np.stack([ts ** exps[0], ts ** exps[1]], axis=1)
        c, _ = optimize.nnls(design * weights[:, None], np.ones_like(values))
        return c, design

    def loss(exps):
        c, design = coeffs(exps)
        pred = design @ c
        if np.any(pred <= 0.0):
            return 1e12
        return float(np.sum((np.log(pred) - log_v) ** 2))

    best = optimize.minimize(
        loss, np.asarray(init_exponents, dtype=float), method="Nelder-Mead",
        options={"xatol": 1e-4, "fatol": 1e-10, "maxiter": 2000},
    )
    exps = best.x
    c, design = coeffs(exps)
    pred = design @ c
    ss_tot = float(np.sum((log_v - log_v.mean()) ** 2))
    ss_res = float(np.sum((np.log(np.maximum(pred, 1e-300)) - log_v) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    order = np.argsort(exps)[::-1]  # slower-decaying term first
    return TwoTermFit(
        c1=float(c[order[0]]),
        c2=float(c[order[1]]),
        e1=float(exps[order[0]]),
        e2=float(exps[order[1]]),
        r2=float(r2),
    )
