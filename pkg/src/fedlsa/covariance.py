"""Exact covariance machinery for the federated LSA iterate.

Solves the continuous Lyapunov equation for the asymptotic covariance,
accumulates the finite-round leading covariance and the full
heterogeneity-aware covariance, and forms the data-driven plug-in estimate
from run accumulators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotEnumerable, SingularKronecker, UnstableMatrix
from .model import FederatedSystem, NoiseMoments
from .schedule import Schedule

LYAPUNOV_TOL = 1e-10
EXACT_OUTCOME_LIMIT = 10_000


@dataclass(frozen=True)
class CovarianceSet:
    sigma_star_avg: np.ndarray
    sigma_inf: np.ndarray
    sigma_hat_t: np.ndarray
    sigma_t: np.ndarray | None
    t: int


def solve_lyapunov(a: np.ndarray, c: np.ndarray, tol: float = LYAPUNOV_TOL) -> np.ndarray:
    """Solve a X + X a^T = c for symmetric c and stable a.

    Vectorizes to ((I kron a) + (a kron I)) vec(X) = vec(c) and dense-solves;
    the dimension is small enough that the O(d^6) cost is irrelevant and the
    construction is transparent.
    """
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    d = a.shape[0]
    if a.shape != (d, d) or c.shape != (d, d):
        raise ValueError("solve_lyapunov requires square matrices of equal size")
    if np.linalg.norm(c - c.T) > 1e-8 * (1.0 + np.linalg.norm(c)):
        raise ValueError("right-hand side must be symmetric")
    eig = np.linalg.eigvals(a)
    if np.min(eig.real) <= 0.0:
        raise UnstableMatrix(
            f"matrix is not stable: min eigenvalue real part {np.min(eig.real):.3e}"
        )
    eye = np.eye(d)
    kron = np.kron(eye, a) + np.kron(a, eye)
    cond = np.linalg.cond(kron)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularKronecker(f"Kronecker system condition estimate {cond:.3e}")
    # column-stacking vec: vec(aX) = (I kron a) vec(X), vec(X a^T) = (a kron I) vec(X)
    x = np.linalg.solve(kron, c.flatten(order="F"))
    sigma = x.reshape(d, d, order="F")
    sigma = 0.5 * (sigma + sigma.T)
    resid = np.linalg.norm(a @ sigma + sigma @ a.T - c, "fro")
    if resid > tol * (1.0 + np.linalg.norm(c, "fro")):
        raise SingularKronecker(
            f"Lyapunov residual {resid:.3e} exceeds tolerance (condition {cond:.3e})"
        )
    return sigma


def sigma_infinity(system: FederatedSystem, moments: NoiseMoments) -> np.ndarray:
    """Asymptotic covariance: solution of a_avg X + X a_avg^T = sigma_star_avg / N."""
    return solve_lyapunov(system.a_avg, moments.sigma_star_avg / system.n_agents)


def mean_contraction(system: FederatedSystem, sched: Schedule, t: int) -> np.ndarray:
    """Averaged deterministic round map: mean over agents of (I - eta_t A_c)^{H_t}."""
    eta = sched.step_size(t)
    h = sched.local_steps(t)
    eye = np.eye(system.dim)
    acc = np.zeros((system.dim, system.dim))
    for ag in system.agents:
        acc += np.linalg.matrix_power(eye - eta * ag.a_bar, h)
    return acc / system.n_agents


def sigma_hat_path(system, moments, sched, rounds):
    """Leading covariance at each requested round, by the forward recursion

        S_t = (eta_{t-1}/eta_t) G_t S_{t-1} G_t^T + (eta_t H_t / N) sigma_star_avg,

    equivalent to the sum over s of eta_s^2 H_s P_s sigma_star P_s^T scaled by
    1/(N eta_t), with P_s the product of later round maps.
    """
    rounds = sorted(set(int(t) for t in rounds))
    if rounds[0] < 1:
        raise ValueError("rounds must be >= 1")
    n = system.n_agents
    star = moments.sigma_star_avg
    out = {}
    s_mat = np.zeros((system.dim, system.dim))
    eta_prev = None
    for t in range(1, rounds[-1] + 1):
        eta = sched.step_size(t)
        h = sched.local_steps(t)
        if t > 1:
            g = mean_contraction(system, sched, t)
            s_mat = (eta_prev / eta) * (g @ s_mat @ g.T)
        s_mat = s_mat + (eta * h / n) * star
        eta_prev = eta
        if t in rounds:
            out[t] = 0.5 * (s_mat + s_mat.T)
    return out


def sigma_hat_t(system, moments, sched, t: int) -> np.ndarray:
    """Leading covariance of the scaled iterate at round t."""
    return sigma_hat_path(system, moments, sched, [t])[int(t)]


def _pairwise_moments(system, model, agent, mc_samples=None, seed=0):
    """Constituent second moments for the full covariance at one agent:
    (E[eps eps^T], E[eps (A~ delta)^T], E[(A~ delta)(A~ delta)^T]) with eps
    evaluated at the local solution and delta the local-global solution gap.
    """
    analytic = getattr(model, "analytic_pairwise_moments", None)
    if analytic is not None:
        return analytic(system, agent)
    outcomes = getattr(model, "outcomes", None)
    if outcomes is None:
        raise NotEnumerable("full covariance needs a finite or closed-form model")
    if model.n_outcomes(agent) > EXACT_OUTCOME_LIMIT and mc_samples:
        return _pairwise_moments_mc(system, model, agent, mc_samples, seed)
    probs, a_all, b_all = model.outcomes(agent)
    ag = system.agents[agent]
    at = a_all - ag.a_bar[None, :, :]
    bt = b_all - ag.b_bar[None, :]
    delta = system.theta_star_agents[agent] - system.theta_star
    eps = np.einsum("mij,j->mi", at, system.theta_star_agents[agent]) - bt
    adelta = np.einsum("mij,j->mi", at, delta)
    sig_eps = np.einsum("m,mi,mj->ij", probs, eps, eps)
    cross = np.einsum("m,mi,mj->ij", probs, eps, adelta)
    het = np.einsum("m,mi,mj->ij", probs, adelta, adelta)
    return sig_eps, cross, het


def _pairwise_moments_mc(system, model, agent, m, seed):
    from .streams import round_uniforms

    ag = system.agents[agent]
    delta = system.theta_star_agents[agent] - system.theta_star
    u = round_uniforms(seed, "env-generation", 4, agent, m, model.uniforms_per_draw)
    a_all, b_all = model.sample_round(agent, u)
    at = a_all - ag.a_bar[None, :, :]
    bt = b_all - ag.b_bar[None, :]
    eps = np.einsum("mij,j->mi", at, system.theta_star_agents[agent]) - bt
    adelta = np.einsum("mij,j->mi", at, delta)
    return (
        eps.T @ eps / m,
        eps.T @ adelta / m,
        adelta.T @ adelta / m,
    )


def sigma_t_full(system, model, moments, sched, t: int, mc_samples=None, seed=0):
    """Full covariance of the leading statistic, heterogeneity term included.

    Per round s and agent c the local update at step h propagates noise
    through (I - eta_s A_c)^{H_s - h} and the solution-gap perturbation
    through (I - eta_s A_c)^{h-1}; both are accumulated exactly from the
    constituent moments, then pushed through the later round maps.
    """
    t = int(t)
    if t < 1:
        raise ValueError("t must be >= 1")
    d, n = system.dim, system.n_agents
    pair = [
        _pairwise_moments(system, model, c, mc_samples=mc_samples, seed=seed)
        for c in range(n)
    ]
    eye = np.eye(d)
    total = np.zeros((d, d))
    prod = eye.copy()  # P_s for the current s, built backwards from P_t = I
    for s in range(t, 0, -1):
        eta = sched.step_size(s)
        h_count = sched.local_steps(s)
        inner = np.zeros((d, d))
        for c in range(n):
            sig_eps, cross, het = pair[c]
            base = eye - eta * system.agents[c].a_bar
            powers = [eye]
            for _ in range(h_count):
                powers.append(powers[-1] @ base)
            for h in range(1, h_count + 1):
                l_noise = powers[h_count - h]
                l_het = powers[h - 1]
                inner += l_noise @ sig_eps @ l_noise.T
                inner -= l_noise @ cross @ l_het.T
                inner -= l_het @ cross.T @ l_noise.T
                inner += l_het @ het @ l_het.T
        total += eta**2 * (prod @ inner @ prod.T)
        if s > 1:
            prod = prod @ mean_contraction(system, sched, s)
    sigma = total / (n**2 * sched.step_size(t))
    return 0.5 * (sigma + sigma.T)


def plugin_sigma_infinity(accumulator, n_agents: int) -> np.ndarray:
    """Data-driven covariance: Lyapunov solve with the empirical design matrix
    and empirical noise covariance in place of the exact ones.

    Raises UnstableMatrix when the empirical design matrix fails the
    stability check; callers treat that as a per-trajectory failure.
    """
    if accumulator.n_terms < 1:
        raise ValueError("empty plug-in accumulator")
    a_hat = accumulator.sum_a / accumulator.n_terms
    star_hat = accumulator.sum_outer / accumulator.n_terms
    return solve_lyapunov(a_hat, star_hat / n_agents)


def covariance_set(system, model, moments, sched, t, include_full=False) -> CovarianceSet:
    return CovarianceSet(
        sigma_star_avg=moments.sigma_star_avg,
        sigma_inf=sigma_infinity(system, moments),
        sigma_hat_t=sigma_hat_t(system, moments, sched, t),
        sigma_t=sigma_t_full(system, model, moments, sched, t) if include_full else None,
        t=int(t),
    )
