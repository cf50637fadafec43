"""Federated linear systems: agents, exact solutions, heterogeneity, noise moments.

An agent c holds a mean pair (A_c, b_c) with local solution A_c x = b_c; the
federation solves the averaged system.  Heterogeneity scalars measure how far
the agents' matrices and solutions spread around the averages; noise-moment
matrices are the exact second moments of the observation noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotEnumerable, SingularSystem, UnstableMatrix

COND_LIMIT = 1e12
HURWITZ_MIN_REAL = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AgentSystem:
    """One agent's mean matrix and vector.

    The matrix must have all eigenvalue real parts strictly positive (so the
    negated matrix is Hurwitz and the local fixed-point iteration contracts).
    ``contraction_rate_hint`` is an optional proxy for the contraction
    constant, used only for schedule guard checks.
    """

    a_bar: np.ndarray
    b_bar: np.ndarray
    contraction_rate_hint: float | None = None

    def __post_init__(self):
        a = np.asarray(self.a_bar, dtype=float)
        b = np.asarray(self.b_bar, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"a_bar must be square, got shape {a.shape}")
        if b.shape != (a.shape[0],):
            raise DimensionMismatch(
                f"b_bar shape {b.shape} does not match matrix dimension {a.shape[0]}"
            )
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("agent system entries must be finite")
        eig = np.linalg.eigvals(a)
        if np.min(eig.real) < HURWITZ_MIN_REAL:
            raise UnstableMatrix(
                f"min eigenvalue real part {np.min(eig.real):.3e} < {HURWITZ_MIN_REAL}"
            )
        if np.linalg.cond(a) > COND_LIMIT:
            raise SingularSystem("agent matrix condition estimate exceeds 1e12")
        object.__setattr__(self, "a_bar", _freeze(a))
        object.__setattr__(self, "b_bar", _freeze(b))

    @property
    def dim(self) -> int:
        return self.a_bar.shape[0]

    def solve(self) -> np.ndarray:
        return np.linalg.solve(self.a_bar, self.b_bar)

    def symmetric_min_eig(self) -> float:
        return float(np.min(np.linalg.eigvalsh(0.5 * (self.a_bar + self.a_bar.T))))


@dataclass(frozen=True)
class FederatedSystem:
    """N agents, their averaged system, and all exact solutions."""

    agents: tuple
    a_avg: np.ndarray
    b_avg: np.ndarray
    theta_star: np.ndarray
    theta_star_agents: np.ndarray  # (N, d)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def dim(self) -> int:
        return self.a_avg.shape[0]

    def contraction_hint(self) -> float:
        """Smallest per-agent contraction proxy: explicit hint if supplied,
        otherwise the minimum eigenvalue of the symmetrized mean matrix."""
        vals = [
            ag.contraction_rate_hint
            if ag.contraction_rate_hint is not None
            else ag.symmetric_min_eig()
            for ag in self.agents
        ]
        return float(min(vals))

    def solution_gaps(self) -> np.ndarray:
        """(N, d) array of theta_star_c - theta_star."""
        return self.theta_star_agents - self.theta_star[None, :]


def build_federated_system(agents) -> FederatedSystem:
    """Assemble the federation and solve all systems with a dense pivoted solve."""
    agents = tuple(agents)
    if len(agents) < 1:
        raise DimensionMismatch("need at least one agent")
    d = agents[0].dim
    if any(ag.dim != d for ag in agents):
        raise DimensionMismatch("agents disagree on dimension")
    a_avg = np.mean([ag.a_bar for ag in agents], axis=0)
    b_avg = np.mean([ag.b_bar for ag in agents], axis=0)
    if np.linalg.cond(a_avg) > COND_LIMIT:
        raise SingularSystem("averaged matrix condition estimate exceeds 1e12")
    theta_star = np.linalg.solve(a_avg, b_avg)
    theta_agents = np.stack([ag.solve() for ag in agents])
    return FederatedSystem(
        agents=agents,
        a_avg=_freeze(a_avg),
        b_avg=_freeze(b_avg),
        theta_star=_freeze(theta_star),
        theta_star_agents=_freeze(theta_agents),
    )


@dataclass(frozen=True)
class NoiseMoments:
    """Exact (or Monte-Carlo) second moments of the observation noise.

    sigma_eps[c]  = E[eps_c(z) eps_c(z)^T] with eps_c evaluated at the local
                    solution; sigma_A[c] = E[Atilde^T Atilde];
    sigma_star_avg = average over agents of the noise covariance at the
                    global solution.
    """

    sigma_eps: tuple
    sigma_A: tuple
    sigma_star_avg: np.ndarray
    eps_sup: float
    a_sup: float
    mc_samples: int | None = None


@dataclass(frozen=True)
class HeterogeneityReport:
    zeta1: float
    zeta2: float
    zeta_star: float
    zeta3: float
    zeta4: float
    sigma_eps_bar: float
    sigma_het_bar: float
    sigma_A_bar: float


def heterogeneity(system: FederatedSystem, moments: NoiseMoments) -> HeterogeneityReport:
    """All seven dispersion scalars from their defining sums (operator norms)."""
    if len(moments.sigma_A) != system.n_agents:
        raise DimensionMismatch("moments and system disagree on agent count")
    gaps = system.solution_gaps()
    opnorm = lambda m: float(np.linalg.norm(m, 2))
    zeta1_sq = np.mean([np.sum((ag.a_bar @ g) ** 2) for ag, g in zip(system.agents, gaps)])
    zeta2_sq = np.mean([opnorm(ag.a_bar - system.a_avg) ** 2 for ag in system.agents])
    gap_norms = np.linalg.norm(gaps, axis=1)
    zeta4_sq = np.mean([np.trace(sa) * gn**2 for sa, gn in zip(moments.sigma_A, gap_norms)])
    het_sq = np.mean([opnorm(sa) * gn**2 for sa, gn in zip(moments.sigma_A, gap_norms)])
    eps_sq = np.mean([np.trace(se) for se in moments.sigma_eps])
    a_sq = np.mean([opnorm(sa) ** 2 for sa in moments.sigma_A])
    return HeterogeneityReport(
        zeta1=float(np.sqrt(zeta1_sq)),
        zeta2=float(np.sqrt(zeta2_sq)),
        zeta_star=float(np.mean(gap_norms)),
        zeta3=float(np.sqrt(np.mean(gap_norms**2))),
        zeta4=float(np.sqrt(zeta4_sq)),
        sigma_eps_bar=float(np.sqrt(eps_sq)),
        sigma_het_bar=float(np.sqrt(het_sq)),
        sigma_A_bar=float(np.sqrt(a_sq)),
    )


def noise_moments(system: FederatedSystem, model, mode="exact", mc_samples=None, seed=0):
    """Second moments of the observation noise, by enumeration or Monte Carlo.

    Exact mode sums over the model's finite outcome set (or uses the model's
    closed-form moments when it declares them); monte-carlo mode averages
    ``mc_samples`` i.i.d. draws per agent.
    """
    if model.n_agents != system.n_agents or model.dim != system.dim:
        raise DimensionMismatch("model and system disagree on shape")
    if mode == "exact":
        return _noise_moments_exact(system, model)
    if mode == "monte-carlo":
        if not mc_samples or mc_samples < 1:
            raise ValueError("monte-carlo mode requires mc_samples >= 1")
        return _noise_moments_mc(system, model, int(mc_samples), seed)
    raise ValueError(f"unknown mode {mode!r}")


def _noise_moments_exact(system, model):
    analytic = getattr(model, "analytic_noise_moments", None)
    if analytic is not None:
        return analytic(system)
    outcomes = getattr(model, "outcomes", None)
    if outcomes is None:
        raise NotEnumerable("model has neither a finite outcome set nor closed-form moments")
    sig_eps, sig_a, sig_star = [], [], []
    for c, ag in enumerate(system.agents):
        probs, a_all, b_all = model.outcomes(c)
        at = a_all - ag.a_bar[None, :, :]
        bt = b_all - ag.b_bar[None, :]
        eps_loc = np.einsum("mij,j->mi", at, system.theta_star_agents[c]) - bt
        eps_glb = np.einsum("mij,j->mi", at, system.theta_star) - bt
        sig_eps.append(np.einsum("m,mi,mj->ij", probs, eps_loc, eps_loc))
        sig_star.append(np.einsum("m,mi,mj->ij", probs, eps_glb, eps_glb))
        sig_a.append(np.einsum("m,mki,mkj->ij", probs, at, at))
    return NoiseMoments(
        sigma_eps=tuple(_freeze(m) for m in sig_eps),
        sigma_A=tuple(_freeze(m) for m in sig_a),
        sigma_star_avg=_freeze(np.mean(sig_star, axis=0)),
        eps_sup=float(model.eps_sup),
        a_sup=float(model.a_sup),
    )


def _noise_moments_mc(system, model, m, seed):
    from .streams import round_uniforms

    sig_eps, sig_a, sig_star = [], [], []
    chunk = 100_000
    for c, ag in enumerate(system.agents):
        se = np.zeros((system.dim, system.dim))
        sa = np.zeros_like(se)
        ss = np.zeros_like(se)
        done = 0
        row = 0
        while done < m:
            n = min(chunk, m - done)
            u = round_uniforms(seed, "env-generation", 3, c, n, model.uniforms_per_draw, salt=row)
            a_all, b_all = model.sample_round(c, u)
            at = a_all - ag.a_bar[None, :, :]
            bt = b_all - ag.b_bar[None, :]
            eps_loc = np.einsum("mij,j->mi", at, system.theta_star_agents[c]) - bt
            eps_glb = np.einsum("mij,j->mi", at, system.theta_star) - bt
            se += np.einsum("mi,mj->ij", eps_loc, eps_loc)
            ss += np.einsum("mi,mj->ij", eps_glb, eps_glb)
            sa += np.einsum("mki,mkj->ij", at, at)
            done += n
            row += 1
        sig_eps.append(se / m)
        sig_a.append(sa / m)
        sig_star.append(ss / m)
    return NoiseMoments(
        sigma_eps=tuple(_freeze(x) for x in sig_eps),
        sigma_A=tuple(_freeze(x) for x in sig_a),
        sigma_star_avg=_freeze(np.mean(sig_star, axis=0)),
        eps_sup=float(model.eps_sup),
        a_sup=float(model.a_sup),
        mc_samples=m,
    )


# --- text schema -----------------------------------------------------------
#
# A FederatedSystem serializes to a JSON-compatible dict:
#   {"dim": d, "agents": [{"a_bar": [[...], ...], "b_bar": [...],
#                          "contraction_rate_hint": x-or-null}, ...]}
# Matrices are row-major nested lists.


def system_to_dict(system: FederatedSystem) -> dict:
    return {
        "dim": system.dim,
        "agents": [
            {
                "a_bar": ag.a_bar.tolist(),
                "b_bar": ag.b_bar.tolist(),
                "contraction_rate_hint": ag.contraction_rate_hint,
            }
            for ag in system.agents
        ],
    }


def system_from_dict(data: dict) -> FederatedSystem:
    agents = [
        AgentSystem(
            a_bar=np.array(a["a_bar"], dtype=float),
            b_bar=np.array(a["b_bar"], dtype=float),
            contraction_rate_hint=a.get("contraction_rate_hint"),
        )
        for a in data["agents"]
    ]
    return build_federated_system(agents)


def save_system(system: FederatedSystem, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(system_to_dict(system), f, indent=1)


def load_system(path) -> FederatedSystem:
    with open(path, encoding="utf-8") as f:
        return system_from_dict(json.load(f))


def matrix_to_dict(m: np.ndarray) -> list:
    """Row-major nested-list form used for covariance exports."""
    return np.asarray(m, dtype=float).tolist()
