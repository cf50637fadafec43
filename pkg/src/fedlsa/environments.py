"""Experimental testbeds: Garnet MDPs mapped to TD(0)-style LSA, controlled
synthetic linear systems, and the 1-d decaying-step toy process.

Garnet chains are random finite MDPs (state count, action count, branching
factor); heterogeneous agents perturb a common base chain on its sparsity
support.  The TD mapping samples states i.i.d. from the stationary
distribution of the uniform-policy chain, so observations satisfy the i.i.d.
noise model exactly and all noise moments are enumerable.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import HurwitzFailure, NoConvergence, StabilityFailure, UnstableMatrix
from .model import AgentSystem, FederatedSystem, build_federated_system
from .streams import derive_seed, env_generator

# env-generation stream tags
TAG_GARNET = 1
TAG_PERTURB = 2
TAG_FEATURES = 3
TAG_SYNTHETIC = 4
TAG_PROJECTION = 5

HURWITZ_RETRIES = 20
STATIONARY_TOL = 1e-12
STATIONARY_MAX_ITER = 1_000_000


@dataclass(frozen=True)
class GarnetSpec:
    n_states: int = 30
    n_actions: int = 2
    branching: int = 2
    dim: int = 5
    n_agents: int = 5
    perturb_magnitude: float = 0.1
    discount: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.branching > self.n_states:
            raise ValueError("branching cannot exceed the number of states")
        if self.dim > self.n_states:
            raise ValueError("feature dimension cannot exceed the number of states")
        if not (0.0 <= self.perturb_magnitude < 1.0):
            raise ValueError("perturb_magnitude must lie in [0, 1)")
        if not (0.0 < self.discount < 1.0):
            raise ValueError("discount must lie in (0, 1)")


@dataclass(frozen=True)
class Mdp:
    transitions: np.ndarray  # (n_actions, n, n), each row stochastic
    rewards: np.ndarray  # (n,)

    @property
    def n_states(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[0]

    def policy_kernel(self) -> np.ndarray:
        """Uniform-policy transition matrix."""
        return self.transitions.mean(axis=0)


def _sub_simplex(gen, size):
    """Probability vector from sorted-uniform stick breaking."""
    if size == 1:
        return np.ones(1)
    cuts = np.sort(gen.random(size - 1))
    return np.diff(np.concatenate(([0.0], cuts, [1.0])))


def generate_garnet(spec: GarnetSpec) -> Mdp:
    """Random MDP: per (state, action), `branching` successors with
    stick-breaking probabilities; standard-normal reward per state."""
    gen = env_generator(spec.seed, TAG_GARNET)
    n, k = spec.n_states, spec.branching
    transitions = np.zeros((spec.n_actions, n, n))
    for a in range(spec.n_actions):
        for s in range(n):
            succ = gen.choice(n, size=k, replace=False)
            transitions[a, s, succ] = _sub_simplex(gen, k)
    rewards = gen.standard_normal(n)
    return Mdp(transitions=transitions, rewards=rewards)


def perturb_mdp(base: Mdp, magnitude: float, agent_seed: int) -> Mdp:
    """Convex mix of each row with a fresh sub-simplex on the same support;
    rewards shifted additively by magnitude * N(0,1)."""
    if not (0.0 <= magnitude < 1.0):
        raise ValueError("magnitude must lie in [0, 1)")
    gen = env_generator(agent_seed, TAG_PERTURB)
    transitions = base.transitions.copy()
    for a in range(base.n_actions):
        for s in range(base.n_states):
            support = np.flatnonzero(transitions[a, s])
            fresh = _sub_simplex(gen, support.size)
            transitions[a, s, support] = (
                (1.0 - magnitude) * transitions[a, s, support] + magnitude * fresh
            )
    rewards = base.rewards + magnitude * gen.standard_normal(base.n_states)
    return Mdp(transitions=transitions, rewards=rewards)


def stationary_distribution(kernel: np.ndarray) -> np.ndarray:
    """Stationary row vector of a row-stochastic matrix by power iteration."""
    n = kernel.shape[0]
    pi = np.full(n, 1.0 / n)
    for _ in range(STATIONARY_MAX_ITER):
        nxt = pi @ kernel
        if np.abs(nxt - pi).sum() <= STATIONARY_TOL:
            return nxt / nxt.sum()
        pi = nxt
    raise NoConvergence("power iteration did not reach residual 1e-12")


class TdLsaModel:
    """TD(0) policy evaluation as a federated LSA observation model.

    Per agent: sample s ~ pi_c, then s' ~ P_c(s, .); emit the rank-one pair
    A(Z) = phi(s) (phi(s) - lambda phi(s'))^T, b(Z) = r(s) phi(s).  The mean
    pair is Phi^T D (I - lambda P) Phi and Phi^T D r with D = diag(pi).
    """

    kind = "finite-enumerable"
    uniforms_per_draw = 2

    def __init__(self, features, discount, kernels, rewards, stationaries):
        self.features = np.asarray(features, dtype=float)
        self.discount = float(discount)
        self.kernels = [np.asarray(p, dtype=float) for p in kernels]
        self.rewards = [np.asarray(r, dtype=float) for r in rewards]
        self.stationaries = [np.asarray(p, dtype=float) for p in stationaries]
        self.n_agents = len(self.kernels)
        self.dim = self.features.shape[1]
        self._cum_pi = [np.cumsum(p) for p in self.stationaries]
        self._cum_rows = [np.cumsum(p, axis=1) for p in self.kernels]
        self._outcomes = [self._enumerate(c) for c in range(self.n_agents)]
        self.a_sup = max(
            float(max(np.linalg.norm(m, 2) for m in a_all))
            for _, a_all, _ in self._outcomes
        )
        self.eps_sup = self._compute_eps_sup()

    def agent_system(self, c) -> AgentSystem:
        phi = self.features
        d_mat = np.diag(self.stationaries[c])
        a_bar = phi.T @ d_mat @ (np.eye(phi.shape[0]) - self.discount * self.kernels[c]) @ phi
        b_bar = phi.T @ d_mat @ self.rewards[c]
        return AgentSystem(a_bar=a_bar, b_bar=b_bar)

    def build_system(self) -> FederatedSystem:
        return build_federated_system([self.agent_system(c) for c in range(self.n_agents)])

    def _pair(self, c, s, s2):
        phi = self.features
        return (
            np.outer(phi[s], phi[s] - self.discount * phi[s2]),
            self.rewards[c][s] * phi[s],
        )

    def _enumerate(self, c):
        probs, a_all, b_all = [], [], []
        pi = self.stationaries[c]
        kernel = self.kernels[c]
        for s in range(pi.size):
            if pi[s] <= 0.0:
                continue
            for s2 in np.flatnonzero(kernel[s]):
                probs.append(pi[s] * kernel[s, s2])
                a_mat, b_vec = self._pair(c, s, s2)
                a_all.append(a_mat)
                b_all.append(b_vec)
        probs = np.asarray(probs)
        return probs / probs.sum(), np.asarray(a_all), np.asarray(b_all)

    def _compute_eps_sup(self):
        system = self.build_system()
        sup = 0.0
        for c in range(self.n_agents):
            probs, a_all, b_all = self._outcomes[c]
            at = a_all - system.agents[c].a_bar[None, :, :]
            bt = b_all - system.agents[c].b_bar[None, :]
            eps = np.einsum("mij,j->mi", at, system.theta_star_agents[c]) - bt
            sup = max(sup, float(np.max(np.linalg.norm(eps, axis=1))))
        return sup

    def sample(self, agent, u):
        s = int(np.searchsorted(self._cum_pi[agent], u[0], side="right"))
        s = min(s, self._cum_pi[agent].size - 1)
        s2 = int(np.searchsorted(self._cum_rows[agent][s], u[1], side="right"))
        s2 = min(s2, self._cum_rows[agent].shape[1] - 1)
        return self._pair(agent, s, s2)

    def sample_round(self, agent, uniforms):
        n_max = self._cum_pi[agent].size - 1
        s = np.searchsorted(self._cum_pi[agent], uniforms[:, 0], side="right")
        np.minimum(s, n_max, out=s)
        rows = self._cum_rows[agent][s]
        s2 = (uniforms[:, 1][:, None] >= rows).sum(axis=1)
        np.minimum(s2, n_max, out=s2)
        phi = self.features
        left = phi[s]
        right = left - self.discount * phi[s2]
        a_stack = left[:, :, None] * right[:, None, :]
        b_stack = self.rewards[agent][s][:, None] * left
        return a_stack, b_stack

    def outcomes(self, agent):
        return self._outcomes[agent]

    def n_outcomes(self, agent):
        return self._outcomes[agent][0].size


def _unit_rows(gen, n, d):
    phi = gen.standard_normal((n, d))
    return phi / np.linalg.norm(phi, axis=1, keepdims=True)


def td_lsa_model(mdp: Mdp, spec: GarnetSpec, features=None) -> TdLsaModel:
    """Single-agent TD model; resamples features until the mean matrix passes
    the stability check (up to 20 retries)."""
    kernel = mdp.policy_kernel()
    pi = stationary_distribution(kernel)
    for retry in range(HURWITZ_RETRIES):
        phi = (
            features
            if features is not None
            else _unit_rows(env_generator(spec.seed, TAG_FEATURES, salt=retry), mdp.n_states, spec.dim)
        )
        model = TdLsaModel(phi, spec.discount, [kernel], [mdp.rewards], [pi])
        try:
            model.agent_system(0)
            return model
        except UnstableMatrix:
            if features is not None:
                break
    raise HurwitzFailure("no stable feature embedding found")


def garnet_td_federation(spec: GarnetSpec):
    """(FederatedSystem, TdLsaModel) for N perturbed copies of one Garnet MDP.

    All agents share the feature matrix; features are resampled (up to 20
    times) until every agent's mean matrix passes the stability check.  If a
    perturbed chain fails to mix, the whole Garnet is regenerated with a
    bumped seed.
    """
    seed = spec.seed
    for _ in range(HURWITZ_RETRIES):
        base = generate_garnet(dataclasses.replace(spec, seed=seed))
        mdps = [
            perturb_mdp(base, spec.perturb_magnitude, derive_seed(seed, 100 + c))
            for c in range(spec.n_agents)
        ]
        try:
            kernels = [m.policy_kernel() for m in mdps]
            stationaries = [stationary_distribution(k) for k in kernels]
        except NoConvergence:
            seed = derive_seed(seed, 999)
            continue
        rewards = [m.rewards for m in mdps]
        for retry in range(HURWITZ_RETRIES):
            phi = _unit_rows(
                env_generator(seed, TAG_FEATURES, salt=retry), spec.n_states, spec.dim
            )
            model = TdLsaModel(phi, spec.discount, kernels, rewards, stationaries)
            try:
                system = model.build_system()
            except UnstableMatrix:
                continue
            return system, model
        raise HurwitzFailure("no stable feature embedding found after 20 retries")
    raise NoConvergence("could not generate an ergodic Garnet federation")


def synthetic_system(
    d,
    n_agents,
    het_a,
    het_b,
    noise_scale,
    seed,
    skew_scale=0.2,
    mean_shift=1.0,
):
    """Controlled linear federation with tunable heterogeneity.

    The averaged matrix is mean_shift * I plus a small skew-symmetric part
    (eigenvalue real parts stay at mean_shift); per-agent deviations are
    mean-zero across agents so the average is exact.  Observation noise adds
    i.i.d. bounded-uniform entries.  Returns (system, observation model).
    """
    from .engine import SyntheticUniformModel

    gen = env_generator(seed, TAG_SYNTHETIC)
    for _ in range(HURWITZ_RETRIES):
        w = gen.standard_normal((d, d))
        a_avg = mean_shift * np.eye(d) + skew_scale * (w - w.T) / (2.0 * math.sqrt(d))
        b_avg = gen.standard_normal(d)
        dev_a = gen.standard_normal((n_agents, d, d)) / math.sqrt(d)
        dev_a -= dev_a.mean(axis=0, keepdims=True)
        dev_b = gen.standard_normal((n_agents, d))
        dev_b -= dev_b.mean(axis=0, keepdims=True)
        try:
            agents = [
                AgentSystem(
                    a_bar=a_avg + het_a * dev_a[c],
                    b_bar=b_avg + het_b * dev_b[c],
                )
                for c in range(n_agents)
            ]
        except UnstableMatrix:
            continue
        system = build_federated_system(agents)
        return system, SyntheticUniformModel(system, noise_scale)
    raise StabilityFailure("agent perturbations kept violating stability")


@dataclass(frozen=True)
class ToyProcess1d:
    """1-d decaying-step process with multiplicative Gaussian noise around 0.

    Convention: eta_1 = 0 and eta_l = (1+l)^(-gamma) for l >= 2; the scaled
    variance v_t = Var[eta_t^{-1/2} theta_t] is deterministic and computable
    by an O(t) recursion, with limit 1/2.
    """

    gamma: float

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")

    def eta(self, ell: int) -> float:
        return 0.0 if ell == 1 else (1.0 + ell) ** (-self.gamma)

    def variance(self, t: int) -> float:
        return toy_variance(self.gamma, t)


def toy_variance(gamma: float, t: int) -> float:
    """v_t via the running sum S_t = (1-eta_t)^2 S_{t-1} + eta_t^2, v_t = S_t/eta_t."""
    return toy_variance_path(gamma, [t])[int(t)]


def toy_variance_path(gamma: float, rounds) -> dict:
    """v_t at each requested t >= 2, from a single O(max t) sweep."""
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    rounds = sorted(set(int(t) for t in rounds))
    if rounds[0] < 2:
        raise ValueError("the scaled variance needs t >= 2 (eta_1 = 0)")
    out = {}
    want = set(rounds)
    s_run = 0.0  # eta_1 = 0 contributes nothing
    for ell in range(2, rounds[-1] + 1):
        eta = (1.0 + ell) ** (-gamma)
        one_minus = 1.0 - eta
        s_run = one_minus * one_minus * s_run + eta * eta
        if ell in want:
            out[ell] = s_run / eta
    return out
