"""Federated LSA simulator with coupled multiplier-bootstrap replay.

Each round t broadcasts the global iterate, runs H_t local stochastic
updates per agent, and averages.  Bootstrap replicates follow the same
recursion with i.i.d. mean-1 variance-1 weights on every local update,
consuming the *identical* data stream as the base run via counter-addressed
draws (no sample storage).

The base iterate and all replicates advance as rows of one state matrix
(base = row 0 with weight fixed to 1), so a replicate with weights
identically 1 reproduces the base trajectory bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .model import FederatedSystem, NoiseMoments, _freeze
from .schedule import Schedule
from .streams import (
    NoiseStreamKey,
    draw_digest,
    round_uniforms,
    sample_weight,
    weight_bounds,
    weight_matrix,
)

DIVERGENCE_LIMIT = 1e12

__all__ = [
    "DIVERGENCE_LIMIT",
    "ZeroNoiseModel",
    "FiniteOutcomeModel",
    "SyntheticUniformModel",
    "Trajectory",
    "BootstrapEnsemble",
    "WeightSpec",
    "PluginAccumulator",
    "Snapshot",
    "SimulationResult",
    "simulate",
    "run_fedlsa",
    "run_bootstrap_ensemble",
    "NoiseStreamKey",
    "sample_weight",
    "trajectory_to_csv",
]


# --------------------------------------------------------------------------
# observation models
#
# A model exposes: kind, n_agents, dim, uniforms_per_draw, eps_sup, a_sup,
# sample_round(agent, U) -> (A (H,d,d), b (H,d)); finite models additionally
# expose outcomes(agent) -> (probs, A_all, b_all).


class ZeroNoiseModel:
    """Degenerate model: every draw returns the agent's mean pair."""

    kind = "finite-enumerable"
    uniforms_per_draw = 1

    def __init__(self, system: FederatedSystem):
        self._a = [ag.a_bar for ag in system.agents]
        self._b = [ag.b_bar for ag in system.agents]
        self.n_agents = system.n_agents
        self.dim = system.dim
        self.eps_sup = 0.0
        self.a_sup = max(float(np.linalg.norm(a, 2)) for a in self._a)

    def sample(self, agent, u):
        return self._a[agent], self._b[agent]

    def sample_round(self, agent, uniforms):
        h = uniforms.shape[0]
        return (
            np.broadcast_to(self._a[agent], (h, self.dim, self.dim)),
            np.broadcast_to(self._b[agent], (h, self.dim)),
        )

    def outcomes(self, agent):
        return (
            np.ones(1),
            self._a[agent][None, :, :],
            self._b[agent][None, :],
        )

    def n_outcomes(self, agent):
        return 1


class FiniteOutcomeModel:
    """Explicit finite outcome tables per agent, sampled by inverse CDF."""

    kind = "finite-enumerable"
    uniforms_per_draw = 1

    def __init__(self, tables):
        """tables: per agent a (probs, A_all, b_all) triple; probs sum to 1."""
        self._probs, self._a, self._b, self._cum = [], [], [], []
        for probs, a_all, b_all in tables:
            probs = np.asarray(probs, dtype=float)
            a_all = np.asarray(a_all, dtype=float)
            b_all = np.asarray(b_all, dtype=float)
            if not np.isclose(probs.sum(), 1.0, atol=1e-12):
                raise ValueError("outcome probabilities must sum to 1")
            self._probs.append(probs)
            self._a.append(a_all)
            self._b.append(b_all)
            self._cum.append(np.cumsum(probs))
        self.n_agents = len(self._probs)
        self.dim = self._a[0].shape[1]
        self.a_sup = max(
            float(max(np.linalg.norm(m, 2) for m in a_all)) for a_all in self._a
        )
        self.eps_sup = self._compute_eps_sup()

    def _mean_pair(self, agent):
        p = self._probs[agent]
        return (
            np.einsum("m,mij->ij", p, self._a[agent]),
            np.einsum("m,mi->i", p, self._b[agent]),
        )

    def induced_agents(self):
        from .model import AgentSystem

        return [AgentSystem(*self._mean_pair(c)) for c in range(self.n_agents)]

    def _compute_eps_sup(self):
        from .model import build_federated_system

        system = build_federated_system(self.induced_agents())
        sup = 0.0
        for c in range(self.n_agents):
            a_mean, b_mean = system.agents[c].a_bar, system.agents[c].b_bar
            at = self._a[c] - a_mean
            bt = self._b[c] - b_mean
            eps = np.einsum("mij,j->mi", at, system.theta_star_agents[c]) - bt
            sup = max(sup, float(np.max(np.linalg.norm(eps, axis=1))))
        return sup

    def sample(self, agent, u):
        idx = int(np.searchsorted(self._cum[agent], u[0], side="right"))
        idx = min(idx, len(self._probs[agent]) - 1)
        return self._a[agent][idx], self._b[agent][idx]

    def sample_round(self, agent, uniforms):
        idx = np.searchsorted(self._cum[agent], uniforms[:, 0], side="right")
        np.minimum(idx, len(self._probs[agent]) - 1, out=idx)
        return self._a[agent][idx], self._b[agent][idx]

    def outcomes(self, agent):
        return self._probs[agent], self._a[agent], self._b[agent]

    def n_outcomes(self, agent):
        return len(self._probs[agent])


class SyntheticUniformModel:
    """Bounded continuous noise: i.i.d. uniform entries on [-scale, scale]
    added to the mean pair.  Moments are available in closed form."""

    kind = "synthetic-bounded"

    def __init__(self, system: FederatedSystem, noise_scale: float):
        self._a = [ag.a_bar for ag in system.agents]
        self._b = [ag.b_bar for ag in system.agents]
        self.n_agents = system.n_agents
        self.dim = system.dim
        self.noise_scale = float(noise_scale)
        self.uniforms_per_draw = self.dim * self.dim + self.dim
        d, s = self.dim, self.noise_scale
        theta_l1 = max(float(np.sum(np.abs(th))) for th in system.theta_star_agents)
        self.eps_sup = s * np.sqrt(d) * (theta_l1 + 1.0)
        self.a_sup = max(float(np.linalg.norm(a, 2)) for a in self._a) + s * d

    def sample(self, agent, u):
        a_mat, b_vec = self.sample_round(agent, u[None, :])
        return a_mat[0], b_vec[0]

    def sample_round(self, agent, uniforms):
        h = uniforms.shape[0]
        d, s = self.dim, self.noise_scale
        at = s * (2.0 * uniforms[:, : d * d] - 1.0).reshape(h, d, d)
        bt = s * (2.0 * uniforms[:, d * d :] - 1.0)
        return self._a[agent] + at, self._b[agent] + bt

    def _variance(self):
        # each noise entry is uniform on [-s, s]: variance s^2/3
        return self.noise_scale**2 / 3.0

    def analytic_noise_moments(self, system) -> NoiseMoments:
        d, v = self.dim, self._variance()
        eye = np.eye(d)
        sig_eps = tuple(
            _freeze(v * (1.0 + float(th @ th)) * eye)
            for th in system.theta_star_agents
        )
        sig_a = tuple(_freeze(v * d * eye) for _ in range(self.n_agents))
        star = v * (1.0 + float(system.theta_star @ system.theta_star)) * eye
        return NoiseMoments(
            sigma_eps=sig_eps,
            sigma_A=sig_a,
            sigma_star_avg=_freeze(star),
            eps_sup=self.eps_sup,
            a_sup=self.a_sup,
        )

    def analytic_pairwise_moments(self, system, agent):
        """(sigma_eps, cross, het) for the heterogeneity-aware covariance:
        cross = E[eps (A~ delta)^T], het = E[(A~ delta)(A~ delta)^T]."""
        d, v = self.dim, self._variance()
        eye = np.eye(d)
        th = system.theta_star_agents[agent]
        delta = th - system.theta_star
        sigma_eps = v * (1.0 + float(th @ th)) * eye
        cross = v * float(th @ delta) * eye
        het = v * float(delta @ delta) * eye
        return sigma_eps, cross, het


# --------------------------------------------------------------------------
# run records


@dataclass(frozen=True)
class Trajectory:
    """Recorded global iterates theta_0..theta_T (truncated if diverged)."""

    theta: np.ndarray  # (T+1, d) or shorter when diverged
    schedule: Schedule
    seed: int
    diverged: bool = False

    @property
    def final(self) -> np.ndarray:
        return self.theta[-1]

    @property
    def n_rounds(self) -> int:
        return self.theta.shape[0] - 1


@dataclass(frozen=True)
class WeightSpec:
    distribution: str
    w_min: float
    w_max: float


@dataclass(frozen=True)
class BootstrapEnsemble:
    base: Trajectory
    finals: np.ndarray  # (n_replicates, d) final iterates
    alive: np.ndarray  # (n_replicates,) bool, False where diverged
    weight_spec: WeightSpec
    weight_seed: int
    replicate_paths: np.ndarray | None = None  # (T+1, n_replicates, d) if recorded

    @property
    def n_dropped(self) -> int:
        return int(np.sum(~self.alive))

    def surviving_finals(self) -> np.ndarray:
        return self.finals[self.alive]


@dataclass
class PluginAccumulator:
    """Running sums for the data-driven covariance estimate."""

    sum_a: np.ndarray
    sum_outer: np.ndarray
    n_terms: int

    def copy(self):
        return PluginAccumulator(self.sum_a.copy(), self.sum_outer.copy(), self.n_terms)


@dataclass(frozen=True)
class Snapshot:
    round: int
    theta: np.ndarray
    replicate_finals: np.ndarray
    alive: np.ndarray
    plugin: PluginAccumulator | None
    eta: float


@dataclass
class SimulationResult:
    snapshots: dict
    path: np.ndarray | None
    diverged_at: int | None
    replicate_paths: np.ndarray | None = None

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None


# --------------------------------------------------------------------------
# core loop


def simulate(
    system: FederatedSystem,
    model,
    sched: Schedule,
    checkpoints,
    theta0,
    seed,
    n_replicates=0,
    weight_seed=0,
    weight_distribution="normalized-beta",
    collect_plugin=False,
    plugin_centered=False,
    record_path=False,
    record_replicate_paths=False,
    draw_log=None,
) -> SimulationResult:
    """Advance base and replicates jointly, snapshotting at each checkpoint.

    Data draws are addressed by (seed, t, h, c) on the data channel; weights
    by (weight_seed, t, h, c, replicate) on the bootstrap-weight channel.
    Agents are reduced in ascending order, so results are independent of any
    external parallelism.
    """
    theta0 = np.asarray(theta0, dtype=float)
    d, n_agents = system.dim, system.n_agents
    if theta0.shape != (d,):
        raise DimensionMismatch(f"theta0 shape {theta0.shape}, expected ({d},)")
    if model.n_agents != n_agents or model.dim != d:
        raise DimensionMismatch("model and system disagree on shape")
    checkpoints = sorted(set(int(t) for t in checkpoints))
    if checkpoints and checkpoints[0] < 1:
        raise ValueError("checkpoints must be rounds >= 1")
    t_max = checkpoints[-1] if checkpoints else 0

    rows = 1 + n_replicates
    state = np.tile(theta0, (rows, 1))
    alive = np.ones(n_replicates, dtype=bool)
    per_draw = model.uniforms_per_draw
    path = np.empty((t_max + 1, d)) if record_path else None
    if record_path:
        path[0] = theta0
    rep_paths = None
    if record_replicate_paths and n_replicates:
        rep_paths = np.empty((t_max + 1, n_replicates, d))
        rep_paths[0] = state[1:]
    plugin = (
        PluginAccumulator(np.zeros((d, d)), np.zeros((d, d)), 0)
        if collect_plugin
        else None
    )

    snapshots = {}
    diverged_at = None
    remaining = list(checkpoints)

    a_bars = np.stack([ag.a_bar for ag in system.agents])
    b_bars = np.stack([ag.b_bar for ag in system.agents])

    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, t_max + 1):
            eta = sched.step_size(t)
            h_count = sched.local_steps(t)
            theta_prev = state[0].copy()

            # draw the whole round for every agent, then advance all agents'
            # local chains with one batched matmul per local step
            a_t = np.empty((n_agents, h_count, d, d))
            b_t = np.empty((n_agents, h_count, d))
            for c in range(n_agents):
                uniforms = round_uniforms(seed, "data", t, c, h_count, per_draw)
                a_stack, b_stack = model.sample_round(c, uniforms)
                a_t[c] = a_stack
                b_t[c] = b_stack
                if draw_log is not None:
                    for h in range(h_count):
                        draw_log.append(((seed, t, h, c, "data"), draw_digest(uniforms[h])))
            a_trans = np.ascontiguousarray(a_t.transpose(0, 1, 3, 2))
            if n_replicates:
                scale = np.empty((n_agents, h_count, rows, 1))
                scale[:, :, 0, 0] = eta
                for c in range(n_agents):
                    scale[c, :, 1:, 0] = eta * weight_matrix(
                        weight_seed, t, c, h_count, n_replicates, weight_distribution
                    )
            local = np.broadcast_to(state, (n_agents, rows, d)).copy()
            resid = np.empty_like(local)
            if n_replicates:
                for h in range(h_count):
                    np.matmul(local, a_trans[:, h], out=resid)
                    resid -= b_t[:, h][:, None, :]
                    resid *= scale[:, h]
                    local -= resid
            else:
                for h in range(h_count):
                    np.matmul(local, a_trans[:, h], out=resid)
                    resid -= b_t[:, h][:, None, :]
                    resid *= eta
                    local -= resid
            state = local.sum(axis=0) / n_agents

            if collect_plugin:
                plugin.sum_a += a_t.sum(axis=(0, 1))
                if plugin_centered:
                    err = (a_t - a_bars[:, None]) @ theta_prev - (b_t - b_bars[:, None])
                else:
                    err = a_t @ theta_prev - b_t
                err = err.reshape(-1, d)
                plugin.sum_outer += err.T @ err
                plugin.n_terms += h_count * n_agents

            base_bad = not np.all(np.isfinite(state[0])) or (
                float(np.abs(state[0]).max()) > DIVERGENCE_LIMIT
            )
            if base_bad:
                diverged_at = t
                if record_path:
                    path = path[:t]
                if rep_paths is not None:
                    rep_paths = rep_paths[:t]
                break
            if n_replicates:
                reps = state[1:]
                ok = np.all(np.isfinite(reps), axis=1) & (
                    np.abs(reps).max(axis=1) <= DIVERGENCE_LIMIT
                )
                newly_dead = alive & ~ok
                if newly_dead.any():
                    alive = alive & ok
                    reps[~alive] = 0.0
            if record_path:
                path[t] = state[0]
            if rep_paths is not None:
                rep_paths[t] = state[1:]
            if remaining and t == remaining[0]:
                remaining.pop(0)
                snapshots[t] = Snapshot(
                    round=t,
                    theta=state[0].copy(),
                    replicate_finals=state[1:].copy(),
                    alive=alive.copy(),
                    plugin=plugin.copy() if plugin is not None else None,
                    eta=eta,
                )

    return SimulationResult(
        snapshots=snapshots,
        path=path,
        diverged_at=diverged_at,
        replicate_paths=rep_paths,
    )


def run_fedlsa(system, model, sched, n_rounds, theta0, seed) -> Trajectory:
    """Plain FedLSA run recording the full global-iterate trajectory."""
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    result = simulate(
        system, model, sched, [n_rounds], theta0, seed, record_path=True
    )
    return Trajectory(
        theta=result.path, schedule=sched, seed=seed, diverged=result.diverged
    )


def run_bootstrap_ensemble(
    system,
    model,
    sched,
    n_rounds,
    theta0,
    seed,
    n_replicates,
    weight_seed,
    weight_distribution="normalized-beta",
    record_replicate_paths=False,
) -> BootstrapEnsemble:
    """Coupled bootstrap run: replicates replay the base run's data stream."""
    if n_replicates < 1:
        raise ValueError("n_replicates must be >= 1")
    result = simulate(
        system,
        model,
        sched,
        [n_rounds],
        theta0,
        seed,
        n_replicates=n_replicates,
        weight_seed=weight_seed,
        weight_distribution=weight_distribution,
        record_path=True,
        record_replicate_paths=record_replicate_paths,
    )
    w_min, w_max = weight_bounds(weight_distribution)
    base = Trajectory(
        theta=result.path, schedule=sched, seed=seed, diverged=result.diverged
    )
    if result.diverged:
        finals = np.full((n_replicates, system.dim), np.nan)
        alive = np.zeros(n_replicates, dtype=bool)
    else:
        snap = result.snapshots[n_rounds]
        finals, alive = snap.replicate_finals, snap.alive
    return BootstrapEnsemble(
        base=base,
        finals=finals,
        alive=alive,
        weight_spec=WeightSpec(weight_distribution, w_min, w_max),
        weight_seed=weight_seed,
        replicate_paths=result.replicate_paths,
    )


def trajectory_to_csv(trajectory: Trajectory, path) -> None:
    """Columns: t, theta_0..theta_{d-1}."""
    d = trajectory.theta.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["t"] + [f"theta_{j}" for j in range(d)])
        for t, row in enumerate(trajectory.theta):
            writer.writerow([t] + [repr(x) for x in row])
