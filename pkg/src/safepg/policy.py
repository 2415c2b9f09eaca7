"""Gaussian linear-in-features policies and their episodic learners.

A policy's mean action is alpha^T Phi(x) per action dimension (diagonal
covariance sigma^2). Losses are negative per-trajectory sums of log
likelihoods averaged over the batch; everything reduces to quadratic
sufficient statistics of (features, actions), which `BatchStats` caches so
that batch-level and history-level computations share one code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .errors import ContractViolation, InvariantViolation, NumericalFailure

if TYPE_CHECKING:
    from .dynamics.rollout import Trajectory
    from .dynamics.tasks import TaskSpec
    from .projection import SafetyConstraint

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class FeatureMap:
    """State features of fixed dimension with a declared norm cap."""

    dphi: int
    phi_max: float
    fn: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, state: np.ndarray) -> np.ndarray:
        phi = self._raw(np.asarray(state, dtype=float))
        nrm = float(np.linalg.norm(phi))
        if nrm > self.phi_max:
            raise InvariantViolation(
                f"feature norm {nrm:.3g} exceeds declared bound {self.phi_max:.3g}")
        return phi

    def _raw(self, state: np.ndarray) -> np.ndarray:
        if self.fn is not None:
            phi = np.asarray(self.fn(state), dtype=float)
        else:
            phi = np.concatenate([state, [1.0]])
        if phi.shape != (self.dphi,):
            raise ContractViolation("feature dimension mismatch")
        return phi

    def matrix(self, states: np.ndarray) -> np.ndarray:
        """Features for a stack of states, shape (n, dphi); checks the cap."""
        states = np.asarray(states, dtype=float)
        if self.fn is not None:
            out = np.stack([self._raw(s) for s in states])
        else:
            out = np.hstack([states, np.ones((states.shape[0], 1))])
        worst = float(np.sqrt(np.max(np.sum(out * out, axis=1))))
        if worst > self.phi_max:
            raise InvariantViolation(
                f"feature norm {worst:.3g} exceeds declared bound {self.phi_max:.3g}")
        return out


def raw_state_features(state_dim: int, phi_max: float = 100.0) -> FeatureMap:
    """Raw state plus constant bias."""
    return FeatureMap(dphi=state_dim + 1, phi_max=phi_max)


@dataclass
class GaussianPolicy:
    """alpha stacked per action dimension (d = dphi * d_a), fixed stddev."""

    alpha: np.ndarray
    sigma: float
    d_a: int = 1

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        if not np.all(np.isfinite(self.alpha)):
            raise ContractViolation("alpha must be finite")
        if self.sigma <= 0.0:
            raise ContractViolation("sigma must be positive")
        if self.alpha.size % self.d_a != 0:
            raise ContractViolation("alpha length must split into d_a blocks")

    @property
    def d(self) -> int:
        return self.alpha.size

    @property
    def dphi(self) -> int:
        return self.alpha.size // self.d_a

    def blocks(self) -> np.ndarray:
        return self.alpha.reshape(self.d_a, self.dphi)

    def mean(self, x: np.ndarray, fmap: FeatureMap) -> np.ndarray:
        return self.blocks() @ fmap(x)


@dataclass
class PGGradient:
    """A gradient estimate, optionally with an empirical Fisher matrix."""

    grad: np.ndarray
    fisher: np.ndarray | None = None

    def __post_init__(self):
        self.grad = np.asarray(self.grad, dtype=float)
        if self.fisher is not None:
            self.fisher = np.asarray(self.fisher, dtype=float)
            if np.max(np.abs(self.fisher - self.fisher.T)) > 1e-10:
                raise ContractViolation("fisher must be symmetric")
            if np.linalg.eigvalsh(self.fisher)[0] < -1e-10:
                raise ContractViolation("fisher must be PSD")


# --- sufficient statistics ----------------------------------------------------

@dataclass
class BatchStats:
    """Weighted quadratic statistics of a trajectory batch.

    Every (step, action-dimension) pair is one scalar sample with features
    Phi(x); G and H are feature Gram / action-feature sums, u2 the squared
    action mass. Weights are per-trajectory (all ones unless given).
    """

    G: np.ndarray          # (dphi, dphi)
    H: np.ndarray          # (d_a, dphi)
    u2: float
    wsum: float
    n: int
    M: int
    d_a: int
    phi_max_obs: float
    u_max_obs: float

    @property
    def dphi(self) -> int:
        return self.G.shape[0]

    @property
    def d(self) -> int:
        return self.dphi * self.d_a

    def gram_full(self) -> np.ndarray:
        """Block-diagonal feature Gram in stacked coordinates (d x d)."""
        return np.kron(np.eye(self.d_a), self.G)

    def h_full(self) -> np.ndarray:
        return self.H.reshape(-1)


def batch_stats(trajectories: Sequence["Trajectory"], fmap: FeatureMap,
                weights: np.ndarray | None = None) -> BatchStats:
    if len(trajectories) == 0:
        raise ContractViolation("empty trajectory batch")
    n = len(trajectories)
    if weights is None:
        weights = np.ones(n)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n,):
        raise ContractViolation("weights must have one entry per trajectory")
    d_a = trajectories[0].actions.shape[1]
    M = trajectories[0].horizon
    dphi = fmap.dphi
    G = np.zeros((dphi, dphi))
    H = np.zeros((d_a, dphi))
    u2 = 0.0
    phi_max_obs = 0.0
    u_max_obs = 0.0
    for traj, w in zip(trajectories, weights):
        if traj.horizon != M or traj.actions.shape[1] != d_a:
            raise ContractViolation("inconsistent trajectory shapes in batch")
        PHI = fmap.matrix(traj.states[:-1])
        U = traj.actions
        G += w * (PHI.T @ PHI)
        H += w * (U.T @ PHI)
        u2 += w * float(np.sum(U * U))
        phi_max_obs = max(phi_max_obs, float(np.sqrt(np.max(np.sum(PHI * PHI, axis=1)))))
        u_max_obs = max(u_max_obs, float(np.max(np.abs(U))))
    return BatchStats(G=G, H=H, u2=u2, wsum=float(weights.sum()), n=n, M=M,
                      d_a=d_a, phi_max_obs=phi_max_obs, u_max_obs=u_max_obs)


def stats_loss(stats: BatchStats, alpha: np.ndarray, sigma: float) -> float:
    """Negative mean summed log likelihood, evaluated from the statistics."""
    if sigma <= 0.0:
        raise ContractViolation("sigma must be positive")
    A = np.asarray(alpha, dtype=float).reshape(stats.d_a, stats.dphi)
    quad = stats.u2
    quad -= 2.0 * float(np.sum(A * stats.H))
    quad += float(np.sum(A * (A @ stats.G.T)))
    const = 0.5 * (LOG_2PI + 2.0 * math.log(sigma)) * stats.M * stats.d_a \
        * stats.wsum / stats.n
    return const + quad / (2.0 * sigma * sigma * stats.n)


def stats_grad(stats: BatchStats, alpha: np.ndarray, sigma: float) -> np.ndarray:
    """Gradient of stats_loss w.r.t. alpha (residual form)."""
    A = np.asarray(alpha, dtype=float).reshape(stats.d_a, stats.dphi)
    out = -(stats.H - A @ stats.G.T) / (sigma * sigma * stats.n)
    return out.reshape(-1)


def stats_fisher(stats: BatchStats, sigma: float) -> np.ndarray:
    """Empirical Fisher (1/(n sigma^2)) sum Phi Phi^T per action block."""
    return stats.gram_full() / (stats.n * sigma * sigma)


# --- public batch operations --------------------------------------------------

def log_pi(policy: GaussianPolicy, u: np.ndarray, x: np.ndarray,
           fmap: FeatureMap) -> float:
    """Log density of the diagonal Gaussian policy at (u | x)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (policy.d_a,):
        raise ContractViolation("action dimension mismatch")
    mean = policy.mean(x, fmap)
    resid = u - mean
    s2 = policy.sigma * policy.sigma
    return float(-0.5 * policy.d_a * (LOG_2PI + math.log(s2))
                 - float(resid @ resid) / (2.0 * s2))


def task_loss(policy: GaussianPolicy, trajectories: Sequence["Trajectory"],
              fmap: FeatureMap) -> float:
    """-(1/n) sum_k sum_m log pi(u | x)."""
    stats = batch_stats(trajectories, fmap)
    return stats_loss(stats, policy.alpha, policy.sigma)


def grad_alpha_loss(policy: GaussianPolicy, trajectories: Sequence["Trajectory"],
                    fmap: FeatureMap) -> np.ndarray:
    stats = batch_stats(trajectories, fmap)
    return stats_grad(stats, policy.alpha, policy.sigma)


def fisher_matrix(policy: GaussianPolicy, trajectories: Sequence["Trajectory"],
                  fmap: FeatureMap) -> np.ndarray:
    stats = batch_stats(trajectories, fmap)
    return stats_fisher(stats, policy.sigma)


def base_learner_step(kind: str, alpha: np.ndarray, gradient: PGGradient,
                      rate: float) -> np.ndarray:
    """One base-learner update: plain gradient (eREINFORCE) or natural (eNAC)."""
    if rate <= 0.0:
        raise ContractViolation("rate must be positive")
    alpha = np.asarray(alpha, dtype=float)
    if kind == "eREINFORCE":
        return alpha - rate * gradient.grad
    if kind == "eNAC":
        if gradient.fisher is None:
            raise ContractViolation("eNAC requires a Fisher matrix")
        F = gradient.fisher
        eps = 1e-6 * float(np.trace(F)) / F.shape[0]
        try:
            step = np.linalg.solve(F + max(eps, 1e-300) * np.eye(F.shape[0]),
                                   gradient.grad)
        except np.linalg.LinAlgError as err:
            raise NumericalFailure("singular Fisher beyond regularization") from err
        if not np.all(np.isfinite(step)):
            raise NumericalFailure("singular Fisher beyond regularization")
        return alpha - rate * step
    raise ContractViolation(f"unknown base learner kind {kind!r}")


def rwr_weights(costs: np.ndarray) -> np.ndarray:
    """Exponentiated-advantage trajectory weights, normalized to sum n.

    Nonnegative by construction, so every convexity property of the
    unweighted likelihood objective is preserved.
    """
    costs = np.asarray(costs, dtype=float)
    n = costs.size
    spread = float(np.std(costs))
    if spread <= 1e-12:
        return np.ones(n)
    w = np.exp(-(costs - costs.min()) / spread)
    return w * (n / w.sum())


@dataclass
class GradBound:
    """Numeric gradient-norm bound with rank-deficiency metadata."""

    value: float
    rank_deficient_tasks: list[int] = field(default_factory=list)

    def __float__(self) -> float:
        return self.value


def lemma1_grad_bound(task: "TaskSpec", constraints_so_far: dict[int, "SafetyConstraint"],
                      u_max: float, phi_max: float, c_max: float) -> GradBound:
    """(M/sigma^2) * [(u_max + max_t ||A^+||(||b|| + c_max) * Phi_max) * Phi_max].

    The max runs over the tasks observed so far. Rank-deficient constraint
    matrices are reported in the result; the bound still uses their
    cutoff pseudo-inverses.
    """
    maxterm = 0.0
    deficient = []
    for t, con in constraints_so_far.items():
        maxterm = max(maxterm, con.pinv_norm * (con.b_norm + c_max))
        if not con.full_rank:
            deficient.append(int(t))
    value = (task.horizon / (task.sigma ** 2)) * (
        (u_max + maxterm * phi_max) * phi_max)
    return GradBound(value=float(value), rank_deficient_tasks=sorted(deficient))
