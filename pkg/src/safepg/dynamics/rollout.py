"""Trajectories and stochastic rollouts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from ..errors import ContractViolation, DivergedTrajectory
from . import engine

if TYPE_CHECKING:
    from ..policy import GaussianPolicy
    from .tasks import TaskSpec


@dataclass
class Trajectory:
    """One episode: M+1 states, M actions, M per-step costs."""

    states: np.ndarray
    actions: np.ndarray
    costs: np.ndarray

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.actions = np.asarray(self.actions, dtype=float)
        self.costs = np.asarray(self.costs, dtype=float)
        if self.actions.ndim == 1:
            self.actions = self.actions[:, None]
        M = self.actions.shape[0]
        if self.states.shape[0] != M + 1 or self.costs.shape[0] != M:
            raise ContractViolation("trajectory lengths inconsistent")

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]


def trajectory_cost(traj: Trajectory) -> float:
    """Mean per-step cost C(tau)."""
    if traj.costs.size == 0:
        raise ContractViolation("empty trajectory has no cost")
    return float(np.mean(traj.costs))


def rollout(task: "TaskSpec", policy: "GaussianPolicy", rng: np.random.Generator) -> Trajectory:
    """Roll the policy out for task.horizon steps; reproducible from the rng.

    Draws the initial state from the task's init box, then one Gaussian noise
    row per step; actions are mean + sigma*noise, clipped to [-u_max, u_max].
    """
    system = task.system
    expected_d = (system.state_dim + 1) * system.action_dim
    if policy.alpha.shape != (expected_d,):
        raise ContractViolation(
            f"policy dimension {policy.alpha.shape} does not match task ({expected_d},)")
    x0 = rng.uniform(task.init_lo, task.init_hi)
    noise = rng.standard_normal((task.horizon, system.action_dim))
    states, actions, costs, diverged = engine.run_kernel(
        system, x0, policy.alpha, policy.sigma, noise, task.u_max, task.dt)
    if diverged >= 0:
        raise DivergedTrajectory(diverged)
    return Trajectory(states=states, actions=actions, costs=costs)
