"""Benchmark systems, task generation, and trajectory rollouts."""

from .engine import COMPILED, active_engine_name, run_kernel
from .rollout import Trajectory, rollout, trajectory_cost
from .systems import (CartPole, Quadrotor, SimpleMass, SystemParams,
                      anchor_policy, goal_state, linearized_matrices, lqr_gain,
                      step, step_cost)
from .tasks import (DEFAULT_PHI_MAX, DEFAULT_U_MAX, DOMAINS, TaskSpec,
                    domain_dims, generate_tasks)

__all__ = [
    "COMPILED", "active_engine_name", "run_kernel",
    "Trajectory", "rollout", "trajectory_cost",
    "CartPole", "Quadrotor", "SimpleMass", "SystemParams",
    "anchor_policy", "goal_state", "linearized_matrices", "lqr_gain",
    "step", "step_cost",
    "DEFAULT_PHI_MAX", "DEFAULT_U_MAX", "DOMAINS", "TaskSpec",
    "domain_dims", "generate_tasks",
]
