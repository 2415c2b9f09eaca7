"""Task families: parameter draws, per-task safety boxes, init-state boxes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ContractViolation
from ..projection import SafetyConstraint
from .systems import CartPole, Quadrotor, SimpleMass, SystemParams, anchor_policy

DOMAINS = ("simple_mass", "cart_pole", "quadrotor")

# Default action clip per domain (force N / rotor-speed units).
DEFAULT_U_MAX = {"simple_mass": 10.0, "cart_pole": 10.0, "quadrotor": 100.0}

# Guard bound on the feature norm; rollouts that stay finite but wander past
# this are treated as invariant violations by the feature map.
DEFAULT_PHI_MAX = 100.0

_INIT_BOX = {
    "simple_mass": ([-0.5, -0.5], [0.5, 0.5]),
    "cart_pole": ([-0.2, -0.2, -0.15, -0.2], [0.2, 0.2, 0.15, 0.2]),
    "quadrotor": ([-0.15] * 3 + [-0.3] * 3, [0.15] * 3 + [0.3] * 3),
}

QUAD_NOMINAL_INERTIA = (7.5e-3, 7.5e-3, 1.3e-2)


@dataclass
class TaskSpec:
    """One MDP instance: system, safety box, noise level, episode shape."""

    task_id: int
    system: SystemParams
    constraint: SafetyConstraint | None
    sigma: float
    horizon: int
    dt: float
    u_max: float
    init_lo: np.ndarray = field(default=None)  # type: ignore[assignment]
    init_hi: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.horizon < 1:
            raise ContractViolation("horizon must be >= 1")
        if self.sigma <= 0.0:
            raise ContractViolation("sigma must be positive")
        if self.dt <= 0.0:
            raise ContractViolation("dt must be positive")
        nx = self.system.state_dim
        if self.init_lo is None:
            self.init_lo = np.zeros(nx)
        if self.init_hi is None:
            self.init_hi = np.zeros(nx)
        self.init_lo = np.asarray(self.init_lo, dtype=float)
        self.init_hi = np.asarray(self.init_hi, dtype=float)

    @property
    def policy_dim(self) -> int:
        return (self.system.state_dim + 1) * self.system.action_dim


def domain_dims(domain: str) -> tuple[int, int, int]:
    """(state_dim, action_dim, policy_dim) for a domain tag."""
    if domain == "simple_mass":
        nx, da = 2, 1
    elif domain == "cart_pole":
        nx, da = 4, 1
    elif domain == "quadrotor":
        nx, da = 6, 4
    else:
        raise ConfigError(f"unknown domain {domain!r}")
    return nx, da, (nx + 1) * da


def _draw_system(domain: str, rng: np.random.Generator) -> SystemParams:
    if domain == "simple_mass":
        return SimpleMass(
            spring_k=rng.uniform(1.0, 10.0),
            damping_d=rng.uniform(0.1, 1.0),
            mass_m=rng.uniform(0.5, 5.0),
            goal=(1.0, 0.0),
        )
    if domain == "cart_pole":
        return CartPole(
            cart_mass=rng.uniform(0.5, 2.0),
            pole_mass=rng.uniform(0.05, 0.5),
            pole_length=rng.uniform(0.3, 1.0),
            damping=rng.uniform(0.05, 0.5),
        )
    if domain == "quadrotor":
        lo, hi = 0.5, 1.5
        nom = QUAD_NOMINAL_INERTIA
        return Quadrotor(
            inertia_xx=nom[0] * rng.uniform(lo, hi),
            inertia_yy=nom[1] * rng.uniform(lo, hi),
            inertia_zz=nom[2] * rng.uniform(lo, hi),
        )
    raise ConfigError(f"unknown domain {domain!r}")


def _seed_constraint(system: SystemParams, halfwidth: float, center_scale: float,
                     n_constrained: int) -> SafetyConstraint:
    """Axis-aligned box rows around a scaled LQR anchor policy.

    Each constrained coordinate gets a +/- row pair (a closed interval around
    the anchor) as long as the d-row budget allows; remaining rows are zero
    with b_i = 0, so their slack is exactly zero.
    """
    d = (system.state_dim + 1) * system.action_dim
    anchor = anchor_policy(system)
    rows = []
    for coord in range(n_constrained):
        rows.append((coord, 1.0))
        rows.append((coord, -1.0))
    rows = rows[:d]
    A = np.zeros((d, d))
    b = np.zeros(d)
    for i, (coord, sign) in enumerate(rows):
        center = center_scale * anchor[coord]
        A[i, coord] = sign
        b[i] = sign * center + halfwidth
    return SafetyConstraint(A=A, b=b)


def generate_tasks(domain: str, count: int, rng: np.random.Generator, *,
                   sigma: float = 0.1, horizon: int = 150, dt: float = 0.01,
                   u_max: float | None = None,
                   constraint_halfwidth: float = 0.5,
                   constraint_center_scale: float = 0.3,
                   n_constrained: int = 2) -> list[TaskSpec]:
    """Draw `count` tasks with documented parameter ranges and safety boxes."""
    if count < 1:
        raise ContractViolation("count must be >= 1")
    if domain not in DOMAINS:
        raise ConfigError(f"unknown domain {domain!r}")
    if u_max is None:
        u_max = DEFAULT_U_MAX[domain]
    lo, hi = _INIT_BOX[domain]
    tasks = []
    for tid in range(count):
        system = _draw_system(domain, rng)
        constraint = _seed_constraint(system, constraint_halfwidth,
                                      constraint_center_scale, n_constrained)
        tasks.append(TaskSpec(
            task_id=tid, system=system, constraint=constraint, sigma=sigma,
            horizon=horizon, dt=dt, u_max=u_max,
            init_lo=np.array(lo), init_hi=np.array(hi)))
    return tasks
