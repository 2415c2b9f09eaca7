"""Benchmark dynamical systems: parameters, one-step physics, linearizations.

Three systems are modelled: a spring-mass-damper driven by a linear force, a
cart-pole stabilized about the upright, and a 6-state quadrotor attitude model
actuated by rotor-speed deviations (rotor-speed-squared thrust/torque mapping).

The per-step physics is written in plain-float arithmetic; the compiled rollout
kernels replicate these expressions verbatim so both engines agree bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..errors import ContractViolation

GRAVITY = 9.81

# Nominal rotor speed (rad/s) the quadrotor torques are trimmed around.
QUAD_NOMINAL_SPEED = 226.0


@dataclass(frozen=True)
class SimpleMass:
    spring_k: float
    damping_d: float
    mass_m: float
    goal: tuple[float, float] = (0.0, 0.0)

    state_dim = 2
    action_dim = 1

    def __post_init__(self):
        if self.mass_m <= 0.0 or self.spring_k <= 0.0:
            raise ContractViolation("mass and spring constant must be positive")
        if self.damping_d < 0.0:
            raise ContractViolation("damping must be nonnegative")


@dataclass(frozen=True)
class CartPole:
    cart_mass: float
    pole_mass: float
    pole_length: float
    damping: float

    state_dim = 4
    action_dim = 1

    def __post_init__(self):
        if min(self.cart_mass, self.pole_mass, self.pole_length) <= 0.0:
            raise ContractViolation("masses and pole length must be positive")
        if self.damping < 0.0:
            raise ContractViolation("damping must be nonnegative")


@dataclass(frozen=True)
class Quadrotor:
    inertia_xx: float
    inertia_yy: float
    inertia_zz: float
    thrust_factor: float = 3.13e-5
    drag_factor: float = 7.5e-7
    rod_length: float = 0.23
    nominal_speed: float = field(default=QUAD_NOMINAL_SPEED)

    state_dim = 6
    action_dim = 4

    def __post_init__(self):
        if min(self.inertia_xx, self.inertia_yy, self.inertia_zz) <= 0.0:
            raise ContractViolation("inertias must be positive")
        if min(self.thrust_factor, self.drag_factor, self.rod_length) <= 0.0:
            raise ContractViolation("thrust/drag factors and rod length must be positive")


SystemParams = SimpleMass | CartPole | Quadrotor


def goal_state(system: SystemParams) -> np.ndarray:
    """Regulation target g_ref; zero state except the simple mass's set point."""
    if isinstance(system, SimpleMass):
        return np.array([system.goal[0], system.goal[1]], dtype=float)
    return np.zeros(system.state_dim, dtype=float)


# --- plain-float one-step physics (explicit Euler) -------------------------
# Shared by `step` and the pure rollout engine; the Cython kernels mirror the
# exact expression order.

def simple_mass_step(k, d, m, x, v, force, dt):
    acc = (force - k * x - d * v) / m
    return x + dt * v, v + dt * acc


def cart_pole_step(mc, mp, length, damp, x, xd, th, thd, force, dt):
    s = math.sin(th)
    c = math.cos(th)
    m11 = mc + mp
    m12 = mp * length * c
    m22 = mp * length * length
    r1 = force + mp * length * thd * thd * s - damp * xd
    r2 = mp * GRAVITY * length * s
    det = m11 * m22 - m12 * m12
    xacc = (m22 * r1 - m12 * r2) / det
    thacc = (m11 * r2 - m12 * r1) / det
    return x + dt * xd, xd + dt * xacc, th + dt * thd, thd + dt * thacc


def quadrotor_step(ixx, iyy, izz, b, drag, rod, w0,
                   roll, pitch, yaw, p, q, r, u1, u2, u3, u4, dt):
    w1 = w0 + u1
    w2 = w0 + u2
    w3 = w0 + u3
    w4 = w0 + u4
    sq1 = w1 * w1
    sq2 = w2 * w2
    sq3 = w3 * w3
    sq4 = w4 * w4
    tau_roll = b * (sq4 - sq2)
    tau_pitch = b * (sq1 - sq3)
    tau_yaw = drag * (sq2 + sq4 - sq1 - sq3)
    pdot = ((iyy - izz) / ixx) * q * r + (rod / ixx) * tau_roll
    qdot = ((izz - ixx) / iyy) * p * r + (rod / iyy) * tau_pitch
    rdot = ((ixx - iyy) / izz) * p * q + (1.0 / izz) * tau_yaw
    return (roll + dt * p, pitch + dt * q, yaw + dt * r,
            p + dt * pdot, q + dt * qdot, r + dt * rdot)


def step(system: SystemParams, state: np.ndarray, action: np.ndarray, dt: float) -> np.ndarray:
    """One explicit-Euler step of the system dynamics. Deterministic."""
    if dt <= 0.0:
        raise ContractViolation("dt must be positive")
    state = np.asarray(state, dtype=float)
    action = np.atleast_1d(np.asarray(action, dtype=float))
    if state.shape != (system.state_dim,):
        raise ContractViolation(
            f"state dimension {state.shape} does not match system ({system.state_dim},)")
    if action.shape != (system.action_dim,):
        raise ContractViolation(
            f"action dimension {action.shape} does not match system ({system.action_dim},)")

    if isinstance(system, SimpleMass):
        x, v = simple_mass_step(system.spring_k, system.damping_d, system.mass_m,
                                state[0], state[1], action[0], dt)
        return np.array([x, v])
    if isinstance(system, CartPole):
        out = cart_pole_step(system.cart_mass, system.pole_mass, system.pole_length,
                             system.damping, state[0], state[1], state[2], state[3],
                             action[0], dt)
        return np.array(out)
    out = quadrotor_step(system.inertia_xx, system.inertia_yy, system.inertia_zz,
                         system.thrust_factor, system.drag_factor, system.rod_length,
                         system.nominal_speed,
                         state[0], state[1], state[2], state[3], state[4], state[5],
                         action[0], action[1], action[2], action[3], dt)
    return np.array(out)


def step_cost(system: SystemParams, next_state: np.ndarray, action: np.ndarray) -> float:
    """Quadratic regulator cost ||x' - g||^2 + 0.01 ||u||^2."""
    g = goal_state(system)
    dx = np.asarray(next_state, dtype=float) - g
    u = np.atleast_1d(np.asarray(action, dtype=float))
    return float(dx @ dx + 0.01 * (u @ u))


# --- linearization and LQR anchor policies ----------------------------------

def linearized_matrices(system: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Continuous-time (A, B) about the regulation point."""
    if isinstance(system, SimpleMass):
        A = np.array([[0.0, 1.0],
                      [-system.spring_k / system.mass_m, -system.damping_d / system.mass_m]])
        B = np.array([[0.0], [1.0 / system.mass_m]])
        return A, B
    if isinstance(system, CartPole):
        mc, mp, length, damp = (system.cart_mass, system.pole_mass,
                                system.pole_length, system.damping)
        M = np.array([[mc + mp, mp * length], [mp * length, mp * length * length]])
        Minv = np.linalg.inv(M)
        # rhs = [F - damp*xd, mp*g*l*th] linearized about the upright
        A = np.zeros((4, 4))
        B = np.zeros((4, 1))
        A[0, 1] = 1.0
        A[2, 3] = 1.0
        rhs_x = np.array([-damp, 0.0])
        rhs_th = np.array([0.0, mp * GRAVITY * length])
        acc_x = Minv @ rhs_x
        acc_th = Minv @ rhs_th
        A[1, 1], A[3, 1] = acc_x[0], acc_x[1]
        A[1, 2], A[3, 2] = acc_th[0], acc_th[1]
        acc_f = Minv @ np.array([1.0, 0.0])
        B[1, 0], B[3, 0] = acc_f[0], acc_f[1]
        return A, B
    ixx, iyy, izz = system.inertia_xx, system.inertia_yy, system.inertia_zz
    b, drag, rod, w0 = (system.thrust_factor, system.drag_factor,
                        system.rod_length, system.nominal_speed)
    A = np.zeros((6, 6))
    A[0, 3] = A[1, 4] = A[2, 5] = 1.0
    B = np.zeros((6, 4))
    gain = 2.0 * b * w0
    B[3, 1] = -(rod / ixx) * gain
    B[3, 3] = (rod / ixx) * gain
    B[4, 0] = (rod / iyy) * gain
    B[4, 2] = -(rod / iyy) * gain
    yaw_gain = 2.0 * drag * w0 / izz
    B[5, 0] = -yaw_gain
    B[5, 1] = yaw_gain
    B[5, 2] = -yaw_gain
    B[5, 3] = yaw_gain
    return A, B


def lqr_gain(system: SystemParams, control_weight: float = 0.01) -> np.ndarray:
    """Continuous LQR gain K (u = -K x) with Q = I, R = control_weight * I."""
    A, B = linearized_matrices(system)
    Q = np.eye(system.state_dim)
    R = control_weight * np.eye(system.action_dim)
    P = scipy.linalg.solve_continuous_are(A, B, Q, R)
    return np.linalg.solve(R, B.T @ P)


def anchor_policy(system: SystemParams) -> np.ndarray:
    """LQR policy in stacked feature coordinates (per-block [state..., bias]).

    For the simple mass the bias holds the steady-state force at the goal.
    """
    K = lqr_gain(system)
    dphi = system.state_dim + 1
    alpha = np.zeros(system.action_dim * dphi)
    g = goal_state(system)
    for a in range(system.action_dim):
        block = alpha[a * dphi:(a + 1) * dphi]
        block[: system.state_dim] = -K[a]
        block[system.state_dim] = K[a] @ g
    if isinstance(system, SimpleMass):
        alpha[system.state_dim] += system.spring_k * system.goal[0]
    return alpha
