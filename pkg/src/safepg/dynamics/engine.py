"""Rollout engine selection: compiled kernels when available, else pure Python.

Set SAFEPG_PURE=1 before import to force the fallback. Both implementations
are exposed for the equivalence tests and the kernel benchmark.
"""

from __future__ import annotations

import os

import numpy as np

from . import engine_py
from .systems import CartPole, Quadrotor, SimpleMass, SystemParams

COMPILED = False
_impl = engine_py
if os.environ.get("SAFEPG_PURE", "") != "1":
    try:
        from .. import _speedups as _impl  # type: ignore[no-redef]

        COMPILED = True
    except ImportError:
        pass


def active_engine_name() -> str:
    return "compiled" if COMPILED else "pure-python"


def run_kernel(system: SystemParams, x0: np.ndarray, alpha: np.ndarray,
               sigma: float, noise: np.ndarray, u_max: float, dt: float,
               impl=None):
    """Run one rollout kernel; returns (states, actions, costs, diverged_step).

    `alpha` is the flat stacked policy vector; `noise` has shape (M, action_dim).
    `impl` overrides the selected engine (tests / benchmark).
    """
    kern = impl if impl is not None else _impl
    M = noise.shape[0]
    nx = system.state_dim
    da = system.action_dim
    states = np.empty((M + 1, nx), dtype=np.float64)
    actions = np.empty((M, da), dtype=np.float64)
    costs = np.empty(M, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)

    if isinstance(system, SimpleMass):
        rc = kern.rollout_simple_mass(
            system.spring_k, system.damping_d, system.mass_m,
            system.goal[0], system.goal[1],
            x0, alpha, sigma, noise, u_max, dt, states, actions, costs)
    elif isinstance(system, CartPole):
        rc = kern.rollout_cart_pole(
            system.cart_mass, system.pole_mass, system.pole_length, system.damping,
            x0, alpha, sigma, noise, u_max, dt, states, actions, costs)
    elif isinstance(system, Quadrotor):
        alpha_mat = np.ascontiguousarray(alpha.reshape(da, nx + 1))
        rc = kern.rollout_quadrotor(
            system.inertia_xx, system.inertia_yy, system.inertia_zz,
            system.thrust_factor, system.drag_factor, system.rod_length,
            system.nominal_speed,
            x0, alpha_mat, sigma, noise, u_max, dt, states, actions, costs)
    else:
        raise TypeError(f"unknown system type {type(system)!r}")
    return states, actions, costs, int(rc)
