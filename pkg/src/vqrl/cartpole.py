"""Self-contained CartPole benchmark dynamics.

Matches the canonical v1 physics: Euler integration with g=9.8, cart mass
1.0, pole mass 0.1, half-length 0.5, force +/-10, tau=0.02; the episode
terminates when |x| > 2.4 or |theta| > 12 degrees and truncates at the
episode cap (500 for the standard task).  Reward is +1 per step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
TOTAL_MASS = CART_MASS + POLE_MASS
POLE_HALF_LENGTH = 0.5
FORCE_MAG = 10.0
TAU = 0.02
X_LIMIT = 2.4
THETA_LIMIT = 12.0 * math.pi / 180.0
DEFAULT_EPISODE_CAP = 500
RESET_BOUND = 0.05


@dataclass(frozen=True)
class CartState:
    x: float
    x_dot: float
    theta: float
    theta_dot: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.x_dot, self.theta, self.theta_dot])


@dataclass(frozen=True)
class StepResult:
    state: CartState
    reward: float
    terminated: bool
    truncated: bool


def step_dynamics(state: CartState, action: int) -> CartState:
    """One Euler step of the cart-pole equations of motion."""
    if action not in (0, 1):
        raise ValueError(f"action must be 0 or 1, got {action!r}")
    force = FORCE_MAG if action == 1 else -FORCE_MAG
    sin_t = math.sin(state.theta)
    cos_t = math.cos(state.theta)
    temp = (force + POLE_MASS * POLE_HALF_LENGTH * state.theta_dot**2 * sin_t) / TOTAL_MASS
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
        POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos_t**2 / TOTAL_MASS)
    )
    x_acc = temp - POLE_MASS * POLE_HALF_LENGTH * theta_acc * cos_t / TOTAL_MASS
    return CartState(
        x=state.x + TAU * state.x_dot,
        x_dot=state.x_dot + TAU * x_acc,
        theta=state.theta + TAU * state.theta_dot,
        theta_dot=state.theta_dot + TAU * theta_acc,
    )


def beyond_limits(state: CartState) -> bool:
    return abs(state.x) > X_LIMIT or abs(state.theta) > THETA_LIMIT


class CartPoleEnv:
    """One cart-pole episode at a time; instances are independent."""

    def __init__(self, episode_cap: int = DEFAULT_EPISODE_CAP):
        if episode_cap < 1:
            raise ValueError(f"episode_cap must be >= 1, got {episode_cap}")
        self.episode_cap = episode_cap
        self._state: CartState | None = None
        self._steps = 0
        self._done = False

    def reset(self, seed: int = 0, state: CartState | None = None) -> CartState:
        """Start a new episode; fields drawn uniformly from [-0.05, 0.05]."""
        if state is None:
            vals = np.random.default_rng(seed).uniform(-RESET_BOUND, RESET_BOUND, size=4)
            state = CartState(*(float(v) for v in vals))
        self._state = state
        self._steps = 0
        self._done = beyond_limits(state)
        return state

    @property
    def state(self) -> CartState:
        if self._state is None:
            raise RuntimeError("environment not reset")
        return self._state

    @property
    def done(self) -> bool:
        return self._done

    def step(self, action: int) -> StepResult:
        if self._state is None:
            raise RuntimeError("environment not reset")
        if self._done:
            raise RuntimeError("episode is over; call reset()")
        nxt = step_dynamics(self._state, action)
        self._steps += 1
        terminated = beyond_limits(nxt)
        truncated = not terminated and self._steps >= self.episode_cap
        self._state = nxt
        self._done = terminated or truncated
        return StepResult(nxt, 1.0, terminated, truncated)
