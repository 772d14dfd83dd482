"""Softmax policy over a weighted circuit observable.

One shared Pauli-Z-string expectation e(s) is read out per state; action a
gets the logit beta * e(s) * omega_a, so the action distribution is a
softmax over per-action rescalings of a single measured value.  Gradients
are taken through the exact simulator while the probability in the
denominator may come from a (noisy) execution backend: this reconciles
device-sampled policies with simulator differentiation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sim
from .genome import CircuitIR, bind_parameters
from .sim import PauliZString

PROB_FLOOR = 1e-6


@dataclass
class PolicyParams:
    """Trainable parameters: rotation angles, input scalings, readout weights."""

    phi: np.ndarray
    lam: np.ndarray
    omega: np.ndarray
    beta: float

    def __post_init__(self) -> None:
        self.phi = np.asarray(self.phi, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.phi.copy(), self.lam.copy(), self.omega.copy(), self.beta)


@dataclass
class PolicyGradient:
    phi: np.ndarray
    lam: np.ndarray
    omega: np.ndarray


def init_params(
    ir: CircuitIR,
    n_actions: int = 2,
    beta: float = 1.0,
    rng: np.random.Generator | None = None,
) -> PolicyParams:
    """Fresh parameters: angles uniform in (-pi, pi), unit scalings and weights."""
    rng = rng or np.random.default_rng()
    return PolicyParams(
        phi=rng.uniform(-np.pi, np.pi, size=ir.n_phi),
        lam=np.ones(ir.n_lambda),
        omega=np.ones(n_actions),
        beta=beta,
    )


def weighted_expectations(
    params: PolicyParams,
    state: np.ndarray,
    ir: CircuitIR,
    obs: PauliZString,
    backend,
    squash: str | None = None,
) -> np.ndarray:
    """Per-action weighted readout e(s) * omega_a via the given backend."""
    circuit = bind_parameters(ir, params.phi, params.lam, state, squash=squash)
    e = backend.expectation(circuit)
    return e * params.omega


def action_probs(weighted: np.ndarray, beta: float) -> np.ndarray:
    """Softmax with inverse temperature beta, max-subtracted for stability."""
    weighted = np.asarray(weighted, dtype=float)
    if not np.all(np.isfinite(weighted)):
        raise ValueError("weighted expectations must be finite")
    logits = beta * weighted
    logits -= logits.max()
    exp = np.exp(logits)
    return exp / exp.sum()


def sample_action(probs: np.ndarray, rng: np.random.Generator | int) -> int:
    """Inverse-CDF sample; deterministic for a given generator state or seed."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    cdf = np.cumsum(probs)
    return int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))


def log_prob_gradient(
    params: PolicyParams,
    state: np.ndarray,
    action: int,
    device_probs: np.ndarray,
    ir: CircuitIR,
    obs: PauliZString,
    squash: str | None = None,
    prob_floor: float = PROB_FLOOR,
) -> tuple[PolicyGradient, bool]:
    """Gradient of log(simulated policy + eps) at a stored device probability.

    Returns grad(pi_hat(a|s)) / pi_device(a|s), with pi_hat and its gradient
    from the exact simulator (shift rule through the readout, analytic
    through the softmax) and the denominator taken from the backend that
    produced the action.  With a noiseless backend this is exactly
    grad log pi_hat.  The flag reports whether the denominator was clamped
    to ``prob_floor``.
    """
    e, de_phi, de_lam = sim.expectation_and_gradient(
        ir, params.phi, params.lam, state, obs, squash=squash
    )
    p_hat = action_probs(e * params.omega, params.beta)

    denom = float(device_probs[action])
    clamped = denom < prob_floor
    denom = max(denom, prob_floor)
    ratio = p_hat[action] / denom

    # d p_hat_a / d w_b = beta * p_hat_a * (delta_ab - p_hat_b) for logits
    # w = e * omega; chain through w gives the three parameter groups.
    beta = params.beta
    readout_coeff = beta * ratio * (params.omega[action] - float(p_hat @ params.omega))
    d_omega = beta * e * ratio * (-p_hat)
    d_omega[action] += beta * e * ratio
    return (
        PolicyGradient(phi=readout_coeff * de_phi, lam=readout_coeff * de_lam, omega=d_omega),
        clamped,
    )
