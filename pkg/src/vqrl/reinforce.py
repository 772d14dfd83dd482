"""Policy-gradient training loop with a device-probability correction.

Trajectories are collected through an execution backend (possibly noisy and
shot-sampled); gradients are always taken on the exact simulator, with the
stored per-step device probabilities substituted into the denominator of the
log-policy gradient.  With a noiseless backend the correction vanishes and
the update is textbook REINFORCE.  Updates average G * sum_t grad over a
batch of trajectories and step each parameter group with its own optimizer
and learning rate.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import policy as policy_mod
from .backend import Backend, BackendDescriptor, make_backend
from .cartpole import CartPoleEnv
from .genome import CircuitIR, Genome, decode_genome
from .policy import PolicyGradient, PolicyParams
from .sim import PauliZString

# Per-group learning rates for (phi, omega, lambda).
DEFAULT_LR_PHI = 0.01
DEFAULT_LR_OMEGA = 0.1
DEFAULT_LR_LAMBDA = 0.1

METRICS_HEADER = ("episode", "reward", "moving_avg5", "clamped_steps", "wallclock_ms")
MOVING_AVG_WINDOW = 5

# How per-step gradients are weighted when summing a trajectory's update:
# "to_go" uses the return from t onward (the default; markedly lower variance
# on CartPole), "episode" weights every step by the whole-episode return.
RETURN_WEIGHTINGS = ("to_go", "episode")


@dataclass
class TrainConfig:
    genome: Genome
    n_qubits: int = 4
    episodes: int = 500
    episode_cap: int = 500
    n_trajectories: int = 10
    gamma: float = 1.0
    beta: float = 1.0
    lr_phi: float = DEFAULT_LR_PHI
    lr_omega: float = DEFAULT_LR_OMEGA
    lr_lambda: float = DEFAULT_LR_LAMBDA
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-7
    encode_squash: str | None = None
    seed: int = 0
    backend: BackendDescriptor = field(default_factory=BackendDescriptor)
    observable: PauliZString | None = None
    return_weighting: str = "to_go"
    normalize_returns: bool = True
    prob_floor: float = policy_mod.PROB_FLOOR
    max_retries: int = 3
    stop_at_moving_avg: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if min(self.lr_phi, self.lr_omega, self.lr_lambda) <= 0:
            raise ValueError("learning rates must be positive")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.return_weighting not in RETURN_WEIGHTINGS:
            raise ValueError(f"return_weighting must be one of {RETURN_WEIGHTINGS}")


@dataclass
class Trajectory:
    """Per-step record of one episode, including the backend's action probabilities."""

    states: list[np.ndarray]
    actions: list[int]
    rewards: list[float]
    device_probs: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))


@dataclass
class EpisodeMetrics:
    episode: int
    reward: float
    moving_avg5: float
    clamped_steps: int
    wallclock_ms: float


@dataclass
class TrainResult:
    metrics: list[EpisodeMetrics]
    params: PolicyParams
    genome: Genome
    n_qubits: int


def discounted_return(rewards, gamma: float) -> float:
    """Whole-episode return sum_t gamma^t * r_{t+1}."""
    total = 0.0
    weight = 1.0
    for r in rewards:
        total += weight * r
        weight *= gamma
    return total


def _per_step_returns(rewards, gamma: float) -> np.ndarray:
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def collect_trajectory(
    params: PolicyParams,
    ir: CircuitIR,
    obs: PauliZString,
    env: CartPoleEnv,
    backend: Backend,
    episode_cap: int,
    action_rng: np.random.Generator,
    env_seed: int = 0,
    squash: str | None = None,
) -> Trajectory:
    """Roll out one episode, storing the backend-produced action distributions."""
    traj = Trajectory([], [], [], [])
    env.reset(seed=env_seed)
    steps = 0
    while not env.done and steps < episode_cap:
        state = env.state.as_array()
        weighted = policy_mod.weighted_expectations(params, state, ir, obs, backend, squash=squash)
        probs = policy_mod.action_probs(weighted, params.beta)
        action = policy_mod.sample_action(probs, action_rng)
        result = env.step(action)
        traj.states.append(state)
        traj.actions.append(action)
        traj.rewards.append(result.reward)
        traj.device_probs.append(probs)
        steps += 1
    return traj


def compute_update(
    trajectories: list[Trajectory],
    params: PolicyParams,
    ir: CircuitIR,
    obs: PauliZString,
    gamma: float = 1.0,
    squash: str | None = None,
    prob_floor: float = policy_mod.PROB_FLOOR,
    return_weighting: str = "to_go",
    normalize_returns: bool = True,
) -> tuple[PolicyGradient, list[int]]:
    """Batched gradient estimate (1/N) sum_i sum_t w_t * grad_t.

    Step weights w_t are returns-to-go by default, or the whole-episode
    return G for every step under ``return_weighting="episode"``.  With
    ``normalize_returns`` the weights are standardized across the batch
    before use (an adaptive baseline; markedly faster early learning when
    every reward is positive).  Also returns the per-trajectory count of
    steps whose device probability hit the clamp floor.
    """
    if return_weighting not in RETURN_WEIGHTINGS:
        raise ValueError(f"return_weighting must be one of {RETURN_WEIGHTINGS}")
    delta = PolicyGradient(
        phi=np.zeros(ir.n_phi), lam=np.zeros(ir.n_lambda), omega=np.zeros_like(params.omega)
    )
    per_traj_weights = [
        _per_step_returns(traj.rewards, gamma)
        if return_weighting == "to_go"
        else np.full(len(traj), discounted_return(traj.rewards, gamma))
        for traj in trajectories
    ]
    if normalize_returns and per_traj_weights:
        pooled = np.concatenate([w for w in per_traj_weights if len(w)] or [np.zeros(1)])
        center, spread = pooled.mean(), pooled.std()
        per_traj_weights = [(w - center) / (spread + 1e-8) for w in per_traj_weights]
    clamp_counts: list[int] = []
    for traj, weights in zip(trajectories, per_traj_weights):
        clamped_steps = 0
        for t in range(len(traj)):
            grad, clamped = policy_mod.log_prob_gradient(
                params,
                traj.states[t],
                traj.actions[t],
                traj.device_probs[t],
                ir,
                obs,
                squash=squash,
                prob_floor=prob_floor,
            )
            clamped_steps += clamped
            delta.phi += weights[t] * grad.phi
            delta.lam += weights[t] * grad.lam
            delta.omega += weights[t] * grad.omega
        clamp_counts.append(clamped_steps)
    n = len(trajectories)
    delta.phi /= n
    delta.lam /= n
    delta.omega /= n
    return delta, clamp_counts


@dataclass
class AdamState:
    """First/second moment accumulators for one parameter group."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def like(cls, vec: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(vec), np.zeros_like(vec))


def make_optimizer_state(params: PolicyParams, config: TrainConfig) -> dict[str, AdamState] | None:
    if config.optimizer == "sgd":
        return None
    return {
        "phi": AdamState.like(params.phi),
        "lam": AdamState.like(params.lam),
        "omega": AdamState.like(params.omega),
    }


def _adam_step(state: AdamState, grad: np.ndarray, lr: float, config: TrainConfig) -> np.ndarray:
    state.t += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    state.m = b1 * state.m + (1 - b1) * grad
    state.v = b2 * state.v + (1 - b2) * grad**2
    m_hat = state.m / (1 - b1**state.t)
    v_hat = state.v / (1 - b2**state.t)
    return lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)


def apply_update(
    params: PolicyParams,
    delta: PolicyGradient,
    opt_state: dict[str, AdamState] | None,
    config: TrainConfig,
) -> PolicyParams:
    """Gradient-ascent step, per group, in place."""
    groups = (("phi", params.phi, delta.phi, config.lr_phi),
              ("lam", params.lam, delta.lam, config.lr_lambda),
              ("omega", params.omega, delta.omega, config.lr_omega))
    for name, vec, grad, lr in groups:
        if grad.shape != vec.shape:
            raise ValueError(f"gradient shape {grad.shape} does not match {name} shape {vec.shape}")
        vec += lr * grad if opt_state is None else _adam_step(opt_state[name], grad, lr, config)
    return params


def _collect_with_retries(config: TrainConfig, *args, **kwargs) -> Trajectory:
    last_exc: Exception | None = None
    for _ in range(config.max_retries + 1):
        try:
            return collect_trajectory(*args, **kwargs)
        except Exception as exc:  # backend failures only; env errors are bugs
            last_exc = exc
    raise RuntimeError(f"episode collection failed after {config.max_retries} retries") from last_exc


def train(config: TrainConfig, on_episode=None) -> TrainResult:
    """Run batched policy-gradient training for the configured episode budget.

    Emits one metrics row per episode (moving average window 5).  When
    ``stop_at_moving_avg`` is set, training stops early once the moving
    average reaches it.
    """
    ir = decode_genome(config.genome, config.n_qubits)
    obs = config.observable or PauliZString.all_qubits(config.n_qubits)
    ss = np.random.SeedSequence(config.seed)
    ss_init, ss_actions, ss_envs, ss_backend = ss.spawn(4)
    params = policy_mod.init_params(ir, n_actions=2, beta=config.beta, rng=np.random.default_rng(ss_init))
    backend = make_backend(config.backend, obs, seed=int(ss_backend.generate_state(1)[0]))
    action_rng = np.random.default_rng(ss_actions)
    env_seed_rng = np.random.default_rng(ss_envs)
    env = CartPoleEnv(config.episode_cap)
    opt_state = make_optimizer_state(params, config)

    metrics: list[EpisodeMetrics] = []
    window: list[float] = []
    episode = 0
    solved = False
    while episode < config.episodes and not solved:
        batch_size = min(config.n_trajectories, config.episodes - episode)
        batch: list[Trajectory] = []
        wallclocks: list[float] = []
        for _ in range(batch_size):
            t0 = time.perf_counter()
            traj = _collect_with_retries(
                config,
                params,
                ir,
                obs,
                env,
                backend,
                config.episode_cap,
                action_rng,
                env_seed=int(env_seed_rng.integers(2**63)),
                squash=config.encode_squash,
            )
            wallclocks.append((time.perf_counter() - t0) * 1000.0)
            batch.append(traj)
        delta, clamp_counts = compute_update(
            batch,
            params,
            ir,
            obs,
            gamma=config.gamma,
            squash=config.encode_squash,
            prob_floor=config.prob_floor,
            return_weighting=config.return_weighting,
            normalize_returns=config.normalize_returns,
        )
        apply_update(params, delta, opt_state, config)
        for traj, clamped, ms in zip(batch, clamp_counts, wallclocks):
            window.append(traj.total_reward)
            if len(window) > MOVING_AVG_WINDOW:
                window.pop(0)
            row = EpisodeMetrics(
                episode=episode,
                reward=traj.total_reward,
                moving_avg5=float(np.mean(window)),
                clamped_steps=clamped,
                wallclock_ms=ms,
            )
            metrics.append(row)
            if on_episode is not None:
                on_episode(row)
            episode += 1
            if (
                config.stop_at_moving_avg is not None
                and len(window) == MOVING_AVG_WINDOW
                and row.moving_avg5 >= config.stop_at_moving_avg
            ):
                solved = True
                break
    return TrainResult(metrics=metrics, params=params, genome=config.genome, n_qubits=config.n_qubits)


def run_inference(
    params: PolicyParams,
    genome: Genome,
    n_qubits: int,
    backend_descriptor: BackendDescriptor,
    episodes: int,
    episode_cap: int,
    seed: int = 0,
    squash: str | None = None,
    observable: PauliZString | None = None,
) -> list[EpisodeMetrics]:
    """Roll out a frozen policy, sampling actions from the backend policy."""
    ir = decode_genome(genome, n_qubits)
    obs = observable or PauliZString.all_qubits(n_qubits)
    ss = np.random.SeedSequence(seed)
    ss_actions, ss_envs, ss_backend = ss.spawn(3)
    backend = make_backend(backend_descriptor, obs, seed=int(ss_backend.generate_state(1)[0]))
    action_rng = np.random.default_rng(ss_actions)
    env_seed_rng = np.random.default_rng(ss_envs)
    env = CartPoleEnv(episode_cap)
    metrics: list[EpisodeMetrics] = []
    window: list[float] = []
    for episode in range(episodes):
        t0 = time.perf_counter()
        traj = collect_trajectory(
            params, ir, obs, env, backend, episode_cap, action_rng,
            env_seed=int(env_seed_rng.integers(2**63)), squash=squash,
        )
        window.append(traj.total_reward)
        if len(window) > MOVING_AVG_WINDOW:
            window.pop(0)
        metrics.append(
            EpisodeMetrics(
                episode=episode,
                reward=traj.total_reward,
                moving_avg5=float(np.mean(window)),
                clamped_steps=0,
                wallclock_ms=(time.perf_counter() - t0) * 1000.0,
            )
        )
    return metrics


# -- artifacts ---------------------------------------------------------------


def save_checkpoint(path, result_or_params, genome: Genome | None = None,
                    n_qubits: int | None = None, episode: int = 0) -> None:
    """Write the flat checkpoint JSON: genome text, sizes, parameter vectors."""
    if isinstance(result_or_params, TrainResult):
        params = result_or_params.params
        genome = result_or_params.genome
        n_qubits = result_or_params.n_qubits
        episode = len(result_or_params.metrics)
    else:
        params = result_or_params
        if genome is None or n_qubits is None:
            raise ValueError("genome and n_qubits are required when saving bare params")
    payload = {
        "genome": genome.to_text(),
        "n_qubits": n_qubits,
        "phi": [float(v) for v in params.phi],
        "lambda": [float(v) for v in params.lam],
        "omega": [float(v) for v in params.omega],
        "beta": params.beta,
        "episode": episode,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def load_checkpoint(path) -> tuple[PolicyParams, Genome, int, int]:
    """Read a checkpoint; returns (params, genome, n_qubits, episode)."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    params = PolicyParams(
        phi=np.array(payload["phi"], dtype=float),
        lam=np.array(payload["lambda"], dtype=float),
        omega=np.array(payload["omega"], dtype=float),
        beta=float(payload["beta"]),
    )
    return params, Genome.from_text(payload["genome"]), int(payload["n_qubits"]), int(payload["episode"])


def write_metrics_csv(path, metrics: list[EpisodeMetrics]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for m in metrics:
            writer.writerow([m.episode, m.reward, f"{m.moving_avg5:.4f}", m.clamped_steps, f"{m.wallclock_ms:.3f}"])
