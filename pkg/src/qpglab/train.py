"""REINFORCE training loop with Adam/AMSGrad ascent updates.

The gradient estimator is the vanilla policy-gradient form: average
over batch trajectories of ``sum_t grad ln pi(a_t | s_t) * G_t`` with
discounted returns ``G_t`` and no baseline.  Updates are synchronous at
batch boundaries (one trajectory per update by default for the
paper-style per-episode runs; larger batches are a config choice).

Everything is a pure function of (config, seed): a single generator
drives initialisation, episode collection and action sampling in a
fixed order, so reruns produce byte-identical learning curves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ansatz, policy as policy_mod
from .ansatz import ModelConfig, ParamSet
from .policy import Policy


@dataclass
class Trajectory:
    """One episode: encoded features, chosen actions, rewards, in step order."""

    features: np.ndarray  # (T, n)
    actions: np.ndarray  # (T,)
    rewards: np.ndarray  # (T,)

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())


@dataclass
class Hyperparams:
    """Learning rates, discount and episode budget for one training run."""

    alpha_theta: float = 0.1
    alpha_lambda: float = 0.1
    alpha_w: float = 0.1
    gamma: float = 0.99
    batch_size: int = 10
    episodes: int = 1000
    theta_init: str = "uniform"
    theta_scale: float = 0.1
    lambda_init: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if min(self.alpha_theta, self.alpha_lambda, self.alpha_w) <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1 or self.episodes < 1:
            raise ValueError("batch_size and episodes must be >= 1")


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    """Backward recursion G_t = r_t + gamma * G_{t+1}."""
    rewards = np.asarray(rewards, dtype=float)
    if rewards.size == 0:
        raise ValueError("empty reward sequence")
    returns = np.empty_like(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        returns[t] = acc
    return returns


def collect_episode(env, encoder, policy: Policy, params: ParamSet, rng) -> Trajectory:
    """Run one full episode under the current policy."""
    obs = env.reset(rng)
    features, actions, rewards = [], [], []
    done = False
    while not done:
        feats = encoder.encode(obs)
        action = policy_mod.sample_action(policy, feats, params, rng)
        obs, reward, done = env.step(action, rng)
        features.append(feats)
        actions.append(action)
        rewards.append(reward)
    return Trajectory(
        np.array(features), np.array(actions, dtype=np.int64), np.array(rewards)
    )


def collect_batch(env, encoder, policy, params, batch_size: int, rng) -> list[Trajectory]:
    return [collect_episode(env, encoder, policy, params, rng) for _ in range(batch_size)]


def reinforce_gradient(
    batch: list[Trajectory], policy: Policy, params: ParamSet, gamma: float
) -> np.ndarray:
    """Ascent-direction gradient of the REINFORCE objective over a batch."""
    if not batch:
        raise ValueError("empty batch")
    total = np.zeros(policy_mod.num_trainables(policy))
    for traj in batch:
        returns = discounted_returns(traj.rewards, gamma)
        grads = policy_mod.trajectory_log_grads(policy, traj.features, traj.actions, params)
        total += returns @ grads
    return total / len(batch)


@dataclass
class AdamState:
    """Adam moment accumulators with the AMSGrad running maximum."""

    dim: int
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)
    v_max: np.ndarray = field(init=False)

    def __post_init__(self):
        self.m = np.zeros(self.dim)
        self.v = np.zeros(self.dim)
        self.v_max = np.zeros(self.dim)


def adam_amsgrad_step(
    state: AdamState, flat: np.ndarray, gradient: np.ndarray, rates: np.ndarray
) -> np.ndarray:
    """One ascent step; ``rates`` holds the per-coordinate learning rate."""
    if flat.shape != gradient.shape or flat.shape != rates.shape:
        raise ValueError("parameter, gradient and rate shapes must match")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * gradient
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * gradient**2
    np.maximum(state.v_max, state.v, out=state.v_max)
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v_max / (1.0 - state.beta2**state.step)
    return flat + rates * m_hat / (np.sqrt(v_hat) + state.eps)


def rate_vector(policy: Policy, hyper: Hyperparams) -> np.ndarray:
    n_theta, n_lam = ansatz.param_counts(policy.model)
    rates = [
        np.full(n_theta, hyper.alpha_theta),
        np.full(n_lam, hyper.alpha_lambda),
    ]
    if isinstance(policy, policy_mod.SoftmaxObservablePolicy):
        rates.append(np.full(policy.num_actions, hyper.alpha_w))
    return np.concatenate(rates)


@dataclass
class EpisodeRecord:
    episode: int
    reward: float
    avg20: float


@dataclass
class TrainResult:
    records: list[EpisodeRecord]
    params: ParamSet
    policy: Policy
    extras: list[dict]


def train_run(
    env,
    encoder,
    policy: Policy,
    hyper: Hyperparams,
    seed: int,
    episode_hook=None,
) -> TrainResult:
    """Train a policy with REINFORCE; returns the per-episode log.

    ``episode_hook(episode, policy, params) -> dict`` may record extra
    diagnostics (e.g. exact expected reward on a bandit task) after
    each episode; its results are returned but not written to the CSV
    contract columns.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    params = ansatz.init_params(
        policy.model,
        rng,
        theta_init=hyper.theta_init,
        theta_scale=hyper.theta_scale,
        lam_init=hyper.lambda_init,
    )
    opt = AdamState(policy_mod.num_trainables(policy))
    rates = rate_vector(policy, hyper)

    records: list[EpisodeRecord] = []
    extras: list[dict] = []
    recent: list[float] = []
    pending: list[Trajectory] = []
    for episode in range(hyper.episodes):
        traj = collect_episode(env, encoder, policy, params, rng)
        pending.append(traj)
        if len(pending) >= hyper.batch_size:
            grad = reinforce_gradient(pending, policy, params, hyper.gamma)
            flat = policy_mod.flat_trainables(policy, params)
            flat = adam_amsgrad_step(opt, flat, grad, rates)
            params, policy = policy_mod.apply_flat(policy, flat)
            pending = []
        recent.append(traj.total_reward)
        if len(recent) > 20:
            recent.pop(0)
        records.append(
            EpisodeRecord(episode, traj.total_reward, float(np.mean(recent)))
        )
        if episode_hook is not None:
            extras.append(episode_hook(episode, policy, params))
    return TrainResult(records, params, policy, extras)


# ---------------------------------------------------------------------------
# Learning-curve CSV output


def write_learning_curve(path, records: list[EpisodeRecord], header_lines=()) -> None:
    """Per-seed CSV: ``episode,reward,avg20`` with full precision."""
    lines = [f"# {line}" for line in header_lines]
    lines.append("episode,reward,avg20")
    for rec in records:
        lines.append(f"{rec.episode},{rec.reward!r},{rec.avg20!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_aggregate_curve(path, per_seed_records, header_lines=()) -> None:
    """Across-seed CSV: ``episode,mean,std`` (population std)."""
    episodes = len(per_seed_records[0])
    if any(len(records) != episodes for records in per_seed_records):
        raise ValueError("seeds produced different episode counts")
    rewards = np.array([[rec.reward for rec in records] for records in per_seed_records])
    lines = [f"# {line}" for line in header_lines]
    lines.append("episode,mean,std")
    for ep in range(episodes):
        col = rewards[:, ep]
        lines.append(f"{ep},{col.mean()!r},{col.std()!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
