"""Information-geometric diagnostics and the softmax accuracy bound.

The empirical Fisher information matrix is the sample average of outer
products of log-policy gradients over (state, action) draws; the state
distribution is parameter-independent in every sampler offered here,
so its term drops out of the gradient.  The effective dimension is a
data-size-dependent capacity measure built from trace-normalised FIMs,
evaluated by Monte Carlo over parameter samples with log-domain
determinants.

Sampling protocol helpers mirror the two conventions used in the
experiments: states with components from N(0, 0.5) (mimicking the
cart-pole state prior) or uniform from [-pi, pi) (environment
agnostic), combined with parameter sets drawn uniformly from
[-pi, pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import policy as policy_mod, train as train_mod
from .policy import Policy

PSD_TOLERANCE = 1e-10
NEAR_ZERO_THRESHOLD = 1e-7
SPECTRUM_BUCKETS = ((0.0, 0.5), (0.5, 1.0), (1.0, 1.5), (1.5, 2.0), (2.0, 2.5), (2.5, 3.0), (3.0, math.inf))


def normal_state_sampler(dim: int, sigma: float = 0.5):
    """Feature vectors with i.i.d. N(0, sigma) components."""

    def sample(rng: np.random.Generator) -> np.ndarray:
        return rng.normal(0.0, sigma, size=dim)

    return sample


def uniform_angle_state_sampler(dim: int):
    """Feature vectors with i.i.d. components uniform on [-pi, pi)."""

    def sample(rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-np.pi, np.pi, size=dim)

    return sample


def uniform_param_sampler(policy: Policy):
    """Full trainable vectors (angles, scales, weights) from [-pi, pi)."""

    def sample(rng: np.random.Generator):
        flat = rng.uniform(-np.pi, np.pi, size=policy_mod.num_trainables(policy))
        return policy_mod.apply_flat(policy, flat)

    return sample


@dataclass
class EmpiricalFIM:
    """Averaged outer products of log-policy gradients."""

    matrix: np.ndarray
    samples: int
    descriptor: str = ""

    def __post_init__(self):
        sym_gap = np.abs(self.matrix - self.matrix.T).max()
        if sym_gap > 1e-12:
            raise ValueError(f"FIM asymmetric by {sym_gap:.3e}")
        min_eig = float(np.linalg.eigvalsh(self.matrix).min())
        if min_eig < -PSD_TOLERANCE:
            raise ValueError(f"FIM indefinite: min eigenvalue {min_eig:.3e}")


def empirical_fim(
    policy: Policy,
    params,
    state_sampler,
    samples: int,
    rng: np.random.Generator,
    descriptor: str = "",
) -> EmpiricalFIM:
    """Estimate the FIM at fixed parameters from sampled (state, action) pairs."""
    if samples < 1:
        raise ValueError("need at least one sample")
    dim = policy_mod.num_trainables(policy)
    acc = np.zeros((dim, dim))
    for _ in range(samples):
        state = state_sampler(rng)
        probs = policy_mod.action_probs(policy, state, params)
        action = policy_mod._sample_index(probs, rng)
        grad = policy_mod.log_prob_grad(policy, state, action, params)
        acc += np.outer(grad, grad)
    acc /= samples
    acc = (acc + acc.T) / 2.0
    return EmpiricalFIM(acc, samples, descriptor)


@dataclass
class FimSamples:
    """FIM estimates over sampled parameter sets, trace-normalised.

    ``per_set`` holds one normalised matrix per parameter sample and
    ``aggregate`` their average; the normalisation constant makes the
    Monte Carlo mean of the trace equal the trainable count exactly.
    """

    per_set: list
    aggregate: np.ndarray
    dim: int
    num_states: int
    scale: float


def sample_fims(
    policy: Policy,
    state_sampler,
    num_param_sets: int,
    num_states: int,
    rng: np.random.Generator,
    param_sampler=None,
) -> FimSamples:
    """FIM estimates at ``num_param_sets`` random parameter sets.

    One batch of ``num_states`` states is shared across all parameter
    sets; per parameter set, one action is drawn per state from the
    policy and the log-gradient outer products are averaged.
    """
    if param_sampler is None:
        param_sampler = uniform_param_sampler(policy)
    dim = policy_mod.num_trainables(policy)
    states = [state_sampler(rng) for _ in range(num_states)]
    feats = np.array(states)
    raw = []
    for _ in range(num_param_sets):
        params_j, policy_j = param_sampler(rng)
        base_probs = np.array(
            [policy_mod.action_probs(policy_j, s, params_j) for s in states]
        )
        actions = np.array(
            [policy_mod._sample_index(p, rng) for p in base_probs], dtype=np.int64
        )
        grads = policy_mod.trajectory_log_grads(policy_j, feats, actions, params_j)
        matrix = grads.T @ grads / num_states
        raw.append((matrix + matrix.T) / 2.0)
    mean_trace = float(np.mean([np.trace(m) for m in raw]))
    if mean_trace <= 0.0:
        raise ValueError("singular normalisation: average FIM trace is zero")
    scale = dim / mean_trace
    per_set = [scale * m for m in raw]
    aggregate = np.mean(per_set, axis=0)
    return FimSamples(per_set, aggregate, dim, num_states, scale)


@dataclass
class SpectrumStats:
    """Eigenvalue summary of one (normalised) FIM."""

    eigenvalues: np.ndarray
    near_zero_fraction: float
    buckets: list  # (low, high, count)


def spectrum_stats(matrix: np.ndarray, near_zero: float = NEAR_ZERO_THRESHOLD) -> SpectrumStats:
    """Eigendecompose a symmetric FIM and bucket its spectrum."""
    if not np.isfinite(matrix).all():
        raise ValueError("FIM contains non-finite entries")
    eigs = np.linalg.eigvalsh((matrix + matrix.T) / 2.0)
    if eigs.min() < -PSD_TOLERANCE:
        raise ValueError(f"matrix indefinite: min eigenvalue {eigs.min():.3e}")
    eigs = np.where((eigs < 0.0) & (eigs >= -PSD_TOLERANCE), 0.0, eigs)
    eigs.sort()
    frac = float(np.mean(eigs < near_zero))
    buckets = [
        (low, high, int(np.sum((eigs >= low) & (eigs < high))))
        for low, high in SPECTRUM_BUCKETS
    ]
    return SpectrumStats(eigs, frac, buckets)


@dataclass
class EffDimReport:
    """Effective dimension per data size, raw and divided by dim."""

    data_sizes: list
    values: list
    normalized: list
    dim: int


def effective_dimension(fims: FimSamples, data_sizes) -> EffDimReport:
    """Capacity measure from normalised FIM samples at several data sizes.

    For data size n with kappa = n / (2 pi ln n), computes
    ``2 * ln(mean_j sqrt(det(I + kappa F_j))) / ln(kappa)`` with the
    determinants evaluated in the log domain (Cholesky) and combined by
    log-sum-exp.  Requires kappa > 1 so the denominator is positive.
    """
    dim = fims.dim
    values: list[float] = []
    normalized: list[float] = []
    for n in data_sizes:
        if n <= math.e:
            raise ValueError(f"data size {n} must exceed e")
        kappa = n / (2.0 * math.pi * math.log(n))
        if kappa <= 1.0:
            raise ValueError(f"data size {n} gives kappa <= 1")
        half_logdets = np.array(
            [_half_logdet_plus(kappa, m) for m in fims.per_set]
        )
        peak = half_logdets.max()
        log_mean = peak + math.log(np.mean(np.exp(half_logdets - peak)))
        ed = 2.0 * log_mean / math.log(kappa)
        values.append(ed)
        normalized.append(ed / dim)
    return EffDimReport(list(data_sizes), values, normalized, dim)


def _half_logdet_plus(kappa: float, matrix: np.ndarray) -> float:
    """0.5 * logdet(I + kappa * matrix) for a PSD matrix."""
    shifted = np.eye(matrix.shape[0]) + kappa * (matrix + matrix.T) / 2.0
    chol = np.linalg.cholesky(shifted)
    return float(np.sum(np.log(np.diag(chol))))


# ---------------------------------------------------------------------------
# Accuracy bound for the weighted-softmax policy family


def accuracy_bound(num_actions: int) -> Fraction:
    """Upper bound (2/M) * sum_{k=1..M/2} 1/k on uniform-task accuracy.

    Holds for any softmax policy whose logits are per-action weights
    times one shared bounded observable.  Even action counts only; the
    odd case needs the adapted counting noted in the derivation and is
    not provided here.
    """
    if num_actions < 2:
        raise ValueError("need at least two actions")
    if num_actions % 2:
        raise ValueError(
            "bound implemented for even action counts; the odd case requires "
            "adapting the weight-ordering count"
        )
    total = sum(Fraction(1, k) for k in range(1, num_actions // 2 + 1))
    return Fraction(2, num_actions) * total


def exact_accuracy(env, encoder, policy: Policy, params) -> float:
    """Share of optimal decisions on a bandit task, from exact probabilities."""
    total = 0.0
    for state in range(env.num_states):
        probs = policy_mod.action_probs(policy, encoder.encode(state), params)
        total += probs[env.optimal[state]]
    return total / env.num_states


@dataclass
class BoundComplianceReport:
    bound: Fraction
    slack: float
    accuracies: list
    all_within: bool


def bound_compliance_experiment(
    env,
    encoder,
    policy: Policy,
    hyper: train_mod.Hyperparams,
    seeds,
    slack: float = 0.02,
) -> BoundComplianceReport:
    """Train the softmax policy per seed and test its accuracy ceiling.

    Requires a uniform bandit task (equal-size optimal preimages);
    trains with the given hyperparameters and checks that the exact
    final accuracy never exceeds the bound plus ``slack``.
    """
    if not isinstance(policy, policy_mod.SoftmaxObservablePolicy):
        raise ValueError("bound compliance applies to the softmax policy family")
    if not env.is_uniform():
        raise ValueError("environment is not uniform (unequal optimal preimages)")
    bound = accuracy_bound(env.num_actions)
    accuracies = []
    for seed in seeds:
        result = train_mod.train_run(env, encoder, policy, hyper, seed)
        accuracies.append(exact_accuracy(env, encoder, result.policy, result.params))
    all_within = all(acc <= float(bound) + slack for acc in accuracies)
    return BoundComplianceReport(bound, slack, accuracies, all_within)
