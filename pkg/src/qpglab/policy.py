"""Policies over circuit measurement outcomes and their exact gradients.

Two families are implemented:

* :class:`MeasurementPolicy` -- action probabilities are sums of
  basis-state probabilities over the classes of a post-processing
  function; a single computational-basis measurement samples an action.
* :class:`SoftmaxObservablePolicy` -- a softmax over ``beta * w_a *
  <O>`` with a single shared Pauli-Z-mask observable and per-action
  weights.

Log-policy gradients are exact: projector/observable expectations are
differentiated with the parameter-shift rule (see
:func:`qpglab.ansatz.shift_rows`), and the softmax factors are applied
in closed form.  The ``exact`` evaluation mode is the default
everywhere; ``shots`` mode estimates action probabilities from sampled
bitstrings and is exercised for its own contract, while gradients are
always computed from exact expectations.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import ansatz, qsim
from .ansatz import ModelConfig, ParamSet
from .decode import PostProcessing

PROB_CLAMP = 1e-12


class ZeroProbabilityError(ValueError):
    """A recorded action has probability zero under the current policy."""


@dataclass(frozen=True)
class Exact:
    """Evaluate action probabilities from the full statevector."""


@dataclass(frozen=True)
class Shots:
    """Estimate action probabilities from ``count`` sampled bitstrings."""

    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("shot count must be >= 1")


@dataclass(eq=False)
class MeasurementPolicy:
    """Policy induced by decoding a computational-basis measurement."""

    model: ModelConfig
    postfn: PostProcessing
    eval_mode: Exact | Shots = Exact()

    def __post_init__(self):
        if self.postfn.n_qubits != self.model.n_qubits:
            raise ValueError(
                f"post-processing acts on {self.postfn.n_qubits} qubits, "
                f"model has {self.model.n_qubits}"
            )

    @property
    def num_actions(self) -> int:
        return self.postfn.num_actions


@dataclass(eq=False)
class SoftmaxObservablePolicy:
    """Softmax policy over a weighted shared Z-mask expectation."""

    model: ModelConfig
    weights: np.ndarray
    beta: float = 1.0
    z_qubits: tuple | None = None  # None means Z on every qubit

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 1 or len(self.weights) < 2:
            raise ValueError("need one weight per action, at least two actions")
        if self.z_qubits is None:
            self.z_qubits = tuple(range(self.model.n_qubits))
        self.z_qubits = tuple(sorted(self.z_qubits))
        for q in self.z_qubits:
            if not 0 <= q < self.model.n_qubits:
                raise ValueError(f"z qubit {q} out of range")

    @property
    def num_actions(self) -> int:
        return len(self.weights)


Policy = MeasurementPolicy | SoftmaxObservablePolicy


@lru_cache(maxsize=None)
def _z_signs(n: int, qubits: tuple) -> np.ndarray:
    """(-1)**(parity of masked bits) for every basis index."""
    mask = np.uint64(sum(1 << q for q in qubits))
    ones = np.bitwise_count(np.arange(1 << n, dtype=np.uint64) & mask)
    signs = np.where(ones & 1 == 1, -1.0, 1.0)
    signs.setflags(write=False)
    return signs


def z_mask_expectation(state: qsim.Statevector, qubits) -> float:
    """<Z-on-qubits (identity elsewhere)> of a prepared state."""
    probs = qsim.probabilities(state)
    return float(probs @ _z_signs(state.n_qubits, tuple(sorted(qubits))))


def parity_via_ancilla(state: qsim.Statevector) -> float:
    """All-qubit parity read off an ancilla instead of a global mask.

    Appends an ancilla in |0>, applies a CX from each original qubit
    onto it, and returns P(ancilla=0) - P(ancilla=1); equals the
    all-qubit Z-mask expectation of the original state.
    """
    n = state.n_qubits
    ext = np.zeros(1 << (n + 1), dtype=np.complex128)
    ext[: 1 << n] = state.amps
    extended = qsim.Statevector(n + 1, ext)
    for q in range(n):
        qsim.apply_cx(extended, control=q, target=n)
    probs = qsim.probabilities(extended)
    return float(probs[: 1 << n].sum() - probs[1 << n :].sum())


def _member_matrix(postfn: PostProcessing) -> np.ndarray:
    """(2**n, M) indicator matrix of class membership, cached per instance."""
    cached = getattr(postfn, "_member_matrix", None)
    if cached is None:
        table = postfn.action_table()
        cached = (table[:, None] == np.arange(postfn.num_actions)[None, :]).astype(float)
        cached.setflags(write=False)
        postfn._member_matrix = cached
    return cached


def _batch_probs(config: ModelConfig, thetas, lams, features_rows) -> np.ndarray:
    amps = ansatz.run_batch(config, thetas, lams, features_rows)
    return np.abs(amps) ** 2


# ---------------------------------------------------------------------------
# Action distributions and sampling


def action_probs(policy: Policy, features, params: ParamSet, rng=None) -> np.ndarray:
    """Distribution over actions for one state (exact or shot-estimated)."""
    features = np.asarray(features, dtype=float)
    if isinstance(policy, SoftmaxObservablePolicy):
        obs = _observable_value(policy, features, params)
        return _softmax(policy.beta * policy.weights * obs)
    state = ansatz.prepare_state(policy.model, params, features)
    table = policy.postfn.action_table()
    if isinstance(policy.eval_mode, Shots):
        if rng is None:
            raise ValueError("shots mode needs an rng")
        samples = qsim.sample_bitstrings(state, policy.eval_mode.count, rng)
        counts = np.bincount(table[samples], minlength=policy.num_actions)
        return counts / policy.eval_mode.count
    probs = qsim.probabilities(state)
    return np.bincount(table, weights=probs, minlength=policy.num_actions)


def sample_action(policy: Policy, features, params: ParamSet, rng) -> int:
    """Draw one action; in shots mode a single measured bitstring decides."""
    features = np.asarray(features, dtype=float)
    if isinstance(policy, MeasurementPolicy) and isinstance(policy.eval_mode, Shots):
        state = ansatz.prepare_state(policy.model, params, features)
        outcome = qsim.sample_bitstrings(state, 1, rng)[0]
        return int(policy.postfn.action_table()[outcome])
    if isinstance(policy, MeasurementPolicy):
        state = ansatz.prepare_state(policy.model, params, features)
        probs = qsim.probabilities(state)
        outcome = _sample_index(probs, rng)
        return int(policy.postfn.action_table()[outcome])
    probs = action_probs(policy, features, params)
    return _sample_index(probs, rng)


def _sample_index(probs: np.ndarray, rng) -> int:
    cdf = np.cumsum(probs)
    return int(min(np.searchsorted(cdf, rng.random(), side="right"), len(probs) - 1))


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max())
    return z / z.sum()


def _observable_value(policy: SoftmaxObservablePolicy, features, params) -> float:
    state = ansatz.prepare_state(policy.model, params, features)
    return z_mask_expectation(state, policy.z_qubits)


# ---------------------------------------------------------------------------
# Log-policy gradients (flat layout: theta block, lam block[, weight block])


def num_trainables(policy: Policy) -> int:
    base = ansatz.total_params(policy.model)
    if isinstance(policy, SoftmaxObservablePolicy):
        return base + policy.num_actions
    return base


def flat_trainables(policy: Policy, params: ParamSet) -> np.ndarray:
    if isinstance(policy, SoftmaxObservablePolicy):
        return np.concatenate([params.theta, params.lam, policy.weights])
    return params.flat()


def apply_flat(policy: Policy, flat: np.ndarray) -> tuple[ParamSet, Policy]:
    """Rebuild (params, policy) from a flat trainable vector."""
    n_theta, n_lam = ansatz.param_counts(policy.model)
    params = ParamSet(flat[:n_theta].copy(), flat[n_theta : n_theta + n_lam].copy())
    if isinstance(policy, SoftmaxObservablePolicy):
        weights = flat[n_theta + n_lam :].copy()
        return params, replace(policy, weights=weights)
    return params, policy


def log_prob_grad(policy: Policy, features, action: int, params: ParamSet) -> np.ndarray:
    """Exact gradient of ln pi(action | features) over the flat trainables."""
    features = np.asarray(features, dtype=float)
    grads = trajectory_log_grads(policy, features[None, :], np.array([action]), params)
    return grads[0]


def trajectory_log_grads(
    policy: Policy,
    features_seq: np.ndarray,
    actions: np.ndarray,
    params: ParamSet,
) -> np.ndarray:
    """Log-policy gradients for every (state, action) step of a trajectory.

    One vectorised pass evolves all parameter-shift variants of all
    steps together; returns shape (T, num_trainables).
    """
    features_seq = np.asarray(features_seq, dtype=float)
    actions = np.asarray(actions, dtype=np.int64)
    if isinstance(policy, SoftmaxObservablePolicy):
        return _softmax_traj_grads(policy, features_seq, actions, params)
    return _measurement_traj_grads(policy, features_seq, actions, params)


def _stacked_shift_rows(config, params, features_seq):
    """Shift rows of every step stacked into one batch."""
    blocks = [ansatz.shift_rows(config, params, f) for f in features_seq]
    thetas = np.concatenate([b[0] for b in blocks])
    lams = np.concatenate([b[1] for b in blocks])
    coeffs = [b[2] for b in blocks]
    owners = [b[3] for b in blocks]
    feat_rows = np.concatenate(
        [np.broadcast_to(f, (len(b[2]), len(f))) for f, b in zip(features_seq, blocks)]
    )
    sizes = [len(b[2]) for b in blocks]
    return thetas, lams, feat_rows, coeffs, owners, sizes


def _measurement_traj_grads(policy, features_seq, actions, params):
    config = policy.model
    steps = features_seq.shape[0]
    total = num_trainables(policy)
    member = _member_matrix(policy.postfn)

    base = _batch_probs(
        config,
        np.broadcast_to(params.theta, (steps, len(params.theta))),
        np.broadcast_to(params.lam, (steps, len(params.lam))),
        features_seq,
    )
    base_action_probs = base @ member
    p_taken = base_action_probs[np.arange(steps), actions]
    if (p_taken == 0.0).any():
        bad = int(np.nonzero(p_taken == 0.0)[0][0])
        raise ZeroProbabilityError(
            f"action {actions[bad]} has zero probability at step {bad}"
        )

    thetas, lams, feat_rows, coeffs, owners, sizes = _stacked_shift_rows(
        config, params, features_seq
    )
    probs = _batch_probs(config, thetas, lams, feat_rows)
    shifted_action_probs = probs @ member

    grads = np.zeros((steps, total))
    offset = 0
    for t in range(steps):
        size = sizes[t]
        expvals = shifted_action_probs[offset : offset + size, actions[t]]
        np.add.at(grads[t], owners[t], coeffs[t] * expvals)
        grads[t] /= max(p_taken[t], PROB_CLAMP)
        offset += size
    return grads


def _softmax_traj_grads(policy, features_seq, actions, params):
    config = policy.model
    steps = features_seq.shape[0]
    n_circuit = ansatz.total_params(config)
    num_actions = policy.num_actions
    signs = _z_signs(config.n_qubits, policy.z_qubits)

    base = _batch_probs(
        config,
        np.broadcast_to(params.theta, (steps, len(params.theta))),
        np.broadcast_to(params.lam, (steps, len(params.lam))),
        features_seq,
    )
    obs = base @ signs

    thetas, lams, feat_rows, coeffs, owners, sizes = _stacked_shift_rows(
        config, params, features_seq
    )
    probs = _batch_probs(config, thetas, lams, feat_rows)
    shifted_obs = probs @ signs

    grads = np.zeros((steps, n_circuit + num_actions))
    offset = 0
    for t in range(steps):
        size = sizes[t]
        pi = _softmax(policy.beta * policy.weights * obs[t])
        grad_obs = np.zeros(n_circuit)
        np.add.at(grad_obs, owners[t], coeffs[t] * shifted_obs[offset : offset + size])
        bracket = policy.weights[actions[t]] - pi @ policy.weights
        grads[t, :n_circuit] = policy.beta * bracket * grad_obs
        indicator = np.zeros(num_actions)
        indicator[actions[t]] = 1.0
        grads[t, n_circuit:] = policy.beta * obs[t] * (indicator - pi)
        offset += size
    return grads
