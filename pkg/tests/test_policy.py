import numpy as np
import pytest

from qpglab import ansatz, decode, policy, qsim
from qpglab.ansatz import ModelConfig, ParamSet


def _instance(n=3, d=2, seed=0, zero_feature=None):
    rng = np.random.default_rng(seed)
    config = ModelConfig(n, d)
    params = ansatz.init_params(config, rng)
    params.lam[:] = rng.normal(1.0, 0.4, size=params.lam.shape)
    features = rng.uniform(-1, 1, n)
    if zero_feature is not None:
        features[zero_feature] = 0.0
    return config, params, features, rng


def dense_z(n, qubits):
    """Independent oracle: the Z-mask observable as a dense matrix."""
    out = np.array([[1.0]])
    for q in reversed(range(n)):
        factor = np.diag([1.0, -1.0]) if q in qubits else np.eye(2)
        out = np.kron(out, factor)
    return out


def test_all_zero_parameters_give_point_mass():
    config = ModelConfig(3, 1)
    n_theta, n_lam = ansatz.param_counts(config)
    params = ParamSet(np.zeros(n_theta), np.zeros(n_lam))
    pol = policy.MeasurementPolicy(config, decode.RecursiveParity(3, 2))
    probs = policy.action_probs(pol, np.zeros(3), params)
    assert probs[0] == pytest.approx(1.0, abs=1e-14)


def test_action_probs_is_distribution():
    config, params, features, _ = _instance()
    pol = policy.MeasurementPolicy(config, decode.RecursiveParity(3, 4))
    probs = policy.action_probs(pol, features, params)
    assert probs.shape == (4,)
    assert (probs >= 0).all()
    assert probs.sum() == pytest.approx(1.0, abs=1e-9)


def test_parity_policy_matches_dense_observable():
    config, params, features, _ = _instance(seed=4)
    pol = policy.MeasurementPolicy(config, decode.RecursiveParity(3, 2))
    probs = policy.action_probs(pol, features, params)
    state = ansatz.prepare_state(config, params, features)
    expv = np.real(np.conj(state.amps) @ (dense_z(3, {0, 1, 2}) @ state.amps))
    for a in (0, 1):
        assert probs[a] == pytest.approx(((-1) ** a * expv + 1) / 2, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_observable_equivalences(seed):
    config, params, features, _ = _instance(n=4, d=1, seed=seed)
    state = ansatz.prepare_state(config, params, features)

    cases = [
        (decode.MostSignificantBit(4), {3}),
        (decode.PrefixParity(4, 2), {3, 2}),
        (decode.PrefixParity(4, 3), {3, 2, 1}),
        (decode.RecursiveParity(4, 2), {3, 2, 1, 0}),
    ]
    for fn, qubits in cases:
        probs = policy.action_probs(
            policy.MeasurementPolicy(config, fn), features, params
        )
        expv = np.real(np.conj(state.amps) @ (dense_z(4, qubits) @ state.amps))
        for a in (0, 1):
            assert probs[a] == pytest.approx(((-1) ** a * expv + 1) / 2, abs=1e-12)

    mask_expv = policy.z_mask_expectation(state, range(4))
    assert policy.parity_via_ancilla(state) == pytest.approx(mask_expv, abs=1e-12)


def test_shots_mode_estimates_exact_probabilities():
    config, params, features, rng = _instance(seed=9)
    exact = policy.action_probs(
        policy.MeasurementPolicy(config, decode.RecursiveParity(3, 2)),
        features,
        params,
    )
    shot_pol = policy.MeasurementPolicy(
        config, decode.RecursiveParity(3, 2), policy.Shots(100_000)
    )
    estimate = policy.action_probs(shot_pol, features, params, rng)
    assert np.abs(estimate - exact).max() < 0.01  # 3 sigma for 1e5 shots


def test_shots_mode_needs_rng():
    config, params, features, _ = _instance()
    shot_pol = policy.MeasurementPolicy(
        config, decode.RecursiveParity(3, 2), policy.Shots(10)
    )
    with pytest.raises(ValueError):
        policy.action_probs(shot_pol, features, params)


def test_single_measurement_sampling_matches_distribution():
    config, params, features, rng = _instance(seed=2)
    shot_pol = policy.MeasurementPolicy(
        config, decode.RecursiveParity(3, 2), policy.Shots(1)
    )
    exact = policy.action_probs(
        policy.MeasurementPolicy(config, decode.RecursiveParity(3, 2)),
        features,
        params,
    )
    trials = 20_000
    draws = np.array(
        [policy.sample_action(shot_pol, features, params, rng) for _ in range(trials)]
    )
    freq = np.mean(draws == 1)
    sigma = np.sqrt(exact[1] * (1 - exact[1]) / trials)
    assert abs(freq - exact[1]) < 3.5 * sigma + 1e-4


def test_sample_action_deterministic_given_seed():
    config, params, features, _ = _instance(seed=5)
    pol = policy.MeasurementPolicy(config, decode.RecursiveParity(3, 2))
    first = [
        policy.sample_action(pol, features, params, np.random.default_rng(11))
        for _ in range(3)
    ]
    second = [
        policy.sample_action(pol, features, params, np.random.default_rng(11))
        for _ in range(3)
    ]
    assert first == second


def test_shot_estimator_unbiased_with_bounded_variance():
    config, params, features, rng = _instance(seed=6)
    exact = policy.action_probs(
        policy.MeasurementPolicy(config, decode.RecursiveParity(3, 2)),
        features,
        params,
    )
    shots = 100
    shot_pol = policy.MeasurementPolicy(
        config, decode.RecursiveParity(3, 2), policy.Shots(shots)
    )
    estimates = np.array(
        [policy.action_probs(shot_pol, features, params, rng)[0] for _ in range(800)]
    )
    assert abs(estimates.mean() - exact[0]) < 4 * np.sqrt(1 / (4 * shots) / 800)
    assert estimates.var() <= 1 / (4 * shots) + 1e-4


def _finite_difference_log_grad(pol, features, action, params, h=1e-5):
    flat0 = policy.flat_trainables(pol, params)
    fd = np.zeros_like(flat0)
    for j in range(len(flat0)):
        up, down = flat0.copy(), flat0.copy()
        up[j] += h
        down[j] -= h
        p_up, pol_up = policy.apply_flat(pol, up)
        p_dn, pol_dn = policy.apply_flat(pol, down)
        fd[j] = (
            np.log(policy.action_probs(pol_up, features, p_up)[action])
            - np.log(policy.action_probs(pol_dn, features, p_dn)[action])
        ) / (2 * h)
    return fd


@pytest.mark.parametrize("seed", range(4))
def test_measurement_log_grad_matches_finite_differences(seed):
    config, params, features, _ = _instance(seed=seed)
    pol = policy.MeasurementPolicy(config, decode.RecursiveParity(3, 2))
    grad = policy.log_prob_grad(pol, features, 1, params)
    fd = _finite_difference_log_grad(pol, features, 1, params)
    assert np.abs(grad - fd).max() < 1e-5


def test_lambda_components_vanish_for_zero_features():
    config, params, features, _ = _instance(seed=3, zero_feature=1)
    pol = policy.MeasurementPolicy(config, decode.RecursiveParity(3, 2))
    grad = policy.log_prob_grad(pol, features, 0, params)
    n_theta, _ = ansatz.param_counts(config)
    n = config.n_qubits
    # features[1] drives qubit n-1-1 = 1; its lam entries are 2*1, 2*1+1
    # within each encoding block of 2n entries.
    for block in range(config.depth):
        for offset in (2, 3):
            assert grad[n_theta + block * 2 * n + offset] == 0.0


def test_probability_weighted_grads_sum_to_zero():
    config, params, features, _ = _instance(seed=8)
    pol = policy.MeasurementPolicy(config, decode.RecursiveParity(3, 4))
    probs = policy.action_probs(pol, features, params)
    acc = np.zeros(policy.num_trainables(pol))
    for action in range(4):
        acc += probs[action] * policy.log_prob_grad(pol, features, action, params)
    assert np.abs(acc).max() < 1e-8


def test_zero_probability_action_raises():
    config = ModelConfig(2, 1)
    n_theta, n_lam = ansatz.param_counts(config)
    params = ParamSet(np.zeros(n_theta), np.zeros(n_lam))
    pol = policy.MeasurementPolicy(config, decode.RecursiveParity(2, 2))
    with pytest.raises(policy.ZeroProbabilityError):
        policy.log_prob_grad(pol, np.zeros(2), 1, params)


def test_softmax_uniform_cases():
    config, params, features, _ = _instance(seed=1)
    equal_weights = policy.SoftmaxObservablePolicy(config, np.full(4, 0.7))
    assert np.allclose(
        policy.action_probs(equal_weights, features, params), 0.25, atol=1e-12
    )
    zero_beta = policy.SoftmaxObservablePolicy(
        config, np.array([0.4, -1.0, 0.2, 0.9]), beta=0.0
    )
    assert np.allclose(
        policy.action_probs(zero_beta, features, params), 0.25, atol=1e-12
    )


def test_softmax_logits_on_zero_state():
    config = ModelConfig(3, 1)
    n_theta, n_lam = ansatz.param_counts(config)
    params = ParamSet(np.zeros(n_theta), np.zeros(n_lam))
    weights = np.array([0.3, -0.5])
    pol = policy.SoftmaxObservablePolicy(config, weights, beta=2.0)
    probs = policy.action_probs(pol, np.zeros(3), params)
    # All masked bits are 0 on |0...0>, so <O> = +1 and logits are beta*w.
    logits = 2.0 * weights
    expected = np.exp(logits) / np.exp(logits).sum()
    assert np.allclose(probs, expected, atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_softmax_log_grad_matches_finite_differences(seed):
    config, params, features, _ = _instance(seed=seed)
    pol = policy.SoftmaxObservablePolicy(
        config, np.array([0.5, -0.3, 0.1, 0.8]), beta=1.3
    )
    grad = policy.log_prob_grad(pol, features, 2, params)
    fd = _finite_difference_log_grad(pol, features, 2, params)
    assert np.abs(grad - fd).max() < 1e-5


def test_softmax_weight_grads_sum_to_zero_over_actions():
    config, params, features, _ = _instance(seed=7)
    pol = policy.SoftmaxObservablePolicy(config, np.array([0.5, -0.3, 0.1, 0.8]))
    n_circuit = ansatz.total_params(config)
    for action in range(4):
        grad = policy.log_prob_grad(pol, features, action, params)
        assert abs(grad[n_circuit:].sum()) < 1e-12


def test_softmax_equal_weights_kill_circuit_gradient():
    config, params, features, _ = _instance(seed=7)
    pol = policy.SoftmaxObservablePolicy(config, np.full(4, 0.2))
    grad = policy.log_prob_grad(pol, features, 1, params)
    n_circuit = ansatz.total_params(config)
    assert np.abs(grad[:n_circuit]).max() < 1e-12


def test_trajectory_grads_match_single_step_calls():
    config, params, _, rng = _instance(seed=12)
    pol = policy.MeasurementPolicy(config, decode.RecursiveParity(3, 2))
    feats = rng.uniform(-1, 1, (5, 3))
    actions = rng.integers(0, 2, 5)
    stacked = policy.trajectory_log_grads(pol, feats, actions, params)
    for t in range(5):
        single = policy.log_prob_grad(pol, feats[t], int(actions[t]), params)
        assert np.abs(stacked[t] - single).max() < 1e-14
