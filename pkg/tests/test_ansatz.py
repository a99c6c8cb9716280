import numpy as np
import pytest

from qpglab import ansatz, qsim
from qpglab.ansatz import ModelConfig, ParamSet

# Published model sizes: ((n, d), |theta| + |lam|).
PUBLISHED_SIZES = [
    ((4, 1), 24),
    ((6, 1), 36),
    ((6, 2), 60),
    ((8, 1), 48),
    ((8, 2), 80),
    ((8, 3), 112),
    ((10, 1), 60),
    ((10, 2), 100),
    ((10, 3), 140),
    ((10, 4), 180),
]


@pytest.mark.parametrize("shape,total", PUBLISHED_SIZES)
def test_param_counts_match_published_sizes(shape, total):
    n, d = shape
    n_theta, n_lam = ansatz.param_counts(ModelConfig(n, d))
    assert n_theta == 2 * n * (d + 1)
    assert n_lam == 2 * n * d
    assert n_theta + n_lam == total


def test_param_count_examples():
    assert ansatz.param_counts(ModelConfig(4, 1)) == (16, 8)
    assert ansatz.param_counts(ModelConfig(6, 2)) == (36, 24)
    assert ansatz.param_counts(ModelConfig(10, 4)) == (100, 80)


def _random_params(config, seed, lam_spread=0.4):
    rng = np.random.default_rng(seed)
    params = ansatz.init_params(config, rng)
    params.lam[:] = rng.normal(1.0, lam_spread, size=params.lam.shape)
    return params, rng


def test_all_zero_parameters_give_zero_state():
    config = ModelConfig(3, 2)
    n_theta, n_lam = ansatz.param_counts(config)
    params = ParamSet(np.zeros(n_theta), np.zeros(n_lam))
    state = ansatz.prepare_state(config, params, [0.3, -0.7, 0.2])
    expected = np.zeros(8)
    expected[0] = 1.0
    assert np.allclose(state.amps, expected, atol=0)


def test_single_qubit_skips_entangler():
    config = ModelConfig(1, 1)
    n_theta, n_lam = ansatz.param_counts(config)
    theta = np.zeros(n_theta)
    theta[1] = 0.9  # Ry angle of the first block
    params = ParamSet(theta, np.zeros(n_lam))
    state = ansatz.prepare_state(config, params, [0.0])
    assert abs(state.amps[0]) == pytest.approx(np.cos(0.45), abs=1e-12)
    assert abs(state.amps[1]) == pytest.approx(np.sin(0.45), abs=1e-12)


def _gatewise_reference(config, params, features):
    """Independent circuit construction, one public gate at a time."""
    n, d = config.n_qubits, config.depth
    state = qsim.zero_state(n)
    for layer in range(d + 1):
        base = 2 * n * layer
        for q in range(n):
            qsim.apply_rz(state, q, params.theta[base + 2 * q])
            qsim.apply_ry(state, q, params.theta[base + 2 * q + 1])
        for i, j in ansatz.entangler_pairs(n):
            if config.entangler == "cz":
                qsim.apply_cz(state, i, j)
            else:
                qsim.apply_cx(state, i, j)
        if layer < d:
            enc = 2 * n * layer
            for q in range(n):
                s = features[n - 1 - q]
                qsim.apply_ry(state, q, params.lam[enc + 2 * q] * s)
                qsim.apply_rz(state, q, params.lam[enc + 2 * q + 1] * s)
    return state


@pytest.mark.parametrize("entangler", ["cz", "cx"])
def test_prepare_state_matches_gatewise_construction(entangler):
    config = ModelConfig(3, 2, entangler)
    params, rng = _random_params(config, 11)
    features = rng.uniform(-1, 1, 3)
    fast = ansatz.prepare_state(config, params, features)
    slow = _gatewise_reference(config, params, features)
    assert np.abs(fast.amps - slow.amps).max() < 1e-12


def test_prepare_state_deterministic():
    config = ModelConfig(4, 1)
    params, rng = _random_params(config, 3)
    features = rng.uniform(-1, 1, 4)
    first = ansatz.prepare_state(config, params, features)
    second = ansatz.prepare_state(config, params, features)
    assert (first.amps == second.amps).all()
    assert first.norm_squared() == pytest.approx(1.0, abs=1e-12)


def test_prepare_state_rejects_dimension_mismatch():
    config = ModelConfig(3, 1)
    params, _ = _random_params(config, 0)
    with pytest.raises(ValueError):
        ansatz.prepare_state(config, params, [0.1, 0.2])
    with pytest.raises(ValueError):
        ansatz.prepare_state(ModelConfig(3, 2), params, [0.1, 0.2, 0.3])


def test_shift_plan_variational_terms():
    config = ModelConfig(2, 1)
    params, rng = _random_params(config, 5)
    features = rng.uniform(-1, 1, 2)
    plan = ansatz.shift_plan(config, params, features, param_index=3)
    assert [t.coeff for t in plan.terms] == [0.5, -0.5]
    assert plan.terms[0].params.theta[3] == pytest.approx(params.theta[3] + np.pi / 2)
    assert plan.terms[1].params.theta[3] == pytest.approx(params.theta[3] - np.pi / 2)


def test_shift_plan_zero_feature_kills_coefficients():
    config = ModelConfig(2, 1)
    params, _ = _random_params(config, 6)
    features = np.array([0.5, 0.0])
    n_theta, _ = ansatz.param_counts(config)
    # lam index 2 belongs to qubit 1, which reads features[0]; index 0 to
    # qubit 0, reading features[1] = 0.
    plan = ansatz.shift_plan(config, params, features, param_index=n_theta + 0)
    assert [t.coeff for t in plan.terms] == [0.0, 0.0]


def test_shift_plan_rejects_bad_index():
    config = ModelConfig(2, 1)
    params, _ = _random_params(config, 6)
    with pytest.raises(ValueError):
        ansatz.shift_plan(config, params, np.zeros(2), param_index=100)


def _probability_vector(config, params, features):
    return qsim.probabilities(ansatz.prepare_state(config, params, features))


def test_shift_rule_matches_finite_differences_everywhere():
    # Every basis-state probability, every parameter, n=3 d=2.
    config = ModelConfig(3, 2)
    params, rng = _random_params(config, 21)
    features = rng.uniform(-1, 1, 3)
    n_theta, n_lam = ansatz.param_counts(config)
    h = 1e-5
    for idx in range(n_theta + n_lam):
        plan = ansatz.shift_plan(config, params, features, idx)
        shifted = sum(
            term.coeff * _probability_vector(config, term.params, features)
            for term in plan.terms
        )
        up = params.copy()
        down = params.copy()
        if idx < n_theta:
            up.theta[idx] += h
            down.theta[idx] -= h
        else:
            up.lam[idx - n_theta] += h
            down.lam[idx - n_theta] -= h
        fd = (
            _probability_vector(config, up, features)
            - _probability_vector(config, down, features)
        ) / (2 * h)
        assert np.abs(shifted - fd).max() < 1e-5


def test_encoding_linear_in_scale_factors():
    # Doubling both scale entries of one qubit equals doubling its feature.
    config = ModelConfig(3, 1)
    params, rng = _random_params(config, 8)
    features = rng.uniform(-1, 1, 3)
    doubled_params = params.copy()
    qubit = 1
    doubled_params.lam[2 * qubit] *= 2.0
    doubled_params.lam[2 * qubit + 1] *= 2.0
    doubled_features = features.copy()
    doubled_features[config.n_qubits - 1 - qubit] *= 2.0
    left = ansatz.prepare_state(config, doubled_params, features)
    right = ansatz.prepare_state(config, params, doubled_features)
    assert np.abs(left.amps - right.amps).max() < 1e-12


@pytest.mark.parametrize("n,d", [(2, 1), (3, 2), (4, 3), (5, 1)])
def test_gate_count_audit(n, d):
    counts = ansatz.gate_counts(ModelConfig(n, d))
    assert counts["rotations"] == 2 * n * (d + 1) + 2 * n * d
    assert counts["entanglers"] == (d + 1) * n * (n - 1) // 2


def test_batch_rows_match_single_evaluations():
    config = ModelConfig(3, 2)
    params, rng = _random_params(config, 30)
    features = rng.uniform(-1, 1, 3)
    thetas, lams, coeffs, owner = ansatz.shift_rows(config, params, features)
    batch = ansatz.run_batch(
        config, thetas, lams, np.broadcast_to(features, (len(coeffs), 3))
    )
    for row in range(0, len(coeffs), 7):
        single = ansatz.prepare_state(
            config, ParamSet(thetas[row], lams[row]), features
        )
        assert (batch[row] == single.amps).all()


def test_checkpoint_round_trip(tmp_path):
    config = ModelConfig(4, 2, "cx")
    params, _ = _random_params(config, 13)
    path = tmp_path / "params.txt"
    ansatz.save_params(path, config, params)
    loaded_config, loaded = ansatz.load_params(path)
    assert loaded_config == config
    assert (loaded.theta == params.theta).all()
    assert (loaded.lam == params.lam).all()
    header = path.read_text().splitlines()[0]
    assert header == "n=4 d=2 entangler=cx"


def test_init_params_conventions():
    config = ModelConfig(3, 1)
    rng = np.random.default_rng(0)
    params = ansatz.init_params(config, rng)
    assert (params.theta >= -np.pi).all() and (params.theta < np.pi).all()
    assert (params.lam == 1.0).all()
    normal = ansatz.init_params(config, rng, theta_init="normal", theta_scale=0.1)
    assert np.abs(normal.theta).max() < 1.0  # loose sanity for sigma=0.1
