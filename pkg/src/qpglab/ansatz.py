"""Hardware-efficient data re-uploading circuit and its parameter map.

Circuit layout for ``n`` qubits and depth ``d``::

    V_0  E_1  V_1  E_2 ... E_d  V_d      (measured in the computational basis)

Each variational block ``V_l`` applies per qubit an Rz(theta) followed
by an Ry(theta) and is itself followed by the all-to-all entangler, so
there are ``d+1`` variational blocks and ``d+1`` entangler layers.
Each encoding block ``E_l`` applies per qubit an Ry(lam * s) followed
by an Rz(lam' * s), where ``s`` is the feature routed to that qubit
and ``lam, lam'`` are that layer's trainable scale factors.  Feature
vectors are listed in wire order, top wire first: ``features[i]``
drives qubit ``n - 1 - i``, so the first feature sits on the qubit
that contributes the most significant measured bit.

Parameter layout (flat arrays):

* ``theta`` has ``2 n (d+1)`` entries: block-major, then qubit, then
  (Rz angle, Ry angle).
* ``lam`` has ``2 n d`` entries: encoding-block-major, then qubit, then
  (Ry scale, Rz scale).

Entangler pairs ``(i, j)`` with ``i < j`` are applied in lexicographic
order; for CX the control is ``i`` and the target ``j``.  A CZ layer is
diagonal, so it is applied as one precomputed sign vector.

Gradients follow the parameter-shift rule: a rotation angle shifted by
+-pi/2 with coefficients +-1/2.  A scale factor feeding feature ``s``
enters only through the angle ``lam * s``, so its rule shifts the angle
by +-pi/2 (i.e. the scale by +-pi/(2s)) with coefficients +-s/2; when
``s`` is exactly zero the derivative vanishes identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import qsim

ENTANGLERS = ("cz", "cx")


@dataclass(frozen=True)
class ModelConfig:
    """Shape of the circuit: qubit count, re-uploading depth, entangler."""

    n_qubits: int
    depth: int = 1
    entangler: str = "cz"

    def __post_init__(self):
        if not 1 <= self.n_qubits <= qsim.MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {qsim.MAX_QUBITS}]")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.entangler not in ENTANGLERS:
            raise ValueError(f"entangler must be one of {ENTANGLERS}")


@dataclass(eq=False)
class ParamSet:
    """Trainable circuit parameters: rotation angles and scale factors."""

    theta: np.ndarray
    lam: np.ndarray

    def copy(self) -> "ParamSet":
        return ParamSet(self.theta.copy(), self.lam.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.theta, self.lam])


def param_counts(config: ModelConfig) -> tuple[int, int]:
    """Number of (rotation, scale) parameters for a model shape."""
    n, d = config.n_qubits, config.depth
    return 2 * n * (d + 1), 2 * n * d


def total_params(config: ModelConfig) -> int:
    n_theta, n_lam = param_counts(config)
    return n_theta + n_lam


def params_from_flat(config: ModelConfig, flat: np.ndarray) -> ParamSet:
    n_theta, n_lam = param_counts(config)
    if flat.shape != (n_theta + n_lam,):
        raise ValueError(f"expected {n_theta + n_lam} parameters, got {flat.shape}")
    return ParamSet(flat[:n_theta].copy(), flat[n_theta:].copy())


def init_params(
    config: ModelConfig,
    rng: np.random.Generator,
    theta_init: str = "uniform",
    theta_scale: float = 0.1,
    lam_init: float = 1.0,
) -> ParamSet:
    """Draw initial parameters.

    ``theta_init`` is ``"uniform"`` for angles uniform over [-pi, pi)
    or ``"normal"`` for N(0, theta_scale); scale factors start at the
    constant ``lam_init``.
    """
    n_theta, n_lam = param_counts(config)
    if theta_init == "uniform":
        theta = rng.uniform(-np.pi, np.pi, size=n_theta)
    elif theta_init == "normal":
        theta = rng.normal(0.0, theta_scale, size=n_theta)
    else:
        raise ValueError(f"unknown theta_init {theta_init!r}")
    lam = np.full(n_lam, float(lam_init))
    return ParamSet(theta, lam)


def _validate(config: ModelConfig, params: ParamSet, features: np.ndarray) -> None:
    n_theta, n_lam = param_counts(config)
    if params.theta.shape != (n_theta,):
        raise ValueError(f"theta must have {n_theta} entries, got {params.theta.shape}")
    if params.lam.shape != (n_lam,):
        raise ValueError(f"lam must have {n_lam} entries, got {params.lam.shape}")
    if features.shape[-1] != config.n_qubits:
        raise ValueError(
            f"features must have length {config.n_qubits}, got {features.shape[-1]}"
        )


@lru_cache(maxsize=None)
def _cz_layer_signs(n: int) -> np.ndarray:
    # Product of all pairwise CZ diagonals: (-1)^(k choose 2) for an
    # index with k set bits.
    ones = np.bitwise_count(np.arange(1 << n, dtype=np.uint64)).astype(np.int64)
    signs = np.where((ones * (ones - 1) // 2) % 2 == 1, -1.0, 1.0)
    signs.setflags(write=False)
    return signs


def entangler_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _apply_entangler(amps: np.ndarray, config: ModelConfig) -> None:
    n = config.n_qubits
    if n == 1:
        return
    if config.entangler == "cz":
        amps *= _cz_layer_signs(n)
        return
    for i, j in entangler_pairs(n):
        src, dst = qsim._cx_swap_indices(n, i, j)
        tmp = amps[..., src].copy()
        amps[..., src] = amps[..., dst]
        amps[..., dst] = tmp


def _apply_rz_then_ry(amps: np.ndarray, n: int, qubit: int, angle_z, angle_y) -> None:
    # Fused product Ry(angle_y) @ Rz(angle_z), exact up to rounding.
    c = np.cos(angle_y / 2.0)
    s = np.sin(angle_y / 2.0)
    pm = np.exp(-0.5j * angle_z)
    pp = np.exp(0.5j * angle_z)
    qsim.apply_1q(amps, n, qubit, c * pm, -s * pp, s * pm, c * pp)


def _apply_ry_then_rz(amps: np.ndarray, n: int, qubit: int, angle_y, angle_z) -> None:
    # Fused product Rz(angle_z) @ Ry(angle_y).
    c = np.cos(angle_y / 2.0)
    s = np.sin(angle_y / 2.0)
    pm = np.exp(-0.5j * angle_z)
    pp = np.exp(0.5j * angle_z)
    qsim.apply_1q(amps, n, qubit, c * pm, -s * pm, s * pp, c * pp)


def run_batch(
    config: ModelConfig,
    thetas: np.ndarray,
    lams: np.ndarray,
    features: np.ndarray,
) -> np.ndarray:
    """Evolve a batch of parameter/feature rows through the circuit.

    ``thetas`` is (B, |theta|), ``lams`` is (B, |lam|), ``features`` is
    (B, n).  Returns the final amplitudes, shape (B, 2**n).  Row ``r``
    equals the state prepared from row ``r``'s parameters alone.
    """
    n, d = config.n_qubits, config.depth
    batch = thetas.shape[0]
    amps = np.zeros((batch, 1 << n), dtype=np.complex128)
    amps[:, 0] = 1.0
    for layer in range(d + 1):
        base = 2 * n * layer
        for q in range(n):
            _apply_rz_then_ry(
                amps,
                n,
                q,
                qsim.batch_coeff(thetas[:, base + 2 * q]),
                qsim.batch_coeff(thetas[:, base + 2 * q + 1]),
            )
        _apply_entangler(amps, config)
        if layer < d:
            enc = 2 * n * layer
            for q in range(n):
                s_q = features[:, n - 1 - q]
                _apply_ry_then_rz(
                    amps,
                    n,
                    q,
                    qsim.batch_coeff(lams[:, enc + 2 * q] * s_q),
                    qsim.batch_coeff(lams[:, enc + 2 * q + 1] * s_q),
                )
    return amps


def prepare_state(config: ModelConfig, params: ParamSet, features) -> qsim.Statevector:
    """Prepare the circuit's output state for one parameter set."""
    features = np.asarray(features, dtype=float)
    _validate(config, params, features)
    amps = run_batch(
        config,
        params.theta[None, :],
        params.lam[None, :],
        features[None, :],
    )
    return qsim.Statevector(config.n_qubits, amps[0])


def gate_counts(config: ModelConfig) -> dict:
    """Rotation and entangler gate totals for auditing the layout."""
    n, d = config.n_qubits, config.depth
    pairs = n * (n - 1) // 2
    return {
        "rotations": 2 * n * (d + 1) + 2 * n * d,
        "entanglers": (d + 1) * pairs,
    }


@dataclass
class ShiftTerm:
    params: ParamSet
    coeff: float


@dataclass
class ShiftPlan:
    """Evaluation plan whose coefficient-weighted sum is one derivative."""

    param_index: int
    terms: list[ShiftTerm] = field(default_factory=list)


def shift_plan(
    config: ModelConfig,
    params: ParamSet,
    features,
    param_index: int,
) -> ShiftPlan:
    """Parameter-shift plan for one flat parameter index (theta then lam)."""
    features = np.asarray(features, dtype=float)
    _validate(config, params, features)
    n_theta, n_lam = param_counts(config)
    if not 0 <= param_index < n_theta + n_lam:
        raise ValueError(f"param_index {param_index} out of range")
    plan = ShiftPlan(param_index)
    if param_index < n_theta:
        for sign in (1.0, -1.0):
            variant = params.copy()
            variant.theta[param_index] += sign * np.pi / 2.0
            plan.terms.append(ShiftTerm(variant, sign * 0.5))
        return plan
    j = param_index - n_theta
    qubit = (j % (2 * config.n_qubits)) // 2
    s = features[config.n_qubits - 1 - qubit]
    if s == 0.0:
        for sign in (1.0, -1.0):
            plan.terms.append(ShiftTerm(params.copy(), 0.0))
        return plan
    for sign in (1.0, -1.0):
        variant = params.copy()
        variant.lam[j] += sign * np.pi / (2.0 * s)
        plan.terms.append(ShiftTerm(variant, sign * s / 2.0))
    return plan


def shift_rows(
    config: ModelConfig,
    params: ParamSet,
    features: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """All parameter-shift variants of one parameter set, as batch rows.

    Returns ``(thetas, lams, coeffs, owner)`` where row ``r`` evaluates
    with coefficient ``coeffs[r]`` into the derivative of flat
    parameter ``owner[r]``.  Scale entries whose feature is exactly
    zero contribute no rows (their derivative is identically zero).
    """
    n_theta, n_lam = param_counts(config)
    n = config.n_qubits
    rows_theta = []
    rows_lam = []
    coeffs = []
    owner = []
    for j in range(n_theta):
        for sign in (1.0, -1.0):
            t = params.theta.copy()
            t[j] += sign * np.pi / 2.0
            rows_theta.append(t)
            rows_lam.append(params.lam)
            coeffs.append(sign * 0.5)
            owner.append(j)
    for j in range(n_lam):
        s = features[n - 1 - (j % (2 * n)) // 2]
        if s == 0.0:
            continue
        for sign in (1.0, -1.0):
            lam = params.lam.copy()
            lam[j] += sign * np.pi / (2.0 * s)
            rows_theta.append(params.theta)
            rows_lam.append(lam)
            coeffs.append(sign * s / 2.0)
            owner.append(n_theta + j)
    thetas = np.array(rows_theta) if rows_theta else np.empty((0, n_theta))
    lams = np.array(rows_lam) if rows_lam else np.empty((0, n_lam))
    return thetas, lams, np.array(coeffs), np.array(owner, dtype=np.int64)


def save_params(path, config: ModelConfig, params: ParamSet) -> None:
    """Checkpoint parameters as text: header line, then one value per line.

    The header carries ``n=<n> d=<d> entangler=<e>``; theta values come
    first, then lam values, in flat-layout order, with full round-trip
    precision.
    """
    lines = [f"n={config.n_qubits} d={config.depth} entangler={config.entangler}"]
    lines.extend(repr(float(v)) for v in params.theta)
    lines.extend(repr(float(v)) for v in params.lam)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path) -> tuple[ModelConfig, ParamSet]:
    """Load a checkpoint written by :func:`save_params`."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"empty checkpoint file {path}")
    fields = dict(item.split("=", 1) for item in lines[0].split())
    config = ModelConfig(
        n_qubits=int(fields["n"]),
        depth=int(fields["d"]),
        entangler=fields["entangler"],
    )
    n_theta, n_lam = param_counts(config)
    values = [float(v) for v in lines[1:]]
    if len(values) != n_theta + n_lam:
        raise ValueError(
            f"checkpoint holds {len(values)} values, expected {n_theta + n_lam}"
        )
    flat = np.array(values)
    return config, ParamSet(flat[:n_theta], flat[n_theta:])
