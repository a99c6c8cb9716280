"""Benchmark environments and feature encoders.

Environments follow a minimal episodic protocol: ``reset(rng)`` returns
the initial observation and ``step(action, rng)`` returns ``(obs,
reward, done)``.  Episodes end on a terminal transition or when the
horizon is reached; the runner in :mod:`qpglab.train` enforces nothing
beyond that protocol.  Encoders map raw observations to the length-n
feature vectors consumed by the circuit; features are listed in wire
order (the first feature drives the uppermost wire, i.e. the most
significant measured bit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

REWARD_SCHEMES = ("pm1", "acc01")


def optimal_map(kind: str, num_states: int, num_actions: int) -> np.ndarray:
    """Named state-to-optimal-action assignments for bandit tasks.

    ``blocks`` gives contiguous equal blocks (state s -> s * M // S),
    ``mod`` cycles (s -> s mod M), ``bit:<j>`` uses bit j of the state
    index (two actions), and ``list:<a0,a1,...>`` is explicit.
    """
    if kind == "blocks":
        return np.arange(num_states) * num_actions // num_states
    if kind == "mod":
        return np.arange(num_states) % num_actions
    if kind.startswith("bit:"):
        j = int(kind.split(":", 1)[1])
        if num_actions != 2:
            raise ValueError("bit:<j> maps need exactly 2 actions")
        return (np.arange(num_states) >> j) & 1
    if kind.startswith("list:"):
        values = np.array([int(v) for v in kind.split(":", 1)[1].split(",")])
        if len(values) != num_states:
            raise ValueError(f"list map needs {num_states} entries, got {len(values)}")
        return values
    raise ValueError(f"unknown optimal map {kind!r}")


class ContextualBandits:
    """Single-step task: a uniformly random state, one rewarded action.

    Rewards are +1/-1 (``pm1``) or 1/0 (``acc01``) for the optimal /
    any other action, so under ``acc01`` the expected reward equals the
    share of optimally answered states.
    """

    def __init__(self, num_states: int, num_actions: int, optimal, reward_scheme: str = "pm1"):
        optimal = np.asarray(optimal, dtype=np.int64)
        if optimal.shape != (num_states,):
            raise ValueError(f"optimal map must assign all {num_states} states")
        if optimal.min() < 0 or optimal.max() >= num_actions:
            raise ValueError("optimal actions out of range")
        if reward_scheme not in REWARD_SCHEMES:
            raise ValueError(f"reward scheme must be one of {REWARD_SCHEMES}")
        self.num_states = num_states
        self.num_actions = num_actions
        self.optimal = optimal
        self.reward_scheme = reward_scheme
        self.horizon = 1
        self._state = None

    def reset(self, rng: np.random.Generator) -> int:
        self._state = int(rng.integers(self.num_states))
        return self._state

    def step(self, action: int, rng: np.random.Generator | None = None):
        if not 0 <= action < self.num_actions:
            raise ValueError(f"action {action} out of range")
        hit = action == self.optimal[self._state]
        if self.reward_scheme == "pm1":
            reward = 1.0 if hit else -1.0
        else:
            reward = 1.0 if hit else 0.0
        return self._state, reward, True

    def preimage_sizes(self) -> np.ndarray:
        return np.bincount(self.optimal, minlength=self.num_actions)

    def is_uniform(self) -> bool:
        """Equal-size optimal-action preimages; with the uniform state
        draw, each action's state set is then visited 1/M of the time."""
        sizes = self.preimage_sizes()
        return bool((sizes == self.num_states // self.num_actions).all()) and (
            self.num_states % self.num_actions == 0
        )


DEFAULT_LAKE_MAP = ("SFFF", "FHFH", "FFFH", "HFFG")

# Action order: left, down, right, up.
_LAKE_MOVES = ((0, -1), (1, 0), (0, 1), (-1, 0))


@dataclass
class FrozenLakeRewards:
    step: float = -1.0
    hole: float = -100.0
    goal: float = 100.0


class FrozenLake:
    """Deterministic gridworld over {start, frozen, hole, goal} cells.

    Moves that would leave the grid keep the position unchanged; the
    episode ends in a hole, at the goal, or at the horizon.  With
    ``slippery`` on, the intended move is replaced by one of the two
    perpendicular moves with probability 1/3 each.
    """

    def __init__(
        self,
        grid=DEFAULT_LAKE_MAP,
        rewards: FrozenLakeRewards | None = None,
        horizon: int = 100,
        slippery: bool = False,
    ):
        grid = tuple(grid)
        rows = len(grid)
        cols = len(grid[0]) if rows else 0
        if rows == 0 or any(len(r) != cols for r in grid):
            raise ValueError("grid rows must be non-empty and equal length")
        cells = "".join(grid)
        if set(cells) - set("SFHG"):
            raise ValueError("grid may only contain S, F, H, G cells")
        if cells.count("S") != 1 or cells.count("G") != 1:
            raise ValueError("grid needs exactly one start and one goal")
        self.grid = grid
        self.rows = rows
        self.cols = cols
        self.start = cells.index("S")
        self.rewards = rewards or FrozenLakeRewards()
        self.horizon = horizon
        self.slippery = slippery
        self.num_actions = 4
        self.num_states = rows * cols
        self._pos = None
        self._steps = 0

    @classmethod
    def from_file(cls, path, **kwargs) -> "FrozenLake":
        with open(path) as fh:
            grid = [line.strip() for line in fh if line.strip()]
        return cls(grid, **kwargs)

    def cell(self, index: int) -> str:
        return self.grid[index // self.cols][index % self.cols]

    def reset(self, rng: np.random.Generator) -> int:
        self._pos = self.start
        self._steps = 0
        return self._pos

    def step(self, action: int, rng: np.random.Generator | None = None):
        if not 0 <= action < 4:
            raise ValueError(f"action {action} out of range")
        if self.slippery:
            if rng is None:
                raise ValueError("slippery dynamics need an rng")
            roll = rng.integers(3)
            if roll == 1:
                action = (action - 1) % 4
            elif roll == 2:
                action = (action + 1) % 4
        dr, dc = _LAKE_MOVES[action]
        r, c = divmod(self._pos, self.cols)
        nr, nc = r + dr, c + dc
        if 0 <= nr < self.rows and 0 <= nc < self.cols:
            self._pos = nr * self.cols + nc
        self._steps += 1
        kind = self.cell(self._pos)
        if kind == "H":
            return self._pos, self.rewards.hole, True
        if kind == "G":
            return self._pos, self.rewards.goal, True
        return self._pos, self.rewards.step, self._steps >= self.horizon


# Classic cart-pole physical constants (reference classic-control dynamics).
_GRAVITY = 9.8
_CART_MASS = 1.0
_POLE_MASS = 0.1
_POLE_HALF_LENGTH = 0.5
_FORCE = 10.0
_DT = 0.02
_X_LIMIT = 2.4
_ANGLE_LIMIT = 12.0 * math.pi / 180.0


class CartPole:
    """Pole balancing with Euler-integrated classic dynamics.

    State is (cart position, cart velocity, pole angle, pole angular
    velocity); actions push the cart with -10 N (0) or +10 N (1).  The
    episode fails when |x| > 2.4 m or |angle| > 12 degrees and is
    otherwise capped at the horizon (200 for v0, 500 for v1), with
    reward +1 for every step taken.
    """

    def __init__(self, version: str = "v0"):
        if version not in ("v0", "v1"):
            raise ValueError("version must be v0 or v1")
        self.version = version
        self.horizon = 200 if version == "v0" else 500
        self.num_actions = 2
        self.state_dim = 4
        self._state = None
        self._steps = 0

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self._state = rng.uniform(-0.05, 0.05, size=4)
        self._steps = 0
        return self._state.copy()

    def step(self, action: int, rng: np.random.Generator | None = None):
        if action not in (0, 1):
            raise ValueError(f"action {action} out of range")
        x, x_dot, theta, theta_dot = self._state
        force = _FORCE if action == 1 else -_FORCE
        cos_t = math.cos(theta)
        sin_t = math.sin(theta)
        total_mass = _CART_MASS + _POLE_MASS
        pole_ml = _POLE_MASS * _POLE_HALF_LENGTH
        temp = (force + pole_ml * theta_dot**2 * sin_t) / total_mass
        theta_acc = (_GRAVITY * sin_t - cos_t * temp) / (
            _POLE_HALF_LENGTH * (4.0 / 3.0 - _POLE_MASS * cos_t**2 / total_mass)
        )
        x_acc = temp - pole_ml * theta_acc * cos_t / total_mass
        x = x + _DT * x_dot
        x_dot = x_dot + _DT * x_acc
        theta = theta + _DT * theta_dot
        theta_dot = theta_dot + _DT * theta_acc
        self._state = np.array([x, x_dot, theta, theta_dot])
        self._steps += 1
        failed = abs(x) > _X_LIMIT or abs(theta) > _ANGLE_LIMIT
        done = failed or self._steps >= self.horizon
        return self._state.copy(), 1.0, done


# ---------------------------------------------------------------------------
# Feature encoders


class BinaryEncoder:
    """Discrete state index -> one angle per bit, 0 or pi.

    The binary expansion of the index is listed most significant bit
    first (wire order), each bit becoming the angle ``bit * pi``, so
    with unit scale factors the two bit values prepare orthogonal
    single-qubit states.
    """

    def __init__(self, n_bits: int):
        if n_bits < 1:
            raise ValueError("need at least one bit")
        self.n_bits = n_bits
        self.output_dim = n_bits

    def encode(self, state: int) -> np.ndarray:
        state = int(state)
        if not 0 <= state < (1 << self.n_bits):
            raise ValueError(f"state {state} does not fit in {self.n_bits} bits")
        bits = (state >> np.arange(self.n_bits - 1, -1, -1)) & 1
        return bits * np.pi


class ContinuousEncoder:
    """Per-dimension scaling of a real vector into [-1, 1).

    Each component is divided by its bound and clipped to
    [-1, 1 - ulp]; components beyond the bound therefore saturate.
    """

    def __init__(self, bounds):
        self.bounds = np.asarray(bounds, dtype=float)
        if (self.bounds <= 0).any():
            raise ValueError("bounds must be positive")
        self.output_dim = len(self.bounds)
        self._upper = np.nextafter(1.0, 0.0)

    def encode(self, state) -> np.ndarray:
        state = np.asarray(state, dtype=float)
        if state.shape != self.bounds.shape:
            raise ValueError(
                f"state has shape {state.shape}, expected {self.bounds.shape}"
            )
        return np.clip(state / self.bounds, -1.0, self._upper)


CARTPOLE_BOUNDS = (_X_LIMIT, 2.5, _ANGLE_LIMIT, 2.5)


def cartpole_encoder() -> ContinuousEncoder:
    """Default CartPole scaling: limits for position/angle, velocity clip 2.5."""
    return ContinuousEncoder(CARTPOLE_BOUNDS)
