"""Classical post-processing of measured bitstrings into actions.

A post-processing function maps every n-bit measurement outcome to one
of M actions; equivalently it partitions the 2**n basis strings into M
action classes.  This module provides the concrete families used in
the experiments, the extracted-information / globality measures that
rank them, the recursive construction that achieves maximal globality
(with its closed form), and enumeration/statistics over the space of
balanced partitionings.

Bitstrings are handled as basis indices per the :mod:`qpglab.qsim`
convention: index ``i`` is the string ``b_{n-1} ... b_0`` with bit
``b_q`` at significance ``2**q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

import numpy as np

# Bitmask-based extracted-information search is cached per qubit count
# up to this size; beyond it a slower on-the-fly scan is used.
_MASK_CACHE_LIMIT = 10
_BRUTE_FORCE_LIMIT = 16


def _parity(x: int) -> int:
    return x.bit_count() & 1


class PostProcessing:
    """Total map from n-bit measurement outcomes to actions."""

    n_qubits: int
    num_actions: int

    def decode_index(self, index: int) -> int:
        raise NotImplementedError

    def action_table(self) -> np.ndarray:
        """Action of every basis index, cached; length 2**n."""
        cached = getattr(self, "_table", None)
        if cached is None:
            cached = self._build_table()
            cached.setflags(write=False)
            self._table = cached
        return cached

    def _build_table(self) -> np.ndarray:
        return np.array(
            [self.decode_index(i) for i in range(1 << self.n_qubits)],
            dtype=np.int64,
        )

    def _check_index(self, index: int) -> None:
        if not 0 <= index < (1 << self.n_qubits):
            raise ValueError(
                f"basis index {index} out of range for {self.n_qubits} qubits"
            )


class MostSignificantBit(PostProcessing):
    """Two actions decided by the uppermost qubit alone (globality 1)."""

    def __init__(self, n_qubits: int):
        if n_qubits < 1:
            raise ValueError("need at least one qubit")
        self.n_qubits = n_qubits
        self.num_actions = 2

    def decode_index(self, index: int) -> int:
        self._check_index(index)
        return (index >> (self.n_qubits - 1)) & 1

    def _build_table(self) -> np.ndarray:
        idx = np.arange(1 << self.n_qubits)
        return ((idx >> (self.n_qubits - 1)) & 1).astype(np.int64)


class PrefixParity(PostProcessing):
    """Two actions from the parity of the q most significant bits.

    Interpolates between the single-bit rule (q=1) and the full parity
    function (q=n); its globality equals q.
    """

    def __init__(self, n_qubits: int, q: int):
        if not 1 <= q <= n_qubits:
            raise ValueError(f"prefix length q={q} must be in [1, {n_qubits}]")
        self.n_qubits = n_qubits
        self.q = q
        self.num_actions = 2

    def decode_index(self, index: int) -> int:
        self._check_index(index)
        return _parity(index >> (self.n_qubits - self.q))

    def _build_table(self) -> np.ndarray:
        idx = np.arange(1 << self.n_qubits, dtype=np.uint64)
        shifted = idx >> np.uint64(self.n_qubits - self.q)
        return (np.bitwise_count(shifted) & 1).astype(np.int64)


class RecursiveParity(PostProcessing):
    """Maximal-globality partitioning via recursive parity splits.

    For M = 2**(m+1) actions the class of a string is, in closed form,
    the number whose binary digits (most significant first) are
    b_0, b_1, ..., b_{m-1} followed by the parity of bits m..n-1.
    The equivalent recursive set construction is materialised by
    :func:`recursive_partition_sets`.
    """

    def __init__(self, n_qubits: int, num_actions: int):
        if num_actions < 2 or num_actions & (num_actions - 1):
            raise ValueError("num_actions must be a power of two >= 2")
        if num_actions > (1 << n_qubits):
            raise ValueError("num_actions cannot exceed 2**n_qubits")
        self.n_qubits = n_qubits
        self.num_actions = num_actions
        self._m = num_actions.bit_length() - 2  # log2(M) - 1

    def decode_index(self, index: int) -> int:
        self._check_index(index)
        m = self._m
        action = _parity(index >> m)
        for j in range(m):
            action |= ((index >> j) & 1) << (m - j)
        return action

    def _build_table(self) -> np.ndarray:
        m = self._m
        idx = np.arange(1 << self.n_qubits, dtype=np.uint64)
        table = (np.bitwise_count(idx >> np.uint64(m)) & 1).astype(np.int64)
        for j in range(m):
            table |= ((idx >> np.uint64(j)) & 1).astype(np.int64) << (m - j)
        return table


class ExplicitTable(PostProcessing):
    """Post-processing given by an explicit index-to-action table."""

    def __init__(self, n_qubits: int, num_actions: int, table):
        table = np.asarray(table, dtype=np.int64)
        if table.shape != (1 << n_qubits,):
            raise ValueError(
                f"table must assign all {1 << n_qubits} strings, got {table.shape}"
            )
        if table.min() < 0 or table.max() >= num_actions:
            raise ValueError("table actions must lie in [0, num_actions)")
        self.n_qubits = n_qubits
        self.num_actions = num_actions
        self._table = table.copy()
        self._table.setflags(write=False)

    @classmethod
    def from_sets(cls, n_qubits: int, sets: dict) -> "ExplicitTable":
        """Build from ``{action: iterable of basis indices}`` classes."""
        table = np.full(1 << n_qubits, -1, dtype=np.int64)
        for action, members in sets.items():
            for b in members:
                if table[b] != -1:
                    raise ValueError(f"basis index {b} assigned to two actions")
                table[b] = action
        if (table < 0).any():
            missing = int(np.nonzero(table < 0)[0][0])
            raise ValueError(f"basis index {missing} not assigned to any action")
        return cls(n_qubits, max(sets) + 1, table)

    def decode_index(self, index: int) -> int:
        self._check_index(index)
        return int(self._table[index])


def decode(fn: PostProcessing, bits) -> int:
    """Decode a measurement outcome (basis index or '0101'-style string)."""
    if isinstance(bits, str):
        if len(bits) != fn.n_qubits or set(bits) - {"0", "1"}:
            raise ValueError(
                f"bitstring {bits!r} is not a {fn.n_qubits}-bit binary string"
            )
        bits = int(bits, 2)
    return fn.decode_index(int(bits))


def recursive_partition_sets(n_qubits: int, num_actions: int) -> dict:
    """Materialise the recursive parity-split classes directly.

    Independent of the closed form in :class:`RecursiveParity`: the
    base case splits all strings by total parity, and each recursion
    level splits a class by the parity of bits m..n-1, relabelling the
    parent class as a_m ... a_2 (a_1 xor a_0).  Returns
    ``{action: set of basis indices}``.
    """
    if num_actions < 2 or num_actions & (num_actions - 1):
        raise ValueError("num_actions must be a power of two >= 2")
    if num_actions > (1 << n_qubits):
        raise ValueError("num_actions cannot exceed 2**n_qubits")
    if num_actions == 2:
        strings = range(1 << n_qubits)
        return {
            0: {b for b in strings if _parity(b) == 0},
            1: {b for b in strings if _parity(b) == 1},
        }
    parent = recursive_partition_sets(n_qubits, num_actions // 2)
    m = num_actions.bit_length() - 2
    sets = {}
    for a in range(num_actions):
        a0 = a & 1
        a1 = (a >> 1) & 1
        parent_label = ((a >> 2) << 1) | (a1 ^ a0)
        sets[a] = {b for b in parent[parent_label] if _parity(b >> m) == a0}
    return sets


def partition_sets(fn: PostProcessing) -> dict:
    """Explicit ``{action: sorted list of basis indices}`` classes."""
    if fn.n_qubits > _BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"explicit materialisation is limited to {_BRUTE_FORCE_LIMIT} qubits"
        )
    table = fn.action_table()
    return {
        a: [int(b) for b in np.nonzero(table == a)[0]]
        for a in range(fn.num_actions)
    }


# ---------------------------------------------------------------------------
# Extracted information and globality


@lru_cache(maxsize=None)
def _subset_order(n: int) -> tuple:
    """All bit-position subsets of {0..n-1} as masks, smallest first."""
    order = []
    for k in range(n + 1):
        for combo in combinations(range(n), k):
            mask = 0
            for p in combo:
                mask |= 1 << p
            order.append((k, mask))
    return tuple(order)


@lru_cache(maxsize=None)
def _completion_masks(n: int) -> dict:
    """For each subset mask S and residue r: bitmask over all strings x
    with x & S == r.  Total size is 3**n entries, so only cached for
    small n."""
    table: dict = {}
    for s_mask in range(1 << n):
        residues: dict = {}
        for x in range(1 << n):
            r = x & s_mask
            residues[r] = residues.get(r, 0) | (1 << x)
        table[s_mask] = residues
    return table


def _class_masks(table: np.ndarray, num_actions: int) -> list[int]:
    masks = [0] * num_actions
    for b, a in enumerate(table):
        masks[a] |= 1 << b
    return masks


def _ei_masked(n: int, class_masks: list[int], action: int, b: int) -> int:
    completions = _completion_masks(n)
    not_mine = ~class_masks[action]
    for k, s_mask in _subset_order(n):
        if completions[s_mask][b & s_mask] & not_mine == 0:
            return k
    raise AssertionError("full bitstring always determines the action")


def _ei_scan(table: np.ndarray, n: int, b: int) -> int:
    # Fallback without the 3**n cache: enumerate completions per subset.
    target = table[b]
    for k, s_mask in _subset_order(n):
        base = b & s_mask
        offsets = np.zeros(1, dtype=np.int64)
        for p in range(n):
            if not s_mask & (1 << p):
                offsets = np.concatenate([offsets, offsets + (1 << p)])
        if (table[base + offsets] == target).all():
            return k
    raise AssertionError("full bitstring always determines the action")


def extracted_information(fn: PostProcessing, bits) -> int:
    """Minimum number of bit positions that pin down the action of ``bits``.

    Exhaustive search over position subsets in increasing size: the
    smallest k such that some k positions of the string force every
    agreeing string into the same action class.
    """
    if isinstance(bits, str):
        bits = decode_bits_to_index(fn.n_qubits, bits)
    n = fn.n_qubits
    if n > _BRUTE_FORCE_LIMIT:
        raise ValueError(f"extracted information is limited to {_BRUTE_FORCE_LIMIT} qubits")
    table = fn.action_table()
    if n <= _MASK_CACHE_LIMIT:
        masks = _class_masks(table, fn.num_actions)
        return _ei_masked(n, masks, int(table[bits]), int(bits))
    return _ei_scan(table, n, int(bits))


def decode_bits_to_index(n_qubits: int, bits: str) -> int:
    if len(bits) != n_qubits or set(bits) - {"0", "1"}:
        raise ValueError(f"bitstring {bits!r} is not a {n_qubits}-bit binary string")
    return int(bits, 2)


@dataclass
class GlobalityReport:
    """Per-string extracted information and its exact average."""

    n_qubits: int
    num_actions: int
    ei: np.ndarray
    value: Fraction
    balanced: bool

    @property
    def value_float(self) -> float:
        return float(self.value)


def _globality_sum(n: int, class_masks: list[int], actions) -> int:
    total = 0
    for b in range(1 << n):
        total += _ei_masked(n, class_masks, actions[b], b)
    return total


def globality(fn: PostProcessing) -> GlobalityReport:
    """Average extracted information over all 2**n strings, exactly.

    The result is a rational with denominator 2**n.  It always lies at
    or below n; for balanced partitionings it also lies at or above
    log2(num_actions) (unbalanced tables can dip below that, so the
    lower bound is only asserted when class sizes are equal).
    """
    n = fn.n_qubits
    if n > _BRUTE_FORCE_LIMIT:
        raise ValueError(f"globality is limited to {_BRUTE_FORCE_LIMIT} qubits")
    table = fn.action_table()
    if n <= _MASK_CACHE_LIMIT:
        masks = _class_masks(table, fn.num_actions)
        ei = np.array(
            [_ei_masked(n, masks, int(table[b]), b) for b in range(1 << n)],
            dtype=np.int64,
        )
    else:
        ei = np.array([_ei_scan(table, n, b) for b in range(1 << n)], dtype=np.int64)
    value = Fraction(int(ei.sum()), 1 << n)
    sizes = np.bincount(table, minlength=fn.num_actions)
    balanced = bool((sizes == (1 << n) // fn.num_actions).all())
    if value > n:
        raise RuntimeError(f"globality {value} exceeds the qubit count {n}")
    if balanced and 2.0 ** float(value) < fn.num_actions - 1e-9:
        # G >= log2(M) holds for balanced partitionings; checked as 2**G >= M.
        raise RuntimeError(
            f"globality {value} fell below log2({fn.num_actions}) "
            "on a balanced partitioning"
        )
    return GlobalityReport(n, fn.num_actions, ei, value, balanced)


# ---------------------------------------------------------------------------
# Census of balanced partitionings


def count_balanced_partitionings(n_qubits: int, num_actions: int) -> int:
    """Exact count of equal-size partitionings, up to action relabelling.

    Computes N! / (M! * ((N/M)!)**M) for N = 2**n as an arbitrary
    precision integer.
    """
    big_n = 1 << n_qubits
    if num_actions < 2 or big_n % num_actions:
        raise ValueError("num_actions must be >= 2 and divide 2**n_qubits")
    size = big_n // num_actions
    return math.factorial(big_n) // (
        math.factorial(num_actions) * math.factorial(size) ** num_actions
    )


def _enumerate_balanced_masks(big_n: int, num_actions: int):
    """Yield class-mask lists for every balanced partitioning once.

    Canonical order: each block is led by the smallest index not yet
    assigned, which quotients out the M! action relabellings exactly as
    the counting formula does.
    """
    size = big_n // num_actions

    def rec(remaining: tuple, acc: list):
        if not remaining:
            yield list(acc)
            return
        leader, rest = remaining[0], remaining[1:]
        for combo in combinations(rest, size - 1):
            mask = 1 << leader
            for b in combo:
                mask |= 1 << b
            chosen = set(combo)
            acc.append(mask)
            yield from rec(tuple(b for b in rest if b not in chosen), acc)
            acc.pop()

    yield from rec(tuple(range(big_n)), [])


def _actions_from_masks(big_n: int, class_masks: list[int]) -> list[int]:
    actions = [0] * big_n
    for a, mask in enumerate(class_masks):
        while mask:
            low = mask & -mask
            actions[low.bit_length() - 1] = a
            mask ^= low
    return actions


EXHAUSTIVE_LIMIT = 10**7


@dataclass
class HistogramResult:
    """Counts of globality values over balanced partitionings."""

    n_qubits: int
    num_actions: int
    mode: str
    total: int
    counts: dict  # Fraction -> int

    def sorted_items(self):
        return sorted(self.counts.items())


def globality_histogram(
    n_qubits: int,
    num_actions: int,
    mode: str = "exhaustive",
    samples: int = 100000,
    rng: np.random.Generator | None = None,
) -> HistogramResult:
    """Distribution of globality over balanced partitionings.

    ``mode="exhaustive"`` enumerates every partitioning (refused when
    the census exceeds ``EXHAUSTIVE_LIMIT``); ``mode="sampled"`` draws
    ``samples`` uniform balanced partitionings from ``rng``.
    """
    big_n = 1 << n_qubits
    if num_actions < 2 or big_n % num_actions:
        raise ValueError("num_actions must be >= 2 and divide 2**n_qubits")
    if n_qubits > _MASK_CACHE_LIMIT:
        raise ValueError(f"histograms are limited to {_MASK_CACHE_LIMIT} qubits")
    counts: dict = {}
    if mode == "exhaustive":
        census = count_balanced_partitionings(n_qubits, num_actions)
        if census > EXHAUSTIVE_LIMIT:
            raise ValueError(
                f"{census} partitionings exceed the exhaustive limit "
                f"{EXHAUSTIVE_LIMIT}; use sampled mode"
            )
        total = 0
        for masks in _enumerate_balanced_masks(big_n, num_actions):
            actions = _actions_from_masks(big_n, masks)
            g = Fraction(_globality_sum(n_qubits, masks, actions), big_n)
            counts[g] = counts.get(g, 0) + 1
            total += 1
        return HistogramResult(n_qubits, num_actions, mode, total, counts)
    if mode == "sampled":
        if rng is None:
            raise ValueError("sampled mode needs an rng")
        size = big_n // num_actions
        for _ in range(samples):
            perm = rng.permutation(big_n)
            masks = []
            for a in range(num_actions):
                mask = 0
                for b in perm[a * size : (a + 1) * size]:
                    mask |= 1 << int(b)
                masks.append(mask)
            actions = _actions_from_masks(big_n, masks)
            g = Fraction(_globality_sum(n_qubits, masks, actions), big_n)
            counts[g] = counts.get(g, 0) + 1
        return HistogramResult(n_qubits, num_actions, mode, samples, counts)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# Table file format: one "bits,action" line per basis string


def save_table(path, fn: PostProcessing) -> None:
    lines = []
    for b in range(1 << fn.n_qubits):
        bits = format(b, f"0{fn.n_qubits}b")
        lines.append(f"{bits},{fn.decode_index(b)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_table(path, num_actions: int | None = None) -> ExplicitTable:
    """Read an explicit table from its text form, validating coverage."""
    entries = {}
    n_qubits = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                bits, action = line.split(",")
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'bits,action'") from None
            if n_qubits is None:
                n_qubits = len(bits)
            index = decode_bits_to_index(n_qubits, bits)
            if index in entries:
                raise ValueError(f"{path}:{lineno}: duplicate bitstring {bits}")
            entries[index] = int(action)
    if n_qubits is None:
        raise ValueError(f"{path}: empty table")
    if len(entries) != 1 << n_qubits:
        raise ValueError(
            f"{path}: table covers {len(entries)} of {1 << n_qubits} strings"
        )
    table = np.array([entries[i] for i in range(1 << n_qubits)], dtype=np.int64)
    if num_actions is None:
        num_actions = int(table.max()) + 1
    return ExplicitTable(n_qubits, num_actions, table)
