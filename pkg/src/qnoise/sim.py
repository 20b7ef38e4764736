"""Statevector simulation with Pauli-trajectory noise.

Bit convention: bit ``k`` of a basis-state index is qubit ``k`` (little
endian). Bitstrings are printed most-significant qubit first, so for a
3-qubit register index 1 renders as ``"001"`` (qubit 0 set).

Shots are simulated as a batch of trajectories, one row of a
``(shots, 2**n)`` array per shot. Shot ``s`` consumes its own SplitMix64
stream seeded with ``splitmix64(seed ^ s)`` in a fixed layout: two draws per
unitary (error?, which Pauli), two per reset (projective outcome, reset
error?), then one draw to sample the final basis state and one readout draw
per qubit. The counts therefore do not depend on how the batch is processed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from .circuit import MAX_QUBITS, Circuit, GateOp
from .errors import CapacityError, InvalidArgument
from .rng import splitmix64_array, uniform_streams, uniforms

_S2 = 1.0 / math.sqrt(2.0)

FIXED_1Q = {
    "id": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "h": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "sx": 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex),
}
UNITARY_KINDS = ("id", "x", "sx", "h", "rz", "cx", "cz", "swap")


def gate_matrix(name: str, params=()) -> np.ndarray:
    """Unitary for a gate kind.

    Two-qubit matrices use the basis index ``b0 + 2*b1`` where ``b0`` is the
    bit of ``qubits[0]`` (the control for cx).
    """
    if name in FIXED_1Q:
        return FIXED_1Q[name].copy()
    if name == "rz":
        (theta,) = params
        return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    if name == "cx":
        m = np.zeros((4, 4), dtype=complex)
        for b0 in (0, 1):
            for b1 in (0, 1):
                m[b0 + 2 * (b1 ^ b0), b0 + 2 * b1] = 1
        return m
    if name == "cz":
        return np.diag([1, 1, 1, -1]).astype(complex)
    if name == "swap":
        m = np.zeros((4, 4), dtype=complex)
        for b0 in (0, 1):
            for b1 in (0, 1):
                m[b1 + 2 * b0, b0 + 2 * b1] = 1
        return m
    raise InvalidArgument(f"'{name}' is not a unitary gate kind")


@lru_cache(maxsize=None)
def _bit_index(n: int, k: int) -> np.ndarray:
    return (np.arange(1 << n) >> k) & 1


@lru_cache(maxsize=None)
def _flip_perm(n: int, k: int) -> np.ndarray:
    return np.arange(1 << n) ^ (1 << k)


@lru_cache(maxsize=None)
def _sign(n: int, k: int) -> np.ndarray:
    return 1.0 - 2.0 * _bit_index(n, k)


@lru_cache(maxsize=None)
def _two_qubit_action(n: int, name: str, a: int, b: int):
    """(permutation, phase) such that new[:, i] = phase[i] * old[:, perm[i]]."""
    idx = np.arange(1 << n)
    ba, bb = (idx >> a) & 1, (idx >> b) & 1
    phase = None
    if name == "cx":
        perm = np.where(ba == 1, idx ^ (1 << b), idx)
    elif name == "swap":
        perm = np.where(ba != bb, idx ^ ((1 << a) | (1 << b)), idx)
    elif name == "cz":
        perm = None
        phase = np.where((ba & bb) == 1, -1.0, 1.0)
    else:
        raise InvalidArgument(f"'{name}' is not a two-qubit unitary")
    return perm, phase


def _apply_1q(batch: np.ndarray, u: np.ndarray, k: int, n: int) -> np.ndarray:
    s = batch.shape[0]
    psi = batch.reshape(s, 1 << (n - 1 - k), 2, 1 << k)
    a0 = psi[:, :, 0, :]
    a1 = psi[:, :, 1, :]
    out = np.empty_like(psi)
    o0 = out[:, :, 0, :]
    o1 = out[:, :, 1, :]
    np.multiply(a0, u[0, 0], out=o0)
    o0 += u[0, 1] * a1
    np.multiply(a0, u[1, 0], out=o1)
    o1 += u[1, 1] * a1
    return out.reshape(s, -1)


def _apply_x(batch: np.ndarray, k: int, n: int) -> np.ndarray:
    s = batch.shape[0]
    return batch.reshape(s, 1 << (n - 1 - k), 2, 1 << k)[:, :, ::-1, :].reshape(s, -1)


def apply_unitary_batch(batch: np.ndarray, op: GateOp, n: int) -> np.ndarray:
    name = op.name
    if name == "id":
        return batch
    if name == "rz":
        theta = op.params[0]
        phase = np.where(_bit_index(n, op.qubits[0]) == 1, np.exp(0.5j * theta), np.exp(-0.5j * theta))
        return batch * phase
    if name == "x":
        return _apply_x(batch, op.qubits[0], n)
    if name in FIXED_1Q:
        return _apply_1q(batch, FIXED_1Q[name], op.qubits[0], n)
    if name in ("cx", "cz", "swap"):
        perm, phase = _two_qubit_action(n, name, op.qubits[0], op.qubits[1])
        out = batch[:, perm] if perm is not None else batch
        return out * phase if phase is not None else out
    raise InvalidArgument(f"'{name}' is not a unitary gate kind")


@dataclass
class StateVector:
    amplitudes: np.ndarray
    n: int

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        if not 1 <= n <= MAX_QUBITS:
            raise CapacityError(f"simulator supports 1..{MAX_QUBITS} qubits, got {n}")
        amps = np.zeros(1 << n, dtype=complex)
        amps[0] = 1.0
        return cls(amps, n)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def apply_gate(state: StateVector, op: GateOp) -> StateVector:
    if op.name not in UNITARY_KINDS:
        raise InvalidArgument(f"apply_gate handles unitary kinds only, got '{op.name}'")
    if any(q >= state.n for q in op.qubits):
        raise InvalidArgument(f"{op.name} on {op.qubits} exceeds {state.n}-qubit state")
    out = apply_unitary_batch(state.amplitudes[None, :], op, state.n)
    return StateVector(out[0].copy(), state.n)


@dataclass(frozen=True)
class NoiseModel:
    p1: float = 0.0
    p2: float = 0.0
    p_ro: float = 0.0
    p_reset: float = 0.0
    overrides: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "overrides", dict(self.overrides))
        for name in ("p1", "p2", "p_ro", "p_reset"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidArgument(f"{name}={v} outside [0, 1]")
        for g, v in self.overrides.items():
            if not 0.0 <= v <= 1.0:
                raise InvalidArgument(f"override {g}={v} outside [0, 1]")

    def gate_error(self, name: str, arity: int) -> float:
        if name in self.overrides:
            return self.overrides[name]
        return self.p1 if arity == 1 else self.p2

    def scaled(self, factor: float) -> "NoiseModel":
        return NoiseModel(self.p1 * factor, self.p2 * factor, self.p_ro * factor, self.p_reset * factor,
                          {k: v * factor for k, v in self.overrides.items()})

    def to_json(self) -> dict:
        return {"p1": self.p1, "p2": self.p2, "p_ro": self.p_ro, "p_reset": self.p_reset,
                "overrides": dict(sorted(self.overrides.items()))}

    @classmethod
    def from_json(cls, obj: Mapping) -> "NoiseModel":
        unknown = set(obj) - {"p1", "p2", "p_ro", "p_reset", "overrides"}
        if unknown:
            raise InvalidArgument(f"unknown noise model fields {sorted(unknown)}")
        return cls(float(obj.get("p1", 0.0)), float(obj.get("p2", 0.0)), float(obj.get("p_ro", 0.0)),
                   float(obj.get("p_reset", 0.0)), {k: float(v) for k, v in obj.get("overrides", {}).items()})


ZERO_NOISE = NoiseModel()

# Frozen after a calibration sweep (see tools/calibrate_presets.py): mean
# label over 500 corpus circuits must land in [0.05, 0.5] with nonzero spread.
PRESETS = {
    "preset-a": NoiseModel(p1=2e-3, p2=3e-2, p_ro=4e-2, p_reset=2e-2),
    "preset-b": NoiseModel(p1=1e-3, p2=1.5e-2, p_ro=2e-2, p_reset=1e-2),
    "zero": ZERO_NOISE,
}


def preset(name: str) -> NoiseModel:
    try:
        return PRESETS[name]
    except KeyError:
        raise InvalidArgument(f"unknown noise preset '{name}'; valid: {', '.join(PRESETS)}") from None


@dataclass(frozen=True)
class OutcomeDistribution:
    counts: Mapping[str, int]
    shots: int

    def __post_init__(self):
        counts = {k: int(v) for k, v in sorted(self.counts.items())}
        object.__setattr__(self, "counts", counts)
        if self.shots < 1:
            raise InvalidArgument("shots must be >= 1")
        if sum(counts.values()) != self.shots:
            raise InvalidArgument(f"counts sum to {sum(counts.values())}, expected {self.shots}")
        if any(v < 0 for v in counts.values()):
            raise InvalidArgument("negative count")
        if len({len(k) for k in counts}) > 1:
            raise InvalidArgument("bitstrings of differing length")

    @property
    def num_bits(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0


def _check(circuit: Circuit, shots: int) -> None:
    if shots < 1:
        raise InvalidArgument("shots must be >= 1")
    if circuit.num_qubits > MAX_QUBITS:
        raise CapacityError(f"simulator supports at most {MAX_QUBITS} qubits")


def _measured_mask(circuit: Circuit) -> tuple[int, list[int]]:
    """Bit mask of reported qubits; a circuit with no measure reports all of them."""
    measured = sorted({op.qubits[0] for op in circuit.ops if op.name == "measure"})
    if not measured:
        measured = list(range(circuit.num_qubits))
    return sum(1 << q for q in measured), measured


def _to_distribution(indices: np.ndarray, n: int, shots: int) -> OutcomeDistribution:
    values, counts = np.unique(indices, return_counts=True)
    return OutcomeDistribution({format(int(v), f"0{n}b"): int(c) for v, c in zip(values, counts)}, shots)


def _sample(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling: first index whose cumulative probability exceeds ``u``.

    Works row-wise for a (shots, 2**n) array with one uniform per row.
    """
    cum = np.cumsum(probs, axis=-1)
    total = cum[..., -1:]
    if probs.ndim == 1:
        idx = np.searchsorted(cum, u * total[0], side="right")
    else:
        idx = (cum <= (u[:, None] * total)).sum(axis=1)
    return np.minimum(idx, probs.shape[-1] - 1)


def draws_per_shot(circuit: Circuit) -> int:
    k = 0
    for op in circuit.ops:
        if op.name != "measure":
            k += 2
    return k + 1 + circuit.num_qubits


def _apply_pauli(rows: np.ndarray, code: np.ndarray, k: int, n: int) -> None:
    """Apply X (1), Y (2) or Z (3) on qubit k to each row of ``rows`` in place.

    Y is applied as X*Z; the dropped global phase does not affect outcomes.
    """
    z = (code == 2) | (code == 3)
    if z.any():
        rows[z] *= _sign(n, k)
    x = (code == 1) | (code == 2)
    if x.any():
        rows[x] = rows[x][:, _flip_perm(n, k)]


class _Branches:
    """Distinct trajectory states plus the row each shot currently occupies.

    Shots share a row until their error or reset histories diverge, so a
    low-noise batch costs far less than ``shots`` independent statevectors.
    Arithmetic on a shared row is identical to what each shot would do alone.
    """

    def __init__(self, shots: int, n: int):
        self.n = n
        self._buf = np.zeros((min(shots, 64), 1 << n), dtype=complex)
        self._buf[0, 0] = 1.0
        self.size = 1
        self.row = np.zeros(shots, dtype=np.int64)

    @property
    def states(self) -> np.ndarray:
        return self._buf[:self.size]

    @states.setter
    def states(self, value: np.ndarray) -> None:
        self._buf = value
        self.size = value.shape[0]

    def fork(self, shots: np.ndarray) -> np.ndarray:
        """Give each listed shot a private copy of its state; return the new rows."""
        start, stop = self.size, self.size + shots.size
        if stop > self._buf.shape[0]:
            grown = np.empty((max(stop, 2 * self._buf.shape[0]), self._buf.shape[1]), dtype=complex)
            grown[:start] = self._buf[:start]
            self._buf = grown
        self._buf[start:stop] = self._buf[self.row[shots]]
        self.row[shots] = np.arange(start, stop)
        self.size = stop
        return self._buf[start:stop]

    def regroup(self, keys: np.ndarray, build) -> None:
        """Replace states by ``build(key_values)``, one row per distinct per-shot key."""
        uniq, inverse = np.unique(keys, return_inverse=True)
        self.states = build(uniq)
        self.row = inverse.reshape(-1)

    def compact(self) -> None:
        used = np.unique(self.row)
        if used.size < self.size:
            remap = np.empty(self.size, dtype=np.int64)
            remap[used] = np.arange(used.size)
            self.states = self.states[used]
            self.row = remap[self.row]


def _trajectories(circuit: Circuit, shots: int, noise: NoiseModel, seed: int) -> np.ndarray:
    n = circuit.num_qubits
    k_draws = draws_per_shot(circuit)
    shot_seeds = splitmix64_array(np.uint64(seed & ((1 << 64) - 1)) ^ np.arange(shots, dtype=np.uint64))
    u = uniform_streams(shot_seeds, k_draws)
    br = _Branches(shots, n)
    col = 0
    for op in circuit.ops:
        name = op.name
        if name == "measure":
            continue
        u_a, u_b = u[:, col], u[:, col + 1]
        col += 2
        if name == "reset":
            q = op.qubits[0]
            bit = _bit_index(n, q)
            probs = np.abs(br.states) ** 2
            p_one = (probs * bit).sum(axis=1) / probs.sum(axis=1)
            one = u_a < p_one[br.row]
            flip = one ^ (u_b < noise.p_reset)
            keys = br.row * 4 + one * 2 + flip
            states = br.states

            def build(uniq, states=states, bit=bit, q=q):
                src, outcome, fl = uniq // 4, (uniq // 2) % 2, uniq % 2
                out = np.where(bit[None, :] == outcome[:, None], states[src], 0.0)
                out /= np.linalg.norm(out, axis=1, keepdims=True)
                if fl.any():
                    out[fl == 1] = out[fl == 1][:, _flip_perm(n, q)]
                return out

            br.regroup(keys, build)
            continue
        br.states = apply_unitary_batch(br.states, op, n) if name != "id" else br.states
        p = noise.gate_error(name, op.kind.arity)
        if p <= 0.0:
            continue
        hit = np.nonzero(u_a < p)[0]
        if not hit.size:
            continue
        rows = br.fork(hit)
        if op.kind.arity == 1:
            code = np.minimum((u_b[hit] * 3).astype(int), 2) + 1
            _apply_pauli(rows, code, op.qubits[0], n)
        else:
            pair = np.minimum((u_b[hit] * 15).astype(int), 14) + 1
            _apply_pauli(rows, pair % 4, op.qubits[0], n)
            _apply_pauli(rows, pair // 4, op.qubits[1], n)
        if br.size > 2 * np.unique(br.row).size:
            br.compact()
    mask, measured = _measured_mask(circuit)
    br.compact()
    probs = np.abs(br.states) ** 2
    idx = _sample(probs[br.row], u[:, col]) & mask
    for q in measured:
        flips = u[:, col + 1 + q] < noise.p_ro
        idx = np.where(flips, idx ^ (1 << q), idx)
    return idx


def run_ideal(circuit: Circuit, shots: int, seed: int) -> OutcomeDistribution:
    """Noise-free outcome counts.

    Reset-free circuits take the fast path: one statevector evolution, then
    ``shots`` inverse-CDF draws from the stream seeded with ``seed``.
    """
    _check(circuit, shots)
    n = circuit.num_qubits
    if any(op.name == "reset" for op in circuit.ops):
        return _to_distribution(_trajectories(circuit, shots, ZERO_NOISE, seed), n, shots)
    state = StateVector.zero(n).amplitudes[None, :]
    for op in circuit.ops:
        if op.name != "measure":
            state = apply_unitary_batch(state, op, n)
    mask, _ = _measured_mask(circuit)
    idx = _sample(np.abs(state[0]) ** 2, uniforms(seed, shots)) & mask
    return _to_distribution(idx, n, shots)


def run_trajectories(circuit: Circuit, shots: int, seed: int,
                     noise: NoiseModel = ZERO_NOISE) -> OutcomeDistribution:
    """Per-shot trajectory path, usable for any circuit (ideal when noise is zero)."""
    _check(circuit, shots)
    return _to_distribution(_trajectories(circuit, shots, noise, seed), circuit.num_qubits, shots)


def run_noisy(circuit: Circuit, shots: int, noise: NoiseModel, seed: int) -> OutcomeDistribution:
    return run_trajectories(circuit, shots, seed, noise)
