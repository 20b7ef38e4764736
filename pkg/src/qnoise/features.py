"""Circuit featurizations: gate-count vectors and padded token grids."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .circuit import DEFAULT_VOCABULARY, Circuit, GateVocabulary, layer_assignment
from .errors import CapacityError, InvalidArgument

GRID_DEPTH = 51
GRID_QUBITS = 10


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[int, ...]
    schema: tuple[str, ...]

    def __post_init__(self):
        if len(self.values) != len(self.schema):
            raise InvalidArgument("values and schema lengths differ")

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.schema, self.values))


def count_schema(vocabulary: GateVocabulary = DEFAULT_VOCABULARY, ablate: Iterable[str] = ()) -> tuple[str, ...]:
    ablate = set(ablate)
    unknown = ablate - set(vocabulary.names)
    if unknown:
        raise InvalidArgument(f"cannot ablate unknown gates {sorted(unknown)}")
    return tuple(name for name in vocabulary.names if name not in ablate)


def gate_counts(circuit: Circuit, vocabulary: GateVocabulary = DEFAULT_VOCABULARY) -> dict[str, int]:
    """Count of every vocabulary gate (zeros included), in vocabulary order."""
    counts = dict.fromkeys(vocabulary.names, 0)
    for op in circuit.ops:
        if op.name not in counts:
            raise InvalidArgument(f"gate '{op.name}' is not in the vocabulary")
        counts[op.name] += 1
    return counts


def featurize_counts(circuit: Circuit, vocabulary: GateVocabulary = DEFAULT_VOCABULARY,
                     ablate: Iterable[str] = ()) -> FeatureVector:
    schema = count_schema(vocabulary, ablate)
    counts = gate_counts(circuit, vocabulary)
    return FeatureVector(tuple(counts[name] for name in schema), schema)


def counts_matrix(rows: Sequence[dict[str, int]], schema: Sequence[str]) -> np.ndarray:
    """Stack gate-count maps into an (N, len(schema)) float matrix."""
    return np.array([[row.get(name, 0) for name in schema] for row in rows], dtype=np.float64).reshape(len(rows), len(schema))


@dataclass(frozen=True)
class TokenGrid:
    tokens: np.ndarray
    d_max: int = GRID_DEPTH
    q_max: int = GRID_QUBITS

    def __eq__(self, other):
        return isinstance(other, TokenGrid) and np.array_equal(self.tokens, other.tokens)


def tokenize_grid(circuit: Circuit, vocabulary: GateVocabulary = DEFAULT_VOCABULARY,
                  d_max: int = GRID_DEPTH, q_max: int = GRID_QUBITS) -> TokenGrid:
    """Place each op's token at (layer, qubit) for every qubit it touches."""
    if circuit.num_qubits > q_max:
        raise CapacityError(f"circuit has {circuit.num_qubits} qubits; grid holds at most q_max={q_max}")
    cols = layer_assignment(circuit)
    if cols and max(cols) + 1 > d_max:
        raise CapacityError(f"circuit layered depth {max(cols) + 1} exceeds d_max={d_max}")
    grid = np.zeros((d_max, q_max), dtype=np.int64)
    for op, row in zip(circuit.ops, cols):
        token = vocabulary[op.name].token
        for q in op.qubits:
            grid[row, q] = token
    return TokenGrid(grid, d_max, q_max)


def grid_batch(circuits: Iterable[Circuit], vocabulary: GateVocabulary = DEFAULT_VOCABULARY) -> np.ndarray:
    grids = [tokenize_grid(c, vocabulary).tokens for c in circuits]
    if not grids:
        return np.zeros((0, GRID_DEPTH, GRID_QUBITS), dtype=np.int64)
    return np.stack(grids)


def write_feature_csv(path, matrix: np.ndarray, labels: np.ndarray, schema: Sequence[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(schema) + ["label"])
        for row, y in zip(matrix, labels):
            w.writerow([int(v) for v in row] + [repr(float(y))])
