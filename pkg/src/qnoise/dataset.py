"""Labelled records: ideal vs noisy simulation, cosine-distance label, splits."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .circuit import DEFAULT_VOCABULARY, Circuit, GateVocabulary, layered_depth
from .errors import InvalidArgument, ParseError, QNoiseError
from .features import gate_counts
from .jsonio import dumps
from .rng import permutation, splitmix64
from .sim import NoiseModel, OutcomeDistribution, run_ideal, run_noisy


@dataclass(frozen=True)
class LabeledRecord:
    circuit_id: str
    num_qubits: int
    depth: int
    gate_counts: Mapping[str, int]
    label: float
    preset: str
    shots: int

    def __post_init__(self):
        if not (0.0 <= self.label <= 1.0):
            raise InvalidArgument(f"label {self.label} outside [0, 1]")

    def to_json(self) -> str:
        return dumps({
            "circuit_id": self.circuit_id, "num_qubits": self.num_qubits, "depth": self.depth,
            "gate_counts": dict(self.gate_counts), "label": self.label, "preset": self.preset,
            "shots": self.shots,
        })

    @classmethod
    def from_json(cls, line: str) -> "LabeledRecord":
        try:
            obj = json.loads(line)
            return cls(str(obj["circuit_id"]), int(obj["num_qubits"]), int(obj["depth"]),
                       {str(k): int(v) for k, v in obj["gate_counts"].items()}, float(obj["label"]),
                       str(obj["preset"]), int(obj["shots"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ParseError(f"malformed dataset record: {exc}") from None


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidArgument(f"train_fraction must be in (0, 1), got {self.train_fraction}")


def _vector(d) -> Mapping[str, float]:
    return d.counts if isinstance(d, OutcomeDistribution) else d


def cosine_distance(a, b) -> float:
    """1 - cos(angle) between two count vectors over the union of their keys.

    Accepts OutcomeDistribution or plain bitstring->count mappings.
    """
    va, vb = _vector(a), _vector(b)
    na = math.sqrt(math.fsum(float(v) * v for v in va.values()))
    nb = math.sqrt(math.fsum(float(v) * v for v in vb.values()))
    if na == 0.0 or nb == 0.0:
        raise InvalidArgument("cosine distance of an all-zero distribution is undefined")
    dot = math.fsum(float(va[k]) * vb[k] for k in va.keys() & vb.keys())
    return min(1.0, max(0.0, 1.0 - dot / (na * nb)))


def label_circuit(circuit: Circuit, noise: NoiseModel, shots: int = 1000, seed: int = 0,
                  preset_name: str = "custom", vocabulary: GateVocabulary = DEFAULT_VOCABULARY) -> LabeledRecord:
    ideal = run_ideal(circuit, shots, splitmix64(seed ^ 0))
    noisy = run_noisy(circuit, shots, noise, splitmix64(seed ^ 1))
    return LabeledRecord(circuit.id, circuit.num_qubits, layered_depth(circuit),
                         gate_counts(circuit, vocabulary), cosine_distance(ideal, noisy), preset_name, shots)


def _label_task(args):
    index, circuit, noise, shots, master_seed, preset_name = args
    try:
        return label_circuit(circuit, noise, shots, splitmix64(master_seed ^ index), preset_name)
    except QNoiseError as exc:
        raise QNoiseError(f"labelling circuit '{circuit.id}' failed: {exc}") from exc


def build_dataset(circuits: Iterable[Circuit], noise: NoiseModel, shots: int = 1000, master_seed: int = 0,
                  parallelism: int = 1, preset_name: str = "custom", progress=None) -> list[LabeledRecord]:
    """Label every circuit; circuit ``i`` uses seed ``splitmix64(master_seed ^ i)``.

    Results come back in input order whatever the worker count, and the first
    failure aborts the build.
    """
    tasks = [(i, c, noise, shots, master_seed, preset_name) for i, c in enumerate(circuits)]
    if not tasks:
        raise InvalidArgument("build_dataset needs at least one circuit")
    records: list[LabeledRecord] = []
    if parallelism <= 1:
        it = map(_label_task, tasks)
        for rec in it:
            records.append(rec)
            if progress:
                progress(len(records), len(tasks))
        return records
    chunk = max(1, len(tasks) // (parallelism * 8))
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        for rec in pool.map(_label_task, tasks, chunksize=chunk):
            records.append(rec)
            if progress:
                progress(len(records), len(tasks))
    return records


def split(records: Sequence, spec: SplitSpec) -> tuple[list, list]:
    """Seeded uniform permutation; the first floor(fraction * N) items train."""
    n = len(records)
    n_train = math.floor(spec.train_fraction * n)
    if n < 2 or n_train < 1 or n_train >= n:
        raise InvalidArgument(f"split of {n} records at fraction {spec.train_fraction} is degenerate")
    order = permutation(spec.seed, n)
    return [records[i] for i in order[:n_train]], [records[i] for i in order[n_train:]]


def write_records(path, records: Iterable[LabeledRecord]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")
            n += 1
    return n


def read_records(path) -> list[LabeledRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(LabeledRecord.from_json(line))
                except (ParseError, InvalidArgument) as exc:
                    raise ParseError(f"{path}:{lineno}: {exc}") from None
    return out
