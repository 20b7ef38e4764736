"""Gate vocabulary, circuit representation, random generation and JSONL I/O."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import InvalidArgument, ParseError
from .jsonio import fmt_float
from .rng import SplitMix64, splitmix64

MAX_QUBITS = 24
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class GateKind:
    name: str
    arity: int
    param_count: int
    token: int

    def __post_init__(self):
        if self.arity not in (1, 2):
            raise InvalidArgument(f"gate {self.name}: arity must be 1 or 2")
        if self.param_count not in (0, 1):
            raise InvalidArgument(f"gate {self.name}: param_count must be 0 or 1")
        if self.token < 1:
            raise InvalidArgument(f"gate {self.name}: token 0 is reserved for empty cells")


class GateVocabulary:
    """Ordered gate set. Tokens are 1-based positions; 0 means an empty grid cell."""

    def __init__(self, specs: Sequence[tuple[str, int, int]]):
        names = [s[0] for s in specs]
        if len(set(names)) != len(names):
            raise InvalidArgument("gate names must be unique")
        self.kinds: tuple[GateKind, ...] = tuple(
            GateKind(name, arity, nparam, i + 1) for i, (name, arity, nparam) in enumerate(specs)
        )
        self._by_name = {k.name: k for k in self.kinds}

    def __len__(self) -> int:
        return len(self.kinds)

    def __iter__(self) -> Iterator[GateKind]:
        return iter(self.kinds)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __getitem__(self, name: str) -> GateKind:
        try:
            return self._by_name[name]
        except KeyError:
            raise InvalidArgument(f"gate '{name}' is not in the vocabulary") from None

    def __eq__(self, other) -> bool:
        return isinstance(other, GateVocabulary) and self.kinds == other.kinds

    def __hash__(self) -> int:
        return hash(self.kinds)

    @property
    def names(self) -> list[str]:
        return [k.name for k in self.kinds]

    def to_json(self) -> list[dict]:
        return [{"name": k.name, "arity": k.arity, "param_count": k.param_count, "token": k.token}
                for k in self.kinds]


DEFAULT_VOCABULARY = GateVocabulary([
    ("id", 1, 0),
    ("x", 1, 0),
    ("sx", 1, 0),
    ("h", 1, 0),
    ("rz", 1, 1),
    ("cx", 2, 0),
    ("cz", 2, 0),
    ("swap", 2, 0),
    ("reset", 1, 0),
    ("measure", 1, 0),
])


@dataclass(frozen=True)
class GateOp:
    kind: GateKind
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.qubits) != self.kind.arity:
            raise InvalidArgument(f"{self.kind.name} acts on {self.kind.arity} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise InvalidArgument(f"{self.kind.name}: repeated qubit in {self.qubits}")
        if len(self.params) != self.kind.param_count:
            raise InvalidArgument(f"{self.kind.name} takes {self.kind.param_count} parameter(s)")

    @property
    def name(self) -> str:
        return self.kind.name


@dataclass(frozen=True)
class Circuit:
    """Immutable gate list over ``num_qubits`` qubits.

    Measurement is terminal: once a qubit is measured no other op may touch it.
    """

    num_qubits: int
    ops: tuple[GateOp, ...] = ()
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise InvalidArgument(f"num_qubits must be in 1..{MAX_QUBITS}, got {self.num_qubits}")
        measured: set[int] = set()
        for op in self.ops:
            for q in op.qubits:
                if not 0 <= q < self.num_qubits:
                    raise InvalidArgument(f"qubit {q} out of range for {self.num_qubits}-qubit circuit")
                if q in measured:
                    raise InvalidArgument(f"op {op.name} on qubit {q} after its measurement")
            if op.name == "measure":
                measured.add(op.qubits[0])

    def __len__(self) -> int:
        return len(self.ops)

    def count(self, name: str) -> int:
        return sum(1 for op in self.ops if op.name == name)


def layer_assignment(circuit: Circuit) -> list[int]:
    """Column index of every op under as-soon-as-possible scheduling."""
    frontier = [0] * circuit.num_qubits
    cols = []
    for op in circuit.ops:
        col = max(frontier[q] for q in op.qubits)
        for q in op.qubits:
            frontier[q] = col + 1
        cols.append(col)
    return cols


def layered_depth(circuit: Circuit) -> int:
    cols = layer_assignment(circuit)
    return 1 + max(cols) if cols else 0


def random_circuit(num_qubits: int, depth: int, seed: int,
                   vocabulary: GateVocabulary = DEFAULT_VOCABULARY, circuit_id: str = "") -> Circuit:
    """Fill ``depth`` columns with random gates, then measure every qubit.

    Each column shuffles the qubits and consumes them in order, drawing a gate
    kind uniformly among non-measure kinds that still fit, so every qubit is
    touched exactly once per column. Angles are uniform in [0, 2*pi).
    """
    if num_qubits < 1 or depth < 1:
        raise InvalidArgument(f"num_qubits and depth must be >= 1 (got {num_qubits}, {depth})")
    rng = SplitMix64(seed)
    pool = [k for k in vocabulary if k.name != "measure"]
    by_room = {room: [k for k in pool if k.arity <= room] for room in (1, 2)}
    if not by_room[1]:
        raise InvalidArgument("vocabulary has no 1-qubit non-measure gate")
    ops: list[GateOp] = []
    for _ in range(depth):
        order = list(range(num_qubits))
        rng.shuffle(order)
        pos = 0
        while pos < num_qubits:
            candidates = by_room[min(num_qubits - pos, 2)]
            kind = candidates[rng.randbelow(len(candidates))]
            qubits = order[pos:pos + kind.arity]
            params = [rng.random() * TWO_PI for _ in range(kind.param_count)]
            ops.append(GateOp(kind, tuple(qubits), tuple(params)))
            pos += kind.arity
    measure = vocabulary["measure"]
    ops.extend(GateOp(measure, (q,)) for q in range(num_qubits))
    return Circuit(num_qubits, tuple(ops), circuit_id)


@dataclass(frozen=True)
class CorpusEntry:
    index: int
    num_qubits: int
    depth: int
    seed: int
    id: str


@dataclass(frozen=True)
class CorpusSpec:
    per_qubit_count: int = 5000
    qubit_range: tuple[int, int] = (4, 10)
    depth_range: tuple[int, int] = (2, 50)

    def __post_init__(self):
        lo, hi = self.qubit_range
        dlo, dhi = self.depth_range
        if self.per_qubit_count < 1:
            raise InvalidArgument("per_qubit_count must be >= 1")
        if not 1 <= lo <= hi <= MAX_QUBITS:
            raise InvalidArgument(f"bad qubit_range {self.qubit_range}")
        if not 1 <= dlo <= dhi:
            raise InvalidArgument(f"bad depth_range {self.depth_range}")

    def __len__(self) -> int:
        return self.per_qubit_count * (self.qubit_range[1] - self.qubit_range[0] + 1)


def corpus_entry(master_seed: int, index: int, spec: CorpusSpec) -> CorpusEntry:
    """Plan for circuit ``index``; a pure function of (master_seed, index)."""
    n = spec.qubit_range[0] + index // spec.per_qubit_count
    rng = SplitMix64(splitmix64(master_seed ^ index))
    dlo, dhi = spec.depth_range
    depth = dlo + rng.randbelow(dhi - dlo + 1)
    return CorpusEntry(index, n, depth, rng.next_u64(), f"q{n}-{index:05}")


def corpus_plan(master_seed: int, spec: CorpusSpec = CorpusSpec()) -> Iterator[CorpusEntry]:
    for i in range(len(spec)):
        yield corpus_entry(master_seed, i, spec)


def circuit_from_entry(entry: CorpusEntry, vocabulary: GateVocabulary = DEFAULT_VOCABULARY) -> Circuit:
    return random_circuit(entry.num_qubits, entry.depth, entry.seed, vocabulary, entry.id)


def generate_corpus(master_seed: int, per_qubit_count: int = 5000,
                    qubit_range: tuple[int, int] = (4, 10), depth_range: tuple[int, int] = (2, 50),
                    vocabulary: GateVocabulary = DEFAULT_VOCABULARY) -> Iterator[Circuit]:
    """Stream ``per_qubit_count`` circuits for each qubit count, in index order.

    Circuit ``i`` depends only on ``splitmix64(master_seed ^ i)``: its depth is
    the first draw of that stream and the second draw seeds the circuit itself.
    """
    spec = CorpusSpec(per_qubit_count, tuple(qubit_range), tuple(depth_range))
    for entry in corpus_plan(master_seed, spec):
        yield circuit_from_entry(entry, vocabulary)


# --- JSON Lines ---------------------------------------------------------------

def serialize_circuit(circuit: Circuit) -> str:
    ops = ",".join(
        '{"g":%s,"q":[%s],"p":[%s]}' % (
            json.dumps(op.name), ",".join(map(str, op.qubits)), ",".join(fmt_float(p) for p in op.params))
        for op in circuit.ops
    )
    return '{"id":%s,"num_qubits":%d,"ops":[%s]}' % (json.dumps(circuit.id), circuit.num_qubits, ops)


def deserialize_circuit(line: str, vocabulary: GateVocabulary = DEFAULT_VOCABULARY) -> Circuit:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(obj, dict):
        raise ParseError("circuit record must be a JSON object")
    for key, typ in (("id", str), ("num_qubits", int), ("ops", list)):
        if key not in obj:
            raise ParseError(f"missing field '{key}'")
        if not isinstance(obj[key], typ) or isinstance(obj[key], bool):
            raise ParseError(f"field '{key}' must be {typ.__name__}")
    ops = []
    for i, rec in enumerate(obj["ops"]):
        try:
            name = rec["g"]
            if name not in vocabulary:
                raise ParseError(f"op {i}: unknown gate '{name}'")
            ops.append(GateOp(vocabulary[name], tuple(rec["q"]), tuple(rec.get("p", ()))))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"op {i}: malformed op record ({exc})") from None
        except InvalidArgument as exc:
            raise ParseError(f"op {i}: {exc}") from None
    try:
        return Circuit(obj["num_qubits"], tuple(ops), obj["id"])
    except InvalidArgument as exc:
        raise ParseError(str(exc)) from None


def write_circuits(path, circuits: Iterable[Circuit]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in circuits:
            fh.write(serialize_circuit(c) + "\n")
            n += 1
    return n


def read_circuits(path, vocabulary: GateVocabulary = DEFAULT_VOCABULARY) -> Iterator[Circuit]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield deserialize_circuit(line, vocabulary)
            except ParseError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
