import pytest

from qnoise.circuit import DEFAULT_VOCABULARY as V
from qnoise.circuit import Circuit, GateOp


def op(name, *qubits, params=()):
    return GateOp(V[name], qubits, params)


def bell(measure=True):
    ops = [op("h", 0), op("cx", 0, 1)]
    if measure:
        ops += [op("measure", 0), op("measure", 1)]
    return Circuit(2, ops, "bell")


@pytest.fixture
def bell_circuit():
    return bell()


DESK_SEED = 2024


@pytest.fixture(scope="session")
def desk_dataset():
    """3,000 labelled circuits: 4-7 qubits, depth 2-30, 250 shots, preset-a."""
    from qnoise.circuit import generate_corpus
    from qnoise.dataset import build_dataset
    from qnoise.sim import preset

    circuits = list(generate_corpus(DESK_SEED, per_qubit_count=750, qubit_range=(4, 7), depth_range=(2, 30)))
    return build_dataset(circuits, preset("preset-a"), shots=250, master_seed=DESK_SEED, preset_name="preset-a")
