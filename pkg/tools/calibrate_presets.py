"""Calibration sweep for the shipped noise presets.

Labels a seeded 500-circuit sample of the default corpus (4-10 qubits, depth
2-50, 1000 shots) under a preset and reports the mean and spread of the label.
The frozen presets must give a mean in [0.05, 0.5] with nonzero variance.

    python3 tools/calibrate_presets.py --preset preset-a --scale 1.0
"""
import argparse
import statistics
import sys
import time

from qnoise.circuit import CorpusSpec, circuit_from_entry, corpus_entry
from qnoise.dataset import build_dataset
from qnoise.rng import permutation
from qnoise.sim import preset


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--preset", default="preset-a")
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--sample", type=int, default=500)
    ap.add_argument("--shots", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--parallelism", type=int, default=1)
    args = ap.parse_args(argv)

    spec = CorpusSpec()
    picks = sorted(int(i) for i in permutation(args.seed, len(spec))[:args.sample])
    circuits = [circuit_from_entry(corpus_entry(args.seed, i, spec)) for i in picks]
    noise = preset(args.preset).scaled(args.scale)
    t0 = time.time()
    records = build_dataset(circuits, noise, args.shots, args.seed, args.parallelism, args.preset)
    labels = [r.label for r in records]
    by_q = {}
    for r in records:
        by_q.setdefault(r.num_qubits, []).append(r.label)
    print(f"preset={args.preset} scale={args.scale} noise={noise.to_json()}")
    print(f"n={len(labels)} mean={statistics.fmean(labels):.4f} stdev={statistics.stdev(labels):.4f} "
          f"min={min(labels):.4f} max={max(labels):.4f} seconds={time.time() - t0:.1f}")
    for q in sorted(by_q):
        print(f"  qubits={q} n={len(by_q[q])} mean={statistics.fmean(by_q[q]):.4f}")
    ok = 0.05 <= statistics.fmean(labels) <= 0.5 and statistics.pvariance(labels) > 0
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
