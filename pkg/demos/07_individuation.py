"""Which groups of systems form one individual? Finest pure factorization.

A block of systems counts as a single unit exactly when its reduced state
is pure with no finer split. Entangling interactions merge blocks;
measurements that restore product structure split them again. The number
of distinct ways to entangle n labelled systems grows as the integer
partitions of n times n! orderings.
"""

from pathlib import Path

import numpy as np

from onticsim import (
    classify_timeline,
    count_entanglement_patterns,
    finest_factorization,
    load_run_spec,
    purity,
    run_trajectory,
)

print("== finest factorization ==")
bell = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
zero = np.array([1, 0], dtype=complex)
for label, psi, dims in [
    ("|0>|+>|1>", np.kron(np.kron([1, 0], [1, 1]), [0, 1]) / np.sqrt(2), (2, 2, 2)),
    ("bell x |0>", np.kron(bell, zero), (2, 2, 2)),
    ("GHZ", np.array([1, 0, 0, 0, 0, 0, 0, 1], dtype=complex) / np.sqrt(2), (2, 2, 2)),
]:
    part = finest_factorization(psi, dims)
    print(f"  {label:12s} -> blocks {part.blocks}")

print("\n== merge and split along a trajectory ==")
CIRCUITS = Path(__file__).resolve().parents[1] / "circuits"
program = load_run_spec(CIRCUITS / "merge_split.json")
traj = run_trajectory(program, seed=3, store_states=True)
for t, part in enumerate(classify_timeline(traj)):
    blocks = " + ".join("{" + ",".join(map(str, b)) + "}" for b in part.blocks)
    outcome = traj.steps[t].outcomes or "-"
    print(f"  after step {t} ({program.steps[t].circuit.name:8s}): {blocks}   outcomes {outcome}")

print("\n== a mixed marginal disqualifies a subsystem ==")
rho_half = np.outer(bell, bell.conj()).reshape(2, 2, 2, 2).trace(axis1=1, axis2=3)
print(f"  purity of one side of a Bell pair: {purity(rho_half):.3f}")

print("\n== entanglement patterns of n labelled systems ==")
for n in (1, 2, 3, 4, 6, 10):
    print(f"  n={n:2d}: {count_entanglement_patterns(n)}")
