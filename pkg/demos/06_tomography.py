"""Informationally complete measurement and linear-inversion tomography.

A symmetric frame (d^2 unit vectors with equal pairwise overlap
1/(d+1), projectors scaled by 1/d) spans the whole space of effects, so
outcome frequencies determine the state. Repeating the measurement on
freshly re-prepared copies sharpens the reconstruction.
"""

import numpy as np

from onticsim import (
    attention_repetition,
    build_sic,
    is_infocomplete,
    simulate_measurement,
    tomography_linear,
    trace_distance,
)
from onticsim.linalg import haar_state

rng = np.random.default_rng(5)

for d in (2, 3):
    sic = build_sic(d)
    overlaps = np.array([
        [abs(np.vdot(a, b)) ** 2 for b in sic.states] for a in sic.states
    ])
    ok, span = is_infocomplete(sic.povm, d)
    print(f"d={d}: {d * d} states, off-diagonal overlap {overlaps[0, 1]:.6f} "
          f"(target {1 / (d + 1):.6f}), effect span {span}/{d * d}")

print("\n== reconstructing a random qubit state ==")
psi = haar_state(2, rng)
rho = np.outer(psi, psi.conj())
povm = build_sic(2).povm

exact = tomography_linear(povm, povm.probabilities(rho) * 10**6)
print(f"noiseless inversion: trace distance {trace_distance(exact.estimate, rho):.2e}")

for shots in (100, 10_000, 1_000_000):
    counts = simulate_measurement(povm, rho, shots, rng)
    est = tomography_linear(povm, counts)
    print(f"{shots:9d} shots: trace distance {trace_distance(est.estimate, rho):.4f} "
          f"(residual {est.residual:.1e})")

print("\n== attention: repeated re-preparation ==")
for repeats in (10, 1_000, 100_000):
    result = attention_repetition(psi, repeats, povm, rng)
    print(f"{repeats:7d} repetitions: trace distance "
          f"{trace_distance(result.estimate, rho):.4f}")
