"""Store-and-recall: pushing a pure state through a classical record.

Measuring M identical copies and re-preparing from the outcome cannot do
better, averaged over uniformly random pure states, than (M+1)/(M+d). The
covariant strategy (coherent-state readout on the symmetric subspace of M
qubit copies) attains the cap; estimating through a symmetric frame or
through random spin readouts stays at or below it.
"""

from onticsim import mean_recall_fidelity, recall_fidelity_bound
from onticsim.measurement import covariant_frame_mean_fidelity, covariant_qubit_frame

TRIALS = 20_000

print("mean recall fidelity over Haar-random qubits "
      f"({TRIALS} trials per cell)\n")
print(f"{'M':>2s} {'bound':>8s} {'covariant':>10s} {'sym-frame':>10s} {'random-vN':>10s}")
for m in (1, 2, 3, 4):
    bound = float(recall_fidelity_bound(m, 2))
    cov, _ = mean_recall_fidelity("optimal_covariant_qubit", m, 2, TRIALS, seed=1)
    sic, _ = mean_recall_fidelity("sic_estimate", m, 2, TRIALS, seed=2)
    vn, _ = mean_recall_fidelity("random_vn_repeat", m, 2, TRIALS, seed=3)
    print(f"{m:2d} {bound:8.4f} {cov:10.4f} {sic:10.4f} {vn:10.4f}")

print("\nqutrit bound at M=1:", float(recall_fidelity_bound(1, 3)))
sic3, _ = mean_recall_fidelity("sic_estimate", 1, 3, TRIALS, seed=4)
print(f"sym-frame estimate for a qutrit: {sic3:.4f}")

print("\nmesh refinement of the covariant readout (exact means, no sampling):")
bound = float(recall_fidelity_bound(2, 2))
for mesh in (250, 1000, 4000):
    exact = covariant_frame_mean_fidelity(covariant_qubit_frame(2, mesh=mesh))
    print(f"  mesh {mesh:5d}: mean fidelity {exact:.6f} (cap {bound:.6f})")
