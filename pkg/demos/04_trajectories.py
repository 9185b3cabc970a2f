"""Sampling outcome histories and checking them against the exact law.

Each run of a circuit draws a full outcome record: at every slice the
joint outcome F is drawn with probability ||O_F w||^2 and the state is
renormalized, so the product of the step weights equals the squared norm
of the compiled history operator applied to the initial state. Exhaustive
enumeration of all histories gives the exact distribution to compare
against.
"""

from collections import Counter
from pathlib import Path

from onticsim import enumerate_histories, load_run_spec, run_trajectory
from onticsim.engine import compile_program

CIRCUITS = Path(__file__).resolve().parents[1] / "circuits"
program = load_run_spec(CIRCUITS / "conditioned_step_program.json")

exact = dict(enumerate_histories(program))
print(f"exact law: {len(exact)} histories, total probability "
      f"{sum(exact.values()):.12f}")

n = 20_000
compiled = compile_program(program)
counts = Counter()
for i in range(n):
    traj = run_trajectory(program, seed=99, index=i, compiled=compiled)
    counts[tuple(sorted(traj.steps[0].outcomes.items()))] += 1

print(f"\n{'history (E, Lambda, V, alpha)':42s} {'exact':>9s} {'sampled':>9s}")
exact_sorted = {tuple(sorted(k)): p for k, p in exact.items()}
shown = 0
for key, p in sorted(exact_sorted.items(), key=lambda kv: -kv[1]):
    label = ",".join(v for _, v in key)
    print(f"  {label:40s} {p:9.4f} {counts.get(key, 0) / n:9.4f}")
    shown += 1
    if shown == 10:
        break
tv = 0.5 * sum(abs(counts.get(k, 0) / n - p) for k, p in exact_sorted.items())
print(f"\ntotal-variation distance at {n} samples: {tv:.4f}")

traj = run_trajectory(program, seed=99, index=0, compiled=compiled)
print(f"one trajectory: outcomes {traj.steps[0].outcomes}, "
      f"probability {traj.probability:.4f}")
