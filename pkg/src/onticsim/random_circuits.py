"""Random circuit generation for property tests and benchmarks.

Circuits are grown forward: each new node consumes a few open wires (or
declares fresh open inputs) and produces new ones, with every test built
complete (an isometry split into blocks), so coarse-graining is
deterministic and exhaustive history enumeration sums to one. Conditioned
nodes carry one complete sub-test per source outcome.
"""

from __future__ import annotations

from math import prod

import numpy as np

from .circuit import Circuit, Condition, Event, System, TestNode, WireSpec
from .linalg import random_isometry


def random_complete_test(d_in: int, d_out: int, outcomes: int, rng: np.random.Generator,
                         prefix: str = "") -> tuple[Event, ...]:
    """A random test with ``outcomes`` events summing to the identity."""
    if d_out * outcomes < d_in:
        raise ValueError("need d_out * outcomes >= d_in for a complete test")
    v = random_isometry(d_in, d_out * outcomes, rng)
    return tuple(
        Event(f"{prefix}{i}", (v[i * d_out:(i + 1) * d_out, :],)) for i in range(outcomes)
    )


def random_circuit(
    rng: np.random.Generator,
    *,
    n_nodes: tuple[int, int] = (4, 8),
    max_total_dim: int = 64,
    conditioning: bool = True,
    dims: tuple[int, ...] = (2, 3),
) -> Circuit:
    """A random acyclic circuit within a running cut-dimension budget."""
    target_nodes = int(rng.integers(n_nodes[0], n_nodes[1] + 1))
    systems: dict[str, System] = {}
    nodes: list[TestNode] = []
    wires: list[WireSpec] = []
    # Open wires: (producer label or None for a fresh circuit input, port, dim).
    # Boundary inputs are all declared up front so every cut stays within the
    # dimension budget; unconsumed plans are dropped at the end.
    open_wires: list[tuple[str | None, int, int]] = [
        (None, 0, int(rng.choice(dims))) for _ in range(int(rng.integers(1, 3)))
    ]
    sys_count = 0

    def new_system(dim: int) -> str:
        nonlocal sys_count
        label = f"s{sys_count}"
        sys_count += 1
        systems[label] = System(label, dim)
        return label

    def cut_dim() -> int:
        return prod(d for _, _, d in open_wires) if open_wires else 1

    for k in range(target_nodes):
        label = f"n{k}"
        want_consume = int(rng.integers(0, min(2, len(open_wires)) + 1))
        last = k == target_nodes - 1
        if last and open_wires:
            want_consume = min(2, len(open_wires))
        picks = sorted(rng.choice(len(open_wires), size=want_consume, replace=False).tolist()) if want_consume else []
        consumed = [open_wires[i] for i in picks]
        for i in reversed(picks):
            open_wires.pop(i)
        d_in = prod(d for _, _, d in consumed) if consumed else 1

        produce = int(rng.integers(0, 3))
        if last:
            produce = 0
        out_dims = []
        for _ in range(produce):
            dim = int(rng.choice(dims))
            if cut_dim() * prod(out_dims or [1]) * dim > max_total_dim:
                break
            out_dims.append(dim)
        d_out = prod(out_dims) if out_dims else 1
        outcomes = int(rng.integers(1, 4))
        while d_out * outcomes < d_in:
            outcomes += 1

        cond = None
        events: tuple[Event, ...]
        sources = [n for n in nodes if len(n.events) > 1 and n.condition is None]
        if conditioning and sources and rng.random() < 0.35:
            src = sources[int(rng.integers(len(sources)))]
            per_branch = []
            outcome_map = {}
            for b, ev in enumerate(src.events):
                branch = random_complete_test(d_in, d_out, outcomes, rng, prefix=f"{ev.outcome}:")
                start = len(per_branch)
                per_branch.extend(branch)
                outcome_map[ev.outcome] = tuple(range(start, start + outcomes))
            events = tuple(per_branch)
            cond = Condition(src.label, outcome_map)
        else:
            events = random_complete_test(d_in, d_out, outcomes, rng)

        in_systems = []
        for producer, port, dim in consumed:
            sys_label = new_system(dim)
            in_systems.append(sys_label)
            if producer is not None:
                wires.append(WireSpec(producer, port, label, len(in_systems) - 1))
        out_systems = [new_system(d) for d in out_dims]
        nodes.append(TestNode(label, tuple(in_systems), tuple(out_systems), events, cond))
        for port, dim in enumerate(out_dims):
            open_wires.append((label, port, dim))

    return Circuit(f"random-{rng.integers(1 << 30)}", systems, nodes, wires, closed=False)
