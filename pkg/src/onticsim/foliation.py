"""Foliation of circuits into ordered slices and their compilation to
operator products.

A foliation covers the circuit's wires with an ordered sequence of global
cuts (leaves); the nodes between two adjacent cuts form a slice. Compiling
a slice with a fixed outcome assignment yields one operator (tensor product
of the firing events' Kraus operators, identity on wires passing through,
with permutations absorbing wire reordering); the full history operator is
the right-to-left product of the slice operators. Every foliation of the
same circuit with the same outcomes compiles to the same operator, which is
the invariance the test-suite pins down.

Strategies: ``asap`` fires every node in the earliest admissible slice (a
node conditioned on another may share its slice, composing through the
trivial system inside one leaf); ``alap`` fires as late as possible and
keeps conditioning sources strictly earlier, so every classical edge
crosses a cut. ``random`` groups a random linear extension into random
consecutive slices, which may bury wires inside a slice; compilation
handles such internal chains by micro-slicing.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

from .circuit import Circuit, CircuitLayout, CircuitError, INPUT_SOURCE, TestNode, layout as circuit_layout
from .linalg import MAX_DIM, is_contraction


class FoliationError(CircuitError):
    pass


class MissingOutcomeError(FoliationError):
    """A probabilistic node has no outcome in the given assignment."""


@dataclass
class Foliation:
    layout: CircuitLayout
    slices: list[list[int]]      # node indices per slice
    leaves: list[list[int]]      # wire indices per cut; len(slices) + 1 entries
    strategy: str = "given"

    @property
    def circuit(self) -> Circuit:
        return self.layout.circuit

    def slice_labels(self) -> list[list[str]]:
        return [[self.circuit.nodes[i].label for i in s] for s in self.slices]

    def leaf_dims(self, i: int) -> tuple[int, ...]:
        return tuple(self.layout.wires[w].dim for w in self.leaves[i])


def _leaves_for_slices(lay: CircuitLayout, slices: list[list[int]]) -> list[list[int]]:
    n_slices = len(slices)
    slice_of = {n: s for s, grp in enumerate(slices) for n in grp}
    fire = {w.index: (slice_of[w.src[0]] if w.src else -1) for w in lay.wires}
    consume = {w.index: (slice_of[w.dst[0]] if w.dst else n_slices) for w in lay.wires}
    return [
        [w.index for w in lay.wires if fire[w.index] < i <= consume[w.index]]
        for i in range(n_slices + 1)
    ]


def _check_slices(lay: CircuitLayout, slices: list[list[int]]) -> None:
    seen = [n for grp in slices for n in grp]
    if sorted(seen) != list(range(len(lay.circuit.nodes))):
        raise FoliationError("slices must partition the circuit's nodes")
    slice_of = {n: s for s, grp in enumerate(slices) for n in grp}
    for w in lay.wires:
        if w.src and w.dst and slice_of[w.src[0]] > slice_of[w.dst[0]]:
            raise FoliationError(
                f"wire {w.index} runs backwards across slices "
                f"({lay.circuit.nodes[w.src[0]].label} -> {lay.circuit.nodes[w.dst[0]].label})"
            )
    for i, node in enumerate(lay.circuit.nodes):
        if node.condition and node.condition.source != INPUT_SOURCE:
            src = lay.circuit.node_index(node.condition.source)
            if slice_of[src] > slice_of[i]:
                raise FoliationError(
                    f"conditioning source {node.condition.source} fires after {node.label}"
                )


def foliate(circuit, strategy: str = "asap", *, slices=None, rng=None) -> Foliation:
    """Build a foliation of a validated circuit.

    ``slices`` (lists of node labels) is required for strategy "given";
    ``rng`` for strategy "random".
    """
    lay = circuit if isinstance(circuit, CircuitLayout) else circuit_layout(circuit)
    if strategy == "given":
        if slices is None:
            raise FoliationError("strategy 'given' needs explicit slices")
        idx_slices = [[lay.circuit.node_index(lbl) for lbl in grp] for grp in slices]
    elif strategy == "asap":
        idx_slices = _asap_slices(lay)
    elif strategy == "alap":
        idx_slices = _alap_slices(lay)
    elif strategy == "random":
        if rng is None:
            raise FoliationError("strategy 'random' needs an rng")
        idx_slices = _random_slices(lay, rng)
    else:
        raise FoliationError(f"unknown foliation strategy {strategy!r}")
    idx_slices = [grp for grp in idx_slices if grp]
    _check_slices(lay, idx_slices)
    return Foliation(lay, idx_slices, _leaves_for_slices(lay, idx_slices), strategy)


def _cond_source(lay: CircuitLayout, i: int) -> int | None:
    node = lay.circuit.nodes[i]
    if node.condition and node.condition.source != INPUT_SOURCE:
        return lay.circuit.node_index(node.condition.source)
    return None


def _asap_slices(lay: CircuitLayout) -> list[list[int]]:
    nodes = lay.circuit.nodes
    wire_preds = [set() for _ in nodes]
    for w in lay.wires:
        if w.src and w.dst:
            wire_preds[w.dst[0]].add(w.src[0])
    fired: set[int] = set()
    slices: list[list[int]] = []
    while len(fired) < len(nodes):
        base = [
            i for i in range(len(nodes))
            if i not in fired
            and wire_preds[i] <= fired
            and (_cond_source(lay, i) is None or _cond_source(lay, i) in fired)
        ]
        group = set(base)
        # Same-slice closure: a node may fire with its conditioning source.
        changed = True
        while changed:
            changed = False
            for i in range(len(nodes)):
                src = _cond_source(lay, i)
                if (
                    i not in fired and i not in group
                    and wire_preds[i] <= fired
                    and src is not None and src in group
                ):
                    group.add(i)
                    changed = True
        if not group:
            raise FoliationError("circuit is not schedulable (should be impossible for a DAG)")
        slices.append(sorted(group))
        fired |= group
    return slices


def _alap_slices(lay: CircuitLayout) -> list[list[int]]:
    nodes = lay.circuit.nodes
    succs = [set() for _ in nodes]
    for w in lay.wires:
        if w.src and w.dst:
            succs[w.src[0]].add(w.dst[0])
    for i in range(len(nodes)):
        src = _cond_source(lay, i)
        if src is not None:
            succs[src].add(i)
    rev = [-1] * len(nodes)

    def depth(i: int) -> int:
        if rev[i] < 0:
            rev[i] = 1 + max((depth(j) for j in succs[i]), default=-1)
        return rev[i]

    for i in range(len(nodes)):
        depth(i)
    top = max(rev, default=0)
    slices: list[list[int]] = [[] for _ in range(top + 1)]
    for i, r in enumerate(rev):
        slices[top - r].append(i)
    return slices


def _random_slices(lay: CircuitLayout, rng: np.random.Generator) -> list[list[int]]:
    nodes = lay.circuit.nodes
    preds = [set(p) for p in lay.predecessors]
    remaining = set(range(len(nodes)))
    order: list[int] = []
    while remaining:
        ready = sorted(i for i in remaining if preds[i] <= set(order))
        order.append(ready[int(rng.integers(len(ready)))])
        remaining.discard(order[-1])
    slices: list[list[int]] = [[]]
    for i in order:
        if slices[-1] and rng.random() < 0.5:
            slices.append([])
        slices[-1].append(i)
    return slices


# --- outcome resolution ------------------------------------------------------

def admissible_event_indices(node: TestNode, source_outcome: str | None) -> tuple[int, ...]:
    if node.condition is None:
        return tuple(range(len(node.events)))
    if source_outcome is None:
        raise MissingOutcomeError(
            f"node {node.label!r} is conditioned on {node.condition.source!r} "
            "but that outcome is not available"
        )
    try:
        return node.condition.outcome_map[source_outcome]
    except KeyError:
        raise FoliationError(
            f"node {node.label!r}: no conditioning entry for source outcome {source_outcome!r}"
        ) from None


def resolve_assignment(
    lay: CircuitLayout, outcomes: dict[str, str] | None, classical_input: str = "0"
) -> dict[str, int]:
    """Complete an outcome assignment into one event index per node.

    Nodes whose admissible subset is a singleton resolve automatically;
    every genuine choice must be present in ``outcomes``. Raises
    MissingOutcomeError otherwise.
    """
    outcomes = dict(outcomes or {})
    resolved: dict[str, int] = {}
    chosen_label: dict[str, str] = {}
    for i in lay.topo_order:
        node = lay.circuit.nodes[i]
        if node.condition is None:
            source_outcome = None
        elif node.condition.source == INPUT_SOURCE:
            source_outcome = classical_input
        else:
            source_outcome = chosen_label.get(node.condition.source)
        admissible = admissible_event_indices(node, source_outcome)
        if node.label in outcomes:
            idx = node.event_index(outcomes[node.label])
            if idx not in admissible:
                raise FoliationError(
                    f"outcome {outcomes[node.label]!r} of node {node.label!r} "
                    "conflicts with its conditioning"
                )
        elif len(admissible) == 1:
            idx = admissible[0]
        else:
            raise MissingOutcomeError(
                f"node {node.label!r} needs an outcome (choices: "
                f"{[node.events[j].outcome for j in admissible]})"
            )
        resolved[node.label] = idx
        chosen_label[node.label] = node.events[idx].outcome
    return resolved


# --- compilation -------------------------------------------------------------

def _perm_matrix(dims: tuple[int, ...], axes: list[int]) -> np.ndarray:
    """Matrix reordering tensor factors: new position k holds old axis axes[k]."""
    d = prod(dims) if dims else 1
    idx = np.arange(d).reshape(dims if dims else (1,))
    if dims:
        idx = idx.transpose(axes)
    idx = idx.ravel()
    p = np.zeros((d, d))
    p[np.arange(d), idx] = 1.0
    return p


def _micro_levels(lay: CircuitLayout, members: list[int]) -> list[list[int]]:
    """Antichain sub-levels of a slice under its internal wire order."""
    members_set = set(members)
    inner_preds = {i: set() for i in members}
    for w in lay.wires:
        if w.src and w.dst and w.src[0] in members_set and w.dst[0] in members_set:
            inner_preds[w.dst[0]].add(w.src[0])
    done: set[int] = set()
    levels: list[list[int]] = []
    while len(done) < len(members):
        ready = sorted(i for i in members if i not in done and inner_preds[i] <= done)
        if not ready:
            raise FoliationError("cyclic slice (validation should have caught this)")
        levels.append(ready)
        done |= set(ready)
    return levels


def _node_operator(lay: CircuitLayout, i: int, resolved: dict[str, int]) -> np.ndarray:
    node = lay.circuit.nodes[i]
    event = node.events[resolved[node.label]]
    if not event.is_atomic:
        raise FoliationError(
            f"node {node.label!r} outcome {event.outcome!r} is not atomic; "
            "operator compilation needs single-Kraus events"
        )
    return event.operators[0]


def compile_slice(
    fol: Foliation,
    slice_index: int,
    outcomes: dict[str, str] | None = None,
    *,
    classical_input: str = "0",
    resolved: dict[str, int] | None = None,
    max_dim: int = MAX_DIM,
) -> np.ndarray:
    """Operator of one slice: leaf ``slice_index`` -> leaf ``slice_index + 1``."""
    if resolved is None:
        resolved = resolve_assignment(fol.layout, outcomes, classical_input)
    lay = fol.layout
    dims_of = {w.index: w.dim for w in lay.wires}
    order = list(fol.leaves[slice_index])
    if prod(fol.leaf_dims(slice_index)) > max_dim:
        raise FoliationError(f"leaf dimension exceeds cap {max_dim}")
    m = np.eye(prod(dims_of[w] for w in order) if order else 1, dtype=complex)
    for level in _micro_levels(lay, fol.slices[slice_index]):
        consumed: list[int] = []
        ops: list[np.ndarray] = []
        produced: list[int] = []
        for i in level:
            consumed += lay.node_in_wires[i]
            produced += lay.node_out_wires[i]
            ops.append(_node_operator(lay, i, resolved))
        passthrough = [w for w in order if w not in consumed]
        arrangement = consumed + passthrough
        axes = [order.index(w) for w in arrangement]
        perm = _perm_matrix(tuple(dims_of[w] for w in order), axes)
        block = np.eye(1, dtype=complex)
        for op in ops:
            block = np.kron(block, op)
        pass_dim = prod(dims_of[w] for w in passthrough) if passthrough else 1
        block = np.kron(block, np.eye(pass_dim, dtype=complex))
        if block.shape[0] * block.shape[1] > max_dim * max_dim:
            raise FoliationError(f"slice operator exceeds dimension cap {max_dim}")
        m = block @ perm @ m
        order = produced + passthrough
    target = list(fol.leaves[slice_index + 1])
    if sorted(order) != sorted(target):
        raise FoliationError("internal error: slice boundary wires do not match the next leaf")
    axes = [order.index(w) for w in target]
    m = _perm_matrix(tuple(dims_of[w] for w in order), axes) @ m
    return m


@dataclass(frozen=True)
class HistoryOperator:
    """Ordered product of slice operators (rightmost factor acts first)."""

    operator: np.ndarray
    factor_count: int

    def contraction_check(self) -> tuple[bool, float]:
        return is_contraction(self.operator)


def compile_history(
    fol: Foliation,
    outcomes: dict[str, str] | None = None,
    *,
    classical_input: str = "0",
    max_dim: int = MAX_DIM,
) -> HistoryOperator:
    """Compile the full circuit operator for one complete outcome assignment."""
    resolved = resolve_assignment(fol.layout, outcomes, classical_input)
    op = np.eye(prod(fol.leaf_dims(0)) if fol.leaves[0] else 1, dtype=complex)
    for s in range(len(fol.slices)):
        op = compile_slice(fol, s, resolved=resolved, classical_input=classical_input,
                           max_dim=max_dim) @ op
    return HistoryOperator(op, len(fol.slices))
