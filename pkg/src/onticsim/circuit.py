"""Operational circuits: systems, tests, directed-acyclic wiring, classical
conditioning edges, validation, and the canonical JSON interchange format.

A circuit is a DAG of test nodes. Each node carries one event per outcome;
wires connect output ports to input ports of matching systems. Unwired
ports form the open boundary (a circuit declared ``closed`` must not have
any). Classical conditioning is an explicit edge: the sampled outcome of a
source node selects which subset of the target's events is admissible. The
reserved source label ``@input`` selects on the per-step classical input
instead of another node's outcome.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import prod

import numpy as np

from . import jsonio
from .linalg import MAX_DIM, tensor_product
from .quantum import COMPLETENESS_TOL, KrausSet, SignatureError, gram_top_eigenvalue

INPUT_SOURCE = "@input"

_THEORIES = ("quantum", "classical", "trivial")


class CircuitError(ValueError):
    """Raised for malformed circuit documents or invalid wiring."""


@dataclass(frozen=True)
class System:
    label: str
    dim: int
    theory: str = "quantum"

    def __post_init__(self):
        if self.theory not in _THEORIES:
            raise CircuitError(f"unknown theory {self.theory!r} for system {self.label}")
        if self.dim < 1 or (self.theory == "trivial" and self.dim != 1):
            raise CircuitError(f"bad dimension {self.dim} for {self.theory} system {self.label}")


@dataclass(frozen=True)
class Event:
    """One outcome of a test: an outcome label plus its Kraus operator(s)."""

    outcome: str
    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.operators)
        if not ops:
            raise CircuitError(f"event {self.outcome!r} has no operators")
        object.__setattr__(self, "operators", ops)

    @property
    def is_atomic(self) -> bool:
        return len(self.operators) == 1


@dataclass(frozen=True)
class Condition:
    """Classical edge: source node outcome -> admissible event indices."""

    source: str
    outcome_map: dict[str, tuple[int, ...]]

    def __post_init__(self):
        object.__setattr__(
            self,
            "outcome_map",
            {str(k): tuple(int(i) for i in v) for k, v in self.outcome_map.items()},
        )


@dataclass(frozen=True)
class TestNode:
    __test__ = False  # not a pytest class

    label: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    events: tuple[Event, ...]
    condition: Condition | None = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "events", tuple(self.events))
        if not self.events:
            raise CircuitError(f"node {self.label!r} has no events")
        labels = [e.outcome for e in self.events]
        if len(set(labels)) != len(labels):
            raise CircuitError(f"node {self.label!r} has duplicate outcome labels")

    def event_index(self, outcome: str) -> int:
        for i, e in enumerate(self.events):
            if e.outcome == outcome:
                return i
        raise KeyError(f"node {self.label!r} has no outcome {outcome!r}")


@dataclass(frozen=True)
class WireSpec:
    from_node: str
    from_port: int
    to_node: str
    to_port: int


@dataclass
class Circuit:
    name: str
    systems: dict[str, System]
    nodes: list[TestNode]
    wires: list[WireSpec]
    closed: bool = False

    def node(self, label: str) -> TestNode:
        for n in self.nodes:
            if n.label == label:
                return n
        raise KeyError(f"no node {label!r}")

    def node_index(self, label: str) -> int:
        for i, n in enumerate(self.nodes):
            if n.label == label:
                return i
        raise KeyError(f"no node {label!r}")


@dataclass(frozen=True)
class WireInfo:
    """A resolved wire, including synthesized boundary wires.

    ``src``/``dst`` are (node index, port) pairs; None marks the circuit
    boundary (missing src: circuit input, missing dst: circuit output).
    """

    index: int
    system: str
    dim: int
    theory: str
    src: tuple[int, int] | None
    dst: tuple[int, int] | None


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    is_closed: bool = False
    node_count: int = 0

    @property
    def ok(self) -> bool:
        return not self.errors

    def __str__(self) -> str:
        status = "OK" if self.ok else "INVALID"
        lines = [f"{status}: {self.node_count} nodes, {'closed' if self.is_closed else 'open'}"]
        lines += [f"  - {e}" for e in self.errors]
        return "\n".join(lines)


@dataclass
class CircuitLayout:
    """Derived wiring structure of a validated circuit."""

    circuit: Circuit
    wires: list[WireInfo]
    node_in_wires: list[list[int]]
    node_out_wires: list[list[int]]
    input_wires: list[int]
    output_wires: list[int]
    topo_order: list[int]
    predecessors: list[set[int]]   # DAG parents, conditioning included

    @property
    def input_dims(self) -> tuple[int, ...]:
        return tuple(self.wires[w].dim for w in self.input_wires)

    @property
    def output_dims(self) -> tuple[int, ...]:
        return tuple(self.wires[w].dim for w in self.output_wires)

    def node_event_shape(self, node: TestNode) -> tuple[int, int]:
        d_out = prod(self.circuit.systems[s].dim for s in node.outputs)
        d_in = prod(self.circuit.systems[s].dim for s in node.inputs)
        return d_out, d_in

    def all_quantum(self) -> bool:
        return all(w.theory in ("quantum", "trivial") for w in self.wires)


def _node_port_dims(circuit: Circuit, node: TestNode) -> tuple[int, int]:
    d_in = prod(circuit.systems[s].dim for s in node.inputs) if node.inputs else 1
    d_out = prod(circuit.systems[s].dim for s in node.outputs) if node.outputs else 1
    return d_out, d_in


def validate_dag(circuit: Circuit, *, tol: float = COMPLETENESS_TOL) -> ValidationReport:
    """Check wiring, typing, acyclicity, test normalization and closure.

    Never raises; all violations are collected in the report. ``tol`` is
    the slack allowed on the trace-nonincreasing test normalization.
    """
    report = ValidationReport(node_count=len(circuit.nodes))
    errors = report.errors
    labels = [n.label for n in circuit.nodes]
    if len(set(labels)) != len(labels):
        errors.append("duplicate node labels")
        return report
    index = {lbl: i for i, lbl in enumerate(labels)}

    for n in circuit.nodes:
        for s in n.inputs + n.outputs:
            if s not in circuit.systems:
                errors.append(f"unknown system {s!r} on node {n.label!r}")
    if errors:
        return report

    # Port occupancy and wire typing.
    in_taken: dict[tuple[int, int], WireSpec] = {}
    out_taken: dict[tuple[int, int], WireSpec] = {}
    for w in circuit.wires:
        if w.from_node not in index or w.to_node not in index:
            errors.append(f"wire references unknown node: {w.from_node}->{w.to_node}")
            continue
        fi, ti = index[w.from_node], index[w.to_node]
        f_node, t_node = circuit.nodes[fi], circuit.nodes[ti]
        if not (0 <= w.from_port < len(f_node.outputs)):
            errors.append(f"wire from {w.from_node}.{w.from_port}: no such output port")
            continue
        if not (0 <= w.to_port < len(t_node.inputs)):
            errors.append(f"wire to {w.to_node}.{w.to_port}: no such input port")
            continue
        s_from = circuit.systems[f_node.outputs[w.from_port]]
        s_to = circuit.systems[t_node.inputs[w.to_port]]
        if s_from.dim != s_to.dim or s_from.theory != s_to.theory:
            errors.append(
                f"dimension mismatch on wire {w.from_node}.{w.from_port}->{w.to_node}.{w.to_port}: "
                f"{s_from.label}(dim {s_from.dim}, {s_from.theory}) vs "
                f"{s_to.label}(dim {s_to.dim}, {s_to.theory})"
            )
        if (fi, w.from_port) in out_taken:
            errors.append(f"output port {w.from_node}.{w.from_port} wired twice")
        if (ti, w.to_port) in in_taken:
            errors.append(f"input port {w.to_node}.{w.to_port} wired twice")
        out_taken[(fi, w.from_port)] = w
        in_taken[(ti, w.to_port)] = w

    # Event operator shapes and test normalization.
    for n in circuit.nodes:
        d_out, d_in = _node_port_dims(circuit, n)
        bad_shape = False
        for e in n.events:
            for k in e.operators:
                if k.shape != (d_out, d_in):
                    errors.append(
                        f"node {n.label!r} event {e.outcome!r}: operator shape {k.shape} "
                        f"!= ({d_out}, {d_in})"
                    )
                    bad_shape = True
        if bad_shape:
            continue
        quantum_ports = all(
            circuit.systems[s].theory in ("quantum", "trivial") for s in n.inputs + n.outputs
        )
        if not quantum_ports:
            continue
        subsets: list[tuple[str, tuple[int, ...]]] = []
        if n.condition is None:
            subsets.append(("", tuple(range(len(n.events)))))
        else:
            for key, idxs in n.condition.outcome_map.items():
                if any(i < 0 or i >= len(n.events) for i in idxs):
                    errors.append(f"node {n.label!r}: condition map for {key!r} is out of range")
                elif not idxs:
                    errors.append(f"node {n.label!r}: empty event subset for outcome {key!r}")
                else:
                    subsets.append((key, idxs))
        for key, idxs in subsets:
            ops = [k for i in idxs for k in n.events[i].operators]
            top = gram_top_eigenvalue(ops)
            if top > 1.0 + tol:
                ctx = f" (conditioned on {key!r})" if key else ""
                errors.append(f"node {n.label!r}{ctx} is trace-increasing: sigma_max = {top:.3g}")

    # Conditioning sources.
    edges: list[tuple[int, int]] = [(index[w.from_node], index[w.to_node]) for w in circuit.wires
                                    if w.from_node in index and w.to_node in index]
    for n in circuit.nodes:
        if n.condition is None or n.condition.source == INPUT_SOURCE:
            continue
        if n.condition.source not in index:
            errors.append(f"node {n.label!r} conditioned on unknown node {n.condition.source!r}")
            continue
        src = circuit.nodes[index[n.condition.source]]
        missing = [e.outcome for e in src.events if e.outcome not in n.condition.outcome_map]
        if missing:
            errors.append(
                f"node {n.label!r}: condition map misses source outcomes {missing}"
            )
        edges.append((index[n.condition.source], index[n.label]))

    # Acyclicity over wires + conditioning edges.
    if _topo_sort(len(circuit.nodes), edges) is None:
        errors.append("cycle detected in wiring/conditioning graph")

    dangling = [
        f"{n.label}.{p}"
        for i, n in enumerate(circuit.nodes)
        for kind, ports, taken in (("in", n.inputs, in_taken), ("out", n.outputs, out_taken))
        for p in range(len(ports))
        if (i, p) not in taken
    ]
    report.is_closed = not dangling
    if circuit.closed and dangling:
        errors.append(f"declared closed but has dangling ports: {', '.join(dangling)}")
    return report


def _topo_sort(n: int, edges: list[tuple[int, int]]) -> list[int] | None:
    """Kahn's algorithm, stable by node index; None if cyclic."""
    succs: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    for a, b in edges:
        succs[a].append(b)
        indeg[b] += 1
    ready = sorted(i for i in range(n) if indeg[i] == 0)
    order: list[int] = []
    while ready:
        i = ready.pop(0)
        order.append(i)
        freed = []
        for j in succs[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                freed.append(j)
        ready = sorted(ready + freed)
    return order if len(order) == n else None


def layout(circuit: Circuit) -> CircuitLayout:
    """Resolve wires (including the open boundary) and the topological order.

    Raises CircuitError if validation fails.
    """
    report = validate_dag(circuit)
    if not report.ok:
        raise CircuitError("invalid circuit:\n" + str(report))
    index = {n.label: i for i, n in enumerate(circuit.nodes)}

    node_in: list[list[int | None]] = [[None] * len(n.inputs) for n in circuit.nodes]
    node_out: list[list[int | None]] = [[None] * len(n.outputs) for n in circuit.nodes]
    wires: list[WireInfo] = []

    def add_wire(system: str, src, dst) -> int:
        s = circuit.systems[system]
        w = WireInfo(len(wires), system, s.dim, s.theory, src, dst)
        wires.append(w)
        return w.index

    # Canonical wire order: input boundary, internal (sorted by source), output boundary.
    input_wires, output_wires = [], []
    for i, n in enumerate(circuit.nodes):
        for p, s in enumerate(n.inputs):
            if not any(w.to_node == n.label and w.to_port == p for w in circuit.wires):
                wi = add_wire(s, None, (i, p))
                node_in[i][p] = wi
                input_wires.append(wi)
    for w in sorted(circuit.wires, key=lambda w: (index[w.from_node], w.from_port)):
        fi, ti = index[w.from_node], index[w.to_node]
        sys_label = circuit.nodes[fi].outputs[w.from_port]
        wi = add_wire(sys_label, (fi, w.from_port), (ti, w.to_port))
        node_out[fi][w.from_port] = wi
        node_in[ti][w.to_port] = wi
    for i, n in enumerate(circuit.nodes):
        for p, s in enumerate(n.outputs):
            if node_out[i][p] is None:
                wi = add_wire(s, (i, p), None)
                node_out[i][p] = wi
                output_wires.append(wi)

    edges = [(w.src[0], w.dst[0]) for w in wires if w.src and w.dst]
    preds: list[set[int]] = [set() for _ in circuit.nodes]
    for a, b in edges:
        preds[b].add(a)
    for n in circuit.nodes:
        if n.condition and n.condition.source != INPUT_SOURCE:
            a, b = index[n.condition.source], index[n.label]
            preds[b].add(a)
            edges.append((a, b))
    topo = _topo_sort(len(circuit.nodes), edges)
    assert topo is not None  # validate_dag already checked acyclicity

    return CircuitLayout(
        circuit=circuit,
        wires=wires,
        node_in_wires=[[w for w in lst] for lst in node_in],
        node_out_wires=[[w for w in lst] for lst in node_out],
        input_wires=input_wires,
        output_wires=output_wires,
        topo_order=topo,
        predecessors=preds,
    )


def connected_components(circuit: Circuit) -> list[set[str]]:
    """Partition of node labels under undirected wire + conditioning links.

    Outcome distributions of distinct components factorize downstream.
    """
    parent = list(range(len(circuit.nodes)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(a: int, b: int) -> None:
        parent[find(a)] = find(b)

    index = {n.label: i for i, n in enumerate(circuit.nodes)}
    for w in circuit.wires:
        union(index[w.from_node], index[w.to_node])
    for n in circuit.nodes:
        if n.condition and n.condition.source != INPUT_SOURCE:
            union(index[n.condition.source], index[n.label])
    groups: dict[int, set[str]] = {}
    for n, i in index.items():
        groups.setdefault(find(i), set()).add(n)
    return sorted(groups.values(), key=lambda g: min(index[x] for x in g))


def compose_sequential(t1: KrausSet, t2: KrausSet) -> KrausSet:
    """First t1, then t2; Kraus operators are all products K2 K1."""
    if t1.out_dim != t2.in_dim:
        raise SignatureError(
            f"cannot compose: first outputs dim {t1.out_dim}, second expects {t2.in_dim}"
        )
    ops, labels = [], []
    for k1, l1 in zip(t1.operators, t1.outcome_labels):
        for k2, l2 in zip(t2.operators, t2.outcome_labels):
            ops.append(k2 @ k1)
            labels.append(l1 if t2.is_atomic else (l2 if t1.is_atomic else f"{l1}>{l2}"))
    if len(set(labels)) != len(labels):
        labels = [f"{i}:{l}" for i, l in enumerate(labels)]
    return KrausSet(tuple(ops), tuple(labels), in_dims=t1.in_dims, out_dims=t2.out_dims)


def compose_parallel(t1: KrausSet, t2: KrausSet, *, max_dim: int = MAX_DIM) -> KrausSet:
    """Tensor composition; Kraus operators are all pairwise products k1 (x) k2."""
    ops, labels = [], []
    for k1, l1 in zip(t1.operators, t1.outcome_labels):
        for k2, l2 in zip(t2.operators, t2.outcome_labels):
            ops.append(tensor_product(k1, k2, max_dim=max_dim))
            labels.append(l1 if t2.is_atomic else (l2 if t1.is_atomic else f"{l1},{l2}"))
    if len(set(labels)) != len(labels):
        labels = [f"{i}:{l}" for i, l in enumerate(labels)]
    return KrausSet(
        tuple(ops), tuple(labels), in_dims=t1.in_dims + t2.in_dims, out_dims=t1.out_dims + t2.out_dims
    )


# --- JSON interchange -------------------------------------------------------

def circuit_to_dict(circuit: Circuit) -> dict:
    doc = {
        "name": circuit.name,
        "systems": [
            {"label": s.label, "dim": s.dim, "theory": s.theory}
            for s in circuit.systems.values()
        ],
        "nodes": [],
        "wires": [
            {"from": [w.from_node, w.from_port], "to": [w.to_node, w.to_port]}
            for w in sorted(
                circuit.wires,
                key=lambda w: (circuit.node_index(w.from_node), w.from_port),
            )
        ],
        "closed": circuit.closed,
    }
    for n in circuit.nodes:
        node_doc = {
            "label": n.label,
            "inputs": list(n.inputs),
            "outputs": list(n.outputs),
            "events": [
                {"outcome": e.outcome, "kraus": [jsonio.encode_matrix(k) for k in e.operators]}
                for e in n.events
            ],
        }
        if n.condition is not None:
            node_doc["condition"] = {
                "source": n.condition.source,
                "map": {k: list(v) for k, v in n.condition.outcome_map.items()},
            }
        doc["nodes"].append(node_doc)
    return doc


def circuit_from_dict(doc: dict) -> Circuit:
    try:
        systems = {
            s["label"]: System(s["label"], int(s["dim"]), s.get("theory", "quantum"))
            for s in doc["systems"]
        }
        nodes = []
        for nd in doc["nodes"]:
            events = tuple(
                Event(str(ev["outcome"]), tuple(jsonio.decode_matrix(m) for m in ev["kraus"]))
                for ev in nd["events"]
            )
            cond = None
            if nd.get("condition"):
                cond = Condition(str(nd["condition"]["source"]),
                                 {str(k): tuple(v) for k, v in nd["condition"]["map"].items()})
            nodes.append(TestNode(str(nd["label"]), tuple(nd.get("inputs", ())),
                                  tuple(nd.get("outputs", ())), events, cond))
        wires = [
            WireSpec(str(w["from"][0]), int(w["from"][1]), str(w["to"][0]), int(w["to"][1]))
            for w in doc.get("wires", ())
        ]
        return Circuit(str(doc.get("name", "circuit")), systems, nodes, wires,
                       bool(doc.get("closed", False)))
    except (KeyError, TypeError, IndexError) as exc:
        raise CircuitError(f"malformed circuit document: {exc}") from exc


def serialize_circuit(circuit: Circuit) -> str:
    return jsonio.dumps(circuit_to_dict(circuit), indent=2) + "\n"


def parse_circuit(text: str) -> Circuit:
    """Parse a circuit from JSON (or the line DSL) and validate it.

    Raises CircuitError with a description of every violation found.
    """
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CircuitError(f"JSON syntax error at line {exc.lineno}, col {exc.colno}: {exc.msg}") from exc
        circuit = circuit_from_dict(doc)
    else:
        from .dsl import parse_dsl

        circuit = parse_dsl(text)
    report = validate_dag(circuit)
    if not report.ok:
        raise CircuitError("invalid circuit:\n" + str(report))
    return circuit
