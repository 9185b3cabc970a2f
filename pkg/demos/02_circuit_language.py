"""The circuit description language and its JSON interchange form.

Circuits are DAGs of tests wired output-to-input, with classical
conditioning edges selecting event subsets. A short line-oriented DSL
desugars to the canonical JSON; both parse to the same validated object.
"""

from pathlib import Path

from onticsim import connected_components, parse_circuit, serialize_circuit, validate_dag
from onticsim.circuit import layout

CIRCUITS = Path(__file__).resolve().parents[1] / "circuits"

print("== DSL: a Bell pair with two readouts ==")
dsl_text = (CIRCUITS / "bell_pair.opt").read_text()
print(dsl_text)
bell = parse_circuit(dsl_text)
print(validate_dag(bell))

print("\n== the nine-node conditioned-step circuit (JSON) ==")
step = parse_circuit((CIRCUITS / "conditioned_step.json").read_text())
report = validate_dag(step)
print(report)
lay = layout(step)
print("topological order:", " -> ".join(step.nodes[i].label for i in lay.topo_order))
print("open boundary    :", lay.input_dims, "->", lay.output_dims)
print("components       :", connected_components(step))
conditioned = [n.label for n in step.nodes if n.condition is not None]
print("conditioned nodes:", conditioned)

print("\n== round trip is canonical ==")
text = serialize_circuit(step)
again = serialize_circuit(parse_circuit(text))
print("serialize(parse(serialize(c))) identical:", text == again)
