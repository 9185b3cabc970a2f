from collections import Counter

import numpy as np
import pytest

from onticsim import gallery
from onticsim.circuit import Circuit, Event, System, TestNode, WireSpec, layout
from onticsim.engine import (
    EngineError,
    HistoryCapExceeded,
    Program,
    ProgramStep,
    compile_program,
    enumerate_histories,
    run_trajectories,
    run_trajectory,
    sample_step,
    trajectory_rng,
)
from onticsim.foliation import compile_history, foliate
from onticsim.linalg import haar_state, haar_unitary
from onticsim.random_circuits import random_circuit


def vn_measure_circuit(name="m"):
    systems = {"Q": System("Q", 2)}
    eye = np.eye(2, dtype=complex)
    node = TestNode("m", ("Q",), ("Q",), (
        Event("0", (np.outer(eye[0], eye[0]),)),
        Event("1", (np.outer(eye[1], eye[1]),)),
    ))
    return Circuit(name, systems, [node], [])


class TestSampleStep:
    def test_z_measurement_of_zero_is_deterministic(self):
        prog = Program.single(vn_measure_circuit())
        compiled = compile_program(prog)
        rng = trajectory_rng(0, 0)
        outcomes, state, weight = sample_step(compiled[0], np.array([1, 0], dtype=complex), "0", rng)
        assert outcomes == {"m": "0"}
        assert abs(weight - 1) < 1e-12
        assert np.allclose(state, [1, 0])

    def test_born_rule_frequencies(self):
        prog = Program.single(vn_measure_circuit())
        plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
        n = 40_000
        compiled = compile_program(prog)
        hits = sum(
            run_trajectory(prog, omega0=plus, seed=3, index=i, compiled=compiled)
            .steps[0].outcomes["m"] == "0"
            for i in range(n)
        )
        sigma = 0.5 / np.sqrt(n)
        assert abs(hits / n - 0.5) < 3 * sigma + 1e-9


class TestRunTrajectory:
    def test_unitary_steps_probability_one(self):
        rng = np.random.default_rng(5)
        ops = [haar_unitary(2, rng) for _ in range(4)]
        systems = {"Q": System("Q", 2)}
        steps = [
            ProgramStep(Circuit(
                f"u{t}", dict(systems),
                [TestNode("u", ("Q",), ("Q",), (Event("0", (op,)),))], [],
            ))
            for t, op in enumerate(ops)
        ]
        psi0 = haar_state(2, rng)
        traj = run_trajectory(Program("chain", steps), omega0=psi0, seed=0)
        assert abs(traj.probability - 1) < 1e-12
        expected = ops[3] @ ops[2] @ ops[1] @ ops[0] @ psi0
        assert np.abs(traj.final_state - expected).max() < 1e-10

    def test_repeated_measurement_is_repeatable(self):
        prog = Program(
            "mm", [ProgramStep(vn_measure_circuit("m1")), ProgramStep(vn_measure_circuit("m2"))]
        )
        plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
        hist = dict(enumerate_histories(prog, omega0=plus))
        law = {tuple(v for _, v in k): p for k, p in hist.items()}
        assert abs(law[("0", "0")] - 0.5) < 1e-12
        assert abs(law[("1", "1")] - 0.5) < 1e-12
        assert law.get(("0", "1"), 0.0) < 1e-12
        assert law.get(("1", "0"), 0.0) < 1e-12

    def test_seeded_determinism_across_compilations(self):
        prog = gallery.conditioned_step_program()
        t1 = run_trajectory(prog, seed=9, index=4, store_states=True)
        t2 = run_trajectory(prog, seed=9, index=4, store_states=True)
        assert t1.steps[0].outcomes == t2.steps[0].outcomes
        assert np.array_equal(t1.final_state, t2.final_state)
        assert t1.probability == t2.probability

    def test_different_indices_differ(self):
        prog = gallery.conditioned_step_program()
        compiled = compile_program(prog)
        outcomes = {
            tuple(run_trajectory(prog, seed=1, index=i, compiled=compiled).steps[0].outcomes.items())
            for i in range(40)
        }
        assert len(outcomes) > 1

    def test_trajectory_weight_equals_history_operator_norm(self):
        prog = gallery.conditioned_step_program()
        lay = layout(prog.steps[0].circuit)
        fol = foliate(lay, "asap")
        compiled = compile_program(prog)
        for i in range(25):
            traj = run_trajectory(prog, seed=21, index=i, compiled=compiled)
            op = compile_history(fol, traj.steps[0].outcomes).operator
            expected = float(np.linalg.norm(op @ prog.initial_state) ** 2)
            assert abs(traj.probability - expected) < 1e-10

    def test_classical_inputs_change_final_state_not_norm(self):
        # The input-selected node acts unitarily on an unmeasured output
        # wire, so it shifts the state but leaves the outcome law alone.
        prog = gallery.conditioned_step_program()
        h0 = dict(enumerate_histories(prog, inputs=["0"]))
        h1 = dict(enumerate_histories(prog, inputs=["1"]))
        assert h0.keys() == h1.keys()
        assert all(abs(h0[k] - h1[k]) < 1e-10 for k in h0)
        t0 = run_trajectory(prog, inputs=["0"], seed=8)
        t1 = run_trajectory(prog, inputs=["1"], seed=8)
        assert t0.steps[0].outcomes == t1.steps[0].outcomes
        assert np.abs(t0.final_state - t1.final_state).max() > 1e-3

    def test_classical_inputs_change_the_law_when_measured(self):
        # Closing the circuit with a readout after the input-selected node
        # makes the distribution input-dependent.
        prog = Program.single(gallery.conditioned_step_closed())
        h0 = dict(enumerate_histories(prog, inputs=["0"]))
        h1 = dict(enumerate_histories(prog, inputs=["1"]))
        assert h0.keys() == h1.keys()
        assert any(abs(h0[k] - h1[k]) > 1e-3 for k in h0)

    def test_store_states_are_normalized(self):
        prog = gallery.merge_split_program()
        traj = run_trajectory(prog, seed=2, store_states=True)
        assert len(traj.steps) == 3
        for step, dims in zip(traj.steps, traj.state_dims):
            assert abs(np.linalg.norm(step.state) - 1) < 1e-9
            assert step.state.size == int(np.prod(dims))

    def test_stored_step_operator_reproduces_weight(self):
        prog = gallery.conditioned_step_program()
        for i in range(10):
            traj = run_trajectory(prog, seed=15, index=i, store_operators=True)
            op = traj.steps[0].operator
            assert op is not None
            expected = float(np.linalg.norm(op @ prog.initial_state) ** 2)
            assert abs(traj.steps[0].weight - expected) < 1e-10

    def test_open_input_needs_initial_state(self):
        prog = Program.single(vn_measure_circuit())
        with pytest.raises(EngineError, match="initial state"):
            run_trajectory(prog, seed=0)

    def test_run_trajectories_matches_indexwise(self):
        prog = gallery.conditioned_step_program()
        batch = run_trajectories(prog, 5, seed=33)
        for i, traj in enumerate(batch):
            solo = run_trajectory(prog, seed=33, index=i)
            assert solo.steps[0].outcomes == traj.steps[0].outcomes


class TestEnumerate:
    def test_single_measurement_two_histories(self):
        prog = Program.single(vn_measure_circuit())
        plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
        hist = enumerate_histories(prog, omega0=plus)
        assert len(hist) == 2
        assert abs(sum(p for _, p in hist) - 1) < 1e-12

    def test_conditioned_step_sums_to_one(self):
        hist = enumerate_histories(gallery.conditioned_step_program())
        assert len(hist) == 32
        assert abs(sum(p for _, p in hist) - 1) < 1e-9

    def test_disconnected_components_factorize(self):
        """Two unwired prepare-measure pairs: the joint law is a product."""
        systems = {"A": System("A", 2), "B": System("B", 2)}
        eye = np.eye(2, dtype=complex)

        def pm(label, sys_label, amps):
            prep = TestNode(
                f"p{label}", (), (sys_label,),
                (Event("0", (np.array(amps, dtype=complex).reshape(2, 1),)),),
            )
            eff = TestNode(f"e{label}", (sys_label,), (), (
                Event("0", (eye[0].reshape(1, 2),)),
                Event("1", (eye[1].reshape(1, 2),)),
            ))
            return [prep, eff], WireSpec(f"p{label}", 0, f"e{label}", 0)

        n1, w1 = pm("1", "A", [np.sqrt(0.3), np.sqrt(0.7)])
        n2, w2 = pm("2", "B", [np.sqrt(0.9), np.sqrt(0.1)])
        c = Circuit("two", systems, n1 + n2, [w1, w2], closed=True)
        law = {tuple(v for _, v in k): p for k, p in enumerate_histories(Program.single(c))}
        marg1 = {o: sum(p for k, p in law.items() if k[0] == o) for o in "01"}
        marg2 = {o: sum(p for k, p in law.items() if k[1] == o) for o in "01"}
        for o1 in "01":
            for o2 in "01":
                assert abs(law[(o1, o2)] - marg1[o1] * marg2[o2]) < 1e-10

    def test_bind_permutation_routes_wires(self):
        """A swapped bind map feeds step 1's wires crosswise into step 2."""
        systems = {"A": System("A", 2), "B": System("B", 2)}
        prep = Circuit(
            "prep", dict(systems),
            [
                TestNode("pa", (), ("A",), (Event("0", (np.array([[1], [0]], dtype=complex),)),)),
                TestNode("pb", (), ("B",), (Event("0", (np.array([[1], [1]], dtype=complex) / np.sqrt(2),)),)),
            ],
            [],
        )
        eye = np.eye(2, dtype=complex)
        meas = Circuit(
            "meas", dict(systems),
            [
                TestNode("m1", ("A",), ("A",), (
                    Event("0", (np.outer(eye[0], eye[0]),)),
                    Event("1", (np.outer(eye[1], eye[1]),)),
                )),
                TestNode("m2", ("B",), ("B",), (
                    Event("0", (np.outer(eye[0], eye[0]),)),
                    Event("1", (np.outer(eye[1], eye[1]),)),
                )),
            ],
            [],
        )
        prog = Program("cross", [ProgramStep(prep), ProgramStep(meas, bind=[(0, 1), (1, 0)])])
        law = {tuple(v for _, v in k): p for k, p in enumerate_histories(prog)}
        # m1 sees the |+> qubit (uniform), m2 sees |0> (deterministic).
        assert abs(law[("0", "0")] - 0.5) < 1e-12
        assert abs(law[("1", "0")] - 0.5) < 1e-12
        assert law.get(("0", "1"), 0.0) < 1e-12 and law.get(("1", "1"), 0.0) < 1e-12

    def test_cap_exceeded(self):
        prog = Program(
            "many", [ProgramStep(vn_measure_circuit(f"m{t}")) for t in range(3)]
        )
        plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
        with pytest.raises(HistoryCapExceeded):
            enumerate_histories(prog, omega0=plus, cap=4)

    def test_monte_carlo_matches_enumeration_on_random_program(self):
        rng = np.random.default_rng(101)
        ops = [haar_unitary(4, rng) for _ in range(2)]
        systems = {"Q1": System("Q1", 2), "Q2": System("Q2", 2)}
        eye = np.eye(2, dtype=complex)
        meas = lambda lbl, s: TestNode(lbl, (s,), (s,), (
            Event("0", (np.outer(eye[0], eye[0]),)),
            Event("1", (np.outer(eye[1], eye[1]),)),
        ))
        steps = []
        for t in range(3):
            nodes = [
                TestNode("u", ("Q1", "Q2"), ("Q1", "Q2"), (Event("0", (ops[t % 2],)),)),
                meas("m1", "Q1"),
            ]
            wires = [WireSpec("u", 0, "m1", 0)]
            steps.append(ProgramStep(Circuit(f"s{t}", dict(systems), nodes, wires)))
        prog = Program("rand3", steps)
        psi0 = haar_state(4, rng)
        exact = {k: p for k, p in enumerate_histories(prog, omega0=psi0)}
        n = 30_000
        compiled = compile_program(prog)
        counts = Counter()
        for i in range(n):
            traj = run_trajectory(prog, omega0=psi0, seed=77, index=i, compiled=compiled)
            key = tuple(
                (f"{t}:{node}" if len(traj.steps) > 1 else node, out)
                for t, s in enumerate(traj.steps)
                for node, out in s.outcomes.items()
            )
            counts[key] += 1
        tv = 0.5 * sum(abs(counts.get(k, 0) / n - p) for k, p in exact.items())
        tv += 0.5 * sum(c / n for k, c in counts.items() if k not in exact)
        assert tv < 0.02

    def test_random_deterministic_circuits_normalize(self):
        """Complete tests (with per-branch complete conditioning) always
        yield a history law summing to one, up to total dimension 64."""
        rng = np.random.default_rng(303)
        checked = 0
        while checked < 10:
            c = random_circuit(rng, n_nodes=(4, 8), max_total_dim=64)
            lay = layout(c)
            dim_in = int(np.prod(lay.input_dims)) if lay.input_dims else 1
            psi0 = haar_state(dim_in, rng) if dim_in > 1 else None
            try:
                hist = enumerate_histories(Program.single(c), omega0=psi0, cap=50_000)
            except HistoryCapExceeded:
                continue
            total = sum(p for _, p in hist)
            assert abs(total - 1) < 1e-9, f"sum = {total}"
            checked += 1

    def test_order_of_independent_nodes_does_not_change_law(self):
        """Swapping the declaration order of causally independent tests
        permutes nothing observable: the joint law is identical."""
        rng = np.random.default_rng(55)
        c = random_circuit(rng, n_nodes=(5, 7))
        lay = layout(c)
        # find two adjacent-in-declaration nodes with no path between them
        import itertools

        def reachable(start, goal, preds):
            frontier, seen = {goal}, set()
            while frontier:
                x = frontier.pop()
                if x == start:
                    return True
                seen.add(x)
                frontier |= preds[x] - seen
            return False

        preds = lay.predecessors
        swap = None
        for i, j in itertools.combinations(range(len(c.nodes)), 2):
            if not reachable(i, j, preds) and not reachable(j, i, preds):
                swap = (i, j)
                break
        if swap is None:
            pytest.skip("random draw produced a totally ordered circuit")
        nodes = list(c.nodes)
        nodes[swap[0]], nodes[swap[1]] = nodes[swap[1]], nodes[swap[0]]
        c2 = Circuit(c.name, c.systems, nodes, c.wires)
        dim_in = int(np.prod(lay.input_dims)) if lay.input_dims else 1
        psi0 = haar_state(dim_in, rng) if dim_in > 1 else None
        law1 = dict(enumerate_histories(Program.single(c), omega0=psi0))
        law2 = dict(enumerate_histories(Program.single(c2), omega0=psi0))
        norm = lambda law: {tuple(sorted(k)): p for k, p in law.items()}
        l1, l2 = norm(law1), norm(law2)
        assert l1.keys() == l2.keys()
        assert all(abs(l1[k] - l2[k]) < 1e-10 for k in l1)


class TestEnginePreconditions:
    def test_rejects_non_atomic_events(self):
        systems = {"Q": System("Q", 2)}
        eye = np.eye(2, dtype=complex)
        node = TestNode("fuzz", ("Q",), ("Q",), (
            Event("both", (np.outer(eye[0], eye[0]), np.outer(eye[1], eye[1]))),
        ))
        with pytest.raises(EngineError, match="atomic"):
            compile_program(Program.single(Circuit("na", systems, [node], [])))

    def test_rejects_classical_wires(self):
        systems = {"X": System("X", 2, "classical")}
        node = TestNode("id", ("X",), ("X",), (Event("0", (np.eye(2, dtype=complex),)),))
        with pytest.raises(EngineError, match="quantum"):
            compile_program(Program.single(Circuit("cl", systems, [node], [])))

    def test_bind_dimension_checked(self):
        sys2 = {"Q": System("Q", 2)}
        sys3 = {"R": System("R", 3)}
        s1 = Circuit("a", sys2, [TestNode("p", (), ("Q",), (Event("0", (np.array([[1], [0]], dtype=complex),)),))], [])
        s2 = Circuit("b", sys3, [TestNode("e", ("R",), (), (
            Event(str(j), (np.eye(3, dtype=complex)[j].reshape(1, 3),)) for j in range(3)
        ))], [])
        prog = Program("bad", [ProgramStep(s1), ProgramStep(s2)])
        with pytest.raises(EngineError, match="dim"):
            compile_program(prog)

    def test_normalized_initial_state_required(self):
        prog = Program.single(vn_measure_circuit())
        with pytest.raises(EngineError, match="normalized"):
            run_trajectory(prog, omega0=np.array([1.0, 1.0]), seed=0)
