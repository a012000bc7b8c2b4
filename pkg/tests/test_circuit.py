import numpy as np
import pytest

from qcbm_loader.models.errors import CircuitStructureError, ParameterCountError
from qcbm_loader.models.schemas import BasisEnum, GateKindEnum, HierarchySchedule, StageSpec
from qcbm_loader.services.circuit import (
    GridLayout,
    append_layer,
    build_stage_circuit,
    compile_to_basis,
    count_parameters,
    count_single_qubit_gates,
    count_two_qubit_gates,
    export_circuit,
    flat_schedule,
    hierarchical_schedule,
    import_circuit,
    initial_parameters,
    layers_for_budget,
    lift_parameters,
    mnist_schedule,
    naive_loading_schedule,
    proportional_iterations,
)
from qcbm_loader.services.distribution import insert_plus_qubits
from qcbm_loader.services.statevector import born_distribution, run_circuit


def random_schedule(rng):
    num_v = int(rng.integers(1, 4))
    num_h = num_v + int(rng.integers(0, 2))
    layout = GridLayout(num_v, num_h)
    layers = [int(x) for x in rng.integers(0, 3, size=layout.cols)]
    return layout, hierarchical_schedule(layout, layers, 10 * layout.cols)


class TestGridLayout:

    def test_edges_of_two_by_two(self):
        assert GridLayout(2, 2).edges() == [(0, 2), (2, 3), (0, 1), (1, 3)]

    def test_odd_register_has_extra_top_column(self):
        layout = GridLayout(2, 3)
        assert layout.cols == 3
        assert layout.column_qubits(2) == [4]
        assert layout.active_qubits(2) == [0, 1, 2, 3]

    def test_active_edges_per_column(self):
        layout = GridLayout(5, 5)
        assert [len(layout.active_edges(c)) for c in range(1, 6)] == [1, 4, 7, 10, 13]

    def test_from_shape(self):
        layout = GridLayout.from_shape(8, 16)
        assert (layout.num_v, layout.num_h) == (3, 4)
        assert layout.v_qubit(0) == 0
        assert layout.h_qubit(0) == 3

    @pytest.mark.parametrize("num_v,num_h", [(3, 1), (0, 0)])
    def test_unbalanced_or_empty(self, num_v, num_h):
        with pytest.raises(CircuitStructureError):
            GridLayout(num_v, num_h)

    def test_non_power_of_two_shape(self):
        with pytest.raises(CircuitStructureError):
            GridLayout.from_shape(6, 8)

    def test_active_columns_out_of_range(self):
        with pytest.raises(CircuitStructureError):
            GridLayout(2, 2).active_qubits(3)


class TestStageCircuits:

    def test_mnist_gate_count(self):
        layout = GridLayout(5, 5)
        schedule = mnist_schedule(layout, 600)
        final = build_stage_circuit(layout, schedule, 4)
        assert count_two_qubit_gates(final) == 65
        assert schedule.total_iterations == 600

    def test_naive_loading_gate_count(self):
        layout = GridLayout(10, 11)
        schedule = naive_loading_schedule(layout, 100)
        final = build_stage_circuit(layout, schedule, len(schedule.stages) - 1)
        assert final.num_qubits == 21
        assert count_two_qubit_gates(final) == 40
        compiled = compile_to_basis(final, BasisEnum.CNOT_NATIVE)
        assert count_two_qubit_gates(compiled) == 80
        assert sum(1 for gate in compiled.gates if gate.kind == GateKindEnum.CNOT) == 80

    def test_stage_zero_register_and_random_slots(self):
        layout = GridLayout(2, 2)
        schedule = hierarchical_schedule(layout, [1, 1], 20)
        first = build_stage_circuit(layout, schedule, 0)
        assert first.register == (0, 2)
        assert first.num_random == 4
        # initial RY/RZ on two qubits, then RY/RZ per qubit and one rung RZZ
        assert first.num_params == 4 + 4 + 1

    def test_prefix_property(self, rng):
        for _ in range(20):
            layout, schedule = random_schedule(rng)
            circuits = [build_stage_circuit(layout, schedule, s) for s in range(len(schedule.stages))]
            for prev, nxt in zip(circuits, circuits[1:]):
                assert nxt.gates[: len(prev.gates)] == prev.gates
                assert nxt.num_params >= prev.num_params

    def test_lifting_is_neutral(self, rng):
        for _ in range(20):
            layout, schedule = random_schedule(rng)
            circuits = [build_stage_circuit(layout, schedule, s) for s in range(len(schedule.stages))]
            for prev, nxt in zip(circuits, circuits[1:]):
                params = rng.uniform(0, 2 * np.pi, prev.num_params)
                lifted = lift_parameters(params, prev, nxt)
                assert np.all(lifted[prev.num_params:] == 0.0)
                before = born_distribution(run_circuit(prev, params))
                after = born_distribution(run_circuit(nxt, lifted))
                expected = insert_plus_qubits(before, prev.register, nxt.register)
                np.testing.assert_allclose(after.mass, expected.mass, atol=1e-12)

    def test_lift_rejects_unrelated_circuits(self):
        layout = GridLayout(2, 2)
        a = build_stage_circuit(layout, hierarchical_schedule(layout, [1, 1], 10), 1)
        b = build_stage_circuit(layout, hierarchical_schedule(layout, [2, 1], 10), 1)
        with pytest.raises(CircuitStructureError):
            lift_parameters(np.zeros(a.num_params), a, b)

    def test_schedule_wider_than_layout(self):
        layout = GridLayout(1, 1)
        schedule = HierarchySchedule(stages=[StageSpec(columns=2, layers=1)])
        with pytest.raises(CircuitStructureError):
            build_stage_circuit(layout, schedule, 0)

    def test_stage_out_of_range(self):
        layout = GridLayout(1, 1)
        with pytest.raises(CircuitStructureError):
            build_stage_circuit(layout, flat_schedule(layout, 1, 5), 1)

    def test_initial_parameters(self):
        layout = GridLayout(2, 2)
        circuit = build_stage_circuit(layout, hierarchical_schedule(layout, [1, 1], 10), 1)
        params = initial_parameters(circuit, seed=3)
        assert np.all(params[circuit.num_random:] == 0.0)
        assert np.all((params[: circuit.num_random] >= 0) & (params[: circuit.num_random] < 2 * np.pi))
        np.testing.assert_array_equal(params, initial_parameters(circuit, seed=3))

    def test_append_layer_with_closing_rotation(self):
        layout = GridLayout(1, 1)
        circuit = build_stage_circuit(layout, flat_schedule(layout, 1, 5), 0)
        extended = append_layer(circuit, layout, closing_rotation=True)
        assert extended.num_params == circuit.num_params + 5 + 2
        assert extended.gates[-1].kind == GateKindEnum.RY
        assert extended.gates[: len(circuit.gates)] == circuit.gates

    def test_gate_counts_add_up(self):
        layout = GridLayout(2, 2)
        circuit = build_stage_circuit(layout, hierarchical_schedule(layout, [1, 2], 10), 1)
        assert count_two_qubit_gates(circuit) + count_single_qubit_gates(circuit) == len(circuit.gates)


class TestSchedules:

    def test_proportional_iterations_sum(self):
        layout = GridLayout(3, 3)
        schedule = hierarchical_schedule(layout, [1, 1, 1], 300)
        assert schedule.total_iterations == 300
        its = [stage.iterations for stage in schedule.stages]
        assert its == sorted(its)

    def test_layer_count_mismatch(self):
        with pytest.raises(CircuitStructureError):
            hierarchical_schedule(GridLayout(2, 2), [1], 10)

    def test_budget_hierarchical(self):
        layout = GridLayout(6, 6)
        layers = layers_for_budget(layout, 300)
        assert layers == [2, 2, 2, 3, 2, 2]
        assert count_parameters(layout, hierarchical_schedule(layout, layers, 60)) == 300

    def test_budget_flat(self):
        layout = GridLayout(6, 6)
        layers = layers_for_budget(layout, 300, flat=True)
        assert layers == [6]
        assert count_parameters(layout, flat_schedule(layout, layers[0], 60)) == 264
        assert count_parameters(layout, flat_schedule(layout, layers[0] + 1, 60)) > 300

    @pytest.mark.parametrize("budget", [250, 300, 500, 1100])
    def test_budgets_never_overshoot(self, budget):
        layout = GridLayout(6, 6)
        hierarchical = layers_for_budget(layout, budget)
        flat = layers_for_budget(layout, budget, flat=True)
        assert count_parameters(layout, hierarchical_schedule(layout, hierarchical, 60)) <= budget
        assert count_parameters(layout, flat_schedule(layout, flat[0], 60)) <= budget

    @pytest.mark.parametrize("total", [5, 6, 7, 13, 100, 601])
    def test_proportional_iterations_exact(self, total):
        layout = GridLayout(5, 5)
        split = proportional_iterations(layout, [1, 2, 3, 4, 5], total)
        assert sum(split) == total
        assert min(split) >= 1

    def test_too_few_iterations_for_stages(self):
        with pytest.raises(ValueError):
            proportional_iterations(GridLayout(5, 5), [1, 2, 3, 4, 5], 3)
        with pytest.raises(ValueError):
            hierarchical_schedule(GridLayout(5, 5), [1] * 5, 4)

    def test_mnist_needs_ten_qubits(self):
        with pytest.raises(CircuitStructureError):
            mnist_schedule(GridLayout(4, 4), 100)

    def test_monotone_columns(self):
        with pytest.raises(ValueError):
            HierarchySchedule(stages=[StageSpec(columns=2), StageSpec(columns=2)])

    @pytest.mark.parametrize("columns", [[1, 3], [2, 3], [1, 2, 4]])
    def test_stages_add_one_column(self, columns):
        with pytest.raises(ValueError, match="column"):
            HierarchySchedule(stages=[StageSpec(columns=c) for c in columns])

    def test_single_stage_may_start_wide(self):
        assert HierarchySchedule(stages=[StageSpec(columns=4)]).stages[0].columns == 4


class TestCompileAndExport:

    def test_cnot_basis_preserves_state(self, rng):
        layout = GridLayout(2, 2)
        circuit = build_stage_circuit(layout, hierarchical_schedule(layout, [1, 2], 10), 1)
        params = rng.uniform(0, 2 * np.pi, circuit.num_params)
        compiled = compile_to_basis(circuit, "cnot")
        np.testing.assert_allclose(
            run_circuit(compiled, params).amplitudes, run_circuit(circuit, params).amplitudes, atol=1e-12
        )

    def test_rzz_basis_is_identity(self):
        layout = GridLayout(1, 1)
        circuit = build_stage_circuit(layout, flat_schedule(layout, 1, 5), 0)
        assert compile_to_basis(circuit, BasisEnum.RZZ_NATIVE) is circuit

    def test_unknown_basis(self):
        layout = GridLayout(1, 1)
        with pytest.raises(CircuitStructureError):
            compile_to_basis(build_stage_circuit(layout, flat_schedule(layout, 1, 5), 0), "cz")

    def test_qasm_layout(self, rng):
        layout = GridLayout(2, 2)
        circuit = build_stage_circuit(layout, hierarchical_schedule(layout, [1, 1], 10), 1)
        text = export_circuit(circuit, rng.normal(size=circuit.num_params), "qasm2")
        lines = text.splitlines()
        assert lines[0] == "OPENQASM 2.0;"
        assert lines[2] == "qreg q[4];"
        assert len(lines) == 3 + len(circuit.gates)
        assert any(line.startswith("rzz(") for line in lines)

    def test_json_reimport(self, rng):
        layout = GridLayout(2, 2)
        circuit = build_stage_circuit(layout, hierarchical_schedule(layout, [1, 1], 10), 1)
        params = rng.normal(size=circuit.num_params)
        restored, values = import_circuit(export_circuit(circuit, params, "json"))
        assert restored == circuit
        np.testing.assert_array_equal(values, params)

    def test_export_wrong_parameter_count(self):
        layout = GridLayout(1, 1)
        circuit = build_stage_circuit(layout, flat_schedule(layout, 1, 5), 0)
        with pytest.raises(ParameterCountError):
            export_circuit(circuit, [0.0], "qasm2")

    def test_unknown_format(self):
        layout = GridLayout(1, 1)
        circuit = build_stage_circuit(layout, flat_schedule(layout, 1, 5), 0)
        with pytest.raises(CircuitStructureError):
            export_circuit(circuit, np.zeros(circuit.num_params), "qasm3")
