import numpy as np
import pytest

from qwcp import (
    GATE_LIBRARY,
    GateRequest,
    PathSpec,
    ProtocolError,
    RegisterLayout,
    TreeSpec,
    compare,
    data_layout,
    fidelity,
    init_state,
    oracle_apply,
    purity_across_cut,
    run_schedule,
    schedule_ghz_path,
    schedule_linklevel,
    schedule_multi_control,
    schedule_multipath,
    schedule_remote_cu,
    schedule_tree,
    walker_vertex_support,
)
from qwcp.protocols import _ghz_prep_matrix
from qwcp.statevec import reduced_density

from conftest import random_qubit


def verify(compiled, graph, data_inits=None):
    """Run a compiled protocol and compare against its oracle."""
    state = init_state(graph, compiled.layout, compiled.walker_inits, data_inits)
    final, trace = run_schedule(state, compiled.schedule, graph)
    oracle_out = oracle_apply(
        init_state(graph, data_layout(graph), [], data_inits), compiled.oracle_gates
    )
    if trace.branches:
        reports = [compare(s, oracle_out) for _, s in trace.branches]
        report = min(reports, key=lambda r: r.data_fidelity)
    else:
        report = compare(final, oracle_out)
    return report, final, trace


# -- GateRequest ----------------------------------------------------------


def test_gate_request_validations(path3):
    with pytest.raises(ProtocolError):
        GateRequest.build(path3, [("A", "zz", 1)], [("B", "b")], GATE_LIBRARY["X"])
    with pytest.raises(ProtocolError):
        GateRequest.build(path3, [("A", "a", 2)], [("B", "b")], GATE_LIBRARY["X"])
    with pytest.raises(ProtocolError):
        GateRequest.build(path3, [("A", "a", 1)], [], GATE_LIBRARY["X"])
    with pytest.raises(ProtocolError):
        GateRequest.build(
            path3, [("A", "a", 1)], [("A", "a"), ("B", "b")], np.eye(4)
        )  # targets at two nodes
    with pytest.raises(ProtocolError):
        GateRequest.build(path3, [("A", "a", 1)], [("B", "b")], np.eye(4))


# -- remote controlled-U --------------------------------------------------


def cnot_instance(path3, separation="reverse"):
    lay = RegisterLayout.for_network(path3, 1)
    req = GateRequest.build(path3, [("A", "a", 1)], [("B", "b")], GATE_LIBRARY["X"])
    path = PathSpec.in_graph(path3, ["A", "u", "B"])
    return schedule_remote_cu(path3, lay, req, path, separation=separation)


def test_remote_cnot_reverse(path3):
    comp = cnot_instance(path3)
    rng = np.random.default_rng(1)
    for _ in range(5):
        di = {("A", "a"): random_qubit(rng), ("B", "b"): random_qubit(rng)}
        report, _, _ = verify(comp, path3, di)
        assert report.passed


def test_remote_cnot_walker_round_trip(path3):
    comp = cnot_instance(path3)
    _, final, trace = verify(comp, path3, {("A", "a"): random_qubit(np.random.default_rng(2))})
    assert trace.supports[-1][0] == {"A"}
    # reverse separation: total steps = 2*hops + 3
    assert len(comp.schedule.timesteps) == 2 * 2 + 3


def test_remote_cu_arbitrary_gate(path3):
    lay = RegisterLayout.for_network(path3, 1)
    rng = np.random.default_rng(7)
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    u, _ = np.linalg.qr(m)
    req = GateRequest.build(path3, [("A", "a", 1)], [("B", "b")], u)
    comp = schedule_remote_cu(
        path3, lay, req, PathSpec.in_graph(path3, ["A", "u", "B"])
    )
    report, _, _ = verify(comp, path3, {("A", "a"): random_qubit(rng), ("B", "b"): random_qubit(rng)})
    assert report.passed


def test_remote_cu_zero_control_pattern(path3):
    lay = RegisterLayout.for_network(path3, 1)
    req = GateRequest.build(path3, [("A", "a", 0)], [("B", "b")], GATE_LIBRARY["X"])
    comp = schedule_remote_cu(
        path3, lay, req, PathSpec.in_graph(path3, ["A", "u", "B"])
    )
    report, _, _ = verify(comp, path3, {("A", "a"): random_qubit(np.random.default_rng(3))})
    assert report.passed


def test_remote_cnot_measure_branches_agree(path3):
    comp = cnot_instance(path3, separation="measure")
    rng = np.random.default_rng(4)
    di = {("A", "a"): random_qubit(rng), ("B", "b"): random_qubit(rng)}
    state = init_state(path3, comp.layout, comp.walker_inits, di)
    final, trace = run_schedule(state, comp.schedule, path3)
    assert len(trace.branches) >= 2
    oracle_out = oracle_apply(
        init_state(path3, data_layout(path3), [], di), comp.oracle_gates
    )
    for record, branch in trace.branches:
        rep = compare(branch, oracle_out)
        assert rep.passed
    assert len(trace.classical_messages) == len(trace.branches)
    for msg in trace.classical_messages:
        assert msg["to"] == "B"
        assert msg["correction"] in (None, "Z")


def test_remote_cu_measure_sample_mode(path3):
    comp = cnot_instance(path3, separation="measure")
    di = {("A", "a"): (np.sqrt(0.3), np.sqrt(0.7))}
    state = init_state(path3, comp.layout, comp.walker_inits, di)
    rng = np.random.default_rng(11)
    final, trace = run_schedule(state, comp.schedule, path3, mode="sample", rng=rng)
    assert len(trace.records) == 1
    oracle_out = oracle_apply(
        init_state(path3, data_layout(path3), [], di), comp.oracle_gates
    )
    assert compare(final, oracle_out).passed


def test_remote_cu_measure_restrictions(path3):
    lay = RegisterLayout.for_network(path3, 1)
    path = PathSpec.in_graph(path3, ["A", "u", "B"])
    req0 = GateRequest.build(path3, [("A", "a", 0)], [("B", "b")], GATE_LIBRARY["X"])
    with pytest.raises(ProtocolError):
        schedule_remote_cu(path3, lay, req0, path, separation="measure")
    req = GateRequest.build(path3, [("A", "a", 1)], [("B", "b")], GATE_LIBRARY["X"])
    with pytest.raises(ProtocolError):
        schedule_remote_cu(path3, lay, req, path, separation="teleport")


def test_remote_cu_path_endpoint_checks(path3):
    lay = RegisterLayout.for_network(path3, 1)
    req = GateRequest.build(path3, [("A", "a", 1)], [("B", "b")], GATE_LIBRARY["X"])
    with pytest.raises(ProtocolError):
        schedule_remote_cu(
            path3, lay, req, PathSpec.in_graph(path3, ["B", "u", "A"])
        )
    with pytest.raises(ProtocolError):
        schedule_remote_cu(path3, lay, req, PathSpec.in_graph(path3, ["A"]))


def test_remote_cu_intermediate_gates(grid3):
    # extra gate fired at an interior node under the same control
    lay = RegisterLayout.for_network(grid3, 1)
    req = GateRequest.build(grid3, [("n00", "a", 1)], [("n12", "b")], GATE_LIBRARY["X"])
    path = PathSpec.in_graph(grid3, ["n00", "n01", "n02", "n12"])
    comp = schedule_remote_cu(
        grid3, lay, req, path,
        intermediate_gates={"n02": (["b"], GATE_LIBRARY["Z"])},
    )
    rng = np.random.default_rng(5)
    di = {
        ("n00", "a"): random_qubit(rng),
        ("n12", "b"): random_qubit(rng),
        ("n02", "b"): random_qubit(rng),
    }
    report, _, _ = verify(comp, grid3, di)
    assert report.passed
    assert len(comp.oracle_gates) == 2


# -- multi-control --------------------------------------------------------


def toffoli_net():
    from conftest import line_json
    from qwcp import load_network

    return load_network(
        line_json(["A0", "A1", "B"], {"A0": ["a"], "A1": ["b"], "B": ["c"]})
    )


def test_multi_control_toffoli_truth_table():
    g = toffoli_net()
    lay = RegisterLayout.for_network(g, 1)
    req = GateRequest.build(
        g, [("A0", "a", 1), ("A1", "b", 1)], [("B", "c")], GATE_LIBRARY["X"]
    )
    comp = schedule_multi_control(g, lay, req, PathSpec.in_graph(g, ["A0", "A1", "B"]))
    for bits in range(8):
        a, b, c = (bits >> 2) & 1, (bits >> 1) & 1, bits & 1
        di = {
            ("A0", "a"): (1 - a, a),
            ("A1", "b"): (1 - b, b),
            ("B", "c"): (1 - c, c),
        }
        report, final, _ = verify(comp, g, di)
        assert report.passed
        rho = reduced_density(final, comp.layout.data_bit_positions())
        expect = (a << 2) | (b << 1) | (c ^ (a & b))
        assert rho[expect, expect].real == pytest.approx(1.0)


def test_multi_control_mixed_pattern():
    g = toffoli_net()
    lay = RegisterLayout.for_network(g, 1)
    # fires when a=1 and b=0
    req = GateRequest.build(
        g, [("A0", "a", 1), ("A1", "b", 0)], [("B", "c")], GATE_LIBRARY["X"]
    )
    comp = schedule_multi_control(g, lay, req, PathSpec.in_graph(g, ["A0", "A1", "B"]))
    rng = np.random.default_rng(6)
    for _ in range(3):
        di = {
            ("A0", "a"): random_qubit(rng),
            ("A1", "b"): random_qubit(rng),
            ("B", "c"): random_qubit(rng),
        }
        report, _, _ = verify(comp, g, di)
        assert report.passed


def test_multi_control_rejects_controls_at_target():
    g = toffoli_net()
    lay = RegisterLayout.for_network(g, 1)
    req = GateRequest.build(
        g, [("A0", "a", 1), ("B", "c", 1)], [("B", "c")], GATE_LIBRARY["X"]
    )
    with pytest.raises(ProtocolError):
        schedule_multi_control(g, lay, req, PathSpec.in_graph(g, ["A0", "A1", "B"]))


def test_multi_control_requires_start_control():
    g = toffoli_net()
    lay = RegisterLayout.for_network(g, 1)
    req = GateRequest.build(g, [("A1", "b", 1)], [("B", "c")], GATE_LIBRARY["X"])
    with pytest.raises(ProtocolError):
        schedule_multi_control(g, lay, req, PathSpec.in_graph(g, ["A0", "A1", "B"]))


# -- multipath ------------------------------------------------------------


def test_multipath_two_gates(grid3):
    lay = RegisterLayout.for_network(grid3, 2)
    ctrl = [("n00", "a", 1)]
    r1 = GateRequest.build(grid3, ctrl, [("n02", "b")], GATE_LIBRARY["X"])
    r2 = GateRequest.build(grid3, ctrl, [("n20", "c")], GATE_LIBRARY["Z"])
    comp = schedule_multipath(
        grid3, lay, [r1, r2],
        [
            PathSpec.in_graph(grid3, ["n00", "n01", "n02"]),
            PathSpec.in_graph(grid3, ["n00", "n10", "n20"]),
        ],
    )
    rng = np.random.default_rng(8)
    di = {
        ("n00", "a"): random_qubit(rng),
        ("n02", "b"): random_qubit(rng),
        ("n20", "c"): random_qubit(rng),
    }
    report, _, _ = verify(comp, grid3, di)
    assert report.passed


def test_multipath_unequal_lengths(grid3):
    lay = RegisterLayout.for_network(grid3, 2)
    ctrl = [("n00", "a", 1)]
    r1 = GateRequest.build(grid3, ctrl, [("n12", "b")], GATE_LIBRARY["X"])
    r2 = GateRequest.build(grid3, ctrl, [("n20", "c")], GATE_LIBRARY["X"])
    comp = schedule_multipath(
        grid3, lay, [r1, r2],
        [
            PathSpec.in_graph(grid3, ["n00", "n01", "n02", "n12"]),
            PathSpec.in_graph(grid3, ["n00", "n10", "n20"]),
        ],
    )
    report, _, _ = verify(comp, grid3, {("n00", "a"): random_qubit(np.random.default_rng(9))})
    assert report.passed
    assert comp.meta["arrival"] == {"n12": 3, "n20": 2}


def test_multipath_rejects_shared_first_edge(grid3):
    lay = RegisterLayout.for_network(grid3, 2)
    ctrl = [("n00", "a", 1)]
    r1 = GateRequest.build(grid3, ctrl, [("n02", "b")], GATE_LIBRARY["X"])
    r2 = GateRequest.build(grid3, ctrl, [("n12", "b")], GATE_LIBRARY["X"])
    with pytest.raises(ProtocolError):
        schedule_multipath(
            grid3, lay, [r1, r2],
            [
                PathSpec.in_graph(grid3, ["n00", "n01", "n02"]),
                PathSpec.in_graph(grid3, ["n00", "n01", "n11", "n12"]),
            ],
        )


def test_multipath_rejects_mismatched_controls(grid3):
    lay = RegisterLayout.for_network(grid3, 2)
    r1 = GateRequest.build(grid3, [("n00", "a", 1)], [("n02", "b")], GATE_LIBRARY["X"])
    r2 = GateRequest.build(grid3, [("n00", "a", 0)], [("n20", "c")], GATE_LIBRARY["X"])
    with pytest.raises(ProtocolError):
        schedule_multipath(
            grid3, lay, [r1, r2],
            [
                PathSpec.in_graph(grid3, ["n00", "n01", "n02"]),
                PathSpec.in_graph(grid3, ["n00", "n10", "n20"]),
            ],
        )


# -- tree -----------------------------------------------------------------


def btree_spec(btree7):
    return TreeSpec.in_graph(
        btree7, "A",
        [("A", "b0"), ("A", "b1"), ("b0", "c00"), ("b0", "c01"),
         ("b1", "c10"), ("b1", "c11")],
    )


def test_tree_four_leaf_targets(btree7):
    lay = RegisterLayout.for_network(btree7, 4)
    tree = btree_spec(btree7)
    targets = {
        leaf: (["t"], GATE_LIBRARY["X"]) for leaf in ("c00", "c01", "c10", "c11")
    }
    comp = schedule_tree(btree7, lay, tree, [("A", "a", 1)], targets)
    rng = np.random.default_rng(10)
    di = {("A", "a"): random_qubit(rng)}
    report, _, trace = verify(comp, btree7, di)
    assert report.passed
    assert comp.meta["walker_of"]["c00"] == 0
    assert len(set(comp.meta["walker_of"][leaf] for leaf in targets)) == 4


def test_tree_walker_budget_enforced(btree7):
    lay = RegisterLayout.for_network(btree7, 2)
    with pytest.raises(ProtocolError):
        schedule_tree(
            btree7, lay, btree_spec(btree7), [("A", "a", 1)],
            {"c00": (["t"], GATE_LIBRARY["X"])},
        )


def test_tree_rejects_target_at_root(btree7):
    lay = RegisterLayout.for_network(btree7, 4)
    with pytest.raises(ProtocolError):
        schedule_tree(
            btree7, lay, btree_spec(btree7), [("A", "a", 1)],
            {"A": (["a"], GATE_LIBRARY["X"])},
        )


def test_tree_interior_target(btree7):
    # target at an interior node fires when that node's walker passes it
    lay = RegisterLayout.for_network(btree7, 4)
    tree = btree_spec(btree7)
    comp = schedule_tree(
        btree7, lay, tree, [("A", "a", 1)], {"c11": (["t"], GATE_LIBRARY["H"])}
    )
    report, _, _ = verify(comp, btree7, {("A", "a"): random_qubit(np.random.default_rng(12))})
    assert report.passed


# -- GHZ ------------------------------------------------------------------


def test_ghz_prep_matrix_builds_ghz():
    for m in (1, 2, 3):
        mat = _ghz_prep_matrix(m)
        assert np.abs(mat.conj().T @ mat - np.eye(1 << m)).max() < 1e-12
        out = mat[:, 0]
        expect = np.zeros(1 << m, dtype=complex)
        expect[0] = expect[-1] = 1 / np.sqrt(2)
        assert np.allclose(out, expect)


def test_ghz_four_node_path(path4):
    lay = RegisterLayout.for_network(path4, 1)
    p = PathSpec.in_graph(path4, ["A", "B", "C", "D"])
    comp = schedule_ghz_path(path4, lay, [p], [{v: ["g"] for v in "ABCD"}])
    report, final, _ = verify(comp, path4)
    assert report.passed
    rho = reduced_density(final, lay.data_bit_positions())
    ghz = np.zeros(16, dtype=complex)
    ghz[0] = ghz[15] = 1 / np.sqrt(2)
    assert float(np.vdot(ghz, rho @ ghz).real) >= 1 - 1e-9
    assert comp.meta["propagation_steps"] == 3


def test_ghz_multiple_qubits_per_node(path4):
    from conftest import line_json
    from qwcp import load_network

    g = load_network(
        line_json(["A", "B"], {"A": ["g", "h"], "B": ["g"]})
    )
    lay = RegisterLayout.for_network(g, 1)
    comp = schedule_ghz_path(
        g, lay, [PathSpec.in_graph(g, ["A", "B"])],
        [{"A": ["g", "h"], "B": ["g"]}],
    )
    report, final, _ = verify(comp, g)
    assert report.passed
    rho = reduced_density(final, lay.data_bit_positions())
    ghz = np.zeros(8, dtype=complex)
    ghz[0] = ghz[7] = 1 / np.sqrt(2)
    assert float(np.vdot(ghz, rho @ ghz).real) >= 1 - 1e-9


def test_ghz_rejects_overlapping_qubits(path4):
    lay = RegisterLayout.for_network(path4, 2)
    p1 = PathSpec.in_graph(path4, ["A", "B"])
    p2 = PathSpec.in_graph(path4, ["C", "B"])
    with pytest.raises(ProtocolError):
        schedule_ghz_path(
            path4, lay, [p1, p2],
            [{"A": ["g"], "B": ["g"]}, {"C": ["g"], "B": ["g"]}],
        )


def test_ghz_two_disjoint_paths(path4):
    lay = RegisterLayout.for_network(path4, 2)
    p1 = PathSpec.in_graph(path4, ["A", "B"])
    p2 = PathSpec.in_graph(path4, ["D", "C"])
    comp = schedule_ghz_path(
        path4, lay, [p1, p2],
        [{"A": ["g"], "B": ["g"]}, {"D": ["g"], "C": ["g"]}],
    )
    report, final, _ = verify(comp, path4)
    assert report.passed
    # two separate Bell pairs
    bell = np.zeros(4, dtype=complex)
    bell[0] = bell[3] = 1 / np.sqrt(2)
    for pair in ((("A", "g"), ("B", "g")), (("D", "g"), ("C", "g"))):
        bits = tuple(lay.data_bit(n, q) for n, q in pair)
        rho = reduced_density(final, bits)
        assert float(np.vdot(bell, rho @ bell).real) >= 1 - 1e-9


# -- link-level -----------------------------------------------------------


def test_linklevel_uncoupled_single_shift(triangle):
    lay = RegisterLayout.for_network(triangle, 3)
    comp = schedule_linklevel(triangle, lay)
    assert len(comp.schedule.timesteps) == 1
    assert comp.schedule.timesteps[0].shift.params["mode"] == "flipflop"
    state = init_state(triangle, lay, comp.walker_inits)
    final, _ = run_schedule(state, comp.schedule, triangle)
    # each walker is spread across its own edge, in a pure single-walker state
    for w, (u, v) in enumerate(comp.meta["edges"]):
        sup = walker_vertex_support(final, w)
        assert sup == {triangle.vertex_id(u), triangle.vertex_id(v)}
        bits = lay.vertex_bit_positions(w) + lay.coin_bit_positions(w)
        assert purity_across_cut(final, bits) == pytest.approx(1.0)


def test_linklevel_coupled_bell_pairs(triangle):
    lay = RegisterLayout.for_network(triangle, 3)
    couple = {
        ("A", "B"): ("p", "p"),
        ("A", "C"): ("q", "q"),
        ("B", "C"): ("q", "p"),
    }
    comp = schedule_linklevel(triangle, lay, couple)
    report, final, _ = verify(comp, triangle)
    assert report.passed
    bell = np.zeros(4, dtype=complex)
    bell[0] = bell[3] = 1 / np.sqrt(2)
    for (u, v), (qu, qv) in couple.items():
        bits = (lay.data_bit(u, qu), lay.data_bit(v, qv))
        rho = reduced_density(final, bits)
        assert float(np.vdot(bell, rho @ bell).real) >= 1 - 1e-9


def test_linklevel_walker_budget(triangle):
    lay = RegisterLayout.for_network(triangle, 2)
    with pytest.raises(ProtocolError):
        schedule_linklevel(triangle, lay)


def test_linklevel_rejects_noncoupling_edge(triangle):
    lay = RegisterLayout.for_network(triangle, 3)
    with pytest.raises(ProtocolError):
        schedule_linklevel(triangle, lay, {("A", "Z"): ("p", "p")})


# -- locality -------------------------------------------------------------


def test_supports_expand_only_to_neighbors(grid3):
    lay = RegisterLayout.for_network(grid3, 1)
    req = GateRequest.build(grid3, [("n00", "a", 1)], [("n12", "b")], GATE_LIBRARY["X"])
    comp = schedule_remote_cu(
        grid3, lay, req, PathSpec.in_graph(grid3, ["n00", "n01", "n02", "n12"])
    )
    di = {("n00", "a"): (1 / np.sqrt(2), 1 / np.sqrt(2))}
    state = init_state(grid3, lay, comp.walker_inits, di)
    _, trace = run_schedule(state, comp.schedule, grid3)
    prev = trace.initial_support
    for sup in trace.supports:
        for w, labels in sup.items():
            closed = set()
            for v in prev[w]:
                closed.add(v)
                closed.update(grid3.neighbors(v))
            assert labels <= closed
        prev = sup
