"""Constructors for every walk-control unitary, plus schedules.

Each constructor validates its inputs against the graph and lowers the
operator to register permutations and controlled blocks that the state
engine applies directly. Specs carry JSON-able parameters so schedules
round-trip through serialization bit-exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netgraph import NetworkError, NetworkGraph
from .statevec import BlockAction, PermAction, RegisterLayout

UNITARY_TOL = 1e-12


class OperatorError(ValueError):
    """Invalid operator construction."""


@dataclass(frozen=True)
class OperatorSpec:
    """Tagged description of one unitary step (or terminal instrument).

    kinds: shift, coinperm, coinblock, datactrl, coindata, interact,
    fanout (composite), measure (instrument, terminal only).
    """

    kind: str
    params: dict
    layout: RegisterLayout
    actions: tuple = field(default=(), repr=False, compare=False)
    children: tuple = ()

    def iter_actions(self):
        if self.children:
            for child in self.children:
                yield from child.iter_actions()
        else:
            yield from self.actions

    @property
    def is_data_unitary(self) -> bool:
        """True for pure data-plane operations excluded from walk reversal."""
        return self.kind == "coindata"

    @property
    def is_permutation(self) -> bool:
        if self.kind in ("shift", "coinperm"):
            return True
        if self.kind == "fanout":
            return all(c.is_permutation for c in self.children)
        if self.kind in ("datactrl", "interact"):
            return bool(self.params.get("permutation"))
        return False


@dataclass
class Timestep:
    pre_ops: list
    shift: OperatorSpec


@dataclass
class Schedule:
    """Time-ordered operator list: per timestep, coins/interactions then
    exactly one shift; an optional measurement may only appear at the end."""

    timesteps: list
    measure: OperatorSpec | None = None


# -- helpers --------------------------------------------------------------


def _check_unitary(matrix: np.ndarray, what: str) -> None:
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise OperatorError(f"{what} must be a square matrix")
    eye = np.eye(matrix.shape[0])
    if np.abs(matrix.conj().T @ matrix - eye).max() > UNITARY_TOL:
        raise OperatorError(f"{what} is not unitary")


def _check_coin(graph: NetworkGraph, v: str, c: int) -> None:
    if not 0 <= c < graph.port_count(v):
        raise OperatorError(f"coin {c} invalid at node {v!r}")


def _embed_coin_matrix(layout: RegisterLayout, coins, matrix) -> np.ndarray:
    """Place a small coin-space unitary inside the 2^nc coin register."""
    coins = list(coins)
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (len(coins), len(coins)):
        raise OperatorError("coin matrix size does not match coin list")
    if len(set(coins)) != len(coins):
        raise OperatorError("repeated coin index in block")
    dim = 1 << layout.nc
    if any(not 0 <= c < dim for c in coins):
        raise OperatorError("coin index outside coin register")
    full = np.eye(dim, dtype=complex)
    full[np.ix_(coins, coins)] = matrix
    return full


def _swap_matrix(layout: RegisterLayout, c1: int, c2: int) -> np.ndarray:
    dim = 1 << layout.nc
    full = np.eye(dim, dtype=complex)
    if c1 != c2:
        full[[c1, c2]] = full[[c2, c1]]
    return full


def _matrix_to_json(matrix: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(matrix, dtype=complex)]


def _matrix_from_json(data) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data])


def _resolve_coin_action(layout, graph, v, coin_action):
    """Accepts ('swap', c1, c2) or ('block', coins, matrix); returns
    (json_params, embedded_matrix, is_permutation)."""
    tag = coin_action[0]
    if tag == "swap":
        _, c1, c2 = coin_action
        _check_coin(graph, v, c1)
        _check_coin(graph, v, c2)
        return {"action": ["swap", c1, c2]}, _swap_matrix(layout, c1, c2), True
    if tag == "block":
        _, coins, matrix = coin_action
        for c in coins:
            _check_coin(graph, v, c)
        _check_unitary(matrix, "coin block")
        embedded = _embed_coin_matrix(layout, coins, matrix)
        return (
            {"action": ["block", list(coins), _matrix_to_json(matrix)]},
            embedded,
            False,
        )
    raise OperatorError(f"unknown coin action {tag!r}")


# -- constructors ---------------------------------------------------------


def make_flipflop_shift(graph, layout, walkers=None) -> OperatorSpec:
    """Edge-reversing shift |v, c_vu> -> |u, c_uv| on the listed walkers.

    Self-loops are fixed points; codes that are not edges of the graph
    are left alone, so the permutation is total on the register."""
    walkers = sorted(range(layout.k)) if walkers is None else sorted(set(walkers))
    for j in walkers:
        layout._check_walker(j)
    reg = 1 << layout.walker_bits
    perm = list(range(reg))
    for v in graph.nodes:
        vid = graph.vertex_id(v)
        for c in range(graph.port_count(v)):
            u = graph.neighbor_of_port(v, c)
            c_back = graph.port_of(u, v)
            perm[(vid << layout.nc) | c] = (graph.vertex_id(u) << layout.nc) | c_back
    if sorted(perm) != list(range(reg)):
        raise OperatorError("flip-flop map is not a bijection; bad port tables")
    perm = tuple(perm)
    return OperatorSpec(
        kind="shift",
        params={"mode": "flipflop", "walkers": list(walkers)},
        layout=layout,
        actions=tuple(PermAction(j, perm) for j in walkers),
    )


def make_identity_shift(layout) -> OperatorSpec:
    return OperatorSpec("shift", {"mode": "identity", "walkers": []}, layout)


def make_coin_perm(graph, layout, v, c1, c2, walker) -> OperatorSpec:
    """Swap coin values c1 and c2 at vertex v only, for one walker."""
    graph.vertex_id(v)
    _check_coin(graph, v, c1)
    _check_coin(graph, v, c2)
    layout._check_walker(walker)
    vid = graph.vertex_id(v)
    reg = 1 << layout.walker_bits
    perm = list(range(reg))
    a, b = (vid << layout.nc) | c1, (vid << layout.nc) | c2
    perm[a], perm[b] = perm[b], perm[a]
    return OperatorSpec(
        kind="coinperm",
        params={"node": v, "c1": c1, "c2": c2, "walker": walker},
        layout=layout,
        actions=(PermAction(walker, tuple(perm)),),
    )


def make_coin_block(graph, layout, assignments, walker) -> OperatorSpec:
    """Block-diagonal coin: per assigned vertex, a unitary on listed coins.

    assignments: {node: (coins, matrix)}; unassigned vertices act as
    identity."""
    layout._check_walker(walker)
    actions = []
    json_assign = {}
    for v, (coins, matrix) in assignments.items():
        vid = graph.vertex_id(v)
        for c in coins:
            _check_coin(graph, v, c)
        _check_unitary(matrix, f"coin block at {v!r}")
        embedded = _embed_coin_matrix(layout, coins, matrix)
        actions.append(
            BlockAction(
                target_bits=layout.coin_bit_positions(walker),
                matrix=embedded,
                conditions=((layout.vertex_bit_positions(walker), vid),),
            )
        )
        json_assign[v] = [list(coins), _matrix_to_json(matrix)]
    return OperatorSpec(
        kind="coinblock",
        params={"assignments": json_assign, "walker": walker},
        layout=layout,
        actions=tuple(actions),
    )


def make_data_controlled_coin(graph, layout, v, controls, s, coin_action, walker) -> OperatorSpec:
    """Coin action at vertex v applied iff the control qubits (all local
    to v) are in computational pattern s."""
    vid = graph.vertex_id(v)
    layout._check_walker(walker)
    controls = list(controls)
    if len(s) != len(controls) or any(ch not in "01" for ch in s):
        raise OperatorError("control pattern must be a bit string matching controls")
    if not controls:
        raise OperatorError("at least one control qubit required")
    local = graph.qubits_at(v)
    for name in controls:
        if name not in local:
            raise OperatorError(f"control qubit {name!r} is not at node {v!r}")
    action_json, matrix, is_perm = _resolve_coin_action(layout, graph, v, coin_action)
    conditions = [(layout.vertex_bit_positions(walker), vid)]
    for name, bit in zip(controls, s):
        conditions.append(((layout.data_bit(v, name),), int(bit)))
    return OperatorSpec(
        kind="datactrl",
        params={
            "node": v,
            "controls": controls,
            "s": s,
            "walker": walker,
            "permutation": is_perm,
            **action_json,
        },
        layout=layout,
        actions=(
            BlockAction(
                target_bits=layout.coin_bit_positions(walker),
                matrix=matrix,
                conditions=tuple(conditions),
            ),
        ),
    )


def make_coin_controlled_data(
    graph, layout, v, qubits, matrix, walker, coin=None, coin_block=None
) -> OperatorSpec:
    """Unitary on v's data qubits where the walker sits at vertex v.

    coin: optionally restrict to one coin value; coin_block: optional
    simultaneous coin-space unitary (coins, matrix) applied under the
    same vertex condition."""
    vid = graph.vertex_id(v)
    layout._check_walker(walker)
    qubits = list(qubits)
    if not qubits or len(set(qubits)) != len(qubits):
        raise OperatorError("data target list must be nonempty and distinct")
    local = graph.qubits_at(v)
    for name in qubits:
        if name not in local:
            raise OperatorError(f"data qubit {name!r} is not at node {v!r}")
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (1 << len(qubits),) * 2:
        raise OperatorError("data unitary size does not match qubit count")
    _check_unitary(matrix, f"data unitary at {v!r}")
    conditions = [(layout.vertex_bit_positions(walker), vid)]
    if coin is not None:
        _check_coin(graph, v, coin)
        conditions.append((layout.coin_bit_positions(walker), coin))
    actions = [
        BlockAction(
            target_bits=tuple(layout.data_bit(v, name) for name in qubits),
            matrix=matrix,
            conditions=tuple(conditions),
        )
    ]
    params = {
        "node": v,
        "qubits": qubits,
        "matrix": _matrix_to_json(matrix),
        "walker": walker,
        "coin": coin,
    }
    if coin_block is not None:
        coins, cmat = coin_block
        for c in coins:
            _check_coin(graph, v, c)
        _check_unitary(cmat, "simultaneous coin block")
        actions.append(
            BlockAction(
                target_bits=layout.coin_bit_positions(walker),
                matrix=_embed_coin_matrix(layout, coins, cmat),
                conditions=((layout.vertex_bit_positions(walker), vid),),
            )
        )
        params["coin_block"] = [list(coins), _matrix_to_json(cmat)]
    return OperatorSpec("coindata", params, layout, actions=tuple(actions))


def make_walk_interaction(
    graph, layout, v, coin, coin_action, control_walker, target_walker
) -> OperatorSpec:
    """Coin unitary on the target walker, applied iff the control walker
    is at (v, coin) and the target walker is at vertex v."""
    if control_walker == target_walker:
        raise OperatorError("interaction needs two distinct walkers")
    vid = graph.vertex_id(v)
    layout._check_walker(control_walker)
    layout._check_walker(target_walker)
    _check_coin(graph, v, coin)
    action_json, matrix, is_perm = _resolve_coin_action(layout, graph, v, coin_action)
    conditions = (
        (layout.vertex_bit_positions(control_walker), vid),
        (layout.coin_bit_positions(control_walker), coin),
        (layout.vertex_bit_positions(target_walker), vid),
    )
    return OperatorSpec(
        kind="interact",
        params={
            "node": v,
            "coin": coin,
            "control": control_walker,
            "target": target_walker,
            "permutation": is_perm,
            **action_json,
        },
        layout=layout,
        actions=(
            BlockAction(
                target_bits=layout.coin_bit_positions(target_walker),
                matrix=matrix,
                conditions=conditions,
            ),
        ),
    )


def make_fanout(graph, layout, v, coin, successors, walkers) -> OperatorSpec:
    """Composed control fan-out: one interaction per helper walker, then a
    coin relabel sending the incoming walker toward the first successor.

    Helper walkers must have been initialized at |v, self-loop>."""
    successors = list(successors)
    walkers = list(walkers)
    if len(successors) != len(walkers) or not successors:
        raise OperatorError("one walker per successor required")
    if len(set(successors)) != len(successors):
        raise OperatorError("duplicate successor in fan-out")
    if len(set(walkers)) != len(walkers):
        raise OperatorError("duplicate walker in fan-out")
    _check_coin(graph, v, coin)
    for u in successors:
        if u not in graph.neighbors(v):
            raise OperatorError(f"fan-out successor {u!r} is not adjacent to {v!r}")
    lead = walkers[0]
    children = []
    for u, w in zip(successors[1:], walkers[1:]):
        children.append(
            make_walk_interaction(
                graph, layout, v, coin, ("swap", 0, graph.port_of(v, u)), lead, w
            )
        )
    first_port = graph.port_of(v, successors[0])
    if first_port != coin:
        children.append(make_coin_perm(graph, layout, v, coin, first_port, lead))
    return OperatorSpec(
        kind="fanout",
        params={
            "node": v,
            "coin": coin,
            "successors": successors,
            "walkers": walkers,
        },
        layout=layout,
        children=tuple(children),
    )


def make_measure_and_correct(
    layout, qubits, bases, parity_positions, correct_bit, allowed_vertices, walker=0
) -> OperatorSpec:
    """Terminal instrument: measure walker bits, then conditionally apply
    Z on the correction qubit when the X outcomes have odd parity."""
    qubits = list(qubits)
    if len(qubits) != len(bases):
        raise OperatorError("one basis per measured qubit required")
    return OperatorSpec(
        kind="measure",
        params={
            "qubits": qubits,
            "bases": bases,
            "parity_positions": list(parity_positions),
            "correct_bit": correct_bit,
            "allowed_vertices": list(allowed_vertices),
            "walker": walker,
        },
        layout=layout,
    )


# -- inversion ------------------------------------------------------------


def invert_operator(op: OperatorSpec) -> OperatorSpec:
    if op.kind == "measure":
        raise OperatorError("a measurement has no inverse")
    if op.kind == "fanout":
        return OperatorSpec(
            kind="fanout",
            params={**op.params, "inverted": not op.params.get("inverted", False)},
            layout=op.layout,
            children=tuple(invert_operator(c) for c in reversed(op.children)),
        )
    inverted_actions = []
    for act in op.actions:
        if isinstance(act, PermAction):
            inverted_actions.append(
                PermAction(act.walker, tuple(np.argsort(np.asarray(act.perm))))
            )
        else:
            inverted_actions.append(
                BlockAction(act.target_bits, act.matrix.conj().T, act.conditions)
            )
    inverted_actions.reverse()
    self_inverse = all(
        isinstance(a, PermAction)
        and tuple(np.argsort(np.asarray(a.perm))) == tuple(a.perm)
        or isinstance(a, BlockAction)
        and np.abs(a.matrix - a.matrix.conj().T).max() <= UNITARY_TOL
        for a in op.actions
    ) and len(op.actions) <= 1
    params = op.params if self_inverse else {**op.params, "inverted": not op.params.get("inverted", False)}
    return OperatorSpec(op.kind, params, op.layout, actions=tuple(inverted_actions))


def invert_schedule(sched: Schedule) -> Schedule:
    """Reverse a measurement-free schedule, inverting every operator.

    The result is regrouped so each timestep still carries exactly one
    shift; its first timestep has no pre-shift operators and its last
    shift is the identity."""
    if sched.measure is not None:
        raise OperatorError("cannot invert a schedule containing a measurement")
    if not sched.timesteps:
        return Schedule([])
    layout = sched.timesteps[0].shift.layout
    inv_pre = [
        [invert_operator(op) for op in reversed(ts.pre_ops)] for ts in sched.timesteps
    ]
    inv_shift = [invert_operator(ts.shift) for ts in sched.timesteps]
    steps = [Timestep([], inv_shift[-1])]
    for i in range(len(sched.timesteps) - 1, 0, -1):
        steps.append(Timestep(inv_pre[i], inv_shift[i - 1]))
    steps.append(Timestep(inv_pre[0], make_identity_shift(layout)))
    return Schedule(steps)


# -- serialization --------------------------------------------------------


def operator_to_json(op: OperatorSpec) -> dict:
    return {"kind": op.kind, **op.params}


def operator_from_json(graph, layout, data: dict) -> OperatorSpec:
    data = dict(data)
    kind = data.pop("kind")
    inverted = data.pop("inverted", False)
    if kind == "shift":
        if data["mode"] == "identity":
            op = make_identity_shift(layout)
        else:
            op = make_flipflop_shift(graph, layout, data["walkers"])
    elif kind == "coinperm":
        op = make_coin_perm(
            graph, layout, data["node"], data["c1"], data["c2"], data["walker"]
        )
    elif kind == "coinblock":
        assignments = {
            v: (coins, _matrix_from_json(mat))
            for v, (coins, mat) in data["assignments"].items()
        }
        op = make_coin_block(graph, layout, assignments, data["walker"])
    elif kind == "datactrl":
        op = make_data_controlled_coin(
            graph,
            layout,
            data["node"],
            data["controls"],
            data["s"],
            _coin_action_from_json(data["action"]),
            data["walker"],
        )
    elif kind == "coindata":
        coin_block = data.get("coin_block")
        if coin_block is not None:
            coin_block = (coin_block[0], _matrix_from_json(coin_block[1]))
        op = make_coin_controlled_data(
            graph,
            layout,
            data["node"],
            data["qubits"],
            _matrix_from_json(data["matrix"]),
            data["walker"],
            coin=data.get("coin"),
            coin_block=coin_block,
        )
    elif kind == "interact":
        op = make_walk_interaction(
            graph,
            layout,
            data["node"],
            data["coin"],
            _coin_action_from_json(data["action"]),
            data["control"],
            data["target"],
        )
    elif kind == "fanout":
        op = make_fanout(
            graph, layout, data["node"], data["coin"], data["successors"], data["walkers"]
        )
    elif kind == "measure":
        op = make_measure_and_correct(
            layout,
            data["qubits"],
            data["bases"],
            data["parity_positions"],
            data["correct_bit"],
            data["allowed_vertices"],
            data["walker"],
        )
    else:
        raise OperatorError(f"unknown operator kind {kind!r}")
    return invert_operator(op) if inverted else op


def _coin_action_from_json(action):
    if action[0] == "swap":
        return ("swap", action[1], action[2])
    return ("block", action[1], _matrix_from_json(action[2]))


def schedule_to_json(sched: Schedule) -> dict:
    return {
        "timesteps": [
            {
                "ops": [operator_to_json(op) for op in ts.pre_ops],
                "shift": operator_to_json(ts.shift),
            }
            for ts in sched.timesteps
        ],
        "measure": operator_to_json(sched.measure) if sched.measure else None,
    }


def schedule_from_json(graph, layout, data: dict) -> Schedule:
    timesteps = [
        Timestep(
            [operator_from_json(graph, layout, op) for op in ts["ops"]],
            operator_from_json(graph, layout, ts["shift"]),
        )
        for ts in data["timesteps"]
    ]
    measure = (
        operator_from_json(graph, layout, data["measure"]) if data.get("measure") else None
    )
    return Schedule(timesteps, measure)
