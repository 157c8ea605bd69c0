"""Joint state of k walker registers and the data plane.

Amplitudes are a dense complex array over 2^total_bits basis states.
Bit order, most significant first: walker 0 vertex bits, walker 0 coin
bits, walker 1 vertex bits, ... , then data qubits in layout order.
Operators are never materialized as full matrices; they act through
register permutations and small controlled blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .netgraph import NetworkGraph

NORM_TOL = 1e-10
SUPPORT_TOL = 1e-9
DUMP_TOL = 1e-12
MAX_TOTAL_BITS = 26

SQRT1_2 = 1.0 / math.sqrt(2.0)
HADAMARD = np.array([[SQRT1_2, SQRT1_2], [SQRT1_2, -SQRT1_2]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


class StateError(ValueError):
    """Invalid state construction or operator/state mismatch."""


@dataclass(frozen=True)
class RegisterLayout:
    """Bit layout for k walker registers plus named data qubits."""

    nv: int
    nc: int
    k: int
    data_order: tuple[tuple[str, str], ...]

    @classmethod
    def for_network(cls, graph: NetworkGraph, k: int) -> "RegisterLayout":
        data_order = tuple(
            (v, name) for v in graph.nodes for name in graph.qubits_at(v)
        )
        layout = cls(graph.vertex_bits(), graph.coin_bits(), k, data_order)
        if layout.total_bits > MAX_TOTAL_BITS:
            raise StateError(
                f"layout needs {layout.total_bits} bits, cap is {MAX_TOTAL_BITS}"
            )
        return layout

    @property
    def walker_bits(self) -> int:
        return self.nv + self.nc

    @property
    def data_bits(self) -> int:
        return len(self.data_order)

    @property
    def total_bits(self) -> int:
        return self.k * self.walker_bits + self.data_bits

    def vertex_bit_positions(self, walker: int) -> tuple[int, ...]:
        self._check_walker(walker)
        base = walker * self.walker_bits
        return tuple(range(base, base + self.nv))

    def coin_bit_positions(self, walker: int) -> tuple[int, ...]:
        self._check_walker(walker)
        base = walker * self.walker_bits + self.nv
        return tuple(range(base, base + self.nc))

    def data_bit(self, node: str, name: str) -> int:
        try:
            pos = self.data_order.index((node, name))
        except ValueError:
            raise StateError(f"no data qubit {name!r} at node {node!r}") from None
        return self.k * self.walker_bits + pos

    def data_bit_positions(self) -> tuple[int, ...]:
        base = self.k * self.walker_bits
        return tuple(range(base, base + self.data_bits))

    def walker_bit_positions(self) -> tuple[int, ...]:
        return tuple(range(self.k * self.walker_bits))

    def _check_walker(self, walker: int) -> None:
        if not 0 <= walker < self.k:
            raise StateError(f"walker {walker} outside 0..{self.k - 1}")


@dataclass(frozen=True)
class StateVector:
    layout: RegisterLayout
    amplitudes: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class MeasurementRecord:
    qubits: tuple[int, ...]
    bases: str
    outcome: tuple[int, ...]
    probability: float


# -- primitive actions ----------------------------------------------------
#
# OperatorSpec constructors lower every unitary to a sequence of these two
# shapes, which is all the engine knows how to apply.


@dataclass(frozen=True)
class PermAction:
    """Permutation of one walker's combined vertex+coin register."""

    walker: int
    perm: tuple[int, ...]  # old register index -> new register index


@dataclass(frozen=True)
class BlockAction:
    """Small unitary on target bits, gated on fixed values of other bits."""

    target_bits: tuple[int, ...]
    matrix: np.ndarray
    conditions: tuple[tuple[tuple[int, ...], int], ...] = ()


def _apply_perm(amps: np.ndarray, layout: RegisterLayout, act: PermAction) -> np.ndarray:
    reg = 1 << layout.walker_bits
    pre = 1 << (act.walker * layout.walker_bits)
    arr = amps.reshape(pre, reg, -1)
    inverse = np.argsort(np.asarray(act.perm))
    return np.take(arr, inverse, axis=1).reshape(-1)


def _apply_block(amps: np.ndarray, layout: RegisterLayout, act: BlockAction) -> np.ndarray:
    n = layout.total_bits
    out = amps.copy().reshape((2,) * n)
    index: list[object] = [slice(None)] * n
    for bits, value in act.conditions:
        for offset, pos in enumerate(bits):
            bit = (value >> (len(bits) - 1 - offset)) & 1
            if isinstance(index[pos], int) and index[pos] != bit:
                return amps  # contradictory conditions select nothing
            index[pos] = bit
    for pos in act.target_bits:
        if isinstance(index[pos], int):
            raise StateError("operator targets one of its own control bits")
    sub = out[tuple(index)]
    free = [p for p in range(n) if isinstance(index[p], slice)]
    axes = [free.index(p) for p in act.target_bits]
    t = len(axes)
    moved = np.moveaxis(sub, axes, range(t))
    shape = moved.shape
    res = act.matrix @ moved.reshape(1 << t, -1)
    out[tuple(index)] = np.moveaxis(res.reshape(shape), range(t), axes)
    return out.reshape(-1)


def apply_actions(state: StateVector, actions) -> StateVector:
    amps = state.amplitudes
    for act in actions:
        if isinstance(act, PermAction):
            amps = _apply_perm(amps, state.layout, act)
        elif isinstance(act, BlockAction):
            amps = _apply_block(amps, state.layout, act)
        else:
            raise StateError(f"unknown action {act!r}")
    return StateVector(state.layout, amps)


def apply_operator(state: StateVector, op) -> StateVector:
    """Apply one OperatorSpec; checks layout identity and norm drift."""
    if op.layout != state.layout:
        raise StateError("operator built for a different layout")
    result = apply_actions(state, op.iter_actions())
    if abs(result.norm - 1.0) > NORM_TOL:
        raise StateError(f"norm drifted to {result.norm!r}")
    return result


# -- construction ---------------------------------------------------------


def init_state(
    graph: NetworkGraph,
    layout: RegisterLayout,
    walker_inits,
    data_inits=None,
) -> StateVector:
    """Product state of walker basis positions and single-qubit data states.

    walker_inits: one (node_label, coin) pair per walker.
    data_inits: optional {(node, name): length-2 amplitude pair}; qubits
    not listed start in |0>.
    """
    if layout.total_bits > MAX_TOTAL_BITS:
        raise StateError(f"layout exceeds {MAX_TOTAL_BITS}-bit cap")
    walker_inits = list(walker_inits)
    if len(walker_inits) != layout.k:
        raise StateError(f"expected {layout.k} walker inits, got {len(walker_inits)}")
    widx = 0
    for node, coin in walker_inits:
        vid = graph.vertex_id(node)
        if not 0 <= coin < graph.port_count(node):
            raise StateError(f"coin {coin} invalid at node {node!r}")
        widx = (widx << layout.walker_bits) | (vid << layout.nc) | coin

    data_vec = np.ones(1, dtype=complex)
    inits = dict(data_inits or {})
    for key in inits:
        if tuple(key) not in layout.data_order:
            raise StateError(f"data init references unknown qubit {key!r}")
    for node, name in layout.data_order:
        q = np.asarray(inits.get((node, name), (1.0, 0.0)), dtype=complex)
        if q.shape != (2,):
            raise StateError(f"data state for {(node, name)!r} must have 2 amplitudes")
        if abs(np.linalg.norm(q) - 1.0) > NORM_TOL:
            raise StateError(f"data state for {(node, name)!r} is not normalized")
        data_vec = np.kron(data_vec, q)

    amps = np.zeros(1 << layout.total_bits, dtype=complex)
    nd = layout.data_bits
    amps[widx << nd : (widx + 1) << nd] = data_vec
    return StateVector(layout, amps)


# -- measurement ----------------------------------------------------------


def _rotate_basis(amps: np.ndarray, layout: RegisterLayout, qubits, bases) -> np.ndarray:
    for pos, basis in zip(qubits, bases):
        if basis == "X":
            amps = _apply_block(amps, layout, BlockAction((pos,), HADAMARD))
        elif basis != "Z":
            raise StateError(f"unsupported basis {basis!r}")
    return amps


def measure(
    state: StateVector,
    qubits,
    bases: str,
    mode: str = "branch",
    rng: np.random.Generator | None = None,
) -> list[tuple[MeasurementRecord, StateVector]]:
    """Projective measurement of the given bits.

    Branch mode returns every nonzero-probability branch with its exact
    probability; sample mode draws a single branch with Born statistics
    (an rng is then required). Collapsed branches are renormalized and
    X-measured qubits are left in the corresponding |+>/|-> state.
    """
    qubits = tuple(qubits)
    if len(qubits) != len(bases):
        raise StateError("one basis letter per measured qubit required")
    n = state.layout.total_bits
    for pos in qubits:
        if not 0 <= pos < n:
            raise StateError(f"bit {pos} outside layout")
    if len(set(qubits)) != len(qubits):
        raise StateError("duplicate measured qubit")

    amps = _rotate_basis(state.amplitudes, state.layout, qubits, bases)
    m = len(qubits)
    arr = np.moveaxis(amps.reshape((2,) * n), qubits, range(m))
    tail_shape = arr.shape[m:]
    flat = arr.reshape(1 << m, -1)
    probs = (np.abs(flat) ** 2).sum(axis=1)

    if mode == "sample":
        if rng is None:
            raise StateError("sample mode needs a seeded rng")
        choice = int(rng.choice(len(probs), p=probs / probs.sum()))
        outcomes = [choice]
    elif mode == "branch":
        outcomes = [o for o in range(1 << m) if probs[o] > 1e-12]
    else:
        raise StateError(f"unknown measurement mode {mode!r}")

    branches = []
    for o in outcomes:
        p = float(probs[o])
        collapsed = np.zeros_like(flat)
        collapsed[o] = flat[o] / math.sqrt(p)
        back = np.moveaxis(collapsed.reshape((2,) * m + tail_shape), range(m), qubits)
        new_amps = _rotate_basis(back.reshape(-1), state.layout, qubits, bases)
        bits = tuple((o >> (m - 1 - i)) & 1 for i in range(m))
        record = MeasurementRecord(qubits, bases, bits, p)
        branches.append((record, StateVector(state.layout, new_amps)))
    return branches


# -- analysis -------------------------------------------------------------


def fidelity(s1: StateVector, s2: StateVector) -> float:
    if s1.layout != s2.layout:
        raise StateError("states have different layouts")
    return float(abs(np.vdot(s1.amplitudes, s2.amplitudes)) ** 2)


def purity_across_cut(state: StateVector, subsystem) -> float:
    """Tr(rho^2) of the reduced state on the given bit positions."""
    bits = tuple(subsystem)
    n = state.layout.total_bits
    if not bits or len(bits) >= n:
        raise StateError("subsystem must be a nonempty proper subset of bits")
    if len(set(bits)) != len(bits) or not all(0 <= b < n for b in bits):
        raise StateError("invalid subsystem bit set")
    arr = np.moveaxis(state.amplitudes.reshape((2,) * n), bits, range(len(bits)))
    mat = arr.reshape(1 << len(bits), -1)
    if mat.shape[0] <= mat.shape[1]:
        gram = mat @ mat.conj().T
    else:
        gram = mat.conj().T @ mat
    return float(np.vdot(gram, gram).real)


def walker_vertex_support(
    state: StateVector, walker: int, tolerance: float = SUPPORT_TOL
) -> set[int]:
    """Vertex ids whose marginal probability for the walker exceeds tolerance."""
    layout = state.layout
    layout._check_walker(walker)
    pre = 1 << (walker * layout.walker_bits)
    arr = state.amplitudes.reshape(pre, 1 << layout.nv, -1)
    probs = (np.abs(arr) ** 2).sum(axis=(0, 2))
    return {int(v) for v in np.nonzero(probs > tolerance)[0]}


def reduced_density(state: StateVector, keep_bits) -> np.ndarray:
    """Reduced density matrix over the given bit positions (in given order)."""
    bits = tuple(keep_bits)
    n = state.layout.total_bits
    arr = np.moveaxis(state.amplitudes.reshape((2,) * n), bits, range(len(bits)))
    mat = arr.reshape(1 << len(bits), -1)
    return np.einsum("ia,ja->ij", mat, mat.conj())


def check_no_invalid_amplitude(
    state: StateVector, graph: NetworkGraph, tolerance: float = 1e-12
) -> None:
    """Debug check: amplitude must stay off invalid vertex/coin codes."""
    layout = state.layout
    nvert = len(graph.nodes)
    reg = 1 << layout.walker_bits
    bad = np.zeros(reg, dtype=bool)
    for r in range(reg):
        vid = r >> layout.nc
        coin = r & ((1 << layout.nc) - 1)
        if vid >= nvert or coin >= graph.port_count(graph.nodes[vid]):
            bad[r] = True
    for j in range(layout.k):
        pre = 1 << (j * layout.walker_bits)
        arr = state.amplitudes.reshape(pre, reg, -1)
        probs = (np.abs(arr) ** 2).sum(axis=(0, 2))
        if probs[bad].sum() > tolerance:
            raise StateError(f"walker {j} has amplitude on invalid basis vectors")


def dump_state(state: StateVector, threshold: float = DUMP_TOL) -> str:
    """One line per nonzero amplitude: `index_bits  re  im`, ascending."""
    n = state.layout.total_bits
    lines = []
    for idx in np.nonzero(np.abs(state.amplitudes) >= threshold)[0]:
        a = state.amplitudes[idx]
        lines.append(f"{idx:0{n}b}  {float(a.real)!r}  {float(a.imag)!r}")
    return "\n".join(lines)
