"""Command-line front end: parse protocol scripts, run them, emit reports.

Script grammar (line-oriented, `#` starts a comment):

    network FILE
    walkers N
    init NODE.QUBIT=0|1|+|-
    place WALKER NODE [COIN]
    remote_cu control=A.a[,A.b] [string=BITS] target=B.b[,B.c] path=A,u,B
              gate=G [separation=reverse|measure]
    remote_mcu controls=A0.a,A1.b string=11 target=B.c path=A0,A1,B gate=G
    multipath control=A.a path=... target=... gate=... path=... target=... gate=...
    tree control=A.a edges=A>u,A>w target=u.b gate=G [target=... gate=...]
    ghz_path path=A,B,C qubits=A.g,B.g,C.g [path=... qubits=...]
    linklevel [couple=U,qu:V,qv ...]
    step coinperm node=V c1=N c2=N walker=W
    step coinblock node=V coins=0,1 gate=G walker=W
    step datactrl node=V controls=a,b string=BITS swap=C1,C2 walker=W
    step coindata node=V qubits=a[,b] gate=G walker=W [coin=C]
    step interact node=V coin=C swap=C1,C2 control=W target=W
    step shift flipflop [walkers=0,1]
    step shift identity
    step measure a=NODE b=NODE qubit=NAME [walker=W]

Gates: a library name (X, Y, Z, H, S, T, I) or a custom unitary
`U[re,im,re,im;...]` listing columns separated by `;`, each column a
flat re,im sequence. A script holds either one protocol command or a
sequence of `step` commands.

Exit codes: 0 success, 2 script/network parse error, 3 precondition or
construction error, 4 oracle verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .netgraph import NetworkError, PathSpec, TreeSpec, load_network
from .oracle import CompareReport, compare, data_layout, oracle_apply
from .protocols import (
    GATE_LIBRARY,
    CompiledProtocol,
    GateRequest,
    ProtocolError,
    run_schedule,
    schedule_ghz_path,
    schedule_linklevel,
    schedule_multi_control,
    schedule_multipath,
    schedule_remote_cu,
    schedule_tree,
    separate_measure,
)
from .statevec import (
    RegisterLayout,
    SQRT1_2,
    StateError,
    dump_state,
    init_state,
)
from .walkops import (
    OperatorError,
    Schedule,
    Timestep,
    make_coin_block,
    make_coin_controlled_data,
    make_coin_perm,
    make_data_controlled_coin,
    make_flipflop_shift,
    make_identity_shift,
    make_walk_interaction,
    schedule_to_json,
)

PROTOCOL_COMMANDS = (
    "remote_cu",
    "remote_mcu",
    "multipath",
    "tree",
    "ghz_path",
    "linklevel",
)

DATA_INIT_STATES = {
    "0": (1.0, 0.0),
    "1": (0.0, 1.0),
    "+": (SQRT1_2, SQRT1_2),
    "-": (SQRT1_2, -SQRT1_2),
}


class ScriptError(ValueError):
    """Syntax or reference error in a protocol script."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class Script:
    """Parsed protocol script; commands keep their source line for errors."""

    network: str | None
    walkers: int | None
    inits: tuple  # ((node, qubit, state_label), ...)
    places: tuple  # ((walker, node, coin), ...)
    commands: tuple  # ((name, ((key, value) | word, ...)), ...)
    command_lines: tuple = field(compare=False, default=())


# -- parsing --------------------------------------------------------------


def _split_tokens(line: str) -> list:
    return line.split()


def _parse_kv(token: str, line: int):
    if "=" not in token:
        return token
    key, _, value = token.partition("=")
    if not key or not value:
        raise ScriptError(f"malformed argument {token!r}", line)
    return (key, value)


def parse_script(text: str) -> Script:
    network = None
    walkers = None
    inits: list = []
    places: list = []
    commands: list = []
    command_lines: list = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = _split_tokens(line)
        name, args = tokens[0], tokens[1:]
        if name == "network":
            if len(args) != 1:
                raise ScriptError("network takes exactly one file path", lineno)
            network = args[0]
        elif name == "walkers":
            if len(args) != 1 or not args[0].isdigit() or int(args[0]) < 1:
                raise ScriptError("walkers takes one positive integer", lineno)
            walkers = int(args[0])
        elif name == "init":
            if len(args) != 1:
                raise ScriptError("init takes NODE.QUBIT=STATE", lineno)
            ref, _, state = args[0].partition("=")
            node, qubit = _parse_qubit_ref(ref, lineno)
            if state not in DATA_INIT_STATES:
                raise ScriptError(
                    f"unknown initial state {state!r} (use 0, 1, +, -)", lineno
                )
            inits.append((node, qubit, state))
        elif name == "place":
            if len(args) not in (2, 3):
                raise ScriptError("place takes WALKER NODE [COIN]", lineno)
            if not args[0].isdigit() or (len(args) == 3 and not args[2].isdigit()):
                raise ScriptError("place walker/coin must be integers", lineno)
            places.append((int(args[0]), args[1], int(args[2]) if len(args) == 3 else 0))
        elif name in PROTOCOL_COMMANDS or name == "step":
            commands.append((name, tuple(_parse_kv(t, lineno) for t in args)))
            command_lines.append(lineno)
        else:
            raise ScriptError(f"unknown command {name!r}", lineno)
    protocol_count = sum(1 for name, _ in commands if name != "step")
    if protocol_count > 1:
        raise ScriptError("a script may hold at most one protocol command")
    if protocol_count and any(name == "step" for name, _ in commands):
        raise ScriptError("protocol and step commands cannot be mixed")
    return Script(
        network, walkers, tuple(inits), tuple(places), tuple(commands),
        tuple(command_lines),
    )


def serialize_script(script: Script) -> str:
    lines = []
    if script.network:
        lines.append(f"network {script.network}")
    if script.walkers is not None:
        lines.append(f"walkers {script.walkers}")
    for node, qubit, state in script.inits:
        lines.append(f"init {node}.{qubit}={state}")
    for walker, node, coin in script.places:
        lines.append(f"place {walker} {node} {coin}")
    for name, args in script.commands:
        parts = [name]
        for arg in args:
            parts.append(arg if isinstance(arg, str) else f"{arg[0]}={arg[1]}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def _parse_qubit_ref(text: str, line: int) -> tuple[str, str]:
    node, dot, qubit = text.rpartition(".")
    if not dot or not node or not qubit:
        raise ScriptError(f"expected NODE.QUBIT, got {text!r}", line)
    return node, qubit


def _parse_gate(text: str, line: int) -> np.ndarray:
    if text.startswith("U[") and text.endswith("]"):
        cols = []
        for col_text in text[2:-1].split(";"):
            nums = [float(x) for x in col_text.split(",") if x]
            if len(nums) % 2:
                raise ScriptError("gate entries must be re,im pairs", line)
            cols.append([complex(nums[i], nums[i + 1]) for i in range(0, len(nums), 2)])
        mat = np.array(cols, dtype=complex).T
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ScriptError("custom gate must be square", line)
        return mat
    if text in GATE_LIBRARY:
        return GATE_LIBRARY[text]
    raise ScriptError(f"unknown gate {text!r}", line)


def _kv_dict(args, line, *, allowed, required=()):
    out = {}
    for arg in args:
        if isinstance(arg, str):
            raise ScriptError(f"unexpected bare word {arg!r}", line)
        key, value = arg
        if key not in allowed:
            raise ScriptError(f"unknown argument {key!r}", line)
        if key in out:
            raise ScriptError(f"duplicate argument {key!r}", line)
        out[key] = value
    for key in required:
        if key not in out:
            raise ScriptError(f"missing argument {key!r}", line)
    return out


def _parse_controls(text, line):
    controls = []
    for ref in text.split(","):
        controls.append(_parse_qubit_ref(ref, line))
    return controls


def _controls_with_bits(refs, string, line):
    if string is None:
        string = "1" * len(refs)
    if len(string) != len(refs) or any(ch not in "01" for ch in string):
        raise ScriptError("string= must be a bit per control qubit", line)
    return [(n, q, int(b)) for (n, q), b in zip(refs, string)]


def _int_list(text, line):
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise ScriptError(f"expected integer list, got {text!r}", line) from None


# -- compilation ----------------------------------------------------------


def _compile_remote_cu(graph, layout, args, line) -> CompiledProtocol:
    kv = _kv_dict(
        args, line,
        allowed={"control", "string", "target", "path", "gate", "separation"},
        required=("control", "target", "path", "gate"),
    )
    controls = _controls_with_bits(
        _parse_controls(kv["control"], line), kv.get("string"), line
    )
    targets = [_parse_qubit_ref(t, line) for t in kv["target"].split(",")]
    request = GateRequest.build(
        graph, controls, targets, _parse_gate(kv["gate"], line)
    )
    path = PathSpec.in_graph(graph, kv["path"].split(","))
    return schedule_remote_cu(
        graph, layout, request, path, separation=kv.get("separation", "reverse")
    )


def _compile_remote_mcu(graph, layout, args, line) -> CompiledProtocol:
    kv = _kv_dict(
        args, line,
        allowed={"controls", "string", "target", "path", "gate"},
        required=("controls", "target", "path", "gate"),
    )
    controls = _controls_with_bits(
        _parse_controls(kv["controls"], line), kv.get("string"), line
    )
    targets = [_parse_qubit_ref(t, line) for t in kv["target"].split(",")]
    request = GateRequest.build(
        graph, controls, targets, _parse_gate(kv["gate"], line)
    )
    path = PathSpec.in_graph(graph, kv["path"].split(","))
    return schedule_multi_control(graph, layout, request, path)


def _compile_multipath(graph, layout, args, line) -> CompiledProtocol:
    control = None
    string = None
    groups: list[dict] = []
    for arg in args:
        if isinstance(arg, str):
            raise ScriptError(f"unexpected bare word {arg!r}", line)
        key, value = arg
        if key == "control":
            control = value
        elif key == "string":
            string = value
        elif key == "path":
            groups.append({"path": value})
        elif key in ("target", "gate"):
            if not groups or key in groups[-1]:
                raise ScriptError(f"{key}= must follow its path=", line)
            groups[-1][key] = value
        else:
            raise ScriptError(f"unknown argument {key!r}", line)
    if control is None or not groups:
        raise ScriptError("multipath needs control= and at least one path=", line)
    controls = _controls_with_bits(_parse_controls(control, line), string, line)
    paths, requests = [], []
    for g in groups:
        if "target" not in g or "gate" not in g:
            raise ScriptError("each path= needs target= and gate=", line)
        paths.append(PathSpec.in_graph(graph, g["path"].split(",")))
        targets = [_parse_qubit_ref(t, line) for t in g["target"].split(",")]
        requests.append(
            GateRequest.build(graph, controls, targets, _parse_gate(g["gate"], line))
        )
    return schedule_multipath(graph, layout, requests, paths)


def _compile_tree(graph, layout, args, line) -> CompiledProtocol:
    control = None
    string = None
    edges_text = None
    targets: list[dict] = []
    for arg in args:
        if isinstance(arg, str):
            raise ScriptError(f"unexpected bare word {arg!r}", line)
        key, value = arg
        if key == "control":
            control = value
        elif key == "string":
            string = value
        elif key == "edges":
            edges_text = value
        elif key == "target":
            targets.append({"target": value})
        elif key == "gate":
            if not targets or "gate" in targets[-1]:
                raise ScriptError("gate= must follow its target=", line)
            targets[-1]["gate"] = value
        else:
            raise ScriptError(f"unknown argument {key!r}", line)
    if control is None or edges_text is None:
        raise ScriptError("tree needs control= and edges=", line)
    edges = []
    for pair in edges_text.split(","):
        parent, sep, child = pair.partition(">")
        if not sep or not parent or not child:
            raise ScriptError(f"tree edge must be parent>child, got {pair!r}", line)
        edges.append((parent, child))
    controls = _controls_with_bits(_parse_controls(control, line), string, line)
    tree = TreeSpec.in_graph(graph, edges[0][0], edges)
    target_map = {}
    for g in targets:
        if "gate" not in g:
            raise ScriptError("each target= needs a gate=", line)
        refs = [_parse_qubit_ref(t, line) for t in g["target"].split(",")]
        nodes = {n for n, _ in refs}
        if len(nodes) != 1:
            raise ScriptError("a tree target group must sit at one node", line)
        (node,) = nodes
        if node in target_map:
            raise ScriptError(f"duplicate target node {node!r}", line)
        target_map[node] = ([q for _, q in refs], _parse_gate(g["gate"], line))
    return schedule_tree(graph, layout, tree, controls, target_map)


def _compile_ghz(graph, layout, args, line) -> CompiledProtocol:
    groups: list[dict] = []
    for arg in args:
        if isinstance(arg, str):
            raise ScriptError(f"unexpected bare word {arg!r}", line)
        key, value = arg
        if key == "path":
            groups.append({"path": value})
        elif key == "qubits":
            if not groups or "qubits" in groups[-1]:
                raise ScriptError("qubits= must follow its path=", line)
            groups[-1]["qubits"] = value
        else:
            raise ScriptError(f"unknown argument {key!r}", line)
    if not groups:
        raise ScriptError("ghz_path needs at least one path=", line)
    paths, qubit_sets = [], []
    for g in groups:
        if "qubits" not in g:
            raise ScriptError("each path= needs qubits=", line)
        paths.append(PathSpec.in_graph(graph, g["path"].split(",")))
        qmap: dict[str, list] = {}
        for ref in g["qubits"].split(","):
            node, qubit = _parse_qubit_ref(ref, line)
            qmap.setdefault(node, []).append(qubit)
        qubit_sets.append(qmap)
    return schedule_ghz_path(graph, layout, paths, qubit_sets)


def _compile_linklevel(graph, layout, args, line) -> CompiledProtocol:
    couple = {}
    for arg in args:
        if isinstance(arg, str) or arg[0] != "couple":
            raise ScriptError("linklevel takes only couple= arguments", line)
        side_u, sep, side_v = arg[1].partition(":")
        if not sep:
            raise ScriptError("couple= must be U,qu:V,qv", line)
        try:
            u, qu = side_u.split(",")
            v, qv = side_v.split(",")
        except ValueError:
            raise ScriptError("couple= must be U,qu:V,qv", line) from None
        edge = tuple(sorted((u, v)))
        if edge[0] == u:
            couple[edge] = (qu, qv)
        else:
            couple[edge] = (qv, qu)
    return schedule_linklevel(graph, layout, couple)


_PROTOCOL_COMPILERS = {
    "remote_cu": _compile_remote_cu,
    "remote_mcu": _compile_remote_mcu,
    "multipath": _compile_multipath,
    "tree": _compile_tree,
    "ghz_path": _compile_ghz,
    "linklevel": _compile_linklevel,
}


def _walkers_needed(name, graph, args, line) -> int:
    """Walker count a protocol command needs when the script gives none."""
    if name in ("remote_cu", "remote_mcu"):
        return 1
    if name == "multipath":
        return sum(1 for arg in args if not isinstance(arg, str) and arg[0] == "path")
    if name == "ghz_path":
        return sum(1 for arg in args if not isinstance(arg, str) and arg[0] == "path")
    if name == "linklevel":
        edges = {tuple(sorted((v, u))) for v in graph.nodes for u in graph.neighbors(v)}
        return max(1, len(edges))
    if name == "tree":
        for arg in args:
            if not isinstance(arg, str) and arg[0] == "edges":
                leaves = 0
                parents = set()
                children = []
                for pair in arg[1].split(","):
                    parent, _, child = pair.partition(">")
                    parents.add(parent)
                    children.append(child)
                leaves = sum(1 for c in children if c not in parents)
                return max(1, leaves)
        return 1
    raise ScriptError(f"unknown protocol {name!r}", line)


def _compile_step(graph, layout, args, line, builder_state):
    """One `step` command; shift lines close the pending timestep."""
    if not args:
        raise ScriptError("step needs an operator name", line)
    op_name = args[0]
    if not isinstance(op_name, str):
        raise ScriptError("step operator name must come first", line)
    rest = args[1:]
    if op_name == "shift":
        words = [a for a in rest if isinstance(a, str)]
        kv = _kv_dict(
            [a for a in rest if not isinstance(a, str)], line, allowed={"walkers"}
        )
        if words == ["identity"]:
            shift = make_identity_shift(layout)
        elif words == ["flipflop"]:
            chosen = (
                _int_list(kv["walkers"], line) if "walkers" in kv else None
            )
            shift = make_flipflop_shift(graph, layout, chosen)
        else:
            raise ScriptError("step shift needs flipflop or identity", line)
        builder_state["timesteps"].append(
            Timestep(builder_state.pop("pending"), shift)
        )
        builder_state["pending"] = []
        return
    if op_name == "measure":
        kv = _kv_dict(
            rest, line, allowed={"a", "b", "qubit", "walker"},
            required=("a", "b", "qubit"),
        )
        if builder_state["measure"] is not None:
            raise ScriptError("only one measure step allowed", line)
        builder_state["measure"] = separate_measure(
            graph, layout, kv["a"], kv["b"], kv["qubit"]
        )
        return
    if op_name == "coinperm":
        kv = _kv_dict(
            rest, line, allowed={"node", "c1", "c2", "walker"},
            required=("node", "c1", "c2", "walker"),
        )
        op = make_coin_perm(
            graph, layout, kv["node"], int(kv["c1"]), int(kv["c2"]), int(kv["walker"])
        )
    elif op_name == "coinblock":
        kv = _kv_dict(
            rest, line, allowed={"node", "coins", "gate", "walker"},
            required=("node", "coins", "gate", "walker"),
        )
        op = make_coin_block(
            graph, layout,
            {kv["node"]: (_int_list(kv["coins"], line), _parse_gate(kv["gate"], line))},
            int(kv["walker"]),
        )
    elif op_name == "datactrl":
        kv = _kv_dict(
            rest, line, allowed={"node", "controls", "string", "swap", "walker"},
            required=("node", "controls", "string", "swap", "walker"),
        )
        c1, c2 = _int_list(kv["swap"], line)
        op = make_data_controlled_coin(
            graph, layout, kv["node"], kv["controls"].split(","), kv["string"],
            ("swap", c1, c2), int(kv["walker"]),
        )
    elif op_name == "coindata":
        kv = _kv_dict(
            rest, line, allowed={"node", "qubits", "gate", "walker", "coin"},
            required=("node", "qubits", "gate", "walker"),
        )
        op = make_coin_controlled_data(
            graph, layout, kv["node"], kv["qubits"].split(","),
            _parse_gate(kv["gate"], line), int(kv["walker"]),
            coin=int(kv["coin"]) if "coin" in kv else None,
        )
    elif op_name == "interact":
        kv = _kv_dict(
            rest, line, allowed={"node", "coin", "swap", "control", "target"},
            required=("node", "coin", "swap", "control", "target"),
        )
        c1, c2 = _int_list(kv["swap"], line)
        op = make_walk_interaction(
            graph, layout, kv["node"], int(kv["coin"]), ("swap", c1, c2),
            int(kv["control"]), int(kv["target"]),
        )
    else:
        raise ScriptError(f"unknown step operator {op_name!r}", line)
    builder_state["pending"].append(op)


# -- execution ------------------------------------------------------------


def execute(
    script: Script,
    network_override: str | None = None,
    seed: int | None = None,
    mode: str = "branch",
):
    """Run a parsed script; returns (report dict, final StateVector, trace)."""
    network_path = network_override or script.network
    if network_path is None:
        raise ScriptError("no network file given (script line or --network)")
    try:
        network_text = Path(network_path).read_text()
    except OSError as exc:
        raise ScriptError(f"cannot read network file: {exc}") from None
    graph = load_network(network_text)

    protocol_cmds = [
        (name, args, lineno)
        for (name, args), lineno in zip(script.commands, script.command_lines)
        if name != "step"
    ]
    step_cmds = [
        (args, lineno)
        for (name, args), lineno in zip(script.commands, script.command_lines)
        if name == "step"
    ]
    if not script.commands:
        raise ScriptError("script contains no commands")

    if protocol_cmds:
        name, args, lineno = protocol_cmds[0]
        k = script.walkers or _walkers_needed(name, graph, args, lineno)
        layout = RegisterLayout.for_network(graph, k)
        compiled = _PROTOCOL_COMPILERS[name](graph, layout, args, lineno)
        if script.places:
            raise ScriptError("place is only valid in step scripts")
        walker_inits = compiled.walker_inits
    else:
        k = script.walkers or (max(w for w, _, _ in script.places) + 1 if script.places else 1)
        layout = RegisterLayout.for_network(graph, k)
        builder_state = {"timesteps": [], "pending": [], "measure": None}
        for args, lineno in step_cmds:
            _compile_step(graph, layout, args, lineno, builder_state)
        if builder_state["pending"]:
            builder_state["timesteps"].append(
                Timestep(builder_state["pending"], make_identity_shift(layout))
            )
        compiled = CompiledProtocol(
            name="steps",
            graph=graph,
            layout=layout,
            schedule=Schedule(builder_state["timesteps"], builder_state["measure"]),
            walker_inits=[],
            oracle_gates=None,
            meta={},
        )
        placed = {w: (node, coin) for w, node, coin in script.places}
        walker_inits = [placed.get(w, (graph.nodes[0], 0)) for w in range(k)]

    data_inits = {}
    for node, qubit, state in script.inits:
        if qubit not in graph.qubits_at(node):
            raise ScriptError(f"init references unknown qubit {node}.{qubit}")
        data_inits[(node, qubit)] = DATA_INIT_STATES[state]

    state = init_state(graph, layout, walker_inits, data_inits)
    rng = np.random.default_rng(seed) if seed is not None else None
    if mode == "sample" and rng is None:
        rng = np.random.default_rng(0)
    final, trace = run_schedule(state, compiled.schedule, graph, mode=mode, rng=rng)

    comparison: CompareReport | None = None
    if compiled.oracle_gates is not None:
        oracle_in = init_state(graph, data_layout(graph), [], data_inits)
        oracle_out = oracle_apply(oracle_in, compiled.oracle_gates)
        if trace.branches:
            reports = [compare(s, oracle_out) for _, s in trace.branches]
            comparison = CompareReport(
                min(r.walker_purity for r in reports),
                min(r.data_fidelity for r in reports),
                all(r.passed for r in reports),
            )
        else:
            comparison = compare(final, oracle_out)

    report = {
        "schema": 1,
        "protocol": compiled.name,
        "mode": mode,
        "seed": seed,
        "steps": len(compiled.schedule.timesteps),
        "final_norm": trace.final_norm,
        "fidelity_vs_oracle": comparison.data_fidelity if comparison else None,
        "walker_purity": comparison.walker_purity if comparison else None,
        "passed": comparison.passed if comparison else None,
        "measurements": [
            {
                "qubits": list(r.qubits),
                "bases": r.bases,
                "outcome": list(r.outcome),
                "probability": r.probability,
            }
            for r in trace.records
        ],
        "classical_messages": trace.classical_messages,
        "supports": {
            "initial": _support_json(trace.initial_support),
            "timesteps": [_support_json(s) for s in trace.supports],
        },
        "meta": _meta_json(compiled.meta),
        "schedule": schedule_to_json(compiled.schedule),
    }
    return report, final, trace


def _support_json(support: dict) -> dict:
    return {str(w): sorted(labels) for w, labels in support.items()}


def _meta_json(meta: dict) -> dict:
    return json.loads(json.dumps(meta, sort_keys=True, default=str))


def render_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2)


def render_trace(report: dict) -> str:
    lines = [f"protocol: {report['protocol']}  steps: {report['steps']}"]
    lines.append(f"t=0 (initial): {_fmt_support(report['supports']['initial'])}")
    for t, sup in enumerate(report["supports"]["timesteps"], start=1):
        lines.append(f"t={t}: {_fmt_support(sup)}")
    for msg in report["classical_messages"]:
        lines.append(
            f"message to {msg['to']}: outcomes={msg['outcomes']} "
            f"parity={msg['parity']} correction={msg['correction']}"
        )
    return "\n".join(lines)


def _fmt_support(sup: dict) -> str:
    return "  ".join(
        f"w{w}@{{{','.join(labels)}}}" for w, labels in sorted(sup.items(), key=lambda i: int(i[0]))
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qwcp",
        description="Quantum-walk control protocol simulator",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    run = sub.add_parser("run", help="parse and execute a protocol script")
    run.add_argument("script", help="protocol script file")
    run.add_argument("--network", help="network JSON file (overrides the script)")
    run.add_argument("--seed", type=int, default=None, help="rng seed")
    run.add_argument("--mode", choices=("branch", "sample"), default="branch")
    run.add_argument("--out", help="write the report JSON here (default stdout)")
    run.add_argument("--dump-state", help="write the final state dump here")
    run.add_argument("--trace", action="store_true", help="print per-step supports")
    args = parser.parse_args(argv)

    try:
        text = Path(args.script).read_text()
    except OSError as exc:
        print(f"error: cannot read script: {exc}", file=sys.stderr)
        return 2
    try:
        script = parse_script(text)
        report, final, _ = execute(
            script, network_override=args.network, seed=args.seed, mode=args.mode
        )
    except (ScriptError, NetworkError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ProtocolError, OperatorError, StateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    rendered = render_report(report)
    if args.out:
        Path(args.out).write_text(rendered + "\n")
    else:
        print(rendered)
    if args.dump_state:
        Path(args.dump_state).write_text(dump_state(final) + "\n")
    if args.trace:
        print(render_trace(report))

    if report["passed"] is False:
        print("verification failed", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
