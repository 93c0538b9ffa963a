"""Compile synchronous all-to-all message-passing algorithms into circuits.

A T-round algorithm on n nodes, where each node starts with n input symbols
and may send one symbol to every node per round, unrolls into a layered
circuit of depth exactly 2T+1: odd layers hold each node's outgoing messages,
even layers hold the received messages, and both re-copy the node's
accumulated state forward so later rounds can read it.
"""

from dataclasses import dataclass
from typing import Callable, Sequence

from .circuit import Gate, LayeredCircuit, PartitionScheme


@dataclass
class CliqueAlgorithm:
    """A deterministic synchronous algorithm.

    State tuples are newest-first: the most recent round's received messages
    occupy state[:n] (entry j came from node j) and the node's own inputs sit
    at state[-n:]. message_fn(node, round, state) returns the n outgoing
    symbols for rounds 1..rounds; output_fn(node, final_state) returns the
    node's out_size output symbols.
    """

    name: str
    rounds: int
    out_size: int
    message_fn: Callable[[int, int, tuple], Sequence[int]]
    output_fn: Callable[[int, tuple], Sequence[int]]

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be nonnegative")
        if self.out_size < 1:
            raise ValueError("out_size must be positive")


def run_clique_directly(alg: CliqueAlgorithm, n: int, inputs: Sequence[int],
                        b: int = 1) -> list[int]:
    """Reference synchronous execution; the oracle the compiler is tested against.

    inputs is the flat concatenation of every node's n input symbols; the
    return value is the flat concatenation of every node's outputs. Raises if
    any message does not fit in the symbol alphabet of size n**b.
    """
    if len(inputs) != n * n:
        raise ValueError(f"expected {n * n} input symbols, got {len(inputs)}")
    cap = n**b
    states = [tuple(inputs[i * n : (i + 1) * n]) for i in range(n)]
    for rnd in range(1, alg.rounds + 1):
        outboxes = []
        for i in range(n):
            msgs = list(alg.message_fn(i, rnd, states[i]))
            if len(msgs) != n:
                raise ValueError(f"node {i} round {rnd}: needs one message per node")
            for m in msgs:
                if not isinstance(m, int) or not 0 <= m < cap:
                    raise ValueError(
                        f"node {i} round {rnd}: message {m!r} exceeds bandwidth (< {cap})"
                    )
            outboxes.append(msgs)
        states = [
            tuple(outboxes[j][i] for j in range(n)) + states[i] for i in range(n)
        ]
    flat: list[int] = []
    for i in range(n):
        out = list(alg.output_fn(i, states[i]))
        if len(out) != alg.out_size:
            raise ValueError(f"node {i}: expected {alg.out_size} outputs, got {len(out)}")
        flat.extend(out)
    return flat


def _msg_gate(alg: CliqueAlgorithm, node: int, rnd: int, to: int):
    def fn(vals):
        return alg.message_fn(node, rnd, vals)[to]

    return fn


def _out_gate(alg: CliqueAlgorithm, node: int, k: int):
    def fn(vals):
        return alg.output_fn(node, vals)[k]

    return fn


def compile_clique(alg: CliqueAlgorithm, n: int, b: int = 1,
                   group_size: int | None = None
                   ) -> tuple[LayeredCircuit, PartitionScheme]:
    """Unroll the algorithm into a depth 2T+1 circuit with an n-part scheme.

    Layer layout per part i (part sizes in parentheses):
      even layer 2L:  [round-L inbox][older state]            ((L+1)n gates)
      odd layer 2L+1: [round-(L+1) outbox][copy of even 2L]   ((L+2)n gates)
      layer 2T+1:     output gates only                       (out_size gates)
    Only the outbox -> inbox boundaries cross parts, with exactly one wire
    from each other part, so every other boundary stays local.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    T = alg.rounds
    layers: list[list[Gate]] = [[Gate(0, g, "input") for g in range(n * n)]]
    part_of: list[list[int]] = [[g // n for g in range(n * n)]]

    for L in range(T):
        # outbox layer 2L+1: messages of round L+1 plus a full state copy
        prev_sz = (L + 1) * n
        sz = (L + 2) * n
        layer: list[Gate] = []
        for i in range(n):
            base = i * prev_sz
            state_wires = list(range(base, base + prev_sz))
            for j in range(n):
                layer.append(Gate(2 * L + 1, len(layer), "callback", state_wires,
                                  fn=_msg_gate(alg, i, L + 1, j)))
            for k in range(n, sz):
                layer.append(Gate(2 * L + 1, len(layer), "copy", [base + k - n]))
        layers.append(layer)
        part_of.append([g // sz for g in range(n * sz)])

        # inbox layer 2L+2: one wire from every other part, then the state
        prev_sz = sz
        sz = (L + 2) * n
        layer = []
        for i in range(n):
            for j in range(n):
                layer.append(Gate(2 * L + 2, len(layer), "copy", [j * prev_sz + i]))
            base = i * prev_sz
            for k in range(n, sz):
                layer.append(Gate(2 * L + 2, len(layer), "copy", [base + k]))
        layers.append(layer)
        part_of.append([g // sz for g in range(n * sz)])

    prev_sz = (T + 1) * n
    out_layer: list[Gate] = []
    for i in range(n):
        base = i * prev_sz
        state_wires = list(range(base, base + prev_sz))
        for k in range(alg.out_size):
            out_layer.append(Gate(2 * T + 1, len(out_layer), "callback", state_wires,
                                  fn=_out_gate(alg, i, k)))
    layers.append(out_layer)
    part_of.append([g // alg.out_size for g in range(n * alg.out_size)])

    circuit = LayeredCircuit(n=n, b=b, layers=layers)
    scheme = PartitionScheme(n=n, group_size=group_size or n, part_of=part_of)
    return circuit, scheme


def echo_algorithm(n: int, b: int = 1) -> CliqueAlgorithm:
    """One round: node i hands its j-th input to node j; outputs the inbox.

    Net effect is a transpose of the n x n input matrix.
    """

    def message(i, rnd, state):
        return list(state[-n:])

    def output(i, state):
        return list(state[:n])

    return CliqueAlgorithm("echo", rounds=1, out_size=n,
                           message_fn=message, output_fn=output)


def sum_broadcast_algorithm(n: int, b: int = 1) -> CliqueAlgorithm:
    """Two rounds: local sums funnel into node 0, which broadcasts the total."""
    cap = n**b

    def message(i, rnd, state):
        if rnd == 1:
            out = [0] * n
            out[0] = sum(state[-n:]) % cap
            return out
        total = sum(state[:n]) % cap if i == 0 else 0
        return [total] * n

    def output(i, state):
        return [state[0]]

    return CliqueAlgorithm("sum-broadcast", rounds=2, out_size=1,
                           message_fn=message, output_fn=output)


def prefix_sum_algorithm(n: int, b: int = 1) -> CliqueAlgorithm:
    """Three dependent rounds ending with every node holding all prefix sums.

    Round 1 scatters inputs (node i's j-th symbol to node j), round 2
    broadcasts each column sum, round 3 broadcasts each prefix of those sums.
    """
    cap = n**b

    def message(i, rnd, state):
        if rnd == 1:
            return list(state[-n:])
        if rnd == 2:
            return [sum(state[:n]) % cap] * n
        return [sum(state[:i + 1]) % cap] * n

    def output(i, state):
        return list(state[:n])

    return CliqueAlgorithm("prefix-sum", rounds=3, out_size=n,
                           message_fn=message, output_fn=output)


SAMPLE_ALGORITHMS = {
    "echo": echo_algorithm,
    "sum-broadcast": sum_broadcast_algorithm,
    "prefix-sum": prefix_sum_algorithm,
}
