"""Layered circuit intermediate representation and partition analysis.

A circuit is a sequence of gate layers V_0..V_D with wires only between
consecutive layers; evaluating it forward computes a function of the layer-0
inputs. A partition scheme splits every layer into per-node parts and each
part into fixed-size pieces; the analysis here measures how much wiring
crosses parts, which is exactly what the fault-tolerant runner pays for.
"""

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

GATE_FUNCS = ("input", "copy", "sum", "dot", "lincomb", "callback")


class Gate:
    """One gate: a function of gates in the previous layer.

    in_wires entries are either a bare int (index into layer-1, the normal
    form) or an explicit (layer, index) pair kept for validation purposes.
    """

    __slots__ = ("layer", "index", "func", "in_wires", "coeffs", "fn")

    def __init__(
        self,
        layer: int,
        index: int,
        func: str,
        in_wires: Sequence = (),
        coeffs: Optional[tuple] = None,
        fn: Optional[Callable] = None,
    ):
        self.layer = layer
        self.index = index
        self.func = func
        self.in_wires = tuple(in_wires)
        self.coeffs = coeffs
        self.fn = fn

    def wire_sources(self) -> list[int]:
        """Previous-layer indices of all in-wires (explicit pairs included)."""
        return [w if isinstance(w, int) else w[1] for w in self.in_wires]

    def __repr__(self) -> str:
        return f"Gate(L{self.layer}#{self.index} {self.func}/{len(self.in_wires)})"


@dataclass
class LayeredCircuit:
    """Gate layers plus the message-alphabet parameters (n nodes, width b)."""

    n: int
    b: int
    layers: list[list[Gate]]

    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    @property
    def alphabet_size(self) -> int:
        return self.n**self.b

    def gate_count(self) -> int:
        return sum(len(layer) for layer in self.layers)


def validate(circuit: LayeredCircuit) -> list[str]:
    """Return a list of structural violations; empty means well-formed."""
    bad: list[str] = []
    if circuit.n < 2:
        bad.append("n must be at least 2")
    if circuit.b < 1:
        bad.append("bandwidth multiplier b must be at least 1")
    if len(circuit.layers) < 2:
        bad.append("circuit needs at least an input and an output layer")
        return bad
    for li, layer in enumerate(circuit.layers):
        prev_size = len(circuit.layers[li - 1]) if li else 0
        for gi, g in enumerate(layer):
            where = f"gate L{li}#{gi}"
            if g.layer != li or g.index != gi:
                bad.append(f"{where}: stored position (L{g.layer}#{g.index}) disagrees")
            if g.func not in GATE_FUNCS:
                bad.append(f"{where}: unknown func {g.func!r}")
                continue
            if li == 0:
                if g.func != "input":
                    bad.append(f"{where}: layer 0 gates must be identity inputs")
                if g.in_wires:
                    bad.append(f"{where}: input gates take no wires")
                continue
            if g.func == "input":
                bad.append(f"{where}: input gates only allowed at layer 0")
            if not g.in_wires:
                bad.append(f"{where}: no in-wires")
            for w in g.in_wires:
                if isinstance(w, int):
                    src_layer, src = li - 1, w
                else:
                    src_layer, src = w
                if src_layer != li - 1:
                    bad.append(f"{where}: wire from layer {src_layer}, expected {li - 1}")
                elif not 0 <= src < prev_size:
                    bad.append(f"{where}: wire index {src} out of range")
            if g.func == "copy" and len(g.in_wires) != 1:
                bad.append(f"{where}: copy gates have fan-in 1")
            if g.func == "dot" and (len(g.in_wires) < 2 or len(g.in_wires) % 2):
                bad.append(f"{where}: dot gates need an even fan-in >= 2")
            if g.func == "lincomb" and (g.coeffs is None or len(g.coeffs) != len(g.in_wires)):
                bad.append(f"{where}: lincomb needs one coefficient per wire")
            if g.func == "callback" and g.fn is None:
                bad.append(f"{where}: callback gate without a function")
    return bad


def _gate_value(g: Gate, prev: Sequence, algebra) -> object:
    vals = [prev[w if isinstance(w, int) else w[1]] for w in g.in_wires]
    if g.func == "copy":
        return vals[0]
    if g.func == "sum":
        acc = vals[0]
        for v in vals[1:]:
            acc = algebra.add(acc, v)
        return acc
    if g.func == "dot":
        half = len(vals) // 2
        acc = algebra.mul(vals[0], vals[half])
        for i in range(1, half):
            acc = algebra.add(acc, algebra.mul(vals[i], vals[half + i]))
        return acc
    if g.func == "lincomb":
        acc = algebra.zero
        for c, v in zip(g.coeffs, vals):
            acc = algebra.add(acc, algebra.mul(c, v))
        return acc
    if g.func == "callback":
        return g.fn(tuple(vals))
    raise ValueError(f"cannot evaluate gate func {g.func!r}")


def evaluate(circuit: LayeredCircuit, inputs: Sequence, algebra=None) -> list:
    """Forward-evaluate the circuit; returns the output-layer values in order.

    `algebra` supplies add/mul/zero for sum, dot, and lincomb gates; circuits
    made only of copies and callbacks do not need one.
    """
    return evaluate_layers(circuit, inputs, algebra)[-1]


def evaluate_layers(circuit: LayeredCircuit, inputs: Sequence, algebra=None) -> list:
    """Forward-evaluate the circuit keeping every layer's values.

    Returns one value list per layer, inputs first. The fault-tolerant runner
    snapshots intermediate layers, so it needs all of them, not just the
    outputs.
    """
    if len(inputs) != len(circuit.layers[0]):
        raise ValueError(
            f"expected {len(circuit.layers[0])} inputs, got {len(inputs)}"
        )
    values = [list(inputs)]
    for layer in circuit.layers[1:]:
        prev = values[-1]
        values.append([_gate_value(g, prev, algebra) for g in layer])
    return values


class PartitionScheme:
    """Per-layer assignment of gates to node parts and fixed-size pieces.

    Pieces conceptually have exactly `group_size` gates; a part whose size is
    not a multiple is topped up with virtual zero gates, so the stored gate
    list of its last piece may be shorter.
    """

    def __init__(self, n: int, group_size: int, part_of: list[list[int]],
                 piece_of: Optional[list[list[int]]] = None):
        self.n = n
        self.group_size = group_size
        self.part_of = part_of
        if piece_of is None:
            piece_of = []
            for layer_parts in part_of:
                seen: dict[int, int] = {}
                ids = []
                for w in layer_parts:
                    pos = seen.get(w, 0)
                    seen[w] = pos + 1
                    ids.append(pos // group_size)
                piece_of.append(ids)
        self.piece_of = piece_of
        self._parts_cache: dict[int, dict[int, list[int]]] = {}
        self._pieces_cache: dict[tuple[int, int], list[list[int]]] = {}

    def validate(self, circuit: LayeredCircuit) -> list[str]:
        bad = []
        if len(self.part_of) != len(circuit.layers):
            bad.append("scheme does not cover every layer")
            return bad
        for li, layer in enumerate(circuit.layers):
            if len(self.part_of[li]) != len(layer):
                bad.append(f"layer {li}: scheme covers {len(self.part_of[li])} of {len(layer)} gates")
                continue
            sizes: dict[tuple[int, int], int] = {}
            for gi, w in enumerate(self.part_of[li]):
                if not 0 <= w < self.n:
                    bad.append(f"layer {li} gate {gi}: part {w} out of range")
                    continue
                key = (w, self.piece_of[li][gi])
                sizes[key] = sizes.get(key, 0) + 1
            for (w, j), size in sizes.items():
                if size > self.group_size:
                    bad.append(f"layer {li} part {w} piece {j}: {size} gates exceed group size")
        return bad

    def part_gates(self, layer: int, w: int) -> list[int]:
        """Ascending gate indices of part w at the given layer."""
        if layer not in self._parts_cache:
            by_part: dict[int, list[int]] = {}
            for gi, part in enumerate(self.part_of[layer]):
                by_part.setdefault(part, []).append(gi)
            self._parts_cache[layer] = by_part
        return self._parts_cache[layer].get(w, [])

    def pieces(self, layer: int, w: int) -> list[list[int]]:
        """Gate-index lists of part w's pieces, in piece order."""
        key = (layer, w)
        if key not in self._pieces_cache:
            by_piece: dict[int, list[int]] = {}
            ids = self.piece_of[layer]
            for gi in self.part_gates(layer, w):
                by_piece.setdefault(ids[gi], []).append(gi)
            self._pieces_cache[key] = [by_piece[j] for j in sorted(by_piece)]
        return self._pieces_cache[key]

    def piece_count(self, layer: int, w: int) -> int:
        return len(self.pieces(layer, w))


@dataclass(frozen=True)
class Epoch:
    """One checkpoint-to-checkpoint span of layers.

    fetch_layer is the layer whose values feed the epoch; comm_layer is the
    first computed layer when that boundary crosses parts (None when the
    fetch is purely local); checkpoint_layer is where the epoch's results are
    snapshotted.
    """

    fetch_layer: int
    comm_layer: Optional[int]
    compute_layers: tuple[int, ...]
    checkpoint_layer: int


@dataclass
class BoundaryStats:
    """Cross-part wiring measured at the boundary layer -> layer+1."""

    layer: int
    crossing: bool
    in_cross: dict[int, int] = field(default_factory=dict)
    out_cross: dict[int, int] = field(default_factory=dict)
    bin_count: dict[int, int] = field(default_factory=dict)
    src_parts: dict[int, int] = field(default_factory=dict)

    def max_in(self) -> int:
        return max(self.in_cross.values(), default=0)

    def max_out(self) -> int:
        return max(self.out_cross.values(), default=0)

    def max_bin(self) -> int:
        return max(self.bin_count.values(), default=0)


@dataclass
class LocalityReport:
    """Exact locality counts recomputed from the wiring, never asserted."""

    max_block_fan: int
    max_piece_count: int
    max_bin_count: int
    max_output_part: int
    comm_layers: list[int]
    epochs: list[Epoch]
    boundaries: list[BoundaryStats]


def boundary_bins(circuit: LayeredCircuit, scheme: PartitionScheme, layer: int
                  ) -> dict[int, list[tuple[int, int]]]:
    """Foreign pieces of `layer` wired into each part of `layer`+1.

    Returns, per destination part u, the sorted (source part, piece) pairs
    with at least one wire into u, excluding u's own pieces.
    """
    parts_src = scheme.part_of[layer]
    pieces_src = scheme.piece_of[layer]
    parts_dst = scheme.part_of[layer + 1]
    bins: dict[int, set[tuple[int, int]]] = {}
    for g in circuit.layers[layer + 1]:
        u = parts_dst[g.index]
        for src in g.wire_sources():
            v = parts_src[src]
            if v != u:
                bins.setdefault(u, set()).add((v, pieces_src[src]))
    return {u: sorted(s) for u, s in bins.items()}


def _boundary_stats(circuit: LayeredCircuit, scheme: PartitionScheme, layer: int) -> BoundaryStats:
    parts_src = scheme.part_of[layer]
    pieces_src = scheme.piece_of[layer]
    parts_dst = scheme.part_of[layer + 1]
    stats = BoundaryStats(layer=layer, crossing=False)
    bins: dict[int, set] = {}
    srcs: dict[int, set] = {}
    for g in circuit.layers[layer + 1]:
        u = parts_dst[g.index]
        for src in g.wire_sources():
            v = parts_src[src]
            srcs.setdefault(u, set()).add(v)
            if v != u:
                stats.crossing = True
                stats.in_cross[u] = stats.in_cross.get(u, 0) + 1
                stats.out_cross[v] = stats.out_cross.get(v, 0) + 1
                bins.setdefault(u, set()).add((v, pieces_src[src]))
    stats.bin_count = {u: len(s) for u, s in bins.items()}
    stats.src_parts = {u: len(s) for u, s in srcs.items()}
    return stats


def classify_layers(circuit: LayeredCircuit, scheme: PartitionScheme
                    ) -> tuple[list[str], list[Epoch]]:
    """Label each layer and split the circuit into epochs.

    A layer is a communication layer when any of its out-wires enters a
    different part; epochs run from one such boundary (or the inputs) through
    the next, checkpointing their last layer.
    """
    depth = circuit.depth
    crossing = [_boundary_stats(circuit, scheme, i).crossing for i in range(depth)]
    labels = ["communication" if (i < depth and crossing[i]) else "computation"
              for i in range(depth)] + ["output"]
    epochs = []
    lo = 0
    while lo < depth:
        hi = lo + 1
        while hi < depth and not crossing[hi]:
            hi += 1
        epochs.append(Epoch(
            fetch_layer=lo,
            comm_layer=lo + 1 if crossing[lo] else None,
            compute_layers=tuple(range(lo + 1, hi + 1)),
            checkpoint_layer=hi,
        ))
        lo = hi
    return labels, epochs


def analyze_partition(circuit: LayeredCircuit, scheme: PartitionScheme) -> LocalityReport:
    """Measure cross-part wiring, piece counts, and output-part sizes."""
    bad = scheme.validate(circuit)
    if bad:
        raise ValueError("invalid scheme: " + "; ".join(bad[:3]))
    boundaries = [_boundary_stats(circuit, scheme, i) for i in range(circuit.depth)]
    max_fan = max((max(bs.max_in(), bs.max_out()) for bs in boundaries), default=0)
    max_bin = max((bs.max_bin() for bs in boundaries), default=0)
    # pieces exist to be snapshotted: count them at the input layer and at
    # epoch checkpoints, not at intermediate layers that are never encoded
    _, epochs0 = classify_layers(circuit, scheme)
    snapshot_layers = {0} | {e.checkpoint_layer for e in epochs0}
    max_pieces = 0
    for layer in snapshot_layers:
        for w in range(scheme.n):
            max_pieces = max(max_pieces, scheme.piece_count(layer, w))
    out_layer = len(circuit.layers) - 1
    max_out = max(
        (len(scheme.part_gates(out_layer, w)) for w in range(scheme.n)), default=0
    )
    crossing = [bs.crossing for bs in boundaries]
    return LocalityReport(
        max_block_fan=max_fan,
        max_piece_count=max_pieces,
        max_bin_count=max_bin,
        max_output_part=max_out,
        comm_layers=[i for i, c in enumerate(crossing) if c],
        epochs=epochs0,
        boundaries=boundaries,
    )


def write_circuit(circuit: LayeredCircuit) -> str:
    """Render the circuit in the line-oriented exchange format.

    Header `circuit <n> <depth> <b>`, then one line per gate:
    `gate <layer> <index> <func> <fanin> <src...>` where lincomb funcs carry
    their coefficients as `lincomb:c1,c2,...`. Callback gates are opaque and
    cannot be serialized.
    """
    lines = [f"circuit {circuit.n} {circuit.depth} {circuit.b}"]
    for layer in circuit.layers:
        for g in layer:
            if g.func == "callback":
                raise ValueError(f"gate L{g.layer}#{g.index}: callbacks are not serializable")
            tok = g.func
            if g.func == "lincomb":
                tok += ":" + ",".join(str(c) for c in g.coeffs)
            srcs = " ".join(str(s) for s in g.wire_sources())
            lines.append(f"gate {g.layer} {g.index} {tok} {len(g.in_wires)}"
                         + (f" {srcs}" if srcs else ""))
    return "\n".join(lines) + "\n"


def read_circuit(text: str) -> LayeredCircuit:
    """Parse the exchange format produced by write_circuit."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("circuit "):
        raise ValueError("missing circuit header")
    _, n_s, depth_s, b_s = lines[0].split()
    n, depth, b = int(n_s), int(depth_s), int(b_s)
    layers: list[list[Gate]] = [[] for _ in range(depth + 1)]
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] != "gate":
            raise ValueError(f"unexpected line: {ln!r}")
        layer, index = int(parts[1]), int(parts[2])
        tok, fanin = parts[3], int(parts[4])
        srcs = [int(x) for x in parts[5 : 5 + fanin]]
        if len(srcs) != fanin:
            raise ValueError(f"gate {layer}/{index}: fan-in mismatch")
        coeffs = None
        func = tok
        if tok.startswith("lincomb:"):
            func = "lincomb"
            coeffs = tuple(int(c) for c in tok.split(":", 1)[1].split(","))
        if not 0 <= layer <= depth:
            raise ValueError(f"gate layer {layer} out of range")
        if index != len(layers[layer]):
            raise ValueError(f"gate {layer}/{index}: indices must be dense and in order")
        layers[layer].append(Gate(layer, index, func, srcs, coeffs=coeffs))
    return LayeredCircuit(n=n, b=b, layers=layers)


def write_scheme(scheme: PartitionScheme) -> str:
    """Render a partition scheme: `assign <layer> <gate> <part> <piece>` lines."""
    lines = [f"scheme {scheme.n} {scheme.group_size}"]
    for li, layer_parts in enumerate(scheme.part_of):
        ids = scheme.piece_of[li]
        for gi, w in enumerate(layer_parts):
            lines.append(f"assign {li} {gi} {w} {ids[gi]}")
    return "\n".join(lines) + "\n"


def read_scheme(text: str, circuit: LayeredCircuit) -> PartitionScheme:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("scheme "):
        raise ValueError("missing scheme header")
    _, n_s, gs_s = lines[0].split()
    n, group_size = int(n_s), int(gs_s)
    part_of = [[-1] * len(layer) for layer in circuit.layers]
    piece_of = [[-1] * len(layer) for layer in circuit.layers]
    for ln in lines[1:]:
        tag, li_s, gi_s, w_s, j_s = ln.split()
        if tag != "assign":
            raise ValueError(f"unexpected line: {ln!r}")
        li, gi = int(li_s), int(gi_s)
        part_of[li][gi] = int(w_s)
        piece_of[li][gi] = int(j_s)
    for li, layer_parts in enumerate(part_of):
        if any(w < 0 for w in layer_parts):
            raise ValueError(f"layer {li}: scheme leaves gates unassigned")
    return PartitionScheme(n=n, group_size=group_size, part_of=part_of, piece_of=piece_of)
