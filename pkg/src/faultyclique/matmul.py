"""Matrix-multiplication workload circuits.

Two builders produce layered circuits whose parts map onto n nodes: a
semiring product split over a cube-grid of blocks (parts indexed by
3-tuples), and a ring product driven by a bilinear tensor (parts indexed by
2-tuples). Both keep every output part at exactly n gates and expose the
cross-part wiring the checkpointing runner pays for.
"""

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .circuit import Gate, LayeredCircuit, PartitionScheme


# ---------------------------------------------------------------------------
# algebras


@dataclass(frozen=True)
class Semiring:
    """Binary add/mul with an additive identity that mul absorbs."""

    name: str
    add: Callable[[int, int], int]
    mul: Callable[[int, int], int]
    zero: int


def largest_prime_at_most(m: int) -> int:
    for cand in range(m, 1, -1):
        if all(cand % d for d in range(2, math.isqrt(cand) + 1)):
            return cand
    raise ValueError(f"no prime at most {m}")


def semiring_plus_times(n: int, b: int = 1) -> Semiring:
    """Arithmetic mod the largest prime that fits one symbol (a field)."""
    p = largest_prime_at_most(n**b)
    return Semiring(f"plus-times-mod-{p}",
                    add=lambda x, y: (x + y) % p,
                    mul=lambda x, y: (x * y) % p,
                    zero=0)


def semiring_tropical(n: int, b: int = 1) -> Semiring:
    """(min, saturating +) over [0, n**b); the top value acts as infinity."""
    top = n**b - 1
    return Semiring("tropical",
                    add=min,
                    mul=lambda x, y: min(x + y, top),
                    zero=top)


def check_semiring(sr: Semiring, samples: Sequence[int], trials: int = 200,
                   rng=None) -> list[str]:
    """Spot-check the semiring laws on random triples; returns violations."""
    import random

    rng = rng or random.Random(0)
    bad = []
    for _ in range(trials):
        a, b, c = (rng.choice(samples) for _ in range(3))
        if sr.add(a, b) != sr.add(b, a):
            bad.append(f"add not commutative at ({a},{b})")
        if sr.add(sr.add(a, b), c) != sr.add(a, sr.add(b, c)):
            bad.append(f"add not associative at ({a},{b},{c})")
        if sr.mul(a, sr.add(b, c)) != sr.add(sr.mul(a, b), sr.mul(a, c)):
            bad.append(f"mul does not distribute at ({a},{b},{c})")
        if sr.add(a, sr.zero) != a:
            bad.append(f"zero is not an add identity at {a}")
        if sr.mul(a, sr.zero) != sr.zero or sr.mul(sr.zero, a) != sr.zero:
            bad.append(f"zero is not absorbing at {a}")
    return bad


def naive_mm(A: Sequence[Sequence[int]], B: Sequence[Sequence[int]],
             algebra: Semiring) -> list[list[int]]:
    """Triple-loop product; the oracle every circuit is compared against."""
    d = len(A)
    if any(len(row) != d for row in A) or len(B) != d or any(len(r) != d for r in B):
        raise ValueError("matrices must be square with equal dimensions")
    out = []
    for i in range(d):
        row = []
        for j in range(d):
            acc = algebra.zero
            for k in range(d):
                acc = algebra.add(acc, algebra.mul(A[i][k], B[k][j]))
            row.append(acc)
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# bilinear tensors


@dataclass(frozen=True)
class MMTensor:
    """Bilinear matrix-multiplication tensor over m x m block grids.

    alpha[k][i][j] and beta[k][i][j] weight the inputs of the k-th product;
    gamma[i][j][k] recombines the rank products into output blocks. sigma is
    the effective exponent log_m(rank).
    """

    name: str
    m: int
    rank: int
    alpha: tuple
    beta: tuple
    gamma: tuple

    def __post_init__(self):
        m, r = self.m, self.rank
        for field_name, t, shape in (("alpha", self.alpha, (r, m, m)),
                                     ("beta", self.beta, (r, m, m)),
                                     ("gamma", self.gamma, (m, m, r))):
            if len(t) != shape[0] or any(
                len(x) != shape[1] or any(len(y) != shape[2] for y in x) for x in t
            ):
                raise ValueError(f"{field_name} must have shape {shape}")

    @property
    def sigma(self) -> float:
        return math.log(self.rank, self.m)


def trivial_tensor(m: int) -> MMTensor:
    """The rank-m^3 tensor: one product per (i, k, j) of the classical sum."""
    rank = m**3
    alpha = [[[0] * m for _ in range(m)] for _ in range(rank)]
    beta = [[[0] * m for _ in range(m)] for _ in range(rank)]
    gamma = [[[0] * rank for _ in range(m)] for _ in range(m)]
    for i in range(m):
        for k in range(m):
            for j in range(m):
                t = (i * m + k) * m + j
                alpha[t][i][k] = 1
                beta[t][k][j] = 1
                gamma[i][j][t] = 1
    freeze = lambda t: tuple(tuple(tuple(r) for r in x) for x in t)
    return MMTensor("trivial", m, rank, freeze(alpha), freeze(beta), freeze(gamma))


def strassen_tensor() -> MMTensor:
    """The rank-7 tensor for 2x2 blocks (sigma = log2 7 < 3)."""
    # products: coefficients on A[i][j] and B[i][j] per bilinear term
    a_terms = [
        {(0, 0): 1, (1, 1): 1},
        {(1, 0): 1, (1, 1): 1},
        {(0, 0): 1},
        {(1, 1): 1},
        {(0, 0): 1, (0, 1): 1},
        {(1, 0): 1, (0, 0): -1},
        {(0, 1): 1, (1, 1): -1},
    ]
    b_terms = [
        {(0, 0): 1, (1, 1): 1},
        {(0, 0): 1},
        {(0, 1): 1, (1, 1): -1},
        {(1, 0): 1, (0, 0): -1},
        {(1, 1): 1},
        {(0, 0): 1, (0, 1): 1},
        {(1, 0): 1, (1, 1): 1},
    ]
    c_terms = {
        (0, 0): {0: 1, 3: 1, 4: -1, 6: 1},
        (0, 1): {2: 1, 4: 1},
        (1, 0): {1: 1, 3: 1},
        (1, 1): {0: 1, 1: -1, 2: 1, 5: 1},
    }
    alpha = tuple(
        tuple(tuple(a_terms[t].get((i, j), 0) for j in range(2)) for i in range(2))
        for t in range(7)
    )
    beta = tuple(
        tuple(tuple(b_terms[t].get((i, j), 0) for j in range(2)) for i in range(2))
        for t in range(7)
    )
    gamma = tuple(
        tuple(tuple(c_terms[(i, j)].get(t, 0) for t in range(7)) for j in range(2))
        for i in range(2)
    )
    return MMTensor("strassen", 2, 7, alpha, beta, gamma)


def apply_tensor(tensor: MMTensor, X, Y, ring: Semiring) -> list[list[int]]:
    """Multiply two m x m matrices using only the tensor's bilinear products."""
    m, rank = tensor.m, tensor.rank
    if len(X) != m or len(Y) != m:
        raise ValueError(f"expected {m} x {m} matrices")
    hx = []
    hy = []
    for k in range(rank):
        ax = ring.zero
        by = ring.zero
        for i in range(m):
            for j in range(m):
                ax = ring.add(ax, ring.mul(tensor.alpha[k][i][j], X[i][j]))
                by = ring.add(by, ring.mul(tensor.beta[k][i][j], Y[i][j]))
        hx.append(ax)
        hy.append(by)
    out = []
    for i in range(m):
        row = []
        for j in range(m):
            acc = ring.zero
            for k in range(rank):
                acc = ring.add(acc, ring.mul(tensor.gamma[i][j][k],
                                             ring.mul(hx[k], hy[k])))
            row.append(acc)
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# layouts: where matrix entries start, enter the circuit, and come out


def _exact_root(n: int, k: int, what: str) -> int:
    r = round(n ** (1.0 / k))
    for cand in (r - 1, r, r + 1):
        if cand > 0 and cand**k == n:
            return cand
    raise ValueError(f"{what} requires n^(1/{k}) to be an integer; n={n} fails")


class SemiringLayout:
    """Index maps for the cube-grid circuit.

    Parts are 3-tuples (w1, w2, w3) over a grid of side n^(1/3); part w's
    inputs are one column-slice of block (w1, w2) of A and one row-slice of
    block (w1, w2) of B, sliced at w3. Initial ownership of both matrices is
    row-major: node i holds row i.
    """

    def __init__(self, n: int):
        self.n = n
        self.grid = _exact_root(n, 3, "semiring layout")
        self.block = self.grid * self.grid

    def part_tuple(self, part: int) -> tuple[int, int, int]:
        g = self.grid
        return (part // (g * g), (part // g) % g, part % g)

    def input_source(self, part: int, local: int) -> tuple[str, int, int]:
        """Which matrix entry feeds layer-0 gate `local` of `part`."""
        n, g, bk = self.n, self.grid, self.block
        w1, w2, w3 = self.part_tuple(part)
        if local < n:
            i, j = divmod(local, g)
            return ("A", w1 * bk + i, w2 * bk + w3 * g + j)
        j, k = divmod(local - n, bk)
        return ("B", w1 * bk + w3 * g + j, w2 * bk + k)

    def inputs_vector(self, A, B) -> list[int]:
        vals = []
        for part in range(self.n):
            for local in range(2 * self.n):
                which, r, c = self.input_source(part, local)
                vals.append(A[r][c] if which == "A" else B[r][c])
        return vals

    def output_entry(self, part: int, local: int) -> tuple[int, int]:
        g, bk = self.grid, self.block
        w1, w2, w3 = self.part_tuple(part)
        i, j = divmod(local, bk)
        return (w1 * bk + w2 * g + i, w3 * bk + j)

    def output_matrix(self, values: Sequence[int]) -> list[list[int]]:
        n = self.n
        C = [[None] * n for _ in range(n)]
        for part in range(n):
            for local in range(n):
                r, c = self.output_entry(part, local)
                C[r][c] = values[part * n + local]
        return C

    def owner_counts(self) -> list[list[int]]:
        """counts[src][dst]: input symbols moving src -> dst in the shuffle."""
        counts = [[0] * self.n for _ in range(self.n)]
        for part in range(self.n):
            for local in range(2 * self.n):
                _, r, _ = self.input_source(part, local)
                counts[r][part] += 1
        return counts


class FastLayout:
    """Index maps for the tensor circuit.

    Parts are 2-tuples (w0, w1) over a grid of side sqrt(n); part w's inputs
    are the (w0, w1) tile of every outer block of A and B. Tiles have side
    sqrt(n)/m where m is the tensor's block count.
    """

    def __init__(self, n: int, m: int):
        self.n = n
        self.m = m
        self.sub_grid = math.isqrt(n)
        if self.sub_grid * self.sub_grid != n:
            raise ValueError(f"fast layout requires square n; n={n} fails")
        if self.sub_grid % m:
            raise ValueError(
                f"fast layout requires the tile side sqrt(n)/m to be an integer; "
                f"n={n}, m={m} fails"
            )
        self.tile = self.sub_grid // m
        self.block = n // m  # outer block side, = tile * sub_grid

    def part_tuple(self, part: int) -> tuple[int, int]:
        return divmod(part, self.sub_grid)

    def input_source(self, part: int, local: int) -> tuple[str, int, int]:
        n, m, q, d = self.n, self.m, self.tile, self.block
        w0, w1 = self.part_tuple(part)
        which = "A" if local < n else "B"
        e = local % n
        i, rem = divmod(e, m * q * q)
        j, rem = divmod(rem, q * q)
        k, l = divmod(rem, q)
        return (which, i * d + w0 * q + k, j * d + w1 * q + l)

    def inputs_vector(self, A, B) -> list[int]:
        vals = []
        for part in range(self.n):
            for local in range(2 * self.n):
                which, r, c = self.input_source(part, local)
                vals.append(A[r][c] if which == "A" else B[r][c])
        return vals

    def output_entry(self, part: int, local: int) -> tuple[int, int]:
        m, q, d = self.m, self.tile, self.block
        w0, w1 = self.part_tuple(part)
        i, rem = divmod(local, m * q * q)
        j, rem = divmod(rem, q * q)
        a, b = divmod(rem, q)
        return (i * d + w0 * q + a, j * d + w1 * q + b)

    def output_matrix(self, values: Sequence[int]) -> list[list[int]]:
        n = self.n
        C = [[None] * n for _ in range(n)]
        for part in range(n):
            for local in range(n):
                r, c = self.output_entry(part, local)
                C[r][c] = values[part * n + local]
        return C

    def owner_counts(self) -> list[list[int]]:
        counts = [[0] * self.n for _ in range(self.n)]
        for part in range(self.n):
            for local in range(2 * self.n):
                _, r, _ = self.input_source(part, local)
                counts[r][part] += 1
        return counts


def distribute_matrix_inputs(A, B, layout) -> list[list[int]]:
    """Initial per-node holdings: node i starts with row i of A and row i of B."""
    n = layout.n
    if len(A) != n or len(B) != n:
        raise ValueError(f"expected {n} x {n} matrices")
    return [list(A[i]) + list(B[i]) for i in range(n)]


# ---------------------------------------------------------------------------
# circuit builders


def build_semiring_mm_circuit(n: int, semiring: Semiring,
                              group_size: int | None = None
                              ) -> tuple[LayeredCircuit, PartitionScheme]:
    """Five-layer product circuit over an n^(1/3)-cube of parts.

    Layers: inputs (2n gates per part), collected slices (one copy per needed
    sub-block), block products (dot gates), collected product rows, output
    sums. Only the two copy layers draw wires across parts. The semiring
    argument fixes the intended algebra; evaluation takes it again.
    """
    g = _exact_root(n, 3, "semiring circuit")
    bk = g * g  # block side n^(2/3)
    gs = group_size or n
    layout = SemiringLayout(n)

    def pid(w1, w2, w3):
        return (w1 * g + w2) * g + w3

    parts = [layout.part_tuple(w) for w in range(n)]

    layers = [[Gate(0, i, "input") for i in range(2 * n * n)]]
    part_of = [[i // (2 * n) for i in range(2 * n * n)]]

    # collect every sub-block slice the part's products will need
    sz = 2 * g * n
    layer = []
    for w1, w2, w3 in parts:
        for v in range(g):
            a_base = pid(w1, w2, v) * 2 * n
            for i in range(bk):
                for j in range(g):
                    layer.append(Gate(1, len(layer), "copy", [a_base + i * g + j]))
        for v in range(g):
            b_base = pid(w2, w3, v) * 2 * n + n
            for j in range(g):
                for k in range(bk):
                    layer.append(Gate(1, len(layer), "copy", [b_base + j * bk + k]))
    layers.append(layer)
    part_of.append([i // sz for i in range(n * sz)])

    # block product: entry (l, m) is a full row-by-column dot across slices
    sz = g * n
    layer = []
    for w in range(n):
        base = w * 2 * g * n
        for l in range(bk):
            for m_ in range(bk):
                a_wires = [base + v * n + l * g + j for v in range(g) for j in range(g)]
                b_wires = [base + g * n + v * n + j * bk + m_
                           for v in range(g) for j in range(g)]
                layer.append(Gate(2, len(layer), "dot", a_wires + b_wires))
    layers.append(layer)
    part_of.append([i // sz for i in range(n * sz)])

    # collect one row-strip of every product block sharing the outer indices
    layer = []
    for w1, w2, w3 in parts:
        for v in range(g):
            src_base = pid(w1, v, w3) * g * n
            for i in range(g):
                for j in range(bk):
                    layer.append(Gate(3, len(layer), "copy",
                                      [src_base + (w2 * g + i) * bk + j]))
    layers.append(layer)
    part_of.append([i // sz for i in range(n * sz)])

    # output: sum the strips over the shared index
    layer = []
    for w in range(n):
        base = w * g * n
        for i in range(g):
            for j in range(bk):
                layer.append(Gate(4, len(layer), "sum",
                                  [base + v * n + i * bk + j for v in range(g)]))
    layers.append(layer)
    part_of.append([i // n for i in range(n * n)])

    circuit = LayeredCircuit(n=n, b=1, layers=layers)
    scheme = PartitionScheme(n=n, group_size=gs, part_of=part_of)
    return circuit, scheme


def build_fast_mm_circuit(n: int, tensor: MMTensor,
                          group_size: int | None = None
                          ) -> tuple[LayeredCircuit, PartitionScheme]:
    """Six-layer tensor circuit over a sqrt(n)-square of parts.

    Layers: inputs, per-part linear combinations (both hat matrices, tiled),
    collected hats for the part's own product index, tile-major products,
    collected product tiles, output recombination. Requires n = tensor rank,
    square n, and m dividing sqrt(n); anything else is rejected rather than
    padded.
    """
    if n != tensor.rank:
        raise ValueError(f"need one part per bilinear product: n={n}, rank={tensor.rank}")
    m = tensor.m
    layout = FastLayout(n, m)  # validates sqrt(n) and the tile side
    s, q, d = layout.sub_grid, layout.tile, layout.block
    q2 = q * q
    gs = group_size or n

    layers = [[Gate(0, i, "input") for i in range(2 * n * n)]]
    part_of = [[i // (2 * n) for i in range(2 * n * n)]]

    # hat tiles: lincomb of the part's own input tiles, one pair per product
    sz = 2 * n * q2
    layer = []
    for w in range(n):
        base = w * 2 * n
        for which, coeff in (("A", tensor.alpha), ("B", tensor.beta)):
            off = 0 if which == "A" else n
            for k in range(n):
                coeffs = tuple(coeff[k][i][j] for i in range(m) for j in range(m))
                for a in range(q):
                    for b_ in range(q):
                        wires = [base + off + ((i * m + j) * q + a) * q + b_
                                 for i in range(m) for j in range(m)]
                        layer.append(Gate(1, len(layer), "lincomb", wires, coeffs=coeffs))
    layers.append(layer)
    part_of.append([i // sz for i in range(n * sz)])

    # collect both hat matrices for the part's product index, tile by tile
    layer = []
    for w in range(n):
        for off in (0, n * q2):
            for v in range(n):
                src = v * sz + off + w * q2
                for e in range(q2):
                    layer.append(Gate(2, len(layer), "copy", [src + e]))
    layers.append(layer)
    part_of.append([i // sz for i in range(n * sz)])

    # product of the two collected d x d matrices, stored tile-major so each
    # destination part's tile is contiguous
    sz = n * q2
    layer = []
    for w in range(n):
        base = w * 2 * n * q2
        gates = [None] * sz
        for x in range(d):
            for y in range(d):
                a_wires = [base + ((x // q) * s + t // q) * q2 + (x % q) * q + t % q
                           for t in range(d)]
                b_wires = [base + n * q2 + ((t // q) * s + y // q) * q2
                           + (t % q) * q + y % q
                           for t in range(d)]
                local = ((x // q) * s + (y // q)) * q2 + (x % q) * q + y % q
                gates[local] = Gate(3, w * sz + local, "dot", a_wires + b_wires)
        layer.extend(gates)
    layers.append(layer)
    part_of.append([i // sz for i in range(n * sz)])

    # collect this part's tile of every product
    layer = []
    for w in range(n):
        for v in range(n):
            src = v * sz + w * q2
            for e in range(q2):
                layer.append(Gate(4, len(layer), "copy", [src + e]))
    layers.append(layer)
    part_of.append([i // sz for i in range(n * sz)])

    # recombine: each output entry is a lincomb over all n products
    layer = []
    for w in range(n):
        base = w * n * q2
        for i in range(m):
            for j in range(m):
                coeffs = tuple(tensor.gamma[i][j])
                for a in range(q):
                    for b_ in range(q):
                        wires = [base + k * q2 + a * q + b_ for k in range(n)]
                        layer.append(Gate(5, len(layer), "lincomb", wires, coeffs=coeffs))
    layers.append(layer)
    part_of.append([i // n for i in range(n * n)])

    circuit = LayeredCircuit(n=n, b=1, layers=layers)
    scheme = PartitionScheme(n=n, group_size=gs, part_of=part_of)
    return circuit, scheme
