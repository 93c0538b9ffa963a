"""Prime-field arithmetic and the systematic erasure code used for checkpoints.

The field is fixed to GF(q) with q = 2^61 - 1 (a Mersenne prime). One field
size covers every supported network: the code only needs q >= N distinct
evaluation points, and a single field element packs as many narrow data
symbols as its width allows.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

Q = (1 << 61) - 1


def f_add(a: int, b: int) -> int:
    s = a + b
    return s - Q if s >= Q else s


def f_sub(a: int, b: int) -> int:
    d = a - b
    return d + Q if d < 0 else d


def f_mul(a: int, b: int) -> int:
    # Mersenne fold: x mod (2^61 - 1) via hi/lo split, twice, then one correction.
    x = a * b
    x = (x >> 61) + (x & Q)
    x = (x >> 61) + (x & Q)
    return x - Q if x >= Q else x


def f_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(q)")
    return pow(a, Q - 2, Q)


def poly_eval(coeffs: Sequence[int], x: int) -> int:
    """Evaluate a polynomial given low-to-high coefficients, by Horner's rule."""
    acc = 0
    for c in reversed(coeffs):
        acc = f_add(f_mul(acc, x), c)
    return acc


@dataclass(frozen=True)
class CodeParams:
    """Shape of the [length, k, d] erasure code tied to fault parameter c.

    k = length / c message symbols, d = length - k + 1, so any k surviving
    codeword symbols recover the message while (c-1)/c of them may be erased.
    """

    length: int
    k: int
    d: int
    c: int

    def __post_init__(self) -> None:
        if self.c < 2:
            raise ValueError("fault parameter c must be at least 2")
        if self.length < self.c or self.length % self.c != 0:
            raise ValueError(f"c={self.c} must divide code length {self.length}")
        if self.k != self.length // self.c:
            raise ValueError("message length k must equal length/c")
        if self.d != self.length - self.k + 1:
            raise ValueError("distance must equal length - k + 1")
        if self.length > Q:
            raise ValueError("code length exceeds field size")

    @classmethod
    def for_network(cls, n: int, c: int) -> "CodeParams":
        """Code shape for an n-node network tolerating up to ((c-1)/c)n crashes."""
        if n % c != 0:
            raise ValueError(f"c={c} must divide n={n}")
        return cls(length=n, k=n // c, d=n - n // c + 1, c=c)


@lru_cache(maxsize=None)
def _inv_diff_weights(support: tuple[int, ...]) -> tuple[int, ...]:
    # Barycentric weights w_j = 1 / prod_{i != j} (x_j - x_i).
    ws = []
    for j, xj in enumerate(support):
        p = 1
        for i, xi in enumerate(support):
            if i != j:
                p = f_mul(p, f_sub(xj, xi))
        ws.append(f_inv(p))
    return tuple(ws)


@lru_cache(maxsize=None)
def _interp_row(support: tuple[int, ...], target: int) -> tuple[int, ...]:
    """Coefficients r with P(target) = sum r_j * P(support_j) for deg < len(support)."""
    if target in support:
        return tuple(1 if x == target else 0 for x in support)
    ws = _inv_diff_weights(support)
    full = 1
    for x in support:
        full = f_mul(full, f_sub(target, x))
    return tuple(
        f_mul(full, f_mul(w, f_inv(f_sub(target, x))))
        for x, w in zip(support, ws)
    )


@lru_cache(maxsize=None)
def _parity_rows(length: int, k: int) -> tuple[tuple[int, ...], ...]:
    support = tuple(range(k))
    return tuple(_interp_row(support, x) for x in range(k, length))


def rs_encode(message: Sequence[int], params: CodeParams) -> list[int]:
    """Systematically encode k field elements into a length-N codeword.

    The codeword is the degree-(k-1) interpolant of the message at points
    0..k-1, evaluated at points 0..N-1; positions 0..k-1 carry the message
    verbatim.
    """
    if len(message) != params.k:
        raise ValueError(f"message must have exactly {params.k} symbols")
    for v in message:
        if not 0 <= v < Q:
            raise ValueError("message symbol outside GF(q)")
    cw = list(message)
    for row in _parity_rows(params.length, params.k):
        acc = 0
        for r, m in zip(row, message):
            if m:
                acc = f_add(acc, f_mul(r, m))
        cw.append(acc)
    return cw


def rs_decode(shards: Iterable[tuple[int, int]], params: CodeParams) -> list[int]:
    """Recover the message from any >= k codeword symbols given as (index, value).

    Erasure-only decoding: indices must be distinct and in range; the lowest k
    indices are used.
    """
    got = sorted(shards)
    if len({i for i, _ in got}) != len(got):
        raise ValueError("duplicate shard indices")
    for i, _ in got:
        if not 0 <= i < params.length:
            raise ValueError(f"shard index {i} out of range")
    if len(got) < params.k:
        raise ValueError(f"need at least {params.k} shards, got {len(got)}")
    got = got[: params.k]
    support = tuple(i for i, _ in got)
    values = [v for _, v in got]
    out = []
    for target in range(params.k):
        row = _interp_row(support, target)
        acc = 0
        for r, v in zip(row, values):
            if v:
                acc = f_add(acc, f_mul(r, v))
        out.append(acc)
    return out


@dataclass(frozen=True)
class Shard:
    """One node's slice of an encoded state: position `index` of every instance."""

    index: int
    payload: tuple[int, ...]


class StateCodec:
    """Packs narrow data symbols into field elements and erasure-codes them.

    A state is a sequence of symbols with values below `symbol_base` (the
    alphabet of one b*log2(n)-bit message). Packing puts the maximal whole
    number of symbols into each field element, never splitting a symbol.
    Packed elements, prefixed with a one-element length header and zero-padded
    to a multiple of k, form W parallel code instances; shard i holds
    position i of every instance.
    """

    def __init__(self, params: CodeParams, symbol_base: int):
        if symbol_base < 2:
            raise ValueError("symbol base must be at least 2")
        if symbol_base > Q:
            raise ValueError("alphabet too wide for the field")
        self.params = params
        self.base = symbol_base
        cap, power = 0, 1
        while power * symbol_base <= Q:
            power *= symbol_base
            cap += 1
        self.symbols_per_element = cap

    def width(self, state_len: int) -> int:
        """Number of parallel code instances used for a state of this length."""
        if state_len == 0:
            return 0
        s = self.symbols_per_element
        elements = 1 + (state_len + s - 1) // s
        k = self.params.k
        return (elements + k - 1) // k

    def encode(self, state: Sequence[int]) -> list[Shard]:
        n = self.params.length
        if not state:
            return [Shard(i, ()) for i in range(n)]
        s, base = self.symbols_per_element, self.base
        packed = [len(state)]
        for off in range(0, len(state), s):
            chunk = state[off : off + s]
            val = 0
            for sym in reversed(chunk):
                if not 0 <= sym < base:
                    raise ValueError(f"state symbol {sym} outside alphabet [0,{base})")
                val = val * base + sym
            packed.append(val)
        k = self.params.k
        if len(packed) % k:
            packed.extend([0] * (k - len(packed) % k))
        width = len(packed) // k
        codewords = [rs_encode(packed[j * k : (j + 1) * k], self.params) for j in range(width)]
        return [Shard(i, tuple(cw[i] for cw in codewords)) for i in range(n)]

    def decode(self, shards: Sequence[Shard]) -> list[int]:
        if len(shards) < self.params.k:
            raise ValueError(f"need at least {self.params.k} shards")
        widths = {len(sh.payload) for sh in shards}
        if len(widths) != 1:
            raise ValueError("inconsistent shard payload widths")
        width = widths.pop()
        if width == 0:
            return []
        packed: list[int] = []
        for j in range(width):
            packed.extend(rs_decode([(sh.index, sh.payload[j]) for sh in shards], self.params))
        count = packed[0]
        s, base = self.symbols_per_element, self.base
        if count > (len(packed) - 1) * s:
            raise ValueError("corrupt length header")
        out: list[int] = []
        for val in packed[1:]:
            for _ in range(s):
                out.append(val % base)
                val //= base
        return out[:count]


@lru_cache(maxsize=None)
def _codec(params: CodeParams, symbol_base: int) -> StateCodec:
    return StateCodec(params, symbol_base)


def encode_state(state: Sequence[int], params: CodeParams, symbol_base: int) -> list[Shard]:
    """Erasure-code a state of narrow symbols into one shard per node."""
    return _codec(params, symbol_base).encode(tuple(state))


def decode_state(shards: Sequence[Shard], params: CodeParams, symbol_base: int) -> list[int]:
    """Recover a state from any k of its shards."""
    return _codec(params, symbol_base).decode(shards)
