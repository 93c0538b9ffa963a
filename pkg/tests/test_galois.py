"""Field, erasure-code, and state-packing tests.

The decode path is checked against an independent Lagrange interpolation
oracle written here from scratch, so the library and the oracle cannot share
a bug.
"""

import itertools
import random

import pytest

from faultyclique.galois import (
    Q,
    CodeParams,
    Shard,
    StateCodec,
    decode_state,
    encode_state,
    f_add,
    f_inv,
    f_mul,
    f_sub,
    rs_decode,
    rs_encode,
)


def _oracle_interpolate(points: list[tuple[int, int]], x: int) -> int:
    """Textbook Lagrange evaluation at x, straight from the basis definition."""
    acc = 0
    for j, (xj, yj) in enumerate(points):
        num, den = 1, 1
        for i, (xi, _) in enumerate(points):
            if i != j:
                num = (num * ((x - xi) % Q)) % Q
                den = (den * ((xj - xi) % Q)) % Q
        acc = (acc + yj * num * pow(den, Q - 2, Q)) % Q
    return acc


def test_field_ops_against_int_arithmetic():
    rng = random.Random(7)
    for _ in range(500):
        a, b = rng.randrange(Q), rng.randrange(Q)
        assert f_add(a, b) == (a + b) % Q
        assert f_sub(a, b) == (a - b) % Q
        assert f_mul(a, b) == (a * b) % Q
    assert f_mul(Q - 1, Q - 1) == pow(Q - 1, 2, Q)
    for a in (1, 2, Q - 1, 12345):
        assert f_mul(a, f_inv(a)) == 1
    with pytest.raises(ZeroDivisionError):
        f_inv(0)


def test_code_params_for_network():
    p = CodeParams.for_network(8, 2)
    assert (p.length, p.k, p.d, p.c) == (8, 4, 5, 2)
    assert CodeParams.for_network(64, 4).k == 16
    with pytest.raises(ValueError):
        CodeParams.for_network(8, 3)
    with pytest.raises(ValueError):
        CodeParams(9, 3, 6, 3)  # d wrong
    with pytest.raises(ValueError):
        CodeParams(8, 4, 5, 1)


def test_encode_is_systematic_and_matches_oracle():
    rng = random.Random(1)
    params = CodeParams.for_network(8, 2)
    for _ in range(50):
        msg = [rng.randrange(Q) for _ in range(params.k)]
        cw = rs_encode(msg, params)
        assert len(cw) == params.length
        assert cw[: params.k] == msg
        pts = list(enumerate(msg))
        for x in range(params.k, params.length):
            assert cw[x] == _oracle_interpolate(pts, x)


def test_exhaustive_erasure_patterns_n8():
    rng = random.Random(2)
    params = CodeParams.for_network(8, 2)
    msg = [rng.randrange(Q) for _ in range(4)]
    cw = rs_encode(msg, params)
    for keep in itertools.combinations(range(8), 4):
        shards = [(i, cw[i]) for i in keep]
        assert rs_decode(shards, params) == msg
        for x in range(8):
            assert _oracle_interpolate([(i, cw[i]) for i in keep], x) == cw[x]


def test_decode_errors():
    params = CodeParams.for_network(8, 2)
    cw = rs_encode([1, 2, 3, 4], params)
    with pytest.raises(ValueError):
        rs_decode([(0, cw[0]), (1, cw[1]), (2, cw[2])], params)
    with pytest.raises(ValueError):
        rs_decode([(0, cw[0]), (0, cw[0]), (1, cw[1]), (2, cw[2])], params)
    with pytest.raises(ValueError):
        rs_decode([(0, cw[0]), (1, cw[1]), (2, cw[2]), (9, 0)], params)


def test_minimum_distance_sampled():
    rng = random.Random(3)
    params = CodeParams.for_network(8, 2)
    for _ in range(1000):
        m1 = [rng.randrange(Q) for _ in range(4)]
        m2 = [rng.randrange(Q) for _ in range(4)]
        if m1 == m2:
            continue
        c1, c2 = rs_encode(m1, params), rs_encode(m2, params)
        diff = sum(a != b for a, b in zip(c1, c2))
        assert diff >= params.d


def test_packing_capacity_never_splits_symbols():
    # Packed values must stay below q even when every symbol maxes out.
    for n, b in [(8, 1), (16, 1), (27, 1), (64, 1), (64, 2), (8, 3)]:
        base = n**b
        codec = StateCodec(CodeParams.for_network(8, 2), base)
        s = codec.symbols_per_element
        assert base**s <= Q < base ** (s + 1)
        state = [base - 1] * (3 * s + 1)
        shards = codec.encode(state)
        assert codec.decode(shards[:4]) == state


def test_state_roundtrip_shapes_n8():
    params = CodeParams.for_network(8, 2)
    rng = random.Random(4)
    state = [rng.randrange(8) for _ in range(8)]
    shards = encode_state(state, params, 8)
    assert len(shards) == 8
    # 8 narrow symbols pack into one data element; header adds one more,
    # both fit a single k=4 instance, so each shard carries one element.
    assert all(len(sh.payload) == 1 for sh in shards)
    assert decode_state(shards[2:6], params, 8) == state

    assert encode_state([], params, 8) == [Shard(i, ()) for i in range(8)]
    assert decode_state(encode_state([], params, 8)[:4], params, 8) == []

    zeros = [0] * 16
    assert decode_state(encode_state(zeros, params, 8)[-4:], params, 8) == zeros


def test_state_roundtrip_random_lengths_and_bases():
    rng = random.Random(5)
    for n, c in [(8, 2), (8, 4), (27, 3), (64, 2), (64, 4)]:
        params = CodeParams.for_network(n, c)
        base = n
        for length in [1, 2, params.k, 3 * n + 1, 2 * n]:
            state = [rng.randrange(base) for _ in range(length)]
            shards = encode_state(state, params, base)
            keep = sorted(rng.sample(range(n), params.k))
            assert decode_state([shards[i] for i in keep], params, base) == state


def test_state_decode_rejects_mixed_widths():
    params = CodeParams.for_network(8, 2)
    a = encode_state([1, 2, 3], params, 8)
    b = encode_state(list(range(8)) * 12, params, 8)
    with pytest.raises(ValueError):
        decode_state([a[0], b[1], a[2], a[3]], params, 8)
