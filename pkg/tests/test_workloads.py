"""Workload catalog tests: instances, oracles, caching, rejections."""

import pytest

from faultyclique.circuit import evaluate_layers
from faultyclique.engine import SimConfig, make_adversary
from faultyclique.protocol import run_faulty
from faultyclique.workloads import (
    WORKLOADS,
    WorkloadError,
    cached_instance,
    flat_outputs,
    make_instance,
)

RUNNABLE = [("semiring-mm:plus-times", 8), ("semiring-mm:tropical", 8),
            ("fast-mm:trivial", 64), ("clique:echo", 8),
            ("clique:sum-broadcast", 8), ("clique:prefix-sum", 8)]


def test_registry_names():
    assert sorted(WORKLOADS) == [
        "clique:echo", "clique:prefix-sum", "clique:sum-broadcast",
        "fast-mm:strassen", "fast-mm:trivial",
        "semiring-mm:plus-times", "semiring-mm:tropical"]
    assert all(spec.summary for spec in WORKLOADS.values())


@pytest.mark.parametrize("name,n", RUNNABLE)
def test_oracle_check_accepts_true_outputs(name, n):
    inst, values = cached_instance(name, n, seed=3)
    per_part = {w: tuple(values[-1][g] for g, p
                         in enumerate(inst.scheme.part_of[-1]) if p == w)
                for w in range(n)}
    assert inst.check(per_part)
    # any single corrupted symbol must be caught
    w0 = next(iter(per_part))
    bad = dict(per_part)
    bad[w0] = ((per_part[w0][0] + 1) % n ** inst.b,) + per_part[w0][1:]
    assert not inst.check(bad)


@pytest.mark.parametrize("name,n", RUNNABLE[:3])
def test_symbols_fit_the_alphabet(name, n):
    inst, values = cached_instance(name, n)
    cap = n ** inst.b
    assert all(0 <= v < cap for layer in values for v in layer)


def test_instances_are_deterministic():
    a = make_instance("clique:prefix-sum", 8, seed=5)
    b = make_instance("clique:prefix-sum", 8, seed=5)
    c = make_instance("clique:prefix-sum", 8, seed=6)
    assert a.inputs == b.inputs
    assert a.inputs != c.inputs


def test_cache_shares_instance_and_values():
    a = cached_instance("semiring-mm:plus-times", 8, seed=2)
    b = cached_instance("semiring-mm:plus-times", 8, seed=2)
    assert a is b
    inst, values = a
    assert values == evaluate_layers(inst.circuit, inst.inputs, inst.algebra)
    other = cached_instance("semiring-mm:plus-times", 8, seed=2, group_size=4)
    assert other is not a  # grouping changes the scheme, so a separate entry


def test_matmul_origin_is_row_major():
    inst, _ = cached_instance("semiring-mm:plus-times", 8)
    assert len(inst.origin) == len(inst.circuit.layers[0]) == 2 * 8 * 8
    assert set(inst.origin) == set(range(8))
    assert all(inst.origin.count(r) == 16 for r in range(8))


def test_clique_inputs_born_in_place():
    inst, _ = cached_instance("clique:echo", 8)
    assert inst.origin is None
    assert inst.algebra is None


def test_end_to_end_under_faults():
    inst, values = cached_instance("semiring-mm:tropical", 8, seed=9)
    cfg = SimConfig(n=8, c=2, seed=9)
    res = run_faulty(inst.circuit, inst.scheme, inst.inputs, cfg,
                     make_adversary("greedy", 9), origin=inst.origin,
                     values=values)
    assert inst.check(res.outputs)


@pytest.mark.parametrize("name,n,hint", [
    ("semiring-mm:plus-times", 9, "perfect cube"),
    ("semiring-mm:tropical", 10, "perfect cube"),
    ("fast-mm:trivial", 8, "square"),
    ("fast-mm:trivial", 27, "square"),
    ("fast-mm:strassen", 7, "square"),
    ("fast-mm:strassen", 64, "rank=7"),
    ("clique:echo", 1, "n >= 2"),
])
def test_unsupported_sizes_rejected(name, n, hint):
    with pytest.raises(WorkloadError, match=hint):
        make_instance(name, n)


def test_unknown_name_lists_choices():
    with pytest.raises(WorkloadError, match="semiring-mm:plus-times"):
        make_instance("nope", 8)


def test_flat_outputs_requires_every_part():
    with pytest.raises(ValueError, match="missing parts \\[1\\]"):
        flat_outputs({0: (1, 2), 2: (3, 4)}, 3)
