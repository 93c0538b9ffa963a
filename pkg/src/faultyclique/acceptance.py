"""Release gate: the eleven checks this package must pass, runnable standalone.

Each criterion is a function returning a CriterionResult; run_all() executes
them in order and reports one line per criterion. The CLI `verify` command
and the acceptance test module both drive this code, so the gate is identical
everywhere.
"""

from __future__ import annotations

import itertools
import math
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .circuit import analyze_partition, evaluate
from .compiler import (
    compile_clique,
    echo_algorithm,
    prefix_sum_algorithm,
    run_clique_directly,
    sum_broadcast_algorithm,
)
from .engine import ScriptedAdversary, SimConfig, make_adversary
from .galois import CodeParams, decode_state, encode_state
from .matmul import (
    apply_tensor,
    naive_mm,
    semiring_plus_times,
    strassen_tensor,
    trivial_tensor,
)
from .protocol import check_batch_shrink, run_faulty, run_nonfaulty
from .workloads import cached_instance


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str

    @property
    def line(self) -> str:
        word = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} {word}  {self.title}: {self.detail}"


@dataclass
class RunRecord:
    n: int
    c: int
    adversary: str
    correct: bool
    quiet_rounds: int
    protocol_rounds: int
    max_attempts: int
    route_cost: int


# (n, c) pairs where c divides the group size; the fault-tolerance knob c
# sweeps {2,3,4} and n sweeps the perfect cubes {8,27,64}
FAULT_COMBOS = ((8, 2), (8, 4), (27, 3), (64, 2), (64, 4))


def _burst_scripts(n: int, budget: int) -> list[tuple[str, ScriptedAdversary]]:
    """Three hand-built worst cases: kill owners the moment they start
    pushing a snapshot (early and late epoch), and a drip that hits the
    collect, the first attempt, and the final checkpoint."""
    third = budget // 3
    drip = [("epoch:0:collect", set(range(third))),
            ("epoch:0:attempt:1", set(range(third, 2 * third))),
            ("epoch:1:checkpoint", set(range(2 * third, budget)))]
    return [
        ("script:first-checkpoint-burst",
         ScriptedAdversary(by_phase=[("epoch:0:checkpoint", set(range(budget)))])),
        ("script:drip", ScriptedAdversary(by_phase=drip)),
        ("script:last-checkpoint-burst",
         ScriptedAdversary(by_phase=[("epoch:1:checkpoint", set(range(budget)))])),
    ]


class Suite:
    """Shared context: the criterion-4 run matrix feeds criteria 5, 6, 8."""

    def __init__(self):
        self.records: list[RunRecord] = []
        self._matrix: Optional[list[RunRecord]] = None
        self.matrix_seconds = 0.0

    def run_one(self, name: str, n: int, c: int, adversary, label: str,
                chi: float = 1.0, seed: int = 0) -> RunRecord:
        cfg = SimConfig(n=n, c=c, chi=chi, seed=seed)
        inst, values = cached_instance(name, n, seed=seed,
                                       group_size=cfg.group_size)
        res = run_faulty(inst.circuit, inst.scheme, inst.inputs, cfg,
                         adversary, origin=inst.origin, values=values)
        rec = RunRecord(n, c, label, inst.check(res.outputs),
                        res.ledger.quiet_rounds, res.ledger.protocol_rounds,
                        res.ledger.max_attempts_per_epoch, cfg.route_cost)
        self.records.append(rec)
        return rec

    def fault_matrix(self) -> list[RunRecord]:
        if self._matrix is not None:
            return self._matrix
        start = time.perf_counter()
        out = []
        name = "semiring-mm:plus-times"
        for n, c in FAULT_COMBOS:
            budget = SimConfig(n=n, c=c).budget
            runs = [("none", make_adversary("none"))]
            runs += [(f"random:0.9/{s}", make_adversary("random:0.9", seed=s))
                     for s in range(10)]
            runs.append(("greedy", make_adversary("greedy")))
            runs += _burst_scripts(n, budget)
            for label, adv in runs:
                out.append(self.run_one(name, n, c, adv, label))
        self.matrix_seconds = time.perf_counter() - start
        self._matrix = out
        return out


def criterion_1_mds_code(suite: Suite) -> CriterionResult:
    start = time.perf_counter()
    rng = random.Random("acceptance:mds")
    base = 64
    checked = 0
    for n_code, c in itertools.product((8, 16, 64), (2, 4)):
        k = n_code // c
        params = CodeParams(n_code, k, n_code - k + 1, c)
        for _ in range(100):
            msg = [rng.randrange(base) for _ in range(rng.randrange(1, 121))]
            shards = encode_state(msg, params, base)
            if n_code == 8:
                subsets = itertools.combinations(range(n_code), k)
            else:
                subsets = [tuple(sorted(rng.sample(range(n_code), k)))
                           for _ in range(2)]
            for subset in subsets:
                got = decode_state([shards[i] for i in subset], params, base)
                checked += 1
                if got != msg:
                    return CriterionResult(
                        1, "MDS code suite", False,
                        f"subset {subset} of [{n_code},{k}] failed recovery")
    took = time.perf_counter() - start
    return CriterionResult(
        1, "MDS code suite", took < 10.0,
        f"{checked} subset recoveries exact in {took:.1f}s (limit 10s)")


def criterion_2_tensor_identity(suite: Suite) -> CriterionResult:
    ring = semiring_plus_times(997)  # arithmetic mod the prime 997
    rng = random.Random("acceptance:tensor")
    cases = ((strassen_tensor(), 1000), (trivial_tensor(4), 100))
    total = 0
    for tensor, reps in cases:
        m = tensor.m
        for _ in range(reps):
            X = [[rng.randrange(997) for _ in range(m)] for _ in range(m)]
            Y = [[rng.randrange(997) for _ in range(m)] for _ in range(m)]
            total += 1
            if apply_tensor(tensor, X, Y, ring) != naive_mm(X, Y, ring):
                return CriterionResult(
                    2, "tensor identity", False,
                    f"{tensor.name} tensor disagrees with the naive product")
    return CriterionResult(2, "tensor identity", True,
                           f"{total} random pairs, zero mismatches")


def criterion_3_compiler_equivalence(suite: Suite) -> CriterionResult:
    rng = random.Random("acceptance:compiler")
    makers = (echo_algorithm, sum_broadcast_algorithm, prefix_sum_algorithm)
    checked = 0
    for maker, n in itertools.product(makers, (4, 8)):
        alg = maker(n)
        circuit, _ = compile_clique(alg, n)
        if circuit.depth != 2 * alg.rounds + 1:
            return CriterionResult(
                3, "compiler equivalence", False,
                f"{alg.name} n={n}: depth {circuit.depth} != {2 * alg.rounds + 1}")
        for _ in range(20):
            inputs = [rng.randrange(n) for _ in range(n * n)]
            checked += 1
            if evaluate(circuit, inputs) != run_clique_directly(alg, n, inputs):
                return CriterionResult(
                    3, "compiler equivalence", False,
                    f"{alg.name} n={n} diverges from direct execution")
    return CriterionResult(
        3, "compiler equivalence", True,
        f"{checked} random inputs across 3 algorithms, depth 2T+1 exact")


def criterion_4_semiring_under_faults(suite: Suite) -> CriterionResult:
    matrix = suite.fault_matrix()
    bad = [r for r in matrix if not r.correct]
    took = suite.matrix_seconds
    if bad:
        worst = bad[0]
        return CriterionResult(
            4, "semiring MM correct under faults", False,
            f"{len(bad)}/{len(matrix)} runs wrong, first: "
            f"n={worst.n} c={worst.c} {worst.adversary}")
    return CriterionResult(
        4, "semiring MM correct under faults", took < 300.0,
        f"{len(matrix)}/{len(matrix)} runs correct in {took:.0f}s (limit 300s)")


def criterion_5_round_scaling(suite: Suite) -> CriterionResult:
    matrix = suite.fault_matrix()
    worst: dict = {}
    for r in matrix:
        key = (r.n, r.c)
        worst[key] = max(worst.get(key, 0), r.protocol_rounds)
    ratio = {key: rounds / (key[1] ** 2 * key[0] ** (1 / 3) * math.log2(key[0]))
             for key, rounds in worst.items()}
    bands = []
    for c in (2, 4):  # across n at fixed c
        vals = [v for (n_, c_), v in ratio.items() if c_ == c]
        bands.append(max(vals) / min(vals))
    for n in (8, 64):  # across c at fixed n
        vals = [v for (n_, c_), v in ratio.items() if n_ == n]
        bands.append(max(vals) / min(vals))
    spread = max(bands)
    return CriterionResult(
        5, "round scaling within constant factor", spread <= 4.0,
        f"worst-adversary ratio bands max {spread:.2f}x (limit 4x)")


def criterion_6_quiet_rounds(suite: Suite) -> CriterionResult:
    suite.fault_matrix()
    bad = [r for r in suite.records
           if r.quiet_rounds != r.route_cost + r.c]
    if bad:
        r = bad[0]
        return CriterionResult(
            6, "quiet rounds exact", False,
            f"n={r.n} c={r.c} {r.adversary}: quiet={r.quiet_rounds}, "
            f"want {r.route_cost + r.c}")
    return CriterionResult(
        6, "quiet rounds exact", True,
        f"quiet = route_cost + c in all {len(suite.records)} fault runs")


def criterion_7_decodability(suite: Suite) -> CriterionResult:
    n, c = 8, 2
    rng = random.Random("acceptance:decode")
    seen: set = set()
    while len(seen) < 20:
        seen.add(tuple(sorted(rng.sample(range(n), 4))))
    for victims in sorted(seen):
        adv = ScriptedAdversary(by_phase=[("decode", set(victims))])
        cfg = SimConfig(n=n, c=c)
        inst, values = cached_instance("semiring-mm:plus-times", n)
        res = run_faulty(inst.circuit, inst.scheme, inst.inputs, cfg, adv,
                         origin=inst.origin, values=values)
        suite.records.append(RunRecord(
            n, c, f"script:decode-burst{victims}", inst.check(res.outputs),
            res.ledger.quiet_rounds, res.ledger.protocol_rounds,
            res.ledger.max_attempts_per_epoch, cfg.route_cost))
        survivors = set(res.engine.alive_ids())
        if survivors != set(range(n)) - set(victims):
            return CriterionResult(7, "output decodability", False,
                                   f"burst {victims} not applied as scripted")
        for u in survivors:
            target, vals = res.store.results[u]
            if vals != res.outputs[target]:
                return CriterionResult(
                    7, "output decodability", False,
                    f"collector {u} decoded wrong values under burst {victims}")
        if not inst.check(res.outputs):
            return CriterionResult(7, "output decodability", False,
                                   f"outputs wrong under burst {victims}")
        if res.ledger.decode_rounds > 2 * c:
            return CriterionResult(
                7, "output decodability", False,
                f"burst {victims}: decode took {res.ledger.decode_rounds} "
                f"rounds, limit {2 * c}")
    return CriterionResult(
        7, "output decodability", True,
        f"20 full-budget decode bursts at n={n}: survivors all correct "
        f"within {2 * c} rounds")


def criterion_8_attempt_bound(suite: Suite) -> CriterionResult:
    matrix = suite.fault_matrix()
    for r in matrix:
        cap = r.c + 4 * math.log2(r.n)
        if r.max_attempts > cap:
            return CriterionResult(
                8, "attempt bound", False,
                f"n={r.n} c={r.c} {r.adversary}: {r.max_attempts} attempts "
                f"> {cap:.1f}")
    violations = check_batch_shrink(60, (2, 3))
    if violations:
        return CriterionResult(
            8, "attempt bound", False,
            f"batch-shrink property violated at {violations[0]}")
    peak = max(r.max_attempts for r in matrix)
    return CriterionResult(
        8, "attempt bound", True,
        f"peak {peak} attempts/epoch within c + 4*log2(n); batch-shrink "
        f"enumeration clean up to n=60")


def criterion_9_sublinear(suite: Suite) -> CriterionResult:
    n, c, chi = 64, 2, 0.5
    for seed in range(10):
        cfg = SimConfig(n=n, c=c, chi=chi, seed=seed)
        inst, values = cached_instance("semiring-mm:plus-times", n, seed=seed,
                                       group_size=cfg.group_size)
        res = run_faulty(inst.circuit, inst.scheme, inst.inputs, cfg,
                         make_adversary("random:0.9", seed=seed),
                         origin=inst.origin, values=values, record_log=True)
        suite.records.append(RunRecord(
            n, c, f"random:0.9/{seed}", inst.check(res.outputs),
            res.ledger.quiet_rounds, res.ledger.protocol_rounds,
            res.ledger.max_attempts_per_epoch, cfg.route_cost))
        if not inst.check(res.outputs):
            return CriterionResult(9, "sublinear fault variant", False,
                                   f"seed {seed}: wrong outputs")
        # replay the log round by round; every group must keep k shards
        alive = [True] * n
        k = cfg.group_size // c
        for _, _, _, _, _, fresh in res.engine.log:
            for u in fresh:
                alive[u] = False
            for g in range(cfg.group_count):
                live = sum(1 for u in cfg.group_members(g) if alive[u])
                if live < k:
                    return CriterionResult(
                        9, "sublinear fault variant", False,
                        f"seed {seed}: group {g} fell below {k} alive shards")
    return CriterionResult(
        9, "sublinear fault variant", True,
        f"10 full-budget runs at n={n} chi={chi} correct; every group kept "
        f">= {k} shards each round")


def criterion_10_nonfaulty_runner(suite: Suite) -> CriterionResult:
    ratios = []
    for n, c in ((8, 2), (27, 3), (64, 2)):
        cfg = SimConfig(n=n, c=c)
        inst, values = cached_instance("semiring-mm:plus-times", n)
        res = run_nonfaulty(inst.circuit, inst.scheme, inst.inputs, cfg,
                            origin=inst.origin, values=values)
        if not inst.check(res.outputs):
            return CriterionResult(10, "non-faulty runner", False,
                                   f"n={n}: wrong outputs")
        ratios.append(res.ledger.protocol_rounds / n ** (1 / 3))
    band = max(ratios) / min(ratios)
    return CriterionResult(
        10, "non-faulty runner", band <= 4.0,
        f"correct at n=8/27/64; rounds per n^(1/3) band {band:.2f}x (limit 4x)")


def criterion_11_fast_mm(suite: Suite) -> CriterionResult:
    n, c = 64, 2
    budget = SimConfig(n=n, c=c).budget
    adversaries = [
        ("greedy", make_adversary("greedy")),
        ("script:first-checkpoint-burst",
         ScriptedAdversary(by_phase=[("epoch:0:checkpoint",
                                      set(range(budget)))])),
    ]
    for label, adv in adversaries:
        rec = suite.run_one("fast-mm:trivial", n, c, adv, label)
        if not rec.correct:
            return CriterionResult(11, "fast MM", False,
                                   f"wrong outputs under {label}")
    inst, _ = cached_instance("fast-mm:trivial", n)
    report = analyze_partition(inst.circuit, inst.scheme)
    b1, b3 = report.boundaries[1], report.boundaries[3]
    # closed-form cross-part wire counts of the two communication layers:
    # every part hears from all n parts, 2*n^(1-2/sigma) then n^(1-2/sigma)
    # wires from each foreign one
    forms = (set(b1.src_parts.values()) == {n}
             and set(b3.src_parts.values()) == {n}
             and set(b1.in_cross.values()) == {(n - 1) * 8}
             and set(b3.in_cross.values()) == {(n - 1) * 4})
    if not forms:
        return CriterionResult(11, "fast MM", False,
                               "communication-layer wire counts off closed form")
    return CriterionResult(
        11, "fast MM", True,
        "correct under greedy and burst faults; both communication layers "
        "match closed-form wire counts")


CRITERIA: tuple[tuple[int, Callable[[Suite], CriterionResult]], ...] = (
    (1, criterion_1_mds_code),
    (2, criterion_2_tensor_identity),
    (3, criterion_3_compiler_equivalence),
    (4, criterion_4_semiring_under_faults),
    (5, criterion_5_round_scaling),
    (6, criterion_6_quiet_rounds),
    (7, criterion_7_decodability),
    (8, criterion_8_attempt_bound),
    (9, criterion_9_sublinear),
    (10, criterion_10_nonfaulty_runner),
    (11, criterion_11_fast_mm),
)


def run_all(report: Optional[Callable[[str], None]] = None
            ) -> list[CriterionResult]:
    """Run every criterion in order; criterion 6 must come after the other
    fault-running criteria so its quiet-round sweep covers their ledgers."""
    suite = Suite()
    order = [num for num, _ in CRITERIA if num != 6] + [6]
    by_num = dict(CRITERIA)
    results = {}
    for num in order:
        res = by_num[num](suite)
        results[num] = res
        if report is not None:
            report(res.line)
    return [results[num] for num, _ in CRITERIA]
