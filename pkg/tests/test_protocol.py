"""Checkpoint/recovery protocol tests: round accounting, attempts, decode."""

import random

import pytest

from faultyclique.circuit import Gate, LayeredCircuit, PartitionScheme, evaluate_layers
from faultyclique.compiler import (
    compile_clique,
    echo_algorithm,
    prefix_sum_algorithm,
    run_clique_directly,
    sum_broadcast_algorithm,
)
from faultyclique.engine import ProtocolError, ScriptedAdversary, SimConfig, make_adversary
from faultyclique.matmul import (
    FastLayout,
    SemiringLayout,
    build_fast_mm_circuit,
    build_semiring_mm_circuit,
    naive_mm,
    semiring_plus_times,
    trivial_tensor,
)
from faultyclique.protocol import (
    build_epoch_plan,
    check_batch_shrink,
    decode_output,
    plan_attempt,
    run_faulty,
    run_faulty_sublinear,
    run_nonfaulty,
)


def semiring_instance(n, seed=0):
    rng = random.Random(seed)
    alg = semiring_plus_times(n)
    p = int(alg.name.split("-")[-1])
    A = [[rng.randrange(p) for _ in range(n)] for _ in range(n)]
    B = [[rng.randrange(p) for _ in range(n)] for _ in range(n)]
    return alg, A, B


def origin_vector(layout):
    out = []
    for part in range(layout.n):
        for local in range(2 * layout.n):
            _, r, _ = layout.input_source(part, local)
            out.append(r)
    return out


def semiring_setup(n, seed=0, group_size=None):
    alg, A, B = semiring_instance(n, seed)
    circuit, scheme = build_semiring_mm_circuit(n, alg, group_size=group_size)
    layout = SemiringLayout(n)
    return alg, A, B, circuit, scheme, layout


def flat(res, n):
    return [v for w in range(n) for v in res.outputs[w]]


def run_semiring(n, c, adversary, seed=0, chi=1.0, group_size=None, **kw):
    alg, A, B, circuit, scheme, layout = semiring_setup(n, seed, group_size)
    cfg = SimConfig(n=n, c=c, chi=chi, seed=seed)
    adv = make_adversary(adversary, seed=seed) if isinstance(adversary, str) else adversary
    res = run_faulty(circuit, scheme, layout.inputs_vector(A, B), cfg, adv,
                     origin=origin_vector(layout), algebra=alg, **kw)
    C = layout.output_matrix(flat(res, n))
    return res, C == naive_mm(A, B, alg)


class TestEpochPlan:
    def test_semiring_plan_shape(self):
        alg = semiring_plus_times(8)
        circuit, scheme = build_semiring_mm_circuit(8, alg)
        plans = build_epoch_plan(circuit, scheme)
        assert [(p.fetch_layer, p.comm_layer, p.checkpoint_layer) for p in plans] == [
            (0, 1, 2), (2, 3, 4)]
        # layer-0 fetches are whole foreign blobs: max three distinct sources
        assert plans[0].max_pulls == 3
        assert plans[1].max_pulls == 1
        # a corner part needs fewer sources than a generic one
        src_counts = {len(plans[0].fetch_srcs[w]) for w in range(8)}
        assert max(src_counts) == 3 and min(src_counts) < 3

    def test_comm_free_first_epoch(self):
        alg = echo_algorithm(8)
        circuit, scheme = compile_clique(alg, 8)
        plans = build_epoch_plan(circuit, scheme)
        assert plans[0].comm_layer is None
        assert plans[0].bins == {}
        assert plans[0].max_pulls == 0
        assert plans[-1].checkpoint_layer == circuit.depth

    def test_uneven_parts_rejected(self):
        layers = [[Gate(0, i, "input") for i in range(4)],
                  [Gate(1, i, "copy", [i]) for i in range(4)]]
        circuit = LayeredCircuit(n=2, b=1, layers=layers)
        scheme = PartitionScheme(2, 2, [[0, 0, 0, 1], [0, 0, 0, 1]])
        with pytest.raises(ProtocolError, match="unevenly sized"):
            build_epoch_plan(circuit, scheme)


class TestPlanAttempt:
    def test_single_batch_takes_every_helper(self):
        att = plan_attempt(range(4, 12), [0, 1, 2], c=2)
        assert att.case == "batched" and att.batch_count == 1
        assert set(att.assignments) == set(range(4, 12))
        assert all(parts == (0, 1, 2) for parts in att.assignments.values())
        assert att.deferred == ()

    def test_batched_split_with_even_helpers(self):
        att = plan_attempt(range(20, 100), list(range(30)), c=2)
        assert att.case == "batched" and att.batch_count == 5
        by_batch = {}
        for u, parts in att.assignments.items():
            by_batch.setdefault(parts, []).append(u)
        assert sorted(len(b) for b in by_batch) == [6] * 5
        assert sorted(len(us) for us in by_batch.values()) == [16] * 5
        assert len(att.assignments) == 80

    def test_last_batch_absorbs_remainder(self):
        # 20 parts, c=2: 3 batches of 6 except the last takes 8 (<= 12)
        att = plan_attempt(range(40), list(range(100, 120)), c=2)
        assert att.batch_count == 3
        sizes = sorted({len(parts) for parts in att.assignments.values()})
        assert sizes == [6, 8]

    def test_one_to_one_defers_highest_parts(self):
        att = plan_attempt([5, 6, 7], [0, 1, 2, 3], c=2)
        assert att.case == "one-to-one"
        assert att.assignments == {5: (0,), 6: (1,), 7: (2,)}
        assert att.deferred == (3,)

    def test_degenerate_inputs(self):
        with pytest.raises(ValueError):
            plan_attempt([1, 2], [], c=2)
        with pytest.raises(ProtocolError):
            plan_attempt([], [0], c=2)


class TestBatchShrink:
    def test_shrink_property_holds_exhaustively(self):
        assert check_batch_shrink(60, (2, 3)) == []

    def test_collapsed_helper_groups_violate(self):
        # sanity that the enumeration bites: absurdly many batches leave
        # helper groups empty and the wipe bound collapses
        bad = check_batch_shrink(60, (2, 3), batch_count_fn=lambda p, c: p * p)
        assert len(bad) > 100


class TestFaultless:
    def test_exact_round_bill_n8(self):
        res, ok = run_semiring(8, 2, "none")
        assert ok
        led = res.ledger
        assert led.quiet_rounds == 4  # route_cost 2 + one c-window
        # collect 3 blobs, snapshot 2 pieces, collect 1 piece, snapshot 1
        assert led.protocol_rounds == (3 + 2 + 1 + 1) * 2
        assert led.decode_rounds == 2
        assert led.attempts_per_epoch == [0, 0]
        assert led.failures == []

    def test_wider_code_scales_windows(self):
        res, ok = run_semiring(8, 4, "none")
        assert ok
        assert res.ledger.quiet_rounds == 2 + 4
        assert res.ledger.protocol_rounds == (3 + 2 + 1 + 1) * 4

    def test_n64_bill(self):
        res, ok = run_semiring(64, 2, "none")
        assert ok
        # 7 blob sources, 4 pieces, 3 row pieces, 1 output piece
        assert res.ledger.protocol_rounds == (7 + 4 + 3 + 1) * 2

    def test_deterministic_replay(self):
        a, _ = run_semiring(8, 2, "random:0.2", seed=6, record_log=True)
        b, _ = run_semiring(8, 2, "random:0.2", seed=6, record_log=True)
        assert a.engine.log == b.engine.log
        assert a.ledger == b.ledger
        assert a.outputs == b.outputs


class TestAdversarial:
    @pytest.mark.parametrize("n,c,spec", [
        (8, 2, "greedy"),
        (8, 4, "greedy"),
        (8, 2, "random:0.3"),
        (27, 3, "greedy"),
        (27, 3, "random:0.1"),
        (64, 4, "greedy"),
    ])
    def test_full_budget_runs_stay_correct(self, n, c, spec):
        res, ok = run_semiring(n, c, spec, seed=2)
        assert ok
        cfg = SimConfig(n=n, c=c)
        assert len(res.ledger.failures) <= cfg.budget
        assert res.ledger.quiet_rounds == cfg.route_cost + c

    def test_checkpoint_burst_forces_attempts(self):
        adv = ScriptedAdversary(by_phase=[("epoch:0:checkpoint", {0, 1, 2, 3})])
        res, ok = run_semiring(8, 2, adv)
        assert ok
        assert res.ledger.attempts_per_epoch[0] >= 1
        assert {r for r, _ in res.ledger.failures} != set()

    def test_deferred_parts_finish_in_later_attempts(self):
        # five owners die at the snapshot, a sixth kill lands mid-attempt:
        # three helpers remain, so recovery needs one-to-one passes
        adv = ScriptedAdversary(by_phase=[
            ("epoch:0:checkpoint", {0, 1, 2, 3, 4}),
            ("epoch:0:attempt:1", {5}),
        ])
        res, ok = run_semiring(8, 4, adv)
        assert ok
        assert res.ledger.attempts_per_epoch[0] >= 2
        assert len(res.ledger.failures) == 6

    def test_owner_killed_after_snapshot_is_survivable(self):
        adv = ScriptedAdversary(by_phase=[("epoch:1:collect", {1, 2})])
        res, ok = run_semiring(8, 2, adv)
        assert ok

    def test_attempts_recorded_per_epoch(self):
        res, ok = run_semiring(27, 3, "greedy", seed=1)
        assert ok
        assert len(res.ledger.attempts_per_epoch) == 2
        assert res.ledger.max_attempts_per_epoch >= 1


class TestQuietInvariant:
    @pytest.mark.parametrize("n,c,chi,gs", [
        (8, 2, 1.0, None),
        (8, 4, 1.0, None),
        (27, 3, 1.0, None),
        (64, 2, 1.0, None),
        (64, 4, 1.0, None),
        (64, 2, 0.5, 8),
        (64, 4, 0.5, 8),
    ])
    def test_quiet_rounds_exact(self, n, c, chi, gs):
        res, ok = run_semiring(n, c, "none", chi=chi, group_size=gs)
        assert ok
        assert res.ledger.quiet_rounds == 2 + c

    def test_custom_route_cost(self):
        alg, A, B, circuit, scheme, layout = semiring_setup(8)
        cfg = SimConfig(n=8, c=2, route_cost=5)
        res = run_faulty(circuit, scheme, layout.inputs_vector(A, B), cfg,
                         origin=origin_vector(layout), algebra=alg)
        assert res.ledger.quiet_rounds == 5 + 2

    def test_local_inputs_still_pay_the_window(self):
        alg = echo_algorithm(8)
        circuit, scheme = compile_clique(alg, 8)
        inputs = list(range(8)) * 8
        res = run_faulty(circuit, scheme, inputs, SimConfig(n=8, c=2))
        assert res.ledger.quiet_rounds == 2 + 2


class TestSublinear:
    def survival_margin(self, res, cfg):
        """Min alive-per-group across every round, replayed from the log."""
        alive = [True] * cfg.n
        k = cfg.group_size // cfg.c
        margin = cfg.group_size
        for _, _, _, _, _, fresh in res.engine.log:
            for u in fresh:
                alive[u] = False
            for g in range(cfg.group_count):
                live = sum(1 for u in cfg.group_members(g) if alive[u])
                margin = min(margin, live - k)
        return margin

    @pytest.mark.parametrize("seed", range(10))
    def test_grouped_codewords_survive_random_faults(self, seed):
        alg, A, B, circuit, scheme, layout = semiring_setup(64, seed, group_size=8)
        cfg = SimConfig(n=64, c=2, chi=0.5, seed=seed)
        res = run_faulty_sublinear(
            circuit, scheme, layout.inputs_vector(A, B), cfg,
            make_adversary("random:0.9", seed=seed),
            origin=origin_vector(layout), algebra=alg, record_log=True)
        C = layout.output_matrix(flat(res, 64))
        assert C == naive_mm(A, B, alg)
        assert len(res.ledger.failures) == cfg.budget  # rate 0.9 spends it all
        assert self.survival_margin(res, cfg) >= 0

    def test_chi_one_is_plain_run(self):
        res_a, ok = run_semiring(8, 2, "greedy", seed=3)
        assert ok
        alg, A, B, circuit, scheme, layout = semiring_setup(8, 3)
        cfg = SimConfig(n=8, c=2, chi=1.0, seed=3)
        res_b = run_faulty_sublinear(
            circuit, scheme, layout.inputs_vector(A, B), cfg,
            make_adversary("greedy", seed=3),
            origin=origin_vector(layout), algebra=alg)
        assert res_a.outputs == res_b.outputs
        assert res_a.ledger == res_b.ledger


class TestPipeline:
    def test_noop_when_one_group(self):
        for spec in ("none", "greedy"):
            serial, ok_a = run_semiring(8, 2, spec, seed=1)
            packed, ok_b = run_semiring(8, 2, spec, seed=1, pipeline_collect=True)
            assert ok_a and ok_b
            assert serial.outputs == packed.outputs
            assert serial.ledger.protocol_rounds == packed.ledger.protocol_rounds

    def test_packs_distinct_groups(self):
        adv = lambda: ScriptedAdversary(by_phase=[("epoch:0:checkpoint", {0, 1, 2, 3})])
        serial, ok_a = run_semiring(64, 2, adv(), chi=0.5, group_size=8)
        packed, ok_b = run_semiring(64, 2, adv(), chi=0.5, group_size=8,
                                    pipeline_collect=True)
        assert ok_a and ok_b
        assert serial.outputs == packed.outputs
        assert packed.ledger.protocol_rounds < serial.ledger.protocol_rounds


class TestDecode:
    def test_collectors_pull_distinct_neighbors(self):
        res, ok = run_semiring(8, 2, "none")
        assert ok
        assert sorted(res.store.results) == list(range(8))
        for u, (target, vals) in res.store.results.items():
            assert target == (u + 1) % 8
            assert vals == res.outputs[target]
        assert res.ledger.decode_rounds == 2  # one c-window, no retries

    def test_budget_burst_during_decode(self):
        adv = ScriptedAdversary(by_phase=[("decode", {0, 2, 4, 6})])
        res, ok = run_semiring(8, 2, adv)
        assert ok
        survivors = set(res.engine.alive_ids())
        assert survivors == {1, 3, 5, 7}
        for u in survivors:
            target, vals = res.store.results[u]
            assert vals == res.outputs[target]
        # dead collectors' targets arrive in one retry wave
        assert res.ledger.decode_rounds == 4
        assert set(res.outputs) == set(range(8))

    def test_post_run_single_decode(self):
        res, ok = run_semiring(8, 2, "greedy")
        assert ok
        before = res.ledger.decode_rounds
        collector = res.engine.alive_ids()[0]
        vals = decode_output(res.runner, target=0, collector=collector)
        assert vals == res.outputs[0]
        assert res.ledger.decode_rounds == before + 2

    def test_dead_collector_rejected(self):
        res, ok = run_semiring(8, 2, "greedy")
        assert ok
        dead = next(u for u in range(8) if not res.engine.is_alive(u))
        with pytest.raises(ProtocolError, match="not alive"):
            decode_output(res.runner, target=0, collector=dead)


class TestNonfaulty:
    @pytest.mark.parametrize("n,c,rounds", [(8, 2, 8), (27, 3, 11), (64, 2, 14)])
    def test_uncoded_rounds_and_results(self, n, c, rounds):
        alg, A, B, circuit, scheme, layout = semiring_setup(n)
        cfg = SimConfig(n=n, c=c)
        res = run_nonfaulty(circuit, scheme, layout.inputs_vector(A, B), cfg,
                            origin=origin_vector(layout), algebra=alg)
        C = layout.output_matrix(flat(res, n))
        assert C == naive_mm(A, B, alg)
        assert res.ledger.protocol_rounds == rounds
        assert res.ledger.quiet_rounds == 0
        assert res.ledger.failures == []

    def test_scaling_band_is_tight(self):
        ratios = []
        for n, c in ((8, 2), (27, 3), (64, 2)):
            alg, A, B, circuit, scheme, layout = semiring_setup(n)
            res = run_nonfaulty(circuit, scheme, layout.inputs_vector(A, B),
                                SimConfig(n=n, c=c),
                                origin=origin_vector(layout), algebra=alg)
            ratios.append(res.ledger.protocol_rounds / round(n ** (1 / 3)))
        assert max(ratios) / min(ratios) <= 4.0

    def test_local_circuit_costs_nothing(self):
        n = 4
        layers = [[Gate(0, i, "input") for i in range(n)],
                  [Gate(1, i, "copy", [i]) for i in range(n)]]
        circuit = LayeredCircuit(n=n, b=1, layers=layers)
        scheme = PartitionScheme(n, n, [list(range(n)), list(range(n))])
        res = run_nonfaulty(circuit, scheme, [3, 1, 0, 2], SimConfig(n=n, c=2))
        assert res.ledger.total_rounds == 0
        assert [res.outputs[w][0] for w in range(n)] == [3, 1, 0, 2]


class TestCliqueWorkloads:
    @pytest.mark.parametrize("maker", [
        echo_algorithm, sum_broadcast_algorithm, prefix_sum_algorithm])
    @pytest.mark.parametrize("spec", ["none", "greedy", "random:0.2"])
    def test_compiled_algorithms_under_faults(self, maker, spec):
        n = 8
        alg = maker(n)
        circuit, scheme = compile_clique(alg, n)
        rng = random.Random(13)
        inputs = [rng.randrange(n) for _ in range(n * n)]
        want = run_clique_directly(alg, n, inputs)
        cfg = SimConfig(n=n, c=2, seed=4)
        res = run_faulty(circuit, scheme, inputs, cfg,
                         make_adversary(spec, seed=4))
        assert flat(res, n) == want
        assert len(res.ledger.attempts_per_epoch) == alg.rounds + 1


class TestFastWorkload:
    def test_trivial_tensor_under_faults(self):
        n, m = 64, 4
        tensor = trivial_tensor(m)
        alg = semiring_plus_times(n)
        p = int(alg.name.split("-")[-1])
        circuit, scheme = build_fast_mm_circuit(n, tensor)
        layout = FastLayout(n, m)
        rng = random.Random(21)
        A = [[rng.randrange(p) for _ in range(n)] for _ in range(n)]
        B = [[rng.randrange(p) for _ in range(n)] for _ in range(n)]
        res = run_faulty(circuit, scheme, layout.inputs_vector(A, B),
                         SimConfig(n=n, c=2, seed=8),
                         make_adversary("random:0.05", seed=8),
                         origin=origin_vector(layout), algebra=alg)
        C = layout.output_matrix(flat(res, n))
        assert C == naive_mm(A, B, alg)
        assert res.ledger.quiet_rounds == 4


class TestAccounting:
    def test_ledger_matches_traffic_log(self):
        res, ok = run_semiring(8, 2, "greedy", record_log=True)
        assert ok
        led = res.ledger
        assert led.sent_total == sum(row[3] for row in res.engine.log)
        assert led.recv_total == sum(row[4] for row in res.engine.log)
        assert led.total_rounds == len(res.engine.log)
        logged_fails = [(row[0], u) for row in res.engine.log for u in row[5]]
        assert logged_fails == led.failures

    def test_precomputed_values_replay_identically(self):
        alg, A, B, circuit, scheme, layout = semiring_setup(8)
        inputs = layout.inputs_vector(A, B)
        values = evaluate_layers(circuit, inputs, alg)
        cfg = SimConfig(n=8, c=2, seed=2)
        plain = run_faulty(circuit, scheme, inputs, cfg,
                           make_adversary("greedy", 2),
                           origin=origin_vector(layout), algebra=alg)
        shared = run_faulty(circuit, scheme, inputs, cfg,
                            make_adversary("greedy", 2),
                            origin=origin_vector(layout), values=values)
        assert plain.outputs == shared.outputs
        assert plain.ledger == shared.ledger
