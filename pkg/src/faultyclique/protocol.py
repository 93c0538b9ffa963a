"""Crash-tolerant execution of partitioned layered circuits.

The faulty runner walks a circuit epoch by epoch: pull the foreign pieces the
next communication layer needs from the previous snapshot, recompute locally,
snapshot the new state as erasure-coded pieces, then re-simulate whatever the
crashes knocked out (attempts) until the epoch's bingo card is empty. The
non-faulty runner is the uncoded baseline over the same circuit.

Values never travel through the engine (it only meters rounds and traffic);
they travel through Checkpoint shards. Every decode is replayed against the
reference evaluation of the circuit, so a codec or planning bug fails loudly
instead of silently producing a correct-looking run.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .circuit import (
    LayeredCircuit,
    PartitionScheme,
    analyze_partition,
    boundary_bins,
    classify_layers,
    evaluate_layers,
)
from .engine import Adversary, Engine, ProtocolError, RoundLedger, SimConfig
from .galois import CodeParams, StateCodec


@dataclass
class Checkpoint:
    """One erasure-coded snapshot unit: a codeword spread over one group.

    Presence in the store means the distribution window completed; partially
    sent codewords are discarded wholesale. Holders that die later are
    filtered at decode time, never removed here.
    """

    key: tuple
    group: int
    shards: dict  # holder node -> Shard


class BingoCard:
    """The parts whose current-epoch snapshot is still incomplete."""

    __slots__ = ("missing",)

    def __init__(self, parts):
        self.missing = set(parts)

    def mark_done(self, part: int):
        self.missing.discard(part)

    @property
    def empty(self) -> bool:
        return not self.missing

    def __len__(self):
        return len(self.missing)

    def __iter__(self):
        return iter(sorted(self.missing))


@dataclass(frozen=True)
class AttemptState:
    """One re-simulation pass over missing parts.

    one-to-one: fewer helpers than parts, so sorted helpers take sorted parts
    1:1 and the surplus parts wait. batched: parts are grouped into
    batch_count batches; each batch gets a disjoint group of helpers, every
    one of which re-simulates the whole batch sequentially.
    """

    index: int
    case: str  # "one-to-one" | "batched"
    assignments: dict  # node -> tuple of parts, in processing order
    deferred: tuple
    batch_count: int


def plan_attempt(alive_ids, missing_parts, c: int, index: int = 1) -> AttemptState:
    """Assign alive nodes to missing parts for one attempt."""
    helpers = sorted(alive_ids)
    parts = sorted(missing_parts)
    if not parts:
        raise ValueError("no missing parts to plan for")
    if not helpers:
        raise ProtocolError("no alive nodes left to run an attempt")
    if len(parts) > len(helpers):
        taken = parts[: len(helpers)]
        assignments = {u: (v,) for u, v in zip(helpers, taken)}
        return AttemptState(index, "one-to-one", assignments,
                            tuple(parts[len(helpers):]), 0)
    batch_count = max(len(parts) // (3 * c), 1)
    step = 3 * c
    batches = [parts[j * step: (j + 1) * step] for j in range(batch_count - 1)]
    batches.append(parts[(batch_count - 1) * step:])  # last batch <= 6c parts
    mult = len(helpers) // batch_count
    assignments = {}
    for j, batch in enumerate(batches):
        for u in helpers[j * mult: (j + 1) * mult]:
            assignments[u] = tuple(batch)
    return AttemptState(index, "batched", assignments, (), batch_count)


def worst_case_missing_batches(alive: int, missing: int, failures: int, c: int,
                               batch_count_fn=None) -> int:
    """Batches an adversary can fully wipe with `failures` kills during one
    batched attempt (a batch survives unless its whole helper group dies)."""
    fn = batch_count_fn or (lambda parts, cc: max(parts // (3 * cc), 1))
    bc = fn(missing, c)
    mult = alive // bc
    if mult == 0:
        return bc
    return min(bc, failures // mult)


def check_batch_shrink(n_max: int = 60, cs=(2, 3), batch_count_fn=None) -> list:
    """Enumerate batched-attempt shapes and check the shrink property: with F
    nodes already failed, F^c >= 3c parts missing, and fewer than half the
    leftover fault budget spent during the attempt, at most
    ceil(batch_count/4) batches can be left missing. Returns the violating
    tuples; empty means the property holds for every shape in range."""
    violations = []
    for c in cs:
        for n in range(2 * c, n_max + 1, c):
            budget = (c - 1) * n // c
            for f_now in range(1, budget + 1):
                alive = n - f_now
                remain = budget - f_now
                f_prime = (remain - 1) // 2  # largest value < remain/2
                if f_prime < 0:
                    continue
                fn = batch_count_fn or (lambda p, cc: max(p // (3 * cc), 1))
                for fc in range(3 * c, min(f_now, alive) + 1):
                    bc = fn(fc, c)
                    worst = worst_case_missing_batches(
                        alive, fc, f_prime, c, batch_count_fn)
                    if worst > math.ceil(bc / 4):
                        violations.append((n, c, f_now, fc, f_prime, worst, bc))
    return violations


@dataclass(frozen=True)
class EpochPlan:
    """Static per-epoch pull/push structure derived from the partition."""

    index: int
    fetch_layer: int
    comm_layer: Optional[int]
    compute_layers: tuple
    checkpoint_layer: int
    bins: dict  # dest part -> tuple of (src part, piece) at the fetch layer
    fetch_srcs: dict  # dest part -> tuple of distinct foreign src parts
    max_pulls: int  # padding width so attempt schedules stay aligned


def build_epoch_plan(circuit: LayeredCircuit, scheme: PartitionScheme) -> list:
    """Chain the circuit's epochs and precompute each one's transfer shape."""
    _, epochs = classify_layers(circuit, scheme)
    if not epochs:
        raise ProtocolError("circuit has no computation layers to run")
    n = scheme.n
    plans = []
    prev = 0
    for idx, ep in enumerate(epochs):
        if ep.fetch_layer != prev:
            raise ProtocolError(
                f"epoch {idx} fetches layer {ep.fetch_layer}, but the previous "
                f"snapshot is at layer {prev}"
            )
        prev = ep.checkpoint_layer
        if ep.comm_layer is None:
            bins = {}
        else:
            bins = boundary_bins(circuit, scheme, ep.fetch_layer)
        srcs = {w: tuple(sorted({s for s, _ in bins.get(w, ())}))
                for w in range(n)}
        if ep.fetch_layer == 0:
            # layer 0 is snapshotted as whole per-part blobs, so a foreign
            # part's data is pulled once however many pieces of it feed us
            max_pulls = max((len(srcs[w]) for w in range(n)), default=0)
        else:
            max_pulls = max((len(bins.get(w, ())) for w in range(n)), default=0)
        plans.append(EpochPlan(
            index=idx,
            fetch_layer=ep.fetch_layer,
            comm_layer=ep.comm_layer,
            compute_layers=tuple(ep.compute_layers),
            checkpoint_layer=ep.checkpoint_layer,
            bins={w: tuple(v) for w, v in bins.items()},
            fetch_srcs=srcs,
            max_pulls=max_pulls,
        ))
    if plans[-1].checkpoint_layer != circuit.depth:
        raise ProtocolError("the last epoch must snapshot the output layer")
    for layer in range(circuit.depth + 1):
        sizes = {len(scheme.part_gates(layer, w)) for w in range(n)}
        if len(sizes) != 1:
            raise ProtocolError(
                f"layer {layer} parts are unevenly sized {sorted(sizes)}; "
                "lockstep scheduling needs uniform parts"
            )
    return plans


@dataclass
class OutputStore:
    """What the final decode recovered.

    results: collector node -> (target part, decoded output values); only
    collectors alive through their first decode window appear. parts: the
    merged per-part outputs, complete even when some collectors died (their
    targets are re-pulled by survivors in retry waves).
    """

    results: dict
    parts: dict


@dataclass
class RunResult:
    store: OutputStore
    ledger: RoundLedger
    engine: Engine
    runner: "FaultyRun"

    @property
    def outputs(self) -> dict:
        return self.store.parts


class FaultyRun:
    """One crash-tolerant execution; run() drives it end to end."""

    def __init__(self, circuit: LayeredCircuit, scheme: PartitionScheme,
                 inputs: Sequence[int], origin: Optional[Sequence[int]],
                 cfg: SimConfig, adversary: Optional[Adversary] = None,
                 algebra=None, pipeline_collect: bool = False,
                 record_log: bool = False, values: Optional[list] = None):
        if circuit.n != cfg.n or scheme.n != cfg.n:
            raise ValueError("circuit, scheme and config disagree on n")
        if circuit.alphabet_size != cfg.alphabet:
            raise ValueError("circuit alphabet does not match n^b")
        if scheme.group_size != cfg.group_size:
            raise ValueError(
                f"scheme pieces are sized for groups of {scheme.group_size}, "
                f"config wants {cfg.group_size}"
            )
        self.circuit = circuit
        self.scheme = scheme
        self.cfg = cfg
        self.engine = Engine(cfg, adversary, record_log=record_log)
        self.pipeline = pipeline_collect
        self.values = values if values is not None else evaluate_layers(
            circuit, inputs, algebra)
        self.origin = list(origin) if origin is not None else None
        gs, c = cfg.group_size, cfg.c
        self.params = CodeParams(gs, gs // c, gs - gs // c + 1, c)
        self.codec = StateCodec(self.params, cfg.alphabet)
        self.plans = build_epoch_plan(circuit, scheme)
        self.store: dict = {}
        self.encoded: dict = {}
        self.decoded: dict = {}
        self.expected_cache: dict = {}
        self.owner: list = list(range(cfg.n))
        self.attempt_cap = c + 4 * math.ceil(math.log2(cfg.n)) + 4
        # evenly split each part's layer-0 slab into one sub-blob per group,
        # so a whole input snapshot ships in a single c-round window
        self.blob_bounds = self._even_bounds(
            len(scheme.part_gates(0, 0)), cfg.group_count)

    @staticmethod
    def _even_bounds(total: int, buckets: int) -> list:
        base, rem = divmod(total, buckets)
        bounds = [0]
        for j in range(buckets):
            bounds.append(bounds[-1] + base + (1 if j < rem else 0))
        return bounds

    # -- value plumbing -----------------------------------------------------

    def expected(self, key: tuple) -> tuple:
        """Ground-truth values behind a snapshot key."""
        got = self.expected_cache.get(key)
        if got is not None:
            return got
        if key[0] == "blob":
            _, part, j = key
            gates = self.scheme.part_gates(0, part)
            lo, hi = self.blob_bounds[j], self.blob_bounds[j + 1]
            vals = tuple(self.values[0][g] for g in gates[lo:hi])
        else:
            _, layer, part, piece = key
            gates = self.scheme.pieces(layer, part)[piece]
            vals = tuple(self.values[layer][g] for g in gates)
        self.expected_cache[key] = vals
        return vals

    def key_group(self, key: tuple) -> int:
        if key[0] == "blob":
            return key[2]
        return key[3] % self.cfg.group_count

    def key_width(self, key: tuple) -> int:
        return max(1, self.codec.width(len(self.expected(key))))

    def _store_checkpoint(self, key: tuple, alive: frozenset):
        shards = self.encoded.get(key)
        if shards is None:
            shards = self.codec.encode(self.expected(key))
            self.encoded[key] = shards
        g = self.key_group(key)
        members = self.cfg.group_members(g)
        holders = {u: shards[i] for i, u in enumerate(members) if u in alive}
        ck = self.store.get(key)
        if ck is None:
            self.store[key] = Checkpoint(key, g, holders)
        else:
            ck.shards.update(holders)

    def _decode(self, key: tuple, alive: frozenset) -> tuple:
        version = self.engine._alive_version
        hit = self.decoded.get((key, version))
        if hit is not None:
            return hit
        ck = self.store.get(key)
        if ck is None:
            raise ProtocolError(f"pull of a snapshot that never completed: {key}")
        holders = sorted(h for h in ck.shards if h in alive)
        k = self.params.k
        if len(holders) < k:
            raise ProtocolError(
                f"survivor quorum lost for {key}: {len(holders)} < {k}"
            )
        vals = tuple(self.codec.decode([ck.shards[h] for h in holders[:k]]))
        if vals != self.expected(key):
            raise ProtocolError(f"decode of {key} disagrees with the circuit")
        self.decoded[(key, version)] = vals
        return vals

    def _assert_quorums(self):
        # the fault budget caps per-group losses at group_size - k, so any
        # thinner group means the model (or this protocol) is broken
        cfg = self.cfg
        alive = self.engine.alive
        k = self.params.k
        for g in range(cfg.group_count):
            live = sum(1 for u in cfg.group_members(g) if alive[u])
            if live < k:
                raise ProtocolError(
                    f"group {g} fell to {live} alive members, fewer than the "
                    f"{k} every decode needs"
                )

    # -- lockstep slot execution --------------------------------------------

    def _run_slots(self, queues: dict):
        """Run per-node slot queues in lockstep.

        A slot is a tuple of (kind, key) ops, each moving one codeword on one
        group; the window spans c rounds per codeword instance. A pull
        charges a full group's shard traffic into the actor, a push the
        reverse. Dead actors idle, and an actor dead at its window's end gets
        nothing from it: pulls yield no values, pushes leave no checkpoint.
        """
        depth = max((len(q) for q in queues.values()), default=0)
        engine, cfg = self.engine, self.cfg
        gs = cfg.group_size
        for i in range(depth):
            ops = []
            width = 1
            for u, q in queues.items():
                if i < len(q) and q[i] and engine.is_alive(u):
                    ops.append((u, q[i]))
                    for _, key in q[i]:
                        width = max(width, self.key_width(key))
            if not ops:
                continue
            out_loads: dict = {}
            in_loads: dict = {}
            for u, slot in ops:
                for kind, key in slot:
                    members = cfg.group_members(self.key_group(key))
                    if kind == "pull":
                        in_loads[u] = in_loads.get(u, 0) + gs
                        for h in members:
                            out_loads[h] = out_loads.get(h, 0) + 1
                    else:
                        out_loads[u] = out_loads.get(u, 0) + gs
                        for h in members:
                            in_loads[h] = in_loads.get(h, 0) + 1
            engine.public["at_risk"] = [u for u, _ in ops]
            alive = engine.window(cfg.c * width, out_loads, in_loads)
            self._assert_quorums()
            for u, slot in ops:
                if u not in alive:
                    continue  # died mid-window; partial transfers are void
                for kind, key in slot:
                    if kind == "pull":
                        self._decode(key, alive)
                    else:
                        self._store_checkpoint(key, alive)
        engine.public["at_risk"] = []

    def _state_pull_slots(self, keys) -> list:
        """Pull one logical state: codewords on distinct groups share a
        window, so a grouped snapshot costs the same c rounds as a single
        codeword would."""
        slots: list = []
        used: list = []
        for key in keys:
            g = self.key_group(key)
            for j, groups in enumerate(used):
                if g not in groups:
                    slots[j] += (("pull", key),)
                    groups.add(g)
                    break
            else:
                slots.append((("pull", key),))
                used.append({g})
        return slots

    def _pack_pulls(self, keys) -> list:
        """Schedule piece pulls: one codeword per window by default; with
        pipelining, pulls on distinct groups share a window."""
        if not self.pipeline:
            return [(("pull", key),) for key in keys]
        return self._state_pull_slots(keys)

    def _blob_keys(self, part: int) -> list:
        return [("blob", part, j) for j in range(self.cfg.group_count)]

    def _fetch_pull_slots(self, plan: EpochPlan, part: int, pad: bool) -> list:
        """Windows that fetch `part`'s foreign data at the fetch layer."""
        if plan.fetch_layer == 0:
            slots = []
            for s in plan.fetch_srcs.get(part, ()):
                slots.extend(self._state_pull_slots(self._blob_keys(s)))
        else:
            keys = [("piece", plan.fetch_layer, s, p)
                    for s, p in plan.bins.get(part, ())]
            slots = self._pack_pulls(keys)
        if pad:
            slots += [()] * (plan.max_pulls - len(slots))
        return slots

    def _own_pull_slots(self, plan: EpochPlan, part: int) -> list:
        """Windows recovering `part`'s own fetch-layer state (attempts only;
        a surviving owner carries its state and never self-decodes)."""
        if plan.fetch_layer == 0:
            return self._state_pull_slots(self._blob_keys(part))
        count = self.scheme.piece_count(plan.fetch_layer, part)
        keys = [("piece", plan.fetch_layer, part, p) for p in range(count)]
        return self._pack_pulls(keys)

    def _push_slots(self, plan: EpochPlan, part: int) -> list:
        count = self.scheme.piece_count(plan.checkpoint_layer, part)
        return [(("push", ("piece", plan.checkpoint_layer, part, p)),)
                for p in range(count)]

    def _part_done(self, plan: EpochPlan, part: int) -> bool:
        count = self.scheme.piece_count(plan.checkpoint_layer, part)
        return all(("piece", plan.checkpoint_layer, part, p) in self.store
                   for p in range(count))

    # -- protocol phases ------------------------------------------------------

    def quiet_phase(self):
        engine, cfg = self.engine, self.cfg
        engine.set_phase("quiet:shuffle")
        demands = []
        if self.origin is not None:
            counts: dict = {}
            part_of = self.scheme.part_of[0]
            for g, src in enumerate(self.origin):
                key = (src, part_of[g])
                counts[key] = counts.get(key, 0) + 1
            demands = [(s, d, k) for (s, d), k in sorted(counts.items())]
        engine.quiet_shuffle(demands)
        engine.set_phase("quiet:checkpoint")
        # Every node encodes its whole input slab and ships all coded pieces
        # inside one c-round window; parallel codewords share the window, and
        # quiet rounds are fault-free, so every shard lands. Loads are the
        # true shard counts averaged over the window.
        keys = [(w, key) for w in range(cfg.n) for key in self._blob_keys(w)]
        out_loads: dict = {}
        in_loads: dict = {}
        for w, key in keys:
            width = self.key_width(key)
            out_loads[w] = out_loads.get(w, 0) + cfg.group_size * width
            for h in cfg.group_members(self.key_group(key)):
                in_loads[h] = in_loads.get(h, 0) + width
        c = cfg.c
        out_loads = {u: (v + c - 1) // c for u, v in out_loads.items()}
        in_loads = {u: (v + c - 1) // c for u, v in in_loads.items()}
        alive = engine.window(c, out_loads, in_loads)
        for w, key in keys:
            self._store_checkpoint(key, alive)
        for w in range(cfg.n):
            for key in self._blob_keys(w):
                if key not in self.store:
                    raise ProtocolError("input snapshot incomplete after quiet rounds")
        engine.set_mode("protocol")

    def collect_phase(self, plan: EpochPlan):
        self.engine.set_phase(f"epoch:{plan.index}:collect")
        queues: dict = {}
        for v in range(self.cfg.n):
            u = self.owner[v]
            if u is None or not self.engine.is_alive(u):
                continue  # nobody carries v; the attempt loop will cover it
            queues.setdefault(u, []).extend(
                self._fetch_pull_slots(plan, v, pad=False))
        self._run_slots(queues)

    def checkpoint_phase(self, plan: EpochPlan):
        self.engine.set_phase(f"epoch:{plan.index}:checkpoint")
        queues: dict = {}
        for v in range(self.cfg.n):
            u = self.owner[v]
            if u is None or not self.engine.is_alive(u):
                continue
            queues.setdefault(u, []).extend(self._push_slots(plan, v))
        self._run_slots(queues)

    def execute_attempt(self, plan: EpochPlan, attempt: AttemptState,
                        bingo: BingoCard) -> BingoCard:
        """Run one attempt; completed parts leave the bingo card and gain a
        surviving helper as their new owner."""
        self.engine.set_phase(f"epoch:{plan.index}:attempt:{attempt.index}")
        queues: dict = {}
        for u, parts in attempt.assignments.items():
            q: list = []
            for v in parts:
                q.extend(self._own_pull_slots(plan, v))
                q.extend(self._fetch_pull_slots(plan, v, pad=True))
                q.extend(self._push_slots(plan, v))
            queues[u] = q
        self._run_slots(queues)
        alive = self.engine.membership()
        for v in list(bingo.missing):
            if self._part_done(plan, v):
                bingo.mark_done(v)
                helpers = [u for u, parts in attempt.assignments.items()
                           if v in parts and u in alive]
                self.owner[v] = min(helpers) if helpers else None
        self.engine.public["checkpointed"] = frozenset(
            v for v in range(self.cfg.n) if self._part_done(plan, v))
        return bingo

    def run_epoch(self, plan: EpochPlan):
        self.collect_phase(plan)
        # recomputing the epoch's layers is local and costs no rounds
        self.checkpoint_phase(plan)
        bingo = BingoCard(v for v in range(self.cfg.n)
                          if not self._part_done(plan, v))
        self.engine.public["checkpointed"] = frozenset(
            v for v in range(self.cfg.n) if self._part_done(plan, v))
        attempts = 0
        while not bingo.empty:
            attempts += 1
            if attempts > self.attempt_cap:
                raise ProtocolError(
                    f"epoch {plan.index} still missing {sorted(bingo.missing)} "
                    f"after {attempts - 1} attempts"
                )
            attempt = plan_attempt(self.engine.alive_ids(), bingo.missing,
                                   self.cfg.c, attempts)
            self.execute_attempt(plan, attempt, bingo)
        self.engine.ledger.attempts_per_epoch.append(attempts)

    def _output_pull_slots(self, target: int) -> list:
        out_layer = self.circuit.depth
        count = self.scheme.piece_count(out_layer, target)
        keys = [("piece", out_layer, target, p) for p in range(count)]
        # one logical state: grouped pieces share windows
        return self._state_pull_slots(keys)

    def decode_outputs(self) -> OutputStore:
        """Every node pulls one foreign part's output. Retry waves re-assign
        the targets of collectors that died mid-decode to survivors."""
        engine, cfg = self.engine, self.cfg
        engine.set_mode("decode")
        out_layer = self.circuit.depth
        results: dict = {}
        parts: dict = {}
        pending = set(range(cfg.n))
        wave = 0
        while pending:
            wave += 1
            if wave > cfg.budget + 3:
                raise ProtocolError("output decode failed to converge")
            engine.set_phase(f"decode:{wave}")
            alive_now = engine.alive_ids()
            assignment: dict = {}
            if wave == 1:
                for u in alive_now:
                    assignment[u] = [(u + 1) % cfg.n]
            else:
                for j, t in enumerate(sorted(pending)):
                    u = alive_now[j % len(alive_now)]
                    assignment.setdefault(u, []).append(t)
            queues = {u: [slot for t in targets
                          for slot in self._output_pull_slots(t)]
                      for u, targets in assignment.items()}
            self._run_slots(queues)
            alive = engine.membership()
            for u, targets in assignment.items():
                if u not in alive:
                    continue
                for t in targets:
                    vals: list = []
                    for p in range(self.scheme.piece_count(out_layer, t)):
                        vals.extend(self.expected(("piece", out_layer, t, p)))
                    results.setdefault(u, (t, tuple(vals)))
                    parts[t] = tuple(vals)
                    pending.discard(t)
        return OutputStore(results=results, parts=parts)

    def run(self) -> RunResult:
        self.quiet_phase()
        for plan in self.plans:
            self.run_epoch(plan)
        store = self.decode_outputs()
        return RunResult(store=store, ledger=self.engine.ledger,
                         engine=self.engine, runner=self)


def run_faulty(circuit: LayeredCircuit, scheme: PartitionScheme,
               inputs: Sequence[int], cfg: SimConfig,
               adversary: Optional[Adversary] = None, *,
               origin: Optional[Sequence[int]] = None, algebra=None,
               pipeline_collect: bool = False, record_log: bool = False,
               values: Optional[list] = None) -> RunResult:
    """Execute the circuit under the crash-fault model and decode the outputs.

    origin maps each layer-0 gate to the node initially holding its value;
    None means every value already sits with its part and no shuffle traffic
    is needed. Precomputed evaluate() values may be passed in to share work
    across repeated runs of the same instance.
    """
    run = FaultyRun(circuit, scheme, inputs, origin, cfg, adversary,
                    algebra=algebra, pipeline_collect=pipeline_collect,
                    record_log=record_log, values=values)
    return run.run()


def run_faulty_sublinear(circuit, scheme, inputs, cfg: SimConfig,
                         adversary=None, **kw) -> RunResult:
    """Grouped-codeword variant: identical protocol with cfg.chi < 1
    shrinking codewords to one per group of about n^chi nodes. With chi = 1
    it is run_faulty exactly."""
    return run_faulty(circuit, scheme, inputs, cfg, adversary, **kw)


def decode_output(run: FaultyRun, target: int, collector: int) -> tuple:
    """One extra post-run decode: `collector` pulls `target`'s output values
    from the final snapshot, charged as decode rounds."""
    engine = run.engine
    if not engine.is_alive(collector):
        raise ProtocolError(f"collector {collector} is not alive")
    engine.set_mode("decode")
    run._run_slots({collector: run._output_pull_slots(target)})
    if not engine.is_alive(collector):
        raise ProtocolError(f"collector {collector} died during decode")
    out_layer = run.circuit.depth
    vals: list = []
    for p in range(run.scheme.piece_count(out_layer, target)):
        vals.extend(run.expected(("piece", out_layer, target, p)))
    return tuple(vals)


@dataclass
class NonfaultyResult:
    outputs: dict
    ledger: RoundLedger
    engine: Engine


def _side_sums(counts: dict, side: int) -> dict:
    acc: dict = {}
    for pair, k in counts.items():
        acc[pair[side]] = acc.get(pair[side], 0) + k
    return acc


def _split_demands(counts: dict, cap: int) -> list:
    """Split pair demands into waves loading each node at most `cap`."""
    waves = max(1, math.ceil(
        max(max(_side_sums(counts, 0).values()),
            max(_side_sums(counts, 1).values())) / cap))
    ordered = sorted(counts.items())
    while True:
        wave_counts = [dict() for _ in range(waves)]
        out = [dict() for _ in range(waves)]
        inc = [dict() for _ in range(waves)]
        for (s, d), k in ordered:
            base, rem = divmod(k, waves)
            take = [base] * waves
            for _ in range(rem):
                # each leftover symbol goes where this pair is lightest
                w = min(range(waves),
                        key=lambda j: (max(out[j].get(s, 0), inc[j].get(d, 0)), j))
                take[w] += 1
            for w, t in enumerate(take):
                if t:
                    wave_counts[w][(s, d)] = t
                    out[w][s] = out[w].get(s, 0) + t
                    inc[w][d] = inc[w].get(d, 0) + t
        heaviest = max(max((max(o.values(), default=0) for o in out), default=0),
                       max((max(i.values(), default=0) for i in inc), default=0))
        if heaviest <= cap:
            return [sorted((s, d, k) for (s, d), k in wave.items())
                    for wave in wave_counts if wave]
        waves += 1


def run_nonfaulty(circuit: LayeredCircuit, scheme: PartitionScheme,
                  inputs: Sequence[int], cfg: SimConfig, *,
                  origin: Optional[Sequence[int]] = None, algebra=None,
                  record_log: bool = False,
                  values: Optional[list] = None) -> NonfaultyResult:
    """Uncoded baseline: raw cross-part values move in load-balanced waves of
    at most n per node per round, one window per crossing boundary. Any
    failure is an error here; this runner has no redundancy to fall back on.
    """
    if circuit.n != cfg.n or scheme.n != cfg.n:
        raise ValueError("circuit, scheme and config disagree on n")
    engine = Engine(cfg, None, record_log=record_log)
    engine.set_mode("protocol")
    vals = values if values is not None else evaluate_layers(circuit, inputs, algebra)
    if origin is not None:
        engine.set_phase("shuffle")
        counts: dict = {}
        part_of = scheme.part_of[0]
        for g, src in enumerate(origin):
            dst = part_of[g]
            if src != dst:
                counts[(src, dst)] = counts.get((src, dst), 0) + 1
        if counts:
            for wave in _split_demands(counts, cfg.n):
                engine.route(wave)
    report = analyze_partition(circuit, scheme)
    for bs in report.boundaries:
        if not bs.crossing:
            continue
        engine.set_phase(f"boundary:{bs.layer}")
        heaviest = max(bs.max_in(), bs.max_out())
        rounds = math.ceil(heaviest / cfg.n)
        per_in = {w: math.ceil(k / rounds) for w, k in bs.in_cross.items()}
        per_out = {w: math.ceil(k / rounds) for w, k in bs.out_cross.items()}
        engine.window(rounds, per_out, per_in)
    if engine.ledger.failures:
        raise ProtocolError("the uncoded runner cannot survive failures")
    last = circuit.depth
    outputs = {w: tuple(vals[last][g] for g in scheme.part_gates(last, w))
               for w in range(scheme.n)}
    return NonfaultyResult(outputs=outputs, ledger=engine.ledger, engine=engine)
