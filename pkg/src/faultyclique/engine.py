"""Synchronous network simulator with crash faults.

n nodes run in lockstep rounds; each ordered pair may exchange one symbol of
b*log2(n) bits per round. An adversary may crash nodes at round boundaries,
within a budget of (c-1)/c of a codeword group and never during the initial
quiet rounds. A crashed node sends and receives nothing from that round on.

The engine never inspects protocol values: it counts traffic, enforces caps,
charges rounds by mode (quiet, protocol, decode), and applies failures. Value
motion is the protocol's business; raw per-value exchange is provided only by
step_round for the uncoded runner.
"""

import math
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence


class ModelViolationError(RuntimeError):
    """The adversary broke the fault model (quiet-round kill, over budget)."""


class CapViolationError(RuntimeError):
    """The protocol exceeded a bandwidth cap; always a bug, never a fault."""


class ProtocolError(RuntimeError):
    """A protocol invariant failed (e.g. an attempt loop stopped progressing)."""


@dataclass(frozen=True)
class SimConfig:
    """Network parameters. chi < 1 shrinks codeword groups and the budget."""

    n: int
    c: int
    chi: float = 1.0
    b: int = 1
    route_cost: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.c < 2:
            raise ValueError("c must be at least 2")
        if self.b < 1 or self.route_cost < 1:
            raise ValueError("b and route_cost must be positive")
        if not 0 < self.chi <= 1:
            raise ValueError("chi must lie in (0, 1]")
        gs = round(self.n**self.chi)
        if abs(self.n**self.chi - gs) > 1e-9:
            raise ValueError(f"n^chi must be an integer; n={self.n}, chi={self.chi}")
        if self.n % gs:
            raise ValueError(f"n^chi = {gs} must divide n = {self.n}")
        if gs % self.c:
            raise ValueError(f"c = {self.c} must divide the group size {gs}")

    @property
    def group_size(self) -> int:
        return round(self.n**self.chi)

    @property
    def group_count(self) -> int:
        return self.n // self.group_size

    @property
    def budget(self) -> int:
        # (c-1)/c of one codeword group; with chi=1 that is (c-1)n/c
        return (self.c - 1) * self.group_size // self.c

    @property
    def alphabet(self) -> int:
        return self.n**self.b

    def group_of(self, node: int) -> int:
        return node // self.group_size

    def group_members(self, g: int) -> range:
        gs = self.group_size
        return range(g * gs, (g + 1) * gs)


@dataclass
class RoundLedger:
    """Every count the run reports; recomputable from the traffic log."""

    quiet_rounds: int = 0
    protocol_rounds: int = 0
    decode_rounds: int = 0
    sent_total: int = 0
    recv_total: int = 0
    failures: list = field(default_factory=list)  # (round, node)
    attempts_per_epoch: list = field(default_factory=list)

    @property
    def attempts_total(self) -> int:
        return sum(self.attempts_per_epoch)

    @property
    def max_attempts_per_epoch(self) -> int:
        return max(self.attempts_per_epoch, default=0)

    @property
    def total_rounds(self) -> int:
        return self.quiet_rounds + self.protocol_rounds + self.decode_rounds


_MODES = ("quiet", "protocol", "decode")


class Adversary:
    """Base strategy: sees public engine state, returns nodes to crash."""

    name = "none"

    def observe(self, engine: "Engine") -> set[int]:
        return set()


class NoneAdversary(Adversary):
    pass


class ScriptedAdversary(Adversary):
    """Failures pinned to absolute rounds or to the first round of a phase."""

    name = "scripted"

    def __init__(self, by_round: Optional[dict] = None,
                 by_phase: Optional[list] = None):
        self.by_round = dict(by_round or {})
        self.by_phase = [(prefix, set(nodes)) for prefix, nodes in (by_phase or [])]
        self._fired: set[int] = set()

    def observe(self, engine: "Engine") -> set[int]:
        out = set(self.by_round.get(engine.round_no, ()))
        for idx, (prefix, nodes) in enumerate(self.by_phase):
            if idx not in self._fired and engine.phase.startswith(prefix):
                self._fired.add(idx)
                out |= nodes
        return out


def parse_script(text: str) -> ScriptedAdversary:
    """Script grammar: `round <r> fail <id> [<id>...]` and
    `phase <label-prefix> fail <id> [<id>...]`, one directive per line."""
    by_round: dict[int, set] = {}
    by_phase: list[tuple[str, set]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"round\s+(\d+)\s+fail\s+([\d\s]+)", line)
        if m:
            ids = {int(x) for x in m.group(2).split()}
            by_round.setdefault(int(m.group(1)), set()).update(ids)
            continue
        m = re.fullmatch(r"phase\s+(\S+)\s+fail\s+([\d\s]+)", line)
        if m:
            by_phase.append((m.group(1), {int(x) for x in m.group(2).split()}))
            continue
        raise ValueError(f"script line {lineno}: cannot parse {raw!r}")
    return ScriptedAdversary(by_round, by_phase)


class RandomAdversary(Adversary):
    """Each alive node crashes with probability `rate` per non-quiet round,
    truncated to the remaining budget. Seeded, so runs are reproducible."""

    name = "random"

    def __init__(self, rate: float, seed: int):
        if not 0 <= rate <= 1:
            raise ValueError("rate must lie in [0, 1]")
        self.rate = rate
        self.rng = random.Random(f"random-adversary:{seed}:{rate}")

    def observe(self, engine: "Engine") -> set[int]:
        if engine.mode == "quiet":
            return set()
        left = engine.remaining_budget()
        out = set()
        for u in engine.alive_ids():
            if self.rng.random() < self.rate:
                if left <= 0:
                    break
                out.add(u)
                left -= 1
        return out


class GreedyAdversary(Adversary):
    """Targets whichever node currently carries an unfinished snapshot duty.

    The protocol publishes the ids of nodes whose assigned parts are not yet
    fully checkpointed; this strategy kills the lowest such id, one per round,
    during checkpoint and attempt phases, until the budget runs dry.
    """

    name = "greedy"

    def observe(self, engine: "Engine") -> set[int]:
        if engine.mode == "quiet" or engine.remaining_budget() <= 0:
            return set()
        if not ("checkpoint" in engine.phase or "attempt" in engine.phase):
            return set()
        at_risk = engine.public.get("at_risk", ())
        for u in sorted(at_risk):
            if engine.is_alive(u):
                return {u}
        return set()


def make_adversary(spec: str, seed: int = 0) -> Adversary:
    """Build a strategy from its CLI name: none, random:<rate>, greedy,
    script:<path>."""
    if spec == "none":
        return NoneAdversary()
    if spec == "greedy":
        return GreedyAdversary()
    if spec.startswith("random:"):
        return RandomAdversary(float(spec.split(":", 1)[1]), seed)
    if spec.startswith("random"):
        return RandomAdversary(0.05, seed)
    if spec.startswith("script:"):
        path = spec.split(":", 1)[1]
        with open(path) as fh:
            return parse_script(fh.read())
    raise ValueError(f"unknown adversary {spec!r}")


def adversary_observe(strategy: Adversary, engine: "Engine") -> set[int]:
    """Ask the strategy for this round's crash set (validation happens in
    the engine tick, which is the authority on budget and quiet rounds)."""
    return strategy.observe(engine)


class Engine:
    """One lockstep network. Protocol code drives it through phases."""

    def __init__(self, cfg: SimConfig, adversary: Optional[Adversary] = None,
                 record_log: bool = False):
        self.cfg = cfg
        self.adversary = adversary or NoneAdversary()
        self.alive = [True] * cfg.n
        self.alive_count = cfg.n
        self.round_no = 0
        self.mode = "quiet"
        self.phase = "init"
        self.public: dict = {}
        self.ledger = RoundLedger()
        self.log: Optional[list] = [] if record_log else None
        self._alive_version = 0

    # -- membership ---------------------------------------------------------

    def membership(self) -> frozenset:
        return frozenset(u for u in range(self.cfg.n) if self.alive[u])

    def alive_ids(self) -> list[int]:
        return [u for u in range(self.cfg.n) if self.alive[u]]

    def is_alive(self, u: int) -> bool:
        return self.alive[u]

    def failed_count(self) -> int:
        return self.cfg.n - self.alive_count

    def remaining_budget(self) -> int:
        return self.cfg.budget - len(self.ledger.failures)

    # -- phases and rounds ---------------------------------------------------

    def set_phase(self, label: str):
        self.phase = label

    def set_mode(self, mode: str):
        if _MODES.index(mode) < _MODES.index(self.mode):
            raise ProtocolError(f"mode cannot go back from {self.mode} to {mode}")
        self.mode = mode

    def tick(self, sent: int = 0, recv: int = 0) -> set[int]:
        """Advance one round: charge it, apply adversary failures, log."""
        self.round_no += 1
        if self.mode == "quiet":
            self.ledger.quiet_rounds += 1
        elif self.mode == "decode":
            self.ledger.decode_rounds += 1
        else:
            self.ledger.protocol_rounds += 1
        fails = adversary_observe(self.adversary, self)
        fresh = set()
        for u in fails:
            if not isinstance(u, int) or not 0 <= u < self.cfg.n:
                raise ModelViolationError(f"adversary named a bad node id {u!r}")
            if self.alive[u]:
                fresh.add(u)
        if fresh:
            if self.mode == "quiet":
                raise ModelViolationError(
                    f"failure of {sorted(fresh)} during quiet round {self.round_no}"
                )
            if len(self.ledger.failures) + len(fresh) > self.cfg.budget:
                raise ModelViolationError(
                    f"budget {self.cfg.budget} exceeded at round {self.round_no}"
                )
            for u in fresh:
                self.alive[u] = False
                self.ledger.failures.append((self.round_no, u))
            self.alive_count -= len(fresh)
            self._alive_version += 1
        self.ledger.sent_total += sent
        self.ledger.recv_total += recv
        if self.log is not None:
            self.log.append((self.round_no, self.mode, self.phase, sent, recv,
                             tuple(sorted(fresh))))
        return fresh

    # -- traffic primitives --------------------------------------------------

    def _check_loads(self, loads: dict, cap: int, kind: str):
        for u, load in loads.items():
            if load > cap:
                raise CapViolationError(
                    f"node {u} would {kind} {load} symbols in one round; cap is {cap}"
                )

    def window(self, rounds: int, out_loads: Optional[dict] = None,
               in_loads: Optional[dict] = None) -> frozenset:
        """Advance a multi-round coded transfer, counting but not moving data.

        out_loads/in_loads give per-node symbols per round; both are capped at
        n. Returns the alive set at the window's end: a transfer chunked over
        the window counts as delivered only if both endpoints are in it.
        """
        out_loads = out_loads or {}
        in_loads = in_loads or {}
        self._check_loads(out_loads, self.cfg.n, "send")
        self._check_loads(in_loads, self.cfg.n, "receive")
        version = -1
        sent = recv = 0
        for _ in range(rounds):
            self.tick()
            if version != self._alive_version:  # deaths mute nodes this round
                version = self._alive_version
                sent = sum(v for u, v in out_loads.items() if self.alive[u])
                recv = sum(v for u, v in in_loads.items() if self.alive[u])
            self.ledger.sent_total += sent
            self.ledger.recv_total += recv
            if self.log is not None:
                r, mode, phase, _, _, fresh = self.log[-1]
                self.log[-1] = (r, mode, phase, sent, recv, fresh)
        return self.membership()

    def route(self, demands: Sequence[tuple[int, int, int]]) -> frozenset:
        """Idealized routing of (src, dst, count) payload demands.

        Every node may source at most n payloads and sink at most n; a demand
        set beyond that must be split into several invocations. Charges
        route_cost rounds regardless of load.
        """
        out: dict[int, int] = {}
        inc: dict[int, int] = {}
        for src, dst, count in demands:
            out[src] = out.get(src, 0) + count
            inc[dst] = inc.get(dst, 0) + count
        self._check_loads(out, self.cfg.n, "send")
        self._check_loads(inc, self.cfg.n, "receive")
        return self.window(self.cfg.route_cost, out, inc)

    def quiet_shuffle(self, demands: Sequence[tuple[int, int, int]]) -> None:
        """The one-time input rearrangement, allowed only while quiet.

        Loads up to a small constant times n per node are permitted (waves
        inside the primitive); the whole shuffle charges route_cost rounds.
        """
        if self.mode != "quiet":
            raise ProtocolError("the input shuffle must happen in quiet rounds")
        out: dict[int, int] = {}
        inc: dict[int, int] = {}
        for src, dst, count in demands:
            if src != dst:  # local placement is free
                out[src] = out.get(src, 0) + count
                inc[dst] = inc.get(dst, 0) + count
        cap = 4 * self.cfg.n
        self._check_loads(out, cap, "send")
        self._check_loads(inc, cap, "receive")
        per_out = {u: math.ceil(v / self.cfg.route_cost) for u, v in out.items()}
        per_in = {u: math.ceil(v / self.cfg.route_cost) for u, v in inc.items()}
        self.window(self.cfg.route_cost, per_out, per_in)

    def step_round(self, outboxes: dict[int, Iterable[tuple[int, int]]]
                   ) -> dict[int, list[tuple[int, int]]]:
        """Exchange raw symbol values for one round (uncoded runner only).

        outboxes maps sender -> [(receiver, value)]; caps: one message per
        ordered pair, n sends and n receipts per node, values within the
        alphabet. Messages touching a node dead this round vanish.
        """
        cap = self.cfg.alphabet
        boxes = {src: list(msgs) for src, msgs in outboxes.items()}
        inc_count: dict[int, int] = {}
        for src, msgs in boxes.items():
            pairs = set()
            if len(msgs) > self.cfg.n:
                raise CapViolationError(f"node {src} sends {len(msgs)} messages")
            for dst, value in msgs:
                if (src, dst) in pairs:
                    raise CapViolationError(
                        f"two messages {src}->{dst} in one round"
                    )
                pairs.add((src, dst))
                if not isinstance(value, int) or not 0 <= value < cap:
                    raise CapViolationError(
                        f"message {src}->{dst} value {value!r} exceeds the "
                        f"alphabet (< {cap})"
                    )
                inc_count[dst] = inc_count.get(dst, 0) + 1
        self._check_loads(inc_count, self.cfg.n, "receive")
        self.tick()  # failures first: a node dead this round moves nothing
        inboxes: dict[int, list[tuple[int, int]]] = {}
        delivered = 0
        for src, msgs in boxes.items():
            if not self.alive[src]:
                continue
            for dst, value in msgs:
                if self.alive[dst]:
                    inboxes.setdefault(dst, []).append((src, value))
                    delivered += 1
        self.ledger.sent_total += delivered
        self.ledger.recv_total += delivered
        if self.log is not None:  # rewrite the tick's zero-traffic row
            r, mode, phase, _, _, fresh = self.log[-1]
            self.log[-1] = (r, mode, phase, delivered, delivered, fresh)
        return inboxes
