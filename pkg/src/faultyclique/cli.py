"""Experiment harness: single runs, parameter sweeps, the acceptance gate,
and static plots from sweep CSVs.

Exit codes: 0 run correct / command succeeded, 1 incorrect or failed gate,
2 invalid configuration, 3 simulation model violation (over-budget script,
bandwidth overflow).
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import statistics
import sys
import time
from typing import Optional

from .engine import CapViolationError, ModelViolationError, SimConfig, make_adversary
from .protocol import ProtocolError, run_faulty, run_nonfaulty
from .workloads import WORKLOADS, WorkloadError, cached_instance, make_instance

CSV_HEADER = ["n", "c", "chi", "workload", "adversary", "seed",
              "quiet_rounds", "protocol_rounds", "decode_rounds",
              "attempts_total", "max_attempts_per_epoch", "correct", "wall_ms"]

EXIT_OK = 0
EXIT_INCORRECT = 1
EXIT_CONFIG = 2
EXIT_MODEL = 3


def perform_run(workload: str, n: int, c: int, chi: float, adversary: str,
                seed: int, route_cost: int = 2, b: int = 1,
                pipeline_collect: bool = False, trace: Optional[str] = None,
                nonfaulty: bool = False) -> dict:
    """One simulation; returns a CSV row dict (correct as 'true'/'false')."""
    try:
        cfg = SimConfig(n=n, c=c, chi=chi, b=b, route_cost=route_cost, seed=seed)
    except ValueError:
        # a size the workload itself cannot take deserves the sharper message
        make_instance(workload, n, b=b, seed=seed)
        raise
    inst, values = cached_instance(workload, n, b=b, seed=seed,
                                   group_size=cfg.group_size)
    record_log = trace is not None
    start = time.perf_counter()
    if nonfaulty:
        res = run_nonfaulty(inst.circuit, inst.scheme, inst.inputs, cfg,
                            origin=inst.origin, values=values,
                            record_log=record_log)
        label = "nonfaulty"
    else:
        adv = make_adversary(adversary, seed=seed)
        res = run_faulty(inst.circuit, inst.scheme, inst.inputs, cfg, adv,
                         origin=inst.origin, values=values,
                         pipeline_collect=pipeline_collect,
                         record_log=record_log)
        label = adversary
    wall_ms = round((time.perf_counter() - start) * 1000)
    correct = inst.check(res.outputs)
    led = res.ledger
    if trace is not None:
        write_trace(trace, res.engine.log, n)
    return {
        "n": n, "c": c, "chi": chi, "workload": workload, "adversary": label,
        "seed": seed, "quiet_rounds": led.quiet_rounds,
        "protocol_rounds": led.protocol_rounds,
        "decode_rounds": led.decode_rounds,
        "attempts_total": sum(led.attempts_per_epoch),
        "max_attempts_per_epoch": led.max_attempts_per_epoch,
        "correct": "true" if correct else "false", "wall_ms": wall_ms,
    }


def write_trace(path: str, log, n: int) -> None:
    alive = n
    with open(path, "w") as fh:
        for rnd, _, phase, sent, recv, fresh in log:
            alive -= len(fresh)
            line = f"round {rnd} phase {phase} alive {alive} sent {sent} recv {recv}"
            if fresh:
                line += " failed " + ",".join(str(u) for u in fresh)
            fh.write(line + "\n")


def _emit_csv(rows: list[dict], header: list[str], out: Optional[str]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if out is None:
        sys.stdout.write(buf.getvalue())
    else:
        with open(out, "w") as fh:
            fh.write(buf.getvalue())


def cmd_run(ns: argparse.Namespace) -> int:
    if ns.n is None:
        print("run: --n is required (flag or config file)", file=sys.stderr)
        return EXIT_CONFIG
    row = perform_run(ns.workload, ns.n, ns.c, ns.chi, ns.adversary, ns.seed,
                      ns.route_cost, ns.b, ns.pipeline_collect, ns.trace,
                      ns.nonfaulty)
    _emit_csv([row], CSV_HEADER, ns.out)
    return EXIT_OK if row["correct"] == "true" else EXIT_INCORRECT


def scaling_ratio(protocol_rounds: int, n: int, c: int) -> float:
    """Rounds normalized by the c^2 * n^(1/3) * log2(n) scaling target."""
    return protocol_rounds / (c * c * n ** (1 / 3) * math.log2(n))


def cmd_sweep(ns: argparse.Namespace) -> int:
    try:
        n_list = [int(x) for x in ns.n.split(",")]
        c_list = [int(x) for x in ns.c.split(",")]
    except ValueError:
        print("sweep: --n and --c take comma-separated integers",
              file=sys.stderr)
        return EXIT_CONFIG
    rows = []
    for n in n_list:
        for c in c_list:
            for seed in range(ns.seeds):
                try:
                    row = perform_run(ns.workload, n, c, ns.chi, ns.adversary,
                                      seed, ns.route_cost, ns.b,
                                      ns.pipeline_collect)
                    row["ratio"] = round(
                        scaling_ratio(row["protocol_rounds"], n, c), 4)
                except (WorkloadError, ModelViolationError, CapViolationError,
                        ProtocolError, ValueError) as e:
                    # an unrunnable cell still yields a row, flagged
                    row = {"n": n, "c": c, "chi": ns.chi,
                           "workload": ns.workload, "adversary": ns.adversary,
                           "seed": seed, "quiet_rounds": 0,
                           "protocol_rounds": 0, "decode_rounds": 0,
                           "attempts_total": 0, "max_attempts_per_epoch": 0,
                           "correct": "false", "wall_ms": 0, "ratio": 0.0}
                    print(f"sweep: n={n} c={c} seed={seed}: {e}",
                          file=sys.stderr)
                rows.append(row)
    _emit_csv(rows, CSV_HEADER + ["ratio"], ns.out)
    return EXIT_OK


def cmd_verify(ns: argparse.Namespace) -> int:
    from .acceptance import run_all

    results = run_all(report=print)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_OK if not failed else EXIT_INCORRECT


def read_rows(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise WorkloadError(f"{path} has no data rows to plot")
    return rows


def rounds_series(rows: list[dict]) -> dict[int, list[tuple[int, float]]]:
    """Mean protocol_rounds of correct rows, per c, ordered by n."""
    cells: dict = {}
    for row in rows:
        if row["correct"] != "true":
            continue
        key = (int(row["c"]), int(row["n"]))
        cells.setdefault(key, []).append(int(row["protocol_rounds"]))
    series: dict[int, list[tuple[int, float]]] = {}
    for (c, n), vals in sorted(cells.items()):
        series.setdefault(c, []).append((n, statistics.fmean(vals)))
    return series


def attempts_values(rows: list[dict]) -> list[int]:
    return [int(r["max_attempts_per_epoch"]) for r in rows
            if r["correct"] == "true"]


def cmd_plot(ns: argparse.Namespace) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_rows(ns.csv)
    series = rounds_series(rows)
    if not series:
        print("plot: no correct rows in the CSV", file=sys.stderr)
        return EXIT_CONFIG

    fig, ax = plt.subplots(figsize=(6, 4))
    for c, pts in sorted(series.items()):
        ax.plot([n for n, _ in pts], [v for _, v in pts],
                marker="o", label=f"c={c}")
    ax.set_xlabel("n")
    ax.set_ylabel("protocol rounds (mean over seeds)")
    ax.set_title("rounds vs n")
    ax.legend()
    rounds_path = f"{ns.outdir}/rounds_vs_n.png"
    fig.savefig(rounds_path, dpi=120, bbox_inches="tight")
    plt.close(fig)

    vals = attempts_values(rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(vals, bins=range(0, max(vals) + 2), rwidth=0.9)
    ax.set_xlabel("max attempts per epoch")
    ax.set_ylabel("runs")
    ax.set_title("recovery attempts")
    hist_path = f"{ns.outdir}/attempts_hist.png"
    fig.savefig(hist_path, dpi=120, bbox_inches="tight")
    plt.close(fig)

    print(rounds_path)
    print(hist_path)
    return EXIT_OK


def load_config_file(path: str) -> dict:
    """key=value per line, # comments; keys use flag names (dashes ok)."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise WorkloadError(
                    f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, val = line.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


_TRUTHY = {"1", "true", "yes", "on"}


def apply_config_defaults(parser: argparse.ArgumentParser, ns: argparse.Namespace,
                          argv: list[str]) -> argparse.Namespace:
    """Fill values from --config for flags not given on the command line."""
    if getattr(ns, "config", None) is None:
        return ns
    cfg = load_config_file(ns.config)
    given = {a.lstrip("-").split("=")[0].replace("-", "_")
             for a in argv if a.startswith("--")}
    for action in parser._actions:
        key = action.dest
        if key not in cfg or key in given:
            continue
        raw = cfg.pop(key)
        if isinstance(getattr(ns, key, None), bool) or action.const is True:
            setattr(ns, key, raw.lower() in _TRUTHY)
        elif action.type is not None:
            setattr(ns, key, action.type(raw))
        else:
            setattr(ns, key, raw)
    unknown = set(cfg) - {a.dest for a in parser._actions}
    if unknown:
        raise WorkloadError(f"config file sets unknown keys: {sorted(unknown)}")
    return ns


def _add_run_flags(p: argparse.ArgumentParser, sweep: bool) -> None:
    p.add_argument("--workload", default="semiring-mm:plus-times",
                   help="one of: " + ", ".join(sorted(WORKLOADS)))
    if sweep:
        p.add_argument("--n", default="8,27,64",
                       help="comma-separated node counts")
        p.add_argument("--c", default="2,3,4",
                       help="comma-separated code expansion factors")
        p.add_argument("--seeds", type=int, default=10,
                       help="runs seeds 0..N-1 per grid cell")
    else:
        p.add_argument("--n", type=int,
                       help="node count (required here or in --config)")
        p.add_argument("--c", type=int, default=2,
                       help="code expansion factor (groups tolerate a "
                            "(c-1)/c fraction of crashes)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trace", metavar="PATH",
                       help="write a per-round trace file")
        p.add_argument("--nonfaulty", action="store_true",
                       help="run the uncoded baseline (faults are errors)")
    p.add_argument("--chi", type=float, default=1.0,
                   help="group size exponent: groups of n^chi nodes")
    p.add_argument("--adversary", default="none",
                   help="none | random:<rate> | greedy | script:<path>")
    p.add_argument("--route-cost", type=int, default=2,
                   help="rounds billed per quiet-phase shuffle")
    p.add_argument("--b", type=int, default=1,
                   help="symbols carry b*log2(n) bits")
    p.add_argument("--pipeline-collect", action="store_true",
                   help="let collection windows share distinct groups "
                        "(rounds may drop; outputs never change)")
    p.add_argument("--out", metavar="PATH", help="write CSV here, not stdout")
    p.add_argument("--config", metavar="PATH",
                   help="key=value defaults file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faultyclique",
        description="Crash-fault-tolerant clique protocol simulator")
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="one simulation, one CSV row")
    _add_run_flags(p_run, sweep=False)
    p_run.set_defaults(func=cmd_run, flag_parser=p_run)

    p_sweep = sub.add_parser("sweep", help="grid of simulations to CSV")
    _add_run_flags(p_sweep, sweep=True)
    p_sweep.set_defaults(func=cmd_sweep, flag_parser=p_sweep)

    p_verify = sub.add_parser("verify", help="run the acceptance gate")
    p_verify.set_defaults(func=cmd_verify)

    p_plot = sub.add_parser("plot", help="render plots from a sweep CSV")
    p_plot.add_argument("csv", help="sweep CSV path")
    p_plot.add_argument("--outdir", default=".")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_help()
        return EXIT_CONFIG
    ns = parser.parse_args(argv)
    if ns.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        if hasattr(ns, "config"):
            ns = apply_config_defaults(ns.flag_parser, ns, argv)
        return ns.func(ns)
    except (ModelViolationError, CapViolationError) as e:
        print(f"model violation: {e}", file=sys.stderr)
        return EXIT_MODEL
    except (WorkloadError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as e:
        print(f"protocol failure: {e}", file=sys.stderr)
        return EXIT_INCORRECT
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
