"""Command line entry point: simulate, sweep, target, propagation."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import itertools
import json
import os
import re
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, numerics
from .config import ConfigError, load_config, scenario_from_dict, scenario_to_dict
from .dmi import DmiConfig, retarget
from .engine import Scenario, run
from .metrics import audit_dict, blocks_csv, report, timeline_csv
from .propagation import NetworkParams, curve_table, informed_curve, uninformed_integral

EXIT_OK, EXIT_ERROR, EXIT_ASSERT = 0, 1, 2

_ASSERT_RE = re.compile(r"^\s*([a-z_]+)\s*(>=|<=|==|>|<)\s*([-+0-9.eE]+)\s*$")
_ASSERT_KEYS = {"tps": "tps", "fork": "fork_rate", "fork_rate": "fork_rate",
                "blocks": "canonical_blocks", "stale": "stale_blocks", "fee_cv": "fee_cv",
                "makespan": "makespan", "interval": "mean_interval", "fill": "mean_block_fill"}
_OPS = {">=": float.__ge__, "<=": float.__le__, "==": float.__eq__,
        ">": float.__gt__, "<": float.__lt__}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def parse_assertion(text: str):
    m = _ASSERT_RE.match(text)
    if not m or m.group(1) not in _ASSERT_KEYS:
        raise UsageError(f"bad assertion {text!r}; expected e.g. tps>=3.0 or fork<=0.0095")
    return _ASSERT_KEYS[m.group(1)], m.group(2), float(m.group(3))


def check_assertions(metrics: dict, assertions) -> list[str]:
    failed = []
    for key, op, bound in assertions:
        value = metrics.get(key)
        if value is None or not _OPS[op](float(value), bound):
            failed.append(f"{key}={value} violates {key}{op}{bound}")
    return failed


def _simulate_to(s: Scenario, out: Path, trace: bool) -> dict:
    start = time.perf_counter()
    r = run(s, trace=trace)
    m = report(r)
    rep = {"metrics": m.to_dict(), "audit": audit_dict(r),
           "network": dataclasses.asdict(r.network), "drained": r.drained}
    files = {"report": "report.json", "blocks": "blocks.csv", "timeline": "timeline.csv"}
    write_atomic(out / "report.json", _dumps(rep))
    write_atomic(out / "blocks.csv", blocks_csv(r))
    write_atomic(out / "timeline.csv", timeline_csv(r))
    if trace:
        files["trace"] = "trace.json"
        write_atomic(out / "trace.json", _dumps({"events": r.trace}))
    manifest = {"kind": "dmisim-manifest", "config": scenario_to_dict(s), "seed": s.seed,
                "code_version": __version__, "outputs": files, "trace": trace,
                "runtime_seconds": time.perf_counter() - start}
    write_atomic(out / "manifest.json", _dumps(manifest))
    return rep


def cmd_simulate(args) -> int:
    assertions = [parse_assertion(a) for a in args.asserts]
    s = load_config(args.config)
    if args.seed is not None:
        s = dataclasses.replace(s, seed=args.seed)
    rep = _simulate_to(s, Path(args.out), args.trace)
    m = rep["metrics"]
    print(f"tps={m['tps']:.4f} fork_rate={m['fork_rate']:.5f} blocks={m['canonical_blocks']} "
          f"stale={m['stale_blocks']} -> {args.out}")
    failed = check_assertions(m, assertions)
    for f in failed:
        print(f"assertion failed: {f}", file=sys.stderr)
    return EXIT_ASSERT if failed else EXIT_OK


def _axis(text: str) -> np.ndarray:
    """``a:b:n`` (inclusive linspace) or a comma list."""
    if ":" in text:
        a, b, n = text.split(":")
        n = int(n)
        if n < 1:
            raise UsageError(f"empty grid axis {text!r}")
        return np.linspace(float(a), float(b), n)
    vals = [float(v) for v in text.split(",") if v.strip()]
    return np.array(vals)


def analytic_grid(sizes, intervals, network: NetworkParams, model: str = "collision"):
    rows = []
    for size in sizes:
        w = uninformed_integral(informed_curve(size, network, model))
        for interval in intervals:
            rows.append((float(size), float(interval), numerics.fork_rate_from_interval(interval, w)))
    return rows


def _parse_value(v: str):
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return {"true": True, "false": False}.get(v.lower(), v)


def _set_key(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


def _sweep_point(job):
    idx, cfg, out, trace = job
    s = scenario_from_dict(cfg)
    rep = _simulate_to(s, Path(out) / f"point_{idx:04d}", trace)
    return idx, rep


def _mean_canonical_size(point_dir: Path) -> float:
    with open(point_dir / "blocks.csv", newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if r["stale"] == "0" and r["height"] != "0"]
    return float(np.mean([float(r["size"]) for r in rows])) if rows else float("nan")


def cmd_sweep(args) -> int:
    out = Path(args.out)
    s = load_config(args.config) if args.config else Scenario(calibrate=True)
    if args.seed is not None:
        s = dataclasses.replace(s, seed=args.seed)
    if not args.set:
        sizes, intervals = _axis(args.sizes), _axis(args.intervals)
        if len(sizes) == 0 or len(intervals) == 0:
            raise UsageError("empty grid")
        rows = analytic_grid(sizes, intervals, s.resolved_network(), s.propagation_model)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("size", "interval", "analytic_fork_rate"))
        w.writerows((repr(a), repr(b), repr(c)) for a, b, c in rows)
        write_atomic(out / "sweep.csv", buf.getvalue())
        print(f"{len(rows)} grid points -> {out / 'sweep.csv'}")
        return EXIT_OK

    axes = []
    for item in args.set:
        key, _, values = item.partition("=")
        vals = [_parse_value(v) for v in values.split(",") if v.strip()]
        if not key or not vals:
            raise UsageError(f"empty grid axis {item!r}")
        axes.append((key.strip(), vals))
    base = scenario_to_dict(s)
    jobs = []
    for idx, combo in enumerate(itertools.product(*(v for _, v in axes))):
        cfg = json.loads(json.dumps(base))
        for (key, _), value in zip(axes, combo):
            _set_key(cfg, key, value)
        scenario_from_dict(cfg)  # validate before fanning out
        jobs.append((idx, cfg, str(out), args.trace))
    workers = max(1, min(len(jobs), int(os.environ.get("DMI_SIM_THREADS", os.cpu_count() or 1))))
    if workers == 1:
        results = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    results.sort()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["point", *(k for k, _ in axes), "size", "interval", "analytic_fork_rate",
                "observed_fork_rate", "tps", "canonical_blocks"])
    for (idx, rep), combo in zip(results, itertools.product(*(v for _, v in axes))):
        m = rep["metrics"]
        point = scenario_from_dict(jobs[idx][1])
        size = _mean_canonical_size(out / f"point_{idx:04d}")
        interval = m["mean_interval"]
        analytic = ""
        if size == size and interval == interval and interval > 1:
            net = NetworkParams(**rep["network"])
            wint = uninformed_integral(informed_curve(size, net, point.propagation_model))
            analytic = repr(numerics.fork_rate_from_interval(interval, wint))
        w.writerow([idx, *combo, repr(size), repr(interval), analytic, repr(m["fork_rate"]),
                    repr(m["tps"]), m["canonical_blocks"]])
    write_atomic(out / "sweep.csv", buf.getvalue())
    print(f"{len(jobs)} scenario points -> {out / 'sweep.csv'}")
    return EXIT_OK


def _network_from(args) -> NetworkParams:
    return NetworkParams(node_count=args.nodes, neighbor_degree=args.degree,
                         bandwidth=args.bandwidth, delay=args.delay)


def cmd_target(args) -> int:
    cfg = DmiConfig(fork_limit=args.r0, hash_rate=args.hash_rate, network=_network_from(args),
                    min_interval=args.min_interval, max_interval=args.max_interval)
    r = retarget(args.block_size, cfg)
    print(json.dumps({"target": r.target.hex(), "interval": r.interval, "uninformed": r.uninformed,
                      "clamped": r.clamped, "difficulty": numerics.difficulty_from_target(r.target)},
                     sort_keys=True))
    return EXIT_OK


def cmd_propagation(args) -> int:
    c = informed_curve(args.block_size, _network_from(args), args.model)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "f"))
    w.writerows((repr(t), repr(f)) for t, f in curve_table(c))
    w.writerow(("uninformed_integral", repr(uninformed_integral(c))))
    if args.out:
        write_atomic(Path(args.out), buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _add_network_args(p) -> None:
    d = NetworkParams()
    p.add_argument("--block-size", type=float, required=True, help="bytes")
    p.add_argument("--nodes", type=int, default=d.node_count)
    p.add_argument("--degree", type=int, default=d.neighbor_degree)
    p.add_argument("--bandwidth", type=float, default=d.bandwidth, help="bytes per second")
    p.add_argument("--delay", type=float, default=d.delay, help="seconds per hop")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dmisim", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run one scenario and write its reports")
    sim.add_argument("config", help="TOML/JSON scenario, bundled name (sim1..sim5) or manifest.json")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", default="out")
    sim.add_argument("--trace", action="store_true", help="also write the full event trace")
    sim.add_argument("--assert", dest="asserts", action="append", default=[],
                     metavar="EXPR", help="e.g. tps>=3.0 or fork<=0.0095; exit 2 if violated")
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="analytic fork-rate surface or a scenario grid")
    sw.add_argument("config", nargs="?")
    sw.add_argument("--sizes", default="50000:2000000:20", help="a:b:n or comma list (bytes)")
    sw.add_argument("--intervals", default="60:1200:20", help="a:b:n or comma list (seconds)")
    sw.add_argument("--set", action="append", default=[], metavar="KEY=V1,V2",
                    help="simulate a grid over scenario keys, e.g. dmi.fork_limit=0.0095,0.012")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--out", default="sweep_out")
    sw.add_argument("--trace", action="store_true")
    sw.set_defaults(func=cmd_sweep)

    tg = sub.add_parser("target", help="next-block target for a given block size")
    _add_network_args(tg)
    d = DmiConfig()
    tg.add_argument("--r0", type=float, default=d.fork_limit)
    tg.add_argument("--hash-rate", type=float, default=d.hash_rate)
    tg.add_argument("--min-interval", type=float, default=d.min_interval)
    tg.add_argument("--max-interval", type=float, default=d.max_interval)
    tg.set_defaults(func=cmd_target)

    pr = sub.add_parser("propagation", help="informed-nodes curve as CSV")
    _add_network_args(pr)
    pr.add_argument("--model", choices=("collision", "linear"), default="collision")
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_propagation)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"dmisim: {exc}", file=sys.stderr)
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        print(f"dmisim: error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
