"""Command line entry point.

    unet run <scenario.yaml> [--seed N] [--csv out.csv] [--bridge-log f.jsonl]
             [--routes-csv f.csv]
    unet experiment <handover|gateway|e2e|task|traffic|reliability> [flags]
    unet profiles [--file user.yaml]
    unet record-bridge <scenario.yaml> --out recording.jsonl
    unet serve <scenario.yaml> [--listen-bridge PORT] [--rate FACTOR]
    unet plot <metrics.csv> [--out-dir plots]

Exit status is nonzero on configuration or scenario errors.
"""
from __future__ import annotations

import argparse
import csv
import sys

from . import experiments
from .errors import ConfigError, ScenarioError, UnetError
from .metrics import CTRL_BYTES, DATA_BYTES, MetricsLog
from .profiles import load_profiles
from .recorder import BridgeRecorder
from .scenario import load_scenario


def _cmd_run(args: argparse.Namespace) -> int:
    if args.seed is not None:
        import yaml

        from .scenario import build_scenario

        doc = yaml.safe_load(open(args.scenario, encoding="utf-8"))
        doc.setdefault("scenario", {})["seed"] = args.seed
        built = build_scenario(doc)
    else:
        built = load_scenario(args.scenario)
    recorder = BridgeRecorder(built.dpsl) if args.bridge_log else None

    world = built.world
    buckets: dict[tuple[int, str], int] = {}

    def tap(link, sender, frame: bytes, category: str) -> None:
        key = (int(world.sim.now // 1000), "ctrl" if frame[4] not in (20, 22) else "data")
        buckets[key] = buckets.get(key, 0) + len(frame)

    world.emu.delivery_tap = tap
    built.run()

    log = MetricsLog()
    for (second, kind), count in sorted(buckets.items()):
        log.add(second * 1000.0, DATA_BYTES if kind == "data" else CTRL_BYTES, count, scenario=built.name)
    log.extend(world.metrics)
    if args.csv:
        log.write_csv(args.csv)
        print(f"wrote {len(log.rows)} metric rows to {args.csv}")
    if recorder is not None:
        recorder.write(args.bridge_log)
        print(f"wrote {len(recorder.rows)} bridge ops to {args.bridge_log}")
    if args.routes_csv:
        with open(args.routes_csv, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["node", "dest", "next_hop", "metric"])
            for node_id in sorted(world.nodes):
                node = world.nodes[node_id]
                rows = getattr(node, "routing_rows", lambda: [])()
                writer.writerows(rows)
        print(f"wrote routing tables to {args.routes_csv}")
    roster = built.dpsl.roster_rows()
    print(f"scenario {built.name}: t={world.sim.now / 1000:.1f}s roster={roster}")
    return 0


def _write_metrics(result_metrics: MetricsLog, path: str | None) -> None:
    if path:
        result_metrics.write_csv(path)
        print(f"wrote {len(result_metrics.rows)} metric rows to {path}")


def _cmd_experiment(args: argparse.Namespace) -> int:
    name = args.name
    log = MetricsLog()
    if name == "handover":
        for kind in args.kinds.split(","):
            r = experiments.run_handover(args.profile, kind.strip(), seed=args.seed, crossings=args.crossings)
            print(
                f"handover {r.profile} {r.channel_kind}: {r.overall.mean / 1000:.3f}s "
                f"+/- {r.overall.ci95 / 1000:.3f} (g1->g2 {r.g1_to_g2.mean / 1000:.3f}, "
                f"g2->g1 {r.g2_to_g1.mean / 1000:.3f}, n={r.overall.n})"
            )
            log.extend(r.metrics)
    elif name == "gateway":
        for case in ("C1", "C2", "C3"):
            r = experiments.run_gateway_load(case, seed=args.seed)
            flows = ", ".join(f"{k}={v:.1f}" for k, v in r.per_flow_mbps.items())
            print(
                f"gateway {case}: throughput {r.throughput_mbps.mean:.2f} Mbps, "
                f"processing {r.proc_delay_us.mean / 1000:.3f} ms, per-flow [{flows}]"
            )
            log.extend(r.metrics)
    elif name == "e2e":
        for profile in args.profiles.split(","):
            r = experiments.run_e2e(profile.strip(), seed=args.seed)
            print(
                f"e2e {r.profile}: throughput {r.throughput_mbps.mean:.2f} Mbps, "
                f"PDD {r.pdd_ms.mean:.2f} ms, PLP {r.plp:.2e}"
            )
            log.extend(r.metrics)
    elif name == "task":
        for profile in args.profiles.split(","):
            r = experiments.run_task_exec(profile.strip(), args.command, seed=args.seed)
            print(
                f"task {r.profile} {r.command}: {r.task_ms.mean:.2f} ms +/- {r.task_ms.ci95:.2f} "
                f"(n={r.trials}, timeouts={r.timeouts}, one-way PDD {r.one_way_pdd_ms.mean:.2f} ms)"
            )
            log.extend(r.metrics)
    elif name == "traffic":
        for hz in (3.0, 6.0):
            r = experiments.run_traffic_over_time(freq_hz=hz, seed=args.seed)
            print(f"traffic {hz} Hz: spikes at " + ", ".join(
                f"n={s.n} x{(s.spike_bytes_per_s / s.prior_steady_bytes_per_s):.2f}"
                if s.prior_steady_bytes_per_s else f"n={s.n} (first)"
                for s in r.spikes
            ))
            log.extend(r.metrics)
    elif name == "reliability":
        for fps in (20.0, 30.0):
            r = experiments.run_reliability(fps, seed=args.seed)
            print(f"reliability {fps:.0f} fps: mean frame loss {r.mean_loss_percent:.2f}%")
            log.extend(r.metrics)
    else:
        raise ScenarioError(f"unknown experiment {name!r}")
    _write_metrics(log, args.csv)
    return 0


def _cmd_profiles(args: argparse.Namespace) -> int:
    profiles = load_profiles(args.file)
    for name in sorted(profiles):
        p = profiles[name]
        rng = "inf" if p.max_range_m == float("inf") else f"{p.max_range_m:.0f} m"
        print(
            f"{name:24s} {p.standard.value:16s} {p.data_rate_mbps:7.1f} Mbps  range {rng:>9s}  "
            f"loss {p.loss_prob:.3f}  rto {p.retx_timeout_ms:.0f} ms x{p.retx_limit}"
        )
    return 0


def _cmd_record_bridge(args: argparse.Namespace) -> int:
    built = load_scenario(args.scenario)
    recorder = BridgeRecorder(built.dpsl)
    built.run()
    recorder.write(args.out)
    print(f"wrote {len(recorder.rows)} bridge ops to {args.out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    from .live import serve_scenario

    serve_scenario(
        args.scenario, bridge_port=args.listen_bridge, uav_port=args.listen_uav, rate=args.rate
    )
    return 0


def _cmd_plot(args: argparse.Namespace) -> int:
    from .plots import plot_metrics_csv

    written = plot_metrics_csv(args.csv, args.out_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unet", description="UAV fleet network emulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--csv", default=None)
    run.add_argument("--bridge-log", default=None)
    run.add_argument("--routes-csv", default=None)
    run.set_defaults(fn=_cmd_run)

    exp = sub.add_parser("experiment", help="run a built-in experiment")
    exp.add_argument("name", choices=["handover", "gateway", "e2e", "task", "traffic", "reliability"])
    exp.add_argument("--profile", default="TPLink WR902AC")
    exp.add_argument("--profiles", default="AlfaTube 2H,Ubiquiti Bullet M2,TPLink WR902AC")
    exp.add_argument("--kinds", default="RELIABLE,UNRELIABLE,ECHO")
    exp.add_argument("--command", default="SET_MODE")
    exp.add_argument("--crossings", type=int, default=32)
    exp.add_argument("--seed", type=int, default=1)
    exp.add_argument("--csv", default=None)
    exp.set_defaults(fn=_cmd_experiment)

    prof = sub.add_parser("profiles", help="list link profiles")
    prof.add_argument("--file", default=None)
    prof.set_defaults(fn=_cmd_profiles)

    rec = sub.add_parser("record-bridge", help="record the bridge stream of a scenario")
    rec.add_argument("scenario")
    rec.add_argument("--out", required=True)
    rec.set_defaults(fn=_cmd_record_bridge)

    serve = sub.add_parser("serve", help="run a scenario live with a WebSocket bridge")
    serve.add_argument("scenario")
    serve.add_argument("--listen-bridge", type=int, default=9090, help="bridge WebSocket port")
    serve.add_argument("--listen-uav", type=int, default=0, help="UAV channel listener port (0 = ephemeral)")
    serve.add_argument("--rate", type=float, default=1.0)
    serve.set_defaults(fn=_cmd_serve)

    plot = sub.add_parser("plot", help="render static plots from a metrics CSV")
    plot.add_argument("csv")
    plot.add_argument("--out-dir", default="plots")
    plot.set_defaults(fn=_cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
