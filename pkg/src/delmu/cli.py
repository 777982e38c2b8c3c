"""Command line entry point: ``delmu <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import channel
from .baseline import brute_force_solve, greedy_solve
from .data import generate_instances, label_instances, load_dataset, split_dataset
from .globalsearch import GsOptions, multistart_solve
from .harness import blockage_script, delmu_solve, evaluate, load_script, replay, write_replay
from .model import DemandInstance, builtin_topology, load_topology
from .nn import TrainConfig, load_model, save_model, train
from .utility import DEFAULT_PARAMS, load_params

log = logging.getLogger("delmu")


def _params(args):
    if args.params:
        with open(args.params) as fh:
            return load_params(fh.read())
    return DEFAULT_PARAMS


def _topology(args):
    if getattr(args, "topology_file", None):
        with open(args.topology_file) as fh:
            return load_topology(fh.read())
    return builtin_topology(args.topology)


def load_instance(path) -> DemandInstance:
    """Instance file: ``{"min_rate": [[...]], "max_demand": [[...]]}`` in Mbps."""
    with open(path) as fh:
        doc = json.load(fh)
    return DemandInstance(np.array(doc["min_rate"], float), np.array(doc["max_demand"], float))


def cmd_gen_data(args):
    topo = builtin_topology(args.topology)
    instances = generate_instances(args.topology, args.count, args.seed)
    opts = GsOptions(n_starts=args.starts)

    def progress(row, lr):
        if (row + 1) % 100 == 0:
            log.info("labelled %d/%d", row + 1, args.count)

    ds = label_instances(topo, instances, _params(args), opts, args.topology, args.seed,
                         path=args.data_out, progress=progress)
    print(f"{len(ds)} rows -> {args.data_out}")


def cmd_train(args):
    # several files train one shared model; each is split on its own
    parts = [split_dataset(load_dataset(path), args.ratio, args.seed)[0].features_and_labels()
             for path in args.data]
    X = np.concatenate([x for x, _ in parts])
    Y = np.concatenate([y for _, y in parts])
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, batch_size=args.batch_size, seed=args.seed)

    def progress(epoch, loss):
        if (epoch + 1) % 50 == 0:
            log.info("epoch %d loss %.6g", epoch + 1, loss)

    model, hist = train(X, Y, cfg, progress=progress)
    save_model(model, args.model_out)
    print(f"trained on {len(X)} rows, final loss {hist[-1]:.6g} -> {args.model_out}")


def cmd_solve(args):
    topo = _topology(args)
    inst = load_instance(args.instance)
    params = _params(args)
    if args.solver == "greedy":
        r = greedy_solve(topo, inst, params, step=args.step)
    elif args.solver == "brute":
        r = brute_force_solve(topo, inst, params, grid=args.grid)
    elif args.solver == "gs":
        r = multistart_solve(topo, inst, params, GsOptions(n_starts=args.starts, seed=args.seed))
    else:
        if not args.model:
            raise SystemExit("--model is required for the delmu solver")
        r = delmu_solve(load_model(args.model), topo, inst, args.topology, params)
    print(",".join(repr(float(x)) for x in r.ravel()))


def cmd_eval(args):
    ds = load_dataset(args.data)
    _, test = split_dataset(ds, args.ratio, args.seed)
    topo = builtin_topology(ds.topology_index)
    report = evaluate(topo, test, load_model(args.model), _params(args), ds.topology_index)
    report.write(args.out)
    for s in ("gs", "greedy", "delmu"):
        m = report.summary(s)
        print(f"{s:>6}: median {m['median']:.3f}  q1 {m['q1']:.3f}  q3 {m['q3']:.3f}  "
              f"mean time {m['mean_seconds'] * 1e3:.3f} ms  feasible {m['feasible_rate']:.0%}")


def cmd_replay(args):
    topo = builtin_topology(args.topology)
    if args.script:
        with open(args.script) as fh:
            script = load_script(fh.read())
    else:
        script = blockage_script()
    steps = replay(topo, script, load_model(args.model), _params(args), args.topology,
                   tick_ms=args.tick)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "replay.csv")
    write_replay(steps, path)
    for s in steps:
        print(f"t={s.t_ms:7.1f} ms  " + " ".join(f"{x:7.1f}" for x in s.allocation.ravel()))
    print(f"-> {path}")


def cmd_capacity(args):
    print(repr(channel.link_capacity(args.gains, args.noise, args.pmax, args.bandwidth)))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="delmu", description=__doc__)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", help="utility parameter JSON (default: built-in table)")
    p.add_argument("--out", default=".", help="output directory for reports")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate and label instances")
    g.add_argument("--topology", type=int, required=True, choices=range(1, 5))
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    g.add_argument("--out", dest="data_out", required=True, help="dataset CSV")
    g.add_argument("--starts", type=int, default=100)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train the surrogate on the 80%% split")
    t.add_argument("--data", required=True, nargs="+", help="one or more dataset CSVs")
    t.add_argument("--model-out", required=True)
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--ratio", type=float, default=0.8)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--solver", choices=("greedy", "brute", "gs", "delmu"), required=True)
    s.add_argument("--topology", type=int, default=1, choices=range(1, 5))
    s.add_argument("--topology-file")
    s.add_argument("--instance", required=True)
    s.add_argument("--step", type=float, default=1.0)
    s.add_argument("--grid", type=float, default=10.0)
    s.add_argument("--starts", type=int, default=100)
    s.add_argument("--model")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("eval", help="evaluate greedy and surrogate on the 20%% split")
    e.add_argument("--data", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--ratio", type=float, default=0.8)
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("replay", help="replay a dynamic event script")
    r.add_argument("--model", required=True)
    r.add_argument("--script")
    r.add_argument("--topology", type=int, default=3, choices=range(1, 5))
    r.add_argument("--tick", type=float)
    r.set_defaults(func=cmd_replay)

    c = sub.add_parser("capacity", help="water-filled MIMO link capacity")
    c.add_argument("--gains", type=float, nargs="+", required=True)
    c.add_argument("--pmax", type=float, required=True)
    c.add_argument("--noise", type=float, required=True)
    c.add_argument("--bandwidth", type=float, default=1.0)
    c.set_defaults(func=cmd_capacity)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
