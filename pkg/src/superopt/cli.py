"""Command-line interface: optimize, train, eval, gendata, bench.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
inconsistent inputs).  Every command writes ``run.json`` into its output
directory before any result file, and rewrites it with timings at the end.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._jit import BACKEND
from .cost import CostWeights, total_cost
from .data import build_hd, hd_task, load_split, save_split, synth_generate, written_registers
from .data.corpus import parse_tests, random_inputs
from .evaluation import evaluate, write_comparison, write_snapshots
from .isa import DEFAULT_ISA, ParseError, TestSuite, make_tests, parse, render
from .learn import (DEFAULT_LR, AdamState, BiasModel, TrainConfig, load_model, save_model, train,
                    zero_model)
from .learn.train import params_for
from .mcmc import SearchConfig, metropolis_run
from .proposal import ProposalParams

log = logging.getLogger("superopt")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# run manifest
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


class RunManifest:
    """Command, full configuration, seed, code version, outputs and timings."""

    def __init__(self, command: str, args: argparse.Namespace, out_dir: Path):
        self.out_dir = out_dir
        config = {k: v for k, v in vars(args).items() if k != "func"}
        self.data = {
            "command": command,
            "config": json.loads(json.dumps(config, default=str)),
            "seed": getattr(args, "seed", None),
            "version": {"superopt": __version__, "backend": BACKEND,
                        "numpy": np.__version__, "python": platform.python_version()},
            "outputs": [],
            "timings": {},
        }
        self._t0 = time.perf_counter()

    def output(self, name: str) -> Path:
        self.data["outputs"].append(name)
        return self.out_dir / name

    def write(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(self.out_dir / "run.json",
                      json.dumps(self.data, indent=2, sort_keys=True) + "\n")

    def finish(self, **timings):
        self.data["timings"] = {"wall_seconds": time.perf_counter() - self._t0, **timings}
        self.write()


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _weights(args) -> CostWeights:
    try:
        return CostWeights(args.omega_e, args.omega_p)
    except ValueError as e:
        raise UsageError(str(e))


def _search_config(args, budget=None) -> SearchConfig:
    try:
        return SearchConfig(budget or args.budget, _weights(args), args.beta, args.seed)
    except ValueError as e:
        raise UsageError(str(e))


def _read_program(path):
    try:
        return parse(Path(path).read_text(), DEFAULT_ISA)
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}")
    except ParseError as e:
        raise DataError(f"{path}: {e}")


def _load_model(spec: str):
    if spec == "uniform":
        return None
    try:
        model = load_model(spec)
    except OSError as e:
        raise DataError(f"cannot read model {spec}: {e.strerror}")
    except (ValueError, KeyError) as e:
        raise DataError(f"{spec}: {e}")
    try:
        model.check_isa(DEFAULT_ISA)
    except ValueError as e:
        raise DataError(f"{spec}: {e}")
    return model


def _load_data(path):
    try:
        return load_split(path, DEFAULT_ISA)
    except (OSError, ValueError, KeyError) as e:
        raise DataError(f"cannot load dataset {path}: {e}")


def _snapshots(text: str) -> tuple[int, ...]:
    try:
        snaps = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad snapshot list {text!r}")
    if not snaps or min(snaps) < 1:
        raise argparse.ArgumentTypeError("snapshots must be positive iteration counts")
    return snaps


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_optimize(args) -> int:
    program = _read_program(args.program)
    if args.tests and args.task:
        raise UsageError("--tests and --task are mutually exclusive")
    if args.task:
        if not 1 <= args.task <= 25:
            raise UsageError("--task must be in 1..25")
        tests = hd_task(args.task).make_tests(args.seed)
    elif args.tests:
        try:
            tests = parse_tests(Path(args.tests).read_text(), DEFAULT_ISA)
        except OSError as e:
            raise DataError(f"cannot read {args.tests}: {e.strerror}")
        except ValueError as e:
            raise DataError(f"{args.tests}: {e}")
    else:
        # the program is its own specification
        outputs = written_registers(program)
        if not outputs:
            raise DataError("program has no live instructions and no tests were given")
        rng = np.random.default_rng([args.seed, 3])
        tests = TestSuite.from_cases(make_tests(program, random_inputs(rng, 16, DEFAULT_ISA.n_regs),
                                                outputs))
    config = _search_config(args)
    model = _load_model(args.model)
    out = Path(args.out)
    manifest = RunManifest("optimize", args, out)
    manifest.write()
    if total_cost(program, tests, config.weights).total == 0:
        raise DataError("start program has zero cost; nothing to normalise against")
    params = params_for(model, program)
    trace = metropolis_run(program, program, params, tests, config)
    _atomic_write(manifest.output("best.s"), render(trace.best))
    with open(manifest.output("trace.csv"), "w") as fh:
        trace.write_csv(fh)
    summary = {"initial_cost": trace.initial_cost, "best_cost": trace.best_cost,
               "score": trace.score, "budget": trace.budget,
               "accepted": int(trace.accepted.sum())}
    _atomic_write(manifest.output("summary.json"), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    manifest.finish()
    print(f"initial cost {trace.initial_cost:g}  best cost {trace.best_cost:g}  "
          f"score {trace.score:.4f}")
    print(render(trace.best), end="")
    return EXIT_OK


def cmd_train(args) -> int:
    train_set, test_set = _load_data(args.data)
    if not len(train_set):
        raise DataError("training split is empty")
    out = Path(args.out)
    mode = train_set.provenance.get("mode", "hd-augment")
    lr = args.lr if args.lr is not None else DEFAULT_LR[(args.model_kind,
                                                         "synthetic" if mode == "synthetic" else "hd")]
    args.lr = lr
    if args.epochs < 0 or args.minibatch < 1 or args.rollouts < 1:
        raise UsageError("epochs must be >= 0, minibatch and rollouts >= 1")
    cfg = TrainConfig(model_kind=args.model_kind, epochs=args.epochs, lr=lr,
                      minibatch=args.minibatch, rollouts=args.rollouts, budget=args.budget,
                      beta=args.beta, weights=_weights(args), credit=args.credit,
                      baseline=args.baseline, seed=args.seed, eval_runs=args.eval_runs)
    model = adam = None
    start_epoch, curves = 0, []
    ckpt = out / "checkpoint.json"
    if args.resume:
        if not ckpt.exists():
            raise DataError(f"no checkpoint in {out}")
        state = json.loads(ckpt.read_text())
        model = _load_model(str(out / "model.bin"))
        if model.kind != args.model_kind:
            raise UsageError(f"checkpoint holds a {model.kind} model")
        adam = AdamState.load(out / "adam.npz")
        start_epoch = state["epoch"]
        curves = [tuple(c) for c in state["curves"]]
    manifest = RunManifest("train", args, out)
    manifest.write()
    model_path = manifest.output("model.bin")
    adam_path = manifest.output("adam.npz")
    curves_path = manifest.output("curves.csv")
    manifest.output("checkpoint.json")

    def save(epoch, result):
        save_model(result.model, model_path)
        result.adam.save(adam_path)
        with open(curves_path, "w") as fh:
            result.write_curves(fh)
        _atomic_write(ckpt, json.dumps({"epoch": epoch, "curves": result.curves}) + "\n")

    t0 = time.perf_counter()
    if model is None:
        model = zero_model(args.model_kind, DEFAULT_ISA, args.seed)
    result = train(train_set.entries, test_set.entries, cfg, model, adam, start_epoch,
                   on_epoch=save, curves=curves)
    save(max(start_epoch, cfg.epochs), result)
    manifest.finish(train_seconds=time.perf_counter() - t0)
    for epoch, tr, te in result.curves:
        print(f"epoch {epoch:3d}  train {tr:.4f}  test {te:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    train_set, test_set = _load_data(args.data)
    models = {"uniform": None}
    for spec in args.models:
        if spec == "uniform":
            continue
        name = Path(spec).with_suffix("").as_posix()
        if name in models:
            raise UsageError(f"model {spec} given twice")
        models[name] = _load_model(spec)
    splits = {"train": train_set.entries, "test": test_set.entries}
    splits = {k: v for k, v in splits.items() if v and (args.split in (None, k))}
    _search_config(args)
    out = Path(args.out)
    manifest = RunManifest("eval", args, out)
    manifest.write()
    results = evaluate(models, splits, args.budget, args.runs, args.seed, args.snapshots,
                       args.beta, _weights(args))
    with open(manifest.output("comparison.csv"), "w") as fh:
        write_comparison(fh, results, args.budget)
    with open(manifest.output("snapshots.csv"), "w") as fh:
        write_snapshots(fh, results)
    manifest.finish()
    for r in results:
        cols = "  ".join(f"@{s} {r.mean(s):.4f}" for s in r.snapshots)
        print(f"{r.model:>12s} {r.split:>5s}  mean {r.mean(args.budget):.4f}  {cols}")
    return EXIT_OK


def cmd_gendata(args) -> int:
    out = Path(args.out)
    manifest = RunManifest("gendata", args, out)
    manifest.write()
    if args.mode == "hd-augment":
        train_set, test_set = build_hd(args.variants, args.aug_budget, args.chains, args.seed)
    else:
        if args.count % 2:
            raise UsageError("--count must be even")
        train_set, test_set = synth_generate(args.count, args.live_length, args.walk_iters,
                                             args.seed)
    save_split(out, train_set, test_set)
    for name in ("train", "test", "manifest.json"):
        manifest.output(name)
    manifest.finish()
    print(f"{args.mode}: {len(train_set)} train, {len(test_set)} test entries in {out}")
    return EXIT_OK


BENCH_TASK = 20


def bench_workload(seed: int = 0):
    task = hd_task(BENCH_TASK)
    return task.reference, task.make_tests(seed)


def bench_once(model, program, tests, iterations: int, seed: int) -> tuple[float, int]:
    """Seconds for one run including the proposal evaluation, and the number
    of ProposalParams built during it."""
    before = ProposalParams.constructions
    t0 = time.perf_counter()
    params = params_for(model, program)
    metropolis_run(program, program, params, tests, SearchConfig(iterations, seed=seed))
    return time.perf_counter() - t0, ProposalParams.constructions - before


def random_bias(seed: int) -> BiasModel:
    rng = np.random.default_rng(seed)
    base = BiasModel.zeros(DEFAULT_ISA)
    return base.with_arrays([rng.normal(0, 1, a.shape) for a in base.arrays])


def run_bench(model, iterations: int, repeats: int = 5, seed: int = 0) -> list[dict]:
    program, tests = bench_workload(seed)
    rows = []
    categorical = model if model is not None else random_bias(seed)
    for name, m in (("uniform", None), ("categorical", categorical)):
        bench_once(m, program, tests, 10, seed)        # compile / warm caches
        times, counts = [], []
        for r in range(repeats):
            dt, n = bench_once(m, program, tests, iterations, seed + r)
            times.append(dt)
            counts.append(n)
        best = min(times)
        rows.append({"proposal": name, "backend": BACKEND, "iterations": iterations,
                     "seconds": best, "iters_per_sec": iterations / best,
                     "constructions_per_run": max(counts) if len(set(counts)) == 1 else -1})
    base = rows[0]["iters_per_sec"]
    for r in rows:
        r["slowdown"] = base / r["iters_per_sec"]
    return rows


def cmd_bench(args) -> int:
    if args.iterations < 1:
        raise UsageError("--iterations must be >= 1")
    model = _load_model(args.model)
    out = Path(args.out) if args.out else None
    manifest = None
    if out:
        manifest = RunManifest("bench", args, out)
        manifest.write()
    rows = run_bench(model, args.iterations, args.repeats, args.seed)
    print(f"{'proposal':>12s} {'backend':>8s} {'iters/s':>12s} {'slowdown':>9s} {'evals/run':>9s}")
    for r in rows:
        print(f"{r['proposal']:>12s} {r['backend']:>8s} {r['iters_per_sec']:12.0f} "
              f"{r['slowdown']:9.2f} {r['constructions_per_run']:9d}")
    ok = all(r["constructions_per_run"] == 1 for r in rows)
    print("proposal evaluated once per run:", "yes" if ok else "NO")
    if manifest:
        with open(manifest.output("bench.csv"), "w") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        manifest.finish()
    return EXIT_OK if ok else EXIT_DATA


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _search_flags(p, budget=200):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=budget, help="MCMC iterations per run")
    p.add_argument("--beta", type=float, default=1.0, help="inverse temperature")
    p.add_argument("--omega-e", type=float, default=4.0, help="weight of the mismatch term")
    p.add_argument("--omega-p", type=float, default=1.0, help="weight of the latency term")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="superopt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("optimize", help="search for a cheaper equivalent of one program")
    p.add_argument("program", help="program file in the text format")
    p.add_argument("--tests", help="tests file; default: random self-generated tests")
    p.add_argument("--task", type=int, help="use the tests of a Hacker's Delight task (1..25)")
    p.add_argument("--model", default="uniform", help="model file or 'uniform'")
    p.add_argument("--out", default="optimize_out")
    _search_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("train", help="train a proposal model with REINFORCE")
    p.add_argument("data", help="dataset directory written by gendata")
    p.add_argument("--model-kind", choices=("bias", "mlp"), default="bias")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=None,
                   help="base learning rate (divided by the minibatch size)")
    p.add_argument("--minibatch", type=int, default=32)
    p.add_argument("--rollouts", type=int, default=100, help="runs per program per step")
    p.add_argument("--baseline", type=_on_off, default=False, metavar="on|off")
    p.add_argument("--credit", choices=("t-ge-i", "t-gt-i"), default="t-ge-i")
    p.add_argument("--eval-runs", type=int, default=5, help="runs per program for the curves")
    p.add_argument("--resume", action="store_true", help="continue from the checkpoint in --out")
    p.add_argument("--out", default="train_out")
    _search_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="compare models against the uniform proposal")
    p.add_argument("data", help="dataset directory written by gendata")
    p.add_argument("models", nargs="*", help="model files (uniform is always included)")
    p.add_argument("--runs", type=int, default=20, help="runs per program")
    p.add_argument("--snapshots", type=_snapshots, default=(100, 200, 400))
    p.add_argument("--split", choices=("train", "test"), default=None)
    p.add_argument("--out", default="eval_out")
    _search_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gendata", help="build the augmented HD or the synthetic corpus")
    p.add_argument("--mode", choices=("hd-augment", "synthetic"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variants", type=int, default=20, help="programs per HD task")
    p.add_argument("--aug-budget", type=int, default=2000, help="steps per augmentation chain")
    p.add_argument("--chains", type=int, default=10, help="augmentation chains per task")
    p.add_argument("--count", type=int, default=600, help="synthetic programs (even)")
    p.add_argument("--live-length", type=int, default=6)
    p.add_argument("--walk-iters", type=int, default=5000)
    p.add_argument("--out", default="data")
    p.set_defaults(func=cmd_gendata)

    p = sub.add_parser("bench", help="MCMC throughput, uniform vs categorical proposal")
    p.add_argument("--model", default="uniform",
                   help="model file for the categorical row; 'uniform' uses a random Bias")
    p.add_argument("--iterations", type=int, default=10000)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"superopt: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"superopt: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
