"""Command-line entry point: ``tspmdf {generate,train,solve,eval,ablate}``.

Reports are JSON lines. Each instance produces one record::

    {"kind": "instance", "id", "n", "base_length", "mdf_best_length",
     "trace", "seconds", ...}

and the file ends with one ``{"kind": "summary", ...}`` record holding means.
Records are written in instance-id order whatever the degree of parallelism.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .agnn import ShapeError
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .constructors import CONSTRUCTORS
from .core import TourError
from .infer import SolveConfig, mdf_solve, random_modifier_solve
from .tsplib import TsplibError, generate_uniform, nint_tour_length, read_tsplib, serialize_tsplib
from .train import TrainConfig, train

ABLATION_MODES = {
    # mode: (head, unified, lambda or None for "as given")
    "basic": ("gaussian", False, 0.0),
    "discrete": ("discrete", False, 0.0),
    "discrete-imitation": ("discrete", False, None),
    "full": ("discrete", True, None),
}


class CliError(Exception):
    pass


def _workers(value):
    return value if value else (os.cpu_count() or 1)


# -- instance sources ---------------------------------------------------------


def _instances(args):
    """Yield ``(id, instance)`` either from ``--dir``/``--instance`` or generated."""
    if getattr(args, "instance", None):
        return [(Path(args.instance).stem, read_tsplib(args.instance))]
    if getattr(args, "dir", None):
        files = sorted(Path(args.dir).glob("*.tsp"))
        if not files:
            raise CliError(f"no .tsp files in {args.dir}")
        return [(f.stem, read_tsplib(f)) for f in files]
    if args.n and args.count:
        return [(f"uniform-{args.instance_seed}-{i}", generate_uniform(args.n, args.instance_seed, i))
                for i in range(args.count)]
    raise CliError("give --dir DIR or --n N --count C")


# -- reports ------------------------------------------------------------------


def _record(idx, name, inst, res, rounding: bool, with_excluding: bool):
    rec = {
        "kind": "instance",
        "id": name,
        "index": idx,
        "n": inst.n,
        "base_length": res.base_length,
        "mdf_best_length": res.best_length,
        "trace": res.trace,
        "seconds": res.seconds,
    }
    if res.refined_length is not None:
        rec["two_opt_length"] = res.refined_length
    if with_excluding:
        rec["best_excluding_s"] = res.best_excluding_s
    if rounding:
        rec["base_length_nint"] = nint_tour_length(inst, res.base_tour)
        rec["final_length_nint"] = nint_tour_length(inst, res.best_tour)
    return rec


def _summary(records):
    keys = ["base_length", "mdf_best_length", "two_opt_length", "best_excluding_s",
            "base_length_nint", "final_length_nint", "seconds"]
    out = {"kind": "summary", "count": len(records)}
    for key in keys:
        vals = [r[key] for r in records if key in r]
        if vals:
            out[f"mean_{key}"] = float(np.mean(vals))
    if records:
        out["mean_relative_reduction"] = float(
            np.mean([1.0 - r["mdf_best_length"] / r["base_length"] for r in records])
        )
    return out


def _write_report(records, path):
    lines = [json.dumps(r) for r in records] + [json.dumps(_summary(records))]
    text = "\n".join(lines) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _solve_all(args, params, random_mode=False):
    """Solve every instance; the model's forward pass runs serially, while the
    constructor calls inside each iteration fan out over ``--workers`` threads."""
    cfg = SolveConfig(
        T=args.t_iters if (params is not None or random_mode) else 0,
        samples_per_iter=args.samples,
        M=args.m_digits,
        constructor=args.constructor,
        seed=args.seed,
        run_two_opt=args.two_opt,
        workers=_workers(args.workers),
    )
    records = []
    for idx, (name, inst) in enumerate(_instances(args)):
        cfg.instance = idx
        if random_mode or params is None:
            # without a model T is 0, which yields the base constructor's tour
            res = random_modifier_solve(inst, cfg)
        else:
            res = mdf_solve(inst, params, cfg)
        records.append(_record(idx, name, inst, res, args.tsplib_rounding, random_mode))
    return records


def _load(args):
    if not args.ckpt:
        return None
    expect = {"M": args.m_digits} if args.m_digits else None
    params, _, _ = load_checkpoint(args.ckpt, expect)
    return params


# -- commands -----------------------------------------------------------------


def cmd_generate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(args.count - 1)))
    for i in range(args.count):
        name = f"uniform_n{args.n}_s{args.seed}_{i:0{width}d}"
        inst = generate_uniform(args.n, args.seed, i)
        (out / f"{name}.tsp").write_text(serialize_tsplib(inst, name, f"uniform n={args.n} seed={args.seed} index={i}"))
    return 0


def _train_config(args, **override):
    cfg = TrainConfig(
        n=args.n,
        epochs=args.epochs,
        batch_size=args.batch,
        T=args.t_iters,
        samples_per_iter=args.samples,
        M=args.m_digits,
        lam=args.lam,
        w_fixed=args.w_fixed,
        constructor=args.constructor,
        seed=args.seed,
        H=args.hidden,
        L=args.layers,
        k=args.k,
        lr=args.lr,
        weight_decay=args.weight_decay,
        workers=_workers(args.workers),
    )
    for key, val in override.items():
        setattr(cfg, key, val)
    return cfg


def _progress(m):
    last = m.steps[-1] if m.steps else {}
    print(
        f"epoch {m.epoch}: best reduction excluding s {m.best_sampled_reduction:.4f}, "
        f"final mean reduction {last.get('mean_reduction', 0.0):.4f}, {m.seconds:.1f}s",
        file=sys.stderr,
    )


def cmd_train(args):
    cfg = _train_config(args)
    params, opt, _ = train(cfg, args.metrics, on_epoch=None if args.quiet else _progress)
    save_checkpoint(args.out, params, opt, k=cfg.k, extra={"unified": cfg.unified, "n": cfg.n})
    return 0


def cmd_solve(args):
    records = _solve_all(args, _load(args))
    _write_report(records, args.out)
    return 0


def cmd_eval(args):
    records = _solve_all(args, _load(args))
    _write_report(records, args.report)
    return 0


def cmd_ablate(args):
    if args.mode == "random":
        records = _solve_all(args, None, random_mode=True)
        _write_report(records, args.report)
        return 0
    head, unified, lam = ABLATION_MODES[args.mode]
    if args.ckpt:
        params, _, header = load_checkpoint(args.ckpt, {"head": head})
        unified = header.get("extra", {}).get("unified", unified)
    else:
        cfg = _train_config(args, head=head, unified=unified, lam=args.lam if lam is None else lam,
                            n=args.train_n, T=args.train_t_iters, samples_per_iter=args.train_samples)
        params, opt, _ = train(cfg, args.metrics, on_epoch=None if args.quiet else _progress)
        if args.save_ckpt:
            save_checkpoint(args.save_ckpt, params, opt, k=cfg.k, extra={"unified": unified, "n": cfg.n})
    cfg = SolveConfig(T=args.t_iters, samples_per_iter=args.samples, constructor=args.constructor,
                      seed=args.seed, run_two_opt=args.two_opt, unified=unified,
                      workers=_workers(args.workers))
    records = []
    for idx, (name, inst) in enumerate(_instances(args)):
        cfg.instance = idx
        res = mdf_solve(inst, params, cfg)
        records.append(_record(idx, name, inst, res, args.tsplib_rounding, True))
    _write_report(records, args.report)
    return 0


# -- parser -------------------------------------------------------------------


def _add_training_flags(p, prefix=""):
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--w-fixed", type=float, default=0.01)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--layers", type=int, default=12)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--metrics", default=None, help="JSON-lines metrics log")
    p.add_argument("--quiet", action="store_true")


def _add_solve_flags(p, samples=100):
    p.add_argument("--ckpt", default=None)
    p.add_argument("--t-iters", type=int, default=30)
    p.add_argument("--samples", type=int, default=samples)
    p.add_argument("--constructor", choices=sorted(CONSTRUCTORS), default="farthest")
    p.add_argument("--two-opt", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m-digits", type=int, default=None)
    p.add_argument("--workers", type=int, default=0, help="constructor threads (0: all cores)")
    p.add_argument("--tsplib-rounding", action="store_true",
                   help="also report TSPLIB nint-rounded lengths of the final tours")


def _add_source_flags(p):
    p.add_argument("--dir", default=None, help="directory of .tsp files")
    p.add_argument("--n", type=int, default=None, help="generate instances of this size instead")
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--instance-seed", type=int, default=1, help="seed for generated instances")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tspmdf", description="Learned instance modification for insertion heuristics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write uniform random instances as TSPLIB files")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the instance modifier")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--t-iters", type=int, default=30)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--m-digits", type=int, default=4)
    p.add_argument("--constructor", choices=sorted(CONSTRUCTORS), default="farthest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint path")
    _add_training_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", help="solve one TSPLIB instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", default=None, help="report path (default: stdout)")
    _add_solve_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="solve a set of instances and write a report")
    _add_source_flags(p)
    p.add_argument("--report", default=None)
    _add_solve_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run one ablation variant")
    p.add_argument("--mode", choices=["random", *ABLATION_MODES], required=True)
    _add_source_flags(p)
    p.add_argument("--report", default=None)
    _add_solve_flags(p)
    _add_training_flags(p)
    p.add_argument("--train-n", type=int, default=500)
    p.add_argument("--train-t-iters", type=int, default=30)
    p.add_argument("--train-samples", type=int, default=50)
    p.add_argument("--save-ckpt", default=None)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "ablate" and args.m_digits is None:
        args.m_digits = 4
    try:
        return args.func(args)
    except (CliError, TsplibError, CheckpointError, ShapeError, TourError, ValueError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"tspmdf {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
