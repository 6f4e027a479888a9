"""``rsaware`` command line front end."""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import experiment, metrics
from .awareness import brute_force_awareness_oracle, check_complete
from .fuzz import run_fuzz
from .logic import (
    enumerate_implicant_covers,
    format_concept,
    load_program,
    parse_concept,
)
from .shortcuts import (
    MODES,
    BudgetExceededError,
    Remapping,
    confusion_set,
    enumerate_remappings,
    parse_support,
)
from .synthtask import SceneSpec, generate_dataset
from .trainer import TrainConfig, TrainingError, train


def _emit(doc: dict, args) -> None:
    settings = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {**doc, "manifest": experiment.manifest({"command": args.command, "args": settings})}
    text = json.dumps(doc, indent=2)
    out = args.out
    if out is None:
        print(text)
    else:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")


def _load_remappings(path, p, s) -> list:
    doc = json.loads(Path(path).read_text())
    out = []
    for entry in doc:
        table = entry.get("table", entry) if isinstance(entry, dict) else entry
        out.append(Remapping({parse_concept(g): parse_concept(w) for g, w in table.items()}, p, s))
    return sorted(set(out))


def _remappings(args, p, s) -> list:
    if getattr(args, "remappings", None):
        return _load_remappings(args.remappings, p, s)
    return enumerate_remappings(p, s, args.mode, budget=args.budget)


def cmd_analyze(args) -> int:
    p = load_program(args.program)
    s = parse_support(args.support, p.k)
    rems = _remappings(args, p, s)
    doc = {
        "program": p.to_json(),
        "support": [format_concept(g) for g in s],
        "mode": args.mode,
        "remappings": [{"table": r.to_json(), "is_identity": r.is_identity, "mode": args.mode} for r in rems],
        "n_shortcuts": sum(not r.is_identity for r in rems),
        "confusion_sets": {
            format_concept(g): [format_concept(w) for w in sorted(confusion_set(rems, g))] for g in s
        },
        "implicant_covers": {
            str(y): [[format_concept(w) for w in sorted(c)] for c in enumerate_implicant_covers(p, y)]
            for y in range(p.label_count)
        },
    }
    _emit(doc, args)
    return 0


def cmd_check(args) -> int:
    p = load_program(args.program)
    s = parse_support(args.support, p.k)
    rems = _remappings(args, p, s)
    report = check_complete(p, s, rems)
    oracle = brute_force_awareness_oracle(p, s, rems, args.trials, args.seed, exact=args.exact)
    doc = report.to_json()
    doc["oracle"] = oracle.to_json()
    doc["n_remappings"] = len(rems)
    _emit(doc, args)
    return report.exit_code


def cmd_eval(args) -> int:
    records = metrics.load_records(args.records)
    _emit(metrics.summarize(records, args.bins, args.ece_key), args)
    return 0


def cmd_train(args) -> int:
    p = load_program(args.program)
    s = parse_support(args.support, p.k)
    scene = SceneSpec(k=p.k)
    data = generate_dataset(scene, p, s, args.n_train + args.n_test, args.data_seed)
    train_data, test_data = data.split(args.n_train)
    cfg = TrainConfig(
        loss=args.loss, kind=args.kind, lr=args.lr, batch=args.batch, epochs=args.epochs,
        seed=args.seed, eval_every=args.eval_every,
    )
    result = experiment.RunResult("train", cfg.kind, cfg.loss, cfg.seed)
    try:
        _, result.history = train(cfg, train_data, p, test_data)
    except TrainingError as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out or "runs/train")
    experiment.write_run(result, out)
    (out / "manifest.json").write_text(json.dumps(experiment.manifest({
        "program": p.to_json(), "support": args.support, "scene": asdict(scene),
        "train": cfg.to_json(), "n_train": args.n_train, "n_test": args.n_test, "data_seed": args.data_seed,
    }), indent=2))
    final = result.history.final
    print(json.dumps({"acc_y": final.acc_y, "acc_w": final.acc_w, "ece_w": final.ece_w}))
    return 0


def cmd_reproduce(args) -> int:
    cfg = experiment.load_config(args.config) if args.config else experiment.default_config()
    if args.seeds is not None:
        cfg.seeds = tuple(range(args.seeds))
    if args.epochs is not None:
        cfg.train["epochs"] = args.epochs
    out = Path(args.out) if args.out else cfg.out
    start = time.time()
    results = experiment.run_matrix(cfg, threads=args.threads)
    rows = experiment.write_outputs(cfg, results, out)
    for row in rows:
        print(
            f"{row['task']:>15} {row['kind']:>11} {row['loss']:>10}  "
            f"acc_y {row['acc_y_mean']:6.2f}±{row['acc_y_std']:5.2f}  "
            f"acc_w {row['acc_w_mean']:6.2f}±{row['acc_w_std']:5.2f}  "
            f"ece_w {row['ece_w_mean']:6.2f}±{row['ece_w_std']:5.2f}"
        )
    print(f"{len(results)} runs in {time.time() - start:.1f}s -> {out}")
    failed = [r for r in results if r.error]
    for r in failed:
        print(f"run {r.run_id} aborted: {r.error}", file=sys.stderr)
    return 1 if failed else 0


def cmd_fuzz(args) -> int:
    summary = run_fuzz(args.instances, args.seed, args.trials)
    _emit(summary.to_json(), args)
    return 0 if summary.ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("--threads", type=int, default=1)
    backing = common.add_mutually_exclusive_group()
    backing.add_argument("--exact", dest="exact", action="store_true", default=True,
                         help="exact rational arithmetic for theorem checks (default)")
    backing.add_argument("--float", dest="exact", action="store_false")

    parser = argparse.ArgumentParser(prog="rsaware", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def program_args(sp):
        sp.add_argument("--program", required=True, help="program JSON file")
        sp.add_argument("--support", default="full", help="'full' or comma-separated bitstrings")

    def remap_args(sp):
        sp.add_argument("--mode", choices=MODES, default="disentangled")
        sp.add_argument("--remappings", help="JSON list of explicit remapping tables")
        sp.add_argument("--budget", type=int, default=10**7)

    sp = sub.add_parser("analyze", parents=[common], help="list remappings, confusion sets, implicant covers")
    program_args(sp)
    remap_args(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("check", parents=[common], help="awareness verdicts; exit 0 complete, 2 weak-necessary only, 3 neither")
    program_args(sp)
    remap_args(sp)
    sp.add_argument("--trials", type=int, default=1000)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("eval", parents=[common], help="metrics from a records CSV")
    sp.add_argument("--records", required=True)
    sp.add_argument("--bins", type=int, default=10)
    sp.add_argument("--ece-key", choices=metrics.ECE_KEYS, default="confidence")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("train", parents=[common], help="train one model on a synthetic task")
    program_args(sp)
    sp.add_argument("--kind", choices=("independent", "joint", "ar"), default="independent")
    sp.add_argument("--loss", choices=("semantic", "uniform_kl"), default="semantic")
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--batch", type=int, default=64)
    sp.add_argument("--epochs", type=int, default=30)
    sp.add_argument("--eval-every", type=int, default=5)
    sp.add_argument("--n-train", type=int, default=4000)
    sp.add_argument("--n-test", type=int, default=2000)
    sp.add_argument("--data-seed", type=int, default=2024)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("reproduce", parents=[common], help="run the task x kind x loss x seed matrix")
    sp.add_argument("--config", help="experiment JSON; built-in XOR/Traffic Lights matrix if omitted")
    sp.add_argument("--seeds", type=int, default=None, help="override: use seeds 0..N-1")
    sp.add_argument("--epochs", type=int, default=None)
    sp.set_defaults(func=cmd_reproduce)

    sp = sub.add_parser("fuzz-theorems", parents=[common], help="randomized checker-vs-oracle equivalence suite")
    sp.add_argument("--instances", type=int, default=200)
    sp.add_argument("--trials", type=int, default=25)
    sp.set_defaults(func=cmd_fuzz)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BudgetExceededError, ValueError, FileNotFoundError) as exc:
        print(f"rsaware {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
