"""Seeded run matrix over tasks x kinds x losses, with CSV outputs and a replay manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import __version__, metrics, models
from .logic import Program, format_concept, load_program, program_from_json
from .shortcuts import Support, parse_support
from .synthtask import SceneSpec, generate_dataset
from .trainer import History, TrainConfig, TrainingError, train

XOR_FORMULA = "(c1 & !c2) | (!c1 & c2)"
TRAFFIC_LIGHTS_FORMULA = "!c1 | !c2"

RESULT_COLUMNS = (
    "task", "kind", "loss",
    "acc_y_mean", "acc_y_std", "acc_w_mean", "acc_w_std", "ece_w_mean", "ece_w_std",
    "n_seeds",
)
HISTORY_COLUMNS = ("run_id", "seed", "kind", "loss", "epoch", "train_loss", "acc_y", "acc_w", "ece_w")

DEFAULT_TRAIN = {"lr": 1e-3, "batch": 64, "epochs": 30, "eval_every": 5, "hidden_dims": [32, 32]}


@dataclass
class ExperimentConfig:
    tasks: dict  # name -> Program
    support: str = "full"
    scene: SceneSpec = field(default_factory=SceneSpec)
    kinds: tuple = models.KINDS
    losses: tuple = models.LOSSES
    seeds: tuple = tuple(range(20))
    n_train: int = 4000
    n_test: int = 2000
    data_seed: int = 2024
    train: dict = field(default_factory=lambda: dict(DEFAULT_TRAIN))
    out: Path = Path("runs/reproduce")

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        for kind in self.kinds:
            if kind not in models.KINDS:
                raise ValueError(f"unknown kind {kind!r}")
        for loss in self.losses:
            if loss not in models.LOSSES:
                raise ValueError(f"unknown loss {loss!r}")

    def to_json(self) -> dict:
        return {
            "tasks": {name: p.to_json() for name, p in self.tasks.items()},
            "support": self.support,
            "scene": asdict(self.scene),
            "kinds": list(self.kinds),
            "losses": list(self.losses),
            "seeds": list(self.seeds),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "data_seed": self.data_seed,
            "train": self.train,
            "out": str(self.out),
        }

    def digest(self) -> str:
        doc = self.to_json()
        doc.pop("out")
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def default_tasks() -> dict:
    return {
        "xor": program_from_json({"k": 2, "formula": XOR_FORMULA}),
        "traffic_lights": program_from_json({"k": 2, "formula": TRAFFIC_LIGHTS_FORMULA}),
    }


def default_config(**overrides) -> ExperimentConfig:
    return ExperimentConfig(tasks=default_tasks(), **overrides)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read a JSON experiment config; relative paths resolve against its directory."""
    path = Path(path)
    base = path.parent
    doc = json.loads(path.read_text())
    tasks = {}
    for name, entry in doc.get("tasks", {}).items():
        if isinstance(entry, str):
            program_path = base / entry
            if not program_path.exists():
                raise FileNotFoundError(f"program file for task {name!r} not found: {program_path}")
            tasks[name] = load_program(program_path)
        else:
            tasks[name] = program_from_json(entry)
    train_doc = dict(DEFAULT_TRAIN)
    train_doc.update(doc.get("train", {}))
    kwargs = {key: doc[key] for key in ("support", "kinds", "losses", "seeds", "n_train", "n_test", "data_seed") if key in doc}
    return ExperimentConfig(
        tasks=tasks or default_tasks(),
        scene=SceneSpec(**doc.get("scene", {})),
        train=train_doc,
        out=base / doc.get("out", "runs/reproduce"),
        **kwargs,
    )


@dataclass
class RunResult:
    task: str
    kind: str
    loss: str
    seed: int
    history: Optional[History] = None
    error: Optional[str] = None

    @property
    def run_id(self) -> str:
        return f"{self.task}/{self.kind}-{self.loss}/seed-{self.seed}"


def make_datasets(cfg: ExperimentConfig, program: Program):
    support = parse_support(cfg.support, program.k)
    scene = SceneSpec(**{**asdict(cfg.scene), "k": program.k})
    data = generate_dataset(scene, program, support, cfg.n_train + cfg.n_test, cfg.data_seed)
    return data.split(cfg.n_train)


def _run(job) -> RunResult:
    task, program, train_data, test_data, tcfg = job
    result = RunResult(task, tcfg.kind, tcfg.loss, tcfg.seed)
    try:
        _, result.history = train(tcfg, train_data, program, test_data)
    except TrainingError as exc:
        result.error = str(exc)
    return result


def run_matrix(cfg: ExperimentConfig, threads: int = 1, tasks: Optional[list] = None,
               combos: Optional[list] = None) -> list[RunResult]:
    """Train every (task, kind, loss, seed); results come back in matrix order."""
    jobs = []
    for task in tasks or list(cfg.tasks):
        program = cfg.tasks[task]
        train_data, test_data = make_datasets(cfg, program)
        for kind in cfg.kinds:
            for loss in cfg.losses:
                if combos is not None and (kind, loss) not in combos:
                    continue
                for seed in cfg.seeds:
                    tcfg = TrainConfig(loss=loss, kind=kind, seed=seed, **cfg.train)
                    jobs.append((task, program, train_data, test_data, tcfg))
    if threads <= 1:
        return [_run(job) for job in jobs]
    os.environ.setdefault("OMP_NUM_THREADS", "1")
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run, jobs, chunksize=1))


def summarize_results(results: list[RunResult]) -> list[dict]:
    groups: dict = {}
    for r in results:
        if r.history is not None:
            groups.setdefault((r.task, r.kind, r.loss), []).append(r.history.final)
    rows = []
    for (task, kind, loss), finals in groups.items():
        row = {"task": task, "kind": kind, "loss": loss, "n_seeds": len(finals)}
        for metric in ("acc_y", "acc_w", "ece_w"):
            vals = np.array([getattr(f, metric) for f in finals])
            row[f"{metric}_mean"] = float(vals.mean())
            row[f"{metric}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        rows.append(row)
    return rows


def history_rows(result: RunResult) -> list[dict]:
    return [
        {
            "run_id": result.run_id, "seed": result.seed, "kind": result.kind, "loss": result.loss,
            "epoch": e.epoch, "train_loss": e.train_loss, "acc_y": e.acc_y, "acc_w": e.acc_w, "ece_w": e.ece_w,
        }
        for e in result.history.entries
    ]


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns))
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row[c] for c in columns})


def probe_json(history: History) -> dict:
    return {
        "probe_concepts": [format_concept(g) for g in history.probe_concepts],
        "steps": [{"epoch": e.epoch, "tables": e.probe_tables.tolist()} for e in history.entries],
    }


def write_run(result: RunResult, run_dir: Path) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    if result.history is None:
        (run_dir / "error.txt").write_text(result.error or "")
        return
    _write_csv(run_dir / "history.csv", HISTORY_COLUMNS, history_rows(result))
    (run_dir / "probes.json").write_text(json.dumps(probe_json(result.history)))
    metrics.save_records(result.history.final.records, run_dir / "records.csv")


def manifest(extra: dict) -> dict:
    return {
        "rsaware": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "argv": sys.argv,
        **extra,
    }


def write_outputs(cfg: ExperimentConfig, results: list[RunResult], out: Path) -> list[dict]:
    out.mkdir(parents=True, exist_ok=True)
    all_rows = []
    for r in results:
        write_run(r, out / "runs" / r.run_id)
        if r.history is not None:
            all_rows.extend(history_rows(r))
    rows = summarize_results(results)
    _write_csv(out / "results.csv", RESULT_COLUMNS, rows)
    _write_csv(out / "history.csv", HISTORY_COLUMNS, all_rows)
    doc = manifest({
        "config": cfg.to_json(),
        "config_sha256": cfg.digest(),
        "seeds": list(cfg.seeds),
        "failed_runs": [{"run_id": r.run_id, "error": r.error} for r in results if r.error],
    })
    (out / "manifest.json").write_text(json.dumps(doc, indent=2))
    return rows
