"""Experiment grid execution: per-cell training runs, manifest/resume, and reporting.

Output directory layout::

    <out>/manifest.json
    <out>/cells/<ALGO>_<SETTING>_r<rep>/transcript.jsonl   one JSON object per episode
    <out>/cells/<ALGO>_<SETTING>_r<rep>/diagnostics.csv    learners only
    <out>/cells/<ALGO>_<SETTING>_r<rep>/checkpoint.npz     learners only
    <out>/report/{table.csv, summary.csv, curves.csv, significance.txt}
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .agents import (AcAgent, AcConfig, BrownianMode, PpoAgent, PpoConfig, ac_episode,
                     brownian_episode, train_ppo)
from .config import config_hash, get_int, get_section, load_config
from .environment import EnvConfig, LimbEnv, Mode
from .errors import ConfigError, DivergenceError, MissingDataError
from .evaluation import (BASELINE_OF, FINAL_WINDOW, compare_to_baselines, learning_curve,
                         read_transcript, significance_text, summarize, write_curves,
                         write_summary, write_table)
from .kinematics import LimbModel
from .neural import save_checkpoint
from .vision import CameraRig, KillSetting

log = logging.getLogger(__name__)

LEARNERS = ("PPO", "AC")
BASELINES = ("BMMS", "BMSS")
MODE_OF = {"PPO": Mode.CONTINUOUS, "BMMS": Mode.CONTINUOUS, "AC": Mode.DISCRETE, "BMSS": Mode.DISCRETE}
CURVE_BIN = {"PPO": ("update", 1), "AC": ("episode", 10), "BMMS": ("episode", 10), "BMSS": ("episode", 10)}


def derive_seed(base_seed: int, algorithm: str, setting: str, repetition: int) -> int:
    """Cell seed: first 8 bytes of SHA-256 over "base:algorithm:setting:repetition", as a 63-bit int."""
    digest = hashlib.sha256(f"{base_seed}:{algorithm}:{setting}:{repetition}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class CellSpec:
    algorithm: str
    setting: str
    seed: int
    repetition: int | None = None

    def __post_init__(self):
        if self.algorithm not in MODE_OF:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {list(MODE_OF)}")
        object.__setattr__(self, "setting", KillSetting.parse(self.setting).value)

    @property
    def key(self) -> str:
        suffix = f"r{self.repetition:02d}" if self.repetition is not None else f"s{self.seed}"
        return f"{self.algorithm}_{self.setting}_{suffix}"

    @classmethod
    def parse(cls, text: str) -> "CellSpec":
        """``ALGO:SETTING:SEED`` with a literal seed."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"--cell expects ALGO:SETTING:SEED, got {text!r}")
        try:
            seed = int(parts[2])
        except ValueError:
            raise ConfigError(f"cell seed must be an integer, got {parts[2]!r}") from None
        return cls(parts[0].upper(), parts[1], seed)


@dataclass
class ExperimentPlan:
    algorithms: tuple[str, ...]
    baselines: tuple[str, ...]
    settings: tuple[str, ...]
    repetitions: int
    base_seed: int
    baseline_seeds: int
    baseline_episodes: int
    out_dir: Path

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.repetitions < 1 or self.baseline_seeds < 0:
            raise ConfigError("plan needs repetitions >= 1 and baseline_seeds >= 0")
        keys = [c.key for c in self.cells()]
        if len(keys) != len(set(keys)):
            raise ConfigError("plan contains duplicate cells")
        seeds = [c.seed for c in self.cells()]
        if len(seeds) != len(set(seeds)):
            raise ConfigError("derived cell seeds collide")

    @classmethod
    def from_config(cls, parser: configparser.ConfigParser, out_dir, base_seed=None,
                    baseline_seeds=None) -> "ExperimentPlan":
        sec = get_section(parser, "plan")
        return cls(
            algorithms=tuple(sec.get("algorithms", "").split()),
            baselines=tuple(sec.get("baselines", "").split()),
            settings=tuple(KillSetting.parse(s).value for s in sec.get("kill_settings", "").split()),
            repetitions=get_int(sec, "repetitions"),
            base_seed=get_int(sec, "base_seed") if base_seed is None else int(base_seed),
            baseline_seeds=get_int(sec, "baseline_seeds") if baseline_seeds is None else int(baseline_seeds),
            baseline_episodes=get_int(sec, "baseline_episodes"),
            out_dir=out_dir,
        )

    def cells(self, include_learners=True, include_baselines=True) -> list[CellSpec]:
        out = []
        groups = []
        if include_learners:
            groups += [(a, self.repetitions) for a in self.algorithms]
        if include_baselines:
            groups += [(b, self.baseline_seeds) for b in self.baselines]
        for algo, reps in groups:
            for setting in self.settings:
                for rep in range(reps):
                    out.append(CellSpec(algo, setting, derive_seed(self.base_seed, algo, setting, rep), rep))
        return out


@dataclass
class CellStatus:
    status: str = "pending"  # pending | done | failed
    seed: int | None = None
    wall_clock: float | None = None
    episodes: int | None = None
    steps: int | None = None
    sha256: str | None = None
    error: str | None = None


@dataclass
class RunManifest:
    config_hash: str
    code_version: str = __version__
    cells: dict[str, CellStatus] = field(default_factory=dict)

    def save(self, path) -> None:
        data = {"config_hash": self.config_hash, "code_version": self.code_version,
                "cells": {k: asdict(v) for k, v in sorted(self.cells.items())}}
        tmp = Path(path).with_suffix(".tmp")
        tmp.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text())
        return cls(data["config_hash"], data.get("code_version", ""),
                   {k: CellStatus(**v) for k, v in data.get("cells", {}).items()})

    @property
    def failed(self) -> list[str]:
        return sorted(k for k, v in self.cells.items() if v.status == "failed")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def cell_is_complete(cell_dir: Path, status: CellStatus | None) -> bool:
    transcript = cell_dir / "transcript.jsonl"
    return (status is not None and status.status == "done" and transcript.is_file()
            and file_sha256(transcript) == status.sha256)


class _Components:
    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser
        self.model = LimbModel.from_config(parser)
        self.rig = CameraRig.from_config(parser, self.model)


def _episode_row(cell: CellSpec, log_entry, update=None) -> dict:
    row = {"run_id": cell.key, "algorithm": cell.algorithm, "kill_setting": cell.setting,
           "seed": cell.seed}
    if update is not None:
        row["update"] = update
    row.update(log_entry.as_record())
    return row


def run_cell(cell: CellSpec, parser: configparser.ConfigParser, out_dir,
             baseline_episodes: int | None = None) -> CellStatus:
    """Run one (algorithm, setting, seed) cell and write its files under ``out_dir/cells``.

    Deterministic for a given seed and configuration.  Divergence marks the
    cell failed instead of raising.
    """
    comps = _Components(parser)
    cell_dir = Path(out_dir) / "cells" / cell.key
    cell_dir.mkdir(parents=True, exist_ok=True)
    env_rng, agent_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(cell.seed).spawn(2))
    # the Brownian baselines run until detection (or the safety cap) in either action mode
    env_cfg = EnvConfig.from_config(parser, MODE_OF[cell.algorithm], cell.setting, cell.seed,
                                    uncapped=cell.algorithm in BASELINES)
    env = LimbEnv(env_cfg, comps.model, comps.rig, env_rng)
    if baseline_episodes is None:
        baseline_episodes = get_int(get_section(parser, "plan"), "baseline_episodes")

    rows: list[dict] = []
    diagnostics: list[dict] = []
    start = time.perf_counter()
    status = CellStatus(seed=cell.seed)
    try:
        if cell.algorithm == "PPO":
            agent = PpoAgent(PpoConfig.from_config(parser), agent_rng)

            def on_update(update, buffer, diag):
                rows.extend(_episode_row(cell, e, update) for e in buffer.episodes)
                diagnostics.append(diag)

            train_ppo(env, agent, on_update)
            save_checkpoint(cell_dir / "checkpoint.npz", {"actor": agent.actor, "critic": agent.critic},
                            {"log_std": agent.log_std})
        elif cell.algorithm == "AC":
            agent = AcAgent(AcConfig.from_config(parser), agent_rng)
            for i in range(agent.cfg.episodes):
                entry, diag = ac_episode(env, agent)
                rows.append(_episode_row(cell, entry))
                diagnostics.append({"update": i, "steps": entry.length, "mean_length": entry.length, **diag})
            save_checkpoint(cell_dir / "checkpoint.npz", {"actor": agent.actor, "critic": agent.critic})
        else:
            mode = BrownianMode(cell.algorithm)
            for _ in range(baseline_episodes):
                rows.append(_episode_row(cell, brownian_episode(env, mode, agent_rng)))
    except DivergenceError as exc:
        status.status = "failed"
        status.error = f"diverged after {len(rows)} episodes: {exc}"
        status.wall_clock = time.perf_counter() - start
        if diagnostics:
            _write_diagnostics(cell_dir / "diagnostics.csv", diagnostics)
        log.error("cell %s failed: %s", cell.key, status.error)
        return status

    transcript = cell_dir / "transcript.jsonl"
    tmp = cell_dir / "transcript.jsonl.tmp"
    with open(tmp, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    os.replace(tmp, transcript)
    if diagnostics:
        _write_diagnostics(cell_dir / "diagnostics.csv", diagnostics)
    status.status = "done"
    status.wall_clock = time.perf_counter() - start
    status.episodes = len(rows)
    status.steps = sum(r["length"] for r in rows)
    status.sha256 = file_sha256(transcript)
    return status


def _write_diagnostics(path, diagnostics: list[dict]) -> None:
    columns = ["update", "steps", "mean_length", "policy_loss", "value_loss", "actor_loss",
               "critic_loss", "entropy", "clip_fraction", "approx_kl"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for d in diagnostics:
            writer.writerow(["" if d.get(c) is None else d[c] for c in columns])


def _run_cell_from_text(cell: CellSpec, config_text: str, out_dir: str, baseline_episodes: int):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string(config_text)
    return cell.key, run_cell(cell, parser, out_dir, baseline_episodes)


def _config_text(parser: configparser.ConfigParser) -> str:
    return "\n".join(f"[{s}]\n" + "\n".join(f"{k} = {v}" for k, v in parser[s].items())
                     for s in parser.sections()) + "\n"


def default_parallelism() -> int:
    return max(1, min(os.cpu_count() or 1, 10))


def run_plan(plan: ExperimentPlan, parser: configparser.ConfigParser, parallel: int = 1,
             cells: list[CellSpec] | None = None) -> RunManifest:
    """Execute every pending cell; completed cells with intact transcripts are skipped."""
    out = plan.out_dir
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    manifest = RunManifest.load(manifest_path) if manifest_path.is_file() else RunManifest(config_hash(parser))
    if manifest.config_hash != config_hash(parser):
        log.warning("configuration changed since the manifest was written; completed cells are kept")
        manifest.config_hash = config_hash(parser)
    cells = plan.cells() if cells is None else cells
    todo = [c for c in cells if not cell_is_complete(out / "cells" / c.key, manifest.cells.get(c.key))]
    log.info("%d of %d cells to run", len(todo), len(cells))
    for c in todo:
        manifest.cells[c.key] = CellStatus(seed=c.seed)
    manifest.save(manifest_path)

    if parallel > 1 and len(todo) > 1:
        text = _config_text(parser)
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = [pool.submit(_run_cell_from_text, c, text, str(out), plan.baseline_episodes)
                       for c in todo]
            for fut in futures:
                key, status = fut.result()
                manifest.cells[key] = status
                manifest.save(manifest_path)
    else:
        for c in todo:
            manifest.cells[c.key] = run_cell(c, parser, out, plan.baseline_episodes)
            manifest.save(manifest_path)
            log.info("%s: %s", c.key, manifest.cells[c.key].status)
    return manifest


def load_cell_records(out_dir, cells: list[CellSpec]) -> list:
    missing = [c.key for c in cells if not (Path(out_dir) / "cells" / c.key / "transcript.jsonl").is_file()]
    if missing:
        raise MissingDataError("missing cells: " + ", ".join(missing))
    records = []
    for c in cells:
        records.extend(read_transcript(Path(out_dir) / "cells" / c.key / "transcript.jsonl"))
    return records


def report(out_dir, records=None, alpha: float = 0.01, window=FINAL_WINDOW, plan: ExperimentPlan | None = None):
    """Write the table, summary, curves and significance text; returns the ComparisonReport.

    Records come from ``records`` when given, otherwise from the plan's cell
    transcripts (or every transcript under ``out_dir/cells``).
    """
    out_dir = Path(out_dir)
    if records is None:
        if plan is not None:
            records = load_cell_records(out_dir, plan.cells())
        else:
            paths = sorted((out_dir / "cells").glob("*/transcript.jsonl"))
            if not paths:
                raise MissingDataError(f"no transcripts under {out_dir / 'cells'}")
            records = [r for p in paths for r in read_transcript(p)]
    summary = summarize(records, window)
    present = {s for (_, s) in summary}
    settings = [s for s in ("Kill0", "Kill1", "Kill1or2") if s in present]
    pairs = {l: b for l, b in BASELINE_OF.items() if any(k[0] == l for k in summary)}
    comparison = compare_to_baselines(summary, alpha, settings, pairs)

    curves = {}
    for (algo, setting) in summary:
        key, size = CURVE_BIN[algo]
        cell_records = [r for r in records if r.algorithm == algo and r.setting == setting]
        curves[(algo, setting)] = learning_curve(cell_records, size, key)

    report_dir = out_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    write_table(summary, report_dir / "table.csv")
    write_summary(summary, report_dir / "summary.csv")
    write_curves(curves, report_dir / "curves.csv")
    (report_dir / "significance.txt").write_text(significance_text(comparison))
    return comparison


def load_plan(config_path=None, out_dir="runs", base_seed=None, baseline_seeds=None):
    parser = load_config(config_path)
    return parser, ExperimentPlan.from_config(parser, out_dir, base_seed, baseline_seeds)
