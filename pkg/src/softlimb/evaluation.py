"""Statistics over episode records: summaries, learning curves and significance tests."""
from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import InvalidInputError, MissingDataError

ALGORITHMS = ("BMSS", "BMMS", "PPO", "AC")
SETTINGS = ("Kill0", "Kill1", "Kill1or2")
# None = every episode of the run
FINAL_WINDOW = {"PPO": 15, "AC": 50, "BMMS": None, "BMSS": None}
BASELINE_OF = {"PPO": "BMMS", "AC": "BMSS"}


@dataclass(frozen=True)
class EpisodeRecord:
    run_id: str
    algorithm: str
    setting: str
    seed: int
    episode: int
    length: int
    detected: bool
    update: int | None = None

    def __post_init__(self):
        if self.length < 1:
            raise InvalidInputError(f"episode length must be >= 1, got {self.length}")


@dataclass(frozen=True)
class CellSummary:
    algorithm: str
    setting: str
    mean: float  # mean over seeds of per-seed final-window means
    sd: float  # sample SD of the per-seed means (nan when n == 1)
    n: int  # number of seeds
    episode_mean: float
    episode_sd: float  # sample SD over all final-window episodes
    n_episodes: int
    capped: int  # final-window episodes that ended without detection
    samples: tuple[float, ...]  # final-window episode lengths, pooled over seeds


class TTestResult(NamedTuple):
    t: float
    df: float
    p: float
    degenerate: bool = False


@dataclass(frozen=True)
class Comparison:
    learner: str
    baseline: str
    setting: str
    learner_mean: float
    baseline_mean: float
    test: TTestResult
    reject: bool


@dataclass(frozen=True)
class ComparisonReport:
    cells: dict
    comparisons: list
    alpha: float


class CurvePoint(NamedTuple):
    bin: int
    mean: float
    se: float
    n: int


def read_transcript(path) -> list[EpisodeRecord]:
    records = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                records.append(record_from_json(json.loads(line)))
    return records


def record_from_json(row: Mapping) -> EpisodeRecord:
    return EpisodeRecord(
        run_id=str(row["run_id"]),
        algorithm=str(row["algorithm"]),
        setting=str(row["kill_setting"]),
        seed=int(row["seed"]),
        episode=int(row["episode"]),
        length=int(row["length"]),
        detected=bool(row["detected"]),
        update=None if row.get("update") is None else int(row["update"]),
    )


def _window_for(window, algorithm: str) -> int | None:
    if isinstance(window, Mapping):
        return window.get(algorithm)
    return window


def _group_runs(records: Iterable[EpisodeRecord]) -> dict:
    """(algorithm, setting) -> run_id -> episode lengths in episode order."""
    runs: dict = defaultdict(lambda: defaultdict(list))
    for r in records:
        runs[(r.algorithm, r.setting)][r.run_id].append(r)
    return {cell: {run: sorted(eps, key=lambda r: r.episode) for run, eps in by_run.items()}
            for cell, by_run in runs.items()}


def _sample_sd(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(values.std(ddof=1)) if len(values) > 1 else float("nan")


def summarize(records: Iterable[EpisodeRecord], window=FINAL_WINDOW, cells=None) -> dict:
    """Two-level summary per (algorithm, setting).

    Each run's mean over its final ``window`` episodes is taken first, then the
    mean and sample SD across runs (seeds).  ``window`` is an int, None (all
    episodes) or a mapping from algorithm to either.  ``cells`` lists the
    (algorithm, setting) pairs that must be present.
    """
    grouped = _group_runs(records)
    for cell in cells or ():
        if cell not in grouped:
            raise MissingDataError(f"no episode records for {cell[0]} / {cell[1]}")
    out = {}
    for (algo, setting), runs in sorted(grouped.items()):
        win = _window_for(window, algo)
        seed_means, pooled, capped = [], [], 0
        for run_id in sorted(runs):
            tail = runs[run_id] if win is None else runs[run_id][-win:]
            lengths = [r.length for r in tail]
            seed_means.append(float(np.mean(lengths)))
            pooled.extend(lengths)
            capped += sum(not r.detected for r in tail)
        out[(algo, setting)] = CellSummary(
            algo, setting, float(np.mean(seed_means)), _sample_sd(seed_means), len(seed_means),
            float(np.mean(pooled)), _sample_sd(pooled), len(pooled), capped, tuple(float(x) for x in pooled))
    return out


# --- Student's t distribution -------------------------------------------------

def _betacf(a: float, b: float, x: float, max_iter: int = 500, eps: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise InvalidInputError(f"incomplete beta needs x in [0, 1], got {x}")
    if x in (0.0, 1.0):
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def t_cdf(t: float, df: float) -> float:
    tail = 0.5 * t_sf_two_sided(t, df)
    return 1.0 - tail if t >= 0 else tail


def t_test(sample_a, sample_b, equal_var: bool = True) -> TTestResult:
    """Two-sample t-test; pooled variance by default, Welch when ``equal_var=False``."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise InvalidInputError("each t-test sample needs at least 2 values")
    na, nb = len(a), len(b)
    va, vb = a.var(ddof=1), b.var(ddof=1)
    diff = a.mean() - b.mean()
    if equal_var:
        df = na + nb - 2.0
        se2 = ((na - 1) * va + (nb - 1) * vb) / df * (1.0 / na + 1.0 / nb)
    else:
        se2 = va / na + vb / nb
        df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)) if se2 > 0 else na + nb - 2.0
    if se2 <= 0.0:
        if diff == 0.0:
            return TTestResult(0.0, df, 1.0, True)
        return TTestResult(math.copysign(math.inf, diff), df, 0.0, True)
    t = float(diff / math.sqrt(se2))
    return TTestResult(t, float(df), t_sf_two_sided(t, df))


def holm_bonferroni(p_values, alpha: float = 0.05) -> list[bool]:
    """Step-down Holm procedure; decisions are returned in input order."""
    p = np.asarray(p_values, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise InvalidInputError("p-values must lie in [0, 1]")
    m = len(p)
    reject = [False] * m
    for rank, i in enumerate(np.argsort(p, kind="stable")):
        if p[i] > alpha / (m - rank):
            break
        reject[i] = True
    return reject


def learning_curve(records: Iterable[EpisodeRecord], bin_size: int, key: str = "episode") -> list[CurvePoint]:
    """Binned cross-seed mean and standard error.

    ``key`` is ``"episode"`` or ``"update"`` (PPO iterations).  Lengths are
    averaged within each run's bin first, then across runs.
    """
    if bin_size < 1:
        raise InvalidInputError("bin_size must be >= 1")
    per_run: dict = defaultdict(lambda: defaultdict(list))
    for r in records:
        index = r.episode if key == "episode" else r.update
        if index is None:
            raise InvalidInputError(f"record {r.run_id}#{r.episode} has no {key} index")
        per_run[r.run_id][index // bin_size].append(r.length)
    bins = sorted({b for run in per_run.values() for b in run})
    curve = []
    for b in bins:
        means = [float(np.mean(run[b])) for run in per_run.values() if b in run]
        n = len(means)
        se = _sample_sd(means) / math.sqrt(n) if n > 1 else float("nan")
        curve.append(CurvePoint(b, float(np.mean(means)), se, n))
    return curve


def compare_to_baselines(summary: dict, alpha: float = 0.01, settings=SETTINGS,
                         pairs: Mapping[str, str] = BASELINE_OF, equal_var: bool = True) -> ComparisonReport:
    """Each learner vs its Brownian baseline per setting, Holm-corrected over all comparisons.

    The test samples are the pooled final-window episode lengths of each cell.
    """
    cells = [(learner, baseline, s) for learner, baseline in pairs.items() for s in settings]
    for learner, baseline, s in cells:
        for cell in ((learner, s), (baseline, s)):
            if cell not in summary:
                raise MissingDataError(f"no episode records for {cell[0]} / {cell[1]}")
    tests = [t_test(summary[(l, s)].samples, summary[(b, s)].samples, equal_var) for l, b, s in cells]
    decisions = holm_bonferroni([t.p for t in tests], alpha)
    comparisons = [Comparison(l, b, s, summary[(l, s)].mean, summary[(b, s)].mean, t, rej)
                   for (l, b, s), t, rej in zip(cells, tests, decisions)]
    return ComparisonReport(summary, comparisons, alpha)


# --- output files ---------------------------------------------------------------

def _fmt(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.2f}"


def headline_sd(cell: CellSummary) -> float:
    """Cross-seed SD when several seeds exist, otherwise the episode-level SD."""
    return cell.sd if cell.n > 1 else cell.episode_sd


def write_table(summary: dict, path, algorithms=ALGORITHMS, settings=SETTINGS) -> None:
    """Table with one row per kill setting and "mean ± SD" per algorithm."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["setting", *algorithms])
        for s in settings:
            row = [s]
            for a in algorithms:
                cell = summary.get((a, s))
                row.append("" if cell is None else f"{cell.mean:.2f} ± {_fmt(headline_sd(cell))}")
            writer.writerow(row)


def write_summary(summary: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["algorithm", "setting", "mean", "sd_seeds", "n_seeds",
                         "episode_mean", "sd_episodes", "n_episodes", "capped"])
        for (algo, setting), c in sorted(summary.items()):
            writer.writerow([algo, setting, f"{c.mean:.4f}", _fmt(c.sd), c.n, f"{c.episode_mean:.4f}",
                             _fmt(c.episode_sd), c.n_episodes, c.capped])


def write_curves(curves: Mapping, path) -> None:
    """``curves`` maps (algorithm, setting) -> list of CurvePoint."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["algorithm", "setting", "bin", "mean", "se", "n"])
        for (algo, setting), points in sorted(curves.items()):
            for p in points:
                writer.writerow([algo, setting, p.bin, f"{p.mean:.4f}",
                                 "" if math.isnan(p.se) else f"{p.se:.4f}", p.n])


def significance_text(report: ComparisonReport) -> str:
    lines = [f"Learner vs Brownian baseline, two-sample Student's t-test, "
             f"Holm-Bonferroni over {len(report.comparisons)} comparisons at alpha = {report.alpha}", ""]
    for c in report.comparisons:
        verdict = "significant" if c.reject else "not significant"
        flag = " [degenerate variance]" if c.test.degenerate else ""
        lines.append(f"{c.setting:9s} {c.learner:4s} {c.learner_mean:8.2f} vs {c.baseline:4s} "
                     f"{c.baseline_mean:8.2f}  t = {c.test.t:9.3f}  df = {c.test.df:6.1f}  "
                     f"p = {c.test.p:.3e}  {verdict}{flag}")
    capped = [(k, v.capped) for k, v in sorted(report.cells.items()) if v.capped]
    if capped:
        lines += ["", "Episodes ending at the step cap enter the statistics at their capped length:"]
        lines += [f"  {a}/{s}: {n} capped" for (a, s), n in capped]
    return "\n".join(lines) + "\n"
