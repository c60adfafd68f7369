"""Reproducible experiment runner over all modules.

Monte Carlo runs derive one substream per sample index from the run
seed, so hit counts are independent of batching, worker count and
aggregation order; CSV output for a fixed config is reproducible
byte-for-byte apart from the wall-time column.
"""

from __future__ import annotations

import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .asymptotics import FitResult, constants_report, fit_sqrt_law, rho_paper_constant, rho_series_constant
from .branching import (
    borel_tanner_pmf,
    conditioned_profile_sample,
    extinction_prob_exact,
    founders_generation_check,
    progeny_samples,
    survival_curve,
)
from .exact import GuardError, enumerate_all, forest_profile_law, lambda_pmf_exact
from .rng import StreamFamily, substream

DEFAULT_BUDGET = 2 * 10**10  # vertex operations per simulate run

CSV_VERSION = "randmap-simulate-csv v1"
CSV_COLUMNS = (
    "n",
    "event",
    "samples",
    "hits",
    "p_hat",
    "stderr",
    "ci_lo",
    "ci_hi",
    "sqrt_n_scaled",
    "seed",
    "wall_time_s",
)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


EVENT_NAMES = (
    "unique-highest",
    "two-highest",
    "k-highest",
    "crown-ok",
    "margin2",
    "c-branch-unique",
    "c-crown-ok",
)


@dataclass(frozen=True)
class EventSpec:
    """A classification event, possibly parameterised by k or a level c."""

    name: str
    k: int | None = None
    c: int | None = None

    def __post_init__(self):
        if self.name not in EVENT_NAMES:
            raise ConfigError(f"unknown event {self.name!r}")
        if self.name == "k-highest":
            if self.k is None or self.k < 2:
                raise ConfigError("k-highest needs k >= 2")
        elif self.k is not None:
            raise ConfigError(f"{self.name} does not take k")
        if self.name in ("c-branch-unique", "c-crown-ok"):
            if self.c is None or self.c < 0:
                raise ConfigError(f"{self.name} needs c >= 0")
        elif self.c is not None:
            raise ConfigError(f"{self.name} does not take c")

    @property
    def level(self) -> int:
        return self.c if self.c is not None else 0

    @property
    def label(self) -> str:
        if self.name == "k-highest":
            return f"k-highest({self.k})"
        if self.c is not None:
            return f"{self.name}({self.c})"
        return self.name


def parse_event(name: str, k: int | None = None, c: int | None = None) -> EventSpec:
    return EventSpec(name=name, k=k, c=c)


def evaluate_event(stats: np.ndarray, spec: EventSpec) -> np.ndarray:
    """Boolean event indicator per mapping from kernel statistics rows."""
    nb = stats[:, 0]
    top = stats[:, 1]
    second = stats[:, 2]
    tie = stats[:, 3]
    crown = stats[:, 4]
    roots = stats[:, 5]
    unique = (nb >= 1) & (tie == 1)
    if spec.name in ("unique-highest", "c-branch-unique"):
        return unique
    if spec.name == "two-highest":
        return tie == 2
    if spec.name == "k-highest":
        return tie == spec.k
    if spec.name == "margin2":
        return unique & (top - second >= 2)
    if spec.name in ("crown-ok", "c-crown-ok"):
        return unique & (roots >= 1) & (crown > 2 * roots)
    raise ConfigError(f"unknown event {spec.name!r}")  # pragma: no cover


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulate run: sizes, sample count, seed, event, workers, output."""

    n: tuple[int, ...]
    samples: int
    seed: int
    event: EventSpec
    threads: int = 1
    fmt: str = "csv"
    out: str | None = None
    force: bool = False
    timing: bool = True

    def __post_init__(self):
        if not self.n or any(v < 1 for v in self.n):
            raise ConfigError("sizes must be positive")
        if self.samples < 1:
            raise ConfigError("samples must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.fmt not in ("csv", "json"):
            raise ConfigError("format must be csv or json")

    def budget(self) -> int:
        return sum(v * self.samples for v in self.n)


@dataclass(frozen=True)
class EstimateRow:
    """One Monte Carlo estimate with its binomial uncertainty."""

    n: int
    event: str
    samples: int
    hits: int
    p_hat: float
    stderr: float
    ci_lo: float
    ci_hi: float
    sqrt_n_scaled: float
    seed: int
    wall_time_s: float


def make_row(n: int, event: str, samples: int, hits: int, seed: int, wall: float) -> EstimateRow:
    p = hits / samples
    stderr = math.sqrt(p * (1.0 - p) / samples)
    if hits < 30 or samples - hits < 30:
        lo, hi = _wilson_interval(hits, samples)
    else:
        lo = max(0.0, p - 1.96 * stderr)
        hi = min(1.0, p + 1.96 * stderr)
    return EstimateRow(
        n=n,
        event=event,
        samples=samples,
        hits=hits,
        p_hat=p,
        stderr=stderr,
        ci_lo=lo,
        ci_hi=hi,
        sqrt_n_scaled=p * math.sqrt(n),
        seed=seed,
        wall_time_s=wall,
    )


def _wilson_interval(hits: int, samples: int, z: float = 1.96) -> tuple[float, float]:
    p = hits / samples
    denom = 1.0 + z * z / samples
    centre = (p + z * z / (2 * samples)) / denom
    half = z * math.sqrt(p * (1.0 - p) / samples + z * z / (4 * samples * samples)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


# ── the sampling/classification pipeline ──────────────────────────────


def _hits_task(args) -> list[int]:
    """Classify samples start..start+count-1 of one (seed, n) stream family.

    Returns one hit count per event.  Only sample indices enter the
    random streams, so any partition of the index range gives identical
    totals.
    """
    seed, n, start, count, events = args
    levels = sorted({e.level for e in events})
    family = StreamFamily(seed)
    batch_rows = max(1, min(count, 2_000_000 // n))
    images = np.empty((batch_rows, n), dtype=np.int32)
    hits = [0] * len(events)
    done = 0
    while done < count:
        rows = min(batch_rows, count - done)
        for r in range(rows):
            gen = family.jump(start + done + r)
            images[r] = gen.integers(0, n, size=n, dtype=np.int32)
        block = images[:rows]
        for level in levels:
            stats = _kernels.batch_stats(block, level)
            for j, spec in enumerate(events):
                if spec.level == level:
                    hits[j] += int(evaluate_event(stats, spec).sum())
        done += rows
    return hits


def simulate_hits(
    n: int,
    samples: int,
    seed: int,
    events: list[EventSpec],
    threads: int = 1,
) -> list[int]:
    """Hit counts for several events over one shared set of samples."""
    if threads <= 1:
        return _hits_task((seed, n, 0, samples, tuple(events)))
    chunk = max(1, math.ceil(samples / (threads * 4)))
    chunk = min(chunk, max(1, 16_000_000 // n))
    tasks = []
    start = 0
    while start < samples:
        count = min(chunk, samples - start)
        tasks.append((seed, n, start, count, tuple(events)))
        start += count
    totals = [0] * len(events)
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for part in pool.map(_hits_task, tasks):
            for j, h in enumerate(part):
                totals[j] += h
    return totals


def run_simulate(cfg: ExperimentConfig) -> list[EstimateRow]:
    """Estimate the configured event probability at every size in cfg.n."""
    if cfg.budget() > DEFAULT_BUDGET and not cfg.force:
        raise GuardError(
            f"run needs {cfg.budget():.2e} vertex operations; pass force to override"
        )
    rows = []
    for n in cfg.n:
        t0 = time.perf_counter()
        hits = simulate_hits(n, cfg.samples, cfg.seed, [cfg.event], cfg.threads)[0]
        wall = time.perf_counter() - t0 if cfg.timing else 0.0
        rows.append(make_row(n, cfg.event.label, cfg.samples, hits, cfg.seed, wall))
    return rows


# ── output formats ────────────────────────────────────────────────────


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def rows_to_csv(rows: list[EstimateRow]) -> str:
    buf = io.StringIO()
    buf.write(f"# {CSV_VERSION}\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in rows:
        buf.write(
            ",".join(
                (
                    str(r.n),
                    r.event,
                    str(r.samples),
                    str(r.hits),
                    _fmt(r.p_hat),
                    _fmt(r.stderr),
                    _fmt(r.ci_lo),
                    _fmt(r.ci_hi),
                    _fmt(r.sqrt_n_scaled),
                    str(r.seed),
                    f"{r.wall_time_s:.3f}",
                )
            )
            + "\n"
        )
    return buf.getvalue()


def rows_to_json(rows: list[EstimateRow]) -> str:
    return json.dumps([r.__dict__ for r in rows], indent=2)


def rows_from_csv(text: str) -> list[EstimateRow]:
    rows = []
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise ConfigError("empty rows file")
    header = lines[0].split(",")
    if tuple(header) != CSV_COLUMNS:
        raise ConfigError("unexpected CSV schema")
    for ln in lines[1:]:
        parts = ln.split(",")
        rec = dict(zip(CSV_COLUMNS, parts))
        rows.append(
            EstimateRow(
                n=int(rec["n"]),
                event=rec["event"],
                samples=int(rec["samples"]),
                hits=int(rec["hits"]),
                p_hat=float(rec["p_hat"]),
                stderr=float(rec["stderr"]),
                ci_lo=float(rec["ci_lo"]),
                ci_hi=float(rec["ci_hi"]),
                sqrt_n_scaled=float(rec["sqrt_n_scaled"]),
                seed=int(rec["seed"]),
                wall_time_s=float(rec["wall_time_s"]),
            )
        )
    return rows


# ── exact mode ────────────────────────────────────────────────────────


def run_exact(max_n: int, force: bool = False) -> dict:
    """Exact class counts for 1..max_n plus the cycle-law cross-check."""
    report = {}
    for n in range(1, max_n + 1):
        ec = enumerate_all(n, force=force)
        check = {}
        for N in range(1, n + 1):
            pmf = lambda_pmf_exact(n, N)
            count = ec.lam_hist.get(N, 0)
            check[str(N)] = {
                "count": str(count),
                "formula": f"{pmf.numerator}/{pmf.denominator}",
                "matches": str(count * pmf.denominator == pmf.numerator * ec.total),
            }
        report[str(n)] = {
            "counts": json.loads(ec.to_json()),
            "lambda_check": check,
        }
    return report


# ── branching-process mode ────────────────────────────────────────────


def run_gw_survival(t: int, trials: int, seed: int) -> dict:
    """Simulated versus exact extinction at a ladder of checkpoints."""
    checkpoints = sorted({1, 2, 5, 10, t // 4, t // 2, t} - {0})
    curve = survival_curve(checkpoints, trials, seed)
    rows = []
    for s in checkpoints:
        exact_alive = 1.0 - extinction_prob_exact(s)
        sim_alive = curve[s]
        se = math.sqrt(max(sim_alive * (1 - sim_alive), 1e-300) / trials)
        rows.append(
            {
                "t": s,
                "alive_sim": sim_alive,
                "alive_exact": exact_alive,
                "t_times_alive_sim": s * sim_alive,
                "t_times_alive_exact": s * exact_alive,
                "sigma": se,
                "within_3_sigma": abs(sim_alive - exact_alive) <= 3.0 * se + 1e-12,
            }
        )
    return {"mode": "survival", "trials": trials, "seed": seed, "rows": rows}


def run_gw_progeny(
    founders: int,
    trials: int,
    seed: int,
    k_max: int = 40,
    forest_check: bool = True,
) -> dict:
    """Chi-square of simulated total progeny against the Borel-Tanner law,
    with a small conditioned-forest uniformity check attached."""
    import scipy.stats

    cap = 10**5
    values = progeny_samples(founders, trials, cap=cap, seed=seed)
    ks = list(range(founders, k_max + 1))
    observed = [int((values == k).sum()) for k in ks]
    observed.append(int((values > k_max).sum()))
    probs = [borel_tanner_pmf(founders, k) for k in ks]
    probs.append(1.0 - sum(probs))
    expected = [p * trials for p in probs]
    chi2 = sum((o - e) ** 2 / e for o, e in zip(observed, expected) if e > 0)
    dof = len(ks)  # one bin is determined by the total
    p_value = float(scipy.stats.chi2.sf(chi2, dof))
    report = {
        "mode": "progeny",
        "founders": founders,
        "trials": trials,
        "seed": seed,
        "chi2": chi2,
        "dof": dof,
        "p_value": p_value,
        "bins": [
            {"k": (k if k is not None else f">{k_max}"), "observed": o, "expected": e}
            for k, o, e in zip(ks + [None], observed, expected)
        ],
    }
    if forest_check:
        report["forest_uniformity"] = gw_forest_uniformity(seed=seed + 1)
    return report


def gw_forest_uniformity(
    founders: int = 2, total: int = 6, accepted: int = 20000, seed: int = 0
) -> dict:
    """Conditioned processes must induce uniform forests: compare profile
    frequencies against exact enumeration of the matching mappings.

    A mapping of {1..total} with ``founders`` cyclic vertices has a forest
    with ``founders`` roots and ``total`` vertices; the conditioned process
    with the same founders and total progeny induces the same profile law.
    """
    import scipy.stats

    exact_counts, population = forest_profile_law(total, founders)
    sim, attempts = conditioned_profile_sample(founders, total, accepted, seed)
    chi2 = 0.0
    cells = 0
    unseen = [p for p in sim if p not in exact_counts]
    for profile, count in exact_counts.items():
        expected = count / population * accepted
        if expected < 5:
            continue
        chi2 += (sim.get(profile, 0) - expected) ** 2 / expected
        cells += 1
    p_value = float(scipy.stats.chi2.sf(chi2, max(cells - 1, 1)))
    return {
        "founders": founders,
        "total": total,
        "accepted": accepted,
        "attempts": attempts,
        "profile_classes": len(exact_counts),
        "impossible_profiles_seen": len(unseen),
        "chi2": chi2,
        "dof": max(cells - 1, 1),
        "p_value": p_value,
    }


def run_gw_founders(founders: int, trials: int, seed: int) -> dict:
    """First-generation spread check: P(|mu(1)/N - 1| > 1/2) decays fast."""
    est = founders_generation_check(founders, trials, substream(seed, 0))
    return {
        "mode": "founders",
        "founders": founders,
        "trials": trials,
        "seed": seed,
        "hits": est.hits,
        "p_hat": est.p_hat,
    }


# ── constants and fit modes ───────────────────────────────────────────


def run_constants(tol: float = 1e-9) -> dict:
    return constants_report(tol)


@dataclass(frozen=True)
class FitReport:
    fit: FitResult
    rows_used: int
    candidates: dict[str, float]
    distances_in_stderr: dict[str, float]

    def to_dict(self) -> dict:
        lo, hi = self.fit.c_interval()
        return {
            "c": self.fit.c,
            "c_stderr": self.fit.c_stderr,
            "ci95": [lo, hi],
            "b": self.fit.b,
            "b_stderr": self.fit.b_stderr,
            "rows_used": self.rows_used,
            "candidates": self.candidates,
            "distances_in_stderr": self.distances_in_stderr,
            "max_abs_residual": float(np.max(np.abs(self.fit.residuals))),
        }


def run_fit(rows: list[EstimateRow], complement: bool = False) -> FitReport:
    """Fit sqrt(n)-scaled estimates and report distances to both candidates.

    The report presents evidence only: it never declares one candidate
    correct.  ``complement`` fits 1 - p_hat instead (the unique-highest
    consistency check).
    """
    triples = []
    for r in rows:
        p = 1.0 - r.p_hat if complement else r.p_hat
        triples.append((r.n, p, r.stderr))
    fit = fit_sqrt_law(triples)
    candidates = {
        "closed_form": rho_paper_constant(),
        "series": rho_series_constant(1e-9).value,
    }
    distances = {
        name: abs(fit.c - value) / fit.c_stderr for name, value in candidates.items()
    }
    return FitReport(
        fit=fit,
        rows_used=len(rows),
        candidates=candidates,
        distances_in_stderr=distances,
    )
