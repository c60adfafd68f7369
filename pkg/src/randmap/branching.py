"""Critical Galton-Watson processes with unit-mean Poisson offspring.

Per-ancestor traces carry generation sizes, extinction times and
progenies; the event classifier evaluates the tie/uniqueness conditions
on the relabelled ancestors.  Exact references: the extinction-probability
iteration q -> e^{q-1} and the Borel-Tanner total-progeny law.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .rng import substream


class ConditioningError(RuntimeError):
    """Rejection sampling ran out of attempts."""

    def __init__(self, attempts: int, target: int):
        super().__init__(f"no trace with total progeny {target} in {attempts} attempts")
        self.attempts = attempts
        self.target = target


@dataclass(frozen=True)
class GWTrace:
    """One simulated process with ``founders`` independent ancestor lines.

    ``generations[i]`` lists the positive generation sizes of ancestor i
    starting at generation 0 (always 1).  ``tau[i]`` is the index of the
    first empty generation, or None when the line was still alive at the
    recording horizon.  ``cap_hit`` flags a stop on the total-particle cap.
    """

    founders: int
    generations: list[list[int]]
    tau: list[int | None]
    cap_hit: bool

    @property
    def truncated(self) -> bool:
        return self.cap_hit or any(t is None for t in self.tau)

    def to_json(self) -> str:
        return json.dumps(
            {
                "founders": self.founders,
                "generations": self.generations,
                "tau": self.tau,
                "cap_hit": self.cap_hit,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "GWTrace":
        data = json.loads(text)
        return cls(
            founders=data["founders"],
            generations=[list(g) for g in data["generations"]],
            tau=[t if t is None else int(t) for t in data["tau"]],
            cap_hit=bool(data["cap_hit"]),
        )

    def gen_size(self, i: int, s: int) -> int | None:
        """Particles of ancestor ``i`` in generation ``s`` (None if unrecorded)."""
        sizes = self.generations[i]
        if s < len(sizes):
            return sizes[s]
        return 0 if self.tau[i] is not None else None

    def progeny(self, i: int) -> int | None:
        """Total particles ever born to ancestor ``i`` (None if truncated)."""
        if self.tau[i] is None:
            return None
        return sum(self.generations[i])

    def partial_progeny(self, i: int, t: int) -> int | None:
        """Particles of ancestor ``i`` in generations strictly before ``t``."""
        sizes = self.generations[i]
        if t <= len(sizes) or self.tau[i] is not None:
            return sum(sizes[:t])
        return None

    def total_progeny(self) -> int | None:
        if self.truncated:
            return None
        return sum(sum(g) for g in self.generations)


@dataclass(frozen=True)
class AEventParams:
    """Parameters of the tie events: level t, extra ties d, margin r."""

    t: int
    d: int = 0
    r: int = 1

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("t must be at least 1")
        if self.d < 0:
            raise ValueError("d must be nonnegative")
        if self.r < 1:
            raise ValueError("r must be at least 1")


def simulate(
    N: int,
    t_max: int,
    progeny_cap: int = 10**7,
    stream: np.random.Generator | None = None,
) -> GWTrace:
    """Evolve ``N`` independent ancestor lines, Poisson(1) offspring each.

    Lines are evolved one after another; recording stops for a line at
    extinction or at generation ``t_max``, and for the whole trace once
    total particles exceed ``progeny_cap`` (flagged, never an error).
    """
    if N < 1:
        raise ValueError("need at least one founder")
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    if progeny_cap < N:
        raise ValueError("progeny cap below founder count")
    if stream is None:
        raise ValueError("a random stream is required")
    generations: list[list[int]] = []
    tau: list[int | None] = []
    total = 0
    cap_hit = False
    for _ in range(N):
        sizes = [1]
        total += 1
        cur = 1
        t = 0
        line_tau: int | None = None
        while True:
            if t >= t_max:
                break
            cur = int(stream.poisson(cur))
            t += 1
            if cur == 0:
                line_tau = t
                break
            sizes.append(cur)
            total += cur
            if total > progeny_cap:
                cap_hit = True
                break
        generations.append(sizes)
        tau.append(line_tau)
        if cap_hit:
            break
    while len(generations) < N:  # lines never started after a cap stop
        generations.append([1])
        tau.append(None)
    return GWTrace(founders=N, generations=generations, tau=tau, cap_hit=cap_hit)


def extinction_prob_exact(t: int) -> float:
    """P(a single line is extinct by generation t): iterate q -> e^{q-1}."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    q = 0.0
    for _ in range(t):
        q = math.exp(q - 1.0)
    return q


def borel_tanner_pmf(N: int, k: int) -> float:
    """P(total progeny of N founders = k) for Poisson(1) offspring.

    (N/k) e^{-k} k^{k-N} / (k-N)! evaluated in log space.
    """
    if N < 1:
        raise ValueError("need at least one founder")
    if k < N:
        return 0.0
    log_p = math.log(N) - math.log(k) - k + (k - N) * math.log(k) - math.lgamma(k - N + 1)
    return math.exp(log_p)


def borel_tanner_tail_bound(N: int, K: int) -> float:
    """Upper bound on P(total progeny > K); the law has a k^{-3/2} tail."""
    return 2.0 * N / math.sqrt(2.0 * math.pi * K)


def classify_event(tr: GWTrace, p: AEventParams) -> bool | None:
    """Tie-event indicator on the descending-extinction-time relabelling.

    Returns None when the trace cannot be classified (cap hit, or a
    needed quantity falls beyond the recorded horizon).  Ancestors are
    ordered by descending extinction time with index tie-break, which
    leaves the verdict invariant under permuting equal lines.
    """
    if tr.truncated:
        return None
    N = tr.founders
    order = sorted(range(N), key=lambda i: (-tr.tau[i], i))
    t, d, r = p.t, p.d, p.r
    first = order[0]
    mu1_t = tr.gen_size(first, t)
    if mu1_t is None:
        return None
    if mu1_t == 0:
        return False
    if d == 0:
        if N < 2:
            return False
        nu1 = tr.progeny(first)
        nu1_t = tr.partial_progeny(first, t)
        if nu1 - nu1_t > mu1_t:
            return False
        if tr.tau[order[1]] != t + 1:
            return False
        return all(tr.gen_size(order[j], t + 1) == 0 for j in range(2, N))
    if N < d + 1:
        return False
    if tr.gen_size(first, t + r) != 0:
        return False
    if any(tr.tau[order[i]] != t + 1 for i in range(1, d + 1)):
        return False
    return all(tr.tau[order[j]] <= t for j in range(d + 1, N))


@dataclass(frozen=True)
class ConditionedSample:
    trace: GWTrace
    attempts: int


def conditioned_sample(
    N: int,
    total: int,
    max_attempts: int = 10**6,
    stream: np.random.Generator | None = None,
) -> ConditionedSample:
    """Rejection-sample a trace with exactly ``total`` particles overall.

    Conditioning the process on its total progeny makes the induced
    forest uniform over forests with ``N`` roots and ``total`` vertices.
    """
    if total < N:
        raise ValueError("total progeny cannot be below the founder count")
    if stream is None:
        raise ValueError("a random stream is required")
    for attempt in range(1, max_attempts + 1):
        tr = simulate(N, t_max=total + 1, progeny_cap=total, stream=stream)
        if not tr.truncated and tr.total_progeny() == total:
            return ConditionedSample(trace=tr, attempts=attempt)
    raise ConditioningError(attempts=max_attempts, target=total)


@dataclass(frozen=True)
class FounderSpreadEstimate:
    founders: int
    trials: int
    hits: int

    @property
    def p_hat(self) -> float:
        return self.hits / self.trials


def founders_generation_check(
    N: int, trials: int, stream: np.random.Generator
) -> FounderSpreadEstimate:
    """Estimate P(|first-generation size / N - 1| > 1/2).

    The first generation of N founders is Poisson(N), so this tail
    decays superpolynomially in N.
    """
    if N < 1:
        raise ValueError("need at least one founder")
    draws = stream.poisson(N, size=trials)
    hits = int((np.abs(draws / N - 1.0) > 0.5).sum())
    return FounderSpreadEstimate(founders=N, trials=trials, hits=hits)


# ── vectorised bulk runs (deterministic by batched substreams) ────────

_BULK_BATCH = 10**6


def survival_curve(checkpoints, trials: int, seed: int) -> dict[int, float]:
    """Estimated P(a single line is alive at t) for each checkpoint.

    The population chain mu(s+1) ~ Poisson(mu(s)) is evolved for all
    trials at once, dropping extinct lines as it goes.  Trials are split
    into fixed-size batches with one substream each, so the result only
    depends on (checkpoints, trials, seed).
    """
    checkpoints = sorted(set(int(t) for t in checkpoints))
    if not checkpoints or checkpoints[0] < 1:
        raise ValueError("checkpoints must be positive")
    t_max = checkpoints[-1]
    alive_at = {t: 0 for t in checkpoints}
    done = 0
    batch_index = 0
    while done < trials:
        count = min(_BULK_BATCH, trials - done)
        rng = substream(seed, batch_index)
        cur = np.ones(count, dtype=np.int64)
        for s in range(1, t_max + 1):
            cur = rng.poisson(cur)
            cur = cur[cur > 0]
            if s in alive_at:
                alive_at[s] += int(cur.size)
            if cur.size == 0:
                break
        done += count
        batch_index += 1
    return {t: alive_at[t] / trials for t in checkpoints}


def conditioned_profile_sample(
    N: int, total: int, accepted: int, seed: int, max_batches: int = 10**5
):
    """Per-ancestor generation-size profiles of traces conditioned on ``total``.

    Vectorised rejection over attempt batches: each ancestor line is an
    absorbing Poisson chain, run for total - N + 1 steps (a line alive
    longer would already overshoot the target).  Returns a Counter of
    sorted per-ancestor size-tuple profiles with ``accepted`` entries,
    plus the number of attempts consumed.
    """
    if total < N:
        raise ValueError("total progeny cannot be below the founder count")
    steps = total - N + 1
    batch = 1 << 16
    profiles = Counter()
    got = 0
    attempts = 0
    for batch_index in range(max_batches):
        if got >= accepted:
            break
        rng = substream(seed, batch_index)
        # gens[a][s] = generation-s size of ancestor a, for every attempt
        gens = np.empty((N, steps + 1, batch), dtype=np.int64)
        for a in range(N):
            gens[a, 0] = 1
            for s in range(steps):
                gens[a, s + 1] = rng.poisson(gens[a, s])
        totals = gens.sum(axis=(0, 1))
        extinct = (gens[:, steps] == 0).all(axis=0)
        accept = extinct & (totals == total)
        attempts += batch
        for idx in np.flatnonzero(accept):
            profile = tuple(
                sorted(
                    tuple(int(x) for x in gens[a, :, idx] if x > 0) for a in range(N)
                )
            )
            profiles[profile] += 1
            got += 1
            if got >= accepted:
                break
    if got < accepted:
        raise ConditioningError(attempts=attempts, target=total)
    return profiles, attempts


def progeny_samples(N: int, trials: int, cap: int, seed: int) -> np.ndarray:
    """Total progenies of ``trials`` processes with ``N`` founders.

    Values that would exceed ``cap`` are reported as cap + 1: the law's
    heavy tail makes a hard cap necessary, and capped runs stay in the
    overflow bin of any histogram over 1..cap.
    """
    out = np.empty(trials, dtype=np.int64)
    done = 0
    batch_index = 0
    while done < trials:
        count = min(_BULK_BATCH, trials - done)
        rng = substream(seed, batch_index)
        cur = np.full(count, N, dtype=np.int64)
        nu = np.full(count, N, dtype=np.int64)
        idx = np.arange(count)
        while idx.size:
            cur = rng.poisson(cur)
            nu[idx] += cur
            keep = (cur > 0) & (nu[idx] <= cap)
            idx = idx[keep]
            cur = cur[keep]
        nu[nu > cap] = cap + 1
        out[done : done + count] = nu
        done += count
        batch_index += 1
    return out
