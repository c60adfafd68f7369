"""Exact ground truth at small scale and classical approximations.

Full enumeration of all n^n mappings with exact integer class counts,
the exact cycle-vertex-count law, exact bounded-height mapping counts
via integer generating-series arithmetic, and the Sachkov/Grusho
approximations for those counts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import mpmath as mp
import numpy as np

from . import _kernels

# 8^8 ~ 1.7e7 mappings; larger n needs an explicit override
ENUMERATION_GUARD = 8


class GuardError(ValueError):
    """Raised when a run would exceed a resource guard without force."""


@dataclass(frozen=True)
class ExactCount:
    """Exact classification counts over all n^n mappings.

    ``exactly_k`` maps tie count k -> number of mappings with exactly k
    highest trees (k = 1 is the unique-highest count).  ``lam_hist``
    maps the cycle-vertex count to its frequency; ``lam_maxh`` maps
    (cycle count, max vertex height) pairs.
    """

    n: int
    total: int
    unique_highest: int
    exactly_k: dict[int, int]
    crown_ok: int
    margin_ge_2: int
    lam_hist: dict[int, int]
    lam_maxh: dict[tuple[int, int], int]

    def count_height_le(self, h: int) -> int:
        """Mappings whose every vertex has height at most h."""
        return sum(c for (_, mh), c in self.lam_maxh.items() if mh <= h)

    def to_json(self) -> str:
        payload = {
            "n": self.n,
            "total": str(self.total),
            "unique_highest": str(self.unique_highest),
            "exactly_k": {str(k): str(v) for k, v in sorted(self.exactly_k.items())},
            "crown_ok": str(self.crown_ok),
            "margin_ge_2": str(self.margin_ge_2),
            "lam_hist": {str(k): str(v) for k, v in sorted(self.lam_hist.items())},
            "lam_maxh": {f"{l},{h}": str(v) for (l, h), v in sorted(self.lam_maxh.items())},
        }
        return json.dumps(payload, indent=2)


def enumerate_all(n: int, force: bool = False, batch: int = 65536) -> ExactCount:
    """Classify every mapping of {1..n} by direct enumeration.

    Mappings are visited in odometer order (vertex 1 the fastest digit),
    so the scan can be partitioned by index ranges; see
    ``enumerate_range`` and ``merge_counts`` for parallel partial scans.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if n > ENUMERATION_GUARD and not force:
        raise GuardError(f"enumeration of {n}^{n} mappings needs force=True")
    return enumerate_range(n, 0, n**n, batch=batch)


def merge_counts(a: ExactCount, b: ExactCount) -> ExactCount:
    """Combine partial counts from disjoint index ranges of the same n."""
    if a.n != b.n:
        raise ValueError("cannot merge counts for different n")

    def add(x: dict, y: dict) -> dict:
        out = dict(x)
        for k, v in y.items():
            out[k] = out.get(k, 0) + v
        return out

    return ExactCount(
        n=a.n,
        total=a.total + b.total,
        unique_highest=a.unique_highest + b.unique_highest,
        exactly_k=add(a.exactly_k, b.exactly_k),
        crown_ok=a.crown_ok + b.crown_ok,
        margin_ge_2=a.margin_ge_2 + b.margin_ge_2,
        lam_hist=add(a.lam_hist, b.lam_hist),
        lam_maxh=add(a.lam_maxh, b.lam_maxh),
    )


def enumerate_range(n: int, start: int, stop: int, batch: int = 65536) -> ExactCount:
    """Classify the mappings with odometer indices start..stop-1."""
    if not (0 <= start <= stop <= n**n):
        raise ValueError("index range out of bounds")
    total = stop - start
    unique = 0
    crown_ok = 0
    margin2 = 0
    exactly_k: dict[int, int] = {}
    lam_hist: dict[int, int] = {}
    lam_maxh: dict[tuple[int, int], int] = {}
    if total == 0:
        return ExactCount(n, 0, 0, {}, 0, 0, {}, {})
    out = np.empty((min(batch, total), n), dtype=np.int32)
    while start < stop:
        count = min(batch, stop - start)
        _kernels.decode_odometer(start, count, n, out)
        stats = _kernels.batch_stats(out[:count], 0)
        tie = stats[:, 3]
        top = stats[:, 1]
        second = stats[:, 2]
        crown = stats[:, 4]
        roots = stats[:, 5]
        lam = stats[:, 6]
        maxh = stats[:, 7]
        unique += int((tie == 1).sum())
        crown_ok += int(((tie == 1) & (roots >= 1) & (crown > 2 * roots)).sum())
        margin2 += int(((tie == 1) & (top - second >= 2)).sum())
        for k, c in zip(*np.unique(tie, return_counts=True)):
            exactly_k[int(k)] = exactly_k.get(int(k), 0) + int(c)
        code = lam.astype(np.int64) * (n + 1) + maxh
        for q, c in zip(*np.unique(code, return_counts=True)):
            l, h = divmod(int(q), n + 1)
            lam_hist[l] = lam_hist.get(l, 0) + int(c)
            lam_maxh[(l, h)] = lam_maxh.get((l, h), 0) + int(c)
        start += count
    return ExactCount(
        n=n,
        total=total,
        unique_highest=unique,
        exactly_k=exactly_k,
        crown_ok=crown_ok,
        margin_ge_2=margin2,
        lam_hist=lam_hist,
        lam_maxh=lam_maxh,
    )


# ── exact cycle-vertex-count law ──────────────────────────────────────


def lambda_pmf_exact(n: int, N: int) -> Fraction:
    """P(cycle-vertex count = N) for a uniform mapping of {1..n}, exactly.

    Equals N (n-1)! / (n^N (n-N)!); zero outside 1 <= N <= n.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if N < 1 or N > n:
        return Fraction(0)
    num = N
    for j in range(1, N):
        num *= n - j
    return Fraction(num, n**N)


def lambda_range(n: int) -> tuple[int, int]:
    """Integer N with n^(1/5) < N < 4 sqrt(n ln n): the bulk of the law.

    The lower cut is resolved with integer arithmetic (N^5 > n) to avoid
    float-boundary mistakes at exact fifth powers.
    """
    first = 1
    while first**5 <= n:
        first += 1
    bound = 16.0 * n * math.log(n)
    last = int(math.isqrt(int(bound)))
    while last >= 1 and last * last >= bound:
        last -= 1
    return first, min(last, n)


def lambda_tail_mass(n: int) -> Fraction:
    """Exact probability that the cycle count falls outside ``lambda_range``.

    Computed as one minus the in-range sum; the in-range terms share the
    denominator n^N_last, keeping the arithmetic to one big-int stream.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    first, last = lambda_range(n)
    if first > last:
        return Fraction(1)
    numerator = 0
    rising = 1  # (n-1)(n-2)...(n-N+1)
    for j in range(1, first):
        rising *= n - j
    scale = n ** (last - first)
    for N in range(first, last + 1):
        numerator += N * rising * scale
        if N < last:
            scale //= n
        rising *= n - N
    return 1 - Fraction(numerator, n**last)


# ── bounded-height mapping counts via integer series ──────────────────


def _egf_exp(coeffs: list[int], length: int) -> list[int]:
    """exp of an integer EGF with zero constant term, as integer EGF."""
    out = [0] * length
    out[0] = 1
    for k in range(length - 1):
        acc = 0
        for j in range(k + 1):
            a = coeffs[j + 1]
            if a:
                acc += comb(k, j) * a * out[k - j]
        out[k + 1] = acc
    return out


def tree_series(h: int, length: int) -> list[int]:
    """Integer EGF of rooted labelled trees of height at most h.

    t_0 = x and t_{k+1} = x exp(t_k); entry j is the count on j vertices.
    """
    t = [0] * length
    if length > 1:
        t[1] = 1
    for _ in range(h):
        e = _egf_exp(t, length)
        t = [0] + [(k + 1) * e[k] for k in range(length - 1)]
    return t


def count_height_le_exact(n: int, h: int) -> int:
    """Number of mappings of {1..n} with every vertex at height <= h.

    A mapping is a permutation of trees, so the count is
    n! [x^n] 1/(1 - t_h(x)); the series inverse is run with exact
    integer EGF coefficients.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if h < 0:
        raise ValueError("h must be nonnegative")
    length = n + 1
    t = tree_series(min(h, n - 1), length)
    seq = [0] * length
    seq[0] = 1
    for k in range(1, length):
        acc = 0
        for j in range(1, k + 1):
            if t[j]:
                acc += comb(k, j) * t[j] * seq[k - j]
        seq[k] = acc
    return seq[n]


def forest_profile_law(n: int, roots: int) -> tuple[dict, int]:
    """Exact law of per-tree generation-size profiles at a fixed cycle count.

    Enumerates every mapping of {1..n} with ``roots`` cyclic vertices and
    classifies its forest by the multiset of per-tree height histograms
    (each tree's vertex counts by height, root generation first).
    Returns (profile -> count, number of such mappings).  This is the
    exact reference for branching processes conditioned on total progeny.
    """
    if n > ENUMERATION_GUARD:
        raise GuardError("profile law enumeration is sized for n <= 8")
    total = n**n
    batch = 65536
    images = np.empty((min(batch, total), n), dtype=np.int32)
    cyclic = np.empty(n, dtype=np.uint8)
    height = np.empty(n, dtype=np.int32)
    root = np.empty(n, dtype=np.int32)
    indeg = np.empty(n, dtype=np.int32)
    stack = np.empty(n, dtype=np.int32)
    counts: dict = {}
    matched = 0
    start = 0
    while start < total:
        count = min(batch, total - start)
        _kernels.decode_odometer(start, count, n, images)
        for b in range(count):
            lam = _kernels.decompose_into(images[b], cyclic, height, root, indeg, stack)
            if lam != roots:
                continue
            trees: dict[int, list[int]] = {}
            for v in range(n):
                hist = trees.setdefault(int(root[v]), [])
                h = int(height[v])
                while len(hist) <= h:
                    hist.append(0)
                hist[h] += 1
            profile = tuple(sorted(tuple(hist) for hist in trees.values()))
            counts[profile] = counts.get(profile, 0) + 1
            matched += 1
        start += count
    return counts, matched


# ── tower roots and the Sachkov/Grusho approximations ─────────────────


def _tower(x, j: int):
    """t_j(x) for the height tower t_0 = x, t_{k+1} = x e^{t_k}."""
    t = x
    for _ in range(j):
        t = x * mp.e**t
        if t > 8:
            break  # already far above 1; the iterates only grow
    return t


def rho_root(j: int, tol: float = 1e-12) -> float:
    """Positive root of t_j(x) = 1, with t_j the height-<=j tree series map.

    rho_0 = 1; rho_1 solves x e^x = 1.  Bisection on [0, 1] (t_j is
    increasing with t_j(0) = 0 and t_j(1) >= e for j >= 1), then Newton
    polish; evaluated in extended precision so the residual bound
    |t_j(root) - 1| <= tol is meaningful for large j.
    """
    if j < 0:
        raise ValueError("iteration index must be nonnegative")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if j == 0:
        return 1.0
    with mp.workdps(40):
        lo, hi = mp.mpf(0), mp.mpf(1)
        for _ in range(60):
            mid = (lo + hi) / 2
            if _tower(mid, j) > 1:
                hi = mid
            else:
                lo = mid
        x = (lo + hi) / 2
        for _ in range(8):
            # d t_k/dx = e^{t_{k-1}} (1 + x d t_{k-1}/dx)
            t = x
            d = mp.mpf(1)
            for _ in range(j):
                e = mp.e**t
                d = e * (1 + x * d)
                t = x * e
            step = (t - 1) / d
            x -= step
            if abs(t - 1) <= tol / 4:
                break
    return float(x)


def _tower_values(x: float, j: int) -> list[float]:
    vals = [x]
    for _ in range(j):
        vals.append(x * math.exp(vals[-1]))
    return vals


def sachkov_count_log(n: int, h: int) -> float:
    """Natural log of the singularity-analysis estimate of the height count.

    The generating series 1/(1 - t_h) has a simple pole at rho_h, giving
    n! rho_h^{-n} / (rho_h t_h'(rho_h)); the residue factor expands to
    1 + a_{h-1} + a_{h-1} a_{h-2} + ... + a_{h-1}...a_0 with
    a_k = t_k(rho_h).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if h < 0:
        raise ValueError("h must be nonnegative")
    if h == 0:
        return math.lgamma(n + 1)
    rho = rho_root(h)
    a = _tower_values(rho, h)
    const = 1.0
    prod = 1.0
    for k in range(h - 1, -1, -1):
        prod *= a[k]
        const += prod
    return math.lgamma(n + 1) - n * math.log(rho) - math.log(const)


def sachkov_count(n: int, h: int) -> float:
    """Approximate count of height-<=h mappings (may overflow to inf).

    Use ``sachkov_count_log`` for large n; the log form never overflows.
    """
    log_value = sachkov_count_log(n, h)
    if log_value > 700:
        return math.inf
    return math.exp(log_value)


def grusho_rho_approx(m: int) -> float:
    """Second-order expansion of rho_m around its limit 1/e."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return (1.0 / math.e) * (1.0 + (2.0 / m**2) * (math.pi / 2) ** 2)


@dataclass(frozen=True)
class HeightCountRow:
    """One row of the exact-versus-approximate height count table."""

    n: int
    h: int
    exact: int
    approx_log: float
    ratio: float

    @property
    def approx_str(self) -> str:
        """Decimal form of the approximation, robust to huge magnitudes."""
        log10 = self.approx_log / math.log(10.0)
        exp10 = math.floor(log10)
        mant = 10.0 ** (log10 - exp10)
        return f"{mant:.6f}e{exp10:+d}"


def height_count_table(ns, hs) -> list[HeightCountRow]:
    """Exact counts vs the Sachkov estimate over a grid, ratio in log space."""
    rows = []
    for h in hs:
        for n in ns:
            exact = count_height_le_exact(n, h)
            alog = sachkov_count_log(n, h)
            ratio = math.exp(alog - math.log(exact))
            rows.append(HeightCountRow(n=n, h=h, exact=exact, approx_log=alog, ratio=ratio))
    return rows


def height_table_csv(rows) -> str:
    lines = ["n,h,exact,approx,ratio"]
    for r in rows:
        lines.append(f"{r.n},{r.h},{r.exact},{r.approx_str},{r.ratio:.12g}")
    return "\n".join(lines) + "\n"
