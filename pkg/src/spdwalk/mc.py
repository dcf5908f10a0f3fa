"""Monte Carlo verification harness.

Tail estimates carry Wilson confidence intervals; distributional identities
are gated by two-sample Kolmogorov-Smirnov tests on the scalar observable
``d_R(I, .)`` (a maximal invariant of the orthogonal action, so equality of
these scalar laws is the testable content of the matrix-level identities).
Every suite is deterministic given ``(seed, chunk size)``: ensembles are
split into fixed-size chunks, chunk ``k`` drawing from ``stream_id + k``,
and reductions run in chunk order, so thread count never changes a byte of
output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds as _bounds
from .sampling import (
    RngStream,
    WishartParams,
    WalkStatsBatch,
    _chunk_edges,
    _run_chunks,
    haar_orthogonal,
    sample_stats_batch,
    sample_walk_batch,
    wishart_sample,
)
from .spd import compose, dist_from_identity, riemannian_distance

WILSON_Z_95 = 1.959963984540054  # two-sided 95%


def wilson_interval(successes: int, n: int, z: float = WILSON_Z_95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise ValueError("need at least one trial")
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == n else min(1.0, center + half)
    return low, high


def wilson_upper(successes: int, n: int, z_score: float = 3.0) -> float:
    """Upper Wilson limit; stays valid at zero observed successes."""
    return wilson_interval(successes, n, z=z_score)[1]


@dataclass(frozen=True)
class TailEstimate:
    """A Monte Carlo probability estimate with its 95% Wilson interval."""

    p_hat: float
    n: int
    ci_low: float
    ci_high: float
    seed: RngStream | None = None

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)


def from_successes(successes: int, n: int, seed: RngStream | None = None) -> TailEstimate:
    low, high = wilson_interval(successes, n)
    return TailEstimate(p_hat=successes / n, n=n, ci_low=low, ci_high=high, seed=seed)


def estimate_probability(
    sampler,
    n_samples: int,
    rng: RngStream,
    chunk_size: int = 10_000,
    threads: int = 1,
) -> TailEstimate:
    """Estimate P(event) for ``sampler(generator, count) -> bool array``.

    Deterministic given ``rng`` and the chunking policy.
    """
    if n_samples < 100:
        raise ValueError(f"need at least 100 samples, got {n_samples}")
    edges = _chunk_edges(n_samples, chunk_size)

    def work(k):
        count = edges[k + 1] - edges[k]
        hits = np.asarray(sampler(rng.shifted(k).generator(), count), dtype=bool)
        if hits.shape != (count,):
            raise ValueError(f"sampler returned shape {hits.shape}, expected ({count},)")
        return int(hits.sum())

    successes = sum(_run_chunks(work, len(edges) - 1, threads))
    return from_successes(successes, n_samples, seed=rng)


# ---------------------------------------------------------------------------
# two-sample Kolmogorov-Smirnov

@dataclass(frozen=True)
class KsResult:
    statistic: float
    n1: int
    n2: int
    p_value: float


def kolmogorov_sf(lam: float, terms: int = 100) -> float:
    """Asymptotic Kolmogorov survival function, first ``terms`` of the series."""
    if lam <= 0.0:
        return 1.0
    total = 0.0
    for k in range(1, terms + 1):
        total += (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
    return min(max(2.0 * total, 0.0), 1.0)


def ks_two_sample(x, y) -> KsResult:
    """Exact sup-distance of empirical CDFs with the asymptotic p-value."""
    xs = np.sort(np.asarray(x, dtype=float))
    ys = np.sort(np.asarray(y, dtype=float))
    n1, n2 = xs.size, ys.size
    if n1 < 50 or n2 < 50:
        raise ValueError(f"samples too small for the asymptotic p-value: {n1}, {n2}")
    grid = np.concatenate([xs, ys])
    cdf1 = np.searchsorted(xs, grid, side="right") / n1
    cdf2 = np.searchsorted(ys, grid, side="right") / n2
    d = float(np.abs(cdf1 - cdf2).max())
    effective = math.sqrt(n1 * n2 / (n1 + n2))
    return KsResult(statistic=d, n1=n1, n2=n2, p_value=kolmogorov_sf(effective * d))


# ---------------------------------------------------------------------------
# suite reports

def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


@dataclass(frozen=True)
class Check:
    """One named pass/fail comparison inside a suite report."""

    name: str
    observed: float
    reference: float
    passed: bool


@dataclass(frozen=True)
class KsSuiteReport:
    params: WishartParams
    n_samples: int
    level: float
    seed: RngStream
    checks: list = field(default_factory=list)  # (name, KsResult, expect_reject)

    @property
    def passed(self) -> bool:
        return all(
            (res.p_value < self.level) == expect_reject
            for _, res, expect_reject in self.checks
        )

    def to_csv(self) -> str:
        lines = ["check,statistic,p_value,expect_reject,passed"]
        for name, res, expect_reject in self.checks:
            ok = (res.p_value < self.level) == expect_reject
            lines.append(
                f"{name},{_fmt(res.statistic)},{_fmt(res.p_value)},"
                f"{int(expect_reject)},{int(ok)}"
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CheckReport:
    params: WishartParams
    n: int
    n_samples: int
    seed: RngStream
    checks: list = field(default_factory=list)  # list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_csv(self) -> str:
        lines = ["check,observed,reference,passed"]
        for c in self.checks:
            lines.append(f"{c.name},{_fmt(c.observed)},{_fmt(c.reference)},{int(c.passed)}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DominationRow:
    t: float
    p_hat: float
    ci_low: float
    ci_high: float
    bound_raw: float
    bound_clamped: float
    bound_name: str
    seed: int
    n_samples: int
    violation: bool


@dataclass(frozen=True)
class DominationReport:
    params: WishartParams
    n: int
    rows: list
    geometric_consistent: bool

    @property
    def violations(self) -> int:
        return sum(r.violation for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.geometric_consistent

    def to_csv(self) -> str:
        lines = ["t,p_hat,ci_low,ci_high,bound_raw,bound_clamped,bound_name,seed,N"]
        for r in self.rows:
            lines.append(
                f"{_fmt(r.t)},{_fmt(r.p_hat)},{_fmt(r.ci_low)},{_fmt(r.ci_high)},"
                f"{_fmt(r.bound_raw)},{_fmt(r.bound_clamped)},{r.bound_name},"
                f"{r.seed},{r.n_samples}"
            )
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# distributional identity suite

def invariance_suite(
    params: WishartParams, n_samples: int, rng: RngStream, level: float = 0.01
) -> KsSuiteReport:
    """KS gates for the composition's distributional identities.

    Compares the scalar observable ``d_R(I, .)`` between independently
    sampled ensembles: permutation invariance, associativity in
    distribution, invariance of distances under common composition, plus a
    deliberately broken comparison that must be rejected (test power).

    The right-composition pair ``(A o X, B o X)`` is realized at the group
    level, ``A^{1/2} k1 (X) k1' A^{1/2}`` with independent Haar angles
    ``k1``/``k2`` (the polar parts of the underlying group elements); the
    left pair needs no twist since its distance is congruence-exact.  Note
    the right-composition gates fail: the pair distance there is driven by
    ``g_X^{-1} (g_A^{-1} g_B) g_X``, a conjugation that preserves
    eigenvalues but not the singular values behind the distance, so the
    right-hand law genuinely differs from ``d_R(A, B)``.
    """
    if n_samples < 10_000:
        raise ValueError("invariance suite needs at least 1e4 samples per ensemble")

    draws = {}

    def wish(idx: int) -> np.ndarray:
        if idx not in draws:
            draws[idx] = wishart_sample(params, rng.shifted(idx), size=n_samples)
        return draws[idx]

    def haar(idx: int) -> np.ndarray:
        return haar_orthogonal(params.m, rng.shifted(idx), size=n_samples)

    checks = []

    # permutation invariance of the three-step composition
    left = dist_from_identity(compose(compose(wish(0), wish(1)), wish(2)))
    permuted = dist_from_identity(compose(compose(wish(5), wish(3)), wish(4)))
    checks.append(("permutation", ks_two_sample(left, permuted), False))

    # associativity in distribution
    assoc_left = dist_from_identity(compose(compose(wish(6), wish(7)), wish(8)))
    assoc_right = dist_from_identity(compose(wish(9), compose(wish(10), wish(11))))
    checks.append(("associativity", ks_two_sample(assoc_left, assoc_right), False))

    # distance invariance under common composition, both sides
    x, a, b = wish(12), wish(13), wish(14)
    d_left = riemannian_distance(compose(x, a), compose(x, b))
    d_plain = riemannian_distance(wish(15), wish(16))
    x2, a2, b2 = wish(17), wish(18), wish(19)
    k1, k2 = haar(23), haar(24)
    xa = k1 @ x2 @ np.swapaxes(k1, -1, -2)
    xb = k2 @ x2 @ np.swapaxes(k2, -1, -2)
    d_right = riemannian_distance(compose(a2, xa), compose(b2, xb))
    checks.append(("left_composition", ks_two_sample(d_left, d_plain), False))
    checks.append(("right_composition", ks_two_sample(d_right, d_plain), False))
    checks.append(("left_vs_right", ks_two_sample(d_left, d_right), False))

    # negative control: one step vs two steps must be distinguishable
    control_one = dist_from_identity(wish(20))
    control_two = dist_from_identity(compose(wish(21), wish(22)))
    checks.append(("negative_control", ks_two_sample(control_one, control_two), True))

    return KsSuiteReport(
        params=params, n_samples=n_samples, level=level, seed=rng, checks=checks
    )


# ---------------------------------------------------------------------------
# martingale-flavored empirical checks

def martingale_suite(
    params: WishartParams,
    n: int,
    n_samples: int,
    rng: RngStream,
    chunk_size: int = 10_000,
) -> CheckReport:
    """Empirical checks of the walk's monotone/mean structure.

    (i) running maxima of step and partial distances never decrease along
    any path; (ii) the mean of the final composition is ``(2a)^n I``
    entrywise within four standard errors (the steps have mean ``2a I``, so
    the normalized walk with steps ``X/(2a)`` is the martingale case);
    (iii) Markov's inequality holds empirically on a threshold grid.
    """
    if n_samples < 10_000:
        raise ValueError("martingale suite needs at least 1e4 samples")
    m = params.m
    edges = _chunk_edges(n_samples, chunk_size)
    sum_final = np.zeros((m, m))
    sumsq_final = np.zeros((m, m))
    step_parts = []
    partial_parts = []
    mono_violations = 0
    for k in range(len(edges) - 1):
        batch = sample_walk_batch(params, n, edges[k + 1] - edges[k], rng.shifted(k))
        final = batch.partials[:, -1]
        sum_final += final.sum(axis=0)
        sumsq_final += (final ** 2).sum(axis=0)
        step = dist_from_identity(batch.steps)
        part = dist_from_identity(batch.partials)
        running_step = np.maximum.accumulate(step, axis=1)
        running_part = np.maximum.accumulate(part, axis=1)
        mono_violations += int((np.diff(running_step, axis=1) < 0).sum())
        mono_violations += int((np.diff(running_part, axis=1) < 0).sum())
        step_parts.append(running_step[:, -1])
        partial_parts.append(running_part[:, -1])
    max_step = np.concatenate(step_parts)
    max_partial = np.concatenate(partial_parts)

    checks = [Check("monotonicity_violations", float(mono_violations), 0.0,
                    mono_violations == 0)]

    mean = sum_final / n_samples
    var = sumsq_final / n_samples - mean ** 2
    se = np.sqrt(np.maximum(var, 0.0) / n_samples)
    target = (2.0 * params.a) ** n * np.eye(m)
    worst = float((np.abs(mean - target) - 4.0 * se).max())
    checks.append(Check("mean_growth_4sigma_excess", worst, 0.0, worst <= 0.0))

    for label, values in (("step_max", max_step), ("partial_max", max_partial)):
        sample_mean = float(values.mean())
        se_mean = float(values.std(ddof=1) / math.sqrt(n_samples))
        for factor in (0.5, 1.0, 2.0, 4.0):
            t = factor * sample_mean
            if t <= 0.0:
                continue
            hits = int((values >= t).sum())
            est = from_successes(hits, n_samples)
            slack = 3.0 * (est.half_width + se_mean / t)
            markov = sample_mean / t + slack
            checks.append(Check(
                f"markov_{label}_at_{factor}x_mean",
                est.p_hat, markov, est.p_hat <= markov,
            ))

    return CheckReport(params=params, n=n, n_samples=n_samples, seed=rng, checks=checks)


# ---------------------------------------------------------------------------
# bound domination suite

def domination_suite(
    params: WishartParams,
    n: int,
    t_grid,
    n_samples: int,
    rng: RngStream,
    j_max: int | None = None,
    chunk_size: int = 10_000,
    threads: int = 1,
    slack_sigmas: float = 3.0,
) -> DominationReport:
    """Analytic bounds versus Monte Carlo estimates on a threshold grid.

    A row is a violation when ``clamped bound < estimate - 3 * (Wilson CI
    half-width)``; the report also records whether the geometric-series
    bound stayed below the plain Chernoff bound everywhere.
    """
    stats = sample_stats_batch(
        params, n, n_samples, rng, chunk_size=chunk_size, threads=threads
    )
    cdf_applicable = params.a > 0.5 * (params.m + 1)
    j_cap = j_max if j_max is not None else min(n, 4)
    rows = []
    geometric_ok = True
    mc_stream_base = 1_000_000  # clear of the ensemble's chunk streams
    for idx, t in enumerate(t_grid):
        t = float(t)
        reports = [
            _bounds.step_max_tail_bound(params, n, t),
            _bounds.walk_max_tail_bound(params, n, t),
            _bounds.walk_max_tail_bound_geometric(params, n, t),
        ]
        if reports[2].raw > reports[1].raw + 1e-12:
            geometric_ok = False
        if cdf_applicable:
            reports.append(_bounds.walk_max_cdf_bound(
                params, n, t, j_max=j_cap,
                mc_budget=n_samples,
                rng=rng.shifted(mc_stream_base + idx) if j_cap >= 2 else None,
            ))
        for rep in reports:
            if rep.bound_name == "walk_max_cdf":
                hits = int((stats.max_partial_dist <= t).sum())
            elif rep.bound_name == "step_max_tail":
                hits = int((stats.max_step_dist > t).sum())
            else:
                hits = int((stats.max_partial_dist > t).sum())
            est = from_successes(hits, n_samples, seed=rng)
            violation = rep.clamped < est.p_hat - slack_sigmas * est.half_width
            rows.append(DominationRow(
                t=t, p_hat=est.p_hat, ci_low=est.ci_low, ci_high=est.ci_high,
                bound_raw=rep.raw, bound_clamped=rep.clamped,
                bound_name=rep.bound_name, seed=rng.seed, n_samples=n_samples,
                violation=violation,
            ))
    return DominationReport(
        params=params, n=n, rows=rows, geometric_consistent=geometric_ok
    )


def walk_stats_ensemble(
    params: WishartParams,
    n: int,
    n_samples: int,
    rng: RngStream,
    chunk_size: int = 10_000,
    threads: int = 1,
) -> WalkStatsBatch:
    """Convenience re-export of the chunked stats sampler."""
    return sample_stats_batch(
        params, n, n_samples, rng, chunk_size=chunk_size, threads=threads
    )
