"""Analytic tail bounds for the Wishart composition walk.

Three bounds are implemented, each an explicit function of the walk
parameters:

* ``step_max_tail_bound`` -- the largest step distance exceeds ``t``:
  one minus the n-th power of the extreme-eigenvalue band probability.
* ``walk_max_tail_bound`` -- the largest partial-product distance exceeds
  ``t``: a Chernoff bound whose exponent is minimized over the convex
  domain D of the exponential-moment integral (plus a sharper variant that
  keeps the full geometric series of moment bounds).
* ``walk_max_cdf_bound`` -- an upper bound on the *distribution function*
  of the largest partial-product distance, via stochastic domination of the
  determinant by a product of chi-squared variables.

Raw values may exceed one; the clamped value ``min(raw, 1)`` is what enters
downstream inequality arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc, logsumexp

from .sampling import RngStream, WishartParams, as_generator
from .special import (
    DomainError,
    band_probability,
    in_chernoff_domain,
    log_k_integral,
    log_norm_const,
    log_selberg_integral,
)

PROBE_CLAMP = 1e-9
MAX_PASSES = 200


@dataclass(frozen=True)
class ChernoffEval:
    """One evaluation of the exponential-moment machinery at ``(v, theta)``.

    ``log_mgf_bound`` bounds the log moment generating function of a single
    step distance; ``g`` is exactly twice that.
    """

    v: float
    theta: float
    log_norm_const: float
    log_selberg: float
    log_k: float
    log_mgf_bound: float
    g: float


def chernoff_eval(params: WishartParams, v: float, theta: float) -> ChernoffEval:
    if not in_chernoff_domain(params, v, theta):
        raise DomainError(f"(v, theta) = ({v}, {theta}) outside D")
    log_c = log_norm_const(params)
    log_i = log_selberg_integral(params, theta)
    log_k = log_k_integral(params, v, theta)
    log_mgf = log_c + 0.5 * log_i + 0.5 * params.m * log_k
    return ChernoffEval(
        v=v, theta=theta, log_norm_const=log_c, log_selberg=log_i,
        log_k=log_k, log_mgf_bound=log_mgf, g=2.0 * log_mgf,
    )


def chernoff_objective(
    params: WishartParams, n: int, t: float, v: float, theta: float
) -> float:
    """Exponent ``-v t + (n/2) G(v, theta)``; jointly strictly convex on D."""
    ev = chernoff_eval(params, v, theta)
    return -v * t + 0.5 * n * ev.g


@dataclass(frozen=True)
class ConvexSearchResult:
    v: float
    theta: float
    value: float
    evaluations: int
    on_boundary: bool


_INVPHI = 0.5 * (math.sqrt(5.0) - 1.0)


def _golden_section(f, lo: float, hi: float, xtol: float):
    """Minimize a unimodal function on [lo, hi]; returns (x, f(x))."""
    a, b = lo, hi
    h = b - a
    c = b - _INVPHI * h
    d = a + _INVPHI * h
    fc, fd = f(c), f(d)
    while h > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = b - _INVPHI * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + _INVPHI * h
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def minimize_over_D(params: WishartParams, objective, tol: float = 1e-8) -> ConvexSearchResult:
    """Minimize a strictly convex objective over the Chernoff domain D.

    D is mapped onto the open unit square, ``theta = p`` and
    ``v = q * ((2a - m - 1) p + 1)/2``, probes clamped to
    ``[1e-9, 1 - 1e-9]``; alternating golden-section passes over the two
    coordinates run until a full pass improves the objective by less than
    ``tol`` (relative).  Both coordinate slices are restrictions of a
    jointly convex function to affine lines, hence unimodal.
    """
    slope = 2.0 * params.a - params.m - 1.0
    evals = 0

    def v_limit(theta: float) -> float:
        return 0.5 * (slope * theta + 1.0)

    def probe(p: float, q: float) -> float:
        nonlocal evals
        vm = v_limit(p)
        if vm <= 0.0:
            return math.inf
        evals += 1
        try:
            val = objective(q * vm, p)
        except DomainError:
            return math.inf
        if math.isnan(val):
            raise RuntimeError(
                f"objective is NaN at interior probe v={q * vm}, theta={p}"
            )
        return val

    lo, hi = PROBE_CLAMP, 1.0 - PROBE_CLAMP
    xtol = 1e-10
    p, q = 0.5, 0.5
    best = probe(p, q)
    for _ in range(MAX_PASSES):
        q, _ = _golden_section(lambda qq: probe(p, qq), lo, hi, xtol)
        p, current = _golden_section(lambda pp: probe(pp, q), lo, hi, xtol)
        if not math.isfinite(current):
            continue
        if best - current <= tol * max(1.0, abs(current)):
            best = min(best, current)
            break
        best = current
    edge = 10.0 * PROBE_CLAMP
    on_boundary = p <= lo + edge or p >= hi - edge or q >= hi - edge
    return ConvexSearchResult(
        v=q * v_limit(p), theta=p, value=best, evaluations=evals,
        on_boundary=on_boundary,
    )


@dataclass(frozen=True)
class BoundReport:
    """A computed bound: raw value (may exceed one) and its probability clamp."""

    bound_name: str
    params: WishartParams
    n: int
    t: float
    raw: float
    clamped: float
    minimizer: tuple[float, float] | None
    evaluations: int
    status: str  # converged | boundary | clamped-only
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "bound_name": self.bound_name,
            "params": {"m": self.params.m, "a": self.params.a},
            "n": self.n,
            "t": self.t,
            "raw": self.raw,
            "clamped": self.clamped,
            "minimizer": list(self.minimizer) if self.minimizer else None,
            "status": self.status,
        }


def _check_walk_args(n: int, t: float):
    if n < 1:
        raise ValueError(f"walk length must be >= 1, got {n}")
    if t < 0.0 or not math.isfinite(t):
        raise ValueError(f"threshold must be finite and >= 0, got {t}")


def _band_endpoints(m: int, t: float) -> tuple[float, float]:
    z = t / math.sqrt(m)
    u = math.exp(max(-z, -690.0))
    v = math.exp(min(z, 700.0))
    return max(u, 1e-300), v


def step_max_tail_bound(params: WishartParams, n: int, t: float) -> BoundReport:
    """Bound on P(max step distance > t):
    ``1 - [P(all eigenvalues in [exp(-t/sqrt(m)), exp(t/sqrt(m))])]^n``.

    Exact for ``m = 1``; nonincreasing in ``t`` and nondecreasing in ``n``.
    """
    _check_walk_args(n, t)
    if t == 0.0:
        raw = 1.0
    else:
        u, v = _band_endpoints(params.m, t)
        p_band = min(max(band_probability(params, u, v), 0.0), 1.0)
        raw = 1.0 - p_band ** n
    return BoundReport(
        bound_name="step_max_tail", params=params, n=n, t=t,
        raw=raw, clamped=min(raw, 1.0), minimizer=None, evaluations=1,
        status="converged",
    )


def _tail_report(name, params, n, t, search, log_raw) -> BoundReport:
    raw = math.exp(log_raw) if log_raw < 700.0 else math.inf
    clamped = min(raw, 1.0)
    if search.on_boundary:
        status = "boundary"
    elif raw > 1.0:
        status = "clamped-only"
    else:
        status = "converged"
    return BoundReport(
        bound_name=name, params=params, n=n, t=t, raw=raw, clamped=clamped,
        minimizer=(search.v, search.theta), evaluations=search.evaluations,
        status=status,
    )


def walk_max_tail_bound(params: WishartParams, n: int, t: float, tol: float = 1e-8) -> BoundReport:
    """Chernoff bound on P(max partial-product distance > t):
    ``n exp(inf_D [-v t + (n/2) G(v, theta)])``."""
    _check_walk_args(n, t)
    search = minimize_over_D(
        params, lambda v, theta: chernoff_objective(params, n, t, v, theta), tol=tol
    )
    return _tail_report(
        "walk_max_tail", params, n, t, search, math.log(n) + search.value
    )


def geometric_series_objective(
    params: WishartParams, n: int, t: float, v: float, theta: float
) -> float:
    """Exponent of the sharper geometric-series variant: ``-v t +
    log sum_{j=1}^n B^j`` with ``B`` the single-step moment bound."""
    ev = chernoff_eval(params, v, theta)
    x = ev.log_mgf_bound  # log B
    if abs(math.expm1(x)) < 1e-12:
        log_sum = math.log(n)  # sum collapses to n as B -> 1
    else:
        log_sum = float(logsumexp(np.arange(1, n + 1) * x))
    return -v * t + log_sum


def walk_max_tail_bound_geometric(
    params: WishartParams, n: int, t: float, tol: float = 1e-8
) -> BoundReport:
    """Geometric-series refinement of :func:`walk_max_tail_bound`.

    Never exceeds the plain bound at a shared ``(v, theta)`` because the
    single-step moment bound is at least one on all of D.
    """
    _check_walk_args(n, t)
    search = minimize_over_D(
        params,
        lambda v, theta: geometric_series_objective(params, n, t, v, theta),
        tol=tol,
    )
    return _tail_report(
        "walk_max_tail_geometric", params, n, t, search, search.value
    )


@dataclass(frozen=True)
class ChiSquareLaw:
    """Chi-squared law with ``(2a - m - 1) m`` degrees of freedom dominating
    ``m (det X)^{1/m}`` for a Wishart step X."""

    df: float

    def __post_init__(self):
        if not self.df > 0:
            raise DomainError(
                f"chi-squared degrees of freedom must be positive, got {self.df}"
            )


def dominating_chi_square(params: WishartParams) -> ChiSquareLaw:
    df = (2.0 * params.a - params.m - 1.0) * params.m
    if not df > 0:
        raise DomainError(
            f"determinant domination needs a > (m+1)/2 = {0.5 * (params.m + 1)}, "
            f"got a = {params.a} (df = {df})"
        )
    return ChiSquareLaw(df=df)


def walk_max_cdf_bound(
    params: WishartParams,
    n: int,
    t: float,
    j_max: int,
    mc_budget: int | None = None,
    rng: RngStream | None = None,
) -> BoundReport:
    """Upper bound on P(max partial-product distance <= t).

    The ``j = 1`` term is the exact chi-squared probability
    ``P(chi^2_df <= m exp(t/sqrt(m)))``; terms ``j >= 2`` compare the sum of
    ``j`` log chi-squared draws against ``j log m + t/sqrt(m)`` by Monte
    Carlo, inflated to a z=3 Wilson upper limit so the reported minimum
    stays an upper bound with 99.7% confidence per term.

    Requires ``a > (m + 1)/2``.
    """
    _check_walk_args(n, t)
    law = dominating_chi_square(params)
    if not 1 <= j_max <= n:
        raise ValueError(f"need 1 <= j_max <= n, got j_max={j_max}, n={n}")
    m = params.m
    z = t / math.sqrt(m)
    if z > 700.0:
        terms = [1.0]
    else:
        terms = [float(gammainc(0.5 * law.df, 0.5 * m * math.exp(z)))]
    note = "min at j=1"
    if j_max >= 2:
        if rng is None:
            raise ValueError("Monte Carlo terms (j_max >= 2) need an RngStream")
        from .mc import wilson_upper

        budget = int(mc_budget) if mc_budget else 100_000
        g = as_generator(rng)
        logs = np.log(g.chisquare(law.df, size=(budget, j_max)))
        sums = np.cumsum(logs, axis=1)
        for j in range(2, j_max + 1):
            hits = int((sums[:, j - 1] <= j * math.log(m) + z).sum())
            terms.append(wilson_upper(hits, budget, z_score=3.0))
    best_j = int(np.argmin(terms)) + 1
    raw = float(min(terms))
    if best_j > 1:
        note = f"min at j={best_j} (Monte Carlo term, z=3 inflated)"
    return BoundReport(
        bound_name="walk_max_cdf", params=params, n=n, t=t,
        raw=raw, clamped=min(raw, 1.0), minimizer=None, evaluations=j_max,
        status="converged", note=note,
    )
